//! First Dirichlet eigenpair of the p-Laplacian and the double-phase
//! quotient.
//!
//! The eigenvalue is the minimum of `‖Du‖_p^p / ‖u‖_p^p`. It is found by
//! descent in the discrete `H^1_0` metric, renormalizing to `‖u‖_p = 1` and
//! clamping to `u >= 0` after every step (`|u|` never has a larger quotient).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::gradient_integrals;
use crate::error::{invalid, Result};
use crate::mesh::{integrate_power_raw, Field, Mesh};
use crate::metric::SobolevMetric;
use crate::problem::DoublePhaseProblem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenOptions {
    pub max_iters: usize,
    /// Stop when the metric norm of the quotient gradient, relative to the
    /// quotient, drops below this.
    pub tol: f64,
    pub armijo_c: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { max_iters: 20_000, tol: 1e-9, armijo_c: 1e-4 }
    }
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub p: f64,
    pub lambda1: f64,
    /// Nonnegative, `‖u1‖_p = 1`.
    pub u1: Field,
    pub iterations: usize,
    pub converged: bool,
    pub quotient_trace: Vec<f64>,
}

fn dirichlet_p(mesh: &Mesh, p: f64, values: &[f64]) -> f64 {
    let mut gp = 0.0;
    for (e, &m) in mesh.element_measures().iter().enumerate() {
        let mut g = [0.0; 2];
        for (&v, b) in mesh.element(e).iter().zip(mesh.basis_gradients(e)) {
            g[0] += values[v] * b[0];
            g[1] += values[v] * b[1];
        }
        gp += m * g[0].hypot(g[1]).powf(p);
    }
    gp
}

/// `‖Du‖_p^p / ‖u‖_p^p`.
pub fn rayleigh_quotient(mesh: &Mesh, p: f64, u: &Field) -> Result<f64> {
    if u.is_zero() {
        return invalid("Rayleigh quotient is undefined at u = 0");
    }
    Ok(dirichlet_p(mesh, p, u.values()) / integrate_power_raw(mesh, u.values(), p))
}

/// `(‖Du‖_p^p + (p/q)∫a|Du|^q) / ‖u‖_p^p`.
pub fn theta_quotient(problem: &DoublePhaseProblem, u: &Field) -> Result<f64> {
    u.check_mesh(problem.mesh())?;
    if u.is_zero() {
        return invalid("double-phase quotient is undefined at u = 0");
    }
    let (gp, gq) = gradient_integrals(problem, u.values());
    let norm = integrate_power_raw(problem.mesh(), u.values(), problem.p);
    Ok((gp + problem.p / problem.q * gq) / norm)
}

/// Gradient of the quotient with respect to the nodal values.
fn quotient_gradient(mesh: &Mesh, p: f64, values: &[f64], quotient: f64, norm: f64) -> Vec<f64> {
    let mut g_out = vec![0.0; values.len()];
    let rule = mesh.rule();
    for e in 0..mesh.element_count() {
        let m = mesh.element_measures()[e];
        let el = mesh.element(e);
        let grads = mesh.basis_gradients(e);
        let mut g = [0.0; 2];
        for (&v, b) in el.iter().zip(grads) {
            g[0] += values[v] * b[0];
            g[1] += values[v] * b[1];
        }
        let g2 = g[0] * g[0] + g[1] * g[1];
        let coef = if g2 > 0.0 { p * m * g2.powf(0.5 * (p - 2.0)) } else { 0.0 };
        for (&v, b) in el.iter().zip(grads) {
            g_out[v] += coef * (g[0] * b[0] + g[1] * b[1]);
        }
        for (bary, w) in rule {
            let u: f64 = el.iter().enumerate().map(|(k, &v)| bary[k] * values[v]).sum();
            let du = p * w * m * u.abs().powf(p - 2.0) * u;
            if u != 0.0 {
                for (k, &v) in el.iter().enumerate() {
                    g_out[v] -= quotient * du * bary[k];
                }
            }
        }
    }
    for (v, x) in g_out.iter_mut().enumerate() {
        *x = if mesh.is_boundary(v) { 0.0 } else { *x / norm };
    }
    g_out
}

fn normalize_nonneg(mesh: &Mesh, p: f64, values: &mut [f64]) -> Option<f64> {
    for (v, x) in values.iter_mut().enumerate() {
        if *x < 0.0 || mesh.is_boundary(v) {
            *x = 0.0;
        }
    }
    let norm = integrate_power_raw(mesh, values, p);
    if !(norm > 0.0 && norm.is_finite()) {
        return None;
    }
    let s = norm.powf(-1.0 / p);
    values.iter_mut().for_each(|x| *x *= s);
    Some(s)
}

/// Positive bump vanishing on the boundary: `Π sin(π (x_i - a_i)/L_i)`.
pub fn bump(mesh: &Arc<Mesh>) -> Field {
    let (lo, hi) = bounding_box(mesh);
    let dim = mesh.dim();
    Field::from_fn(mesh.clone(), |x| {
        (0..dim)
            .map(|i| (std::f64::consts::PI * (x[i] - lo[i]) / (hi[i] - lo[i])).sin().max(0.0))
            .product()
    })
}

pub(crate) fn bounding_box(mesh: &Mesh) -> ([f64; 2], [f64; 2]) {
    mesh.vertices().iter().fold(
        ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]),
        |(lo, hi), v| ([lo[0].min(v[0]), lo[1].min(v[1])], [hi[0].max(v[0]), hi[1].max(v[1])]),
    )
}

/// Smallest eigenvalue of `-Δ_p` with zero Dirichlet data and its positive,
/// `L^p`-normalized eigenfunction.
pub fn first_eigenpair(mesh: &Arc<Mesh>, p: f64, options: &EigenOptions) -> Result<EigenResult> {
    if !(p > 1.0 && p.is_finite()) {
        return invalid(format!("eigenvalue problem needs p > 1, got {p}"));
    }
    if options.max_iters == 0 || !(options.tol > 0.0) {
        return invalid("eigen options need max_iters >= 1 and tol > 0");
    }
    let metric = SobolevMetric::laplacian(mesh)?;
    let mut u = bump(mesh).into_values();
    normalize_nonneg(mesh, p, &mut u);
    let mut quotient = dirichlet_p(mesh, p, &u) / integrate_power_raw(mesh, &u, p);
    let mut trace = vec![quotient];
    let mut step: f64 = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iters {
        let norm = integrate_power_raw(mesh, &u, p);
        let grad = quotient_gradient(mesh, p, &u, quotient, norm);
        let dir: Vec<f64> = metric.solve(&grad).into_iter().map(|x| -x).collect();
        let slope: f64 = grad.iter().zip(&dir).map(|(a, b)| a * b).sum();
        if (-slope).sqrt() <= options.tol * quotient {
            converged = true;
            break;
        }
        iterations += 1;
        let try_step = |s: f64| -> Option<(Vec<f64>, f64)> {
            let mut trial: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + s * d).collect();
            normalize_nonneg(mesh, p, &mut trial)?;
            let qt = dirichlet_p(mesh, p, &trial) / integrate_power_raw(mesh, &trial, p);
            (qt <= quotient + options.armijo_c * s * slope).then_some((trial, qt))
        };
        let mut s = (2.0 * step).min(1e6);
        let mut accepted = None;
        while s > 1e-14 {
            accepted = try_step(s);
            if accepted.is_some() {
                break;
            }
            s *= 0.5;
        }
        while let Some((_, best)) = &accepted {
            match try_step(0.5 * s) {
                Some(hit) if hit.1 < *best && s > 1e-14 => {
                    accepted = Some(hit);
                    s *= 0.5;
                }
                _ => break,
            }
        }
        match accepted {
            Some((trial, qt)) if qt < quotient => {
                u = trial;
                quotient = qt;
                step = s;
                trace.push(qt);
            }
            // no representable decrease left
            _ => {
                converged = (-slope).sqrt() <= 1e3 * options.tol * quotient;
                break;
            }
        }
    }
    normalize_nonneg(mesh, p, &mut u);
    let u1 = Field::new(mesh.clone(), u)?;
    let lambda1 = rayleigh_quotient(mesh, p, &u1)?;
    Ok(EigenResult { p, lambda1, u1, iterations, converged, quotient_trace: trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma1Row {
    pub t: f64,
    pub theta: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Table {
    pub lambda1: f64,
    pub rows: Vec<Lemma1Row>,
    /// Least-squares slope of `ln(gap)` against `ln(t)`; expected `-(p - q)`.
    pub fitted_slope: f64,
}

/// Evaluates the double-phase quotient along the ray `t û1`, showing it decays
/// to `λ1` like `t^{q-p}`.
pub fn lemma1_diagnostic(
    problem: &DoublePhaseProblem,
    eigen: &EigenResult,
    t_grid: &[f64],
) -> Result<Lemma1Table> {
    if t_grid.len() < 2 || t_grid.iter().any(|&t| !(t > 0.0)) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("lemma1 grid needs at least two positive increasing values");
    }
    if (eigen.p - problem.p).abs() > 0.0 {
        return invalid("eigenpair was computed for a different p");
    }
    let u1 = &eigen.u1;
    u1.check_mesh(problem.mesh())?;
    let rows: Vec<Lemma1Row> = t_grid
        .iter()
        .map(|&t| {
            let theta = theta_quotient(problem, &u1.scaled(t))?;
            Ok(Lemma1Row { t, theta, gap: theta - eigen.lambda1 })
        })
        .collect::<Result<_>>()?;
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.gap > 0.0).map(|r| (r.t.ln(), r.gap.ln())).collect();
    let fitted_slope = least_squares_slope(&pts);
    Ok(Lemma1Table { lambda1: eigen.lambda1, rows, fitted_slope })
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::mesh::{build_interval_mesh, build_rectangle_mesh};
    use crate::problem::{Reaction, Weight};

    #[test]
    fn quotient_of_sine() {
        let mesh = Arc::new(build_interval_mesh(1.0, 512).unwrap());
        let u = Field::from_fn(mesh.clone(), |x| (PI * x[0]).sin());
        let r = rayleigh_quotient(&mesh, 2.0, &u).unwrap();
        assert!((r - PI * PI).abs() / (PI * PI) < 1e-3);
        assert_eq!(rayleigh_quotient(&mesh, 2.0, &u.scaled(2.0)).unwrap(), r);
        assert!(rayleigh_quotient(&mesh, 2.0, &Field::zeros(mesh.clone())).is_err());
    }

    #[test]
    fn eigenpair_p2_interval() {
        let mesh = Arc::new(build_interval_mesh(1.0, 128).unwrap());
        let res = first_eigenpair(&mesh, 2.0, &EigenOptions::default()).unwrap();
        assert!(res.converged);
        assert!((res.lambda1 - PI * PI).abs() / (PI * PI) < 1e-3);
        assert!(res.u1.values().iter().all(|&v| v >= 0.0));
        assert!((res.u1.integrate_power(2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(res.quotient_trace.windows(2).all(|w| w[1] <= w[0]));
        // infimum property against other fields
        let other = Field::from_fn(mesh.clone(), |x| x[0] * (1.0 - x[0]));
        assert!(rayleigh_quotient(&mesh, 2.0, &other).unwrap() >= res.lambda1 - 1e-10);
    }

    #[test]
    fn eigenpair_p2_square_coarse() {
        let mesh = Arc::new(build_rectangle_mesh(1.0, 1.0, 16, 16).unwrap());
        let res = first_eigenpair(&mesh, 2.0, &EigenOptions::default()).unwrap();
        assert!((res.lambda1 - 2.0 * PI * PI).abs() / (2.0 * PI * PI) < 0.05);
    }

    #[test]
    fn theta_dominates_rayleigh() {
        let mesh = Arc::new(build_interval_mesh(1.0, 64).unwrap());
        let w = Weight::Power { coef: 1.0, center: [0.5, 0.0], alpha: 1.0 };
        let pb = DoublePhaseProblem::new(3.0, 2.0, mesh.clone(), w, Reaction::power(4.0).unwrap(), 0.0).unwrap();
        let u = Field::from_fn(mesh.clone(), |x| x[0] * (1.0 - x[0]) * (3.0 * x[0]).cos());
        let theta = theta_quotient(&pb, &u).unwrap();
        let ray = rayleigh_quotient(&mesh, 3.0, &u).unwrap();
        assert!(theta >= ray);
        // recomposition from module primitives
        let gp: f64 = u
            .gradient()
            .norms()
            .iter()
            .zip(mesh.element_measures())
            .map(|(g, m)| m * g.powi(3))
            .sum();
        let gq: f64 = u
            .gradient()
            .norms()
            .iter()
            .zip(mesh.element_measures())
            .zip(pb.weight_samples())
            .map(|((g, m), a)| m * a * g * g)
            .sum();
        let by_hand = (gp + 1.5 * gq) / u.integrate_power(3.0).unwrap();
        assert!((theta - by_hand).abs() <= 1e-12 * theta);
        assert!(theta_quotient(&pb, &Field::zeros(mesh)).is_err());
    }

    #[test]
    fn slope_of_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0 - 2.0 * i as f64)).collect();
        assert!((least_squares_slope(&pts) + 2.0).abs() < 1e-14);
    }
}
