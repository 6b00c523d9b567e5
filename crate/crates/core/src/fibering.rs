//! Fibering maps `μ_u(t) = φ(tu)` and the projection of a ray onto the
//! Nehari manifold.
//!
//! Along a ray the gradient integrals are homogeneous, so they are computed
//! once; only the reaction quadrature is re-evaluated for each `t`.

use serde::Serialize;

use crate::energy::{defect_formula, gradient_integrals, tolerance_scale, QuadratureSamples};
use crate::error::{invalid, Error, Result};
use crate::mesh::Field;
use crate::problem::DoublePhaseProblem;

/// Default relative tolerance on `t` for the projection.
pub const DEFAULT_PROJECTION_TOL: f64 = 1e-12;
const BRACKET_LIMIT: f64 = 1048576.0; // 2^20

/// `t ↦ φ(tu)` for a fixed nonzero `u`.
pub struct FiberingMap<'a> {
    problem: &'a DoublePhaseProblem,
    grad_p: f64,
    grad_q: f64,
    samples: QuadratureSamples,
}

impl<'a> FiberingMap<'a> {
    pub fn new(problem: &'a DoublePhaseProblem, u: &Field) -> Result<FiberingMap<'a>> {
        u.check_mesh(problem.mesh())?;
        if u.is_zero() {
            return invalid("fibering map needs u != 0");
        }
        Ok(FiberingMap::from_values(problem, u.values()))
    }

    pub(crate) fn from_values(problem: &'a DoublePhaseProblem, values: &[f64]) -> FiberingMap<'a> {
        let (grad_p, grad_q) = gradient_integrals(problem, values);
        FiberingMap { problem, grad_p, grad_q, samples: QuadratureSamples::new(problem, values) }
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        let pb = self.problem;
        Ok(t.powf(pb.p) * self.grad_p / pb.p + t.powf(pb.q) * self.grad_q / pb.q
            - self.samples.potential(pb, t)?)
    }

    /// `t^{p-1}∫|Du|^p + t^{q-1}∫a|Du|^q - ∫f(z,tu)u`.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        let pairing = self.samples.pairing(self.problem, t)?;
        Ok(defect_formula(self.problem, self.grad_p, self.grad_q, t, pairing))
    }

    /// `∫f(z,tu)u / t^{p-1} - t^{q-p}∫a|Du|^q`; the derivative vanishes where
    /// this equals `∫|Du|^p`, and it is nondecreasing for admissible reactions.
    pub fn balance(&self, t: f64) -> Result<f64> {
        let pb = self.problem;
        Ok(self.samples.pairing(pb, t)? / t.powf(pb.p - 1.0) - t.powf(pb.q - pb.p) * self.grad_q)
    }

    pub fn grad_p(&self) -> f64 {
        self.grad_p
    }
}

/// `(μ_u(t), μ'_u(t))`.
pub fn fibering_values(problem: &DoublePhaseProblem, u: &Field, t: f64) -> Result<(f64, f64)> {
    if !(t > 0.0 && t.is_finite()) {
        return invalid(format!("fibering parameter must be positive, got {t}"));
    }
    let map = FiberingMap::new(problem, u)?;
    Ok((map.value(t)?, map.derivative(t)?))
}

#[derive(Debug, Clone)]
pub struct FiberingResult {
    pub t_u: f64,
    pub projected: Field,
    pub defect_at_root: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

/// Scalar part of the projection: the root of `μ'_u` and its bracket.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RayRoot {
    pub t: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

pub(crate) fn ray_root(map: &FiberingMap<'_>, tol: f64) -> Result<RayRoot> {
    let d1 = map.derivative(1.0)?;
    let mut iterations = 0;
    let (mut lo, mut hi, mut d_lo, mut d_hi);
    if d1 > 0.0 {
        lo = 1.0;
        d_lo = d1;
        hi = 2.0;
        d_hi = map.derivative(hi)?;
        while d_hi > 0.0 {
            iterations += 1;
            if hi >= BRACKET_LIMIT {
                return Err(Error::ProjectionFailure(format!(
                    "fibering derivative still positive at t = {hi}"
                )));
            }
            lo = hi;
            d_lo = d_hi;
            hi *= 2.0;
            d_hi = map.derivative(hi)?;
        }
    } else if d1 < 0.0 {
        hi = 1.0;
        d_hi = d1;
        lo = 0.5;
        d_lo = map.derivative(lo)?;
        while d_lo <= 0.0 {
            iterations += 1;
            if lo <= 1.0 / BRACKET_LIMIT {
                return Err(Error::ProjectionFailure(format!(
                    "fibering derivative still nonpositive at t = {lo}"
                )));
            }
            hi = lo;
            d_hi = d_lo;
            lo *= 0.5;
            d_lo = map.derivative(lo)?;
        }
    } else {
        return Ok(RayRoot { t: 1.0, bracket: (1.0 - tol, 1.0 + tol), iterations: 0 });
    }

    // invariant: d_lo > 0 >= d_hi
    while hi - lo > tol * lo {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let d = map.derivative(mid)?;
        if d > 0.0 {
            lo = mid;
            d_lo = d;
        } else {
            hi = mid;
            d_hi = d;
        }
    }
    // one secant step inside the final bracket
    let mut t = lo + d_lo * (hi - lo) / (d_lo - d_hi);
    if !(t > lo && t < hi) {
        t = 0.5 * (lo + hi);
    }
    if !(t > lo && t < hi) {
        // bracket collapsed to adjacent floats
        t = if d_lo.abs() <= d_hi.abs() { lo } else { hi };
    }
    Ok(RayRoot { t, bracket: (lo, hi), iterations })
}

/// Finds the unique `t_u > 0` with `t_u u` on the Nehari manifold by bracket
/// expansion from `t = 1` (doubling or halving up to `2^±20`) and bisection to
/// relative width `tol`.
pub fn project_to_nehari(problem: &DoublePhaseProblem, u: &Field, tol: f64) -> Result<FiberingResult> {
    if !(tol > 0.0) {
        return invalid(format!("projection tolerance must be positive, got {tol}"));
    }
    let map = FiberingMap::new(problem, u)?;
    let root = ray_root(&map, tol)?;
    let projected = u.scaled(root.t);
    let defect_at_root = root.t * map.derivative(root.t)?;
    Ok(FiberingResult {
        t_u: root.t,
        projected,
        defect_at_root,
        bracket: root.bracket,
        iterations: root.iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiberingRow {
    pub t: f64,
    pub mu: f64,
    pub dmu: f64,
}

/// `(t, μ_u(t), μ'_u(t))` for every `t` of a sorted positive grid.
pub fn fibering_curve(problem: &DoublePhaseProblem, u: &Field, t_grid: &[f64]) -> Result<Vec<FiberingRow>> {
    if t_grid.is_empty() {
        return invalid("fibering grid is empty");
    }
    if t_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return invalid("fibering grid must be positive and sorted");
    }
    let map = FiberingMap::new(problem, u)?;
    t_grid
        .iter()
        .map(|&t| Ok(FiberingRow { t, mu: map.value(t)?, dmu: map.derivative(t)? }))
        .collect()
}

/// Geometric grid of `n` points from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1).max(1) as f64).exp())
        .collect()
}

/// Number of strict sign changes of `μ'` along the rows (zeros are skipped).
pub fn sign_changes(rows: &[FiberingRow]) -> usize {
    let signs: Vec<f64> = rows.iter().map(|r| r.dmu).filter(|d| *d != 0.0).map(f64::signum).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Tolerance scale of the projected field.
pub fn projection_scale(problem: &DoublePhaseProblem, res: &FiberingResult) -> Result<f64> {
    let e = crate::energy::energy(problem, &res.projected)?.total();
    Ok(tolerance_scale(e, &res.projected))
}
