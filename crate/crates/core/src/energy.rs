//! Discrete energy, its Galerkin gradient and the Nehari defect.
//!
//! With piecewise-linear fields the gradient is constant per element, so the
//! two gradient terms are summed exactly; the reaction terms use the mesh
//! quadrature. The residual is the exact derivative of the discrete energy
//! (up to the flux regularization `epsilon`).

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::mesh::{Field, Point};
use crate::problem::DoublePhaseProblem;

/// The three summands of the energy, plus the raw gradient integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    /// `∫ |Du|^p`.
    pub grad_p: f64,
    /// `∫ a |Du|^q`.
    pub grad_q: f64,
    /// `∫ F(z, u)`.
    pub potential: f64,
    pub p: f64,
    pub q: f64,
}

impl EnergyBreakdown {
    pub fn p_term(&self) -> f64 {
        self.grad_p / self.p
    }

    pub fn q_term(&self) -> f64 {
        self.grad_q / self.q
    }

    pub fn total(&self) -> f64 {
        self.p_term() + self.q_term() - self.potential
    }
}

/// Galerkin residual: entry `i` is the derivative of the energy paired with
/// the hat function of vertex `i`; boundary entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual(pub Vec<f64>);

impl Residual {
    pub fn inf_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.0.iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

/// `∫|Du|^p` and `∫a|Du|^q` of a nodal vector.
pub(crate) fn gradient_integrals(problem: &DoublePhaseProblem, values: &[f64]) -> (f64, f64) {
    let mesh = problem.mesh();
    let (p, q) = (problem.p, problem.q);
    let weights = problem.weight_samples();
    let mut gp = 0.0;
    let mut gq = 0.0;
    for (e, &m) in mesh.element_measures().iter().enumerate() {
        let g = element_gradient(problem, e, values);
        let norm = g[0].hypot(g[1]);
        gp += m * norm.powf(p);
        gq += m * weights[e] * norm.powf(q);
    }
    (gp, gq)
}

fn element_gradient(problem: &DoublePhaseProblem, e: usize, values: &[f64]) -> Point {
    let mesh = problem.mesh();
    let mut g = [0.0; 2];
    for (&v, b) in mesh.element(e).iter().zip(mesh.basis_gradients(e)) {
        g[0] += values[v] * b[0];
        g[1] += values[v] * b[1];
    }
    g
}

/// Reaction samples shared by the energy, the defect and the fibering map.
pub(crate) struct QuadratureSamples {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureSamples {
    pub fn new(problem: &DoublePhaseProblem, values: &[f64]) -> QuadratureSamples {
        let mesh = problem.mesh();
        QuadratureSamples { values: mesh.quad_values(values), weights: mesh.quad_weights() }
    }

    fn points_per_element(problem: &DoublePhaseProblem) -> usize {
        problem.mesh().rule().len()
    }

    /// `∫ F(z, t u)`.
    pub fn potential(&self, problem: &DoublePhaseProblem, t: f64) -> Result<f64> {
        let nq = Self::points_per_element(problem);
        let mesh = problem.mesh();
        let mut total = 0.0;
        for e in 0..mesh.element_count() {
            let pts = mesh.quad_points(e);
            let mut acc = 0.0;
            for k in 0..nq {
                let i = e * nq + k;
                acc += self.weights[i] * problem.reaction.primitive(pts[k], t * self.values[i]);
            }
            if !acc.is_finite() {
                return Err(Error::Evaluation { element: e });
            }
            total += acc;
        }
        Ok(total)
    }

    /// `∫ f(z, t u) u`.
    pub fn pairing(&self, problem: &DoublePhaseProblem, t: f64) -> Result<f64> {
        let nq = Self::points_per_element(problem);
        let mesh = problem.mesh();
        let mut total = 0.0;
        for e in 0..mesh.element_count() {
            let pts = mesh.quad_points(e);
            let mut acc = 0.0;
            for k in 0..nq {
                let i = e * nq + k;
                let u = self.values[i];
                acc += self.weights[i] * problem.reaction.value(pts[k], t * u) * u;
            }
            if !acc.is_finite() {
                return Err(Error::Evaluation { element: e });
            }
            total += acc;
        }
        Ok(total)
    }
}

/// Energy contribution of every element.
pub(crate) fn element_energies(problem: &DoublePhaseProblem, values: &[f64]) -> Result<Vec<f64>> {
    let mesh = problem.mesh();
    let (p, q) = (problem.p, problem.q);
    let weights = problem.weight_samples();
    let samples = QuadratureSamples::new(problem, values);
    let nq = mesh.rule().len();
    (0..mesh.element_count())
        .map(|e| {
            let m = mesh.element_measures()[e];
            let g = element_gradient(problem, e, values);
            let norm = g[0].hypot(g[1]);
            let pts = mesh.quad_points(e);
            let mut pot = 0.0;
            for k in 0..nq {
                let i = e * nq + k;
                pot += samples.weights[i] * problem.reaction.primitive(pts[k], samples.values[i]);
            }
            if !pot.is_finite() {
                return Err(Error::Evaluation { element: e });
            }
            Ok(m * norm.powf(p) / p + m * weights[e] * norm.powf(q) / q - pot)
        })
        .collect()
}

pub(crate) fn energy_raw(problem: &DoublePhaseProblem, values: &[f64]) -> Result<EnergyBreakdown> {
    let (grad_p, grad_q) = gradient_integrals(problem, values);
    let potential = QuadratureSamples::new(problem, values).potential(problem, 1.0)?;
    Ok(EnergyBreakdown { grad_p, grad_q, potential, p: problem.p, q: problem.q })
}

/// `φ(u) = (1/p)∫|Du|^p + (1/q)∫a|Du|^q - ∫F(z,u)`, split into its summands.
pub fn energy(problem: &DoublePhaseProblem, u: &Field) -> Result<EnergyBreakdown> {
    u.check_mesh(problem.mesh())?;
    energy_raw(problem, u.values())
}

/// `(|g|^2 + eps^2)^{(s-2)/2}`, taken as zero at `g = 0` when `eps = 0`.
#[inline]
fn flux_coefficient(g2: f64, s: f64, eps: f64) -> f64 {
    let r2 = g2 + eps * eps;
    if r2 == 0.0 {
        0.0
    } else {
        r2.powf(0.5 * (s - 2.0))
    }
}

pub(crate) fn residual_raw(problem: &DoublePhaseProblem, values: &[f64]) -> Result<Residual> {
    let mesh = problem.mesh();
    let (p, q, eps) = (problem.p, problem.q, problem.epsilon);
    let weights = problem.weight_samples();
    let rule = mesh.rule();
    let mut r = vec![0.0; mesh.vertex_count()];
    for e in 0..mesh.element_count() {
        let m = mesh.element_measures()[e];
        let g = element_gradient(problem, e, values);
        let g2 = g[0] * g[0] + g[1] * g[1];
        let coef = m * (flux_coefficient(g2, p, eps) + weights[e] * flux_coefficient(g2, q, eps));
        let el = mesh.element(e);
        for (&v, b) in el.iter().zip(mesh.basis_gradients(e)) {
            r[v] += coef * (g[0] * b[0] + g[1] * b[1]);
        }
        for ((bary, w), &z) in rule.iter().zip(mesh.quad_points(e)) {
            let u: f64 = el.iter().enumerate().map(|(k, &v)| bary[k] * values[v]).sum();
            let f = problem.reaction.value(z, u);
            if !f.is_finite() {
                return Err(Error::Evaluation { element: e });
            }
            for (k, &v) in el.iter().enumerate() {
                r[v] -= w * m * f * bary[k];
            }
        }
    }
    for &b in mesh.boundary_nodes() {
        r[b] = 0.0;
    }
    Ok(Residual(r))
}

/// Weak-form residual `⟨φ'(u), hat_i⟩` for every vertex.
pub fn residual(problem: &DoublePhaseProblem, u: &Field) -> Result<Residual> {
    u.check_mesh(problem.mesh())?;
    residual_raw(problem, u.values())
}

pub(crate) fn nehari_defect_raw(problem: &DoublePhaseProblem, values: &[f64]) -> Result<f64> {
    let (gp, gq) = gradient_integrals(problem, values);
    let pairing = QuadratureSamples::new(problem, values).pairing(problem, 1.0)?;
    Ok(defect_formula(problem, gp, gq, 1.0, pairing))
}

/// `t^{p-1} G_p + t^{q-1} G_q - ∫f(z,tu)u`; shared with the fibering map so
/// the two agree bit for bit at `t = 1`.
#[inline]
pub(crate) fn defect_formula(problem: &DoublePhaseProblem, gp: f64, gq: f64, t: f64, pairing: f64) -> f64 {
    t.powf(problem.p - 1.0) * gp + t.powf(problem.q - 1.0) * gq - pairing
}

/// `⟨φ'(u), u⟩`; zero exactly on the Nehari manifold.
pub fn nehari_defect(problem: &DoublePhaseProblem, u: &Field) -> Result<f64> {
    u.check_mesh(problem.mesh())?;
    if u.is_zero() {
        return invalid("Nehari defect is undefined at u = 0");
    }
    nehari_defect_raw(problem, u.values())
}

/// `1 + |φ(u)| + ‖u‖_∞`, the reference magnitude for solver tolerances.
pub fn tolerance_scale(energy: f64, u: &Field) -> f64 {
    1.0 + energy.abs() + u.inf_norm()
}
