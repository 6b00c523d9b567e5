//! Ground-state and nodal solutions by descent on the Nehari manifold.
//!
//! Every iterate stays on the constraint set: after a step along the
//! negative `H^1_0` gradient the trial field is projected back (one fibering
//! root for the ground state, one per signed part for nodal iterates), and
//! Armijo backtracking is applied to the energy of the projected field.
//! Because the Nehari manifold is a natural constraint, iteration stops once
//! the full residual is small.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eigen::{bounding_box, bump, first_eigenpair, EigenOptions};
use crate::energy::{element_energies, energy, energy_raw, nehari_defect_raw, residual_raw, tolerance_scale};
use crate::error::{invalid, Error, Result};
use crate::fibering::{ray_root, FiberingMap, DEFAULT_PROJECTION_TOL};
use crate::mesh::{build_interval_mesh_from_nodes, integrate_power_raw, Field, Mesh};
use crate::metric::SobolevMetric;
use crate::problem::DoublePhaseProblem;

/// Relative mass below which a signed part counts as collapsed.
pub const MASS_FLOOR: f64 = 1e-10;
/// `‖u‖_∞` at or below this is classified as zero.
pub const ZERO_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    Eigenfunction,
    Bump,
    Random,
    Field(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Residual tolerance, relative to `1 + |φ| + ‖u‖_∞`.
    pub tol: f64,
    pub armijo_c: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub initial_guess: InitialGuess,
    pub seed: u64,
    /// Extra attempts from random starts when a nodal iterate degenerates.
    pub restarts: usize,
    pub projection_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iters: 5000,
            tol: 1e-8,
            armijo_c: 1e-4,
            initial_step: 1.0,
            min_step: 1e-14,
            initial_guess: InitialGuess::Eigenfunction,
            seed: 0,
            restarts: 3,
            projection_tol: DEFAULT_PROJECTION_TOL,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return invalid("max_iters must be at least 1");
        }
        if !(self.tol > 0.0 && self.projection_tol > 0.0) {
            return invalid("tolerances must be positive");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0 && self.initial_step > 0.0 && self.min_step > 0.0) {
            return invalid("line search parameters out of range");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignClass {
    Positive,
    Negative,
    Nodal,
    Zero,
}

/// Nodal iff both signs exceed `tol * ‖u‖_∞`.
pub fn sign_classification(u: &Field, tol: f64) -> SignClass {
    let sup = u.inf_norm();
    if sup <= ZERO_FLOOR {
        return SignClass::Zero;
    }
    let min = u.values().iter().copied().fold(f64::INFINITY, f64::min);
    let max = u.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    match (min < -tol * sup, max > tol * sup) {
        (true, true) => SignClass::Nodal,
        (true, false) => SignClass::Negative,
        _ => SignClass::Positive,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub solution: Field,
    pub energy: f64,
    pub residual_inf: f64,
    pub scale: f64,
    /// One Nehari defect for a ground state, one per signed part for nodal.
    pub defects: Vec<f64>,
    /// `φ(u⁺)` and `φ(-u⁻)` for nodal solutions.
    pub part_energies: Option<[f64; 2]>,
    pub sign_class: SignClass,
    pub converged: bool,
    pub iterations: usize,
    pub restarts_used: usize,
    pub sup_norm: f64,
    pub energy_trace: Vec<f64>,
    /// Projection scalings per iteration (`[t]` or `[t_plus, t_minus]`).
    pub t_trace: Vec<Vec<f64>>,
}

struct Projected {
    values: Vec<f64>,
    scalings: Vec<f64>,
}

struct Descent {
    values: Vec<f64>,
    converged: bool,
    iterations: usize,
    energy_trace: Vec<f64>,
    t_trace: Vec<Vec<f64>>,
}

fn sup(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn project_ray(problem: &DoublePhaseProblem, values: &[f64], tol: f64) -> Result<Projected> {
    if values.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateIterate("iterate vanished".into()));
    }
    let root = ray_root(&FiberingMap::from_values(problem, values), tol)?;
    Ok(Projected { values: values.iter().map(|v| root.t * v).collect(), scalings: vec![root.t] })
}

fn project_parts(problem: &DoublePhaseProblem, values: &[f64], tol: f64) -> Result<Projected> {
    let mesh = problem.mesh();
    let floor = MASS_FLOOR * mesh.domain_measure();
    let plus: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
    let minus: Vec<f64> = values.iter().map(|&v| v.min(0.0)).collect();
    let mut scalings = Vec::with_capacity(2);
    for (part, label) in [(&plus, "positive"), (&minus, "negative")] {
        if part.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateIterate(format!("{label} part vanished")));
        }
        let root = ray_root(&FiberingMap::from_values(problem, part), tol).map_err(|e| match e {
            Error::ProjectionFailure(msg) => Error::DegenerateIterate(format!("{label} part: {msg}")),
            other => other,
        })?;
        let mass = root.t.powf(problem.p) * integrate_power_raw(mesh, part, problem.p);
        if !(mass >= floor) {
            return Err(Error::DegenerateIterate(format!(
                "{label} part mass {mass:e} below floor {floor:e}"
            )));
        }
        scalings.push(root.t);
    }
    let values = plus
        .iter()
        .zip(&minus)
        .map(|(a, b)| scalings[0] * a + scalings[1] * b)
        .collect();
    Ok(Projected { values, scalings })
}

fn descend(
    problem: &DoublePhaseProblem,
    metric: &SobolevMetric,
    start: Projected,
    options: &SolveOptions,
    project: impl Fn(&[f64]) -> Result<Projected>,
) -> Result<Descent> {
    let mut u = start.values;
    let mut e = energy_raw(problem, &u)?.total();
    let mut energy_trace = vec![e];
    let mut t_trace = vec![start.scalings];
    let mut step = options.initial_step;
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let r = residual_raw(problem, &u)?;
        let scale = 1.0 + e.abs() + sup(&u);
        if r.inf_norm() <= options.tol * scale {
            converged = true;
            break;
        }
        if iterations >= options.max_iters {
            break;
        }
        let dir: Vec<f64> = metric.solve(&r.0).into_iter().map(|x| -x).collect();
        let slope = r.dot(&dir);
        let try_step = |s: f64| -> Result<Option<(Projected, f64)>> {
            let trial: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + s * d).collect();
            match project(&trial) {
                Ok(pr) => {
                    let et = energy_raw(problem, &pr.values)?.total();
                    Ok((et <= e + options.armijo_c * s * slope).then_some((pr, et)))
                }
                Err(Error::ProjectionFailure(_)) | Err(Error::DegenerateIterate(_)) => Ok(None),
                Err(other) => Err(other),
            }
        };
        let mut s = (2.0 * step).min(1e3);
        let mut accepted = None;
        while s >= options.min_step {
            if let Some(hit) = try_step(s)? {
                accepted = Some(hit);
                break;
            }
            s *= 0.5;
        }
        // keep halving while the energy still drops; an overlong step that
        // merely reflects the error passes Armijo but makes no progress
        while let Some((_, best)) = &accepted {
            if s * 0.5 < options.min_step {
                break;
            }
            match try_step(s * 0.5)? {
                Some(hit) if hit.1 < *best => {
                    accepted = Some(hit);
                    s *= 0.5;
                }
                _ => break,
            }
        }
        // stop once the energy no longer moves at working precision
        let Some((pr, et)) = accepted.filter(|(_, et)| *et < e) else { break };
        iterations += 1;
        u = pr.values;
        e = et;
        step = s;
        energy_trace.push(e);
        t_trace.push(pr.scalings);
    }
    Ok(Descent { values: u, converged, iterations, energy_trace, t_trace })
}

/// `1 - 2(x - x_lo)/(x_hi - x_lo)`: positive on the left half, negative on the right.
fn sign_flip(problem: &DoublePhaseProblem) -> impl Fn([f64; 2]) -> f64 {
    let (lo, hi) = bounding_box(problem.mesh());
    move |x| 1.0 - 2.0 * (x[0] - lo[0]) / (hi[0] - lo[0])
}

/// Nodal values drawn uniformly from `[-1, 1]`, zero on the boundary.
pub fn random_field(mesh: &Arc<Mesh>, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::from_values_clearing_boundary(
        mesh.clone(),
        (0..mesh.vertex_count()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
}

fn random_values(problem: &DoublePhaseProblem, seed: u64) -> Vec<f64> {
    random_field(problem.mesh(), seed).into_values()
}

fn initial_values(problem: &DoublePhaseProblem, options: &SolveOptions, nodal: bool) -> Result<Vec<f64>> {
    let mesh = problem.mesh();
    let base = match &options.initial_guess {
        InitialGuess::Eigenfunction => {
            let opts = EigenOptions { tol: 1e-6, ..EigenOptions::default() };
            first_eigenpair(mesh, problem.p, &opts)?.u1
        }
        InitialGuess::Bump => bump(mesh),
        InitialGuess::Random => return Ok(random_values(problem, options.seed)),
        InitialGuess::Field(values) => return Ok(Field::new(mesh.clone(), values.clone())?.into_values()),
    };
    if nodal {
        let flip = sign_flip(problem);
        let vals = base.values().iter().zip(mesh.vertices()).map(|(u, &x)| u * flip(x)).collect();
        Ok(vals)
    } else {
        Ok(base.into_values())
    }
}

fn report(
    problem: &DoublePhaseProblem,
    d: Descent,
    restarts_used: usize,
    nodal: bool,
) -> Result<SolveReport> {
    let solution = Field::new(problem.mesh().clone(), d.values)?;
    let e = energy(problem, &solution)?.total();
    let residual_inf = residual_raw(problem, solution.values())?.inf_norm();
    let (defects, part_energies) = if nodal {
        let plus = solution.positive_part();
        let minus = solution.negative_part().scaled(-1.0);
        (
            vec![nehari_defect_raw(problem, plus.values())?, nehari_defect_raw(problem, minus.values())?],
            Some([energy(problem, &plus)?.total(), energy(problem, &minus)?.total()]),
        )
    } else {
        (vec![nehari_defect_raw(problem, solution.values())?], None)
    };
    Ok(SolveReport {
        energy: e,
        residual_inf,
        scale: tolerance_scale(e, &solution),
        defects,
        part_energies,
        sign_class: sign_classification(&solution, 1e-8),
        converged: d.converged,
        iterations: d.iterations,
        restarts_used,
        sup_norm: solution.inf_norm(),
        energy_trace: d.energy_trace,
        t_trace: d.t_trace,
        solution,
    })
}

/// Minimizes the energy over the Nehari manifold.
///
/// A run that exhausts `max_iters` or stalls in the line search still returns
/// a report, with `converged = false`.
pub fn solve_ground_state(problem: &DoublePhaseProblem, options: &SolveOptions) -> Result<SolveReport> {
    options.validate()?;
    let metric = SobolevMetric::laplacian(problem.mesh())?;
    let init = initial_values(problem, options, false)?;
    let start = project_ray(problem, &init, options.projection_tol)?;
    let d = descend(problem, &metric, start, options, |v| project_ray(problem, v, options.projection_tol))?;
    report(problem, d, 0, false)
}

/// A field `t₊y⁺ - t₋y⁻` with both signed parts on the Nehari manifold.
#[derive(Debug, Clone)]
pub struct NodalProjection {
    pub field: Field,
    pub t_plus: f64,
    pub t_minus: f64,
}

/// Scales the signed parts of a sign-changing `y` onto the Nehari manifold.
pub fn project_to_nodal_set(problem: &DoublePhaseProblem, y: &Field, tol: f64) -> Result<NodalProjection> {
    y.check_mesh(problem.mesh())?;
    let pr = project_parts(problem, y.values(), tol)?;
    Ok(NodalProjection {
        field: Field::new(problem.mesh().clone(), pr.values)?,
        t_plus: pr.scalings[0],
        t_minus: pr.scalings[1],
    })
}

/// Minimizes the energy over fields whose positive and negative parts both
/// lie on the Nehari manifold.
pub fn solve_nodal(problem: &DoublePhaseProblem, options: &SolveOptions) -> Result<SolveReport> {
    options.validate()?;
    let metric = SobolevMetric::laplacian(problem.mesh())?;
    let mut last_err = None;
    for attempt in 0..=options.restarts {
        let init = if attempt == 0 {
            initial_values(problem, options, true)?
        } else {
            random_values(problem, options.seed.wrapping_add(attempt as u64))
        };
        let start = match project_parts(problem, &init, options.projection_tol) {
            Ok(s) => s,
            Err(e @ Error::DegenerateIterate(_)) => {
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let d = descend(problem, &metric, start, options, |v| project_parts(problem, v, options.projection_tol))?;
        return report(problem, d, attempt, true);
    }
    Err(last_err.unwrap_or_else(|| Error::DegenerateIterate("no admissible start".into())))
}

/// `φ(u) - φ(u⁺) - φ(-u⁻)`; zero when no element changes sign.
pub fn decomposition_gap(problem: &DoublePhaseProblem, u: &Field) -> Result<f64> {
    u.check_mesh(problem.mesh())?;
    let whole = element_energies(problem, u.values())?;
    let plus = element_energies(problem, u.positive_part().values())?;
    let minus = element_energies(problem, u.negative_part().scaled(-1.0).values())?;
    // summed per element so that elements without a sign change contribute exactly zero
    Ok(whole.iter().zip(&plus).zip(&minus).map(|((w, a), b)| w - a - b).sum())
}

/// Locations where the piecewise-linear field crosses zero inside an element.
pub fn sign_change_points(u: &Field) -> Vec<[f64; 2]> {
    let mesh = u.mesh();
    let vals = u.values();
    let mut pts = Vec::new();
    for e in 0..mesh.element_count() {
        let el = mesh.element(e);
        for (i, &a) in el.iter().enumerate() {
            for &b in &el[i + 1..] {
                if vals[a] * vals[b] < 0.0 {
                    let s = vals[a] / (vals[a] - vals[b]);
                    let (xa, xb) = (mesh.vertices()[a], mesh.vertices()[b]);
                    pts.push([xa[0] + s * (xb[0] - xa[0]), xa[1] + s * (xb[1] - xa[1])]);
                }
            }
        }
    }
    pts
}

/// Moves, in 1D, the interior vertex nearest to each sign change onto the
/// crossing point and returns the field interpolated on the new mesh (exactly
/// zero at the moved vertices).
pub fn align_to_sign_change(u: &Field) -> Result<Field> {
    let mesh = u.mesh();
    if mesh.dim() != 1 {
        return invalid("mesh alignment is implemented for intervals only");
    }
    let mut nodes: Vec<f64> = mesh.vertices().iter().map(|v| v[0]).collect();
    let mut values = u.values().to_vec();
    let n = nodes.len();
    let mut moved = vec![false; n];
    for e in 0..mesh.element_count() {
        let el = mesh.element(e);
        let (a, b) = (el[0], el[1]);
        let (va, vb) = (u.values()[a], u.values()[b]);
        if va * vb >= 0.0 {
            continue;
        }
        let x = nodes[a] + va / (va - vb) * (nodes[b] - nodes[a]);
        let near = if (x - nodes[a]).abs() <= (nodes[b] - x).abs() { a } else { b };
        let target = if mesh.is_boundary(near) { if near == a { b } else { a } } else { near };
        if mesh.is_boundary(target) || moved[target] {
            continue;
        }
        nodes[target] = x;
        values[target] = 0.0;
        moved[target] = true;
    }
    let new_mesh = Arc::new(build_interval_mesh_from_nodes(nodes)?);
    Field::new(new_mesh, values)
}
