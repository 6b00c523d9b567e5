//! Problem data for `-Δ_p u - div(a(z)|Du|^{q-2}Du) = f(z,u)` with zero
//! Dirichlet values, and sampled checks of the structural conditions the
//! Nehari method relies on.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mesh::{build_interval_mesh, build_rectangle_mesh, Mesh, Point};

/// Default regularization of `|Du|^{s-2}` in the residual.
pub const DEFAULT_EPSILON: f64 = 1e-10;

/// Weight `a(z)` of the q-phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Weight {
    Constant { value: f64 },
    /// `coef * |z - center|^alpha`; continuous but vanishing at `center`.
    Power { coef: f64, center: Point, alpha: f64 },
    /// `inside` on the box `[lo, hi]`, `outside` elsewhere (discontinuous).
    TwoLevel { inside: f64, outside: f64, lo: Point, hi: Point },
}

impl Weight {
    pub fn eval(&self, z: Point) -> f64 {
        match *self {
            Weight::Constant { value } => value,
            Weight::Power { coef, center, alpha } => {
                coef * (z[0] - center[0]).hypot(z[1] - center[1]).powf(alpha)
            }
            Weight::TwoLevel { inside, outside, lo, hi } => {
                if (lo[0]..=hi[0]).contains(&z[0]) && (lo[1]..=hi[1]).contains(&z[1]) {
                    inside
                } else {
                    outside
                }
            }
        }
    }
}

/// User-supplied reaction law. Implementations must be pure.
pub trait ReactionLaw: Send + Sync {
    fn value(&self, z: Point, x: f64) -> f64;
    /// `∂f/∂x`; never called at `x = 0`.
    fn derivative(&self, z: Point, x: f64) -> f64;
    /// `F(z, x) = ∫_0^x f(z, s) ds`.
    fn primitive(&self, z: Point, x: f64) -> f64;
}

#[derive(Clone)]
pub enum ReactionKind {
    /// `|x|^{r-2} x`.
    Power { r: f64 },
    /// `|x|^{s-2}x - |x|^{p-2}x` for `|x| <= 1`, `k|x|^{p-2}x ln|x|` beyond,
    /// with `k = s - p`. Superlinear without the Ambrosetti-Rabinowitz bound.
    LogSuperlinear { p: f64, s: f64 },
    Custom(Arc<dyn ReactionLaw>),
}

impl fmt::Debug for ReactionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReactionKind::Power { r } => write!(f, "Power {{ r: {r} }}"),
            ReactionKind::LogSuperlinear { p, s } => write!(f, "LogSuperlinear {{ p: {p}, s: {s} }}"),
            ReactionKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Reaction `f(z, x)` together with the constants of its growth envelope:
/// `|f'_x| <= a0 (1 + |x|^{r-2})` and `(f x - p F)/|x|^tau >= beta0` at infinity.
#[derive(Debug, Clone)]
pub struct Reaction {
    pub kind: ReactionKind,
    pub growth: f64,
    pub tau: f64,
    pub beta0: f64,
    pub a0: f64,
}

impl Reaction {
    /// Pure power `|x|^{r-2}x`; with `r = 2` this is the linear reaction.
    pub fn power(r: f64) -> Result<Reaction> {
        if !(r.is_finite() && r > 1.0) {
            return invalid(format!("power reaction needs r > 1, got {r}"));
        }
        Ok(Reaction {
            kind: ReactionKind::Power { r },
            growth: r,
            tau: r,
            // f x - pF = (1 - p/r)|x|^r is only known once p is; see `with_exponent`
            beta0: f64::NAN,
            a0: r - 1.0,
        })
    }

    pub fn log_superlinear(p: f64, s: f64) -> Result<Reaction> {
        if !(p > 1.0 && s > p && s.is_finite()) {
            return invalid(format!("log-superlinear reaction needs 1 < p < s, got p={p}, s={s}"));
        }
        let k = s - p;
        Ok(Reaction {
            kind: ReactionKind::LogSuperlinear { p, s },
            growth: s,
            tau: p,
            beta0: k / p,
            // |f'| <= (s-1) + (p-1) on [-1,1]; beyond, k|x|^{p-2}((p-1)ln|x| + 1)
            // with ln y <= y^k / (e k)
            a0: (s - 1.0) + (p - 1.0) + k + (p - 1.0) / std::f64::consts::E,
        })
    }

    pub fn custom(law: Arc<dyn ReactionLaw>, growth: f64, tau: f64, beta0: f64, a0: f64) -> Reaction {
        Reaction { kind: ReactionKind::Custom(law), growth, tau, beta0, a0 }
    }

    /// Fills in constants that depend on the principal exponent `p`.
    pub fn with_exponent(mut self, p: f64) -> Reaction {
        if let ReactionKind::Power { r } = self.kind {
            self.beta0 = 1.0 - p / r;
        }
        self
    }

    #[inline]
    pub fn value(&self, z: Point, x: f64) -> f64 {
        match &self.kind {
            ReactionKind::Power { r } => x.abs().powf(r - 2.0) * x,
            ReactionKind::LogSuperlinear { p, s } => {
                let a = x.abs();
                if a <= 1.0 {
                    (a.powf(s - 2.0) - a.powf(p - 2.0)) * x
                } else {
                    (s - p) * a.powf(p - 2.0) * x * a.ln()
                }
            }
            ReactionKind::Custom(law) => law.value(z, x),
        }
    }

    #[inline]
    pub fn derivative(&self, z: Point, x: f64) -> f64 {
        match &self.kind {
            ReactionKind::Power { r } => (r - 1.0) * x.abs().powf(r - 2.0),
            ReactionKind::LogSuperlinear { p, s } => {
                let a = x.abs();
                if a <= 1.0 {
                    (s - 1.0) * a.powf(s - 2.0) - (p - 1.0) * a.powf(p - 2.0)
                } else {
                    (s - p) * a.powf(p - 2.0) * ((p - 1.0) * a.ln() + 1.0)
                }
            }
            ReactionKind::Custom(law) => law.derivative(z, x),
        }
    }

    #[inline]
    pub fn primitive(&self, z: Point, x: f64) -> f64 {
        match &self.kind {
            ReactionKind::Power { r } => x.abs().powf(*r) / r,
            ReactionKind::LogSuperlinear { p, s } => {
                let a = x.abs();
                if a <= 1.0 {
                    a.powf(*s) / s - a.powf(*p) / p
                } else {
                    let k = s - p;
                    let ap = a.powf(*p);
                    (1.0 / s - 1.0 / p) + k * (ap * a.ln() / p - (ap - 1.0) / (p * p))
                }
            }
            ReactionKind::Custom(law) => law.primitive(z, x),
        }
    }
}

/// A complete instance: exponents, mesh, weight and reaction.
#[derive(Debug, Clone)]
pub struct DoublePhaseProblem {
    pub p: f64,
    pub q: f64,
    mesh: Arc<Mesh>,
    pub weight: Weight,
    pub reaction: Reaction,
    /// Regularization of the flux at `Du = 0`; the energy itself is never regularized.
    pub epsilon: f64,
    weight_samples: Vec<f64>,
}

impl DoublePhaseProblem {
    pub fn new(
        p: f64,
        q: f64,
        mesh: Arc<Mesh>,
        weight: Weight,
        reaction: Reaction,
        epsilon: f64,
    ) -> Result<DoublePhaseProblem> {
        if !(1.0 < q && q < p && p.is_finite()) {
            return invalid(format!("exponents must satisfy 1 < q < p, got p={p}, q={q}"));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return invalid(format!("epsilon must be a finite nonnegative number, got {epsilon}"));
        }
        let weight_samples: Vec<f64> = mesh.centroids().iter().map(|&c| weight.eval(c)).collect();
        if let Some(e) = weight_samples.iter().position(|&a| !(a > 0.0 && a.is_finite())) {
            return invalid(format!(
                "weight must be positive and bounded, got a = {} at the centroid of element {e}",
                weight_samples[e]
            ));
        }
        Ok(DoublePhaseProblem { p, q, mesh, weight, reaction, epsilon, weight_samples })
    }

    /// Same data on another mesh (weights are resampled).
    pub fn with_mesh(&self, mesh: Arc<Mesh>) -> Result<DoublePhaseProblem> {
        DoublePhaseProblem::new(
            self.p,
            self.q,
            mesh,
            self.weight.clone(),
            self.reaction.clone(),
            self.epsilon,
        )
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// `a` at element centroids.
    pub fn weight_samples(&self) -> &[f64] {
        &self.weight_samples
    }

    pub fn weight_bounds(&self) -> (f64, f64) {
        self.weight_samples
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &a| (lo.min(a), hi.max(a)))
    }
}

/// Critical Sobolev exponent; infinite when `N <= p`.
pub fn critical_exponent(p: f64, dim: usize) -> f64 {
    let n = dim as f64;
    if p < n {
        n * p / (n - p)
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentReport {
    pub critical_exponent: Option<f64>,
    pub checks: Vec<CheckResult>,
}

impl ExponentReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Checks `1 < q < p`, `p < r < p*` and `max{1, (r-p)N/p} < tau < p*`.
pub fn validate_exponents(p: f64, q: f64, r: f64, tau: f64, dim: usize) -> ExponentReport {
    let crit = critical_exponent(p, dim);
    let n = dim as f64;
    let tau_lo = 1f64.max((r - p) * n / p);
    let checks = vec![
        CheckResult {
            name: "phase_order".into(),
            passed: 1.0 < q && q < p,
            detail: format!("requires 1 < q < p; p={p}, q={q}"),
        },
        CheckResult {
            name: "growth_window".into(),
            passed: p < r && r < crit,
            detail: format!("requires p < r < p*; r={r}, p*={crit}"),
        },
        CheckResult {
            name: "tau_window".into(),
            passed: tau_lo < tau && tau < crit,
            detail: format!("requires max(1,(r-p)N/p)={tau_lo} < tau < p*={crit}; tau={tau}"),
        },
    ];
    ExponentReport { critical_exponent: crit.is_finite().then_some(crit), checks }
}

/// Sample grid `±logspace(10^lo, 10^hi, n)`, negatives first.
pub fn symmetric_logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let pos: Vec<f64> = (0..n)
        .map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / (n - 1).max(1) as f64))
        .collect();
    pos.iter().rev().map(|x| -x).chain(pos.iter().copied()).collect()
}

pub fn default_sample_grid() -> Vec<f64> {
    symmetric_logspace(-6.0, 6.0, 49)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub x: f64,
    pub z: Point,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub statement: String,
    pub passed: bool,
    pub violations: Vec<Violation>,
}

/// Outcome of the sampled checks. Limits and uniformity in `z` cannot be
/// certified by sampling, so this is evidence only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub kind: &'static str,
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const MAX_VIOLATIONS: usize = 16;
const SLACK: f64 = 1e-12;

fn check(name: &str, statement: &str, violations: Vec<Violation>) -> HypothesisCheck {
    HypothesisCheck {
        name: name.into(),
        statement: statement.into(),
        passed: violations.is_empty(),
        violations: violations.into_iter().take(MAX_VIOLATIONS).collect(),
    }
}

/// Evaluates the growth, superlinearity, origin and monotonicity conditions of
/// the reaction at the sample points `xs` (zero is skipped) and `zs`.
///
/// Limits are read off as trends: the superlinearity check uses `|x| >= 10`,
/// the origin check `|x| <= 0.1`, and the quotient bound is allowed a factor 2
/// of slack on `beta0`.
pub fn check_hypotheses_f(
    reaction: &Reaction,
    p: f64,
    q: f64,
    xs: &[f64],
    zs: &[Point],
) -> HypothesisReport {
    let r = reaction.growth;
    let (tau, beta0, a0) = (reaction.tau, reaction.beta0, reaction.a0);
    let xs: Vec<f64> = xs.iter().copied().filter(|&x| x != 0.0 && x.is_finite()).collect();
    let large_neg: Vec<f64> = sorted_by_abs(xs.iter().copied().filter(|&x| x <= -10.0));
    let large_pos: Vec<f64> = sorted_by_abs(xs.iter().copied().filter(|&x| x >= 10.0));
    let small_neg: Vec<f64> = sorted_by_abs(xs.iter().copied().filter(|&x| (-0.1..0.0).contains(&x)));
    let small_pos: Vec<f64> = sorted_by_abs(xs.iter().copied().filter(|&x| x > 0.0 && x <= 0.1));

    let mut growth = Vec::new();
    let mut sign = Vec::new();
    for &z in zs {
        for &x in &xs {
            let f = reaction.value(z, x);
            let df = reaction.derivative(z, x);
            let bound = a0 * (1.0 + x.abs().powf(r - 2.0));
            if !(df.abs() <= bound * (1.0 + SLACK)) {
                growth.push(Violation { x, z, detail: format!("|f'| = {df:e} > {bound:e}") });
            }
            let lhs = (p - 1.0) * f * x;
            let rhs = df * x * x;
            if !(lhs > 0.0) {
                sign.push(Violation { x, z, detail: format!("(p-1) f x = {lhs:e} is not positive") });
            } else if !(lhs <= rhs + SLACK * lhs.abs().max(rhs.abs())) {
                sign.push(Violation { x, z, detail: format!("(p-1) f x = {lhs:e} > f' x^2 = {rhs:e}") });
            }
        }
    }

    let mut superlinear = Vec::new();
    let mut origin = Vec::new();
    for &z in zs {
        for branch in [&large_neg, &large_pos] {
            let mut prev: Option<f64> = None;
            for &x in branch.iter() {
                let f = reaction.value(z, x);
                let big_f = reaction.primitive(z, x);
                let quotient = (f * x - p * big_f) / x.abs().powf(tau);
                if !(quotient >= 0.5 * beta0) {
                    superlinear.push(Violation {
                        x,
                        z,
                        detail: format!("(f x - pF)/|x|^tau = {quotient:e} < beta0/2 = {:e}", 0.5 * beta0),
                    });
                }
                let ratio = big_f / x.abs().powf(p);
                if let Some(pr) = prev {
                    if !(ratio >= pr * (1.0 - SLACK)) {
                        superlinear.push(Violation {
                            x,
                            z,
                            detail: format!("F/|x|^p decreased from {pr:e} to {ratio:e}"),
                        });
                    }
                }
                prev = Some(ratio);
            }
            if let (Some(&first), Some(&last)) = (branch.first(), branch.last()) {
                let r0 = reaction.primitive(z, first) / first.abs().powf(p);
                let r1 = reaction.primitive(z, last) / last.abs().powf(p);
                if !(r1 > r0) {
                    superlinear.push(Violation {
                        x: last,
                        z,
                        detail: format!("F/|x|^p does not grow: {r0:e} -> {r1:e}"),
                    });
                }
            }
        }
        // branches run towards zero from the outside
        for branch in [&small_neg, &small_pos] {
            let ratios: Vec<(f64, f64)> = branch
                .iter()
                .rev()
                .map(|&x| (x, (reaction.value(z, x) / (x.abs().powf(q - 2.0) * x)).abs()))
                .collect();
            for w in ratios.windows(2) {
                if !(w[1].1 < w[0].1 || w[1].1 == 0.0) {
                    origin.push(Violation {
                        x: w[1].0,
                        z,
                        detail: format!("|f/(|x|^(q-2)x)| did not decrease: {:e} -> {:e}", w[0].1, w[1].1),
                    });
                }
            }
            if let (Some(first), Some(last)) = (ratios.first(), ratios.last()) {
                if !(last.1 <= 0.5 * first.1) {
                    origin.push(Violation {
                        x: last.0,
                        z,
                        detail: format!("|f/(|x|^(q-2)x)| not tending to zero: {:e} -> {:e}", first.1, last.1),
                    });
                }
            }
        }
    }

    HypothesisReport {
        kind: "sampled evidence",
        checks: vec![
            check("growth", "|f'_x(z,x)| <= a0 (1 + |x|^(r-2))", growth),
            check(
                "superlinearity",
                "F(z,x)/|x|^p grows and (f(z,x)x - pF(z,x))/|x|^tau >= beta0/2 for large |x|",
                superlinear,
            ),
            check("origin", "f(z,x)/(|x|^(q-2)x) -> 0 as x -> 0", origin),
            check("monotonicity", "0 < (p-1) f(z,x) x <= f'_x(z,x) x^2 for x != 0", sign),
        ],
    }
}

fn sorted_by_abs(xs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = xs.collect();
    v.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    v
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArReport {
    pub theta: f64,
    pub holds: bool,
    pub witness: Option<Violation>,
}

/// Tests `0 < theta F(z,x) <= f(z,x) x` on the samples and reports the first
/// failure as a witness.
pub fn check_ar_condition(
    reaction: &Reaction,
    p: f64,
    theta: f64,
    xs: &[f64],
    zs: &[Point],
) -> Result<ArReport> {
    if !(theta > p) {
        return invalid(format!("Ambrosetti-Rabinowitz exponent must exceed p={p}, got {theta}"));
    }
    let mut xs: Vec<f64> = xs.iter().copied().filter(|&x| x != 0.0 && x.is_finite()).collect();
    xs.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    for &z in zs {
        for &x in &xs {
            let lhs = theta * reaction.primitive(z, x);
            let rhs = reaction.value(z, x) * x;
            if !(lhs > 0.0 && lhs <= rhs * (1.0 + SLACK)) {
                return Ok(ArReport {
                    theta,
                    holds: false,
                    witness: Some(Violation {
                        x,
                        z,
                        detail: format!("theta F = {lhs:e}, f x = {rhs:e}"),
                    }),
                });
            }
        }
    }
    Ok(ArReport { theta, holds: true, witness: None })
}

/// Default samples for the AR scan, which concerns large `|x|`: `±logspace(10, 1e8)`.
pub fn ar_sample_grid() -> Vec<f64> {
    symmetric_logspace(1.0, 8.0, 71)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainConfig {
    Interval { length: f64, n: usize },
    Rectangle { lx: f64, ly: f64, nx: usize, ny: usize },
}

impl DomainConfig {
    pub fn build(&self) -> Result<Mesh> {
        match *self {
            DomainConfig::Interval { length, n } => build_interval_mesh(length, n),
            DomainConfig::Rectangle { lx, ly, nx, ny } => build_rectangle_mesh(lx, ly, nx, ny),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainConfig::Interval { .. } => 1,
            DomainConfig::Rectangle { .. } => 2,
        }
    }
}

/// Builtin reactions selectable from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ReactionConfig {
    Power { r: f64 },
    LogSuperlinear { s: f64 },
    Linear,
}

impl ReactionConfig {
    pub fn build(&self, p: f64) -> Result<Reaction> {
        let reaction = match *self {
            ReactionConfig::Power { r } => Reaction::power(r)?,
            ReactionConfig::LogSuperlinear { s } => Reaction::log_superlinear(p, s)?,
            ReactionConfig::Linear => Reaction::power(2.0)?,
        };
        Ok(reaction.with_exponent(p))
    }
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

/// JSON form of a problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub p: f64,
    pub q: f64,
    pub domain: DomainConfig,
    pub weight: Weight,
    pub reaction: ReactionConfig,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl ProblemConfig {
    pub fn exponent_report(&self) -> Result<ExponentReport> {
        let reaction = self.reaction.build(self.p)?;
        Ok(validate_exponents(self.p, self.q, reaction.growth, reaction.tau, self.domain.dim()))
    }

    pub fn build(&self) -> Result<DoublePhaseProblem> {
        let mesh = Arc::new(self.domain.build()?);
        let reaction = self.reaction.build(self.p)?;
        DoublePhaseProblem::new(self.p, self.q, mesh, self.weight.clone(), reaction, self.epsilon)
    }
}
