//! Command-line front end.
//!
//! Every subcommand reads a JSON run config, writes `report.json` plus the
//! subcommand's CSV files into `--out`, and exits with 0 on success, 2 on a
//! rejected config and 3 when a solver did not converge.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::eigen::{bump, first_eigenpair, lemma1_diagnostic, EigenOptions};
use crate::error::Error;
use crate::fibering::{fibering_curve, geometric_grid, project_to_nehari, sign_changes, DEFAULT_PROJECTION_TOL};
use crate::mesh::Field;
use crate::problem::{
    ar_sample_grid, check_ar_condition, check_hypotheses_f, symmetric_logspace, DoublePhaseProblem,
    ProblemConfig,
};
use crate::report::{write_csv, write_json};
use crate::solver::{
    decomposition_gap, random_field, sign_change_points, solve_ground_state, solve_nodal, SolveOptions,
    SolveReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "doublephase", version, about = "Ground states, nodal solutions and eigenpairs of double-phase problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimize the energy on the Nehari manifold.
    SolveGround(CommonArgs),
    /// Minimize the energy over fields whose signed parts both lie on the Nehari manifold.
    SolveNodal(CommonArgs),
    /// First Dirichlet eigenpair of the p-Laplacian.
    Eigen(CommonArgs),
    /// Double-phase quotient along rays of the first eigenfunction.
    Lemma1(CommonArgs),
    /// Fibering map t -> energy(t u) and the Nehari projection of u.
    Fibering(CommonArgs),
    /// Sampled checks of the reaction hypotheses.
    CheckHypotheses {
        #[command(flatten)]
        common: CommonArgs,
        /// Also test the Ambrosetti-Rabinowitz condition with this exponent.
        #[arg(long, value_name = "THETA")]
        ar: Option<f64>,
    },
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Run config (JSON).
    config: PathBuf,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "X")]
    tol: Option<f64>,
    #[arg(long, value_name = "N")]
    max_iters: Option<usize>,
    #[arg(long, value_name = "N")]
    restarts: Option<usize>,
    /// Record the elapsed time in report.json (the report is then no longer reproducible).
    #[arg(long)]
    wall_time: bool,
}

/// Field whose fibering map is tabulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberingField {
    Bump,
    Eigenfunction,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberingSection {
    pub field: FiberingField,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl Default for FiberingSection {
    fn default() -> Self {
        FiberingSection { field: FiberingField::Bump, t_min: 1e-4, t_max: 1e4, points: 65 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lemma1Section {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl Default for Lemma1Section {
    fn default() -> Self {
        Lemma1Section { t_min: 10.0, t_max: 1e4, points: 13 }
    }
}

/// Sample grid `±logspace(10^log10_min, 10^log10_max, points)`; the weight
/// variable is sampled at the mesh centroids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypothesesSection {
    pub log10_min: f64,
    pub log10_max: f64,
    pub points: usize,
    pub ar_theta: Option<f64>,
}

impl Default for HypothesesSection {
    fn default() -> Self {
        HypothesesSection { log10_min: -6.0, log10_max: 6.0, points: 49, ar_theta: None }
    }
}

/// Complete input of one run. Command-line flags are folded in before the
/// config is embedded in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solve: SolveOptions,
    #[serde(default)]
    pub eigen: EigenOptions,
    #[serde(default)]
    pub fibering: FiberingSection,
    #[serde(default)]
    pub lemma1: Lemma1Section,
    #[serde(default)]
    pub hypotheses: HypothesesSection,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<RunConfig, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }
}

/// Failure of a run, mapped onto an exit code.
#[derive(Debug)]
enum Failure {
    Invalid(String),
    NotConverged(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Io(_) | Error::Json(_) => Failure::Invalid(e.to_string()),
            Error::Evaluation { .. } | Error::ProjectionFailure(_) | Error::DegenerateIterate(_) => {
                Failure::NotConverged(e.to_string())
            }
        }
    }
}

type Outcome = std::result::Result<bool, Failure>;

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("error: solver did not converge; report.json is flagged with \"converged\": false");
            EXIT_NOT_CONVERGED
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            EXIT_INVALID
        }
        Err(Failure::NotConverged(msg)) => {
            eprintln!("error: {msg}");
            EXIT_NOT_CONVERGED
        }
    }
}

fn run(command: Command) -> Outcome {
    let (kind, common, ar) = match command {
        Command::SolveGround(c) => (Kind::Ground, c, None),
        Command::SolveNodal(c) => (Kind::Nodal, c, None),
        Command::Eigen(c) => (Kind::Eigen, c, None),
        Command::Lemma1(c) => (Kind::Lemma1, c, None),
        Command::Fibering(c) => (Kind::Fibering, c, None),
        Command::CheckHypotheses { common, ar } => (Kind::Hypotheses, common, ar),
    };
    let mut cfg = RunConfig::from_path(&common.config).map_err(Failure::Invalid)?;
    apply_flags(&mut cfg, &common, kind, ar);

    let exponents = cfg.problem.exponent_report()?;
    if let Some(order) = exponents.checks.iter().find(|c| c.name == "phase_order" && !c.passed) {
        return Err(Failure::Invalid(order.detail.clone()));
    }
    if matches!(kind, Kind::Ground | Kind::Nodal | Kind::Fibering) && !exponents.all_passed() {
        let msgs: Vec<&str> = exponents.failures().map(|c| c.detail.as_str()).collect();
        return Err(Failure::Invalid(msgs.join("; ")));
    }
    let problem = cfg.problem.build()?;
    std::fs::create_dir_all(&common.out)
        .map_err(|e| Failure::Invalid(format!("cannot create output directory {}: {e}", common.out.display())))?;

    let start = Instant::now();
    let (mut report, ok) = match kind {
        Kind::Ground | Kind::Nodal => run_solve(&problem, &cfg, kind == Kind::Nodal, &common.out)?,
        Kind::Eigen => run_eigen(&problem, &cfg, &common.out)?,
        Kind::Lemma1 => run_lemma1(&problem, &cfg, &common.out)?,
        Kind::Fibering => run_fibering(&problem, &cfg, &common.out)?,
        Kind::Hypotheses => run_hypotheses(&problem, &cfg, &exponents)?,
    };
    let obj = report.as_object_mut().expect("reports are JSON objects");
    obj.insert("config".into(), serde_json::to_value(&cfg).map_err(Error::from)?);
    let wall = if common.wall_time { json!(start.elapsed().as_secs_f64()) } else { Value::Null };
    obj.insert("wall_time_s".into(), wall);
    write_json(&common.out.join("report.json"), &report)?;
    Ok(ok)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Ground,
    Nodal,
    Eigen,
    Lemma1,
    Fibering,
    Hypotheses,
}

fn apply_flags(cfg: &mut RunConfig, args: &CommonArgs, kind: Kind, ar: Option<f64>) {
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.solve.seed = cfg.seed;
    if let Some(n) = args.restarts {
        cfg.solve.restarts = n;
    }
    let eigen_run = matches!(kind, Kind::Eigen | Kind::Lemma1);
    if let Some(tol) = args.tol {
        if eigen_run {
            cfg.eigen.tol = tol;
        } else {
            cfg.solve.tol = tol;
        }
    }
    if let Some(n) = args.max_iters {
        if eigen_run {
            cfg.eigen.max_iters = n;
        } else {
            cfg.solve.max_iters = n;
        }
    }
    if ar.is_some() {
        cfg.hypotheses.ar_theta = ar;
    }
}

fn field_rows(u: &Field) -> Vec<Vec<f64>> {
    let dim = u.mesh().dim();
    u.mesh()
        .vertices()
        .iter()
        .zip(u.values())
        .map(|(x, &v)| x[..dim].iter().copied().chain([v]).collect())
        .collect()
}

fn write_field(path: &Path, u: &Field) -> crate::Result<()> {
    let header: &[&str] = if u.mesh().dim() == 1 { &["x", "u"] } else { &["x", "y", "u"] };
    write_csv(path, header, field_rows(u))
}

fn run_solve(problem: &DoublePhaseProblem, cfg: &RunConfig, nodal: bool, out: &Path) -> Result<(Value, bool), Failure> {
    let rep: SolveReport = if nodal {
        solve_nodal(problem, &cfg.solve)?
    } else {
        solve_ground_state(problem, &cfg.solve)?
    };
    write_field(&out.join("solution.csv"), &rep.solution)?;
    write_csv(
        &out.join("trace.csv"),
        &["iteration", "energy"],
        rep.energy_trace.iter().enumerate().map(|(i, &e)| [i as f64, e]),
    )?;
    let mut value = json!({
        "energy": rep.energy,
        "residual_inf": rep.residual_inf,
        "scale": rep.scale,
        "defects": rep.defects,
        "sign_class": rep.sign_class,
        "converged": rep.converged,
        "iterations": rep.iterations,
        "restarts_used": rep.restarts_used,
        "sup_norm": rep.sup_norm,
    });
    if nodal {
        let obj = value.as_object_mut().expect("object");
        obj.insert("part_energies".into(), json!(rep.part_energies));
        obj.insert("decomposition_gap".into(), json!(decomposition_gap(problem, &rep.solution)?));
        obj.insert("sign_change_points".into(), json!(sign_change_points(&rep.solution)));
    }
    Ok((value, rep.converged))
}

fn run_eigen(problem: &DoublePhaseProblem, cfg: &RunConfig, out: &Path) -> Result<(Value, bool), Failure> {
    let eig = first_eigenpair(problem.mesh(), problem.p, &cfg.eigen)?;
    write_field(&out.join("eigenfunction.csv"), &eig.u1)?;
    let value = json!({
        "p": eig.p,
        "lambda1": eig.lambda1,
        "iterations": eig.iterations,
        "converged": eig.converged,
    });
    Ok((value, eig.converged))
}

fn run_lemma1(problem: &DoublePhaseProblem, cfg: &RunConfig, out: &Path) -> Result<(Value, bool), Failure> {
    let s = &cfg.lemma1;
    if !(s.t_min > 0.0 && s.t_max > s.t_min && s.points >= 2) {
        return Err(Failure::Invalid("lemma1 grid needs 0 < t_min < t_max and points >= 2".into()));
    }
    let eig = first_eigenpair(problem.mesh(), problem.p, &cfg.eigen)?;
    let table = lemma1_diagnostic(problem, &eig, &geometric_grid(s.t_min, s.t_max, s.points))?;
    write_csv(&out.join("lemma1.csv"), &["t", "theta", "gap"], table.rows.iter().map(|r| [r.t, r.theta, r.gap]))?;
    let value = json!({
        "p": problem.p,
        "q": problem.q,
        "lambda1": table.lambda1,
        "fitted_slope": table.fitted_slope,
        "expected_slope": -(problem.p - problem.q),
        "iterations": eig.iterations,
        "converged": eig.converged,
    });
    Ok((value, eig.converged))
}

fn run_fibering(problem: &DoublePhaseProblem, cfg: &RunConfig, out: &Path) -> Result<(Value, bool), Failure> {
    let s = &cfg.fibering;
    if !(s.t_min > 0.0 && s.t_max > s.t_min && s.points >= 2) {
        return Err(Failure::Invalid("fibering grid needs 0 < t_min < t_max and points >= 2".into()));
    }
    let u = match s.field {
        FiberingField::Bump => bump(problem.mesh()),
        FiberingField::Eigenfunction => first_eigenpair(problem.mesh(), problem.p, &cfg.eigen)?.u1,
        FiberingField::Random => random_field(problem.mesh(), cfg.seed),
    };
    let rows = fibering_curve(problem, &u, &geometric_grid(s.t_min, s.t_max, s.points))?;
    write_csv(&out.join("fibering.csv"), &["t", "mu", "dmu"], rows.iter().map(|r| [r.t, r.mu, r.dmu]))?;
    let mut value = json!({ "sign_changes": sign_changes(&rows) });
    let obj = value.as_object_mut().expect("object");
    let ok = match project_to_nehari(problem, &u, DEFAULT_PROJECTION_TOL) {
        Ok(res) => {
            obj.insert("t_u".into(), json!(res.t_u));
            obj.insert("defect_at_root".into(), json!(res.defect_at_root));
            obj.insert("bracket".into(), json!(res.bracket));
            true
        }
        Err(Error::ProjectionFailure(msg)) => {
            obj.insert("t_u".into(), Value::Null);
            obj.insert("projection_error".into(), json!(msg));
            false
        }
        Err(e) => return Err(e.into()),
    };
    obj.insert("converged".into(), json!(ok));
    Ok((value, ok))
}

fn run_hypotheses(
    problem: &DoublePhaseProblem,
    cfg: &RunConfig,
    exponents: &crate::problem::ExponentReport,
) -> Result<(Value, bool), Failure> {
    let s = &cfg.hypotheses;
    if !(s.points >= 2 && s.log10_max > s.log10_min) {
        return Err(Failure::Invalid("hypotheses grid needs log10_min < log10_max and points >= 2".into()));
    }
    let xs = symmetric_logspace(s.log10_min, s.log10_max, s.points);
    let zs = problem.mesh().centroids();
    let hyp = check_hypotheses_f(&problem.reaction, problem.p, problem.q, &xs, zs);
    let mut value = json!({
        "exponents": exponents,
        "hypotheses": hyp,
        "all_passed": hyp.all_passed(),
    });
    if let Some(theta) = s.ar_theta {
        let ar = check_ar_condition(&problem.reaction, problem.p, theta, &ar_sample_grid(), zs)?;
        value.as_object_mut().expect("object").insert("ar".into(), json!(ar));
    }
    Ok((value, true))
}
