//! End-to-end scenario runs: coefficients, transforms, solutions, oracle
//! comparisons, and the validation report.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::auxiliary::{
    casimir_sigma, solve_linear_coeffs, solve_quadratic_coeffs, uniform_times, CoeffTrajectory,
};
use crate::completeness::{
    match_square, square_linear, verify_invariant_maps_solutions, MatchOptions,
};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::force::ForceProfile;
use crate::grid::GridWavefunction;
use crate::io::{to_json_pretty, Sig17};
use crate::propagator::{expectation, fidelity, split_step_evolve};
use crate::transforms::{kappa_drift, transforms_along, TransformRecord};
use crate::wavefunctions::{
    eigen_residual, eigen_residual_within, linear_invariant_eigenstate, phase_csv,
    schrodinger_residual, LRSolution, Window,
};

pub const SCHEMA_VERSION: &str = "1.0";

/// Acceptance thresholds applied by the report.
pub mod tolerance {
    pub const LVN_RESIDUAL: f64 = 1e-8;
    pub const CASIMIR_DRIFT: f64 = 1e-12;
    pub const KAPPA_DRIFT: f64 = 1e-8;
    pub const EIGEN_RESIDUAL: f64 = 1e-6;
    pub const SCHRODINGER_RESIDUAL: f64 = 1e-5;
    pub const ORACLE_INFIDELITY: f64 = 1e-6;
    pub const EXPECTATION_DRIFT: f64 = 1e-6;
    pub const MAPPED_INFIDELITY: f64 = 1e-5;
    pub const NORM_DRIFT: f64 = 1e-9;
}

/// Largest number of samples visited by the per-sample eigenvalue check.
const EIGEN_CHECK_SAMPLES: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// Passes when `value < tolerance`.
    Below,
    /// Passes when `value >= tolerance`.
    AtLeast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            comparison: Comparison::Below,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            comparison: Comparison::AtLeast,
        }
    }

    pub fn passed(&self) -> bool {
        match self.comparison {
            Comparison::Below => self.value < self.tolerance,
            Comparison::AtLeast => self.value >= self.tolerance,
        }
    }

    fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "value": Sig17(self.value),
            "tolerance": Sig17(self.tolerance),
            "comparison": self.comparison,
            "passed": self.passed(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Error,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Error => "error",
        }
    }

    /// Process exit status for this outcome.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Error => 2,
        }
    }
}

/// Which stages a run performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Solve,
    Validate,
    MatchSquare,
    Propagate,
}

impl Verb {
    pub fn name(self) -> &'static str {
        match self {
            Verb::Solve => "solve",
            Verb::Validate => "validate",
            Verb::MatchSquare => "match-square",
            Verb::Propagate => "propagate",
        }
    }
}

/// Files written so far, relative to the output directory.
#[derive(Debug)]
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Summary of one scenario invocation; also written as `report.json`.
#[derive(Debug, Clone)]
pub struct Report {
    pub scenario: String,
    pub verb: Verb,
    pub branch: String,
    pub checks: Vec<Check>,
    pub square_match: Option<Value>,
    pub windowing: Option<Window>,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
    pub error: Option<String>,
}

impl Report {
    pub fn status(&self) -> Status {
        if self.error.is_some() {
            Status::Error
        } else if self.checks.iter().all(Check::passed) {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        let status = self.status();
        let value = json!({
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario,
            "verb": self.verb.name(),
            "branch": self.branch,
            "status": status.name(),
            "checks": self.checks.iter().map(Check::to_json).collect::<Vec<_>>(),
            "square_match": self.square_match,
            "windowing": self.windowing.map(|w| json!({
                "kind": "super-gaussian",
                "half_width": Sig17(w.half_width),
                "order": w.order,
                "interior_half_width": Sig17(w.interior()),
            })),
            "warnings": self.warnings,
            "files": self.files,
            "partial": status == Status::Error && !self.files.is_empty(),
            "error": self.error,
        });
        to_json_pretty(&value)
    }
}

struct Context<'a> {
    cfg: &'a ScenarioConfig,
    force: ForceProfile,
    times: Vec<f64>,
    snapshot_index: Vec<usize>,
}

impl<'a> Context<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let force = cfg.force.resolve()?;
        force.check_span(cfg.t_final)?;
        let times = uniform_times(cfg.t_final, cfg.samples);
        let tol = 1e-9 * cfg.t_final;
        let snapshot_index = cfg
            .snapshots
            .iter()
            .map(|t| {
                let k = (t / cfg.t_final * (cfg.samples - 1) as f64).round() as usize;
                if (times[k] - t).abs() <= tol {
                    Ok(k)
                } else {
                    Err(Error::Config(format!(
                        "snapshot {t} is not a trajectory sample; choose samples so that t_final/(samples-1) divides it"
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Context {
            cfg,
            force,
            times,
            snapshot_index,
        })
    }

    fn snapshot_times(&self) -> Vec<f64> {
        self.snapshot_index.iter().map(|&k| self.times[k]).collect()
    }

    fn packet(&self) -> GridWavefunction {
        let [q0, p0, w] = self.cfg.packet;
        GridWavefunction::gaussian(self.cfg.grid, q0, p0, w)
    }

    fn quadratic(&self) -> Result<CoeffTrajectory> {
        solve_quadratic_coeffs(&self.force, self.cfg.mass, self.cfg.quadratic, &self.times)
    }

    fn linear(&self) -> Result<CoeffTrajectory> {
        let [a, b, c] = self.cfg.linear;
        solve_linear_coeffs(&self.force, self.cfg.mass, a, b, c, &self.times)
    }
}

fn transforms_json(records: &[TransformRecord]) -> String {
    let mut map = Map::new();
    for r in records {
        let mut entry = r.to_json();
        if let Value::Object(o) = &mut entry {
            o.remove("t");
        }
        map.insert(crate::io::fmt17(r.t), entry);
    }
    to_json_pretty(&Value::Object(map))
}

struct QuadraticStage {
    traj: CoeffTrajectory,
    solutions: Vec<LRSolution>,
}

fn solve_quadratic(
    ctx: &Context,
    out: &mut Outputs,
    report: &mut Report,
) -> Result<QuadraticStage> {
    let traj = ctx.quadratic()?;
    let casimir = casimir_sigma(&traj)?;
    out.write("coefficients_quadratic.csv", &traj.to_csv())?;
    out.write(
        "coefficients_quadratic.json",
        &to_json_pretty(&traj.to_json()),
    )?;
    report.checks.push(Check::below(
        "quadratic_lvn_residual",
        traj.max_lvn_residual().0,
        tolerance::LVN_RESIDUAL,
    ));
    report.checks.push(Check::below(
        "casimir_drift",
        casimir.max_relative_drift,
        tolerance::CASIMIR_DRIFT,
    ));

    let records = transforms_along(&traj)?;
    out.write("transforms.json", &transforms_json(&records))?;
    report.checks.push(Check::below(
        "kappa_drift",
        kappa_drift(&records),
        tolerance::KAPPA_DRIFT,
    ));

    let solutions = (0..=ctx.cfg.n_max)
        .map(|n| LRSolution::build(n, &traj, &records, &ctx.cfg.grid))
        .collect::<Result<Vec<_>>>()?;
    out.write("phases.csv", &phase_csv(&solutions))?;
    for sol in &solutions {
        for (i, &k) in ctx.snapshot_index.iter().enumerate() {
            out.write(
                &format!("state_n{}_s{i:03}.csv", sol.n),
                &sol.state(k).to_csv(),
            )?;
        }
    }
    Ok(QuadraticStage { traj, solutions })
}

fn validate_quadratic(ctx: &Context, stage: &QuadraticStage, report: &mut Report) -> Result<()> {
    let traj = &stage.traj;
    let stride = (traj.len() - 1).div_ceil(EIGEN_CHECK_SAMPLES - 1).max(1);
    let mut samples: Vec<usize> = (0..traj.len()).step_by(stride).collect();
    if samples.last() != Some(&(traj.len() - 1)) {
        samples.push(traj.len() - 1);
    }
    let mut eigen: f64 = 0.0;
    for sol in stage.solutions.iter().filter(|s| s.n <= 3) {
        let scale = sol.eigenvalue().abs().max(1.0);
        for &k in &samples {
            eigen = eigen.max(
                eigen_residual(&traj.invariant(k), &sol.eigenstate(k), sol.eigenvalue())? / scale,
            );
        }
    }
    report.checks.push(Check::below(
        "eigenvalue_residual",
        eigen,
        tolerance::EIGEN_RESIDUAL,
    ));

    let mut schrodinger: f64 = 0.0;
    for sol in &stage.solutions {
        for &k in &ctx.snapshot_index {
            schrodinger = schrodinger.max(schrodinger_residual(sol, traj, k)?);
        }
    }
    report.checks.push(Check::below(
        "schrodinger_residual",
        schrodinger,
        tolerance::SCHRODINGER_RESIDUAL,
    ));

    let snaps = ctx.snapshot_times();
    let mut worst: f64 = 1.0;
    for sol in &stage.solutions {
        let run = split_step_evolve(
            &sol.state(0),
            &ctx.force,
            ctx.cfg.mass,
            ctx.cfg.dt,
            ctx.cfg.t_final,
            &snaps,
        )?;
        report.warnings.extend(
            run.warnings
                .iter()
                .map(|w| format!("oracle n = {}: {w}", sol.n)),
        );
        for &k in &ctx.snapshot_index {
            let numeric = run.snapshot_at(traj.times[k]).expect("snapshot requested");
            worst = worst.min(fidelity(&sol.state(k), numeric)?);
        }
    }
    report.checks.push(Check::below(
        "oracle_infidelity",
        1.0 - worst,
        tolerance::ORACLE_INFIDELITY,
    ));

    let default_opts = MatchOptions::default();
    let certificate = match_square(traj, &ctx.force, ctx.cfg.mass, &default_opts)?;
    let fitted = match_square(
        traj,
        &ctx.force,
        ctx.cfg.mass,
        &MatchOptions {
            rank_shortcut: false,
            ..default_opts
        },
    )?;
    report.checks.push(Check::at_least(
        "square_match_residual",
        fitted.residual,
        crate::completeness::SQUARE_TOL,
    ));
    report.checks.push(Check::at_least(
        "square_match_agreement",
        f64::from(u8::from(certificate.verdict == fitted.verdict)),
        1.0,
    ));
    report.square_match = Some(json!({
        "quadratic": {
            "rank_certificate": certificate.to_json(),
            "least_squares": fitted.to_json(),
        }
    }));
    Ok(())
}

fn solve_linear(ctx: &Context, out: &mut Outputs, report: &mut Report) -> Result<CoeffTrajectory> {
    let traj = ctx.linear()?;
    out.write("coefficients_linear.csv", &traj.to_csv())?;
    out.write("coefficients_linear.json", &to_json_pretty(&traj.to_json()))?;
    report.checks.push(Check::below(
        "linear_lvn_residual",
        traj.max_lvn_residual().0,
        tolerance::LVN_RESIDUAL,
    ));
    Ok(traj)
}

fn validate_linear(
    ctx: &Context,
    traj: &CoeffTrajectory,
    out: &mut Outputs,
    report: &mut Report,
) -> Result<()> {
    let window = Window::for_grid(&ctx.cfg.grid);
    let mut eigen: f64 = 0.0;
    for (label, k) in [("start", 0), ("end", traj.len() - 1)] {
        let psi =
            linear_invariant_eigenstate(ctx.cfg.lambda, traj, k, &ctx.cfg.grid, Some(window))?;
        let scale = ctx.cfg.lambda.abs().max(1.0);
        eigen = eigen.max(
            eigen_residual_within(&traj.invariant(k), &psi, ctx.cfg.lambda, window.interior())?
                / scale,
        );
        out.write(&format!("linear_eigenstate_{label}.csv"), &psi.to_csv())?;
    }
    report.windowing = Some(window);
    report.checks.push(Check::below(
        "linear_eigen_residual",
        eigen,
        tolerance::EIGEN_RESIDUAL,
    ));

    let fid = verify_invariant_maps_solutions(traj, &ctx.packet(), &ctx.force, ctx.cfg.dt)?;
    report.checks.push(Check::below(
        "mapped_solution_infidelity",
        1.0 - fid,
        tolerance::MAPPED_INFIDELITY,
    ));

    let squared = square_linear(traj, 1.0);
    let rep = match_square(&squared, &ctx.force, ctx.cfg.mass, &MatchOptions::default())?;
    report.checks.push(Check::below(
        "square_round_trip_residual",
        rep.residual,
        crate::completeness::SQUARE_TOL,
    ));
    let entry = json!({ "linear_squared": rep.to_json() });
    merge_square_match(report, entry);
    Ok(())
}

fn merge_square_match(report: &mut Report, entry: Value) {
    match (&mut report.square_match, entry) {
        (Some(Value::Object(existing)), Value::Object(new)) => existing.extend(new),
        (slot, entry) => *slot = Some(entry),
    }
}

/// Expectation drift of each invariant along the propagated packet.
fn expectation_checks(
    ctx: &Context,
    invariants: &[(&str, &CoeffTrajectory)],
    out: &mut Outputs,
    report: &mut Report,
) -> Result<()> {
    let run = split_step_evolve(
        &ctx.packet(),
        &ctx.force,
        ctx.cfg.mass,
        ctx.cfg.dt,
        ctx.cfg.t_final,
        &ctx.snapshot_times(),
    )?;
    report.checks.push(Check::below(
        "packet_norm_drift",
        run.norm_drift,
        tolerance::NORM_DRIFT,
    ));
    report
        .warnings
        .extend(run.warnings.iter().map(|w| format!("packet: {w}")));
    out.write("run_metadata.json", &run.metadata_json(&ctx.force))?;
    for (i, psi) in run.snapshots.iter().enumerate() {
        out.write(&format!("packet_s{i:03}.csv"), &psi.to_csv())?;
    }
    for (label, traj) in invariants {
        let values = ctx
            .snapshot_index
            .iter()
            .map(|&k| {
                let psi = run.snapshot_at(traj.times[k]).expect("snapshot requested");
                expectation(psi, &traj.invariant(k))
            })
            .collect::<Result<Vec<Complex64>>>()?;
        let start = expectation(&run.snapshots[0], &traj.invariant(0))?;
        let drift = values
            .iter()
            .map(|v| (v - start).norm())
            .fold(0.0, f64::max)
            / (1.0 + start.norm());
        report.checks.push(Check::below(
            format!("{label}_expectation_drift"),
            drift,
            tolerance::EXPECTATION_DRIFT,
        ));
    }
    Ok(())
}

fn execute(verb: Verb, ctx: &Context, out: &mut Outputs, report: &mut Report) -> Result<()> {
    let branch = ctx.cfg.branch;
    match verb {
        Verb::Solve | Verb::Validate => {
            let quadratic = branch
                .has_quadratic()
                .then(|| solve_quadratic(ctx, out, report))
                .transpose()?;
            let linear = branch
                .has_linear()
                .then(|| solve_linear(ctx, out, report))
                .transpose()?;
            if verb == Verb::Validate {
                if let Some(stage) = &quadratic {
                    validate_quadratic(ctx, stage, report)?;
                }
                if let Some(traj) = &linear {
                    validate_linear(ctx, traj, out, report)?;
                }
                let mut invariants = Vec::new();
                if let Some(stage) = &quadratic {
                    invariants.push(("quadratic", &stage.traj));
                }
                if let Some(traj) = &linear {
                    invariants.push(("linear", traj));
                }
                expectation_checks(ctx, &invariants, out, report)?;
            }
        }
        Verb::Propagate => {
            let run = split_step_evolve(
                &ctx.packet(),
                &ctx.force,
                ctx.cfg.mass,
                ctx.cfg.dt,
                ctx.cfg.t_final,
                &ctx.snapshot_times(),
            )?;
            report.checks.push(Check::below(
                "packet_norm_drift",
                run.norm_drift,
                tolerance::NORM_DRIFT,
            ));
            report.warnings.extend(run.warnings.iter().cloned());
            out.write("run_metadata.json", &run.metadata_json(&ctx.force))?;
            for (i, psi) in run.snapshots.iter().enumerate() {
                out.write(&format!("packet_s{i:03}.csv"), &psi.to_csv())?;
            }
        }
        Verb::MatchSquare => {
            let mut entry = Map::new();
            if branch.has_quadratic() {
                let traj = ctx.quadratic()?;
                let rep = match_square(&traj, &ctx.force, ctx.cfg.mass, &MatchOptions::default())?;
                entry.insert("quadratic".into(), rep.to_json());
            }
            if branch.has_linear() {
                let squared = square_linear(&ctx.linear()?, 1.0);
                let rep =
                    match_square(&squared, &ctx.force, ctx.cfg.mass, &MatchOptions::default())?;
                report.checks.push(Check::below(
                    "square_round_trip_residual",
                    rep.residual,
                    crate::completeness::SQUARE_TOL,
                ));
                entry.insert("linear_squared".into(), rep.to_json());
            }
            out.write(
                "square_match.json",
                &to_json_pretty(&Value::Object(entry.clone())),
            )?;
            report.square_match = Some(Value::Object(entry));
        }
    }
    Ok(())
}

/// Runs `verb` on `cfg`, writing outputs and `report.json` into `out_dir`.
///
/// Module errors are recorded in the report (status `error`) rather than
/// returned; `Err` is returned only when the report itself cannot be written.
pub fn run_verb(verb: Verb, cfg: &ScenarioConfig, out_dir: &Path) -> Result<Report> {
    let mut out = Outputs::new(out_dir)?;
    let mut report = Report {
        scenario: cfg.name.clone(),
        verb,
        branch: cfg.branch.name().to_string(),
        checks: Vec::new(),
        square_match: None,
        windowing: None,
        warnings: Vec::new(),
        files: Vec::new(),
        error: None,
    };
    let result = Context::new(cfg).and_then(|ctx| execute(verb, &ctx, &mut out, &mut report));
    if let Err(e) = result {
        report.error = Some(format!("scenario {:?}: {e}", cfg.name));
    }
    report.files = out.files.clone();
    report.files.push("report.json".into());
    out.write("report.json", &report.to_json())?;
    Ok(report)
}

/// The full pipeline with every check, into `cfg.out`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Report> {
    run_verb(Verb::Validate, cfg, &cfg.out)
}
