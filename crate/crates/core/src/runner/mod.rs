//! Configured runs, offline checks and refinement studies.
//!
//! Exit codes: 0 ok, 2 config or I/O error, 3 inadmissible initial data,
//! 4 flow failure, 5 estimate violation.

pub mod config;
pub mod output;
pub mod study;

use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::{Experiment, RunConfig, OUTPUT_ROOT_ENV};
pub use study::{convergence_study, StudyError, StudyReport};

use crate::domain::{build_grid, Grid};
use crate::error::Error;
use crate::field::{check_admissible, node_diff, AdmissibilityReport, DifferentialPack, Flavor, GhostedField, GraphField, InitialData};
use crate::flow::{self, FailureStage, FlowParams, Solver};
use crate::monitor::{Monitor, MonitorOptions, MonitorReport, MonitorSummary};
use crate::rescale::ScalePlan;
use output::{read_snapshot, snapshot_name, write_json, write_series, write_snapshot, SnapshotMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    ConfigError,
    Inadmissible,
    FlowFailure,
    EstimateViolation,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::ConfigError => 2,
            RunStatus::Inadmissible => 3,
            RunStatus::FlowFailure => 4,
            RunStatus::EstimateViolation => 5,
        }
    }

    pub(crate) fn of_error(e: &Error, stage: FailureStage) -> Self {
        match (e, stage) {
            (Error::InvalidInitialData(_), _) => RunStatus::Inadmissible,
            (e, FailureStage::Initial) if e.is_flow_failure() => RunStatus::Inadmissible,
            (Error::Config { .. } | Error::InvalidDomain(_) | Error::InvalidParams(_) | Error::Io(_), _) => {
                RunStatus::ConfigError
            }
            _ => RunStatus::FlowFailure,
        }
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub status: RunStatus,
    pub exit_code: i32,
    pub error: Option<String>,
    pub mode: Flavor,
    pub alpha: f64,
    pub dimension: usize,
    pub radius: f64,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    pub plan: Option<ScalePlan>,
    pub initial_admissibility: Option<AdmissibilityReport>,
    pub steps: usize,
    pub final_t: f64,
    pub final_s: f64,
    pub converged: bool,
    pub reached_horizon: bool,
    pub final_phi_min: f64,
    pub final_phi_max: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// `max |phi - phi_exact|` over monitored steps, for constant initial data.
    pub radial_error_max: Option<f64>,
    pub monitor: Option<MonitorSummary>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub output_dir: PathBuf,
    pub summary: RunSummary,
    pub report: Option<MonitorReport>,
    pub final_field: Option<GraphField>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }
}

/// Reads, validates and runs a config file, writing all artifacts.
/// Config problems are reported through the outcome, never panics.
pub fn run_from_config(path: &Path) -> std::result::Result<RunOutcome, Error> {
    let config = RunConfig::load(path)?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    let base = path.parent().unwrap_or(Path::new("."));
    let exp = config.resolve(base, name)?;
    Ok(run_experiment(&exp))
}

fn empty_summary(exp: &Experiment) -> RunSummary {
    RunSummary {
        name: exp.name.clone(),
        status: RunStatus::Ok,
        exit_code: 0,
        error: None,
        mode: exp.mode,
        alpha: exp.params.alpha,
        dimension: exp.spec.dimension,
        radius: exp.spec.radius,
        radial_nodes: exp.spec.radial_nodes,
        angular_nodes: exp.spec.angular_nodes,
        plan: None,
        initial_admissibility: None,
        steps: 0,
        final_t: 0.0,
        final_s: 0.0,
        converged: false,
        reached_horizon: false,
        final_phi_min: f64::NAN,
        final_phi_max: f64::NAN,
        dt_min: f64::NAN,
        dt_max: f64::NAN,
        radial_error_max: None,
        monitor: None,
    }
}

/// Admissibility report that tolerates non-spacelike nodes.
pub fn admissibility(field: &GraphField, grid: &Grid) -> AdmissibilityReport {
    let ghosted = GhostedField::reflect(&field.phi, grid);
    let pack = DifferentialPack {
        nodes: (0..grid.len()).map(|i| node_diff(&ghosted, grid, i)).collect(),
    };
    check_admissible(field, &pack, grid)
}

pub fn run_experiment(exp: &Experiment) -> RunOutcome {
    let mut summary = empty_summary(exp);
    let finish = |mut summary: RunSummary, status: RunStatus, error: Option<String>| {
        summary.status = status;
        summary.exit_code = status.exit_code();
        summary.error = error;
        summary
    };
    let fail = |summary: RunSummary, e: Error, stage: FailureStage| {
        let status = RunStatus::of_error(&e, stage);
        let summary = finish(summary, status, Some(e.to_string()));
        let _ = std::fs::create_dir_all(&exp.output_dir)
            .map_err(Error::from)
            .and_then(|_| write_json(&exp.output_dir.join("summary.json"), &exp.hash, &summary));
        RunOutcome {
            status,
            output_dir: exp.output_dir.clone(),
            summary,
            report: None,
            final_field: None,
        }
    };

    let grid = match build_grid(exp.spec) {
        Ok(g) => g,
        Err(e) => return fail(summary, e, FailureStage::Initial),
    };
    let field0 = match exp.initial.build(&grid) {
        Ok(f) => f,
        Err(e) => return fail(summary, e, FailureStage::Initial),
    };
    let report0 = admissibility(&field0, &grid);
    summary.initial_admissibility = Some(report0.clone());
    if !report0.admissible {
        let e = if !report0.spacelike {
            Error::Spacelike {
                nodes: report0.spacelike_violations.clone(),
                max_grad: report0.max_grad,
            }
        } else {
            Error::MeanConvexity {
                nodes: report0.convexity_violations.clone(),
                min_denominator: report0.min_denominator,
            }
        };
        return fail(summary, e, FailureStage::Initial);
    }
    let plan = match ScalePlan::from_field(exp.params.alpha, exp.spec.dimension, &field0, exp.c) {
        Ok(p) => p,
        Err(e) => return fail(summary, Error::config("rescale.c", e.to_string()), FailureStage::Initial),
    };
    summary.plan = Some(plan);
    let init = match exp.mode {
        Flavor::Physical => field0,
        Flavor::Rescaled => plan.to_rescaled(&field0),
    };

    let mut monitor = Monitor::new(plan, &grid, exp.options);
    let (trajectory, failure) = match flow::run(init, &grid, &exp.params, &mut monitor) {
        Ok(t) => (Some(t), None),
        Err(f) => {
            let f = *f;
            (f.trajectory, Some((f.error, f.stage)))
        }
    };
    let converged = trajectory.as_ref().is_some_and(|t| t.converged);
    let report = monitor.finish(converged);

    if let Some(t) = &trajectory {
        let last = &t.final_state.field;
        let clock = plan.clock(last);
        summary.steps = t.steps();
        summary.final_t = clock.t;
        summary.final_s = clock.s;
        summary.converged = t.converged;
        summary.reached_horizon = t.reached_horizon;
        summary.final_phi_min = last.min();
        summary.final_phi_max = last.max();
        let dts = t.log.iter().skip(1).map(|l| l.dt).filter(|d| d.is_finite());
        summary.dt_min = dts.clone().fold(f64::INFINITY, f64::min);
        summary.dt_max = dts.fold(0.0, f64::max);
    }
    if matches!(exp.initial, InitialData::Constant { .. }) {
        summary.radial_error_max = Some(
            report
                .records
                .iter()
                .map(|r| (r.phi_min - r.env_lo).abs().max((r.phi_max - r.env_hi).abs()))
                .fold(0.0, f64::max),
        );
    }
    summary.monitor = Some(report.summary.clone());

    let (status, error) = match &failure {
        Some((e, stage)) => (RunStatus::of_error(e, *stage), Some(e.to_string())),
        None if !report.summary.passed => (RunStatus::EstimateViolation, None),
        None => (RunStatus::Ok, None),
    };
    let mut summary = finish(summary, status, error);
    if let Err(e) = write_artifacts(exp, &grid, &plan, &summary, &report, trajectory.as_ref()) {
        summary = finish(summary, RunStatus::ConfigError, Some(format!("writing artifacts: {e}")));
    }
    RunOutcome {
        status: summary.status,
        output_dir: exp.output_dir.clone(),
        summary,
        report: Some(report),
        final_field: trajectory.map(|t| t.final_state.field),
    }
}

fn write_artifacts(
    exp: &Experiment,
    grid: &Grid,
    plan: &ScalePlan,
    summary: &RunSummary,
    report: &MonitorReport,
    trajectory: Option<&flow::Trajectory>,
) -> crate::Result<()> {
    let dir = &exp.output_dir;
    std::fs::create_dir_all(dir.join("snapshots"))?;
    write_json(&dir.join("summary.json"), &exp.hash, summary)?;
    write_series(&dir.join("series.csv"), &exp.hash, &report.records)?;
    #[derive(Serialize)]
    struct Violations<'a> {
        violations: &'a [crate::monitor::Violation],
    }
    write_json(
        &dir.join("violations.json"),
        &exp.hash,
        &Violations {
            violations: &report.violations,
        },
    )?;
    if let Some(t) = trajectory {
        for snap in &t.snapshots {
            let meta = SnapshotMeta {
                config_hash: exp.hash.clone(),
                step: snap.step,
                time: snap.field.time,
                flavor: snap.field.flavor,
                spec: exp.spec,
                alpha: plan.alpha,
                c: plan.c,
                phi_min0: plan.phi_min,
                phi_max0: plan.phi_max,
                c_tol: exp.options.c_tol,
            };
            write_snapshot(&dir.join("snapshots").join(snapshot_name(snap.step)), &meta, grid, &snap.field)?;
        }
    }
    Ok(())
}

/// Result of auditing a stored snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub status: RunStatus,
    pub exit_code: i32,
    pub snapshot: PathBuf,
    /// The step-0 snapshot used for the baseline, when found next to it.
    pub baseline: Option<PathBuf>,
    pub error: Option<String>,
    pub admissibility: Option<AdmissibilityReport>,
    pub monitor: Option<MonitorSummary>,
    pub violations: Vec<crate::monitor::Violation>,
}

/// Re-runs the monitor on a stored slice. Bounds that refer to the initial
/// slice use `step_000000.csv` from the same directory when present.
pub fn check_snapshot(path: &Path) -> CheckOutcome {
    let mut out = CheckOutcome {
        status: RunStatus::Ok,
        exit_code: 0,
        snapshot: path.to_path_buf(),
        baseline: None,
        error: None,
        admissibility: None,
        monitor: None,
        violations: Vec::new(),
    };
    let done = |mut out: CheckOutcome, status: RunStatus, error: Option<String>| {
        out.status = status;
        out.exit_code = status.exit_code();
        out.error = error;
        out
    };
    let (meta, phi) = match read_snapshot(path) {
        Ok(x) => x,
        Err(e) => return done(out, RunStatus::ConfigError, Some(e.to_string())),
    };
    let grid = match build_grid(meta.spec) {
        Ok(g) => g,
        Err(e) => return done(out, RunStatus::ConfigError, Some(e.to_string())),
    };
    if phi.len() != grid.len() {
        let msg = format!("snapshot has {} values, grid has {} nodes", phi.len(), grid.len());
        return done(out, RunStatus::ConfigError, Some(msg));
    }
    let field = GraphField::new(phi, meta.time, meta.flavor);
    let report = admissibility(&field, &grid);
    out.admissibility = Some(report.clone());
    if !report.admissible {
        return done(out, RunStatus::Inadmissible, Some("slice is not admissible".into()));
    }
    let initial_path = path.with_file_name(snapshot_name(0));
    let initial = if meta.step != 0 && initial_path.exists() {
        match read_snapshot(&initial_path) {
            Ok((m0, phi0)) if m0.spec == meta.spec && phi0.len() == grid.len() => {
                out.baseline = Some(initial_path);
                GraphField::new(phi0, m0.time, m0.flavor)
            }
            Ok(_) => return done(out, RunStatus::ConfigError, Some("baseline snapshot does not match".into())),
            Err(e) => return done(out, RunStatus::ConfigError, Some(e.to_string())),
        }
    } else {
        field.clone()
    };
    let plan = match ScalePlan::new(meta.alpha, meta.spec.dimension, meta.phi_min0, meta.phi_max0, Some(meta.c)) {
        Ok(p) => p,
        Err(e) => return done(out, RunStatus::ConfigError, Some(e.to_string())),
    };
    let params = FlowParams {
        alpha: meta.alpha,
        ..FlowParams::default()
    };
    let audit = || -> crate::Result<MonitorReport> {
        let solver = Solver::new(&grid, params)?;
        let options = MonitorOptions {
            c_tol: meta.c_tol,
            ..MonitorOptions::default()
        };
        let mut monitor = Monitor::new(plan, &grid, options);
        let s0 = solver.prepare(initial)?;
        use crate::flow::{Observation, Observer};
        monitor.observe(&Observation {
            step: 0,
            state: &s0,
            previous: None,
            grid: &grid,
        })?;
        if meta.step != 0 {
            let s1 = solver.prepare(field)?;
            monitor.observe(&Observation {
                step: meta.step,
                state: &s1,
                previous: None,
                grid: &grid,
            })?;
        }
        Ok(monitor.finish(false))
    };
    match audit() {
        Ok(report) => {
            let status = if report.summary.passed {
                RunStatus::Ok
            } else {
                RunStatus::EstimateViolation
            };
            out.monitor = Some(report.summary);
            out.violations = report.violations;
            done(out, status, None)
        }
        Err(e) => {
            let status = RunStatus::of_error(&e, FailureStage::Initial);
            done(out, status, Some(e.to_string()))
        }
    }
}
