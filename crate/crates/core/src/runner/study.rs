//! Grid-refinement studies.
//!
//! The finest level runs at the configured resolution; each coarser level
//! halves the radial spacing count (and the angular count when n = 2).
//! Constant data are measured against the exact radial solution, other data
//! by successive differences of the quadrature mean of the final `phi`.

use serde::Serialize;

use super::{output::write_json, run_experiment, Experiment, RunStatus};
use crate::domain::{build_grid, DomainSpec};
use crate::error::{Error, Result};
use crate::flow::FailureStage;
use crate::field::{Flavor, InitialData};
use crate::rescale::ScalePlan;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyLevel {
    pub level: usize,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    pub h: f64,
    pub steps: usize,
    pub final_t: f64,
    pub status: RunStatus,
    /// Quadrature mean of the final physical `phi`.
    pub mean_phi: f64,
    /// Error against the exact solution, or against the next finer level.
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub name: String,
    /// `exact` or `richardson`.
    pub reference: String,
    pub levels: Vec<StudyLevel>,
    /// `log2(e_k / e_{k+1})` for consecutive levels.
    pub orders: Vec<f64>,
    /// Order between the two finest measured levels.
    pub observed_order: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error(transparent)]
    Setup(#[from] Error),
    #[error("level {level} ({radial_nodes} x {angular_nodes}) ended with status {status:?}: {message}")]
    Level {
        level: usize,
        radial_nodes: usize,
        angular_nodes: usize,
        status: RunStatus,
        message: String,
    },
}

impl StudyError {
    pub fn status(&self) -> RunStatus {
        match self {
            StudyError::Setup(e) => RunStatus::of_error(e, FailureStage::Initial),
            StudyError::Level { status, .. } => *status,
        }
    }
}

impl StudyReport {
    /// Worst status over all levels.
    pub fn status(&self) -> RunStatus {
        self.levels.iter().map(|l| l.status).max().unwrap_or(RunStatus::Ok)
    }
}

fn coarsen(spec: DomainSpec, factor: usize) -> Result<DomainSpec> {
    let bad = |what: &str| {
        Error::config(
            "domain.radial_nodes",
            format!("{what} is not divisible by {factor} for the requested number of levels"),
        )
    };
    match spec.dimension {
        1 => {
            let cells = spec.radial_nodes - 1;
            if cells % factor != 0 {
                return Err(bad("radial_nodes - 1"));
            }
            Ok(DomainSpec::segment(spec.radius, cells / factor + 1))
        }
        _ => {
            if spec.radial_nodes % factor != 0 {
                return Err(bad("radial_nodes"));
            }
            if spec.angular_nodes % (2 * factor) != 0 {
                return Err(Error::config(
                    "domain.angular_nodes",
                    format!("must be divisible by {} for the requested number of levels", 2 * factor),
                ));
            }
            Ok(DomainSpec::disk(
                spec.radius,
                spec.radial_nodes / factor,
                spec.angular_nodes / factor,
            ))
        }
    }
}

fn level_experiment(exp: &Experiment, spec: DomainSpec, level: usize) -> Experiment {
    let mut e = exp.clone();
    e.spec = spec;
    e.config.domain.radial_nodes = spec.radial_nodes;
    if spec.dimension == 2 {
        e.config.domain.angular_nodes = Some(spec.angular_nodes);
    }
    // Every level must stop at the same time.
    e.params.convergence_tol = None;
    e.config.flow.convergence_tol = None;
    e.params.snapshot_stride = None;
    e.config.output.snapshot_stride = None;
    e.hash = e.config.hash();
    e.name = format!("{}_level_{level}", exp.name);
    e.output_dir = exp.output_dir.join(format!("level_{level}"));
    e
}

/// Runs `levels` resolutions and reports the observed order. Writes one
/// output directory per level and `study.json` next to them.
pub fn convergence_study(exp: &Experiment, levels: usize) -> std::result::Result<StudyReport, StudyError> {
    if levels < 3 {
        return Err(Error::config("levels", format!("need at least 3 levels, got {levels}")).into());
    }
    if matches!(exp.initial, InitialData::Table(_)) {
        return Err(Error::config(
            "initial.preset",
            "a table cannot be transferred between resolutions",
        )
        .into());
    }
    let exact = matches!(exp.initial, InitialData::Constant { .. });
    let mut runs = Vec::with_capacity(levels);
    for level in 0..levels {
        let factor = 1usize << (levels - 1 - level);
        let spec = coarsen(exp.spec, factor)?;
        let grid = build_grid(spec)?;
        let e = level_experiment(exp, spec, level);
        let outcome = run_experiment(&e);
        let field = match (outcome.status, outcome.final_field) {
            (RunStatus::Ok | RunStatus::EstimateViolation, Some(f)) => f,
            (status, _) => {
                return Err(StudyError::Level {
                    level,
                    radial_nodes: spec.radial_nodes,
                    angular_nodes: spec.angular_nodes,
                    status,
                    message: outcome.summary.error.unwrap_or_default(),
                })
            }
        };
        let plan = outcome
            .summary
            .plan
            .ok_or_else(|| Error::InvalidParams(format!("level {level} has no scale plan")))?;
        let physical = match field.flavor {
            Flavor::Physical => field,
            Flavor::Rescaled => plan.to_physical(&field),
        };
        let t = physical.time;
        let error = exact.then(|| exact_error(&plan, &physical.phi, t));
        runs.push(StudyLevel {
            level,
            radial_nodes: spec.radial_nodes,
            angular_nodes: spec.angular_nodes,
            h: grid.h_r,
            steps: outcome.summary.steps,
            final_t: t,
            status: outcome.status,
            mean_phi: grid.integrate(&physical.phi) / grid.total_weight(),
            error,
        });
    }
    if !exact {
        for k in 0..levels - 1 {
            runs[k].error = Some((runs[k].mean_phi - runs[k + 1].mean_phi).abs());
        }
    }
    let errors: Vec<f64> = runs.iter().filter_map(|l| l.error).collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let observed_order = *orders.last().expect("at least two measured levels");
    let report = StudyReport {
        name: exp.name.clone(),
        reference: if exact { "exact" } else { "richardson" }.into(),
        levels: runs,
        orders,
        observed_order,
    };
    std::fs::create_dir_all(&exp.output_dir).map_err(Error::from)?;
    write_json(&exp.output_dir.join("study.json"), &exp.hash, &report)?;
    Ok(report)
}

fn exact_error(plan: &ScalePlan, phi: &[f64], t: f64) -> f64 {
    let exact = plan.exact_phi(t);
    phi.iter().map(|p| (p - exact).abs()).fold(0.0, f64::max)
}
