//! Explicit time integration of `d phi/dt = Q(phi, D phi, D^2 phi)` and of
//! its rescaled form `d phi~/ds = Q(phi~, ..) + 1/n`.
//!
//! Every accepted state is carried together with its tendency, so each state
//! is checked for admissibility exactly once.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::exec::{map_nodes, Exec};
use crate::field::{node_diff, Flavor, GhostedField, GraphField, ADMISSIBILITY_MARGIN};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stepper {
    Euler,
    Rk2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowParams {
    pub alpha: f64,
    pub stepper: Stepper,
    pub cfl: f64,
    /// `t_end` for physical runs, `s_end` for rescaled runs.
    pub horizon: f64,
    /// Rescaled runs stop once `osc u~` drops below this.
    pub convergence_tol: Option<f64>,
    pub monitor_stride: usize,
    /// Steps between stored snapshots; the initial and final states are always kept.
    pub snapshot_stride: Option<usize>,
    pub max_steps: usize,
    pub exec: Exec,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            alpha: -1.0,
            stepper: Stepper::Rk2,
            cfl: 0.4,
            horizon: 1.0,
            convergence_tol: None,
            monitor_stride: 1,
            snapshot_stride: None,
            max_steps: 10_000_000,
            exec: Exec::default(),
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(self.alpha.is_finite() && self.alpha <= 0.0) {
            return bad(format!("alpha must be <= 0, got {}", self.alpha));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if let Some(tol) = self.convergence_tol {
            if !(tol > 0.0) {
                return bad(format!("convergence_tol must be positive, got {tol}"));
            }
        }
        if self.monitor_stride == 0 || self.snapshot_stride == Some(0) || self.max_steps == 0 {
            return bad("strides and max_steps must be at least 1".into());
        }
        Ok(())
    }
}

/// Fills the ghost layer by reflection across the boundary.
pub fn apply_neumann(field: &GraphField, grid: &Grid) -> GhostedField {
    GhostedField::reflect(&field.phi, grid)
}

/// `max |mu^i phi_i|` over the boundary, from one-sided second-order
/// differences of interior values only (the ghost layer is not consulted).
pub fn neumann_residual(phi: &[f64], grid: &Grid) -> f64 {
    let h = grid.h_r;
    if grid.dimension() == 1 {
        let m = phi.len();
        let left = (3.0 * phi[0] - 4.0 * phi[1] + phi[2]) / (2.0 * h);
        let right = (3.0 * phi[m - 1] - 4.0 * phi[m - 2] + phi[m - 3]) / (2.0 * h);
        return left.abs().max(right.abs());
    }
    let (nr, nt) = (grid.radial_count(), grid.angular_count());
    let scale = grid.boundary.first().map_or(1.0, |b| b.conormal[0]);
    (0..nt)
        .map(|k| {
            let f = |j: usize| phi[grid.index(j, k)];
            (scale * (2.0 * f(nr - 1) - 3.0 * f(nr - 2) + f(nr - 3)) / h).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy)]
struct NodeTendency {
    value: f64,
    rate: f64,
    denominator: f64,
    grad_norm_sq: f64,
}

/// Q at one node together with its explicit stability rate
/// `sum_i Q^{ii}/dx_i^2 + |Q^{12}|/(dx_1 dx_2)`, `Q^{ij} = e^{-alpha phi} v^2 sigma~^{ij} / D^2`.
fn node_tendency(ghosted: &GhostedField, grid: &Grid, alpha: f64, shift: f64, phi: f64, idx: usize) -> NodeTendency {
    let d = node_diff(ghosted, grid, idx);
    let n = grid.dimension();
    let nan = NodeTendency {
        value: f64::NAN,
        rate: f64::NAN,
        denominator: f64::NAN,
        grad_norm_sq: d.grad_norm_sq,
    };
    if !(d.grad_norm_sq < 1.0 - ADMISSIBILITY_MARGIN) {
        return nan;
    }
    let sigma_inv = &grid.metrics[idx].sigma_inv;
    let tsi = d.tilde_sigma_inv(n, sigma_inv);
    let den = n as f64 + linalg::contract(n, &tsi, &d.hess);
    let weight = (-alpha * phi).exp() * (1.0 - d.grad_norm_sq);
    let coeff = weight / (den * den);
    let rate = if n == 1 {
        coeff * tsi[0][0] / (grid.h_r * grid.h_r)
    } else {
        let ht = grid.effective_angular_spacing(grid.nodes[idx].ring);
        coeff * (tsi[0][0] / (grid.h_r * grid.h_r) + tsi[1][1] / (ht * ht) + tsi[0][1].abs() / (grid.h_r * ht))
    };
    NodeTendency {
        value: -weight / den + shift,
        rate,
        denominator: den,
        grad_norm_sq: d.grad_norm_sq,
    }
}

fn evaluate(phi: &[f64], grid: &Grid, alpha: f64, shift: f64, exec: Exec) -> Result<Vec<NodeTendency>> {
    let bad: Vec<usize> = (0..phi.len()).filter(|&i| !phi[i].is_finite()).collect();
    if !bad.is_empty() {
        return Err(Error::NonFinite { nodes: bad });
    }
    let ghosted = GhostedField::reflect(phi, grid);
    let out = map_nodes(exec, grid.len(), |i| node_tendency(&ghosted, grid, alpha, shift, phi[i], i));
    let spacelike: Vec<usize> = (0..out.len())
        .filter(|&i| !(out[i].grad_norm_sq < 1.0 - ADMISSIBILITY_MARGIN))
        .collect();
    if !spacelike.is_empty() {
        let max_grad = out.iter().map(|t| t.grad_norm_sq.sqrt()).fold(0.0, f64::max);
        return Err(Error::Spacelike { nodes: spacelike, max_grad });
    }
    let concave: Vec<usize> = (0..out.len())
        .filter(|&i| !(out[i].denominator > ADMISSIBILITY_MARGIN))
        .collect();
    if !concave.is_empty() {
        let min_denominator = out.iter().map(|t| t.denominator).fold(f64::INFINITY, f64::min);
        return Err(Error::MeanConvexity {
            nodes: concave,
            min_denominator,
        });
    }
    let nonfinite: Vec<usize> = (0..out.len()).filter(|&i| !out[i].value.is_finite()).collect();
    if !nonfinite.is_empty() {
        return Err(Error::NonFinite { nodes: nonfinite });
    }
    Ok(out)
}

fn shift_for(flavor: Flavor, grid: &Grid) -> f64 {
    match flavor {
        Flavor::Physical => 0.0,
        Flavor::Rescaled => 1.0 / grid.dimension() as f64,
    }
}

/// Physical right-hand side `Q` at every node.
pub fn rhs_q(field: &GraphField, grid: &Grid, alpha: f64) -> Result<Vec<f64>> {
    Ok(evaluate(&field.phi, grid, alpha, 0.0, Exec::default())?
        .iter()
        .map(|t| t.value)
        .collect())
}

/// Largest stable explicit step for the current state.
pub fn stable_dt(field: &GraphField, grid: &Grid, alpha: f64, cfl: f64) -> Result<f64> {
    let rate = evaluate(&field.phi, grid, alpha, 0.0, Exec::default())?
        .iter()
        .map(|t| t.rate)
        .fold(0.0, f64::max);
    Ok(cfl / rate)
}

/// Removes angular Fourier modes above the per-ring cutoff near the pole,
/// where the ring circumference would otherwise force a tiny explicit step.
pub struct PoleFilter {
    rings: Vec<(usize, usize)>,
    angular: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PoleFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoleFilter").field("rings", &self.rings).finish()
    }
}

impl PoleFilter {
    /// `None` for segments and for grids that need no filtering.
    pub fn new(grid: &Grid) -> Option<Self> {
        if grid.dimension() != 2 || grid.filtered_rings() == 0 {
            return None;
        }
        let angular = grid.angular_count();
        let mut planner = FftPlanner::new();
        Some(Self {
            rings: (0..grid.filtered_rings()).map(|j| (j, grid.angular_cutoff(j))).collect(),
            angular,
            forward: planner.plan_fft_forward(angular),
            inverse: planner.plan_fft_inverse(angular),
        })
    }

    pub fn apply(&self, values: &mut [f64]) {
        let nt = self.angular;
        let mut buf = vec![Complex::new(0.0, 0.0); nt];
        for &(ring, cutoff) in &self.rings {
            let row = &mut values[ring * nt..(ring + 1) * nt];
            if row.iter().all(|&x| x == row[0]) {
                continue;
            }
            for (b, &x) in buf.iter_mut().zip(row.iter()) {
                *b = Complex::new(x, 0.0);
            }
            self.forward.process(&mut buf);
            for (m, b) in buf.iter_mut().enumerate() {
                if m.min(nt - m) > cutoff {
                    *b = Complex::new(0.0, 0.0);
                }
            }
            self.inverse.process(&mut buf);
            for (x, b) in row.iter_mut().zip(&buf) {
                *x = b.re / nt as f64;
            }
        }
    }
}

/// An admissible state together with its (filtered) tendency.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub field: GraphField,
    pub tendency: Vec<f64>,
    /// Explicit stability rate; the next step is `cfl / max_rate`.
    pub max_rate: f64,
    pub min_denominator: f64,
    pub max_grad: f64,
}

/// Per-step record.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct StepLog {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub min_denominator: f64,
    pub max_grad: f64,
    pub admissible: bool,
}

pub struct Solver<'g> {
    grid: &'g Grid,
    params: FlowParams,
    filter: Option<PoleFilter>,
}

impl<'g> Solver<'g> {
    pub fn new(grid: &'g Grid, params: FlowParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            grid,
            params,
            filter: PoleFilter::new(grid),
        })
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        self.grid
    }

    fn tendency(&self, phi: &[f64], flavor: Flavor) -> Result<(Vec<f64>, Vec<NodeTendency>)> {
        let raw = evaluate(phi, self.grid, self.params.alpha, shift_for(flavor, self.grid), self.params.exec)?;
        let mut values: Vec<f64> = raw.iter().map(|t| t.value).collect();
        if let Some(f) = &self.filter {
            f.apply(&mut values);
        }
        Ok((values, raw))
    }

    /// Checks admissibility and evaluates the tendency of `field`.
    pub fn prepare(&self, field: GraphField) -> Result<FlowState> {
        if field.phi.len() != self.grid.len() {
            return Err(Error::InvalidInitialData(format!(
                "field has {} values, grid has {} nodes",
                field.phi.len(),
                self.grid.len()
            )));
        }
        let (tendency, raw) = self.tendency(&field.phi, field.flavor)?;
        Ok(FlowState {
            field,
            tendency,
            max_rate: raw.iter().map(|t| t.rate).fold(0.0, f64::max),
            min_denominator: raw.iter().map(|t| t.denominator).fold(f64::INFINITY, f64::min),
            max_grad: raw.iter().map(|t| t.grad_norm_sq.sqrt()).fold(0.0, f64::max),
        })
    }

    pub fn stable_dt(&self, state: &FlowState) -> f64 {
        self.params.cfl / state.max_rate
    }

    /// One step of size `dt`, in whichever time variable the field is stamped.
    pub fn step_with(&self, state: &FlowState, dt: f64) -> Result<FlowState> {
        let phi = &state.field.phi;
        let k1 = &state.tendency;
        let next: Vec<f64> = match self.params.stepper {
            Stepper::Euler => phi.iter().zip(k1).map(|(p, k)| p + dt * k).collect(),
            Stepper::Rk2 => {
                let stage: Vec<f64> = phi.iter().zip(k1).map(|(p, k)| p + dt * k).collect();
                let (k2, _) = self.tendency(&stage, state.field.flavor)?;
                phi.iter()
                    .zip(k1.iter().zip(&k2))
                    .map(|(p, (a, b))| p + 0.5 * dt * (a + b))
                    .collect()
            }
        };
        self.prepare(GraphField::new(next, state.field.time + dt, state.field.flavor))
    }

    /// One CFL-limited step, clipped so as not to pass `horizon`.
    pub fn step(&self, state: &FlowState) -> Result<FlowState> {
        let mut dt = self.stable_dt(state);
        let left = self.params.horizon - state.field.time;
        if dt >= left {
            dt = left;
        }
        self.step_with(state, dt)
    }
}

/// Physical-time step from a bare field.
pub fn step(field: &GraphField, grid: &Grid, params: &FlowParams) -> Result<GraphField> {
    debug_assert_eq!(field.flavor, Flavor::Physical);
    advance(field, grid, params)
}

fn advance(field: &GraphField, grid: &Grid, params: &FlowParams) -> Result<GraphField> {
    let solver = Solver::new(grid, params.clone())?;
    Ok(solver.step(&solver.prepare(field.clone())?)?.field)
}

/// Rescaled-time step from a bare field.
pub fn step_rescaled(field: &GraphField, grid: &Grid, params: &FlowParams) -> Result<GraphField> {
    debug_assert_eq!(field.flavor, Flavor::Rescaled);
    advance(field, grid, params)
}

/// What an observer sees at each monitored step.
pub struct Observation<'a> {
    pub step: usize,
    pub state: &'a FlowState,
    /// The state one step earlier (absent at step 0).
    pub previous: Option<&'a FlowState>,
    pub grid: &'a Grid,
}

pub trait Observer {
    fn observe(&mut self, obs: &Observation<'_>) -> Result<()>;
}

impl Observer for () {
    fn observe(&mut self, _: &Observation<'_>) -> Result<()> {
        Ok(())
    }
}

/// A stored state and the step that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub field: GraphField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub log: Vec<StepLog>,
    pub final_state: FlowState,
    pub converged: bool,
    pub reached_horizon: bool,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.log.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureStage {
    /// The initial data was rejected.
    Initial,
    /// A step or the observer failed.
    Evolution,
}

/// A run that stopped early; `trajectory` ends at the last good state.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub stage: FailureStage,
    pub trajectory: Option<Trajectory>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?} failure: {}", self.stage, self.error)
    }
}

impl std::error::Error for RunFailure {}

/// `sup e^phi - inf e^phi`.
pub fn oscillation(field: &GraphField) -> f64 {
    field.max().exp() - field.min().exp()
}

/// Integrates to the horizon or until a rescaled run converges.
pub fn run(
    initial: GraphField,
    grid: &Grid,
    params: &FlowParams,
    observer: &mut dyn Observer,
) -> std::result::Result<Trajectory, Box<RunFailure>> {
    let fail = |error: Error, stage, trajectory| {
        Box::new(RunFailure {
            error,
            stage,
            trajectory,
        })
    };
    let solver = Solver::new(grid, params.clone()).map_err(|e| fail(e, FailureStage::Initial, None))?;
    let mut state = solver
        .prepare(initial)
        .map_err(|e| fail(e, FailureStage::Initial, None))?;
    let log_of = |step, s: &FlowState, dt| StepLog {
        step,
        time: s.field.time,
        dt,
        min_denominator: s.min_denominator,
        max_grad: s.max_grad,
        admissible: true,
    };
    let mut log = vec![log_of(0, &state, 0.0)];
    let mut snapshots = vec![Snapshot {
        step: 0,
        field: state.field.clone(),
    }];
    if let Err(e) = observer.observe(&Observation {
        step: 0,
        state: &state,
        previous: None,
        grid,
    }) {
        return Err(fail(e, FailureStage::Initial, None));
    }
    let converged_at = |s: &FlowState| {
        s.field.flavor == Flavor::Rescaled && params.convergence_tol.is_some_and(|tol| oscillation(&s.field) < tol)
    };
    let mut converged = converged_at(&state);
    let horizon_eps = 1e-12 * params.horizon.max(1.0);
    let mut step = 0;
    while !converged && state.field.time < params.horizon - horizon_eps && step < params.max_steps {
        let next = match solver.step(&state) {
            Ok(next) => next,
            Err(e) => {
                let mut failed = log_of(step + 1, &state, f64::NAN);
                failed.admissible = false;
                log.push(failed);
                if snapshots.last().map(|s| s.step) != Some(step) {
                    snapshots.push(Snapshot {
                        step,
                        field: state.field.clone(),
                    });
                }
                let trajectory = Trajectory {
                    snapshots,
                    log,
                    final_state: state,
                    converged: false,
                    reached_horizon: false,
                };
                return Err(fail(e, FailureStage::Evolution, Some(trajectory)));
            }
        };
        step += 1;
        log.push(log_of(step, &next, next.field.time - state.field.time));
        converged = converged_at(&next);
        let last = converged || next.field.time >= params.horizon - horizon_eps || step == params.max_steps;
        if step % params.monitor_stride == 0 || last {
            let obs = Observation {
                step,
                state: &next,
                previous: Some(&state),
                grid,
            };
            if let Err(e) = observer.observe(&obs) {
                let trajectory = Trajectory {
                    snapshots,
                    log,
                    final_state: next,
                    converged: false,
                    reached_horizon: false,
                };
                return Err(fail(e, FailureStage::Evolution, Some(trajectory)));
            }
        }
        if params.snapshot_stride.is_some_and(|k| step % k == 0) || last {
            snapshots.push(Snapshot {
                step,
                field: next.field.clone(),
            });
        }
        state = next;
    }
    let reached_horizon = state.field.time >= params.horizon - horizon_eps;
    Ok(Trajectory {
        snapshots,
        log,
        final_state: state,
        converged,
        reached_horizon,
    })
}
