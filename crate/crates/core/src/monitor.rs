//! Audit of the a-priori estimates along a run.
//!
//! The monitor is an [`Observer`]: it sees each monitored state (and the state
//! one step before it), never mutates it, and appends one [`Record`] per
//! observation. Every check is a pure function of a record, so the pass flags
//! stored in a record always agree with its margins.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::curvature;
use crate::domain::Grid;
use crate::error::Result;
use crate::field::{differentiate, Flavor, GhostedField, GraphField};
use crate::flow::{neumann_residual, oscillation, Observation, Observer};
use crate::linalg::{self, Mat2, ZERO2};
use crate::rescale::{radial_solution, ScalePlan};

/// Tunable tolerances of the audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonitorOptions {
    /// Discretization tolerance is `c_tol * (h^2 + dt)`.
    pub c_tol: f64,
    /// Absolute slack of the gradient estimate.
    pub gradient_slack: f64,
    /// Largest accepted relative residual of the area ODE.
    pub area_ode_tol: f64,
    /// Relative slack on the limit-radius interval.
    pub radius_slack: f64,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        Self {
            c_tol: 10.0,
            gradient_slack: 1e-8,
            area_ode_tol: 0.03,
            radius_slack: 0.02,
        }
    }
}

/// One row of `series.csv`. Quantities are expressed in the run's own
/// variables: `phi`, envelopes and area are rescaled in rescaled runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Record {
    pub step: usize,
    pub t: f64,
    pub s: f64,
    pub dt: f64,
    pub tol: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub env_lo: f64,
    pub env_hi: f64,
    /// `inf u / Theta` and `sup u / Theta`.
    pub u_theta_min: f64,
    pub u_theta_max: f64,
    pub grad_sup: f64,
    pub grad_sup0: f64,
    pub grad_ratio: f64,
    /// `M = phi_t Theta^alpha`.
    pub m_min: f64,
    pub m_max: f64,
    pub m_lo: f64,
    pub m_hi: f64,
    pub htheta_min: f64,
    pub htheta_max: f64,
    pub htheta_lo: f64,
    pub htheta_hi: f64,
    pub area: f64,
    pub area_log_lo: f64,
    pub area_log_hi: f64,
    /// Predicted `d area / dt` (or `d/ds`).
    pub area_rate: f64,
    /// `-integral u^{-alpha} dH^n`, used to normalize the area residual.
    pub area_variation: f64,
    /// Three-point derivative of `area` over neighbouring records.
    pub area_fd: f64,
    pub area_residual: f64,
    pub osc: f64,
    /// Quadrature mean of `u / Theta`.
    pub u_mean: f64,
    /// `max |H u - n|`, zero on umbilic slices.
    pub hu_dev: f64,
    pub metric_residual: f64,
    pub neumann_residual: f64,
    pub c0_ok: bool,
    pub gradient_ok: bool,
    pub phidot_ok: bool,
    pub htheta_ok: bool,
    pub area_ok: bool,
    pub metric_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub passed: bool,
    pub margin: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(margin: f64, tolerance: f64) -> Self {
        Self {
            passed: margin >= -tolerance,
            margin,
            tolerance,
        }
    }
}

pub fn check_c0(r: &Record) -> Check {
    Check::new((r.phi_min - r.env_lo).min(r.env_hi - r.phi_max), r.tol)
}

pub fn check_gradient(r: &Record, slack: f64) -> Check {
    Check::new(r.grad_sup0 - r.grad_sup, slack)
}

pub fn check_phidot(r: &Record) -> Check {
    Check::new((r.m_min - r.m_lo).min(r.m_hi - r.m_max), r.tol)
}

/// Two-sided bound plus strict positivity of `H Theta`.
pub fn check_h_theta(r: &Record) -> Check {
    let mut c = Check::new((r.htheta_min - r.htheta_lo).min(r.htheta_hi - r.htheta_max), r.tol);
    c.passed &= r.htheta_min > 0.0;
    c
}

pub fn check_area_sandwich(r: &Record) -> Check {
    let log_area = r.area.ln();
    Check::new((log_area - r.area_log_lo).min(r.area_log_hi - log_area), r.tol)
}

/// Metric evolution residual against `c_tol (h^2 + dt)`; NaN (step 0) passes.
pub fn check_metric(r: &Record) -> Check {
    if r.metric_residual.is_nan() {
        return Check::new(0.0, r.tol);
    }
    Check::new(-r.metric_residual, r.tol)
}

/// A failed check at one record, with the offending nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub check: String,
    pub step: usize,
    pub t: f64,
    pub s: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub nodes: Vec<usize>,
}

/// Per-node `dg/dt` predicted by the flow: `2 Phi h + L_a g`, plus `(2/n) g`
/// in rescaled time. The Lie term accounts for the graph parametrization,
/// which moves points tangentially with `a^k = Phi phi^k / (u v)`.
///
/// Only interior nodes (see [`interior_nodes`]) carry meaningful values.
pub fn metric_velocity(phi: &[f64], grid: &Grid, alpha: f64, flavor: Flavor) -> Result<(Vec<Mat2>, Vec<Mat2>)> {
    let n = grid.dimension();
    let pack = differentiate(&GhostedField::reflect(phi, grid), grid)?;
    let geo = curvature::slice(phi, &pack, grid)?;
    let mut speed = vec![0.0; grid.len()];
    let mut drift = vec![[0.0; 2]; grid.len()];
    for i in 0..grid.len() {
        let u = phi[i].exp();
        let d = &pack.nodes[i];
        let s = curvature::support_and_speed(u, d.v, geo.nodes[i].mean_curvature, alpha)?;
        speed[i] = s.speed;
        let up = d.grad_up(n, &grid.metrics[i].sigma_inv);
        for k in 0..n {
            drift[i][k] = s.speed * up[k] / (u * d.v);
        }
    }
    let g: Vec<Mat2> = geo.nodes.iter().map(|x| x.g).collect();
    let extra = match flavor {
        Flavor::Physical => 0.0,
        Flavor::Rescaled => 2.0 / n as f64,
    };
    let mut rhs = vec![ZERO2; grid.len()];
    for i in interior_nodes(grid) {
        let (dg, da) = partials(grid, i, &g, &drift);
        let mut out = ZERO2;
        for a in 0..n {
            for b in 0..n {
                let mut lie = 0.0;
                for k in 0..n {
                    lie += drift[i][k] * dg[k][a][b] + g[i][k][b] * da[a][k] + g[i][a][k] * da[b][k];
                }
                out[a][b] = 2.0 * speed[i] * geo.nodes[i].h[a][b] + lie + extra * g[i][a][b];
            }
        }
        rhs[i] = out;
    }
    Ok((g, rhs))
}

/// Nodes whose centered stencils stay inside the domain and away from the pole.
pub fn interior_nodes(grid: &Grid) -> impl Iterator<Item = usize> + '_ {
    let nr = grid.radial_count();
    grid.nodes
        .iter()
        .enumerate()
        .filter(move |(_, node)| node.ring >= 1 && node.ring + 1 < nr)
        .map(|(i, _)| i)
}

/// `(d_k g_ab, d_a drift^k)` by centered differences at an interior node.
fn partials(grid: &Grid, i: usize, g: &[Mat2], drift: &[[f64; 2]]) -> ([Mat2; 2], Mat2) {
    let node = &grid.nodes[i];
    let nt = grid.angular_count();
    let mut neighbours = vec![(
        grid.index(node.ring + 1, node.sector),
        grid.index(node.ring - 1, node.sector),
        grid.h_r,
    )];
    if grid.dimension() == 2 {
        neighbours.push((
            grid.index(node.ring, (node.sector + 1) % nt),
            grid.index(node.ring, (node.sector + nt - 1) % nt),
            grid.h_theta,
        ));
    }
    let mut dg = [ZERO2; 2];
    let mut da = ZERO2;
    for (dir, &(p, m, h)) in neighbours.iter().enumerate() {
        for a in 0..2 {
            for b in 0..2 {
                dg[dir][a][b] = (g[p][a][b] - g[m][a][b]) / (2.0 * h);
            }
            da[dir][a] = (drift[p][a] - drift[m][a]) / (2.0 * h);
        }
    }
    (dg, da)
}

/// Signed residual `(g(next) - g(prev)) / dt - velocity(prev)` at interior nodes.
pub fn metric_evolution_field(prev: &GraphField, next: &GraphField, grid: &Grid, alpha: f64) -> Result<Vec<Mat2>> {
    let dt = next.time - prev.time;
    let (g0, rhs) = metric_velocity(&prev.phi, grid, alpha, prev.flavor)?;
    let pack = differentiate(&GhostedField::reflect(&next.phi, grid), grid)?;
    let n = grid.dimension();
    let mut out = vec![ZERO2; grid.len()];
    for i in interior_nodes(grid) {
        let d = &pack.nodes[i];
        let (g1, _) = curvature::induced_metric(n, next.phi[i].exp(), d, &grid.metrics[i])?;
        for a in 0..n {
            for b in 0..n {
                out[i][a][b] = (g1[a][b] - g0[i][a][b]) / dt - rhs[i][a][b];
            }
        }
    }
    Ok(out)
}

/// `max |d_t g - 2 Phi h - L_a g|` over interior nodes.
pub fn metric_evolution_residual(prev: &GraphField, next: &GraphField, grid: &Grid, alpha: f64) -> Result<f64> {
    let field = metric_evolution_field(prev, next, grid, alpha)?;
    Ok(interior_nodes(grid)
        .map(|i| linalg::max_abs_diff(grid.dimension(), &field[i], &ZERO2))
        .fold(0.0, f64::max))
}

/// Limit radius of a converged rescaled run and its a-priori interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitRadius {
    pub r_inf: f64,
    pub lower: f64,
    pub upper: f64,
    pub slack: f64,
    pub inside: bool,
    pub osc_final: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckSummary {
    pub passed: bool,
    pub worst_margin: f64,
    pub tolerance_at_worst: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorSummary {
    pub records: usize,
    /// Estimates; any failure marks the run as violating.
    pub checks: BTreeMap<String, CheckSummary>,
    /// Residuals of identities, reported against their tolerances.
    pub diagnostics: BTreeMap<String, CheckSummary>,
    /// Run-wide bounds of `u / Theta`.
    pub c1: f64,
    pub c2: f64,
    /// Run-wide bounds of `H Theta`.
    pub c3: f64,
    pub c4: f64,
    /// Largest observed `sup |D phi~|(s) / sup |D phi~|(0)`.
    pub lambda: f64,
    pub area_ode_max_residual: f64,
    pub metric_max_residual: f64,
    pub final_hu_deviation: f64,
    pub limit_radius: Option<LimitRadius>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorReport {
    pub records: Vec<Record>,
    pub violations: Vec<Violation>,
    pub summary: MonitorSummary,
}

#[derive(Debug, Clone, Copy)]
struct Baseline {
    grad_sup: f64,
    m_min: f64,
    m_max: f64,
    htheta_min: f64,
    htheta_max: f64,
    log_area_phys: f64,
    u_min: f64,
    u_max: f64,
    area_phys: f64,
}

pub struct Monitor {
    plan: ScalePlan,
    options: MonitorOptions,
    mesh: f64,
    base_area: f64,
    baseline: Option<Baseline>,
    flavor: Flavor,
    records: Vec<Record>,
    violations: Vec<Violation>,
}

impl Monitor {
    pub fn new(plan: ScalePlan, grid: &Grid, options: MonitorOptions) -> Self {
        Self {
            plan,
            options,
            mesh: grid.mesh_width(),
            base_area: grid.total_weight(),
            baseline: None,
            flavor: Flavor::Physical,
            records: Vec::new(),
            violations: Vec::new(),
        }
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    fn envelope(&self, flavor: Flavor, t: f64, s: f64, c: f64) -> f64 {
        match flavor {
            Flavor::Physical => radial_solution(self.plan.alpha, self.plan.dimension, c, t),
            Flavor::Rescaled => self.plan.envelope_offset(s, c),
        }
    }

    fn record(&mut self, obs: &Observation<'_>) -> Result<()> {
        let grid = obs.grid;
        let field = &obs.state.field;
        let plan = self.plan;
        let (alpha, n) = (plan.alpha, grid.dimension());
        let nf = n as f64;
        let clock = plan.clock(field);
        let log_theta = plan.log_theta_at_s(clock.s);
        // shift from native phi to physical phi
        let to_phys = match field.flavor {
            Flavor::Physical => 0.0,
            Flavor::Rescaled => log_theta,
        };
        let native_theta = match field.flavor {
            Flavor::Physical => log_theta.exp(),
            Flavor::Rescaled => 1.0,
        };
        let dt = obs.previous.map_or(0.0, |p| field.time - p.field.time);
        let tol = self.options.c_tol * (self.mesh * self.mesh + dt);

        let pack = differentiate(&GhostedField::reflect(&field.phi, grid), grid)?;
        let geo = curvature::slice(&field.phi, &pack, grid)?;
        let phys: Vec<f64> = field.phi.iter().map(|p| p + to_phys).collect();

        // M = phi_t Theta^alpha = Q(phi~)
        let m: Vec<f64> = match field.flavor {
            Flavor::Physical => {
                let theta_alpha = (alpha * log_theta).exp();
                obs.state.tendency.iter().map(|q| q * theta_alpha).collect()
            }
            Flavor::Rescaled => obs.state.tendency.iter().map(|q| q - 1.0 / nf).collect(),
        };
        let htheta: Vec<f64> = geo.nodes.iter().map(|g| g.mean_curvature * native_theta).collect();
        // H u is invariant under rescaling
        let hu_dev = geo
            .nodes
            .iter()
            .zip(&field.phi)
            .map(|(g, p)| (g.mean_curvature * p.exp() - nf).abs())
            .fold(0.0, f64::max);
        let grad: Vec<f64> = pack.nodes.iter().map(|d| d.grad_norm_sq.sqrt()).collect();
        let grad_sup = grad.iter().copied().fold(0.0, f64::max);
        let area = geo.hausdorff;
        let variation = curvature::area_variation(&field.phi, &pack, grid, alpha);
        let area_rate = match field.flavor {
            Flavor::Physical => variation,
            Flavor::Rescaled => area + variation,
        };
        let u_tilde: Vec<f64> = phys.iter().map(|p| (p - log_theta).exp()).collect();
        let u_mean = grid.integrate(&u_tilde) / grid.total_weight();
        let (phi_min, phi_max) = (field.min(), field.max());
        let (m_min, m_max) = min_max(&m);
        let (ht_min, ht_max) = min_max(&htheta);

        let base = *self.baseline.get_or_insert_with(|| {
            let area_phys = curvature::hausdorff_measure(&phys, &pack, grid);
            Baseline {
                grad_sup,
                m_min,
                m_max,
                htheta_min: ht_min,
                htheta_max: ht_max,
                log_area_phys: area_phys.ln(),
                u_min: phys.iter().copied().fold(f64::INFINITY, f64::min).exp(),
                u_max: phys.iter().copied().fold(f64::NEG_INFINITY, f64::max).exp(),
                area_phys,
            }
        });

        let (phi1, phi2) = (plan.phi_min, plan.phi_max);
        let env_lo = self.envelope(field.flavor, clock.t, clock.s, phi1);
        let env_hi = self.envelope(field.flavor, clock.t, clock.s, phi2);
        let (ut_lo, ut_hi) = plan.rescaled_envelopes(clock.s);
        let m_lo = base.m_min.min(-1.0 / nf);
        let m_hi = base.m_max.max(-1.0 / nf);
        // H Theta = -v u~^{-(1+alpha)} / M
        let pow = |x: f64| (-(1.0 + alpha) * x).exp();
        let v_min = (1.0 - base.grad_sup * base.grad_sup).max(0.0).sqrt();
        let floor = v_min * pow(ut_lo).min(pow(ut_hi)) / (-m_lo);
        let ceiling = pow(ut_lo).max(pow(ut_hi)) / (-m_hi);
        let log_area0 = base.log_area_phys;
        let mut record = Record {
            step: obs.step,
            t: clock.t,
            s: clock.s,
            dt,
            tol,
            phi_min,
            phi_max,
            env_lo,
            env_hi,
            u_theta_min: (phi_min + to_phys - log_theta).exp(),
            u_theta_max: (phi_max + to_phys - log_theta).exp(),
            grad_sup,
            grad_sup0: base.grad_sup,
            grad_ratio: if base.grad_sup > 0.0 {
                grad_sup / base.grad_sup
            } else if grad_sup == 0.0 {
                1.0
            } else {
                f64::INFINITY
            },
            m_min,
            m_max,
            m_lo,
            m_hi,
            htheta_min: ht_min,
            htheta_max: ht_max,
            htheta_lo: 0.5 * base.htheta_min.min(floor),
            htheta_hi: 2.0 * base.htheta_max.max(ceiling),
            area,
            area_log_lo: log_area0 + nf * (env_hi - phi2),
            area_log_hi: log_area0 + nf * (env_lo - phi1),
            area_rate,
            area_variation: variation,
            area_fd: f64::NAN,
            area_residual: f64::NAN,
            osc: oscillation(field),
            u_mean,
            hu_dev,
            metric_residual: match obs.previous {
                Some(p) => metric_evolution_residual(&p.field, field, grid, alpha)?,
                None => f64::NAN,
            },
            neumann_residual: neumann_residual(&field.phi, grid),
            c0_ok: true,
            gradient_ok: true,
            phidot_ok: true,
            htheta_ok: true,
            area_ok: true,
            metric_ok: true,
        };

        let checks = [
            ("c0", check_c0(&record)),
            ("gradient", check_gradient(&record, self.options.gradient_slack)),
            ("phidot", check_phidot(&record)),
            ("h_theta", check_h_theta(&record)),
            ("area_sandwich", check_area_sandwich(&record)),
            ("metric_evolution", check_metric(&record)),
        ];
        record.c0_ok = checks[0].1.passed;
        record.gradient_ok = checks[1].1.passed;
        record.phidot_ok = checks[2].1.passed;
        record.htheta_ok = checks[3].1.passed;
        record.area_ok = checks[4].1.passed;
        record.metric_ok = checks[5].1.passed;
        // the metric residual is a diagnostic, reported in the series only
        for (name, c) in checks.into_iter().take(5) {
            if c.passed {
                continue;
            }
            let r = &record;
            let nodes: Vec<usize> = (0..grid.len())
                .filter(|&i| match name {
                    "c0" => field.phi[i] < r.env_lo - tol || field.phi[i] > r.env_hi + tol,
                    "gradient" => grad[i] > r.grad_sup0 + self.options.gradient_slack,
                    "phidot" => m[i] < r.m_lo - tol || m[i] > r.m_hi + tol,
                    "h_theta" => htheta[i] <= 0.0 || htheta[i] < r.htheta_lo - tol || htheta[i] > r.htheta_hi + tol,
                    _ => false,
                })
                .collect();
            self.violations.push(Violation {
                check: name.to_string(),
                step: r.step,
                t: r.t,
                s: r.s,
                margin: c.margin,
                tolerance: c.tolerance,
                nodes,
            });
        }
        self.records.push(record);
        Ok(())
    }

    /// Fills the series-level columns and summarizes the run.
    pub fn finish(mut self, converged: bool) -> MonitorReport {
        let flavor = self.flavor;
        let time = |r: &Record| match flavor {
            Flavor::Physical => r.t,
            Flavor::Rescaled => r.s,
        };
        let k = self.records.len();
        for i in 1..k.saturating_sub(1) {
            let (a, c, b) = (self.records[i - 1], self.records[i], self.records[i + 1]);
            // second-order three-point derivative on uneven spacing
            let (h1, h2) = (time(&c) - time(&a), time(&b) - time(&c));
            let fd = -h2 / (h1 * (h1 + h2)) * a.area + (h2 - h1) / (h1 * h2) * c.area + h1 / (h2 * (h1 + h2)) * b.area;
            let r = &mut self.records[i];
            r.area_fd = fd;
            r.area_residual = (fd - r.area_rate).abs() / r.area_variation.abs();
        }
        let records = self.records;
        let mut checks = BTreeMap::new();
        let opts = self.options;
        let mut diagnostics = BTreeMap::new();
        let per_record: [(&str, fn(&Record, f64) -> Check); 6] = [
            ("c0", |r, _| check_c0(r)),
            ("gradient", check_gradient),
            ("phidot", |r, _| check_phidot(r)),
            ("h_theta", |r, _| check_h_theta(r)),
            ("area_sandwich", |r, _| check_area_sandwich(r)),
            ("metric_evolution", |r, _| check_metric(r)),
        ];
        for (name, f) in per_record {
            let mut summary = CheckSummary {
                passed: true,
                worst_margin: f64::INFINITY,
                tolerance_at_worst: 0.0,
                failures: 0,
            };
            for r in &records {
                let c = f(r, opts.gradient_slack);
                if c.margin + c.tolerance < summary.worst_margin + summary.tolerance_at_worst {
                    summary.worst_margin = c.margin;
                    summary.tolerance_at_worst = c.tolerance;
                }
                if !c.passed {
                    summary.passed = false;
                    summary.failures += 1;
                }
            }
            if name == "metric_evolution" {
                diagnostics.insert(name.to_string(), summary);
            } else {
                checks.insert(name.to_string(), summary);
            }
        }
        let area_ode_max_residual = records
            .iter()
            .map(|r| r.area_residual)
            .filter(|x| x.is_finite())
            .fold(0.0, f64::max);
        if records.len() >= 3 {
            diagnostics.insert(
                "area_ode".into(),
                CheckSummary {
                    passed: area_ode_max_residual <= opts.area_ode_tol,
                    worst_margin: opts.area_ode_tol - area_ode_max_residual,
                    tolerance_at_worst: 0.0,
                    failures: records.iter().filter(|r| r.area_residual > opts.area_ode_tol).count(),
                },
            );
        }
        let fold = |f: fn(&Record) -> f64, init: f64, op: fn(f64, f64) -> f64| records.iter().map(f).fold(init, op);
        let last = records.last().copied();
        let limit_radius = match (converged, self.baseline, last) {
            (true, Some(b), Some(r)) => {
                let ratio = (b.area_phys / self.base_area).powf(1.0 / self.plan.dimension as f64);
                let (lower, upper) = (ratio / b.u_max, ratio / b.u_min);
                let slack = opts.radius_slack;
                Some(LimitRadius {
                    r_inf: r.u_mean,
                    lower,
                    upper,
                    slack,
                    inside: r.u_mean >= lower * (1.0 - slack) && r.u_mean <= upper * (1.0 + slack),
                    osc_final: r.osc,
                })
            }
            _ => None,
        };
        let final_hu_deviation = last.map_or(f64::NAN, |r| r.hu_dev);
        if let (Some(lr), Some(r)) = (limit_radius, last) {
            checks.insert(
                "limit_radius".into(),
                CheckSummary {
                    passed: lr.inside,
                    worst_margin: (lr.r_inf - lr.lower * (1.0 - lr.slack)).min(lr.upper * (1.0 + lr.slack) - lr.r_inf),
                    tolerance_at_worst: 0.0,
                    failures: usize::from(!lr.inside),
                },
            );
            checks.insert(
                "limit_shape".into(),
                CheckSummary {
                    passed: r.hu_dev <= r.tol,
                    worst_margin: r.tol - r.hu_dev,
                    tolerance_at_worst: r.tol,
                    failures: usize::from(r.hu_dev > r.tol),
                },
            );
        }
        let passed = checks.values().all(|c| c.passed);
        let summary = MonitorSummary {
            records: records.len(),
            checks,
            diagnostics,
            c1: fold(|r| r.u_theta_min, f64::INFINITY, f64::min),
            c2: fold(|r| r.u_theta_max, f64::NEG_INFINITY, f64::max),
            c3: fold(|r| r.htheta_min, f64::INFINITY, f64::min),
            c4: fold(|r| r.htheta_max, f64::NEG_INFINITY, f64::max),
            lambda: fold(|r| r.grad_ratio, 0.0, f64::max),
            area_ode_max_residual,
            metric_max_residual: fold(|r| r.metric_residual, 0.0, |a, b| if b.is_nan() { a } else { a.max(b) }),
            final_hu_deviation,
            limit_radius,
            passed,
        };
        MonitorReport {
            records,
            violations: self.violations,
            summary,
        }
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

impl Observer for Monitor {
    fn observe(&mut self, obs: &Observation<'_>) -> Result<()> {
        self.flavor = obs.state.field.flavor;
        self.record(obs)
    }
}
