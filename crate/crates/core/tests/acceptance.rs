//! Acceptance suite. Runs as a plain binary so every criterion prints one
//! line; exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use imcf::domain::{build_grid, gauss_curvature_fd, DomainSpec};
use imcf::curvature::{self, node_geometry};
use imcf::field::{differentiate, Flavor, GhostedField, GraphField, InitialData};
use imcf::flow::{self, FlowParams, Observation, Observer, Solver};
use imcf::linalg;
use imcf::monitor::{interior_nodes, metric_evolution_field, metric_evolution_residual};
use imcf::rescale::ScalePlan;
use imcf::runner::{convergence_study, run_experiment, Experiment, RunConfig, RunStatus};

type Outcome = Result<String, String>;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn experiment(name: &str, out: &std::path::Path) -> Experiment {
    let path = configs().join(format!("{name}.toml"));
    let mut exp = RunConfig::load(&path)
        .and_then(|c| c.resolve(&configs(), name))
        .unwrap_or_else(|e| panic!("{name}: {e}"));
    exp.output_dir = out.join(name);
    exp
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Largest `|phi - exact(t)|` over every step.
struct ExactTracker<F: Fn(f64) -> f64> {
    exact: F,
    worst: f64,
    last: f64,
}

impl<F: Fn(f64) -> f64> Observer for ExactTracker<F> {
    fn observe(&mut self, obs: &Observation) -> imcf::Result<()> {
        let f = &obs.state.field;
        let e = (self.exact)(f.time);
        for p in &f.phi {
            self.worst = self.worst.max((p - e).abs());
        }
        self.last = f.phi[0];
        Ok(())
    }
}

fn radial(exp: &Experiment) -> Result<(f64, f64, f64), String> {
    let grid = build_grid(exp.spec).map_err(|e| e.to_string())?;
    let n = exp.spec.dimension as f64;
    let alpha = exp.params.alpha;
    let exact = move |t: f64| {
        if alpha == 0.0 {
            -t / n
        } else {
            (1.0 / alpha) * (-(alpha / n) * t + 1.0).ln()
        }
    };
    let mut tracker = ExactTracker {
        exact,
        worst: 0.0,
        last: f64::NAN,
    };
    let params = FlowParams {
        monitor_stride: 1,
        snapshot_stride: None,
        ..exp.params
    };
    let start = Instant::now();
    let field = exp.initial.build(&grid).map_err(|e| e.to_string())?;
    let traj = flow::run(field, &grid, &params, &mut tracker).map_err(|f| f.error.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    if !traj.reached_horizon {
        return Err("horizon not reached".into());
    }
    Ok((tracker.worst, tracker.last, secs))
}

fn criterion_1(out: &std::path::Path) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, final_expected) in [
        ("radial_exact", -(2f64.ln())),
        ("radial_n1", -(3f64.ln())),
        ("radial_alpha0", -1.0),
    ] {
        let exp = experiment(name, out);
        let (worst, last, secs) = radial(&exp)?;
        let pass = worst <= 1e-5 && (last - final_expected).abs() <= 1e-5 && secs <= 60.0;
        ok &= pass;
        lines.push(format!("{name}: max err {worst:.2e}, final {last:.6}, {secs:.1}s"));
    }
    verdict(ok, lines.join("; "))
}

fn criterion_2(out: &std::path::Path) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for alpha in [0.0, -0.5, -1.0] {
        let exp = experiment("rescaled_fixed_point", out);
        let grid = build_grid(exp.spec).unwrap();
        let field0 = exp.initial.build(&grid).unwrap();
        let plan = ScalePlan::from_field(alpha, exp.spec.dimension, &field0, None).unwrap();
        let params = FlowParams { alpha, ..exp.params };
        let traj = flow::run(plan.to_rescaled(&field0), &grid, &params, &mut ())
            .map_err(|f| f.error.to_string())?;
        let dev = traj
            .final_state
            .field
            .phi
            .iter()
            .map(|p| (p.exp() - 1.0).abs())
            .fold(0.0, f64::max);
        let pass = traj.steps() == 10_000 && dev <= 1e-9;
        ok &= pass;
        lines.push(format!("alpha {alpha}: {} steps, max |u~ - 1| {dev:.1e}", traj.steps()));
    }
    verdict(ok, lines.join("; "))
}

fn criteria_3_4_5(out: &std::path::Path) -> [Outcome; 3] {
    let exp = experiment("bump_converge", out);
    let run = run_experiment(&exp);
    let Some(m) = run.summary.monitor.clone() else {
        let e = format!("run failed: {:?}", run.summary.error);
        return [Err(e.clone()), Err(e.clone()), Err(e)];
    };
    let mut ok3 = run.summary.converged && run.status == RunStatus::Ok;
    let mut parts = vec![format!("converged at s = {:.3} after {} steps", run.summary.final_s, run.summary.steps)];
    for key in ["c0", "gradient", "phidot", "h_theta"] {
        let c = &m.checks[key];
        ok3 &= c.passed;
        parts.push(format!("{key} margin {:.2e} (tol {:.1e})", c.worst_margin, c.tolerance_at_worst));
    }
    let c3 = verdict(ok3, parts.join(", "));

    let c4 = match m.limit_radius {
        Some(r) => {
            let constant = constant_limit_radius(out);
            let detail = format!(
                "bump r_inf {:.5} in [{:.5}, {:.5}] (slack {}); constant data {}",
                r.r_inf,
                r.lower,
                r.upper,
                r.slack,
                match &constant {
                    Ok(v) => format!("r_inf - 1 = {:.1e}", v - 1.0),
                    Err(e) => e.clone(),
                }
            );
            verdict(r.inside && constant.is_ok_and(|v| (v - 1.0).abs() <= 1e-6), detail)
        }
        None => Err("no limit radius (run did not converge)".into()),
    };

    let radial = run_experiment(&experiment("radial_exact", out));
    let c5 = match &radial.summary.monitor {
        Some(rm) => {
            let (r, b) = (rm.area_ode_max_residual, m.area_ode_max_residual);
            verdict(
                r <= 0.01 && b <= 0.03,
                format!("max relative residual radial {r:.2e} (<= 1e-2), bump {b:.2e} (<= 3e-2)"),
            )
        }
        None => Err(format!("radial run failed: {:?}", radial.summary.error)),
    };
    [c3, c4, c5]
}

fn constant_limit_radius(out: &std::path::Path) -> Result<f64, String> {
    let mut exp = experiment("rescaled_fixed_point", out);
    exp.name = "constant_limit".into();
    exp.output_dir = out.join("constant_limit");
    exp.params.alpha = -1.0;
    exp.params.convergence_tol = Some(1e-4);
    exp.initial = InitialData::Constant { u0: 2.5 };
    let run = run_experiment(&exp);
    let r = run
        .summary
        .monitor
        .and_then(|m| m.limit_radius)
        .ok_or_else(|| format!("constant run gave no limit radius: {:?}", run.summary.error))?;
    if !r.inside {
        return Err(format!("constant r_inf {} outside [{}, {}]", r.r_inf, r.lower, r.upper));
    }
    Ok(r.r_inf)
}

fn criterion_6() -> Outcome {
    let grid = build_grid(DomainSpec::disk(1.0, 64, 64)).unwrap();
    let n = 2;
    let bump = InitialData::Bump { r0: 1.0, epsilon: 0.05 }.build(&grid).unwrap();
    let pack = differentiate(&GhostedField::reflect(&bump.phi, &grid), &grid).unwrap();
    let mut route: f64 = 0.0;
    let mut det: f64 = 0.0;
    for i in 0..grid.len() {
        let d = &pack.nodes[i];
        let m = &grid.metrics[i];
        let (a, b) = curvature::mean_curvature(n, bump.phi[i], d, m).unwrap();
        route = route.max((a - b).abs() / a.abs().max(1.0));
        let u = bump.phi[i].exp();
        let (g, _) = curvature::induced_metric(n, u, d, m).unwrap();
        let expected = u.powi(4) * d.v * d.v * linalg::det(2, &m.sigma);
        det = det.max((linalg::det(2, &g) - expected).abs() / expected);
    }

    let r0: f64 = 1.7;
    let flat = GraphField::constant(&grid, r0.ln(), Flavor::Physical);
    let fpack = differentiate(&GhostedField::reflect(&flat.phi, &grid), &grid).unwrap();
    let mut constant: f64 = 0.0;
    for i in 0..grid.len() {
        let geo = node_geometry(n, flat.phi[i], &fpack.nodes[i], &grid.metrics[i]).unwrap();
        constant = constant.max((geo.mean_curvature * r0 - 2.0).abs() / 2.0);
        let s = &grid.metrics[i].sigma;
        constant = constant.max(linalg::max_abs_diff(2, &geo.h, &[[-r0 * s[0][0], -r0 * s[0][1]], [-r0 * s[1][0], -r0 * s[1][1]]]) / r0);
    }
    let area = curvature::hausdorff_measure(&flat.phi, &fpack, &grid);
    constant = constant.max((area - r0 * r0 * grid.total_weight()).abs() / area);

    let errs: Vec<f64> = [0.04, 0.02, 0.01].iter().map(|h| (gauss_curvature_fd(0.6, *h) + 1.0).abs()).collect();
    let order = (errs[1] / errs[2]).log2().min((errs[0] / errs[1]).log2());
    verdict(
        route <= 1e-10 && det <= 1e-10 && constant <= 1e-13 && order >= 1.9,
        format!(
            "routes {route:.1e}, det g {det:.1e}, constant graph {constant:.1e}, Gauss curvature order {order:.2}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let factors = [0.25, 0.125, 0.0625, 0.03125];
    let orders = |d: &[f64]| -> Vec<f64> { d.windows(2).map(|w| (w[0] / w[1]).log2()).collect() };

    // Constant data: no spatial error, the residual itself is O(dt).
    let grid = build_grid(DomainSpec::disk(1.0, 16, 16)).unwrap();
    let params = FlowParams { alpha: -1.0, ..FlowParams::default() };
    let solver = Solver::new(&grid, params).unwrap();
    let f0 = GraphField::constant(&grid, 0.0, Flavor::Physical);
    let s0 = solver.prepare(f0.clone()).unwrap();
    let dt0 = 0.2;
    let constant: Vec<f64> = factors
        .iter()
        .map(|k| {
            let s1 = solver.step_with(&s0, dt0 * k).unwrap();
            metric_evolution_residual(&f0, &s1.field, &grid, -1.0).unwrap()
        })
        .collect();

    // Bump data: the spatial part is independent of dt; successive differences isolate the rest.
    let grid = build_grid(DomainSpec::disk(1.0, 32, 32)).unwrap();
    let params = FlowParams { alpha: -0.5, ..FlowParams::default() };
    let solver = Solver::new(&grid, params).unwrap();
    let f0 = InitialData::Bump { r0: 1.0, epsilon: 0.05 }.build(&grid).unwrap();
    let s0 = solver.prepare(f0.clone()).unwrap();
    let dt0 = solver.stable_dt(&s0);
    let fields: Vec<_> = factors
        .iter()
        .map(|k| {
            let s1 = solver.step_with(&s0, dt0 * k).unwrap();
            metric_evolution_field(&f0, &s1.field, &grid, -0.5).unwrap()
        })
        .collect();
    let diffs: Vec<f64> = fields
        .windows(2)
        .map(|w| {
            interior_nodes(&grid)
                .map(|i| linalg::max_abs_diff(2, &w[0][i], &w[1][i]))
                .fold(0.0, f64::max)
        })
        .collect();
    let (oc, ob) = (orders(&constant), orders(&diffs));
    let min = oc.iter().chain(&ob).cloned().fold(f64::INFINITY, f64::min);
    verdict(
        min >= 0.9,
        format!("orders constant {oc:.2?}, bump {ob:.2?} (min {min:.2})"),
    )
}

fn criterion_8(out: &std::path::Path) -> Outcome {
    let mut exp = experiment("radial_exact", out);
    exp.output_dir = out.join("study");
    let report = convergence_study(&exp, 3).map_err(|e| e.to_string())?;
    let levels: Vec<String> = report
        .levels
        .iter()
        .map(|l| format!("{}: {:.2e}", l.radial_nodes, l.error.unwrap_or(f64::NAN)))
        .collect();
    verdict(
        report.observed_order >= 1.9,
        format!("errors [{}], observed order {:.2}", levels.join(", "), report.observed_order),
    )
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    })
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "radial exact solution", guarded(|| criterion_1(out))));
    results.push((2, "rescaled fixed point", guarded(|| criterion_2(out))));
    let [c3, c4, c5] = catch_unwind(AssertUnwindSafe(|| criteria_3_4_5(out))).unwrap_or_else(|_| {
        let e = || Err("panicked".to_string());
        [e(), e(), e()]
    });
    results.push((3, "estimate suite on bump data", c3));
    results.push((4, "limit radius", c4));
    results.push((5, "area ODE", c5));
    results.push((6, "geometry kernel identities", guarded(criterion_6)));
    results.push((7, "metric evolution order in dt", guarded(criterion_7)));
    results.push((8, "spatial convergence order", guarded(|| criterion_8(out))));

    let mut failed = 0;
    for (k, name, r) in &results {
        match r {
            Ok(d) => println!("criterion {k} ({name}): PASS  {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {k} ({name}): FAIL  {d}")
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
