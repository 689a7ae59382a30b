use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use imcf::runner::{check_snapshot, convergence_study, run_experiment, RunConfig, RunStatus, OUTPUT_ROOT_ENV};

/// Anisotropic inverse mean curvature flow of spacelike graphs in Minkowski space.
#[derive(Parser)]
#[command(name = "imcf", version, after_help = format!(
    "Relative output directories are placed under ${OUTPUT_ROOT_ENV} when it is set.\n\
     Exit codes: 0 ok, 2 config error, 3 inadmissible data, 4 flow failure, 5 estimate violation."
))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured flow and write its artifacts.
    Run { config: PathBuf },
    /// Run a grid-refinement study of a config.
    Study {
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Re-run the monitor on a stored snapshot.
    Check { snapshot: PathBuf },
}

fn load(path: &Path) -> Result<imcf::runner::Experiment, RunStatus> {
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    let base = path.parent().unwrap_or(Path::new("."));
    RunConfig::load(path)
        .and_then(|c| c.resolve(base, name))
        .map_err(|e| {
            eprintln!("error: {e}");
            RunStatus::ConfigError
        })
}

fn run(path: &Path) -> Result<RunStatus, RunStatus> {
    let exp = load(path)?;
    let outcome = run_experiment(&exp);
    let s = &outcome.summary;
    println!("run {} [{}]", s.name, exp.hash);
    println!("  grid {} x {}, n = {}, alpha = {}, mode {:?}", s.radial_nodes, s.angular_nodes, s.dimension, s.alpha, s.mode);
    println!("  steps {}, t = {:.6}, s = {:.6}, converged {}", s.steps, s.final_t, s.final_s, s.converged);
    if let Some(err) = s.radial_error_max {
        println!("  max error against the radial solution {err:.3e}");
    }
    if let Some(m) = &s.monitor {
        let tagged = m.checks.iter().map(|c| (c, "")).chain(m.diagnostics.iter().map(|c| (c, " [diagnostic]")));
        for ((name, check), tag) in tagged {
            println!(
                "  {:<16} {}{tag} (worst margin {:.3e}, tol {:.3e})",
                name,
                if check.passed { "pass" } else { "FAIL" },
                check.worst_margin,
                check.tolerance_at_worst
            );
        }
        if let Some(r) = &m.limit_radius {
            println!("  r_inf = {:.6} in [{:.6}, {:.6}]", r.r_inf, r.lower, r.upper);
        }
    }
    if let Some(err) = &s.error {
        eprintln!("error: {err}");
    }
    println!("  status {:?}, artifacts in {}", outcome.status, outcome.output_dir.display());
    Ok(outcome.status)
}

fn study(path: &Path, levels: usize) -> Result<RunStatus, RunStatus> {
    let exp = load(path)?;
    let report = convergence_study(&exp, levels).map_err(|e| {
        eprintln!("error: {e}");
        e.status()
    })?;
    println!("study {} against {} reference", report.name, report.reference);
    for l in &report.levels {
        let err = l.error.map_or("-".to_string(), |e| format!("{e:.4e}"));
        println!("  {:>4} x {:<4} h = {:.5}  steps {:>8}  error {err}", l.radial_nodes, l.angular_nodes, l.h, l.steps);
    }
    let orders: Vec<String> = report.orders.iter().map(|o| format!("{o:.3}")).collect();
    println!("  orders [{}], observed order {:.3}", orders.join(", "), report.observed_order);
    println!("  written to {}", exp.output_dir.join("study.json").display());
    Ok(report.status())
}

fn check(path: &Path) -> RunStatus {
    let out = check_snapshot(path);
    println!("check {}", path.display());
    if let Some(base) = &out.baseline {
        println!("  baseline {}", base.display());
    }
    if let Some(m) = &out.monitor {
        for (name, c) in &m.checks {
            println!("  {:<16} {} (margin {:.3e}, tol {:.3e})", name, if c.passed { "pass" } else { "FAIL" }, c.worst_margin, c.tolerance_at_worst);
        }
    }
    for v in &out.violations {
        println!("  violation {} at step {}: margin {:.3e}, nodes {:?}", v.check, v.step, v.margin, v.nodes);
    }
    if let Some(err) = &out.error {
        eprintln!("error: {err}");
    }
    println!("  status {:?}", out.status);
    out.status
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match cli.command {
        Command::Run { config } => run(&config).unwrap_or_else(|s| s),
        Command::Study { config, levels } => study(&config, levels).unwrap_or_else(|s| s),
        Command::Check { snapshot } => check(&snapshot),
    };
    ExitCode::from(status.exit_code() as u8)
}
