use std::fs;
use std::path::{Path, PathBuf};

use imcf::runner::output::{read_snapshot, snapshot_name};
use imcf::runner::{check_snapshot, convergence_study, run_experiment, run_from_config, RunConfig, RunStatus};
use imcf::Error;

fn config(dir: &Path, body: &str) -> String {
    format!("{body}\n[output]\ndirectory = {:?}\nsnapshot_stride = 20\n", dir.to_str().unwrap())
}

const DISK: &str = r#"
[domain]
dimension = 2
radius = 1.0
radial_nodes = 8
angular_nodes = 8

[flow]
alpha = -1.0
horizon = 0.05

[initial]
preset = "constant"
u0 = 1.0
"#;

const BUMP: &str = r#"
[domain]
dimension = 2
radius = 1.0
radial_nodes = 8
angular_nodes = 8

[flow]
alpha = -0.5
horizon = 0.01

[initial]
preset = "bump"
r0 = 1.0
epsilon = 0.05
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn exit_codes() {
    let codes: Vec<i32> = [
        RunStatus::Ok,
        RunStatus::ConfigError,
        RunStatus::Inadmissible,
        RunStatus::FlowFailure,
        RunStatus::EstimateViolation,
    ]
    .iter()
    .map(|s| s.exit_code())
    .collect();
    assert_eq!(codes, [0, 2, 3, 4, 5]);
}

#[test]
fn constant_run_writes_hashed_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let path = write_config(tmp.path(), "disk.toml", &config(&out, DISK));
    let outcome = run_from_config(&path).unwrap();
    assert_eq!(outcome.status, RunStatus::Ok, "{:?}", outcome.summary.error);
    assert!(outcome.summary.radial_error_max.unwrap() < 1e-6);
    assert!(outcome.summary.reached_horizon);

    let hash = RunConfig::load(&path).unwrap().hash();
    assert_eq!(first_line(&out.join("series.csv")), format!("# config_hash={hash}"));
    for json in ["summary.json", "violations.json"] {
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join(json)).unwrap()).unwrap();
        assert_eq!(v["config_hash"], hash.as_str());
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["exit_code"], 0);
    assert_eq!(summary["status"], "ok");

    let last = outcome.summary.steps;
    let (meta, phi) = read_snapshot(&out.join("snapshots").join(snapshot_name(last))).unwrap();
    assert_eq!(meta.config_hash, hash);
    assert_eq!(meta.step, last);
    assert_eq!(phi, outcome.final_field.unwrap().phi);
    assert!(out.join("snapshots").join(snapshot_name(0)).exists());
}

#[test]
fn runs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let series: Vec<String> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = tmp.path().join(name);
            let path = write_config(tmp.path(), &format!("{name}.toml"), &config(&out, BUMP));
            let outcome = run_from_config(&path).unwrap();
            assert_eq!(outcome.status, RunStatus::Ok, "{:?}", outcome.summary.error);
            let text = fs::read_to_string(out.join("series.csv")).unwrap();
            // The hash covers the output directory, which differs.
            text.split_once('\n').unwrap().1.to_string()
        })
        .collect();
    assert_eq!(series[0], series[1]);
}

#[test]
fn steep_table_is_inadmissible() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let values: Vec<String> = (0..11).map(|i| format!("{}", 2.0 * i as f64 / 10.0)).collect();
    let text = format!(
        "[domain]\ndimension = 1\nradius = 1.0\nradial_nodes = 11\n\n[flow]\nalpha = -1.0\nhorizon = 0.1\n\n\
         [initial]\npreset = \"table\"\nvalues = [{}]\n",
        values.join(", ")
    );
    let path = write_config(tmp.path(), "steep.toml", &config(&out, &text));
    let outcome = run_from_config(&path).unwrap();
    assert_eq!(outcome.status, RunStatus::Inadmissible);
    assert_eq!(outcome.exit_code(), 3);
    let report = outcome.summary.initial_admissibility.unwrap();
    assert!(!report.spacelike_violations.is_empty());
    assert!(out.join("summary.json").exists());
}

#[test]
fn out_of_range_scale_constant_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let text = format!("{BUMP}\n[rescale]\nc = 3.0\n");
    let path = write_config(tmp.path(), "c.toml", &config(&out, &text));
    let outcome = run_from_config(&path).unwrap();
    assert_eq!(outcome.exit_code(), 2);
    assert!(outcome.summary.error.unwrap().contains("rescale.c"));
}

#[test]
fn positive_alpha_never_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let text = DISK.replace("alpha = -1.0", "alpha = 0.5");
    let path = write_config(tmp.path(), "pos.toml", &config(&out, &text));
    match run_from_config(&path) {
        Err(Error::Config { field, .. }) => assert_eq!(field, "flow.alpha"),
        other => panic!("unexpected {other:?}"),
    }
    assert!(!out.exists());
}

#[test]
fn check_reaudits_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let path = write_config(tmp.path(), "bump.toml", &config(&out, BUMP));
    let outcome = run_from_config(&path).unwrap();
    assert_eq!(outcome.status, RunStatus::Ok);
    let snaps = out.join("snapshots");
    let last = snaps.join(snapshot_name(outcome.summary.steps));

    let audit = check_snapshot(&last);
    assert_eq!(audit.status, RunStatus::Ok, "{:?}", audit.error);
    assert_eq!(audit.baseline, Some(snaps.join(snapshot_name(0))));
    assert!(audit.monitor.unwrap().passed);

    // Shift the whole slice below the initial envelope; derivatives are unchanged.
    let text = fs::read_to_string(&last).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    for line in lines.iter_mut().filter(|l| !l.starts_with('#') && !l.starts_with("node")) {
        let mut cols: Vec<String> = line.split(',').map(String::from).collect();
        let phi: f64 = cols[5].parse().unwrap();
        cols[5] = format!("{:e}", phi - 0.5);
        *line = cols.join(",");
    }
    let tampered = snaps.join("step_999999.csv");
    fs::write(&tampered, lines.join("\n")).unwrap();
    let audit = check_snapshot(&tampered);
    assert_eq!(audit.status, RunStatus::EstimateViolation);
    assert!(audit.violations.iter().any(|v| v.check == "c0"), "{:?}", audit.violations);

    // A single spike breaks mean convexity.
    let row = lines.iter().position(|l| l.starts_with("20,")).unwrap();
    let mut cols: Vec<String> = lines[row].split(',').map(String::from).collect();
    let phi: f64 = cols[5].parse().unwrap();
    cols[5] = format!("{:e}", phi + 5.0);
    lines[row] = cols.join(",");
    fs::write(&tampered, lines.join("\n")).unwrap();
    assert_eq!(check_snapshot(&tampered).status, RunStatus::Inadmissible);

    fs::write(&tampered, "# step=3\nnode,phi\n0,1\n").unwrap();
    assert_eq!(check_snapshot(&tampered).exit_code, 2);
    assert_eq!(check_snapshot(&snaps.join("missing.csv")).exit_code, 2);
}

#[test]
fn study_needs_three_levels() {
    let tmp = tempfile::tempdir().unwrap();
    let exp = RunConfig::from_toml(&config(tmp.path(), DISK))
        .unwrap()
        .resolve(tmp.path(), "s")
        .unwrap();
    let err = convergence_study(&exp, 2).unwrap_err();
    assert_eq!(err.status(), RunStatus::ConfigError);
}

#[test]
fn study_on_a_segment_reports_order() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "[domain]\ndimension = 1\nradius = 1.0\nradial_nodes = 65\n\n[flow]\nalpha = -1.0\nhorizon = 0.5\n\n\
                [initial]\npreset = \"bump\"\nr0 = 1.0\nepsilon = 0.05\n";
    let exp = RunConfig::from_toml(&config(tmp.path(), text))
        .unwrap()
        .resolve(tmp.path(), "seg")
        .unwrap();
    let report = convergence_study(&exp, 3).unwrap();
    let nodes: Vec<usize> = report.levels.iter().map(|l| l.radial_nodes).collect();
    assert_eq!(nodes, [17, 33, 65]);
    assert_eq!(report.reference, "richardson");
    assert!(report.observed_order > 1.9, "{report:?}");
    assert!(tmp.path().join("study.json").exists());
    assert!(tmp.path().join("level_0").join("summary.json").exists());
    // The direct run of the finest level matches the study's last level.
    let direct = run_experiment(&exp);
    let mean = {
        let grid = imcf::domain::build_grid(exp.spec).unwrap();
        let phi = direct.final_field.unwrap().phi;
        grid.integrate(&phi) / grid.total_weight()
    };
    assert_eq!(mean, report.levels[2].mean_phi);
}

#[test]
fn bump_profile_is_second_order_in_h() {
    let tmp = tempfile::tempdir().unwrap();
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut exp = RunConfig::load(&configs.join("bump_study.toml"))
        .unwrap()
        .resolve(&configs, "bump_study")
        .unwrap();
    exp.output_dir = tmp.path().to_path_buf();
    let report = convergence_study(&exp, 3).unwrap();
    assert_eq!(report.status(), RunStatus::Ok);
    assert!(report.observed_order >= 1.9, "{report:?}");
}

#[test]
fn bundled_configs_resolve() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(&configs).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let name = path.file_stem().unwrap().to_str().unwrap();
            RunConfig::load(&path)
                .and_then(|c| c.resolve(&configs, name))
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 7);
}
