use std::path::Path;
use std::process::Command;

use tm_cli::commands::{cluster_values, partial_report};
use tm_cli::{cmd_analyze, cmd_eigs, cmd_nondim, cmd_simulate, CliError, Config};
use tm_core::stability::{Classification, ConditionStatus};

const CDC42: &str = "
[dimensional]
k1 = 1.056831769e-8
k2 = 0.1056831769e-5
k3 = 946.2243938
k4 = 18.92448788
k5 = 0.1056831769e-2
k_neg5 = 0.3
b6 = 0.3170495307e-1
b_neg6 = 0.133
g0bar = 37848.97575
du = 2.5e-15
dv = 1e-8
d_cyt = 1e-8
cmax = 47311.21969
r = 1e-6
vol_over_area = 0.3333333333333333
v_init = 4.894264108e10
";

fn tm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tm"))
}

fn condition<'a>(report: &'a tm_core::stability::TuringReport, name: &str) -> &'a tm_core::stability::ConditionRecord {
    report.conditions.iter().find(|c| c.name == name).unwrap()
}

#[test]
fn analyze_baseline_is_turing_unstable() {
    let report = cmd_analyze(&Config::default()).unwrap();
    assert_eq!(report.classification, Classification::TuringUnstable);
    assert!((report.steady_state.u_star - 0.75779).abs() < 1e-4);
    assert!((report.d_critical.unwrap() - 101.0).abs() < 2.0);
    assert_eq!(report.cg, 3.0);
    assert_eq!(condition(&report, "cdt:2").status, ConditionStatus::Equality);
    assert_eq!(condition(&report, "cdt:6").status, ConditionStatus::Violated);
}

#[test]
fn analyze_equal_diffusion_is_stable() {
    let cfg = Config::parse("[parameters]\nd = 1.0\n").unwrap();
    let report = cmd_analyze(&cfg).unwrap();
    assert_eq!(report.classification, Classification::StableHomogeneous);
    assert!(report.unstable_degrees.is_empty());
}

#[test]
fn analyze_flags_slow_saturation() {
    // a2 ≤ a5 violates the first admissibility condition; the rest still runs
    let cfg = Config::parse("[parameters]\na2 = 0.4\n").unwrap();
    let report = cmd_analyze(&cfg).unwrap();
    assert_eq!(condition(&report, "cdt:1").status, ConditionStatus::Violated);
    assert_eq!(report.conditions.len(), 10);
}

#[test]
fn analyze_without_steady_state_reports_conditions() {
    let cfg = Config::parse("[parameters]\na3 = 1.0\n").unwrap();
    let err = cmd_analyze(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 4);
    let partial = partial_report(&cfg, &err).unwrap();
    assert_eq!(partial.conditions.len(), 10);
    assert!(partial.error.contains("saturation"));
}

#[test]
fn nondim_reports_instability_conditions() {
    let report = cmd_nondim(&Config::parse(CDC42).unwrap()).unwrap();
    let names: Vec<_> = report.instability_conditions.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["cdt:8", "cdt:d1", "cdt:d2"]);
    assert!((report.parameters.d - 4e6).abs() < 1e-3);
    assert!((report.cytosolic_diffusion_ratio - 4e6).abs() < 1e-3);
}

#[test]
fn nondim_equal_diffusion_gives_unit_ratio() {
    let cfg = Config::parse(&CDC42.replace("du = 2.5e-15", "du = 1e-8")).unwrap();
    let report = cmd_nondim(&cfg).unwrap();
    assert_eq!(report.parameters.d, 1.0);
    match cmd_analyze(&cfg) {
        Ok(r) => assert_ne!(r.classification, Classification::TuringUnstable),
        Err(e) => assert_eq!(e.exit_code(), 4),
    }
}

#[test]
fn nondim_needs_dimensional_section() {
    assert!(matches!(cmd_nondim(&Config::default()), Err(CliError::Config(_))));
    let err = Config::parse("[dimensional]\nk1 = 1.0\nk2 = 1.0\n").unwrap_err();
    assert!(err.to_string().contains("g0bar"));
}

#[test]
fn eigs_groups_spherical_harmonics() {
    let cfg = Config::parse("[mesh]\nlevel = 3\n").unwrap();
    let table = cmd_eigs(&cfg, 16, 0.05).unwrap();
    let mult: Vec<_> = table.clusters.iter().map(|c| c.multiplicity).collect();
    assert_eq!(mult, [1, 3, 5, 7]);
    for (c, l) in table.clusters.iter().zip(0..) {
        let exact = (l * (l + 1)) as f64;
        assert!((c.mean - exact).abs() <= 0.03 * exact.max(1.0) + 1e-8, "{l}: {}", c.mean);
    }
    assert!(table.clusters_csv().starts_with("cluster,mean,multiplicity,min,max\n"));
    assert_eq!(table.values_csv().lines().count(), 17);
    let single = cmd_eigs(&cfg, 1, 0.05).unwrap();
    assert_eq!(single.values.len(), 1);
    assert!(single.values[0].abs() < 1e-8);
}

#[test]
fn clusters_split_on_gaps() {
    let c = cluster_values(&[0.0, 1.0, 1.01, 5.0], 0.05);
    assert_eq!(c.len(), 3);
    assert_eq!((c[1].multiplicity, c[1].min, c[1].max), (2, 1.0, 1.01));
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn short(cfg: &mut Config) {
    cfg.run.t_end = 0.02;
    cfg.run.snapshot_interval = 0.01;
}

#[test]
fn simulate_writes_the_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = Config::preset("fig2").unwrap();
    short(&mut cfg);
    let outcome = cmd_simulate(&cfg, Some("fig2"), dir.path()).unwrap();
    assert_eq!(outcome.summary.steps, 20);
    assert!(outcome.summary.conservation_error < 1e-13);

    let manifest: serde_json::Value = serde_json::from_str(&read(&dir.path().join("manifest.json"))).unwrap();
    assert_eq!(manifest["status"], "completed");
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["preset"], "fig2");
    // the manifest alone reproduces the configuration
    let replay = Config::parse(manifest["config"].as_str().unwrap()).unwrap();
    assert_eq!(replay, cfg);
    for rel in manifest["outputs"].as_array().unwrap() {
        assert!(dir.path().join(rel.as_str().unwrap()).is_file(), "{rel}");
    }

    let vtk = read(&dir.path().join("snapshots/state_0000010.vtk"));
    assert!(vtk.contains("POINT_DATA 2562") && vtk.contains("SCALARS u double") && vtk.contains("SCALARS v double"));
    let csv = read(&dir.path().join("series.csv"));
    assert!(csv.starts_with("step,t,int_u,int_v,V,"));
    assert_eq!(csv.lines().count(), 22);
    let summary: serde_json::Value = serde_json::from_str(&read(&dir.path().join("summary.json"))).unwrap();
    assert_eq!(summary["pattern"]["classification"], "not_converged");
}

#[test]
fn preset_matches_expanded_config() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut preset = Config::preset("fig4-unstable").unwrap();
    short(&mut preset);
    let mut expanded = Config::parse(&preset.to_toml()).unwrap();
    expanded.output.dir = b.path().to_path_buf();
    cmd_simulate(&preset, Some("fig4-unstable"), a.path()).unwrap();
    cmd_simulate(&expanded, None, b.path()).unwrap();
    for rel in ["series.csv", "summary.json", "snapshots/state_0000000.vtk", "snapshots/state_0000020.vtk"] {
        assert_eq!(read(&a.path().join(rel)), read(&b.path().join(rel)), "{rel}");
    }
}

#[test]
fn failed_runs_keep_partial_output() {
    // a2 = 10 needs dt ≤ 4e-4; at dt = 0.05 the linearised step blows up
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = Config::preset("fig3-a2-half").unwrap();
    cfg.run.dt = 0.05;
    cfg.run.t_end = 5.0;
    cfg.run.snapshot_interval = 0.05;
    let err = match cmd_simulate(&cfg, None, dir.path()) {
        Err(e) => e,
        Ok(_) => panic!("expected a numerical failure"),
    };
    assert_eq!(err.exit_code(), 3);
    let manifest: serde_json::Value = serde_json::from_str(&read(&dir.path().join("manifest.json"))).unwrap();
    assert_eq!(manifest["status"], "failed");
    assert!(manifest["error"].is_string());
    assert!(dir.path().join("snapshots/state_0000000.vtk").is_file());
}

#[test]
fn binary_exit_codes() {
    let out = tm().args(["preset", "fig2"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(Config::parse(&text).unwrap(), Config::preset("fig2").unwrap());

    let out = tm().args(["analyze", "--preset", "fig4-stable"]).output().unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["parameters"]["d"], 100.0);

    assert_eq!(tm().args(["analyze", "--preset", "nope"]).status().unwrap().code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[parameters]\na3 = 1.0\n").unwrap();
    let out = tm().args(["analyze", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
    let partial: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(partial["conditions"].is_array());
    std::fs::write(&bad, "[run]\ndt = -1.0\n").unwrap();
    let code = tm().args(["simulate", "--out"]).arg(dir.path().join("r")).arg("--config").arg(&bad).status();
    assert_eq!(code.unwrap().code(), Some(2));
}
