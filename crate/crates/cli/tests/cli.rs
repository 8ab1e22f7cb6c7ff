use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use sheaftrack_cli::output::parse_key_values;
use sheaftrack_cli::{
    bundled, check, emit_plots, load_config, load_scenario, normalize, run, simulate, sweep,
    Overrides, ScenarioConfig, Table,
};

fn bundled_config(name: &str) -> ScenarioConfig {
    ScenarioConfig::parse(bundled::get(name).unwrap()).unwrap()
}

fn quick(name: &str, horizon: f64) -> ScenarioConfig {
    let mut c = bundled_config(name);
    Overrides {
        horizon: Some(horizon),
        ..Overrides::default()
    }
    .apply(&mut c);
    c
}

fn summary(dir: &Path) -> Vec<(String, String)> {
    parse_key_values(&std::fs::read_to_string(dir.join("summary.txt")).unwrap()).unwrap()
}

fn value<'a>(kv: &'a [(String, String)], key: &str) -> &'a str {
    &kv.iter()
        .find(|(k, _)| k == key)
        .unwrap_or_else(|| panic!("no {key}"))
        .1
}

#[test]
fn normalization_is_idempotent_for_bundled_scenarios() {
    for name in bundled::names() {
        let text = bundled::get(name).unwrap();
        let once = normalize(text).unwrap();
        assert_eq!(normalize(&once).unwrap(), once, "{name}");
        assert_eq!(
            ScenarioConfig::parse(&once).unwrap(),
            ScenarioConfig::parse(text).unwrap()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn normalization_survives_edited_parameters(
        k1 in 0.1f64..100.0,
        h in 1e-4f64..0.1,
        seed in 0..=i64::MAX as u64,
        theta in -3.0f64..3.0,
    ) {
        let mut c = bundled_config("linear_decay");
        c.gains.k1 = k1;
        c.integration.h = h;
        c.integration.seed = seed;
        c.sheaf.edges[0].maps[0] = sheaftrack_cli::config::MapConfig::Rotation(theta);
        let once = c.to_toml().unwrap();
        prop_assert_eq!(ScenarioConfig::parse(&once).unwrap(), c);
        prop_assert_eq!(normalize(&once).unwrap(), once);
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let text = bundled::get("p3_midpoint")
        .unwrap()
        .replace("k1 = 1.0", "k1 = 1.0\nk2 = 3.0");
    let e = ScenarioConfig::parse(&text).unwrap_err();
    assert!(format!("{e:#}").contains("unknown field `k2`"), "{e:#}");
}

#[test]
fn parse_errors_carry_line_context() {
    let text = bundled::get("tetrahedron_formation")
        .unwrap()
        .replace("[-2.0, 1.0, 0.8, 1.2]", "[-2.0, 1.0, 0.8]");
    let e = format!("{:#}", ScenarioConfig::parse(&text).unwrap_err());
    assert!(e.contains("line") && e.contains("length 4"), "{e}");
}

#[test]
fn ragged_matrix_row_names_the_edge() {
    let text = bundled::get("linear_decay")
        .unwrap()
        .replace("[[1.0, 0.5], [0.0, 1.0]]", "[[1.0, 0.5], [0.0]]");
    let e = load_scenario(&ScenarioConfig::parse(&text).unwrap()).unwrap_err();
    let msg = format!("{e:#}");
    assert!(
        msg.contains("edge (0, 3)") && msg.contains("row 1"),
        "{msg}"
    );
}

#[test]
fn mismatched_edge_stalks_name_the_edge() {
    let text = bundled::get("usv_uav_feasible").unwrap().replace(
        "dim = 2\nmaps = [\"identity\", { projection = [0, 1] }]",
        "dim = 2\nmaps = [\"identity\", \"identity\"]",
    );
    let msg = format!(
        "{:#}",
        load_scenario(&ScenarioConfig::parse(&text).unwrap()).unwrap_err()
    );
    assert!(msg.contains("edge (1, 3)"), "{msg}");
}

#[test]
fn understated_disturbance_bound_is_rejected() {
    let text = bundled::get("disturbed_ultimate_bound")
        .unwrap()
        .replace("disturbance_bound = 0.15", "disturbance_bound = 0.05");
    let msg = format!(
        "{:#}",
        load_scenario(&ScenarioConfig::parse(&text).unwrap()).unwrap_err()
    );
    assert!(msg.contains("below the disturbance sup-norm"), "{msg}");
}

#[test]
fn p3_bundle_has_scalar_h_and_reaches_the_midpoint() {
    let loaded = load_scenario(&bundled_config("p3_midpoint")).unwrap();
    assert_eq!(loaded.scenario.problem.h().as_slice(), &[2.0]);
    let dir = tempfile::tempdir().unwrap();
    let (s, log) = run(&loaded, dir.path()).unwrap();
    assert!((log.q.last().unwrap()[0] - 2.0).abs() <= 1e-6);
    assert!(s.ok() && s.violations() == 0);
    assert_eq!(value(&summary(dir.path()), "violations"), "0");
}

#[test]
fn aerial_agent_over_planar_targets_loads_but_is_infeasible() {
    let loaded = load_scenario(&bundled_config("uav_usv_infeasible")).unwrap();
    let report = check(&loaded);
    assert!(!report.feasible);
    assert_eq!(report.obstruction_dimension, 1);
    let dir = tempfile::tempdir().unwrap();
    let msg = format!("{:#}", run(&loaded, dir.path()).unwrap_err());
    assert!(msg.contains("dimension 1"), "{msg}");
}

#[test]
fn trajectory_table_layout() {
    let loaded = load_scenario(&quick("usv_uav_feasible", 1.0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (_, log) = run(&loaded, dir.path()).unwrap();
    let table = Table::read_csv(&dir.path().join("trajectory.csv")).unwrap();
    let pr = &loaded.scenario.problem;
    let (nq, np) = (pr.agent_layout().total(), pr.target_layout().total());
    assert_eq!(table.header.len(), 1 + 4 * nq + np + 2);
    assert_eq!(&table.header[..3], &["t", "q_v0_0", "q_v0_1"]);
    assert_eq!(table.header[1 + nq], "qstar_v0_0");
    assert_eq!(table.header[1 + 4 * nq], "p_v3_0");
    assert_eq!(table.len(), log.len());
    assert_eq!(table, Table::from_log(pr, &log).unwrap());
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let loaded = load_scenario(&quick("usv_uav_feasible", 2.0)).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (sa, _) = run(&loaded, a.path()).unwrap();
    run(&loaded, b.path()).unwrap();
    let files: Vec<_> = sa.outputs.iter().filter_map(|p| p.file_name()).collect();
    assert!(files.iter().any(|f| *f == "trajectories_3d.svg"));
    for f in files {
        if f == "summary.txt" {
            continue;
        }
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f:?}"
        );
    }
}

#[test]
fn plots_rerendered_from_the_table_match() {
    let loaded = load_scenario(&bundled_config("linear_decay")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run(&loaded, dir.path()).unwrap();
    let again = tempfile::tempdir().unwrap();
    let table = Table::read_csv(&dir.path().join("trajectory.csv")).unwrap();
    for p in emit_plots(&table, again.path()).unwrap() {
        let name = p.file_name().unwrap();
        assert_eq!(
            std::fs::read(&p).unwrap(),
            std::fs::read(dir.path().join(name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn empty_horizon_is_rejected_before_rendering() {
    let table = Table {
        header: ["t", "q_v1_0", "p_v0_0", "e_norm", "bound"]
            .map(String::from)
            .to_vec(),
        rows: vec![vec![0.0, 1.0, 2.0, 1.0, 1.0]],
    };
    let dir = tempfile::tempdir().unwrap();
    assert!(emit_plots(&table, dir.path()).is_err());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn linear_error_stays_strictly_under_the_bound() {
    let log = simulate(&load_scenario(&bundled_config("linear_decay")).unwrap()).unwrap();
    assert_eq!(log.e_norm[0], log.bound[0]);
    for k in 1..log.len() {
        assert!(log.e_norm[k] < log.bound[k], "t = {}", log.time[k]);
    }
}

#[test]
fn seed_controls_random_initial_agents() {
    let with_seed = |s: u64| {
        let mut c = bundled_config("tetrahedron_formation");
        Overrides {
            seed: Some(s),
            ..Overrides::default()
        }
        .apply(&mut c);
        load_scenario(&c).unwrap().scenario.q0
    };
    assert_eq!(with_seed(3), with_seed(3));
    assert_ne!(with_seed(3), with_seed(4));
    assert!(with_seed(3).iter().all(|x| (-10.0..10.0).contains(x)));
}

#[test]
fn sweep_writes_isolated_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let configs = vec![
        quick("p3_midpoint", 1.0),
        quick("linear_decay", 1.0),
        quick("uav_usv_infeasible", 1.0),
    ];
    let results = sweep(configs, Overrides::default(), dir.path());
    assert_eq!(results.len(), 3);
    for (name, r) in &results {
        match name.as_str() {
            "uav_usv_infeasible" => assert!(r.is_err()),
            _ => {
                assert!(r.as_ref().unwrap().ok());
                assert_eq!(value(&summary(&dir.path().join(name)), "name"), name);
            }
        }
    }
}

#[test]
fn summary_reports_bound_constants() {
    let loaded = load_scenario(&bundled_config("disturbed_ultimate_bound")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (s, _) = run(&loaded, dir.path()).unwrap();
    let kv = summary(dir.path());
    for key in [
        "lambda_min_h",
        "sigma_max_b",
        "mu",
        "k_min",
        "omega_bar",
        "radius_u",
        "radius_s",
        "gain_condition",
    ] {
        assert!(kv.iter().any(|(k, _)| k == key), "{key}");
    }
    assert_eq!(value(&kv, "mu").parse::<f64>().unwrap(), s.constants().mu);
    assert_eq!(value(&kv, "relative_h0_dimension"), "0");
    assert!(s.constants().omega_bar > 0.0);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sheaftrack"))
}

#[test]
fn binary_exit_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p3");
    let ok = bin()
        .args([
            "run",
            "--config",
            "p3_midpoint",
            "--no-plots",
            "--horizon",
            "2",
        ])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        ok.status.success(),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    assert!(out.join("trajectory.csv").exists() && !out.join("error_bound.svg").exists());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("horizon=2"));

    let huge = bin()
        .args([
            "run",
            "--config",
            "p3_midpoint",
            "--seed",
            "18446744073709551615",
        ])
        .output()
        .unwrap();
    assert_eq!(huge.status.code(), Some(2));

    let infeasible = bin()
        .args(["check", "--config", "uav_usv_infeasible"])
        .output()
        .unwrap();
    assert_eq!(infeasible.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&infeasible.stdout).contains("relative_h0_dimension=1"));

    let blocked = bin()
        .args(["run", "--config", "uav_usv_infeasible", "--out"])
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(blocked.status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "name = \"bad\"\n[sheaf]\nvertices = [1]\nbogus = 1\n").unwrap();
    let parse = bin()
        .args(["check", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(parse.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&parse.stderr).contains("bogus"));

    let plot = bin().args(["plot", "--out"]).arg(&out).output().unwrap();
    assert!(plot.status.success());
    assert!(out.join("error_bound.svg").exists());
}

#[test]
fn load_config_accepts_paths_and_bundled_names() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    std::fs::write(&path, bundled::get("p3_midpoint").unwrap()).unwrap();
    assert_eq!(
        load_config(path.to_str().unwrap()).unwrap(),
        load_config("p3_midpoint").unwrap()
    );
    assert!(load_config("no_such_scenario").is_err());
}
