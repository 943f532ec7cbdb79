use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

const SINGLE_NODE: &str = r#"{
  "kernel": { "n": 3, "alpha": 2.0, "epsilon": 0.5 },
  "geometry": { "kind": "point_list", "points": [[0.0, 0.0, 0.0]] },
  "region": { "kind": "indices", "indices": [0] },
  "source": { "kind": "point_masses", "masses": [ { "point": [1.0, 0.0, 0.0], "mass": 1.0 } ] }
}"#;

const CLOUD: &str = r#"{
  "kernel": { "n": 3, "alpha": 1.5, "epsilon": "auto" },
  "geometry": { "kind": "random_cloud", "count": 40, "min": [0.0, 0.0, 0.0], "max": [1.0, 1.0, 1.0] },
  "region": { "kind": "box", "min": [0.0, 0.0, 0.0], "max": [0.5, 1.0, 1.0] },
  "source": { "kind": "point_masses", "masses": [ { "point": [0.9, 0.5, 0.5], "mass": 1.0 } ] },
  "run": { "probes": 6, "battery_size": 6, "exhaustion_stages": 3 },
  "seed": 11
}"#;

const ON_REGION: &str = r#"{
  "kernel": { "n": 3, "alpha": 1.5, "epsilon": "auto" },
  "geometry": { "kind": "random_cloud", "count": 50, "min": [0.0, 0.0, 0.0], "max": [1.0, 1.0, 1.0] },
  "region": { "kind": "box", "min": [0.0, 0.0, 0.0], "max": [0.5, 1.0, 1.0] },
  "source": { "kind": "uniform_on_region", "region": { "kind": "box", "min": [0.0, 0.0, 0.0], "max": [0.4, 1.0, 1.0] }, "total_mass": 2.0 },
  "run": { "probes": 6, "battery_size": 6, "exhaustion_stages": 3 },
  "seed": 5
}"#;

const BALL: &str = r#"{
  "kernel": { "n": 3, "alpha": 2.0, "epsilon": "auto" },
  "geometry": { "kind": "ball_shell", "center": [0.0, 0.0, 0.0], "radius": 1.0, "count": 60 },
  "region": { "kind": "ball", "center": [0.0, 0.0, 0.0], "radius": 1.0 },
  "source": { "kind": "point_masses", "masses": [ { "point": [2.0, 0.0, 0.0], "mass": 1.0 } ] },
  "run": { "levels": 3 }
}"#;

struct Run {
    code: i32,
    out: PathBuf,
    _dir: TempDir,
}

impl Run {
    fn report(&self) -> Value {
        serde_json::from_str(&fs::read_to_string(self.out.join("report.json")).unwrap()).unwrap()
    }
}

fn run(config: &str, args: &[&str]) -> Run {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("scenario.json");
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_balayage"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    Run {
        code: status.code().unwrap(),
        out,
        _dir: dir,
    }
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let col = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[col].parse().unwrap()).collect()
}

#[test]
fn single_node_sweep_is_the_kernel_ratio() {
    let r = run(SINGLE_NODE, &["balayage"]);
    assert_eq!(r.code, 0);
    let swept = csv_column(&r.out.join("nodes.csv"), "swept");
    let eps: f64 = 0.5;
    let expected = (1.0 + eps * eps).powf(-0.5) / eps.recip();
    assert!((swept[0] - expected).abs() <= 1e-12, "{} vs {expected}", swept[0]);
    assert_eq!(swept[1], 0.0);
}

#[test]
fn report_records_config_and_version() {
    let r = run(SINGLE_NODE, &["equilibrium"]);
    assert_eq!(r.code, 0);
    let rep = r.report();
    assert_eq!(rep["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(rep["command"], "equilibrium");
    assert_eq!(rep["status"], "pass");
    assert_eq!(rep["config"]["kernel"]["epsilon"], 0.5);
    assert!(rep["config"]["tolerances"]["potential_gap"].is_number());
    assert!(rep["checks"].as_array().is_some_and(|c| !c.is_empty()));
}

#[test]
fn malformed_configs_exit_2() {
    assert_eq!(run("{ not json", &["balayage"]).code, 2);
    let unknown = SINGLE_NODE.replacen("\"kernel\"", "\"kernal\"", 1);
    assert_eq!(run(&unknown, &["balayage"]).code, 2);
    let bad_alpha = SINGLE_NODE.replacen("\"alpha\": 2.0", "\"alpha\": 3.5", 1);
    assert_eq!(run(&bad_alpha, &["balayage"]).code, 2);
}

#[test]
fn verify_passes_and_perturbation_fails() {
    let ok = run(CLOUD, &["verify"]);
    assert_eq!(ok.code, 0, "{}", ok.report()["checks"]);
    let bad = run(CLOUD, &["verify", "--perturb", "1.05"]);
    assert_eq!(bad.code, 4);
    assert_eq!(bad.report()["status"], "fail");
}

#[test]
fn source_already_on_the_region_verifies() {
    let r = run(ON_REGION, &["verify"]);
    assert_eq!(r.code, 0, "{}", r.report()["checks"]);
    let omega = csv_column(&r.out.join("nodes.csv"), "omega");
    let swept = csv_column(&r.out.join("nodes.csv"), "swept");
    for (a, b) in omega.iter().zip(&swept) {
        assert!((a - b).abs() <= 1e-7);
    }
}

/// On a regular lattice the kernel matrix is not dominated, so the symmetry
/// relation only holds on the active set and the battery rejects the sweep.
#[test]
fn lattice_without_domination_fails_symmetry_only() {
    let cfg = ON_REGION.replacen(
        r#""kind": "random_cloud", "count": 50,"#,
        r#""kind": "grid", "counts": [4, 4, 4],"#,
        1,
    );
    let r = run(&cfg, &["verify"]);
    assert_eq!(r.code, 4);
    let failed: Vec<String> = r.report()["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(failed, vec!["symmetry.max_residual"]);
}

#[test]
fn unreachable_tolerance_exits_3_with_partial_report() {
    let r = run(CLOUD, &["balayage", "--tol", "1e-300"]);
    assert_eq!(r.code, 3);
    let rep = r.report();
    assert_eq!(rep["status"], "convergence_failure");
    assert!(rep["error"]["message"].is_string());
}

#[test]
fn oracle_compare_on_the_ball() {
    let r = run(BALL, &["oracle-compare"]);
    assert_eq!(r.code, 0, "{}", r.report()["checks"]);
    let nodes = csv_column(&r.out.join("series_refinement.csv"), "nodes");
    assert_eq!(nodes, vec![61.0, 241.0, 961.0]);
}

#[test]
fn oracle_compare_needs_the_newtonian_kernel() {
    let cfg = BALL.replacen("\"alpha\": 2.0", "\"alpha\": 1.5", 1);
    assert_eq!(run(&cfg, &["oracle-compare"]).code, 2);
    assert_eq!(run(CLOUD, &["oracle-compare"]).code, 2);
}
