use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pbiharm"));
    cmd.env_remove("PBIHARM_NEWTON_TOL").env_remove("PBIHARM_STEP_COUNT");
    cmd
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn csv_rows(text: &str) -> Vec<(String, usize, f64, f64)> {
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn solve_constant_reproduces_closed_form() {
    let out = run(&["solve", "--config", example("constant.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table: Value = serde_json::from_slice(&out.stdout).unwrap();
    let plus = table["pairs_plus"].as_array().unwrap();
    assert_eq!(plus.len(), 4);
    for pair in plus {
        let k = pair["k"].as_u64().unwrap() as f64;
        let lambda = pair["lambda"].as_f64().unwrap();
        assert!((lambda / (k * std::f64::consts::PI).powi(4) - 1.0).abs() < 1e-6);
    }
    assert!(table["pairs_minus"].as_array().unwrap().is_empty());
    assert!(table["negative_reason"].is_string());
    assert_eq!(table["verify"]["passed"], Value::Bool(true));
}

#[test]
fn oracle_csv_matches_golden() {
    let out = run(&["oracle-p2", "--config", example("cosine.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let golden = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/oracle_cosine.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("sign,k,p,lambda"));
    let (got, want) = (csv_rows(&text), csv_rows(&golden));
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        assert_eq!((&g.0, g.1, g.2), (&w.0, w.1, w.2));
        assert!((g.3 / w.3 - 1.0).abs() < 1e-10, "{g:?} vs {w:?}");
    }
}

#[test]
fn solve_output_verifies_and_corruption_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let table_path = dir.path().join("table.json");
    let out = run(&[
        "solve",
        "--config",
        example("constant.cfg").to_str().unwrap(),
        "--out",
        table_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());

    let ok = run(&["verify", "--input", table_path.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0));

    let mut table: Value = serde_json::from_str(&std::fs::read_to_string(&table_path).unwrap()).unwrap();
    let lambda = table["pairs_plus"][1]["lambda"].as_f64().unwrap();
    table["pairs_plus"][1]["lambda"] = Value::from(1.1 * lambda);
    let bad_path = dir.path().join("corrupted_table.json");
    std::fs::write(&bad_path, serde_json::to_string(&table).unwrap()).unwrap();
    let bad = run(&["verify", "--input", bad_path.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&bad.stdout).unwrap();
    let failing: Vec<(&str, u64)> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == Value::Bool(false))
        .map(|c| (c["name"].as_str().unwrap(), c["k"].as_u64().unwrap_or(0)))
        .collect();
    assert!(failing.contains(&("residual", 2)), "{failing:?}");
    assert!(failing.contains(&("partition", 2)), "{failing:?}");
}

#[test]
fn same_config_and_seed_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "run.cfg",
        "p = 2.5\nk_max = 2\n\n[weight]\nkind = \"cosine\"\nf = 1\n",
    );
    let solve = |name: &str| {
        let path = dir.path().join(name);
        let out = run(&["solve", "--config", cfg.to_str().unwrap(), "--seed", "11", "--out", path.to_str().unwrap()]);
        assert!(matches!(out.status.code(), Some(0 | 1)));
        std::fs::read(path).unwrap()
    };
    let (a, b) = (solve("a.json"), solve("b.json"));
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let table: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(table["problem"]["verify"]["seed"], Value::from(11));
}

#[test]
fn errors_are_json_on_stderr() {
    let missing = run(&["solve", "--config", "/definitely/not/here.cfg"]);
    assert_eq!(missing.status.code(), Some(2));
    let rec: Value = serde_json::from_slice(&missing.stderr).unwrap();
    assert!(rec["error"].as_str().unwrap().contains("reading"));

    let dir = tempfile::tempdir().unwrap();
    let both = write_config(dir.path(), "both.cfg", "p = 2.0\np_grid = [2.0]\n[weight]\nkind = \"constant\"\nc = 1.0\n");
    let out = run(&["solve", "--config", both.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let rec: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(rec["error"].as_str().unwrap().contains("exactly one"));

    let neg = write_config(dir.path(), "neg.cfg", "p = 2.0\n[weight]\nkind = \"constant\"\nc = -1.0\n");
    assert_eq!(run(&["solve", "--config", neg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn environment_overrides_apply() {
    let out = bin()
        .args(["solve", "--config", example("constant.cfg").to_str().unwrap()])
        .env("PBIHARM_STEP_COUNT", "50")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let rec: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(rec["error"].as_str().unwrap().contains("step_count"));

    let out = bin()
        .args(["solve", "--config", example("constant.cfg").to_str().unwrap()])
        .env("PBIHARM_NEWTON_TOL", "1e-10")
        .output()
        .unwrap();
    let table: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(table["problem"]["shoot"]["newton_tol"].as_f64(), Some(1e-10));
}

#[test]
fn sweep_csv_follows_scaling_law() {
    let out = run(&["sweep-p", "--config", example("sweep_constant.cfg").to_str().unwrap(), "--csv"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 14);
    for r1 in rows.iter().filter(|r| r.1 == 1) {
        let r2 = rows.iter().find(|r| r.1 == 2 && r.2 == r1.2).unwrap();
        assert!((r2.3 / r1.3 / 2f64.powf(2.0 * r1.2) - 1.0).abs() < 1e-4, "p = {}", r1.2);
    }
}

#[test]
fn mu_curve_for_constant_weight() {
    let out = run(&["mu-curve", "--config", example("constant.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let rep: Value = serde_json::from_slice(&out.stdout).unwrap();
    let l1 = rep["lambda1"].as_f64().unwrap();
    assert!((l1 / std::f64::consts::PI.powi(4) - 1.0).abs() < 1e-2);
    for pt in rep["points"].as_array().unwrap() {
        let (l, mu) = (pt["lambda"].as_f64().unwrap(), pt["mu1"].as_f64().unwrap());
        assert!((mu - (l1 - l)).abs() < 1e-6 * l1, "{l}: {mu}");
    }
}

#[test]
fn subcommand_exponent_requirements() {
    let out = run(&["solve", "--config", example("sweep_constant.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["sweep-p", "--config", example("constant.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    for entry in std::fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            let out = run(&["oracle-p2", "--config", path.to_str().unwrap()]);
            assert_eq!(out.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
        }
    }
}
