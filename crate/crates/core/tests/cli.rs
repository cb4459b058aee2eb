use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn gharnack(args: &[&str], out: &Path) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_gharnack"))
        .arg("run")
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .status()
        .expect("binary runs");
    status.code().expect("exit code")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let p = dir.path().join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

fn assert_tagged(v: &Value, path: &str) {
    match v {
        Value::Number(_) => panic!("untagged number at {path}"),
        Value::Array(items) => items.iter().enumerate().for_each(|(i, x)| assert_tagged(x, &format!("{path}[{i}]"))),
        Value::Object(m) if m.contains_key("tag") => {
            let t = m["tag"].as_str().unwrap();
            assert!(["exact", "fitted", "mc"].contains(&t), "{path}: tag {t}");
        }
        Value::Object(m) => {
            let has_se = m.contains_key("se");
            for (k, x) in m {
                if !(has_se && ["value", "mean", "se", "n"].contains(&k.as_str())) {
                    assert_tagged(x, &format!("{path}.{k}"));
                }
            }
        }
        _ => {}
    }
}

#[test]
fn semigroup_report_has_contract_keys_and_tags() {
    let out = TempDir::new().unwrap();
    let cfg = config("perturbed_oscillator.json");
    assert_eq!(gharnack(&["semigroup", cfg.to_str().unwrap(), "--paths", "2000"], out.path()), 0);
    let r = report(out.path());
    let mut keys: Vec<&str> = r.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["command", "config", "fitted_constants", "pass", "results", "timestamp", "version"]);
    assert_eq!(r["command"], "semigroup");
    assert_eq!(r["pass"], true);
    assert_eq!(r["config"]["run"]["n_paths"], 2000);
    assert!(r["version"].as_str().unwrap().starts_with('v'));
    let est = &r["results"]["estimate"];
    assert!(est["se"].as_f64().unwrap() > 0.0);
    assert_eq!(est["per_control"].as_array().unwrap().len(), 3);
    assert_tagged(&r["results"], "results");
}

#[test]
fn same_seed_gives_identical_reports_apart_from_timestamp() {
    let cfg = config("perturbed_oscillator.json");
    let strip = |dir: &Path| {
        let mut r = report(dir);
        r.as_object_mut().unwrap().remove("timestamp");
        serde_json::to_string(&r).unwrap()
    };
    let (a, b, c) = (TempDir::new().unwrap(), TempDir::new().unwrap(), TempDir::new().unwrap());
    for (dir, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        assert_eq!(gharnack(&["girsanov-check", "--config", cfg.to_str().unwrap(), "--paths", "500", "--seed", seed], dir.path()), 0);
    }
    assert_eq!(strip(a.path()), strip(b.path()));
    assert_ne!(strip(a.path()), strip(c.path()));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let bad_json = write_config(&dir, "{\"params\": ");
    assert_eq!(gharnack(&["hjb", bad_json.to_str().unwrap()], dir.path()), 2);
    assert!(!dir.path().join("report.json").exists());

    let missing = dir.path().join("missing.json");
    assert_eq!(gharnack(&["hjb", missing.to_str().unwrap()], dir.path()), 2);

    let inverted = write_config(&dir, r#"{"params": {"sigma_lower": 2.0, "sigma_upper": 1.0}}"#);
    assert_eq!(gharnack(&["semigroup", inverted.to_str().unwrap()], dir.path()), 2);

    let unknown = write_config(&dir, r#"{"params": {"sigma_lower": 1.0, "sigma_upper": 2.0}, "sytem": {}}"#);
    assert_eq!(gharnack(&["semigroup", unknown.to_str().unwrap()], dir.path()), 2);

    let coarse = write_config(&dir, r#"{"params": {"sigma_lower": 1.0, "sigma_upper": 2.0}, "grid": {"horizon": 1.0, "n_steps": 2}}"#);
    assert_eq!(gharnack(&["semigroup", coarse.to_str().unwrap()], dir.path()), 2);
}

#[test]
fn numerical_failures_exit_with_one_and_are_recorded() {
    let dir = TempDir::new().unwrap();
    let cfl = write_config(
        &dir,
        r#"{"params": {"sigma_lower": 1.0, "sigma_upper": 2.0},
            "estimator": {"hjb": {"half_width": 6.0, "nx": 81, "ny": 81, "n_steps": 5}}}"#,
    );
    assert_eq!(gharnack(&["hjb", cfl.to_str().unwrap()], dir.path()), 1);
    let r = report(dir.path());
    assert_eq!(r["pass"], false);
    assert!(r["results"]["error"].as_str().unwrap().contains("CFL"));

    let diverging = write_config(
        &dir,
        r#"{"params": {"sigma_lower": 1.0, "sigma_upper": 2.0},
            "system": {"b1_bar": "x"},
            "run": {"n_paths": 200},
            "weak_solution": {"epsilon": 1.5}}"#,
    );
    assert_eq!(gharnack(&["weak-solution", diverging.to_str().unwrap()], dir.path()), 1);
    let r = report(dir.path());
    assert_eq!(r["results"]["weak_solution"], false);
    assert_eq!(r["results"]["hypothesis"]["finite"], false);
}

#[test]
fn csv_dumps() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        r#"{"params": {"sigma_lower": 1.0, "sigma_upper": 2.0},
            "grid": {"horizon": 0.5, "n_steps": 50},
            "run": {"n_paths": 100},
            "simulate": {"dump_paths": 3, "policy": {"alternating": {"first": 2.0, "second": 1.0, "period": 5}}},
            "estimator": {"hjb": {"half_width": 4.0, "nx": 41, "ny": 41}}}"#,
    );
    assert_eq!(gharnack(&["simulate", cfg.to_str().unwrap(), "--csv"], dir.path()), 0);
    let paths = std::fs::read_to_string(dir.path().join("paths.csv")).unwrap();
    let lines: Vec<&str> = paths.lines().collect();
    assert_eq!(lines[0], "path,step,t,x,y,theta,b,qv,bprime,qvprime");
    assert_eq!(lines.len(), 1 + 3 * 51);
    assert_eq!(report(dir.path())["results"]["band_violations"]["value"], 0);

    assert_eq!(gharnack(&["hjb", cfg.to_str().unwrap(), "--csv"], dir.path()), 0);
    let grid = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 41 * 41);
    assert!(grid.starts_with("x,y,u0,control0\n"));
}

#[test]
fn harnack_acceptance_grid_exits_zero() {
    let out = TempDir::new().unwrap();
    let cfg = config("harnack_grid.json");
    assert_eq!(gharnack(&["harnack", cfg.to_str().unwrap()], out.path()), 0);
    let r = report(out.path());
    assert_eq!(r["results"]["points"].as_array().unwrap().len(), 72);
    assert!(r["fitted_constants"]["harnack_c"]["value"].as_f64().unwrap().is_finite());
    assert_eq!(r["fitted_constants"]["harnack_c"]["tag"], "fitted");
}
