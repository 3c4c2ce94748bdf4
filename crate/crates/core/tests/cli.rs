use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fracsym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracsym")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn solve_at_ball_center() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "solve.json", &format!(r#"{{"walk": {{"n_walks": 1000}}, "output_dir": {out:?}}}"#));
    let o = fracsym(&["solve", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    let e = &s["estimates"][0]["estimate"];
    let (mean, se) = (e["mean"].as_f64().unwrap(), e["stderr"].as_f64().unwrap());
    assert!((mean - 2.0 / std::f64::consts::PI).abs() <= 3.0 * se + 1e-12, "{mean} ± {se}");
    assert_eq!(s["seed"], 0);
    assert_eq!(s["config"]["command"], "solve");
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("point,mean,stderr,n_samples,max_steps_hit\n"));
}

#[test]
fn malformed_config_reports_position() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", "{\n  \"seed\": 1,\n  \"bogus\": true\n}");
    let o = fracsym(&["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("bogus"), "{err}");

    let cfg = write_config(tmp.path(), "range.json", r#"{"params": {"n": 2, "s": 1.0}, "output_dir": "never"}"#);
    let o = fracsym(&["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!Path::new("never").exists());
}

#[test]
fn dry_run_prints_resolved_config_only() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "c.json", &format!(r#"{{"seed": 3, "output_dir": {out:?}}}"#));
    let o = fracsym(&["stability", "--config", &cfg, "--dry-run"]);
    assert!(o.status.success());
    let resolved: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(resolved["walk"]["base_seed"], 3);
    assert_eq!(resolved["eps_list"].as_array().unwrap().len(), 4);
    assert!(!out.exists());
}

#[test]
fn counterexample_writes_rows_and_slope() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for workers in ["1", "3"] {
        let out = tmp.path().join(format!("out{workers}"));
        let cfg = write_config(
            tmp.path(),
            &format!("ce{workers}.json"),
            &format!(r#"{{"walk": {{"n_walks": 20000}}, "seed": 8, "output_dir": {out:?}}}"#),
        );
        let o = fracsym(&["counterexample", "--config", &cfg, "--workers", workers]);
        assert_ne!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
        let s = summary(&out);
        assert_eq!(o.status.success(), s["passed"].as_bool().unwrap());
        assert!(s["counterexample"]["fitted_slope"].is_number());
        let csv = fs::read_to_string(out.join("results.csv")).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(csv.lines().next().unwrap(), "shape_param,seminorm,noise_floor,rho,ratio,lambda_max,flag");
        csvs.push(csv);
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn verify_on_a_ball_passes_or_is_vacuous() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "v.json",
        &format!(
            r#"{{"shape": {{"kind": "minkowski", "inner": {{"kind": "perturbed_ball_2d", "a": 1, "eps": 0, "k": 2}}, "radius": 0.5}},
                "walk": {{"n_walks": 20000}}, "growth_points": 100, "sandwich_triples": 1000,
                "geometry_samples": 20000, "closure_trials": 1000, "output_dir": {out:?}}}"#
        ),
    );
    let o = fracsym(&["verify", "--config", &cfg]);
    let s = summary(&out);
    assert!(o.status.success(), "{}", serde_json::to_string_pretty(&s["checks"]).unwrap());
    for c in s["checks"].as_array().unwrap() {
        assert!(c["status"] != "failed" || c["asserted"] == false, "{c}");
    }
    assert!(s["bound_constants"]["c_star"].as_f64().unwrap() > 0.0);
}
