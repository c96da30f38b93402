use std::path::Path;
use std::process::{Command, Output};

fn fkwave(cache: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fkwave"))
        .args(args)
        .arg("--set")
        .arg(format!("output_dir={}", serde_json::to_string(out).unwrap()))
        .env("FKWAVE_CACHE_DIR", cache)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_at_zero_epsilon_returns_the_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = fkwave(&dir.path().join("cache"), &out, &["solve", "--set", "epsilon=0"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out.join("solve.json"));
    assert_eq!(report["beta"].as_f64(), Some(0.0));
    assert_eq!(report["iterations"].as_u64(), Some(0));
    assert!(report["residual_final"].as_f64().unwrap() <= 1e-6);
    for key in ["c", "epsilon", "K0", "r_norm", "lambda_star"] {
        assert!(report[key].is_number(), "{key}");
    }
    assert!(out.join("u.csv").exists() && out.join("invariants.json").exists());
}

#[test]
fn dispersion_roots_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = fkwave(&dir.path().join("cache"), &out, &["dispersion", "--set", "c=1"]);
    assert_eq!(o.status.code(), Some(0));
    let roots = std::fs::read_to_string(out.join("roots.csv")).unwrap();
    assert!(roots.contains("-1.5707963") && roots.contains("\n1.5707963"), "{roots}");
    assert_eq!(roots.lines().count(), 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let out = dir.path().join("out");
    let o = fkwave(&cache, &out, &["solve", "--set", "c=0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("speed outside admissible range"));
    let o = fkwave(&cache, &out, &["solve", "--set", "grid.bogus=1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = fkwave(&cache, &out, &["solve", "--set", "corrector.max_iter=1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("max_iter exceeded"));
    let o = fkwave(&cache, &out, &["solve", "--set", "epsilon=0", "--set", "grid.x_max=30"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_file_and_overrides_compose() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"epsilon": 0.0, "grid": {"inv_h": 32}, "corrector": {"mode": "semi_implicit"}}"#).unwrap();
    let out = dir.path().join("out");
    let o = fkwave(
        &dir.path().join("cache"),
        &out,
        &["exact", "--config", cfg.to_str().unwrap(), "--set", "c=0.99"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("up.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 60 * 32 + 1);
    std::fs::write(&cfg, r#"{"grid": {"inv_h": 32}, "extra": 1}"#).unwrap();
    let o = fkwave(&dir.path().join("cache"), &out, &["exact", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn outputs_are_deterministic_with_cold_and_warm_caches() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let cache = dir.path().join("cache");
    let args = ["solve", "--set", "epsilon=1e-3"];
    assert_eq!(fkwave(&cache, &a, &args).status.code(), Some(0));
    assert!(std::fs::read_dir(&cache).unwrap().count() >= 2);
    assert_eq!(fkwave(&cache, &b, &args).status.code(), Some(0));
    assert_eq!(fkwave(&dir.path().join("cold"), &c, &args).status.code(), Some(0));
    for name in ["u.csv", "solve.json"] {
        let first = std::fs::read(a.join(name)).unwrap();
        assert_eq!(first, std::fs::read(b.join(name)).unwrap(), "{name} warm");
        assert_eq!(first, std::fs::read(c.join(name)).unwrap(), "{name} cold");
    }
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = fkwave(&dir.path().join("cache"), &out, &["exact", "--sweep", "c=0.98,1.0", "--set", "epsilon=0"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("[c=0.98]") && stdout.contains("[c=1.0]"));
    let l98 = json(&out.join("c=0.98/up.json"))["lambda_star"].as_f64().unwrap();
    let l100 = json(&out.join("c=1.0/up.json"))["lambda_star"].as_f64().unwrap();
    assert!((l100 - 0.5213011508510539).abs() < 1e-15 && l98 < l100);
}
