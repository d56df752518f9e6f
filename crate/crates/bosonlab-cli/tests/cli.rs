use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const HARMONIC: &str = "[model]\nfamily = \"phi4\"\nsites = 1\n\n[solver]\ncutoff = 30\n";

const BH: &str = r#"
[model]
family = "bose_hubbard"
sites = 4
j = 0.1
u = 1.0

[solver]
cutoff = 3

[agsp]
eps0 = 0.1
b = 2.0
q = 2
l = 1
tau = 100.0
degrees = [2, 4]

[entangle]
max_bond = 4
ey_trials = 10
"#;

fn bosonlab(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_bosonlab"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("timings");
    v
}

#[test]
fn harmonic_suite_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = bosonlab(tmp.path(), HARMONIC, &["suite", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("suite.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    assert!(csv.lines().skip(1).all(|l| l.contains(",Pass,")));
    assert!(!out.join(".bosonlab.lock").exists());
}

#[test]
fn solve_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = bosonlab(tmp.path(), BH, &["solve", "--seed", "7", "--out", d.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(manifest(&a), manifest(&b));
    assert_eq!(fs::read(a.join("eigs.csv")).unwrap(), fs::read(b.join("eigs.csv")).unwrap());
    // rerunning into the same directory leaves the same contents
    let o = bosonlab(tmp.path(), BH, &["solve", "--seed", "7", "--out", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(manifest(&a), manifest(&b));
    let cfg = fs::read_to_string(a.join("config.toml")).unwrap();
    assert!(cfg.contains("seed = 7"));
}

#[test]
fn usage_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = bosonlab(tmp.path(), "[model]\nfamily = \"nope\"\n", &["solve", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let o = bosonlab(tmp.path(), BH, &["suite", "--check", "nope", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let o = bosonlab(tmp.path(), BH, &["solve", "--sweep", "model.j", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let o = Command::new(env!("CARGO_BIN_EXE_bosonlab")).arg("solve").output().unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn lock_and_memory_guard() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(".bosonlab.lock"), "1\n").unwrap();
    let o = bosonlab(tmp.path(), BH, &["solve", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("locked"));
    fs::remove_file(out.join(".bosonlab.lock")).unwrap();
    let small = format!("{BH}\n[limits]\nmemory_bytes = 1000\n");
    let o = bosonlab(tmp.path(), &small, &["solve", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("memory guard"));
    // the failed run still leaves a manifest
    assert!(manifest(&out)["error"].as_str().unwrap().contains("memory guard"));
}

#[test]
fn hypothesis_failure_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    // U = 0 breaks the repulsive condition
    let weak = BH.replace("\nu = 1.0", "\nu = 0.0");
    let o = bosonlab(tmp.path(), &weak, &["tail", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn tail_emits_curve_and_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = "[model]\nfamily = \"phi4\"\nsites = 1\nlambda = 1.0\n\n[solver]\ncutoff = 200\n";
    let o = bosonlab(tmp.path(), cfg, &["tail", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let tail = fs::read_to_string(out.join("tail.csv")).unwrap();
    assert_eq!(tail.lines().next(), Some("N,p"));
    assert_eq!(tail.lines().count(), 202);
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    let inv_a = fit["inv_a"].as_f64().unwrap();
    assert!((0.6..0.8).contains(&inv_a), "{inv_a}");
}

#[test]
fn agsp_and_entangle_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("agsp");
    let o = bosonlab(tmp.path(), BH, &["agsp", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let cert = fs::read_to_string(out.join("certificate.csv")).unwrap();
    assert_eq!(cert.lines().count(), 3);
    assert!(out.join("pipeline.json").exists());

    let out = tmp.path().join("ent");
    let o = bosonlab(tmp.path(), BH, &["entangle", "--threads", "2", "--sweep", "model.j=0.05,0.1,0.2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let header: Vec<&str> = sweep.lines().next().unwrap().split(',').collect();
    assert!(header.contains(&"gap") && header.contains(&"entropy"));
    assert_eq!(sweep.lines().count(), 4);
    for i in 0..3 {
        let d = out.join(format!("sweep_{i:03}"));
        assert_eq!(fs::read_to_string(d.join("mps.csv")).unwrap().lines().count(), 5);
        assert!(d.join("entropy.csv").exists() && d.join("area_law.csv").exists());
    }
}
