use std::fs;
use std::path::Path;

use nde5::cli::run;
use serde_json::Value;

fn nde5(out: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["nde5", "--out-dir", out.to_str().unwrap()];
    argv.extend_from_slice(args);
    run(argv)
}

fn manifest(out: &Path, command: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join(format!("{command}.manifest.json"))).unwrap()).unwrap()
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(nde5(out, &["rh", "--minus", "1,0,0,0,0", "--plus", "-1,0,0,0,0"]), 0);
    assert_eq!(nde5(out, &["shoot-d0", "--kind", "bogus"]), 3);
    assert_eq!(nde5(out, &["blowup"]), 3);
    assert_eq!(nde5(out, &["rh", "--minus", "1,0,0,0,0", "--plus", "1,0,0,0,0"]), 3);
    assert_eq!(nde5(out, &["blowup", "--alpha", "1/9", "--f1", "1"]), 2);
    assert_eq!(nde5(out, &["evolve", "--kind", "uniform-nondiv", "--data", "s-plus", "--delta", "1e-2", "--t-end", "0.1"]), 2);
    assert_eq!(nde5(out, &["--help"]), 0);
}

#[test]
fn manifests_follow_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(nde5(out, &["shoot-d0", "--kind", "n50", "--bracket", "-1,1"]), 0);
    let m = manifest(out, "shoot-d0");
    for key in ["command", "params", "paper_anchor", "outputs", "metrics"] {
        assert!(m.get(key).is_some(), "missing {key}");
    }
    let d0 = m["metrics"]["D0"].as_f64().unwrap();
    assert!((d0 - 0.069192424).abs() < 5e-3);
    for f in m["outputs"].as_array().unwrap() {
        assert!(out.join(f.as_str().unwrap()).exists());
    }
}

#[test]
fn roots_json_lists_interface_roots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(nde5(out, &["roots", "--context", "compacton-interface"]), 0);
    let rep: Value = serde_json::from_str(&fs::read_to_string(out.join("roots.json")).unwrap()).unwrap();
    let roots = rep["roots"].as_array().unwrap();
    assert_eq!(roots.len(), 4);
    let re: Vec<f64> = roots.iter().map(|z| z["re"].as_f64().unwrap_or_else(|| z[0].as_f64().unwrap())).collect();
    assert!(re.iter().any(|r| (r + 4.0).abs() < 1e-10));
    assert!(re.iter().any(|r| (r - 7.0).abs() < 1e-10));
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cmds: [&[&str]; 3] = [
        &["global-sweep", "--alpha", "1/9", "--f0-grid", "1:3:3", "--L", "60"],
        &["compacton", "--which", "k22"],
        &["evolve", "--kind", "uniform-div", "--data", "s-minus", "--delta", "3", "--t-end", "0.02", "--snapshots", "2"],
    ];
    for cmd in cmds {
        assert_eq!(nde5(a.path(), cmd), 0);
        assert_eq!(nde5(b.path(), cmd), 0);
    }
    assert_eq!(snapshot(a.path()), snapshot(b.path()));
}

#[test]
fn profile_feeds_rate_and_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(nde5(out, &["profile", "--kind", "n50", "--intervals", "1000"]), 0);
    let prof = out.join("profile-n50.csv");
    let p = prof.to_str().unwrap();
    assert_eq!(nde5(out, &["rate", "--what", "tv", "--profile", p]), 0);
    let tv = manifest(out, "rate")["metrics"]["exponent"].as_f64().unwrap();
    assert!((tv - 0.625).abs() < 0.05, "{tv}");
    assert_eq!(nde5(out, &["entropy-test", "--shock", "s-plus", "--profile", p]), 0);
    assert_eq!(manifest(out, "entropy-test")["metrics"]["verdict"], "NonEntropy");
    assert_eq!(nde5(out, &["rate", "--what", "l1", "--profile", "missing.csv"]), 2);
}
