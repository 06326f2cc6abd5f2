//! End-to-end checks of the `stochabs` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stochabs"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn stochabs")
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    v.sort();
    v
}

#[test]
fn verify_stage_writes_only_certificates() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v");
    let sc = scenario("network_desk.scn");
    let o = run(&["run", sc.to_str().unwrap(), "--stages", "verify", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in listing(&out) {
        assert!(
            f == "certificates.txt" || f == "ssf.txt" || f == "summary.txt" || f.starts_with("cycles_"),
            "unexpected artifact {f}"
        );
    }
    assert!(out.join("certificates.txt").exists());
}

#[test]
fn runs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = scenario("network_desk.scn");
    let dirs: Vec<PathBuf> = (0..2).map(|i| tmp.path().join(format!("r{i}"))).collect();
    for d in &dirs {
        let o = run(&["run", sc.to_str().unwrap(), "--runs", "64", "--seed", "11", "--out", d.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let names = listing(&dirs[0]);
    assert_eq!(names, listing(&dirs[1]));
    assert!(names.iter().any(|n| n == "runs.csv"));
    for n in names.iter().filter(|n| n.ends_with(".csv")) {
        let a = std::fs::read(dirs[0].join(n)).unwrap();
        let b = std::fs::read(dirs[1].join(n)).unwrap();
        assert!(a == b, "{n} differs between runs");
    }
}

#[test]
fn schema_error_exits_2_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let src = std::fs::read_to_string(scenario("network_desk.scn")).unwrap();
    let bad = src.replace("horizon = 50", "horizon = \"fifty\"");
    assert_ne!(bad, src);
    let p = tmp.path().join("bad.scn");
    std::fs::write(&p, bad).unwrap();
    let o = run(&["run", p.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line "), "{err}");
}

#[test]
fn size_sweep_keeps_delta_hat() {
    let o = run(&["sweep", scenario("rooms_desk.scn").to_str().unwrap(), "--over", "N"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next().unwrap().split(',').collect();
    let (ni, ei, di) = ["N", "epsilon", "delta_hat"].map(|k| head.iter().position(|h| *h == k).unwrap()).into();
    let mut seen = std::collections::BTreeMap::new();
    let mut sizes = std::collections::BTreeSet::new();
    for l in lines {
        let c: Vec<&str> = l.split(',').collect();
        sizes.insert(c[ni].to_string());
        let prev = seen.entry(c[ei].to_string()).or_insert_with(|| c[di].to_string());
        assert_eq!(prev, c[di], "delta_hat changed with N at epsilon {}", c[ei]);
    }
    assert!(sizes.len() > 1);
}
