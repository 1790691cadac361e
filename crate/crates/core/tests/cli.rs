use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use fraclab::manifest::{RunManifest, MANIFEST_FILE};

fn fraclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fraclab")).args(args).output().expect("spawn fraclab")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const INTERVAL_CFG: &str = "n = 1\ns = 0.5\nlambda = 2.3\ncells = 64\nm = 2\ndomain = interval -1 1\n";

#[test]
fn constants_prints_json_and_rejects_bad_s() {
    let out = fraclab(&["constants", "--s", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["d_s"].as_f64().unwrap() - 1.0).abs() < 1e-14);

    let out = fraclab(&["constants", "--s", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn malformed_config_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "bad.cfg", "n = 1\ns = 0.5\ncells 64\n");
    let out = fraclab(&["eig", "--config", &cfg, "--out", path(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn eig_writes_bundle_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "eig.cfg", INTERVAL_CFG);
    let o = dir.path().join("eig");
    let out = fraclab(&["eig", "--config", &cfg, "--out", path(&o)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = RunManifest::load(&o.join(MANIFEST_FILE)).unwrap();
    assert!(m.complete);
    assert_eq!(m.command, "eig");
    let names = m.output_map();
    for f in ["eig_1.bin", "eig_2.bin", "mask.bin", "bundle.json", "spectral.json"] {
        assert!(names.contains_key(f), "{f} missing");
        assert!(o.join(f).exists());
    }
    let bundle: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(o.join("bundle.json")).unwrap()).unwrap();
    let l: Vec<f64> = bundle["lambdas"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(l.len(), 2);
    assert!(l[0] < l[1]);
    // λ₁((−1,1)) at s = 1/2
    assert!((l[0] - 1.157_773_883_697_7).abs() / 1.157_773_883_697_7 < 0.05, "{l:?}");
}

#[test]
fn same_seed_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "opt.cfg",
        "n = 1\ns = 0.4\nlambda = 1.5\ncells = 48\nschedule = anneal\nsteps = 60\nrestarts = 2\nseed = 5\n",
    );
    let hashes = |name: &str| -> BTreeMap<String, String> {
        let o = dir.path().join(name);
        let out = fraclab(&["optimize", "--config", &cfg, "--out", path(&o), "--threads", "2"]);
        assert_eq!(out.status.code(), Some(0));
        let m = RunManifest::load(&o.join(MANIFEST_FILE)).unwrap();
        m.output_map().into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    };
    let a = hashes("a");
    assert!(a.contains_key("trace.csv"));
    assert_eq!(a, hashes("b"));
}

#[test]
fn diagnose_rejects_mismatched_mask() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "eig.cfg", INTERVAL_CFG);
    let e = dir.path().join("eig");
    assert_eq!(fraclab(&["eig", "--config", &cfg, "--out", path(&e)]).status.code(), Some(0));
    let coarse = write_cfg(dir.path(), "coarse.cfg", &INTERVAL_CFG.replace("cells = 64", "cells = 32"));
    let c = dir.path().join("coarse");
    assert_eq!(fraclab(&["eig", "--config", &coarse, "--out", path(&c)]).status.code(), Some(0));
    let out = fraclab(&[
        "diagnose",
        "--bundle",
        path(&e),
        "--mask",
        path(&c.join("mask.bin")),
        "--out",
        path(&dir.path().join("d")),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn diagnose_point_filter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "eig.cfg", INTERVAL_CFG);
    let e = dir.path().join("eig");
    assert_eq!(fraclab(&["eig", "--config", &cfg, "--out", path(&e)]).status.code(), Some(0));
    let d = dir.path().join("d");
    let out = fraclab(&["diagnose", "--bundle", path(&e), "--out", path(&d), "--points", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let weiss = std::fs::read_to_string(d.join("weiss.csv")).unwrap();
    let rows: Vec<&str> = weiss.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.starts_with("1,")), "{weiss}");
    assert!(d.join("classification.json").exists());
}

#[cfg(unix)]
#[test]
fn sigint_leaves_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "long.cfg",
        "n = 2\ns = 0.5\nlambda = 1\ncells = 24\ndomain = ball 0 0 0.8\nschedule = anneal\nsteps = 10000000\n",
    );
    let o = dir.path().join("run");
    let child = Command::new(env!("CARGO_BIN_EXE_fraclab"))
        .args(["optimize", "--config", &cfg, "--out", path(&o)])
        .spawn()
        .unwrap();
    std::thread::sleep(std::time::Duration::from_millis(1500));
    unsafe {
        libc::kill(child.id() as libc::pid_t, libc::SIGINT);
    }
    let status = child.wait_with_output().unwrap().status;
    assert_eq!(status.code(), Some(1));
    let m = RunManifest::load(&o.join(MANIFEST_FILE)).unwrap();
    assert!(!m.complete);
    assert!(o.join("trace.csv").exists());
}
