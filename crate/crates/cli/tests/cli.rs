//! End-to-end runs of the `cascade` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cascade(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascade"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

/// Output directory printed on the last stdout line.
fn run_dir(o: &Output) -> PathBuf {
    let text = String::from_utf8_lossy(&o.stdout);
    PathBuf::from(text.lines().last().expect("output directory line").trim())
}

fn write_spec(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn spectrum_grid_has_101_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cascade(&["spectrum", "--spec", "multinomial", "--q", "-5:5:0.1"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(&o);
    let csv = fs::read_to_string(dir.join("spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "q,tau,tau_prime,tau_star,gammaG,gammaR,inJ,subinterval");
    assert_eq!(lines.count(), 101);
    assert!(!csv.contains('\r'));
    assert!(dir.join("spectrum.svg").exists());
    assert!(dir.join("manifest.json").exists());
}

#[test]
fn simulate_is_byte_identical_on_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), "canonical.json", cascade_core::presets::CANONICAL_JSON);
    let args = ["simulate", "--spec", spec.as_str(), "--depth", "16", "--seed", "7", "--tail", "2"];
    let a = cascade(&args, &tmp.path().join("a"));
    let b = cascade(&args, &tmp.path().join("b"));
    assert!(a.status.success() && b.status.success());
    let (da, db) = (run_dir(&a), run_dir(&b));
    assert_eq!(da.file_name(), db.file_name());
    let ta = fs::read(da.join("trace.csv")).unwrap();
    let tb = fs::read(db.join("trace.csv")).unwrap();
    assert_eq!(ta, tb);
    let threads = Command::new(env!("CARGO_BIN_EXE_cascade"))
        .args(args)
        .arg("--out")
        .arg(tmp.path().join("c"))
        .env("CASCADE_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(fs::read(run_dir(&threads).join("trace.csv")).unwrap(), ta);
}

#[test]
fn estimate_writes_per_seed_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cascade(
        &["estimate", "--depth", "10", "--tail", "2", "--seeds", "2", "--q", "0:1:0.5", "--window", "3:8", "--theta-samples", "1"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(&o);
    for seed in ["seed_0", "seed_1"] {
        let lq = fs::read_to_string(dir.join(seed).join("lq.csv")).unwrap();
        assert!(lq.starts_with("q,tau_hat,r2\n"));
        assert_eq!(lq.lines().count(), 4);
        for name in ["box_graph", "box_range", "box_projection_0", "box_levelset_0"] {
            let counts = fs::read_to_string(dir.join(seed).join(format!("{name}.csv"))).unwrap();
            assert!(counts.starts_with("j,N_j\n"));
            assert!(dir.join(seed).join(format!("{name}.svg")).exists());
        }
    }
    assert!(dir.join("summary.csv").exists());
}

#[test]
fn measure_and_energy_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cascade(&["measure", "--depth", "6", "--tail", "3", "--q", "1"], tmp.path());
    assert!(o.status.success());
    let m = fs::read_to_string(run_dir(&o).join("measure.csv")).unwrap();
    assert!(m.starts_with("word,mass\n000000,"));
    assert_eq!(m.lines().count(), 65);

    let o = cascade(&["energy", "--depth", "7", "--from", "6", "--tail", "2", "--gamma", "0.5,1.5"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let e = fs::read_to_string(run_dir(&o).join("energy.csv")).unwrap();
    assert!(e.starts_with("gamma,n,value,subsampled\n"));
    assert_eq!(e.lines().count(), 5);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    // configuration: missing spec file, malformed spec, bad flag
    assert_eq!(cascade(&["spectrum", "--spec", "/nonexistent.json"], tmp.path()).status.code(), Some(1));
    let bad = write_spec(tmp.path(), "bad.json", r#"{"b":2,"label":"x","atoms":[{"w":[0.5,0.5],"l":[1.0,0.0],"p":1}]}"#);
    assert_eq!(cascade(&["spectrum", "--spec", &bad], tmp.path()).status.code(), Some(1));
    assert_eq!(cascade(&["spectrum", "--q", "1:0:0.1"], tmp.path()).status.code(), Some(1));
    // capacity
    assert_eq!(cascade(&["simulate", "--depth", "40"], tmp.path()).status.code(), Some(3));
    // conservative spec refused by the theorem criteria
    assert_eq!(
        cascade(&["verify", "--spec", "multinomial", "--only", "A1,A5"], tmp.path()).status.code(),
        Some(2)
    );
}

#[test]
fn verify_subset_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cascade(&["verify", "--only", "A1,A2,A3"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 3);
    assert!(run_dir(&o).join("verify.csv").exists());
}
