use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn radfov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radfov")).args(args).output().expect("run radfov")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json_file(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).expect("stderr is JSON")
}

#[test]
fn design_pr2d_prints_count_and_writes_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = radfov(&["design", "pr2d", "--fov", "circle:250", "--res", "1", "--out", out]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "N=393");
    let traj = json_file(&dir.path().join("trajectory.json"));
    assert_eq!(traj["schema"], "radial-fov/1");
    assert_eq!(traj["N"], 393);
    assert_eq!(traj["projections"].as_array().unwrap().len(), 393);
    let manifest = json_file(&dir.path().join("manifest.json"));
    let digest = hex::encode(Sha256::digest(fs::read(dir.path().join("trajectory.json")).unwrap()));
    assert_eq!(manifest["outputs"]["trajectory.json"], digest.as_str());
    assert_eq!(manifest["seed"], 0);
}

#[test]
fn identical_arguments_give_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = radfov(&[
            "design", "pr3d-cones", "--fovt", "circle:30", "--seed", "5", "--out", d.path().to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("trajectory.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(fs::read(a.path().join("manifest.json")).unwrap(), fs::read(b.path().join("manifest.json")).unwrap());
}

#[test]
fn spiral_cylinder_count() {
    let dir = tempfile::tempdir().unwrap();
    let o = radfov(&[
        "design", "pr3d-spiral", "--fovt", "rect:120,10", "--fovp", "ellipse:120,76.7", "--full", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let n: usize = stdout(&o).trim().trim_start_matches("N=").parse().unwrap();
    assert!((2297..=2439).contains(&n), "{n}");
}

#[test]
fn design_errors_exit_3_and_argument_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = radfov(&["design", "pr2d", "--fov", "circle:2", "--res", "1", "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"], "DegenerateShape");

    let o = radfov(&["design", "pr2d", "--fov", "blob:3", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "UnknownShape");

    let o = radfov(&["design", "spiral", "--fov", "circle:30", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "UnknownDesigner");

    let o = radfov(&["design", "pr3d-spiral", "--fovt", "circle:20", "--fovp", "circle:40", "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"], "FovConstraintViolated");
}

#[test]
fn psf_and_metrics_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ds = d.to_str().unwrap();
    assert!(radfov(&["design", "pr2d", "--fov", "ellipse:60,30", "--out", ds]).status.success());
    let traj = d.join("trajectory.json");
    let psf_dir = d.join("psf");
    let o = radfov(&[
        "psf", "--traj", traj.to_str().unwrap(), "--dims", "150", "--dkr", "0.008", "--reference", "--out",
        psf_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::metadata(psf_dir.join("psf.bin")).unwrap().len(), 150 * 150 * 8);
    let sidecar = json_file(&psf_dir.join("psf.bin.json"));
    assert_eq!(sidecar["dims"], serde_json::json!([150, 150]));
    assert_eq!(sidecar["endianness"], "little");

    let o = radfov(&[
        "metrics",
        "--psf",
        psf_dir.join("psf.bin").to_str().unwrap(),
        "--reference",
        psf_dir.join("reference.bin").to_str().unwrap(),
        "--fov",
        "ellipse:60,30",
        "--directions",
        "8",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(metrics["directions"].as_array().unwrap().len(), 8);
    let frac = metrics["lowlevel_power_fraction"].as_f64().unwrap();
    assert!(frac > 0.0 && frac < 0.05, "{frac}");
}

#[test]
fn tampered_trajectory_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(radfov(&["design", "pr2d", "--fov", "circle:40", "--out", d.to_str().unwrap()]).status.success());
    let path = d.join("trajectory.json");
    let mut traj = json_file(&path);
    traj["projections"][0]["kmax"] = serde_json::json!(0.3);
    fs::write(&path, serde_json::to_vec(&traj).unwrap()).unwrap();
    let o = radfov(&["psf", "--traj", path.to_str().unwrap(), "--out", d.join("p").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn curve_counts_grow_with_size() {
    let o = radfov(&["curve", "--family", "rect", "--aspect", "2", "--sizes", "50..250"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("shape,size_param,area_or_volume,N"));
    let ns: Vec<usize> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ns.len(), 9);
    assert!(ns.windows(2).all(|w| w[0] < w[1]), "{ns:?}");
}

#[test]
fn phantom_report_for_matched_fov() {
    let dir = tempfile::tempdir().unwrap();
    let o = radfov(&[
        "phantom",
        "pr2d",
        "--fov",
        "ellipse:120,60",
        "--phantom",
        "ellipse:60,30",
        "--shift",
        "10,5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json_file(&dir.path().join("phantom.json"));
    assert_eq!(report["alias_free"], true);
    let o = radfov(&["phantom", "pr2d", "--fov", "circle:60", "--phantom", "sphere:20"]);
    assert_eq!(o.status.code(), Some(2));
}
