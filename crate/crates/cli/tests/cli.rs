use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn shapespace(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shapespace")).current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn field(o: &Output, key: &str) -> f64 {
    let text = stdout(o);
    let line =
        text.lines().find(|l| l.starts_with(&format!("{key}: "))).unwrap_or_else(|| panic!("no {key} in {text}"));
    line[key.len() + 2..].parse().unwrap()
}

fn setup() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("a.pts"), "# dim 2\n0 0\n").unwrap();
    fs::write(dir.path().join("b.pts"), "# dim 2\n1 0\n").unwrap();
    let seg = |x: f64, n: usize| {
        let mut s = String::from("# dim 2\n");
        for i in 0..=n {
            s.push_str(&format!("{x} {}\n", i as f64 * 0.005));
        }
        s
    };
    fs::write(dir.path().join("segA.pts"), seg(0.0, 400)).unwrap();
    fs::write(dir.path().join("segB.pts"), seg(2.0, 200)).unwrap();
    dir
}

#[test]
fn dist_prints_value_and_error() {
    let dir = setup();
    let o = shapespace(dir.path(), &["dist", "a.pts", "b.pts", "--p", "2", "--profile", "exp:1", "--h", "0.1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(field(&o, "value") > 0.0);
    assert!(field(&o, "error") >= 0.0);
    assert!(field(&o, "tail_bound") >= 0.0);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("shapespace-out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "dist");
    assert_eq!(manifest["config"]["flags"]["profile"], "exp:1");
    assert!(manifest["results"]["error"].is_number());
}

#[test]
fn hausdorff_of_the_two_segments() {
    let dir = setup();
    let o = shapespace(dir.path(), &["hausdorff", "segA.pts", "segB.pts"]);
    assert!(o.status.success());
    assert!((field(&o, "value") - 5f64.sqrt()).abs() < 1e-9);
}

#[test]
fn divergent_profile_exits_with_validation_status() {
    let dir = setup();
    let o = shapespace(dir.path(), &["check-profile", "invpow:1", "--p", "1", "--dim", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("diverges") && err.contains("∫"), "{err}");
    assert_eq!(err.lines().count(), 1);

    let ok = shapespace(dir.path(), &["check-profile", "invpow:3", "--p", "1", "--dim", "2"]);
    assert!(ok.status.success());
}

#[test]
fn bad_input_exits_with_two() {
    let dir = setup();
    assert_eq!(shapespace(dir.path(), &["dist", "a.pts", "b.pts", "--bogus"]).status.code(), Some(2));
    fs::write(dir.path().join("bad.pts"), "# dim 2\n0 0 0\n").unwrap();
    let o = shapespace(dir.path(), &["dist", "a.pts", "bad.pts"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.pts"));
    assert_eq!(shapespace(dir.path(), &["dist", "a.pts", "b.pts", "--profile", "gauss:1"]).status.code(), Some(2));
    assert_eq!(shapespace(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn window_cap_exits_with_three() {
    let dir = setup();
    let o = shapespace(dir.path(), &["dist", "a.pts", "b.pts", "--max-cells", "100"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn thread_cap_is_validated() {
    let dir = setup();
    let o = Command::new(env!("CARGO_BIN_EXE_shapespace"))
        .current_dir(dir.path())
        .env("SHAPESPACE_THREADS", "zero")
        .args(["hausdorff", "a.pts", "b.pts"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_shapespace"))
        .current_dir(dir.path())
        .env("SHAPESPACE_THREADS", "2")
        .args(["hausdorff", "a.pts", "b.pts"])
        .output()
        .unwrap();
    assert!(o.status.success());
}

#[test]
fn manifests_are_byte_identical() {
    let dir = setup();
    let args = ["dist", "a.pts", "b.pts", "--h", "0.1", "--fields"];
    assert!(shapespace(dir.path(), &args).status.success());
    let first = fs::read(dir.path().join("shapespace-out/manifest.json")).unwrap();
    let field = fs::read(dir.path().join("shapespace-out/field_a.txt")).unwrap();
    assert!(shapespace(dir.path(), &args).status.success());
    assert_eq!(first, fs::read(dir.path().join("shapespace-out/manifest.json")).unwrap());
    assert_eq!(field, fs::read(dir.path().join("shapespace-out/field_a.txt")).unwrap());
}

#[test]
fn fatten_then_geodesic_writes_frames_and_history() {
    let dir = setup();
    let d = dir.path();
    for (src, r, out) in [("a.pts", "0.3", "fa"), ("b.pts", "0.5", "fb")] {
        let o = shapespace(d, &["fatten", src, "--r", r, "--h", "0.1", "--out", out]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let o = shapespace(
        d,
        &[
            "geodesic",
            "fa/fattened.txt",
            "fb/fattened.txt",
            "--frames",
            "3",
            "--h",
            "0.1",
            "--max-sweeps",
            "5",
            "--out",
            "geo",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for i in 0..=3 {
        assert!(d.join(format!("geo/frame_{i:03}.txt")).exists());
    }
    let csv = fs::read_to_string(d.join("geo/history.csv")).unwrap();
    assert!(csv.starts_with("sweep,action,length,accepted\n"));
    let actions: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(actions.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(field(&o, "length") + 1e-9 >= field(&o, "endpoint_distance") - field(&o, "endpoint_error"));
}

#[test]
fn midpoint_in_pgm_format() {
    let dir = setup();
    let o = shapespace(dir.path(), &["midpoint", "a.pts", "b.pts", "--h", "0.05", "--mask-format", "pgm"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("shapespace-out");
    assert!(out.join("midpoint.pgm").exists() && out.join("midpoint.pgm.hdr").exists());
    let err = field(&o, "error");
    assert!((field(&o, "hausdorff_ac") - 0.5).abs() <= err);
    assert!((field(&o, "hausdorff_bc") - 0.5).abs() <= err);
}

#[test]
fn riemann_on_the_unit_circle() {
    let dir = setup();
    let (mut bd, mut ones) = (String::new(), String::new());
    for i in 0..256 {
        let t = std::f64::consts::TAU * i as f64 / 256.0;
        bd.push_str(&format!("{} {}\n", t.cos(), t.sin()));
        ones.push_str("1\n");
    }
    fs::write(dir.path().join("circle.txt"), bd).unwrap();
    fs::write(dir.path().join("ones.txt"), ones).unwrap();
    let o = shapespace(dir.path(), &["riemann", "circle.txt", "--alpha-file", "ones.txt", "--profile", "exp:1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!((field(&o, "a") - 0.5).abs() < 1e-10);
    assert!((field(&o, "inner") - 1.5 * std::f64::consts::PI).abs() < 1e-3);
}
