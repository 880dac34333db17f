use std::path::{Path, PathBuf};
use std::process::Command;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn pointhom(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pointhom"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .current_dir(root())
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn validate_accepts_the_ball_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fresh/run");
    let o = pointhom(&["validate", "scenarios/ball3d.toml"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["results"]["violations"], serde_json::json!([]));
    assert_eq!(m["scenario_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn rejected_scenario_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pointhom(&["validate", "scenarios/bad_strength.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Assumption 3"));
    let o = pointhom(&["sample", "scenarios/bad_strength.toml", "--n", "10"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_center_spectrum() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pointhom(
        &["spectrum", "scenarios/ball3d.toml", "--points", "scenarios/single_center.csv", "--e-min", "-100"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = pointhom::table::Table::read(tmp.path().join("spectrum.csv")).unwrap();
    assert_eq!(t.header, ["k", "E", "multiplicity"]);
    assert_eq!(t.rows.len(), 1);
    let e: f64 = t.rows[0][1].parse().unwrap();
    assert!((e + 4.0).abs() < 1e-6);
    let csv = std::fs::read_to_string(tmp.path().join("spectrum.csv")).unwrap();
    assert!(csv.ends_with("# rows: 1\n"));
}

#[test]
fn reruns_are_identical_apart_from_timings() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let args = ["xi-scan", "scenarios/ball3d.toml", "--n", "64", "--lambdas", "1,2,4"];
    let oa = pointhom(&[&args[..], &["--threads", "1"]].concat(), &a);
    let ob = pointhom(&[&args[..], &["--threads", "4"]].concat(), &b);
    assert_eq!(oa.status.code(), Some(0), "{}", String::from_utf8_lossy(&oa.stderr));
    assert_eq!(ob.status.code(), Some(0));
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(&a, "xi_scan.csv"), read(&b, "xi_scan.csv"));
    assert_eq!(read(&a, "plots/min_eigenvalue_scaled.dat"), read(&b, "plots/min_eigenvalue_scaled.dat"));
    let (mut ma, mut mb) = (manifest(&a), manifest(&b));
    ma.as_object_mut().unwrap().remove("timings");
    mb.as_object_mut().unwrap().remove("timings");
    assert_eq!(ma, mb);
}

#[test]
fn sample_writes_cloud_and_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pointhom(&["sample", "scenarios/ball3d.toml", "--n", "100", "--seed", "9"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let c = pointhom::sampling::PointCloud::read_csv(tmp.path().join("cloud.csv"), 9).unwrap();
    assert_eq!(c.len(), 100);
    assert_eq!(manifest(tmp.path())["seeds"], serde_json::json!([9]));
    let plot = std::fs::read_to_string(tmp.path().join("plots/x1_x2.dat")).unwrap();
    assert_eq!(plot.lines().count(), 101);
}

#[test]
fn measures_small_ladder() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pointhom(
        &["measures", "scenarios/ball3d.toml", "--n-list", "64,256", "--seeds", "2", "--riesz", "0.5,1"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = pointhom::table::Table::read(tmp.path().join("measures.csv")).unwrap();
    assert_eq!(t.header, ["N", "seed", "quantity", "value", "oracle", "gap"]);
    assert_eq!(t.rows.len(), 2 * 2 * 3);
}

#[test]
fn verify_runs_a_single_criterion() {
    let tmp = tempfile::tempdir().unwrap();
    let o = pointhom(&["verify", "--only", "1"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("AC1 PASS"), "{stdout}");
    let m = manifest(tmp.path());
    assert_eq!(m["flagged"], serde_json::json!([]));
    assert_eq!(m["oracles"][0]["value"], serde_json::json!(-4.0));
}

#[test]
fn shipped_scenario_is_the_acceptance_scenario() {
    let sc = pointhom::scenario::Scenario::load(root().join("scenarios/ball3d.toml")).unwrap();
    assert_eq!(sc, pointhom_cli::suite::ball_scenario());
}
