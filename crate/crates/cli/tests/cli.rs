//! End-to-end runs of the `timescales` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_timescales"));
    cmd.env("TIMESCALES_JOBS", "2");
    cmd
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn timescales")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const TWO_PROCESS: &str = r#"
seed = 7
nodes = 5
steps = 66

[[process]]
window = 22
edges_per_window = 200.0

[[process]]
window = 33
edges_per_window = 200.0
degree_cv = 0.5
"#;

fn synth_fixture(dir: &Path) -> PathBuf {
    fs::write(dir.join("two.toml"), TWO_PROCESS).unwrap();
    ok(dir, &["synth", "two.toml", "-o", "two.csv"]);
    dir.join("two.csv")
}

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_is_byte_identical_for_a_seed() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("two.toml"), TWO_PROCESS).unwrap();
    ok(dir.path(), &["synth", "two.toml", "-o", "a.csv"]);
    ok(dir.path(), &["synth", "two.toml", "-o", "b.csv"]);
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    ok(dir.path(), &["synth", "two.toml", "-o", "c.csv", "--seed", "8"]);
    assert_ne!(a, fs::read(dir.path().join("c.csv")).unwrap());

    let m = manifest(&dir.path().join("a.manifest.json"));
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["command"], "synth");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["outputs"][0], "a.csv");
    assert_eq!(m["config_digest"].as_str().unwrap().len(), 64);
    assert_eq!(m["config_digest"], manifest(&dir.path().join("b.manifest.json"))["config_digest"]);
}

#[test]
fn synth_rejects_bad_configs_with_field_names() {
    let dir = TempDir::new().unwrap();
    let bad_cv = TWO_PROCESS.replace("degree_cv = 0.5", "degree_cv = 1.5");
    fs::write(dir.path().join("cv.toml"), bad_cv).unwrap();
    let out = run(dir.path(), &["synth", "cv.toml", "-o", "g.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("[0, 1]"), "{}", stderr(&out));
    assert!(stderr(&out).contains("degree_cv"), "{}", stderr(&out));

    fs::write(dir.path().join("typo.toml"), TWO_PROCESS.replace("edges_per_window = 200.0\n\n[[", "edges_per_windw = 200.0\n\n[[")).unwrap();
    let out = run(dir.path(), &["synth", "typo.toml", "-o", "g.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("edges_per_windw"), "{}", stderr(&out));

    let out = run(dir.path(), &["synth", "missing.toml", "-o", "g.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn detect_is_deterministic_and_validates_sweeps() {
    let dir = TempDir::new().unwrap();
    synth_fixture(dir.path());
    let args = ["detect", "two.csv", "-o", "a.json", "--sweeps", "40", "--chains", "2", "--seed", "3", "--trace", "a.trace.csv"];
    ok(dir.path(), &args);
    let mut again = args;
    again[3] = "b.json";
    again[11] = "b.trace.csv";
    ok(dir.path(), &again);
    let a = fs::read_to_string(dir.path().join("a.json")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.path().join("b.json")).unwrap());
    let json: serde_json::Value = serde_json::from_str(&a).unwrap();
    let boundaries = json["boundaries"].as_array().unwrap();
    assert_eq!(boundaries.last().unwrap(), 66);
    assert!(json["bits"].as_f64().unwrap() > 0.0);
    let trace = fs::read_to_string(dir.path().join("a.trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 41);
    assert_eq!(trace.lines().next().unwrap(), "sweep,bits,bestBits");

    let out = run(dir.path(), &["detect", "two.csv", "-o", "c.json", "--sweeps", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("c.json").exists());
    let out = run(dir.path(), &["detect", "two.csv", "-o", "c.json", "--beta-schedule", "fixed:-1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(dir.path(), &["detect", "two.csv", "-o", "c.json", "--beta-schedule", "warm"]);
    assert_eq!(out.status.code(), Some(1));
    ok(dir.path(), &["detect", "two.csv", "-o", "c.json", "--sweeps", "5", "--beta-schedule", "steps:0=1,3=0.1"]);
}

#[test]
fn spectrum_writes_one_row_per_window_size() {
    let dir = TempDir::new().unwrap();
    synth_fixture(dir.path());
    ok(dir.path(), &["spectrum", "two.csv", "-o", "s.csv", "--delta-max", "40", "--svg", "s.svg", "--mode", "top-prominence"]);
    let csv = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "delta,alpha,bits,normBits");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 40);
    assert!(rows.iter().any(|r| r.ends_with(",0")));
    let minima: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("s.minima.json")).unwrap()).unwrap();
    let list = minima["minima"].as_array().unwrap();
    assert!(!list.is_empty());
    assert_eq!(minima["dominant"], list[0]["delta"]);
    let svg = fs::read_to_string(dir.path().join("s.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polyline").count(), 1);
    let outputs = manifest(&dir.path().join("s.manifest.json"))["outputs"].clone();
    assert_eq!(outputs.as_array().unwrap().len(), 3);

    ok(dir.path(), &["spectrum", "two.csv", "-o", "one.csv", "--delta-max", "1"]);
    assert_eq!(fs::read_to_string(dir.path().join("one.csv")).unwrap().lines().count(), 2);
    let one: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("one.minima.json")).unwrap()).unwrap();
    assert!(one["minima"].as_array().unwrap().iter().all(|m| m["delta"] == 1));

    let out = run(dir.path(), &["spectrum", "two.csv", "-o", "x.csv", "--delta-max", "67"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("exceeds"));
}

#[test]
fn rolling_over_150_steps_gives_125_rows() {
    let dir = TempDir::new().unwrap();
    let config = "seed = 2\nnodes = 6\nsteps = 150\n\n[[process]]\nwindow = 150\ntotal_edges = 3000\ndegree_cv = 0.5\n";
    fs::write(dir.path().join("flat.toml"), config).unwrap();
    ok(dir.path(), &["synth", "flat.toml", "-o", "flat.csv"]);
    ok(dir.path(), &["rolling", "flat.csv", "-o", "r.csv", "--window", "26", "--step", "1", "--delta-max", "13", "--shock-time", "100"]);
    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "windowStart,dominantDelta,renormalizedDelta");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 125);
    assert_eq!(rows[0][0], "0");
    assert_eq!(rows[124][0], "124");
    // stationary data: a constant dominant timescale renormalizes to zero
    assert!(rows.iter().all(|r| r[1] == rows[0][1]), "{csv}");
    assert!(rows.iter().all(|r| r[2] == "0"));

    let out = run(dir.path(), &["rolling", "flat.csv", "-o", "x.csv", "--window", "151"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_output_feeds_every_command() {
    let dir = TempDir::new().unwrap();
    synth_fixture(dir.path());
    ok(dir.path(), &["dl", "two.csv", "-o", "dl.json", "--cuts", "22,33,44"]);
    let dl: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("dl.json")).unwrap()).unwrap();
    assert_eq!(dl["widths"], serde_json::json!([22, 11, 11, 22]));
    let total = dl["report"]["total_bits"].as_f64().unwrap();
    let parts = dl["report"]["partition_prior_bits"].as_f64().unwrap()
        + dl["report"]["edge_count_prior_bits"].as_f64().unwrap()
        + dl["report"]["data_constant_bits"].as_f64().unwrap()
        + dl["report"]["per_window"]
            .as_array()
            .unwrap()
            .iter()
            .map(|w| w["likelihood_bits"].as_f64().unwrap() + w["activity_prior_bits"].as_f64().unwrap())
            .sum::<f64>();
    assert!((total - parts).abs() < 1e-5 * total.abs());
    let out = run(dir.path(), &["dl", "two.csv", "-o", "x.json", "--cuts", "70"]);
    assert_eq!(out.status.code(), Some(1));

    ok(dir.path(), &["spectrum", "two.csv", "-o", "s.csv", "--rebin", "11"]);
    assert_eq!(fs::read_to_string(dir.path().join("s.csv")).unwrap().lines().count(), 7);
    ok(dir.path(), &["detect", "two.csv", "-o", "d.json", "--sweeps", "10", "--rebin", "2"]);
    ok(dir.path(), &["rolling", "two.csv", "-o", "r.csv", "--window", "20", "--step", "10"]);

    let out = run(dir.path(), &["spectrum", "two.csv", "-o", "y.csv", "--nodes", "2"]);
    assert_eq!(out.status.code(), Some(1));
    ok(dir.path(), &["spectrum", "two.csv", "-o", "y.csv", "--nodes", "9", "--delta-max", "3"]);
}

#[test]
fn malformed_input_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.csv"), "a,b,1\nc,d\n").unwrap();
    let out = run(dir.path(), &["spectrum", "bad.csv", "-o", "s.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    fs::write(dir.path().join("dated.csv"), "src;dst;day\na;b;2001-01-01\nb;c;2001-01-15\n").unwrap();
    ok(dir.path(), &["spectrum", "dated.csv", "-o", "s.csv", "--header", "--delimiter", ";", "--time-format", "date", "--rebin", "7"]);
    assert_eq!(fs::read_to_string(dir.path().join("s.csv")).unwrap().lines().count(), 4);

    let help = ok(dir.path(), &["spectrum", "--help"]);
    let text = String::from_utf8_lossy(&help.stdout);
    for flag in ["--delta-max", "--rebin", "--svg", "--mode", "--jobs"] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
    let out = run(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}
