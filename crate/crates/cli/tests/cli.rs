use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;
use twincert::model::{load_box, load_network, save_network, Layer};
use twincert::safety::SafetyConfig;
use twincert::synth::dense_network;
use twincert::Network;

fn twincert(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twincert"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_out(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let start = text.find('{').expect("json report on stdout");
    serde_json::from_str(&text[start..]).unwrap()
}

fn toy_dir() -> TempDir {
    let dir = TempDir::new().unwrap();
    let out = twincert(dir.path(), &["make-toy", "--out", "."]);
    assert!(out.status.success());
    dir
}

#[test]
fn make_toy_is_byte_stable() {
    let dir = toy_dir();
    let first = std::fs::read(dir.path().join("toy.json")).unwrap();
    let second_dir = toy_dir();
    assert_eq!(first, std::fs::read(second_dir.path().join("toy.json")).unwrap());
    let net = load_network(dir.path().join("toy.json")).unwrap();
    match &net.layers()[0] {
        Layer::Dense { weights, .. } => assert_eq!(weights, &vec![vec![1.0, 0.5], vec![-0.5, 1.0]]),
        other => panic!("unexpected layer {other:?}"),
    }
    match &net.layers()[1] {
        Layer::Dense { weights, .. } => assert_eq!(weights, &vec![vec![1.0, -1.0]]),
        other => panic!("unexpected layer {other:?}"),
    }
    let dom = load_box(dir.path().join("unit2.json")).unwrap();
    assert_eq!(dom.lower, vec![-1.0, -1.0]);
    assert_eq!(dom.upper, vec![1.0, 1.0]);
}

#[test]
fn certify_toy_values() {
    let dir = toy_dir();
    let base = ["certify", "--network", "toy.json", "--delta", "0.1", "--domain", "unit2.json"];
    let r = json_out(&twincert(dir.path(), &[&base[..], &["--window", "2", "--refine", "999"]].concat()));
    assert!((r["epsilon_upper"].as_f64().unwrap() - 0.2).abs() < 1e-6);
    let r = json_out(&twincert(
        dir.path(),
        &[&base[..], &["--scheme", "btne", "--window", "1", "--refine", "999"]].concat(),
    ));
    assert!((r["epsilon_upper"].as_f64().unwrap() - 1.5).abs() < 1e-6);

    std::fs::write(dir.path().join("x0.json"), "[0.0, 0.0]").unwrap();
    let r = json_out(&twincert(dir.path(), &[&base[..], &["--refine", "999", "--local", "x0.json"]].concat()));
    assert!((r["epsilon_upper"].as_f64().unwrap() - 0.125).abs() < 1e-6);
}

#[test]
fn exit_codes() {
    let dir = toy_dir();
    let out = twincert(dir.path(), &["certify", "--network", "toy.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let out = twincert(dir.path(), &["certify", "--network", "missing.json", "--delta", "0.1"]);
    assert_eq!(out.status.code(), Some(3));

    std::fs::write(dir.path().join("broken.json"), "{\"name\": 1}").unwrap();
    let out = twincert(dir.path(), &["certify", "--network", "broken.json", "--delta", "0.1"]);
    assert_eq!(out.status.code(), Some(3));

    let out = twincert(dir.path(), &["certify", "--network", "toy.json", "--delta", "-1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = twincert(dir.path(), &["certify", "--network", "toy.json", "--delta", "0.1", "--output", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exact_and_oracle() {
    let dir = toy_dir();
    let args = ["--network", "toy.json", "--delta", "0.1", "--domain", "unit2.json"];
    let r = json_out(&twincert(dir.path(), &[&["exact"][..], &args[..]].concat()));
    assert!((r["epsilon_exact"].as_f64().unwrap() - 0.2).abs() < 1e-6);
    let r = json_out(&twincert(dir.path(), &[&["oracle"][..], &args[..], &["--grid-step", "0.005"]].concat()));
    let e = r["epsilon_grid"].as_f64().unwrap();
    assert!((0.199..=0.2 + 1e-12).contains(&e), "grid value {e}");
}

#[test]
fn exact_guard_needs_force() {
    let dir = TempDir::new().unwrap();
    let net = dense_network(5, &[2, 40, 1], 0.1, false);
    save_network(&net, dir.path().join("wide.json")).unwrap();
    let out = twincert(dir.path(), &["exact", "--network", "wide.json", "--delta", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--force"));
}

#[test]
fn pgd_linear() {
    let dir = TempDir::new().unwrap();
    let net = Network::new(
        "linear",
        vec![2],
        vec![Layer::Dense {
            weights: vec![vec![2.0, -1.0]],
            bias: vec![0.0],
            relu: false,
        }],
    )
    .unwrap();
    save_network(&net, dir.path().join("linear.json")).unwrap();
    std::fs::write(dir.path().join("one_row.csv"), "x0,x1\n0.2,-0.3\n").unwrap();
    let r = json_out(&twincert(
        dir.path(),
        &["pgd", "--network", "linear.json", "--dataset", "one_row.csv", "--delta", "0.1"],
    ));
    assert!((r["epsilon_lower"].as_f64().unwrap() - 0.3).abs() < 1e-12);
}

#[test]
fn reports_are_deterministic_across_jobs() {
    let dir = toy_dir();
    let net = dense_network(11, &[3, 6, 5, 2], 0.2, false);
    save_network(&net, dir.path().join("net.json")).unwrap();
    let run = |jobs: &str, out: &str| {
        let o = twincert(
            dir.path(),
            &[
                "--stable", "--jobs", jobs, "certify", "--network", "net.json", "--delta", "0.05", "--refine", "2",
                "--out", out,
            ],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(dir.path().join(out)).unwrap()
    };
    let a = run("1", "a.json");
    assert_eq!(a, run("1", "b.json"));
    assert_eq!(a, run("3", "c.json"));
}

#[test]
fn acc_verdicts() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("scalar.json"), SafetyConfig::scalar_demo(0.1).to_json()).unwrap();
    let out = twincert(dir.path(), &["acc", "--config", "scalar.json"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("invariant set: nonempty (2 halfspaces"));

    let out = twincert(dir.path(), &["acc", "--config", "scalar.json", "--dd-bound", "1.0", "--simulate", "2000"]);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("invariant set: empty"), "{text}");
    assert!(text.contains("unsafe"), "{text}");
    assert!(dir.path().join("trajectory.csv").exists());

    std::fs::write(dir.path().join("acc.json"), SafetyConfig::acc(0.1298).to_json()).unwrap();
    let out = twincert(
        dir.path(),
        &["--stable", "acc", "--config", "acc.json", "--simulate", "20000", "--out", "acc_report.json"],
    );
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(out.status.success());
    if text.contains("nonempty") {
        assert!(text.contains("steps, safe"), "{text}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("acc_report.json")).unwrap()).unwrap();
    assert_eq!(report["method"], "substitute");
}
