use std::fs;
use std::process::Command;

use bellscope::scenario::io::parse_functional;
use bellscope_cli::run;
use serde_json::Value;
use sha2::{Digest, Sha256};

fn bellscope(args: &[&str]) -> bellscope_cli::Outcome {
    run(std::iter::once("bellscope").chain(args.iter().copied()))
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let out = bellscope(&all);
    assert_eq!(out.code, 0, "{}", out.stderr);
    serde_json::from_str(&out.stdout).unwrap()
}

#[test]
fn local_bound_row_14() {
    let out = bellscope(&["local-bound", "row:14"]);
    assert_eq!(out.code, 0);
    assert_eq!(out.stdout.lines().next(), Some("max 2 min -3"));
    let r = json(&["local-bound", "14"]);
    assert_eq!(r["schema"], 1);
    assert_eq!(r["command"], "local-bound");
    assert_eq!(r["result"]["min"]["exact"], "-3");
    assert_eq!(r["inputs"][0]["source"], "builtin:14");
    assert_eq!(r["versions"]["bellscope"], bellscope::VERSION);
}

#[test]
fn i3plus_local_bound_is_exact() {
    assert_eq!(bellscope(&["local-bound", "i3plus"]).stdout.lines().next(), Some("max 2/3 min 0"));
}

#[test]
fn seesaw_row_18_on_qubits() {
    let out = bellscope(&["seesaw", "row:18", "--dims", "2", "2"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v: f64 = out.stdout.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((v - 1.4142).abs() < 1e-3, "{v}");
}

#[test]
fn reports_are_deterministic() {
    let args = ["seesaw", "row:1", "--dims", "2", "2", "--projective", "--restarts", "4", "--seed", "9"];
    let a = json(&args);
    assert_eq!(a, json(&args));
    assert_eq!(a["seed"], 9);
    assert!(a["tolerances"]["sweep_gain"].as_f64().unwrap() > 0.0);
    assert_eq!(json(&["facet-check", "row:19"]), json(&["facet-check", "row:19"]));
}

#[test]
fn signaling_report_on_a_quantum_table() {
    let out = bellscope(&["signaling-report", "phi3-i3plus"]);
    assert_eq!(out.code, 0);
    assert_eq!(out.stdout.trim_end(), "max |Δ| < 1e-12; consistent with non-signaling");
}

#[test]
fn facet_check_and_visibility() {
    let out = bellscope(&["facet-check", "row:14"]);
    assert!(out.stdout.contains("max side: bound 2"), "{}", out.stdout);
    assert!(out.stdout.lines().next().unwrap().ends_with("facet"));
    let v = json(&["visibility", "phi3-i3plus", "--inequality", "i3plus"]);
    assert!((v["result"]["visibility"].as_f64().unwrap() - 0.8794).abs() < 5e-4);
}

#[test]
fn facet_certificate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("cert.txt");
    let out = bellscope(&["facet-from", "phi3-i3plus", "--output", cert.to_str().unwrap()]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let text = fs::read_to_string(&cert).unwrap();
    assert!(text.starts_with("# input_sha256 "));
    let f = parse_functional(&text).unwrap();
    assert_eq!(f.local_max, Some(1.0));
    let check = json(&["facet-check", cert.to_str().unwrap()]);
    assert_eq!(check["result"]["max"]["facet"], true);
    assert_eq!(check["result"]["max"]["affine_dimension"], 47);
}

#[test]
fn simulate_then_nearest_quantum() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.txt");
    let counts_s = counts.to_str().unwrap();
    let out = bellscope(&["simulate", "phi3-i3plus", "--shots", "2000", "--seed", "4", "--output", counts_s]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(out.stdout, fs::read_to_string(&counts).unwrap());

    let rep = json(&["signaling-report", counts_s]);
    assert_eq!(rep["result"]["kind"], "counts");
    assert_eq!(rep["result"]["comparisons"], 54);

    // raw frequencies are signaling
    assert_eq!(bellscope(&["negativity-bound", counts_s, "--level", "local1ppt"]).code, 2);

    let near = dir.path().join("near.txt");
    let near_s = near.to_str().unwrap();
    let out = bellscope(&["nearest-quantum", counts_s, "--level", "npa1ab", "--pin-bell", "i3plus", "--output", near_s]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let side: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("near.txt.json")).unwrap()).unwrap();
    let digest: String = Sha256::digest(fs::read(&counts).unwrap()).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(side["inputs"][0]["sha256"], digest.as_str());
    let pin = &side["result"]["pinned"];
    assert!((pin["target"].as_f64().unwrap() - pin["achieved"].as_f64().unwrap()).abs() < 1e-6);

    let ns = bellscope(&["signaling-report", near_s]);
    assert!(ns.stdout.ends_with("consistent with non-signaling\n"), "{}", ns.stdout);
    let n = json(&["negativity-bound", near_s, "--level", "local1ppt"]);
    let bound = n["result"]["negativity_lower_bound"].as_f64().unwrap();
    assert!(bound > 0.0 && bound <= 1.0 + 1e-6, "{bound}");
}

#[test]
fn upper_bound_row_14() {
    let r = json(&["upper-bound", "row:14", "--level", "npa1ab"]);
    assert!((r["result"]["upper_bound"].as_f64().unwrap() - 2.6972).abs() < 1e-3);
    assert_eq!(r["parameters"]["level"], "npa1ab");
}

#[test]
fn table2_single_row() {
    let r = json(&["table2", "--rows", "14"]);
    let row = &r["result"]["rows"][0];
    assert_eq!(row["row"], 14);
    assert!((row["quantum_max"].as_f64().unwrap() - 2.6972).abs() < 1e-3);
    assert!((row["quantum_min"].as_f64().unwrap() + 3.6972).abs() < 1e-3);
    assert!((row["noise_visibility_max"].as_f64().unwrap() - 0.7415).abs() < 1e-3);
    assert_eq!(row["min_face_vertices"], 27);
    assert!(r["result"]["csv"].as_str().unwrap().starts_with("row,local_max"));
}

#[test]
fn validation_errors_exit_2() {
    for args in [
        &["local-bound"][..],
        &["local-bound", "row:14", "--bogus"],
        &["local-bound", "row:20"],
        &["local-bound", "no-such-file.txt"],
        &["upper-bound", "row:1", "--level", "npa7"],
        &["seesaw", "row:1", "--dims", "2"],
        &["seesaw", "row:1", "--dims", "2", "2", "--povm", "--projective"],
        &["simulate", "phi3-i3plus", "--shots", "0", "--seed", "1"],
        &["table2", "--rows", "3..25"],
        &["facet-from", "nope"],
    ] {
        let out = bellscope(args);
        assert_eq!(out.code, 2, "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let out = bellscope(&["nearest-quantum", "phi3-i3plus", "--level", "local1ppt"]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("level"), "{}", out.stderr);
    let out = bellscope(&["simulate", "phi3-i3plus", "--shots", "0", "--seed", "1"]);
    assert!(out.stderr.contains("shots"), "{}", out.stderr);
}

#[test]
fn parse_errors_name_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "form cg\nbound_max 1\n1 2 x\n").unwrap();
    let out = bellscope(&["local-bound", bad.to_str().unwrap()]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("functional") && out.stderr.contains("line"), "{}", out.stderr);
}

#[test]
fn binary_exit_codes_and_thread_cap() {
    let bin = env!("CARGO_BIN_EXE_bellscope");
    let ok = Command::new(bin).args(["local-bound", "row:14"]).env("BELLSCOPE_THREADS", "2").output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&ok.stdout).trim_end(), "max 2 min -3");
    let bad = Command::new(bin).args(["local-bound", "row:14"]).env("BELLSCOPE_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let usage = Command::new(bin).arg("frobnicate").output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
    let help = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
}
