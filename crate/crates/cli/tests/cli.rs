use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ratechannel")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("bad JSON ({e}): {}\nstderr: {}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn ok(args: &[&str]) -> Value {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    json(&out)
}

fn h2(p: f64) -> f64 {
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

#[test]
fn rate_channel_on_bsc() {
    let v = ok(&["rate-channel", &fixture("uniform2.json"), &fixture("bsc01.json")]);
    assert_eq!(v["result"]["status"], "optimal");
    let rate = v["result"]["rate_bits"].as_f64().unwrap();
    assert!((rate - (1.0 - h2(0.1))).abs() <= 1e-6);
    assert_eq!(v["manifest"]["command"], "rate-channel");
}

#[test]
fn identity_channel_pins_the_source() {
    let v = ok(&["rate-channel", &fixture("skewed2.json"), &fixture("identity2.json")]);
    let rate = v["result"]["rate_bits"].as_f64().unwrap();
    assert!((rate - h2(0.3)).abs() <= 1e-9);
}

#[test]
fn source_outside_hull_is_infeasible() {
    let out = run(&["rate-channel", &fixture("outside_hull.json"), &fixture("bsc01.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["result"]["status"], "infeasible");
}

#[test]
fn diagonal_quantum_instance_matches_classical() {
    let q = ok(&["qc-rate", &fixture("rho_diag.json"), &fixture("cq_diag.json")]);
    let c = ok(&["rate-channel", &fixture("source_diag.json"), &fixture("channel_diag.json")]);
    let (q, c) = (q["result"]["rate_bits"].as_f64().unwrap(), c["result"]["rate_bits"].as_f64().unwrap());
    assert!((q - c).abs() <= 1e-8, "{q} vs {c}");
    assert!(q > 0.1);
}

#[test]
fn trivial_quantum_instances_cost_nothing() {
    for (rho, cq) in [("rho_diag.json", "cq_constant.json"), ("rho_pure.json", "cq_trivial_r.json")] {
        let v = ok(&["qc-rate", &fixture(rho), &fixture(cq)]);
        assert!(v["result"]["rate_bits"].as_f64().unwrap().abs() <= 1e-9);
    }
}

#[test]
fn wyner_ziv_fixtures() {
    let v = ok(&["wz", &fixture("wz_no_side_info.json"), "--restarts", "16"]);
    assert!((v["result"]["rate_bits"].as_f64().unwrap() - (1.0 - h2(0.1))).abs() <= 5e-3);
    let v = ok(&["wz", &fixture("wz_perfect_side_info.json"), "--restarts", "16"]);
    assert!(v["result"]["rate_bits"].as_f64().unwrap().abs() <= 1e-9);
}

#[test]
fn projection_fixtures() {
    let v = ok(&["project", &fixture("system_point.json"), &fixture("x0_point.json")]);
    let x: Vec<f64> = serde_json::from_value(v["result"]["x"].clone()).unwrap();
    assert!((x[0] - 0.3).abs() <= 1e-12 && (x[1] - 0.7).abs() <= 1e-12);
    let v = ok(&["project", &fixture("system_face.json"), &fixture("x0_face.json")]);
    let x: Vec<f64> = serde_json::from_value(v["result"]["x"].clone()).unwrap();
    for (a, b) in x.iter().zip([0.15, 0.35, 0.5]) {
        assert!((a - b).abs() <= 1e-12);
    }
    assert!((v["result"]["l1_distance"].as_f64().unwrap() - 0.2).abs() <= 1e-12);
    assert!(v["result"]["residual_inf"].as_f64().unwrap() <= 1e-9);
    let out = run(&["project", &fixture("system_infeasible.json"), &fixture("x0_point.json")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rate_distortion_point_and_sweep() {
    let v = ok(&["rd", &fixture("uniform2.json"), "--distortion", &fixture("hamming2.json"), "--level", "0.1"]);
    assert!((v["result"]["rate_bits"].as_f64().unwrap() - (1.0 - h2(0.1))).abs() <= 1e-5);
    let out = run(&["rd", &fixture("uniform2.json"), "--distortion", &fixture("hamming2.json"), "--sweep", "level=0:0.5:0.25"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# ratechannel-rd csv v1");
    assert_eq!(lines[1], "level,rate_bits,achieved_distortion,slope");
    assert_eq!(lines.len(), 5);
}

#[test]
fn induced_distortion_bridge() {
    let v = ok(&["bridge-check", &fixture("uniform2.json"), &fixture("bsc01.json"), "--c", "1", "--b", "0"]);
    assert_eq!(v["result"]["equal"], true);
    assert!((v["result"]["level"].as_f64().unwrap() - h2(0.1)).abs() <= 1e-9);
    // Hamming-inducing pair: level 0.1.
    let c = 1.0 / 9f64.log2();
    let b = c * 0.9f64.log2();
    let (c, b) = (c.to_string(), b.to_string());
    let v = ok(&["bridge-check", &fixture("uniform2.json"), &fixture("bsc01.json"), "--c", &c, "--b", &b]);
    assert_eq!(v["result"]["equal"], true);
    assert!((v["result"]["level"].as_f64().unwrap() - 0.1).abs() <= 1e-9);
    let out = run(&["bridge-check", &fixture("uniform2.json"), &fixture("bsc01.json"), "--sweep", "c=0.5:1.5:0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# ratechannel-bridge csv v1\nc,level,rd_rate,rate_channel_rate,difference,equal\n"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn simulation_is_reproducible_and_writes_csv() {
    let dir = std::env::temp_dir().join(format!("ratechannel-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("sim.csv");
    let csv_s = csv.to_string_lossy().into_owned();
    let a = ok(&["simulate", &fixture("simulate_side_info.json"), "--csv", &csv_s]);
    let b = ok(&["simulate", &fixture("simulate_side_info.json")]);
    assert_eq!(a["rows"], b["rows"]);
    assert_eq!(a["master_seed"], 7);
    let rows = a["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        let exact = r["exact_tv"].as_f64().unwrap();
        let diag = r["diagnostic_tv"].as_f64().unwrap();
        let se = r["diagnostic_se"].as_f64().unwrap();
        assert!(diag <= exact + 3.0 * se);
    }
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# ratechannel-sim csv v1");
    assert_eq!(
        lines[1],
        "n,R,R_bar,codebook_size,bins,exact_tv,diagnostic_tv,diagnostic_se,distortion_mean,distortion_se,\
         encode_failure_rate,decode_fallback_rate,spmf_failure_rate,spmf_mode"
    );
    assert_eq!(lines.len(), 4);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn simulation_budget_is_enforced() {
    let out = run(&["simulate", &fixture("simulate_budget.json")]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_input_exits_one() {
    let dir = std::env::temp_dir().join(format!("ratechannel-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    let out = run(&["rate-channel", &bad.to_string_lossy(), &fixture("bsc01.json")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    let out = run(&["rate-channel", &fixture("uniform2.json"), &fixture("missing.json")]);
    assert_eq!(out.status.code(), Some(1));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn output_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("ratechannel-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("r.json");
    let out = run(&["-o", &path.to_string_lossy(), "rate-channel", &fixture("uniform2.json"), &fixture("bsc01.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(v["result"]["rate_bits"].is_number());
    std::fs::remove_dir_all(&dir).ok();
}
