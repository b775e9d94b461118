use std::fs;
use std::process::{Command, Output};

use fuchsian_walk::group;
use fuchsian_walk::stats;
use fuchsian_walk::walk::{self, StepLaw};

fn fwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fwalk")).args(args).output().expect("run fwalk")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn walk_is_byte_identical_across_runs_and_threads() {
    let base = ["walk", "--n", "40", "--N", "500", "--seed", "9", "--keep-words"];
    let a = fwalk(&base);
    let b = fwalk(&base);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let mut one = base.to_vec();
    one.extend(["--threads", "1"]);
    let mut eight = base.to_vec();
    eight.extend(["--threads", "8"]);
    assert_eq!(fwalk(&one).stdout, a.stdout);
    assert_eq!(fwalk(&eight).stdout, a.stdout);
    let other_seed = fwalk(&["walk", "--n", "40", "--N", "500", "--seed", "10", "--keep-words"]);
    assert_ne!(other_seed.stdout, a.stdout);
}

#[test]
fn walk_csv_header_and_rows() {
    let o = fwalk(&["walk", "--n", "5", "--N", "3", "--seed", "7"]);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], walk::CSV_HEADER.join(","));
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0,5,"));
}

#[test]
fn out_flag_writes_the_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.csv");
    let args = ["walk", "--n", "12", "--N", "50", "--seed", "1"];
    let direct = fwalk(&args);
    let mut with_out = args.to_vec();
    let p = path.to_str().unwrap();
    with_out.extend(["--out", p]);
    let o = fwalk(&with_out);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert_eq!(fs::read(&path).unwrap(), direct.stdout);
}

#[test]
fn estimate_from_csv_matches_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("walk.csv");
    let csv = csv.to_str().unwrap();
    for group in ["sanov", "pants:1.5,2,2.5"] {
        let w = fwalk(&["--group", group, "walk", "--n", "80", "--N", "2000", "--seed", "4", "--out", csv]);
        assert_eq!(w.status.code(), Some(0));
        let from_csv = fwalk(&["--group", group, "estimate", "--n", "80", "--N", "2000", "--seed", "4", "--input", csv]);
        let direct = fwalk(&["--group", group, "estimate", "--n", "80", "--N", "2000", "--seed", "4"]);
        assert_eq!(from_csv.status.code(), Some(0));
        assert_eq!(from_csv.stdout, direct.stdout, "{group}");

        // And the JSON agrees bitwise with the library estimators.
        let gens = if group == "sanov" { group::sanov() } else { group::pants(1.5, 2.0, 2.5, true).unwrap() };
        let samples = walk::simulate_batch(&gens, &StepLaw::uniform(4).unwrap(), 80, 2000, 4, false).unwrap();
        let est = stats::estimate_laws(&samples).unwrap();
        let json: serde_json::Value = serde_json::from_slice(&direct.stdout).unwrap();
        assert_eq!(json["lambda1_hat"].as_f64().unwrap().to_bits(), est.lambda1_hat.to_bits());
        assert_eq!(json["phi_hat"].as_f64().unwrap().to_bits(), est.phi_hat.to_bits());
        assert_eq!(json["N"], 2000);
        assert_eq!(json["seed"], 4);
        assert_eq!(json["group"], group);
    }
}

#[test]
fn summary_json_keys() {
    let o = fwalk(&["estimate", "--n", "30", "--N", "300"]);
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for key in [
        "group", "n", "N", "seed", "lambda1_hat", "lambda1_se", "phi_hat", "hyperbolic_fraction", "ks_log_norm",
        "ks_geom", "ldp", "llt",
    ] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert_eq!(json["n"], 30);
    assert_eq!(json["seed"], 0);
}

#[test]
fn validate_reports_and_exit_codes() {
    let o = fwalk(&["validate", "--group", "sanov"]);
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json["unbounded"], "Verified");
    assert_eq!(json["strongly_irreducible"], "Verified");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("diag.json");
    fs::write(&path, r#"{"generators":[{"name":"A","matrix":[[2,0],[0,0.5]]}]}"#).unwrap();
    let p = path.to_str().unwrap();
    let o = fwalk(&["--group", p, "validate"]);
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json["strongly_irreducible"], "Inconclusive");
    assert_eq!(fwalk(&["--group", p, "--require-hypotheses", "validate"]).status.code(), Some(1));
    assert_eq!(fwalk(&["--group", p, "--require-hypotheses", "walk", "--n", "3", "--N", "2"]).status.code(), Some(1));
    assert_eq!(fwalk(&["--require-hypotheses", "walk", "--n", "3", "--N", "2"]).status.code(), Some(0));
}

#[test]
fn argument_and_config_errors_exit_2() {
    assert_eq!(fwalk(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(fwalk(&["walk", "--n", "abc"]).status.code(), Some(2));
    assert_eq!(fwalk(&["--group", "pants:1,2", "walk"]).status.code(), Some(2));
    assert_eq!(fwalk(&["--group", "/missing/group.json", "walk"]).status.code(), Some(2));
    assert_eq!(fwalk(&["--weights", "1,2", "walk", "--n", "2", "--N", "2"]).status.code(), Some(2));
    assert_eq!(fwalk(&["--weights", "1,-1,1,1", "walk", "--n", "2", "--N", "2"]).status.code(), Some(2));
    assert_eq!(fwalk(&["llt", "--a1", "1", "--a2", "0", "--n", "5", "--N", "10"]).status.code(), Some(2));
    assert_eq!(fwalk(&["exact", "--n", "14"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"generators":[{"name":"A","matrix":[[2,0],[0,1]]}]}"#).unwrap();
    assert_eq!(fwalk(&["--group", path.to_str().unwrap(), "walk"]).status.code(), Some(2));
}

#[test]
fn numeric_failure_exits_3() {
    assert_eq!(fwalk(&["pants", "--l1", "1500", "--l2", "1", "--l3", "1"]).status.code(), Some(3));
}

#[test]
fn pants_prints_traces() {
    let o = fwalk(&["pants", "--l1", "2.633916", "--l2", "2.633916", "--l3", "2.633916"]);
    assert_eq!(o.status.code(), Some(0));
    let traces: Vec<f64> = stdout(&o)
        .lines()
        .filter_map(|l| l.strip_prefix("tr ")?.split(" = ").nth(1)?.split_whitespace().next()?.parse().ok())
        .collect();
    assert_eq!(traces.len(), 3);
    for t in traces {
        assert!((t.abs() - 4.0).abs() <= 1e-5, "{t}");
    }
}

#[test]
fn weighted_walks_differ_from_uniform() {
    let uniform = fwalk(&["walk", "--n", "10", "--N", "50"]);
    let weighted = fwalk(&["--weights", "4,1,1,1", "walk", "--n", "10", "--N", "50"]);
    assert_eq!(weighted.status.code(), Some(0));
    assert_ne!(uniform.stdout, weighted.stdout);
}

#[test]
fn exact_json_sums_to_one() {
    let o = fwalk(&["--group", "pants:1,1,1", "exact", "--n", "3"]);
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let total: f64 = json["atoms"].as_array().unwrap().iter().map(|a| a["probability"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!((json["total_probability"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn ldp_and_llt_summaries() {
    let o = fwalk(&["ldp", "--ns", "20,40,60", "--N", "2000", "--t0", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let ldp = json["ldp"].as_array().unwrap();
    assert_eq!(ldp.len(), 3);
    assert_eq!(ldp[0]["n"], 20);
    assert_eq!(json["n"], 60);

    let o = fwalk(&["llt", "--n", "50", "--N", "2000", "--a1", "-0.5", "--a2", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json["llt"]["a1"].as_f64(), Some(-0.5));
    assert!(json["llt"]["empirical"].as_f64().unwrap() > 0.0);
}

#[test]
fn lil_writes_normalized_path() {
    let o = fwalk(&["lil", "--nmax", "5000", "--stride", "50", "--lambda1", "0.32", "--phi", "0.33"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,log_norm,value");
    assert_eq!(lines.len(), 1 + 100);
    assert!(String::from_utf8_lossy(&o.stderr).contains("running_max"));
}

#[test]
fn conj_clm_emits_both_kinds() {
    let o = fwalk(&["conj-clm", "--l1", "1", "--l2", "2", "--l3", "3", "--n", "12", "--N", "300", "--seed", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), ["index", "kind", "word", "geom_length", "normalized"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 600);
    assert_eq!(rows.iter().filter(|r| &r[1] == "cyclic").count(), 300);
    for r in &rows {
        assert_eq!(r[2].split_whitespace().count(), 12);
    }
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("reduced: kappa_hat=") && stderr.contains("cyclic: kappa_hat="));
    let again = fwalk(&["conj-clm", "--l1", "1", "--l2", "2", "--l3", "3", "--n", "12", "--N", "300", "--seed", "2", "--threads", "3"]);
    assert_eq!(again.stdout, o.stdout);
}

#[test]
fn help_exits_zero() {
    let o = fwalk(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("conj-clm"));
}
