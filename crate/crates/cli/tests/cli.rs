use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const TABLE1: &str = include_str!("../configs/table1.json");

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssi-relay"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, edit: impl FnOnce(&mut Value)) -> String {
    let mut v: Value = serde_json::from_str(TABLE1).unwrap();
    edit(&mut v);
    let path = dir.join("cfg.json");
    std::fs::write(&path, v.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn error_record(out: &Output) -> Value {
    let line = String::from_utf8_lossy(&out.stderr);
    let last = line.lines().last().expect("error record");
    serde_json::from_str(last).expect("machine-readable error")
}

fn small_sweep(v: &mut Value) {
    v["relays"].as_array_mut().unwrap().truncate(2);
    v["sweep"] = serde_json::json!({"start_db": 0.0, "stop_db": 20.0, "step_db": 10.0});
    v["mc"]["samples"] = 4000.into();
}

#[test]
fn compute_reports_the_ssi_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), |v| {
        v["protocols"] = serde_json::json!(["ssi", "ap"])
    });
    let out = run(&["compute", "--config", &cfg]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let recs: Value = serde_json::from_slice(&out.stdout).unwrap();
    let ssi = &recs[0];
    assert_eq!(ssi["protocol"], "ssi");
    assert_eq!(ssi["metric"], "bep_bpsk");
    let v = ssi["analytic_value"].as_f64().unwrap();
    assert!((v - 2.0142e-2).abs() < 1e-5, "{v}");
    assert!(ssi["normalization_residual"].as_f64().unwrap() < 1e-8);
    assert!(recs[1]["analytic_value"].as_f64().unwrap() > 3.0 * v);
}

#[test]
fn csi_has_no_analytic_value() {
    let out = run(&["compute", "--config", "builtin:table1"]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["error"]["kind"], "unsupported");
    assert!(out.stdout.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), |v| {
        small_sweep(v);
        v["mc"]["enabled"] = false.into();
    });
    let out = run(&["sweep", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"]["kind"], "unsupported");
}

#[test]
fn config_errors_carry_field_paths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), |v| v["relays"][2]["hop1"]["m"] = "one".into());
    let out = run(&["compute", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["error"]["kind"], "config");
    assert_eq!(rec["error"]["path"], "relays[2].hop1.m");

    let cfg = config(dir.path(), |v| {
        v["relays"][1]["hop2"]["omega"] = (-1.0).into()
    });
    let rec = error_record(&run(&["compute", "--config", &cfg]));
    assert_eq!(rec["error"]["path"], "relays[1].hop2");

    let out = run(&["compute", "--config", "/nonexistent/x.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["error"]["kind"], "io");

    let out = run(&["compute"]);
    assert_eq!(error_record(&out)["error"]["path"], "--config");
}

#[test]
fn sweep_csv_is_stable_and_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), small_sweep);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let out = run(&["sweep", "--config", &cfg, "--output", a.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = run(&[
        "sweep",
        "--config",
        &cfg,
        "--workers",
        "4",
        "--output",
        b.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "snr_db,protocol,metric,analytic,analytic_err,mc_mean,mc_stderr,samples,norm_residual,flag"
    );
    // 3 points × 4 protocols, ordered by (snr, protocol)
    assert_eq!(lines.len(), 13);
    let protocols: Vec<&str> = lines[1..5]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(protocols, ["ssi", "rr", "ap", "csi"]);
    for line in &lines[1..] {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 10);
        assert_eq!(f[7], "4000");
        let mantissa = f[5].split('e').next().unwrap();
        assert_eq!(mantissa.replace(['.', '-'], "").len(), 17, "{line}");
        if f[1] == "csi" {
            assert!(f[3].is_empty() && f[8].is_empty());
        } else {
            let analytic: f64 = f[3].parse().unwrap();
            let mc: f64 = f[5].parse().unwrap();
            let se: f64 = f[6].parse().unwrap();
            assert!((analytic - mc).abs() < 5.0 * se + 1e-12, "{line}");
            assert!(f[8].parse::<f64>().unwrap() < 1e-4);
            assert!(f[9].is_empty());
        }
    }
    let c = dir.path().join("c.csv");
    run(&[
        "sweep",
        "--config",
        &cfg,
        "--seed",
        "99",
        "--output",
        c.to_str().unwrap(),
    ]);
    assert_ne!(text, std::fs::read_to_string(&c).unwrap());
}

#[test]
fn sweep_over_shadowing_figure_with_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), |v| {
        v["protocols"] = serde_json::json!(["ssi", "ap"]);
        v["metric"] = serde_json::json!({"kind": "bep", "modulation": "bdpsk"});
        v["sweep"] = serde_json::json!({
            "start_db": 30.0, "stop_db": 30.0, "step_db": 1.0, "hop1_n": [0.5, 2, 16]
        });
        v["mc"]["enabled"] = false.into();
    });
    let csv = dir.path().join("n.csv");
    let out = run(&[
        "sweep",
        "--config",
        &cfg,
        "--output",
        csv.to_str().unwrap(),
        "--emit-plot",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("hop1_n,snr_db,"));
    assert_eq!(lines.len(), 7);
    let value = |l: &str| l.split(',').nth(4).unwrap().parse::<f64>().unwrap();
    let gaps: Vec<f64> = lines[1..]
        .chunks(2)
        .map(|p| (value(p[0]) - value(p[1])).abs())
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    let script = std::fs::read_to_string(dir.path().join("n.gp")).unwrap();
    assert!(script.contains("set logscale y"));
    assert!(script.contains("set logscale x"));
    assert!(script.contains("'n.csv'"));
    assert!(!script.contains("(sim)"));
}

#[test]
fn plot_needs_an_output_file() {
    let out = run(&["sweep", "--config", "builtin:table1", "--emit-plot"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"]["path"], "--emit-plot");
}

#[test]
fn simulate_reports_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), |v| v["mc"]["samples"] = 20_000.into());
    let out = run(&["simulate", "--config", &cfg]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let recs: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(recs.as_array().unwrap().len(), 4);
    let csi = &recs[3];
    assert_eq!(csi["protocol"], "csi");
    assert_eq!(csi["samples"], 20_000);
    assert!(csi["mean"].as_f64().unwrap() < recs[0]["mean"].as_f64().unwrap());
}

#[test]
fn check_passes_and_runs_the_fast_path_on_gk_links() {
    let out = run(&["check", "--config", "builtin:table1"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS selection"));
    assert!(text.contains("SKIP gk_fast_path"));
    assert!(text.ends_with("0 failed, 1 skipped\n"), "{text}");

    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), |v| {
        for r in v["relays"].as_array_mut().unwrap() {
            r["hop1"]["xi"] = 1.0.into();
            r["hop1"]["zeta"] = 1.0.into();
        }
        v["protocols"] = serde_json::json!(["ssi", "rr"]);
        v.as_object_mut().unwrap().remove("sweep");
    });
    let out = run(&["check", "--config", &cfg]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.matches("PASS gk_fast_path").count(), 2);
    assert_eq!(text.matches("PASS normalization").count(), 2);
}

#[test]
fn check_failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), |v| {
        v["engine"]["norm_threshold"] = 1e-300.into();
        v["protocols"] = serde_json::json!(["ap"]);
        v.as_object_mut().unwrap().remove("sweep");
    });
    let out = run(&["check", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL normalization"));
    assert_eq!(error_record(&out)["error"]["kind"], "check_failed");
}
