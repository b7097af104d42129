use std::path::Path;
use std::process::{Command, Output};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use resolveq::core::spectral::{frequency_grid, synthesize_reflection, Environment, ResonatorParams};
use resolveq::dataio::trace_to_csv;
use serde_json::Value;

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_resolveq"));
    c.args(args).env_remove("RESOLVEQ_THREADS").env("SOURCE_DATE_EPOCH", "1700000000");
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn ok_json(args: &[&str]) -> Value {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn within(v: f64, target: f64, sigma: f64) -> bool {
    (v - target).abs() <= sigma
}

#[test]
fn extract_f4_reproduces_table() {
    let v = ok_json(&["extract", "fixtures://F4"]);
    let c = &v["classification"];
    for (k, target, sigma) in [("r_s_ohm", 6.48e-6, 0.43e-6), ("tan_delta", 0.11, 0.01), ("r_seam_ohm_m", 39.1e-6, 3.5e-6)] {
        assert_eq!(c[k]["status"], "resolved", "{k}");
        assert!(within(c[k]["value"].as_f64().unwrap(), target, sigma), "{k}: {}", c[k]["value"]);
    }
    assert_eq!(v["monte_carlo"]["samples"], 5000);
    assert_eq!(v["residuals"].as_array().unwrap().len(), 3);
}

#[test]
fn predict_with_zero_losses_is_infinite() {
    let dir = tempfile::tempdir().unwrap();
    let losses = write(dir.path(), "x.json", r#"{"r_s_ohm": 0, "tan_delta": 0, "r_seam_ohm_m": 0}"#);
    let v = ok_json(&["predict", "fixtures://P_FWGMR", &losses]);
    for m in v["modes"].as_array().unwrap() {
        assert_eq!(m["q_int"], "inf");
    }
    let o = run(&["--format", "csv", "predict", "fixtures://P_FWGMR", &losses]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().skip(2).all(|l| l.ends_with(",inf")), "{text}");
}

#[test]
fn sensitivity_plateau_for_loss_tangent() {
    let v = ok_json(&["sensitivity", "fixtures://P_FWGMR", "--channel", "tan_delta", "--fixed", "r_seam=1e-4"]);
    let m = v["minimum_resolvable"]["result"]["value"].as_f64().unwrap();
    assert!(within(m, 1.5e-4, 0.3e-4), "{m}");
    let boundary = v["boundary"].as_array().unwrap();
    assert!(!boundary.is_empty());
    let plateau = boundary[0][1].as_f64().unwrap();
    assert!(within(plateau, 1.5e-4, 0.3e-4), "{plateau}");
}

#[test]
fn budget_rows_are_fractions() {
    let dir = tempfile::tempdir().unwrap();
    let losses = write(dir.path(), "x.json", r#"{"r_s_nohm": 500, "tan_delta": 0.033, "r_seam_uohm_m": 26}"#);
    let v = ok_json(&["budget", "fixtures://P_FWGMR", &losses]);
    for m in v["modes"].as_array().unwrap() {
        let s: f64 = ["conductor", "dielectric", "seam"].iter().map(|k| m[k].as_f64().unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn fit_spectrum_reads_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let params = ResonatorParams::new(6e9, 1e6, 2e6, 0.05).unwrap();
    let freqs = frequency_grid(6e9, params.q_loaded(), 10.0, 201);
    let env = Environment {
        amplitude: 0.5,
        phase: 0.3,
        delay: 20e-9,
    };
    let t = synthesize_reflection(&params, &env, 0.0, &freqs, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let path = write(dir.path(), "t.csv", &trace_to_csv(&t));
    let v = ok_json(&["fit-spectrum", &path, "--label", "M1"]);
    let q = v["q_int"].as_f64().unwrap();
    assert!(((q - 1e6) / 1e6).abs() < 1e-3, "{q}");
    assert_eq!(v["measurement"]["label"], "M1");
}

#[test]
fn infer_gap_on_bundled_table() {
    let dir = tempfile::tempdir().unwrap();
    let f = 3.434 * (120.0f64 / 100.0).powf(-0.5);
    let freqs = write(
        dir.path(),
        "f.json",
        &format!(r#"{{"modes": [{{"label": "DFM-1", "freq_ghz": {f}}}, {{"label": "CWGM-1", "freq_ghz": 10.906}}]}}"#),
    );
    let v = ok_json(&["infer-gap", "fixtures://gap_table", &freqs]);
    let g = v["gap_um"].as_f64().unwrap();
    assert!((g - 120.0).abs() < 0.6, "{g}");
    assert_eq!(v["flagged"], false);
}

#[test]
fn fixtures_lists_and_dumps() {
    let v = ok_json(&["fixtures"]);
    assert_eq!(v["devices"].as_array().unwrap().len(), 16);
    let d = ok_json(&["fixtures", "F4"]);
    assert_eq!(d["modes"].as_array().unwrap().len(), 3);
}

#[test]
fn exit_codes_and_error_json() {
    let dir = tempfile::tempdir().unwrap();

    let o = run(&["extract", "/definitely/missing.json"]);
    assert_eq!(code(&o), 3);
    assert_eq!(stderr_json(&o)["error"]["kind"], "io");

    let bad = write(dir.path(), "bad.json", "{\"device_id\": 3}");
    let o = run(&["extract", &bad]);
    assert_eq!(code(&o), 1);
    assert_eq!(stderr_json(&o)["error"]["kind"], "validation");

    let o = run(&["--bound-rule", "median", "extract", "fixtures://F4"]);
    assert_eq!(code(&o), 1);
    let o = run(&["--eps-y", "2", "extract", "fixtures://F4"]);
    assert_eq!(code(&o), 1);
    let o = run(&["no-such-command"]);
    assert_eq!(code(&o), 1);
    assert!(stderr_json(&o)["error"]["message"].is_string());

    let two_modes = write(
        dir.path(),
        "two.json",
        r#"{"device_id": "T", "geometry": "other", "modes": [
            {"label": "A", "freq_ghz": 5, "q_int": 1e6, "inv_g_per_ohm": 0.1, "p_ma": 1e-6, "y_seam_per_ohm_m": 1e-4},
            {"label": "B", "freq_ghz": 6, "q_int": 2e6, "inv_g_per_ohm": 0.2, "p_ma": 1e-6, "y_seam_per_ohm_m": 1e-5}
        ]}"#,
    );
    let o = run(&["extract", &two_modes]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stderr_json(&o)["error"]["kind"], "solver");

    assert_eq!(code(&run(&["--help"])), 0);
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn repeated_runs_are_byte_identical_and_carry_the_manifest_hash() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let args = ["--out", &out, "--seed", "7", "--mc-samples", "2000", "extract", "fixtures://E2"];
    assert!(run(&args).status.success());
    let first = artifacts(dir.path());
    assert!(run_env(&args, &[("SOURCE_DATE_EPOCH", "1")]).status.success());
    let second = artifacts(dir.path());

    let names: Vec<_> = first.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["extraction.json", "manifest.json", "residuals.csv"]);
    assert_eq!(first[0], second[0]);
    assert_eq!(first[2], second[2]);

    let manifest: Value = serde_json::from_slice(&first[1].1).unwrap();
    let later: Value = serde_json::from_slice(&second[1].1).unwrap();
    assert_ne!(manifest["timestamp"], later["timestamp"]);
    let hash = manifest["manifest_sha256"].as_str().unwrap();
    assert_eq!(later["manifest_sha256"], hash);
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["inputs"][0]["name"], "fixtures://E2");

    let extraction: Value = serde_json::from_slice(&first[0].1).unwrap();
    assert_eq!(extraction["manifest_sha256"], hash);
    let csv = String::from_utf8(first[2].1.clone()).unwrap();
    assert_eq!(csv.lines().next().unwrap(), format!("# manifest_sha256: {hash}"));
}

#[test]
fn stdout_is_reproducible_and_timestamp_free() {
    let args = ["--seed", "3", "extract", "fixtures://F2"];
    let a = run(&args);
    let b = run_env(&args, &[("SOURCE_DATE_EPOCH", "5")]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn thread_count_does_not_change_results() {
    let args = ["extract", "fixtures://E1"];
    let one = run_env(&args, &[("RESOLVEQ_THREADS", "1")]);
    let four = run_env(&args, &[("RESOLVEQ_THREADS", "4")]);
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);

    let s = ["sensitivity", "fixtures://P_ellip", "--channel", "r_s"];
    assert_eq!(
        run_env(&s, &[("RESOLVEQ_THREADS", "1")]).stdout,
        run_env(&s, &[("RESOLVEQ_THREADS", "3")]).stdout
    );
    assert_eq!(code(&run_env(&args, &[("RESOLVEQ_THREADS", "zero")])), 1);
}

#[test]
fn seed_changes_monte_carlo() {
    let a = ok_json(&["--seed", "1", "extract", "fixtures://F4"]);
    let b = ok_json(&["--seed", "2", "extract", "fixtures://F4"]);
    assert_ne!(a["monte_carlo"]["mean"], b["monte_carlo"]["mean"]);
    assert_eq!(a["x_hat"], b["x_hat"]);
}

#[test]
fn config_precedence() {
    let defaults = ok_json(&["--show-config"]);
    assert_eq!(defaults["mc_samples"], 5000);
    assert_eq!(defaults["bound_rule"], "sigma-crossing:2");

    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"seed": 11, "mc_samples": 300, "eps_y": 0.1}"#);
    let from_file = ok_json(&["--config", &cfg, "--show-config"]);
    assert_eq!(from_file["seed"], 11);
    assert_eq!(from_file["mc_samples"], 300);

    let flags = ok_json(&["--config", &cfg, "--seed", "12", "--eps-y", "DFM=0.2", "--show-config"]);
    assert_eq!(flags["seed"], 12);
    assert_eq!(flags["mc_samples"], 300);
    assert_eq!(flags["eps_y"], 0.1);
    assert_eq!(flags["eps_y_modes"]["DFM"], 0.2);

    let typo = write(dir.path(), "t.json", r#"{"sed": 1}"#);
    assert_eq!(code(&run(&["--config", &typo, "--show-config"])), 1);
}

#[test]
fn eps_y_override_widens_uncertainty() {
    let base = ok_json(&["extract", "fixtures://F4"]);
    let wide = ok_json(&["--eps-y", "0.1", "extract", "fixtures://F4"]);
    let s = |v: &Value| v["unconstrained"]["sigma"]["r_s_ohm"].as_f64().unwrap();
    assert!((s(&wide) / s(&base) - 2.0).abs() < 1e-9);
}
