mod common;

use common::*;
use invizo::enhancement::Prediction;
use invizo::imaging::{io, RasterImage};
use std::path::Path;
use std::process::{Command, Output};

fn invizo(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_invizo"));
    cmd.args(args).env_remove("INVIZO_CONFIG");
    if let Some(c) = config {
        cmd.env("INVIZO_CONFIG", c);
    }
    cmd.output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn run_args<'a>(f: &'a Fixture, out: &'a Path) -> Vec<&'a str> {
    vec!["run", "--image", s(&f.image), "--template", s(&f.template), "--out", s(out), "--checkpoint", s(&f.checkpoint)]
}

#[test]
fn run_writes_one_prediction_per_shape_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_fixture(dir.path());
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let out = invizo(&run_args(&f, &a), None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(invizo(&run_args(&f, &b), None).status.code(), Some(0));
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let preds: Vec<Prediction> = serde_json::from_slice(&bytes).unwrap();
    let ids: Vec<&str> = preds.iter().map(|p| p.field_id.as_str()).collect();
    assert_eq!(ids, ["amount", "status", "notes"]);
    assert!(preds.iter().all(|p| p.registration == invizo::enhancement::RegistrationMode::Matched));
}

#[test]
fn checkpoint_can_come_from_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_fixture(dir.path());
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, format!(r#"{{"checkpoint": {:?}, "seed": 7}}"#, s(&f.checkpoint))).unwrap();
    let out_path = dir.path().join("p.json");
    let out = invizo(&["run", "--image", s(&f.image), "--template", s(&f.template), "--out", s(&out_path)], Some(&cfg));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_fixture(dir.path());
    let out_path = dir.path().join("p.json");
    let missing = dir.path().join("nope.json");
    let out = invizo(
        &["run", "--image", s(&f.image), "--template", s(&missing), "--out", s(&out_path), "--checkpoint", s(&f.checkpoint)],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));

    let out = invizo(&["run", "--image", s(&f.image), "--template", s(&f.template), "--out", s(&out_path)], None);
    assert_eq!(out.status.code(), Some(1), "no checkpoint configured");

    let out = invizo(&["run", "--bogus"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let bad_cfg = dir.path().join("bad.json");
    std::fs::write(&bad_cfg, "{not json").unwrap();
    assert_eq!(invizo(&run_args(&f, &out_path), Some(&bad_cfg)).status.code(), Some(1));
}

#[test]
fn registration_failure_exits_two_unless_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_fixture(dir.path());
    io::save(&RasterImage::filled(400, 300, 255), &f.image).unwrap();
    let out_path = dir.path().join("p.json");
    let out = invizo(&run_args(&f, &out_path), None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("registration"));
    let mut args = run_args(&f, &out_path);
    args.push("--fallback-on-registration-fail");
    assert_eq!(invizo(&args, None).status.code(), Some(0));
    let preds: Vec<Prediction> = serde_json::from_slice(&std::fs::read(&out_path).unwrap()).unwrap();
    assert_eq!(preds.len(), 3);
    assert!(preds.iter().all(|p| p.flags.iter().any(|f| f == "RegistrationFallback")));
}

#[test]
fn eval_reports_zero_cer_on_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let refs = dir.path().join("refs.tsv");
    std::fs::write(&refs, "a\tمرحبا بكم\nb\t١٢٣\n").unwrap();
    let (tsv, json) = (dir.path().join("r.tsv"), dir.path().join("r.json"));
    let out = invizo(
        &["eval", "--refs", s(&refs), "--hyps", s(&refs), "--report-tsv", s(&tsv), "--report-json", s(&json)],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("cer\t0.000000"));
    assert!(std::fs::read_to_string(&tsv).unwrap().starts_with("id\tcer\twer"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert_eq!(report["corpus_cer"], 0.0);

    let hyps = dir.path().join("hyps.tsv");
    std::fs::write(&hyps, "a\tمرحبا بكم\nb\t١٢٤\n").unwrap();
    let out = invizo(&["eval", "--refs", s(&refs), "--hyps", s(&hyps)], None);
    // One substitution over 12 reference characters.
    assert!(String::from_utf8_lossy(&out.stdout).contains(&format!("cer\t{:.6}", 1.0 / 12.0)));

    std::fs::write(&hyps, "a\tx\n").unwrap();
    assert_eq!(invizo(&["eval", "--refs", s(&refs), "--hyps", s(&hyps)], None).status.code(), Some(1));
}

#[test]
fn eval_det_pools_images() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.json");
    let pred = dir.path().join("pred.json");
    let q = |x: f64| format!("[[{x},0],[{},0],[{},10],[{x},10]]", x + 10.0, x + 10.0);
    std::fs::write(&gt, format!(r#"{{"p1": [{}, {}], "p2": [{}]}}"#, q(0.0), q(50.0), q(0.0))).unwrap();
    std::fs::write(&pred, format!(r#"{{"p1": [{}], "p2": [{}]}}"#, q(0.0), q(0.0))).unwrap();
    let out = invizo(&["eval-det", "--gt", s(&gt), "--pred", s(&pred)], None);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["precision"], 1.0);
    assert!((v["recall"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!((v["f_measure"].as_f64().unwrap() - 0.8).abs() < 1e-12);
}

#[test]
fn synth_then_train_produces_a_loadable_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = invizo(&["synth", "--kind", "digits", "--count", "6", "--seed", "3", "--out", s(&data)], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = data.join("manifest.tsv");
    assert_eq!(std::fs::read_to_string(&manifest).unwrap().lines().count(), 6);

    let cfg = dir.path().join("train.json");
    std::fs::write(
        &cfg,
        r#"{"d_model": 8, "enc_layers": 1, "dec_layers": 1, "heads": 2, "ff_dim": 16, "dropout": 0.0,
            "input_width": 128, "input_height": 16, "max_len": 64, "conv_channels": [2, 3, 4],
            "batch_size": 3, "epochs": 5, "max_steps": 3}"#,
    )
    .unwrap();
    let ckpt = dir.path().join("m.ckpt");
    let out = invizo(&["train", "--manifest", s(&manifest), "--config", s(&cfg), "--checkpoint", s(&ckpt), "--log-every", "1"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stderr).lines().filter(|l| l.starts_with("step ")).count(), 3);
    let model = invizo::recognizer::Model::load(&ckpt).unwrap();
    assert_eq!(model.config().d_model, 8);

    std::fs::write(&cfg, r#"{"heads": 3}"#).unwrap();
    let out = invizo(&["train", "--manifest", s(&manifest), "--config", s(&cfg), "--checkpoint", s(&ckpt)], None);
    assert_eq!(out.status.code(), Some(1));
}
