use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const QUICK_CONFIG: &str = r#"{"v":1,"experiment":{"train":{"pretrain_epochs":2,"finetune_epochs":3}}}"#;

fn phenoscope(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phenoscope"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn phenoscope")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = phenoscope(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Exit code and the parsed error object from stderr.
fn fails(dir: &Path, args: &[&str]) -> (i32, Value) {
    let out = phenoscope(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("error line on stderr");
    let err: Value = serde_json::from_str(line).unwrap_or_else(|e| panic!("not JSON ({e}): {line}"));
    assert_eq!(err["exit_code"].as_i64(), out.status.code().map(i64::from));
    assert!(err["message"].as_str().is_some_and(|m| !m.is_empty()));
    (out.status.code().unwrap(), err)
}

fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("quick.json"), QUICK_CONFIG).unwrap();
    dir
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn synth(dir: &Path, users: &str, seed: &str) {
    ok(dir, &["synth", "--users", users, "--seed", seed, "--out", "data"]);
}

#[test]
fn synth_validate_features_evaluate_report() {
    let ws = workspace();
    let d = ws.path();
    synth(d, "12", "3");
    for f in ["participants.jsonl", "active.jsonl", "passive.jsonl", "ground_truth.json", "manifest.json"] {
        assert!(d.join("data").join(f).is_file(), "missing {f}");
    }

    let summary = ok(d, &["validate", "--data", "data", "--out", "validate"]);
    assert!(summary.contains("rejected: 0"));
    let load = json(&d.join("validate/load_report.json"));
    assert_eq!(load["participants_accepted"].as_u64(), Some(12));

    ok(d, &["features", "--data", "data", "--out", "features"]);
    let features = fs::read_to_string(d.join("features/features.csv")).unwrap();
    let header = features.lines().next().unwrap();
    assert!(header.contains("participant_id") && header.contains("steps"));
    assert!(features.lines().count() > 12);

    ok(
        d,
        &[
            "evaluate", "--data", "data", "--config", "quick.json", "--reps", "2", "--conditions", "combined,active",
            "--out", "eval",
        ],
    );
    let report = json(&d.join("eval/report.json"));
    let results = report["results"].as_array().unwrap();
    assert_eq!(results.len(), 8);
    for r in results {
        let ba = r["summary"]["balanced_accuracy"]["mean"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&ba));
    }
    assert_eq!(report["comparisons"].as_array().unwrap().len(), 4);

    let text = ok(d, &["report", "--report", "eval/report.json", "--svg", "--out", "report"]);
    assert!(text.contains("balanced_accuracy"));
    for f in ["summary.txt", "modality.csv", "metrics_table.csv", "confusion.csv", "score_bins.csv", "modality.svg", "score_bins.svg"] {
        assert!(d.join("report").join(f).is_file(), "missing {f}");
    }
    assert!(fs::read_to_string(d.join("report/modality.svg")).unwrap().starts_with("<svg"));

    for dir in ["data", "validate", "features", "eval", "report"] {
        let m = json(&d.join(dir).join("manifest.json"));
        assert_eq!(m["version"].as_u64(), Some(1));
        assert!(m["artifacts"].as_object().is_some_and(|a| !a.is_empty()), "{dir} manifest lists no artifacts");
    }
}

#[test]
fn four_user_cohort_confusion_sums_to_four() {
    let ws = workspace();
    let d = ws.path();
    // Seed picked so every leave-one-out training fold holds both sdq classes.
    synth(d, "4", "21");
    ok(
        d,
        &[
            "evaluate", "--data", "data", "--config", "quick.json", "--reps", "1", "--conditions", "combined",
            "--outcomes", "sdq", "--out", "eval",
        ],
    );
    let report = json(&d.join("eval/report.json"));
    let c = &report["results"][0]["confusion"];
    let total: u64 = ["tp", "tn", "fp", "fn"].iter().map(|k| c[k].as_u64().unwrap()).sum();
    assert_eq!(total, 4);
}

#[test]
fn single_class_training_fold_is_a_training_error() {
    let ws = workspace();
    let d = ws.path();
    synth(d, "4", "1");
    let (code, err) = fails(
        d,
        &["evaluate", "--data", "data", "--config", "quick.json", "--reps", "1", "--conditions", "combined", "--out", "e"],
    );
    assert_eq!(code, 3);
    assert!(err["message"].as_str().unwrap().contains("degenerate labels"));
}

#[test]
fn rerun_reproduces_report_bytes() {
    let ws = workspace();
    let d = ws.path();
    synth(d, "10", "5");
    let eval = [
        "evaluate", "--data", "data", "--config", "quick.json", "--reps", "2", "--conditions", "combined,passive",
        "--out", "first",
    ];
    ok(d, &eval);
    ok(d, &["rerun", "--manifest", "first/manifest.json", "--out", "second"]);
    let a = fs::read(d.join("first/report.json")).unwrap();
    let b = fs::read(d.join("second/report.json")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        fs::read(d.join("first/predictions.csv")).unwrap(),
        fs::read(d.join("second/predictions.csv")).unwrap()
    );

    // Thread count does not change the result.
    let mut threaded = vec!["--jobs", "1"];
    threaded.extend(eval.iter().take(eval.len() - 1));
    threaded.push("third");
    ok(d, &threaded);
    assert_eq!(a, fs::read(d.join("third/report.json")).unwrap());

    let (code, _) = fails(d, &["rerun", "--manifest", "first/manifest.json", "--out", "first"]);
    assert_eq!(code, 1);

    let mut f = fs::read_to_string(d.join("data/participants.jsonl")).unwrap();
    f.push('\n');
    fs::write(d.join("data/participants.jsonl"), f).unwrap();
    let (code, err) = fails(d, &["rerun", "--manifest", "first/manifest.json", "--out", "fourth"]);
    assert_eq!(code, 2);
    assert!(err["message"].as_str().unwrap().contains("changed"));
}

#[test]
fn commands_leave_inputs_untouched() {
    let ws = workspace();
    let d = ws.path();
    synth(d, "8", "2");
    let files = ["participants.jsonl", "active.jsonl", "passive.jsonl"];
    let before: Vec<Vec<u8>> = files.iter().map(|f| fs::read(d.join("data").join(f)).unwrap()).collect();
    ok(d, &["features", "--data", "data", "--out", "f"]);
    ok(d, &["validate", "--data", "data", "--out", "v"]);
    let after: Vec<Vec<u8>> = files.iter().map(|f| fs::read(d.join("data").join(f)).unwrap()).collect();
    assert_eq!(before, after);

    // An output name that collides with an input is refused.
    fs::copy(d.join("data/passive.jsonl"), d.join("data/features.csv")).unwrap();
    let (code, err) = fails(
        d,
        &[
            "features", "--data", "data", "--passive", "data/features.csv", "--out", "data",
        ],
    );
    assert_eq!(code, 1);
    assert!(err["message"].as_str().unwrap().contains("refusing to overwrite"));
    assert_eq!(fs::read(d.join("data/features.csv")).unwrap(), before[2]);
    let after: Vec<Vec<u8>> = files.iter().map(|f| fs::read(d.join("data").join(f)).unwrap()).collect();
    assert_eq!(before, after);
}

#[test]
fn exit_codes_and_error_json() {
    let ws = workspace();
    let d = ws.path();
    synth(d, "6", "4");

    let (code, err) = fails(d, &["evaluate", "--data", "data", "--bogus", "--out", "x"]);
    assert_eq!((code, err["error"].as_str()), (1, Some("usage")));

    let (code, _) = fails(d, &["frobnicate"]);
    assert_eq!(code, 1);

    let (code, _) = fails(d, &["--jobs", "0", "synth", "--out", "x"]);
    assert_eq!(code, 1);

    fs::write(d.join("v2.json"), r#"{"v":2}"#).unwrap();
    let (code, err) = fails(d, &["evaluate", "--data", "data", "--config", "v2.json", "--out", "x"]);
    assert_eq!(code, 1);
    assert!(err["message"].as_str().unwrap().contains("version"));

    fs::write(d.join("typo.json"), r#"{"v":1,"experiment":{"repetitons":3}}"#).unwrap();
    let (code, _) = fails(d, &["evaluate", "--data", "data", "--config", "typo.json", "--out", "x"]);
    assert_eq!(code, 1);

    let (code, err) = fails(d, &["evaluate", "--data", "missing", "--out", "x"]);
    assert_eq!((code, err["error"].as_str()), (2, Some("data")));
    assert!(err["message"].as_str().unwrap().contains("participants.jsonl"));

    fs::create_dir(d.join("bad")).unwrap();
    for f in ["participants.jsonl", "active.jsonl", "passive.jsonl"] {
        fs::copy(d.join("data").join(f), d.join("bad").join(f)).unwrap();
    }
    let mut active = fs::read_to_string(d.join("bad/active.jsonl")).unwrap();
    active.push_str("{\"participant_id\":\"nobody\",\"nonsense\":1}\n");
    fs::write(d.join("bad/active.jsonl"), active).unwrap();
    let (code, _) = fails(d, &["validate", "--data", "bad", "--out", "vbad"]);
    assert_eq!(code, 2);
    let load = json(&d.join("vbad/load_report.json"));
    assert!(load.to_string().contains("nobody") || load.to_string().contains("line"));
    assert!(d.join("vbad/manifest.json").is_file());

    assert!(phenoscope(d, &["--help"]).status.success());
    assert!(phenoscope(d, &["--version"]).status.success());
}

#[test]
fn train_explain_and_ablate() {
    let ws = workspace();
    let d = ws.path();
    synth(d, "12", "3");

    ok(d, &["train", "--data", "data", "--config", "quick.json", "--outcome", "sdq", "--out", "model"]);
    let model = json(&d.join("model/model.json"));
    assert_eq!(model["outcome"].as_str(), Some("sdq"));
    let log = fs::read_to_string(d.join("model/training_log.jsonl")).unwrap();
    assert!(log.lines().count() >= 1);

    ok(d, &["explain", "--data", "data", "--model", "model/model.json", "--permutations", "4", "--top", "3", "--out", "exm"]);
    let ex = json(&d.join("exm/explain.json"));
    assert_eq!(ex["mode"].as_str(), Some("model"));
    let gap = ex["outcomes"][0]["max_efficiency_gap"].as_f64().unwrap();
    assert!(gap < 1e-9, "efficiency gap {gap}");
    assert_eq!(ex["outcomes"][0]["group_tests"].as_array().unwrap().len(), 3);
    let importance = fs::read_to_string(d.join("exm/importance.csv")).unwrap();
    assert!(importance.lines().count() > 1);

    let (code, _) = fails(
        d,
        &["explain", "--data", "data", "--model", "model/model.json", "--reps", "2", "--out", "exbad"],
    );
    assert_eq!(code, 1);

    ok(
        d,
        &[
            "explain", "--data", "data", "--config", "quick.json", "--reps", "1", "--outcomes", "insomnia",
            "--permutations", "3", "--out", "exh",
        ],
    );
    let ex = json(&d.join("exh/explain.json"));
    assert_eq!(ex["mode"].as_str(), Some("held_out"));
    assert_eq!(ex["condition"].as_str(), Some("combined"));

    ok(d, &["ablate", "--data", "data", "--config", "quick.json", "--reps", "2", "--outcomes", "sdq", "--out", "abl"]);
    assert!(d.join("abl/ablation.json").is_file());
    let rows = fs::read_to_string(d.join("abl/ablation.csv")).unwrap();
    assert!(rows.contains("pooled"));

    ok(
        d,
        &[
            "evaluate", "--data", "data", "--config", "quick.json", "--reps", "1", "--conditions", "combined",
            "--outcomes", "sdq", "--out", "eval",
        ],
    );
    let summary = ok(
        d,
        &["report", "--report", "eval/report.json", "--ablation", "abl/ablation.json", "--svg", "--out", "report"],
    );
    assert!(summary.contains("Pretraining ablation"));
    assert!(d.join("report/ablation.svg").is_file());
}
