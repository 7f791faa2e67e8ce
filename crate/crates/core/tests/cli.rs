use std::path::Path;
use std::process::{Command, Output};

fn finetype(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finetype"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/small.jsonl");

fn synth(dir: &Path, extra: &[&str]) {
    let d = dir.to_str().unwrap();
    let mut args = vec!["synth", "--out-dir", d, "--n-mentions", "60", "--n-test", "40", "--seed", "3"];
    args.extend_from_slice(extra);
    let o = finetype(&args);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn write_config(dir: &Path, extra: &str) -> String {
    let cfg = format!(
        r#"{{"train":"train.jsonl","test":"test.jsonl","checkpoint":"model.json","log":"train.log",
            "epochs":2,"dims":{{"char_dim":6,"word_dim":6,"word_hidden":4,"mention_hidden":4,"embed_dim":5}}{extra}}}"#
    );
    let path = dir.join("run.json");
    std::fs::write(&path, cfg).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn stats_table_and_json() {
    let o = finetype(&["stats", FIXTURE]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("# types") && out.contains("max hierarchy depth"), "{out}");

    let o = finetype(&["stats", FIXTURE, "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["types"], 6);
    assert_eq!(v["mentions"], 5);

    let o = finetype(&["stats", FIXTURE, "--json", "--filter-pronominal"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["mentions"], 4);
}

#[test]
fn missing_file_exits_2_with_path() {
    let o = finetype(&["stats", "/nonexistent/corpus.jsonl"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/corpus.jsonl"));
}

#[test]
fn synth_is_deterministic_and_rejects_degenerate_specs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth(a.path(), &["--noise-rate", "0.3"]);
    synth(b.path(), &["--noise-rate", "0.3"]);
    for f in ["train.jsonl", "test.jsonl"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap()
        );
    }
    let o = finetype(&["synth", "--out-dir", a.path().to_str().unwrap(), "--branching", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_eval_predict_export() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--noise-rate", "0.2"]);
    let cfg = write_config(dir.path(), "");
    let o = finetype(&["train", "--config", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("best epoch"));
    let log = std::fs::read_to_string(dir.path().join("train.log")).unwrap();
    assert_eq!(log.lines().count(), 3);
    assert_eq!(log.lines().nth(1).unwrap().split('\t').count(), 5);

    let model = dir.path().join("model.json");
    let model = model.to_str().unwrap();
    let test = dir.path().join("test.jsonl");
    let test = test.to_str().unwrap();

    let o = finetype(&["eval", "--checkpoint", model, "--corpus", test, "--json", "--top-types", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = stdout(&o).lines().next().unwrap().to_string();
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["mentions"], 40);

    let preds = dir.path().join("pred.jsonl");
    let o = finetype(&["predict", "--checkpoint", model, "--corpus", test, "--out", preds.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&preds).unwrap();
    assert_eq!(text.lines().count(), 40);
    let rec: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for key in ["mention_id", "gold", "pred", "path_scores"] {
        assert!(rec.get(key).is_some(), "{key}");
    }

    let feats = dir.path().join("feats.jsonl");
    let args = ["export-features", "--checkpoint", model, "--corpus", test, "--out", feats.to_str().unwrap()];
    assert!(finetype(&args).status.success());
    let first_run = std::fs::read(&feats).unwrap();
    assert!(finetype(&args).status.success());
    assert_eq!(first_run, std::fs::read(&feats).unwrap());
    let rec: serde_json::Value =
        serde_json::from_str(String::from_utf8(first_run).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(rec["split"], "test");
    assert_eq!(rec["vector"].as_array().unwrap().len(), 4 + 4 * 4);
}

#[test]
fn train_ablation_modes_and_warm_start() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let cfg = write_config(dir.path(), "");
    for mode in ["all-clean", "no-mention"] {
        let o = finetype(&["train", "--config", &cfg, "--mode", mode, "--sequential"]);
        assert!(o.status.success(), "{mode}: {}", stderr(&o));
    }
    let o = finetype(&["train", "--config", &cfg]);
    assert!(o.status.success());
    std::fs::rename(dir.path().join("model.json"), dir.path().join("source.json")).unwrap();
    let warm = write_config(dir.path(), r#","warm_start":"source.json""#);
    let o = finetype(&["train", "--config", &warm, "--copy-embeddings", "true"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("model.json").exists());
}

#[test]
fn invalid_config_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"learning_rate":-1,"batch_size":0,"dev":"nope.jsonl"}"#).unwrap();
    let o = finetype(&["train", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for needle in ["learning_rate", "batch_size", "train:", "checkpoint:", "nope.jsonl"] {
        assert!(err.contains(needle), "{needle} missing from {err}");
    }
    std::fs::write(&path, r#"{"bogus_field":1}"#).unwrap();
    let o = finetype(&["train", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gradcheck_passes() {
    let o = finetype(&["gradcheck"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("0 failures"));
}
