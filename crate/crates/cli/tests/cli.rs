use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use citegen_testkit::chat::MockChat;

fn config(dir: &Path, extra: &str) -> PathBuf {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures/corpus.jsonl")
        .canonicalize()
        .unwrap();
    let text = format!(
        "output_dir = \"out\"\n{extra}\n[corpus]\nraw = {:?}\n\n[analysis]\nresamples = 200\n\n[humeval]\nsample = 4\n",
        corpus.display().to_string()
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn citegen(cfg: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_citegen"))
        .arg("-c")
        .arg(cfg)
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn ok(cfg: &Path, args: &[&str]) -> String {
    let out = citegen(cfg, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn prepared(dir: &Path, extra: &str) -> PathBuf {
    let cfg = config(dir, extra);
    for stage in ["ingest", "pool", "intents", "render"] {
        ok(&cfg, &[stage]);
    }
    cfg
}

#[test]
fn missing_artifact_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let out = citegen(&cfg, &["render"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("run `ingest` first"), "{}", stderr(&out));
}

#[test]
fn bad_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "colour = \"blue\"");
    let out = citegen(&cfg, &["ingest"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("colour"), "{}", stderr(&out));

    let cfg = config(dir.path(), "[run]\nparallelism = 0\n");
    let out = citegen(&cfg, &["ingest"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("run.parallelism"), "{}", stderr(&out));
}

#[test]
fn single_prompt_render() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = prepared(dir.path(), "");
    let id = "P18-1100-L1";
    let stdout = ok(&cfg, &["render", "--config", "3+A+IF+E", "--instance", id]);
    assert!(stdout.contains("Follow given instructions:"));
    assert!(stdout.contains("Intent: "));
    let file = dir.path().join(format!("out/prompts/3+A+IF+E/{id}.json"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(file).unwrap()).unwrap();
    assert!(json["data"]["user"].as_str().unwrap().starts_with("Main paper abstract: "));

    let out = citegen(&cfg, &["render", "--config", "7+A", "--instance", id]);
    assert_eq!(code(&out), 2);
    let out = citegen(&cfg, &["render", "--config", "3+A", "--instance", "nope"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn failing_backend_leaves_an_incomplete_run() {
    let server = MockChat::spawn(Arc::new(|_, _| (500, "down".into())));
    let dir = tempfile::tempdir().unwrap();
    let backend = format!(
        "[[backends]]\nbackend_id = \"flaky\"\nendpoint = \"{}\"\nmodel_name = \"m\"\nwire_dialect = \"openai_chat_v1\"\ntimeout_secs = 2\n",
        server.url
    );
    let cfg = prepared(dir.path(), &format!("{backend}\n{SMALL_MATRIX}\n[run]\nmax_attempts = 1\n"));
    let out = citegen(&cfg, &["run", "--backend", "flaky"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(stderr(&out).contains("cells failed"));
    let out = citegen(&cfg, &["run", "--backend", "absent"]);
    assert_eq!(code(&out), 2);
}

const SMALL_MATRIX: &str = "[matrix]\ntemplates = [1]\ncomponent_sets = [\"A\"]\n";

fn with_scorer(dir: &Path, url: &str) -> PathBuf {
    let cfg = config(dir, SMALL_MATRIX);
    let text = std::fs::read_to_string(&cfg).unwrap()
        + &format!("\n[scorer]\nurl = \"{url}\"\ntimeout_secs = 2\n");
    std::fs::write(&cfg, text).unwrap();
    for stage in ["ingest", "pool", "intents", "render", "run"] {
        ok(&cfg, &[stage]);
    }
    cfg
}

#[test]
fn scorer_down_marks_metrics_unavailable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_scorer(dir.path(), "http://127.0.0.1:9");
    ok(&cfg, &["score"]);
    let json: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/scores/measurements.json")).unwrap(),
    )
    .unwrap();
    let v = &json["data"]["vectors"][0];
    assert_eq!(v["bertscore"], "unavailable");
    assert_eq!(v["summac"], "unavailable");
    assert!(v["rouge_l"].is_number());
}

#[test]
fn scorer_protocol_mismatch_is_upstream() {
    use citegen_testkit::sidecar::{MockSidecar, SidecarOptions};
    let sidecar = MockSidecar::spawn(SidecarOptions {
        protocol_version: "9".into(),
        ..Default::default()
    });
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_scorer(dir.path(), &sidecar.url);
    let out = citegen(&cfg, &["score"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn report_refuses_mixed_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = prepared(dir.path(), "");
    for stage in [&["run"][..], &["score"], &["report"]] {
        ok(&cfg, stage);
    }
    for f in ["aggregate.csv", "correlations.csv", "winner_census.csv", "significance.csv", "summary.json"] {
        assert!(dir.path().join("out/report").join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(dir.path().join("out/report/aggregate.csv")).unwrap();
    assert!(csv.starts_with("# tool_version=citegen "));

    // a changed config gives a new hash; earlier artifacts no longer match
    let text = std::fs::read_to_string(&cfg).unwrap().replace("resamples = 200", "resamples = 300");
    std::fs::write(&cfg, text).unwrap();
    let out = citegen(&cfg, &["report"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("provenance"), "{}", stderr(&out));
}

#[test]
fn humeval_flow_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = prepared(dir.path(), "");
    ok(&cfg, &["run"]);
    let out = ok(&cfg, &["humeval", "prepare", "--annotator", "ann-1"]);
    assert!(out.lines().any(|l| l.starts_with("ann-1\t") && l.len() == "ann-1\t".len() + 32));
    let again = citegen(&cfg, &["humeval", "prepare", "--annotator", "ann-1"]);
    assert_eq!(code(&again), 2);

    // nothing is curated yet, so every instance is excluded
    let out = ok(&cfg, &["humeval", "build-tasks"]);
    assert!(out.contains("0 tasks built"), "{out}");
    let tasks = std::fs::read_to_string(dir.path().join("out/humeval/study/tasks.json")).unwrap();
    assert!(!tasks.contains("\"stub\""), "backend ids leak into the blinded task file");
}
