use std::collections::BTreeMap;

use citegen_core::humeval::{
    build_tasks, parse_facts, CandidateSource, ComposeItem, CoverageGrid, CurationAction,
    CurationQueue, Study, TaskInput,
};
use citegen_humeval_api::{open, router, TaskView};
use serde_json::{json, Value};

const BACKENDS: [&str; 2] = ["llama-2-70b-chat", "gpt-3.5-turbo"];
const CONFIGS: [&str; 2] = ["6+A", "6+A+IF+E"];

struct Server {
    base: String,
    agent: ureq::Agent,
    _dir: tempfile::TempDir,
    study_dir: std::path::PathBuf,
}

impl Server {
    fn call(&self, method: &str, path: &str, token: Option<&str>, body: Option<Value>) -> (u16, Value) {
        let url = format!("{}{path}", self.base);
        let auth = token.map(|t| format!("Bearer {t}"));
        let mut resp = match (method, body) {
            ("GET", _) => {
                let mut r = self.agent.get(&url);
                if let Some(a) = &auth {
                    r = r.header("Authorization", a);
                }
                r.call().unwrap()
            }
            (_, body) => {
                let mut r = self.agent.post(&url);
                if let Some(a) = &auth {
                    r = r.header("Authorization", a);
                }
                r.send_json(body.unwrap_or(Value::Null)).unwrap()
            }
        };
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }
}

fn start() -> Server {
    let dir = tempfile::tempdir().unwrap();
    let mut facts = CurationQueue::default();
    let mut inputs = Vec::new();
    for i in 0..3 {
        let id = format!("P{i}-1000_1");
        let mut e = parse_facts(&id, &format!("Fact A{i}.\nFact B{i}.\nFact C{i}."));
        e.gold_text = format!("Gold paragraph {i} [REF#1] with three facts.");
        facts.extractions.insert(id.clone(), e);
        inputs.push(TaskInput {
            instance_id: id.clone(),
            gold_text: format!("Gold paragraph {i} [REF#1] with three facts."),
            candidates: BACKENDS
                .iter()
                .flat_map(|b| CONFIGS.map(|c| (*b, c)))
                .map(|(b, c)| CandidateSource {
                    backend_id: b.into(),
                    config: c.into(),
                    generation_key: format!("{:064x}", i * 10 + b.len() + c.len()),
                    text: format!("Candidate paragraph for instance {i}."),
                })
                .collect(),
        });
    }
    facts.extractions.insert("P9-1000_1".into(), parse_facts("P9-1000_1", ""));
    let ids: Vec<String> = facts.pending().iter().map(|f| f.fact_id.clone()).collect();
    for id in ids {
        facts.apply(&CurationAction::Accept { fact_id: id }).unwrap();
    }
    let tasks = build_tasks(&inputs, &facts, 42);
    let compose = (0..2)
        .map(|step| ComposeItem {
            compose_id: format!("compose-{:03}", step + 1),
            instance_id: "P0-1000_1".into(),
            step,
            config: CONFIGS[step].into(),
            system_text: String::new(),
            user_text: format!("Write the paragraph, step {step}."),
        })
        .collect();
    let annotators = BTreeMap::from([
        ("tok-alice".to_string(), "ann1".to_string()),
        ("tok-bob".to_string(), "ann2".to_string()),
    ]);
    let study_dir = dir.path().join("study");
    Study::create(&study_dir, tasks, facts, compose, annotators).unwrap();
    let addr = citegen_testkit::serve(router(open(&study_dir).unwrap()));
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into();
    Server {
        base: format!("http://{addr}"),
        agent,
        _dir: dir,
        study_dir,
    }
}

fn full_grid(view: &TaskView, covered: impl Fn(&str, usize) -> bool) -> CoverageGrid {
    view.candidates
        .iter()
        .map(|c| {
            (
                c.blind_label.clone(),
                view.facts
                    .iter()
                    .enumerate()
                    .map(|(i, f)| (f.fact_id.clone(), covered(&c.blind_label, i)))
                    .collect(),
            )
        })
        .collect()
}

#[test]
fn requires_a_known_token() {
    let s = start();
    assert_eq!(s.call("GET", "/api/tasks", None, None).0, 401);
    assert_eq!(s.call("GET", "/api/tasks", Some("nope"), None).0, 401);
    assert_eq!(s.call("GET", "/api/progress", Some("tok-alice"), None).0, 200);
}

#[test]
fn judge_and_resubmit() {
    let s = start();
    let (code, tasks) = s.call("GET", "/api/tasks", Some("tok-alice"), None);
    assert_eq!(code, 200);
    assert_eq!(tasks.as_array().unwrap().len(), 3);
    let (_, v) = s.call("GET", "/api/tasks/task-001", Some("tok-alice"), None);
    let view: TaskView = serde_json::from_value(v).unwrap();
    assert_eq!(view.candidates.len(), 4);
    assert_eq!(view.facts.len(), 3);

    let mut partial = full_grid(&view, |_, _| true);
    partial.get_mut("d").unwrap().pop_first();
    let (code, err) = s.call("POST", "/api/tasks/task-001/judgment", Some("tok-alice"), Some(json!({ "covered": partial })));
    assert_eq!(code, 422, "{err}");

    let grid = full_grid(&view, |_, i| i < 2);
    let (code, r) = s.call("POST", "/api/tasks/task-001/judgment", Some("tok-alice"), Some(json!({ "covered": grid })));
    assert_eq!(code, 201);
    assert_eq!(r["version"], 1);
    let grid = full_grid(&view, |_, _| true);
    let (_, r) = s.call("POST", "/api/tasks/task-001/judgment", Some("tok-alice"), Some(json!({ "covered": grid })));
    assert_eq!(r["version"], 2);

    let (_, v) = s.call("GET", "/api/tasks/task-001", Some("tok-alice"), None);
    assert_eq!(v["judged_version"], 2);
    let (_, v) = s.call("GET", "/api/tasks/task-001", Some("tok-bob"), None);
    assert_eq!(v["judged_version"], Value::Null);
    assert_eq!(s.call("GET", "/api/tasks/task-999", Some("tok-bob"), None).0, 404);

    let (_, p) = s.call("GET", "/api/progress", Some("tok-alice"), None);
    assert_eq!(p["tasks_judged"], 1);
    assert_eq!(p["tasks_total"], 3);

    // the log is append-only and survives a reload
    let study = Study::open(&s.study_dir).unwrap();
    assert_eq!(study.judgments.all().len(), 2);
    assert_eq!(study.judgments.latest().len(), 1);
}

#[test]
fn curation_queue_round_trip() {
    let s = start();
    let (code, q) = s.call("GET", "/api/facts/queue", Some("tok-bob"), None);
    assert_eq!(code, 200);
    let flagged: Vec<&Value> = q["instances"].as_array().unwrap().iter().filter(|i| !i["flag"].is_null()).collect();
    assert_eq!(flagged.len(), 1);
    assert_eq!(flagged[0]["flag"], "empty_response");

    let add = json!({ "action": "add", "instance_id": "P9-1000_1", "text": "Hand-written fact." });
    let (code, f) = s.call("POST", "/api/facts/queue", Some("tok-bob"), Some(add));
    assert_eq!(code, 200);
    assert_eq!(f["status"], "curated");
    let edit = json!({ "action": "edit", "fact_id": "P0-1000_1#f1", "text": "Fact A0, reworded." });
    assert_eq!(s.call("POST", "/api/facts/queue", Some("tok-bob"), Some(edit)).0, 200);
    let bad = json!({ "action": "reject", "fact_id": "missing" });
    assert_eq!(s.call("POST", "/api/facts/queue", Some("tok-bob"), Some(bad)).0, 422);

    let study = Study::open(&s.study_dir).unwrap();
    assert_eq!(study.facts.curated("P9-1000_1").len(), 1);
    assert_eq!(study.facts.curated("P0-1000_1")[0].text, "Fact A0, reworded.");
}

#[test]
fn compose_steps_in_order() {
    let s = start();
    assert_eq!(s.call("GET", "/api/compose/compose-002", Some("tok-alice"), None).0, 409);
    let (code, v) = s.call("GET", "/api/compose/compose-001", Some("tok-alice"), None);
    assert_eq!(code, 200);
    assert_eq!(v["step"], 0);
    let body = json!({ "text": "  " });
    assert_eq!(s.call("POST", "/api/compose/compose-001", Some("tok-alice"), Some(body)).0, 422);
    let body = json!({ "text": "Human paragraph citing [REF#1]." });
    assert_eq!(s.call("POST", "/api/compose/compose-001", Some("tok-alice"), Some(body)).0, 201);
    assert_eq!(s.call("GET", "/api/compose/compose-002", Some("tok-alice"), None).0, 200);
    assert_eq!(s.call("GET", "/api/compose/compose-002", Some("tok-bob"), None).0, 409);

    let study = Study::open(&s.study_dir).unwrap();
    assert_eq!(study.human.len(), 1);
    assert_eq!(study.human[0].config, "6+A");
    assert_eq!(study.human[0].annotator_id, "ann1");
}

#[test]
fn no_payload_reveals_sealed_identifiers() {
    let s = start();
    let study = Study::open(&s.study_dir).unwrap();
    let mut sealed: Vec<String> = Vec::new();
    for e in &study.tasks.sealed.entries {
        sealed.push(e.backend_id.clone());
        sealed.push(e.config.clone());
        sealed.push(e.generation_key.clone());
    }
    sealed.extend(study.compose.iter().map(|c| c.config.clone()));
    sealed.sort();
    sealed.dedup();

    let view: TaskView =
        serde_json::from_value(s.call("GET", "/api/tasks/task-002", Some("tok-alice"), None).1).unwrap();
    let grid = full_grid(&view, |l, _| l == "a");
    s.call("POST", "/api/tasks/task-002/judgment", Some("tok-alice"), Some(json!({ "covered": grid })));
    s.call("POST", "/api/compose/compose-001", Some("tok-alice"), Some(json!({ "text": "Written." })));

    let mut payloads = Vec::new();
    for path in ["/api/tasks", "/api/facts/queue", "/api/compose", "/api/progress"] {
        payloads.push(s.call("GET", path, Some("tok-alice"), None).1);
    }
    for t in &study.tasks.tasks {
        payloads.push(s.call("GET", &format!("/api/tasks/{}", t.task_id), Some("tok-alice"), None).1);
    }
    for c in &study.compose {
        payloads.push(s.call("GET", &format!("/api/compose/{}", c.compose_id), Some("tok-alice"), None).1);
    }
    payloads.push(s.call("POST", "/api/tasks/task-002/judgment", Some("tok-alice"), Some(json!({ "covered": grid }))).1);
    payloads.push(
        s.call("POST", "/api/facts/queue", Some("tok-alice"), Some(json!({ "action": "accept", "fact_id": "P1-1000_1#f1" }))).1,
    );
    assert!(payloads.len() >= 10);
    for p in &payloads {
        let text = p.to_string();
        for key in &sealed {
            assert!(!text.contains(key.as_str()), "{key:?} leaked in {text}");
        }
    }
}
