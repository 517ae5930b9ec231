use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use hatemix_core::corpus::RetrainCorpus;
use hatemix_core::dataset::{oversample, LabeledDataset, LabeledRow, Split, Task, TaskSchema};
use hatemix_core::metrics::weighted_macro_f1;
use hatemix_core::synthetic::{pseudo_word, separable_rows};
use hatemix_core::trainer::{
    finetune, predict, read_checkpoint_log, retrain, Backend, ExternalBackend, FinetuneConfig, ModelHandle,
    ReferenceBackend, RetrainConfig, StubBackend, TrainerError, CHECKPOINT_LOG, CONFIG_FILE, HANDLE_FILE,
};
use hatemix_core::{ExperimentCondition, LanguageCondition};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn corpus(n: usize) -> RetrainCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let texts = (0..n)
        .map(|_| (0..8).map(|_| pseudo_word(&mut rng, LanguageCondition::Tamil)).collect::<Vec<_>>().join(" "))
        .collect();
    RetrainCorpus { language: LanguageCondition::Tamil, texts, seed: 9, provenance: "synthetic".into() }
}

fn dataset(schema: &TaskSchema, rows: &[(String, String, String)], split: Split) -> LabeledDataset {
    let rows = rows
        .iter()
        .map(|(id, text, label)| LabeledRow { id: id.clone(), text: text.clone(), label: label.clone() })
        .collect();
    LabeledDataset::new(LanguageCondition::English, schema.clone(), rows, split).unwrap()
}

fn separable(schema: &TaskSchema, seed: u64) -> (LabeledDataset, LabeledDataset) {
    let labels: Vec<&str> = schema.labels().iter().map(String::as_str).collect();
    let rows = separable_rows(&labels, 200, seed);
    let (train, held) = rows.split_at(150);
    (dataset(schema, train, Split::Train), dataset(schema, held, Split::Validation))
}

fn steps_and_losses(dir: &Path) -> Vec<(u64, f64)> {
    read_checkpoint_log(dir).unwrap().into_iter().map(|r| (r.step, r.eval_loss)).collect()
}

#[test]
fn reference_retrain_selects_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let backend = ReferenceBackend::default();
    let base = ModelHandle::pretrained(&backend);
    let config = RetrainConfig::with_defaults(5, "reference");
    let handle =
        retrain(&backend, &base, &corpus(1000), ExperimentCondition::Retrained, &config, dir.path()).unwrap();
    let log = read_checkpoint_log(dir.path()).unwrap();
    assert!(!log.is_empty());
    let min = log.iter().map(|r| r.eval_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(handle.eval_loss, Some(min));
    assert_eq!(handle.condition, ExperimentCondition::Retrained);
    assert!(handle.source_corpus.as_deref().unwrap().starts_with("tamil:synthetic"));
    // 900 training texts in batches of 8: 113 steps per epoch, 4 epochs
    let steps: Vec<u64> = log.iter().map(|r| r.step).collect();
    assert_eq!(steps, vec![113, 226, 339, 452]);
}

#[test]
fn reference_retrain_is_deterministic() {
    let backend = ReferenceBackend::default();
    let base = ModelHandle::pretrained(&backend);
    let config = RetrainConfig::new(2, 50, 5, "reference").unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    retrain(&backend, &base, &corpus(300), ExperimentCondition::ScriptMixed, &config, a.path()).unwrap();
    retrain(&backend, &base, &corpus(300), ExperimentCondition::ScriptMixed, &config, b.path()).unwrap();
    let la = steps_and_losses(a.path());
    assert_eq!(la, steps_and_losses(b.path()));
    // eval every 50 steps plus the end of each 34-step epoch
    assert_eq!(la.iter().map(|r| r.0).collect::<Vec<_>>(), vec![34, 50, 68]);
}

#[test]
fn retrain_rejects_bad_input() {
    let backend = ReferenceBackend::default();
    let base = ModelHandle::pretrained(&backend);
    let config = RetrainConfig::with_defaults(1, "reference");
    let dir = tempfile::tempdir().unwrap();
    let empty = RetrainCorpus { texts: vec![], ..corpus(1) };
    assert!(matches!(
        retrain(&backend, &base, &empty, ExperimentCondition::Retrained, &config, dir.path()),
        Err(TrainerError::EmptyCorpus)
    ));
    assert!(matches!(
        retrain(&backend, &base, &corpus(5), ExperimentCondition::Baseline, &config, dir.path()),
        Err(TrainerError::InvalidProvenance(_))
    ));
}

#[test]
fn separable_fixture_reaches_high_f1() {
    let schema = TaskSchema::custom(["alpha", "beta", "gamma"]).unwrap();
    let (train, held) = separable(&schema, 21);
    let train = oversample(&train, 1).unwrap();
    let backend = ReferenceBackend::default();
    let base = ModelHandle::pretrained(&backend);
    let dir = tempfile::tempdir().unwrap();
    let clf = finetune(&backend, &base, &train, &held, &FinetuneConfig::with_defaults(2), dir.path()).unwrap();
    let pred = predict(&backend, &clf, &held.texts()).unwrap();
    let f1 = weighted_macro_f1(&held.labels(), &pred, &schema).unwrap();
    assert!(f1 >= 0.95, "weighted macro F1 {f1}");
    assert_eq!(pred, predict(&backend, &clf, &held.texts()).unwrap());
    assert!(predict(&backend, &clf, &[]).unwrap().is_empty());
    let log = read_checkpoint_log(dir.path()).unwrap();
    assert_eq!(log.len(), 8, "one evaluation per epoch");
}

#[test]
fn finetune_over_retrained_model() {
    let schema = TaskSchema::custom(["alpha", "beta", "gamma"]).unwrap();
    let (train, held) = separable(&schema, 4);
    let backend = ReferenceBackend::default();
    let root = tempfile::tempdir().unwrap();
    let texts: Vec<String> = train.texts();
    let unlabeled = RetrainCorpus { language: LanguageCondition::English, texts, seed: 1, provenance: "train".into() };
    let model = retrain(
        &backend,
        &ModelHandle::pretrained(&backend),
        &unlabeled,
        ExperimentCondition::Retrained,
        &RetrainConfig::with_defaults(1, "reference"),
        &root.path().join("mlm"),
    )
    .unwrap();
    let clf = finetune(&backend, &model, &train, &held, &FinetuneConfig::with_defaults(1), &root.path().join("clf"))
        .unwrap();
    assert_eq!(clf.condition, ExperimentCondition::Retrained);
    assert_eq!(clf.source_corpus, model.source_corpus);
    let pred = predict(&backend, &clf, &held.texts()).unwrap();
    assert!(weighted_macro_f1(&held.labels(), &pred, &schema).unwrap() >= 0.95);
}

#[test]
fn schema_mismatch() {
    let a = TaskSchema::builtin(Task::A).unwrap();
    let b = TaskSchema::builtin(Task::B).unwrap();
    let row = |l: &str| vec![("1".to_string(), "some words here".to_string(), l.to_string())];
    let train = dataset(&a, &row("homophobia"), Split::Train);
    let val = dataset(&b, &row("hope-speech"), Split::Validation);
    let backend = ReferenceBackend::default();
    let dir = tempfile::tempdir().unwrap();
    let err = finetune(&backend, &ModelHandle::pretrained(&backend), &train, &val, &FinetuneConfig::with_defaults(1), dir.path())
        .unwrap_err();
    assert!(matches!(err, TrainerError::SchemaMismatch { .. }));
}

#[test]
fn single_class_run_predicts_constant() {
    let schema = TaskSchema::custom(["only"]).unwrap();
    let rows = separable_rows(&["only"], 30, 2);
    let train = dataset(&schema, &rows[..20], Split::Train);
    let val = dataset(&schema, &rows[20..], Split::Validation);
    let backend = ReferenceBackend::default();
    let dir = tempfile::tempdir().unwrap();
    let clf = finetune(&backend, &ModelHandle::pretrained(&backend), &train, &val, &FinetuneConfig::with_defaults(1), dir.path())
        .unwrap();
    let pred = predict(&backend, &clf, &val.texts()).unwrap();
    assert!(pred.iter().all(|p| p == "only"));
}

fn shape(v: &serde_json::Value) -> serde_json::Value {
    match v {
        serde_json::Value::Object(m) => m.iter().map(|(k, v)| (k.clone(), shape(v))).collect(),
        serde_json::Value::Array(_) => serde_json::json!("array"),
        serde_json::Value::Number(_) => serde_json::json!("number"),
        serde_json::Value::String(_) => serde_json::json!("string"),
        other => other.clone(),
    }
}

fn run_layout(backend: &dyn Backend, dir: &Path) -> (BTreeSet<String>, Vec<serde_json::Value>) {
    let schema = TaskSchema::custom(["alpha", "beta", "gamma"]).unwrap();
    let (train, held) = separable(&schema, 8);
    finetune(backend, &ModelHandle::pretrained(backend), &train, &held, &FinetuneConfig::with_defaults(3), dir)
        .unwrap();
    let files = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    let shapes = [CONFIG_FILE, HANDLE_FILE]
        .iter()
        .map(|f| shape(&serde_json::from_str(&fs::read_to_string(dir.join(f)).unwrap()).unwrap()))
        .chain(
            fs::read_to_string(dir.join(CHECKPOINT_LOG))
                .unwrap()
                .lines()
                .map(|l| shape(&serde_json::from_str(l).unwrap())),
        )
        .collect();
    (files, shapes)
}

#[test]
fn backends_produce_the_same_run_layout() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run_layout(&ReferenceBackend::default(), a.path()), run_layout(&StubBackend, b.path()));
}

#[test]
fn classifier_backend_must_match() {
    let schema = TaskSchema::custom(["alpha", "beta"]).unwrap();
    let (train, held) = separable(&schema, 8);
    let dir = tempfile::tempdir().unwrap();
    let clf = finetune(&StubBackend, &ModelHandle::pretrained(&StubBackend), &train, &held, &FinetuneConfig::with_defaults(1), dir.path())
        .unwrap();
    assert!(matches!(
        predict(&ReferenceBackend::default(), &clf, &["x".to_string()]),
        Err(TrainerError::BackendFailure { .. })
    ));
}

const MOCK: &str = r#"
import json, sys
op = sys.argv[-1]
req = json.load(sys.stdin)
if op == "predict":
    print(json.dumps({"event": "predictions", "labels": [req["labels"][-1]] * len(req["texts"])}))
    sys.exit(0)
print(json.dumps({"event": "log", "message": "starting"}))
for step, loss in [(500, 2.5), (1000, 1.5), (1500, 1.5)]:
    print(json.dumps({"event": "checkpoint", "step": step, "eval_loss": loss, "artifact_uri": "mock:%d" % step}), flush=True)
if req.get("texts") and req["texts"][0] == "fail":
    sys.stderr.write("CUDA out of memory\n")
    sys.exit(3)
"#;

fn mock_backend(dir: &Path) -> Option<ExternalBackend> {
    let python = ["python3", "python"]
        .into_iter()
        .find(|p| std::process::Command::new(p).arg("--version").output().is_ok())?;
    let script = dir.join("mock_backend.py");
    fs::write(&script, MOCK).unwrap();
    Some(ExternalBackend::new(&format!("{python} {}", script.display())))
}

#[test]
fn external_backend_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let Some(backend) = mock_backend(dir.path()) else {
        eprintln!("no python interpreter; skipping");
        return;
    };
    let base = ModelHandle::pretrained(&backend);
    assert_eq!(base.artifact_uri, "xlm-roberta-base");
    let config = RetrainConfig::with_defaults(1, "external");
    let run = dir.path().join("ok");
    let handle = retrain(&backend, &base, &corpus(3), ExperimentCondition::Retrained, &config, &run).unwrap();
    assert_eq!(handle.artifact_uri, "mock:1000");

    let schema = TaskSchema::custom(["alpha", "beta"]).unwrap();
    let (train, held) = separable(&schema, 3);
    let clf = finetune(&backend, &handle, &train, &held, &FinetuneConfig::with_defaults(1), &dir.path().join("clf"))
        .unwrap();
    assert_eq!(predict(&backend, &clf, &held.texts()[..3]).unwrap(), vec!["beta"; 3]);

    // failure after two checkpoints keeps the partial log
    let failing = RetrainCorpus { texts: vec!["fail".into()], ..corpus(1) };
    let run = dir.path().join("fail");
    let err = retrain(&backend, &base, &failing, ExperimentCondition::Retrained, &config, &run).unwrap_err();
    match err {
        TrainerError::BackendFailure { reason, .. } => assert!(reason.contains("out of memory"), "{reason}"),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(read_checkpoint_log(&run).unwrap().len(), 3);
    assert!(!run.join(HANDLE_FILE).exists());
}

#[test]
fn external_backend_missing_program() {
    let backend = ExternalBackend::new("/nonexistent/backend-binary");
    let dir = tempfile::tempdir().unwrap();
    let err = retrain(
        &backend,
        &ModelHandle::pretrained(&backend),
        &corpus(2),
        ExperimentCondition::Retrained,
        &RetrainConfig::with_defaults(1, "external"),
        dir.path(),
    )
    .unwrap_err();
    assert!(matches!(err, TrainerError::BackendFailure { .. }));
}
