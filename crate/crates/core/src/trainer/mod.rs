//! Training orchestration: masked-LM retraining and classifier fine-tuning
//! through a pluggable [`Backend`], with best-by-loss checkpoint selection and
//! a self-describing run directory.
//!
//! Run directory layout:
//!
//! ```text
//! <run>/config.json        frozen config, written before the backend starts
//! <run>/checkpoints.jsonl  one CheckpointRecord per evaluation, append-only
//! <run>/handle.json        handle of the selected checkpoint
//! <run>/artifacts/         backend-owned files
//! ```

mod external;
mod reference;
mod stub;

use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::{ExperimentCondition, LanguageCondition};
use crate::corpus::RetrainCorpus;
use crate::dataset::{LabeledDataset, Task};

pub use external::ExternalBackend;
pub use reference::ReferenceBackend;
pub use stub::StubBackend;

pub const CONFIG_FILE: &str = "config.json";
pub const CHECKPOINT_LOG: &str = "checkpoints.jsonl";
pub const HANDLE_FILE: &str = "handle.json";
pub const ARTIFACT_DIR: &str = "artifacts";

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("retraining corpus is empty")]
    EmptyCorpus,
    #[error("run produced no checkpoint records")]
    EmptyRunLog,
    #[error("train schema ({train}) does not match validation schema ({validation})")]
    SchemaMismatch { train: String, validation: String },
    #[error("backend '{backend}' failed: {reason}")]
    BackendFailure { backend: String, reason: String },
    #[error("checkpoint step {step} does not follow step {previous}")]
    NonMonotonicSteps { previous: u64, step: u64 },
    #[error("{0}")]
    InvalidProvenance(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl TrainerError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        TrainerError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn json(path: &Path, source: serde_json::Error) -> Self {
        TrainerError::Json { path: path.to_path_buf(), source }
    }

    pub(crate) fn backend(backend: &str, reason: impl Into<String>) -> Self {
        TrainerError::BackendFailure { backend: backend.to_string(), reason: reason.into() }
    }
}

fn positive(name: &str, value: u64) -> Result<(), TrainerError> {
    if value == 0 {
        return Err(TrainerError::InvalidConfig(format!("{name} must be at least 1")));
    }
    Ok(())
}

fn positive_real(name: &str, value: f64) -> Result<(), TrainerError> {
    if !(value.is_finite() && value > 0.0) {
        return Err(TrainerError::InvalidConfig(format!("{name} must be a positive number, got {value}")));
    }
    Ok(())
}

/// Masked-LM retraining settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RetrainConfigFields")]
pub struct RetrainConfig {
    pub epochs: u32,
    pub eval_every_steps: u64,
    pub seed: u64,
    pub backend: String,
    pub batch_size: usize,
    pub max_seq_len: usize,
    pub learning_rate: f64,
    pub mask_probability: f64,
}

#[derive(Deserialize)]
struct RetrainConfigFields {
    epochs: u32,
    eval_every_steps: u64,
    seed: u64,
    backend: String,
    batch_size: usize,
    max_seq_len: usize,
    learning_rate: f64,
    mask_probability: f64,
}

impl TryFrom<RetrainConfigFields> for RetrainConfig {
    type Error = TrainerError;

    fn try_from(f: RetrainConfigFields) -> Result<Self, Self::Error> {
        let c = RetrainConfig {
            epochs: f.epochs,
            eval_every_steps: f.eval_every_steps,
            seed: f.seed,
            backend: f.backend,
            batch_size: f.batch_size,
            max_seq_len: f.max_seq_len,
            learning_rate: f.learning_rate,
            mask_probability: f.mask_probability,
        };
        c.validate()?;
        Ok(c)
    }
}

impl RetrainConfig {
    pub const DEFAULT_EPOCHS: u32 = 4;
    pub const DEFAULT_EVAL_EVERY: u64 = 500;

    pub fn new(epochs: u32, eval_every_steps: u64, seed: u64, backend: impl Into<String>) -> Result<Self, TrainerError> {
        let c = RetrainConfig {
            epochs,
            eval_every_steps,
            seed,
            backend: backend.into(),
            batch_size: 8,
            max_seq_len: 512,
            learning_rate: 4e-5,
            mask_probability: 0.15,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_defaults(seed: u64, backend: impl Into<String>) -> Self {
        Self::new(Self::DEFAULT_EPOCHS, Self::DEFAULT_EVAL_EVERY, seed, backend).expect("defaults are valid")
    }

    pub fn validate(&self) -> Result<(), TrainerError> {
        positive("epochs", self.epochs.into())?;
        positive("eval_every_steps", self.eval_every_steps)?;
        positive("batch_size", self.batch_size as u64)?;
        positive("max_seq_len", self.max_seq_len as u64)?;
        positive_real("learning_rate", self.learning_rate)?;
        if !(self.mask_probability > 0.0 && self.mask_probability < 1.0) {
            return Err(TrainerError::InvalidConfig("mask_probability must be in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    AdamW,
}

/// Classifier fine-tuning settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FinetuneConfigFields")]
pub struct FinetuneConfig {
    pub epochs: u32,
    pub eval_every_steps: u64,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_seq_len: usize,
    pub seed: u64,
}

#[derive(Deserialize)]
struct FinetuneConfigFields {
    epochs: u32,
    eval_every_steps: u64,
    optimizer: Optimizer,
    learning_rate: f64,
    weight_decay: f64,
    batch_size: usize,
    max_seq_len: usize,
    seed: u64,
}

impl TryFrom<FinetuneConfigFields> for FinetuneConfig {
    type Error = TrainerError;

    fn try_from(f: FinetuneConfigFields) -> Result<Self, Self::Error> {
        let c = FinetuneConfig {
            epochs: f.epochs,
            eval_every_steps: f.eval_every_steps,
            optimizer: f.optimizer,
            learning_rate: f.learning_rate,
            weight_decay: f.weight_decay,
            batch_size: f.batch_size,
            max_seq_len: f.max_seq_len,
            seed: f.seed,
        };
        c.validate()?;
        Ok(c)
    }
}

impl FinetuneConfig {
    pub const DEFAULT_EPOCHS: u32 = 8;
    pub const DEFAULT_EVAL_EVERY: u64 = 500;
    pub const DEFAULT_LEARNING_RATE: f64 = 4e-5;

    pub fn new(epochs: u32, eval_every_steps: u64, learning_rate: f64, seed: u64) -> Result<Self, TrainerError> {
        let c = FinetuneConfig {
            epochs,
            eval_every_steps,
            optimizer: Optimizer::AdamW,
            learning_rate,
            weight_decay: 0.0,
            batch_size: 8,
            max_seq_len: 512,
            seed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_defaults(seed: u64) -> Self {
        Self::new(Self::DEFAULT_EPOCHS, Self::DEFAULT_EVAL_EVERY, Self::DEFAULT_LEARNING_RATE, seed)
            .expect("defaults are valid")
    }

    pub fn validate(&self) -> Result<(), TrainerError> {
        positive("epochs", self.epochs.into())?;
        positive("eval_every_steps", self.eval_every_steps)?;
        positive("batch_size", self.batch_size as u64)?;
        positive("max_seq_len", self.max_seq_len as u64)?;
        positive_real("learning_rate", self.learning_rate)?;
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(TrainerError::InvalidConfig("weight_decay must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub step: u64,
    pub eval_loss: f64,
    pub artifact_uri: String,
}

/// Minimum eval loss; the earliest step wins a tie.
pub fn select_best_checkpoint(records: &[CheckpointRecord]) -> Result<&CheckpointRecord, TrainerError> {
    let mut best: Option<&CheckpointRecord> = None;
    for r in records {
        match best {
            Some(b) if r.eval_loss > b.eval_loss => {}
            Some(b) if r.eval_loss == b.eval_loss && r.step >= b.step => {}
            _ => best = Some(r),
        }
    }
    best.ok_or(TrainerError::EmptyRunLog)
}

/// A language model checkpoint: the pretrained encoder or a retrained one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHandle {
    pub backend: String,
    pub artifact_uri: String,
    pub condition: ExperimentCondition,
    /// Corpus the model was retrained on; `None` for the pretrained model.
    pub source_corpus: Option<String>,
    pub eval_loss: Option<f64>,
}

impl ModelHandle {
    /// The backend's off-the-shelf encoder.
    pub fn pretrained(backend: &dyn Backend) -> Self {
        ModelHandle {
            backend: backend.id().to_string(),
            artifact_uri: backend.pretrained_uri(),
            condition: ExperimentCondition::Baseline,
            source_corpus: None,
            eval_loss: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHandle {
    pub backend: String,
    pub artifact_uri: String,
    pub condition: ExperimentCondition,
    pub source_corpus: Option<String>,
    pub language: LanguageCondition,
    pub task: Task,
    pub labels: Vec<String>,
    pub eval_loss: f64,
}

/// Receives each evaluation as the backend produces it.
pub type EvalSink<'a> = dyn FnMut(CheckpointRecord) -> Result<(), TrainerError> + 'a;

/// A model implementation. Backends own their artifacts; the orchestrator
/// only passes URIs around.
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    /// URI of the model used when no retraining happens.
    fn pretrained_uri(&self) -> String;

    fn supports_mlm(&self) -> bool {
        true
    }

    /// Continue masked-LM training of `base` on `texts`, reporting every
    /// evaluation through `on_eval`.
    fn retrain_mlm(
        &self,
        base: &ModelHandle,
        texts: &[String],
        config: &RetrainConfig,
        artifacts: &Path,
        on_eval: &mut EvalSink<'_>,
    ) -> Result<(), TrainerError>;

    /// Train a classification head over `model`, evaluating on `validation`.
    fn finetune_classifier(
        &self,
        model: &ModelHandle,
        train: &LabeledDataset,
        validation: &LabeledDataset,
        config: &FinetuneConfig,
        artifacts: &Path,
        on_eval: &mut EvalSink<'_>,
    ) -> Result<(), TrainerError>;

    fn predict(&self, classifier: &ClassifierHandle, texts: &[String]) -> Result<Vec<String>, TrainerError>;
}

/// Build a backend from its id: `reference`, `stub`, or `external:<program>`.
pub fn backend_from_id(id: &str) -> Result<Box<dyn Backend>, TrainerError> {
    match id {
        "reference" => Ok(Box::new(ReferenceBackend::default())),
        "stub" => Ok(Box::new(StubBackend)),
        _ => match id.strip_prefix("external:") {
            Some(program) if !program.is_empty() => Ok(Box::new(ExternalBackend::new(program))),
            _ => Err(TrainerError::InvalidConfig(format!(
                "unknown backend '{id}' (expected reference, stub or external:<program>)"
            ))),
        },
    }
}

pub(crate) fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), TrainerError> {
    let mut body = serde_json::to_string_pretty(value).map_err(|e| TrainerError::json(path, e))?;
    body.push('\n');
    fs::write(path, body).map_err(|e| TrainerError::io(path, e))
}

pub(crate) fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, TrainerError> {
    let raw = fs::read_to_string(path).map_err(|e| TrainerError::io(path, e))?;
    serde_json::from_str(&raw).map_err(|e| TrainerError::json(path, e))
}

/// Append-only checkpoint log that rejects non-increasing steps and flushes
/// after every record.
struct CheckpointLog {
    path: PathBuf,
    file: File,
    records: Vec<CheckpointRecord>,
}

impl CheckpointLog {
    fn create(run_dir: &Path) -> Result<Self, TrainerError> {
        let path = run_dir.join(CHECKPOINT_LOG);
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(&path)
            .map_err(|e| TrainerError::io(&path, e))?;
        Ok(CheckpointLog { path, file, records: Vec::new() })
    }

    fn push(&mut self, record: CheckpointRecord) -> Result<(), TrainerError> {
        if let Some(prev) = self.records.last() {
            if record.step <= prev.step {
                return Err(TrainerError::NonMonotonicSteps { previous: prev.step, step: record.step });
            }
        }
        if !(record.eval_loss.is_finite() && record.eval_loss >= 0.0) {
            return Err(TrainerError::InvalidConfig(format!(
                "checkpoint at step {} has invalid loss {}",
                record.step, record.eval_loss
            )));
        }
        let line = serde_json::to_string(&record).map_err(|e| TrainerError::json(&self.path, e))?;
        writeln!(self.file, "{line}")
            .and_then(|_| self.file.flush())
            .map_err(|e| TrainerError::io(&self.path, e))?;
        self.records.push(record);
        Ok(())
    }
}

pub fn read_checkpoint_log(run_dir: &Path) -> Result<Vec<CheckpointRecord>, TrainerError> {
    let path = run_dir.join(CHECKPOINT_LOG);
    let raw = fs::read_to_string(&path).map_err(|e| TrainerError::io(&path, e))?;
    raw.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| TrainerError::json(&path, e)))
        .collect()
}

fn prepare_run_dir<C: Serialize>(run_dir: &Path, snapshot: &C) -> Result<PathBuf, TrainerError> {
    let artifacts = run_dir.join(ARTIFACT_DIR);
    fs::create_dir_all(&artifacts).map_err(|e| TrainerError::io(&artifacts, e))?;
    write_json_file(&run_dir.join(CONFIG_FILE), snapshot)?;
    Ok(artifacts)
}

#[derive(Serialize)]
struct RetrainSnapshot<'a> {
    stage: &'static str,
    condition: ExperimentCondition,
    language: LanguageCondition,
    corpus: &'a str,
    corpus_size: usize,
    base_model: &'a str,
    config: &'a RetrainConfig,
}

#[derive(Serialize)]
struct FinetuneSnapshot<'a> {
    stage: &'static str,
    condition: ExperimentCondition,
    language: LanguageCondition,
    task: Task,
    labels: &'a [String],
    train_rows: usize,
    validation_rows: usize,
    model: &'a ModelHandle,
    config: &'a FinetuneConfig,
}

/// Identifier of a retraining corpus used in handle provenance.
pub fn corpus_id(corpus: &RetrainCorpus) -> String {
    format!("{}:{}:seed={}:n={}", corpus.language.name(), corpus.provenance, corpus.seed, corpus.len())
}

/// Retrain `base` on `corpus` under `condition` (retrained or script-mixed).
pub fn retrain(
    backend: &dyn Backend,
    base: &ModelHandle,
    corpus: &RetrainCorpus,
    condition: ExperimentCondition,
    config: &RetrainConfig,
    run_dir: &Path,
) -> Result<ModelHandle, TrainerError> {
    config.validate()?;
    if condition == ExperimentCondition::Baseline {
        return Err(TrainerError::InvalidProvenance("the baseline condition has no retraining stage".into()));
    }
    if corpus.is_empty() {
        return Err(TrainerError::EmptyCorpus);
    }
    if !backend.supports_mlm() {
        return Err(TrainerError::backend(backend.id(), "backend has no masked-LM objective"));
    }
    let source = corpus_id(corpus);
    let artifacts = prepare_run_dir(
        run_dir,
        &RetrainSnapshot {
            stage: "retrain",
            condition,
            language: corpus.language,
            corpus: &source,
            corpus_size: corpus.len(),
            base_model: &base.artifact_uri,
            config,
        },
    )?;
    let mut log = CheckpointLog::create(run_dir)?;
    log::info!("retraining {} on {} texts ({})", backend.id(), corpus.len(), condition);
    backend.retrain_mlm(base, &corpus.texts, config, &artifacts, &mut |r| log.push(r))?;
    let best = select_best_checkpoint(&log.records)?;
    let handle = ModelHandle {
        backend: backend.id().to_string(),
        artifact_uri: best.artifact_uri.clone(),
        condition,
        source_corpus: Some(source),
        eval_loss: Some(best.eval_loss),
    };
    write_json_file(&run_dir.join(HANDLE_FILE), &handle)?;
    Ok(handle)
}

/// Fine-tune a classifier over `model`. `train` is expected to be oversampled
/// already; `validation` is used as-is.
pub fn finetune(
    backend: &dyn Backend,
    model: &ModelHandle,
    train: &LabeledDataset,
    validation: &LabeledDataset,
    config: &FinetuneConfig,
    run_dir: &Path,
) -> Result<ClassifierHandle, TrainerError> {
    config.validate()?;
    if !train.schema.is_compatible(&validation.schema) {
        return Err(TrainerError::SchemaMismatch {
            train: format!("task {} {:?}", train.schema.task(), train.schema.labels()),
            validation: format!("task {} {:?}", validation.schema.task(), validation.schema.labels()),
        });
    }
    if (model.condition == ExperimentCondition::Baseline) != model.source_corpus.is_none() {
        return Err(TrainerError::InvalidProvenance(format!(
            "{} model handle {} a source corpus",
            model.condition,
            if model.source_corpus.is_some() { "must not carry" } else { "needs" }
        )));
    }
    let artifacts = prepare_run_dir(
        run_dir,
        &FinetuneSnapshot {
            stage: "finetune",
            condition: model.condition,
            language: train.language,
            task: train.schema.task(),
            labels: train.schema.labels(),
            train_rows: train.len(),
            validation_rows: validation.len(),
            model,
            config,
        },
    )?;
    let mut log = CheckpointLog::create(run_dir)?;
    log::info!("fine-tuning {} on {} rows ({})", backend.id(), train.len(), model.condition);
    backend.finetune_classifier(model, train, validation, config, &artifacts, &mut |r| log.push(r))?;
    let best = select_best_checkpoint(&log.records)?;
    let handle = ClassifierHandle {
        backend: backend.id().to_string(),
        artifact_uri: best.artifact_uri.clone(),
        condition: model.condition,
        source_corpus: model.source_corpus.clone(),
        language: train.language,
        task: train.schema.task(),
        labels: train.schema.labels().to_vec(),
        eval_loss: best.eval_loss,
    };
    write_json_file(&run_dir.join(HANDLE_FILE), &handle)?;
    Ok(handle)
}

/// One schema label per input text.
pub fn predict(
    backend: &dyn Backend,
    classifier: &ClassifierHandle,
    texts: &[String],
) -> Result<Vec<String>, TrainerError> {
    if classifier.backend != backend.id() {
        return Err(TrainerError::backend(
            backend.id(),
            format!("classifier was trained by backend '{}'", classifier.backend),
        ));
    }
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    let labels = backend.predict(classifier, texts)?;
    if labels.len() != texts.len() {
        return Err(TrainerError::backend(
            backend.id(),
            format!("{} predictions for {} texts", labels.len(), texts.len()),
        ));
    }
    if let Some(bad) = labels.iter().find(|l| !classifier.labels.contains(l)) {
        return Err(TrainerError::backend(backend.id(), format!("predicted label '{bad}' is not in the schema")));
    }
    Ok(labels)
}

pub fn read_model_handle(run_dir: &Path) -> Result<ModelHandle, TrainerError> {
    read_json_file(&run_dir.join(HANDLE_FILE))
}

pub fn read_classifier_handle(run_dir: &Path) -> Result<ClassifierHandle, TrainerError> {
    read_json_file(&run_dir.join(HANDLE_FILE))
}

/// Step schedule shared by the bundled backends: evaluate every
/// `eval_every` global steps and again at the end of each epoch.
pub(crate) fn is_eval_step(step: u64, eval_every: u64, epoch_end: bool) -> bool {
    epoch_end || step.is_multiple_of(eval_every)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(step: u64, eval_loss: f64) -> CheckpointRecord {
        CheckpointRecord { step, eval_loss, artifact_uri: format!("x:{step}") }
    }

    #[test]
    fn best_checkpoint_examples() {
        let log = [rec(500, 2.3), rec(1000, 1.9), rec(1500, 2.0)];
        assert_eq!(select_best_checkpoint(&log).unwrap().step, 1000);
        let tie = [rec(500, 1.9), rec(1000, 1.9)];
        assert_eq!(select_best_checkpoint(&tie).unwrap().step, 500);
        assert!(matches!(select_best_checkpoint(&[]), Err(TrainerError::EmptyRunLog)));
    }

    #[test]
    fn config_defaults_and_validation() {
        let r = RetrainConfig::with_defaults(1, "reference");
        assert_eq!((r.epochs, r.eval_every_steps), (4, 500));
        let f = FinetuneConfig::with_defaults(1);
        assert_eq!((f.epochs, f.eval_every_steps, f.learning_rate), (8, 500, 4e-5));
        assert_eq!(f.optimizer, Optimizer::AdamW);
        assert!(matches!(RetrainConfig::new(0, 500, 1, "reference"), Err(TrainerError::InvalidConfig(_))));
        assert!(RetrainConfig::new(1, 0, 1, "reference").is_err());
        assert!(FinetuneConfig::new(0, 500, 4e-5, 1).is_err());
        assert!(FinetuneConfig::new(1, 500, 0.0, 1).is_err());
    }

    #[test]
    fn config_json_round_trip_validates() {
        let r = RetrainConfig::with_defaults(3, "stub");
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<RetrainConfig>(&json).unwrap(), r);
        let bad = json.replace("\"epochs\":4", "\"epochs\":0");
        assert!(serde_json::from_str::<RetrainConfig>(&bad).is_err());
    }

    #[test]
    fn log_rejects_non_increasing_steps() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = CheckpointLog::create(dir.path()).unwrap();
        log.push(rec(10, 1.0)).unwrap();
        assert!(matches!(log.push(rec(10, 0.5)), Err(TrainerError::NonMonotonicSteps { .. })));
        assert!(log.push(rec(11, f64::NAN)).is_err());
        assert_eq!(read_checkpoint_log(dir.path()).unwrap(), vec![rec(10, 1.0)]);
    }

    #[test]
    fn backend_ids() {
        assert_eq!(backend_from_id("reference").unwrap().id(), "reference");
        assert_eq!(backend_from_id("stub").unwrap().id(), "stub");
        assert!(backend_from_id("external:").is_err());
        assert!(backend_from_id("gpu").is_err());
    }
}
