//! Backend that delegates to an external program, e.g. the bundled
//! `scripts/hf_backend.py` wrapping a pretrained transformer encoder.
//!
//! The program is run as `<program> <op>` with one JSON request on stdin and
//! answers with JSON lines on stdout:
//!
//! ```text
//! {"event": "checkpoint", "step": 500, "eval_loss": 1.92, "artifact_uri": "..."}
//! {"event": "predictions", "labels": ["...", "..."]}
//! {"event": "log", "message": "..."}
//! ```
//!
//! A non-zero exit status is a backend failure; checkpoints streamed before
//! the failure stay in the run log.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    Backend, CheckpointRecord, ClassifierHandle, EvalSink, FinetuneConfig, ModelHandle, RetrainConfig,
    TrainerError,
};
use crate::dataset::LabeledDataset;

pub const DEFAULT_PRETRAINED: &str = "xlm-roberta-base";

#[derive(Debug, Clone)]
pub struct ExternalBackend {
    program: Vec<String>,
    pretrained: String,
}

#[derive(Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
enum Event {
    Checkpoint { step: u64, eval_loss: f64, artifact_uri: String },
    Predictions { labels: Vec<String> },
    Log { message: String },
}

#[derive(Serialize)]
struct Row<'a> {
    text: &'a str,
    label: &'a str,
}

fn rows(ds: &LabeledDataset) -> Vec<Row<'_>> {
    ds.rows.iter().map(|r| Row { text: &r.text, label: &r.label }).collect()
}

impl ExternalBackend {
    /// `program` is split on whitespace into the executable and its leading
    /// arguments.
    pub fn new(program: &str) -> Self {
        ExternalBackend {
            program: program.split_whitespace().map(String::from).collect(),
            pretrained: DEFAULT_PRETRAINED.into(),
        }
    }

    pub fn with_pretrained(mut self, model: impl Into<String>) -> Self {
        self.pretrained = model.into();
        self
    }

    fn fail(&self, reason: impl Into<String>) -> TrainerError {
        TrainerError::backend(self.id(), reason)
    }

    /// Run one operation, passing every event to `on_event`.
    fn call(
        &self,
        op: &str,
        request: serde_json::Value,
        mut on_event: impl FnMut(Event) -> Result<(), TrainerError>,
    ) -> Result<(), TrainerError> {
        let (exe, args) = self.program.split_first().ok_or_else(|| self.fail("no program configured"))?;
        let mut child = Command::new(exe)
            .args(args)
            .arg(op)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| self.fail(format!("cannot start '{exe}': {e}")))?;

        let body = serde_json::to_vec(&request).map_err(|e| self.fail(e.to_string()))?;
        let mut stdin = child.stdin.take().expect("stdin is piped");
        let writer = thread::spawn(move || stdin.write_all(&body));
        let mut stderr = child.stderr.take().expect("stderr is piped");
        let err_reader = thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });

        let stdout = child.stdout.take().expect("stdout is piped");
        let mut outcome = Ok(());
        for line in BufReader::new(stdout).lines() {
            let line = match line {
                Ok(l) => l,
                Err(e) => {
                    outcome = Err(self.fail(format!("reading output: {e}")));
                    break;
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            let event = match serde_json::from_str::<Event>(&line) {
                Ok(ev) => ev,
                Err(e) => {
                    outcome = Err(self.fail(format!("bad output line '{line}': {e}")));
                    break;
                }
            };
            if let Err(e) = on_event(event) {
                outcome = Err(e);
                break;
            }
        }
        if outcome.is_err() {
            let _ = child.kill();
        }
        let status = child.wait().map_err(|e| self.fail(e.to_string()))?;
        let stderr_text = err_reader.join().unwrap_or_default();
        // a child that exits early closes stdin; only report that if it also failed
        let write_result = writer.join();
        outcome?;
        if !status.success() {
            let tail: Vec<&str> = stderr_text.lines().rev().take(5).collect();
            let tail: Vec<&str> = tail.into_iter().rev().collect();
            return Err(self.fail(format!("{op} exited with {status}: {}", tail.join(" | "))));
        }
        match write_result {
            Ok(Ok(())) => Ok(()),
            Ok(Err(e)) => Err(self.fail(format!("writing request: {e}"))),
            Err(_) => Err(self.fail("request writer panicked")),
        }
    }

    fn stream_checkpoints(
        &self,
        op: &str,
        request: serde_json::Value,
        on_eval: &mut EvalSink<'_>,
    ) -> Result<(), TrainerError> {
        self.call(op, request, |event| match event {
            Event::Checkpoint { step, eval_loss, artifact_uri } => {
                on_eval(CheckpointRecord { step, eval_loss, artifact_uri })
            }
            Event::Log { message } => {
                log::info!("{op}: {message}");
                Ok(())
            }
            Event::Predictions { .. } => Err(self.fail(format!("unexpected predictions during {op}"))),
        })
    }
}

impl Backend for ExternalBackend {
    fn id(&self) -> &str {
        "external"
    }

    fn pretrained_uri(&self) -> String {
        self.pretrained.clone()
    }

    fn retrain_mlm(
        &self,
        base: &ModelHandle,
        texts: &[String],
        config: &RetrainConfig,
        artifacts: &Path,
        on_eval: &mut EvalSink<'_>,
    ) -> Result<(), TrainerError> {
        let request = json!({
            "model": base.artifact_uri,
            "texts": texts,
            "config": config,
            "artifacts": artifacts,
        });
        self.stream_checkpoints("retrain_mlm", request, on_eval)
    }

    fn finetune_classifier(
        &self,
        model: &ModelHandle,
        train: &LabeledDataset,
        validation: &LabeledDataset,
        config: &FinetuneConfig,
        artifacts: &Path,
        on_eval: &mut EvalSink<'_>,
    ) -> Result<(), TrainerError> {
        let request = json!({
            "model": model.artifact_uri,
            "labels": train.schema.labels(),
            "train": rows(train),
            "validation": rows(validation),
            "config": config,
            "artifacts": artifacts,
        });
        self.stream_checkpoints("finetune_classifier", request, on_eval)
    }

    fn predict(&self, classifier: &ClassifierHandle, texts: &[String]) -> Result<Vec<String>, TrainerError> {
        let request = json!({
            "model": classifier.artifact_uri,
            "labels": classifier.labels,
            "texts": texts,
        });
        let mut out = None;
        self.call("predict", request, |event| {
            match event {
                Event::Predictions { labels } => out = Some(labels),
                Event::Log { message } => log::info!("predict: {message}"),
                Event::Checkpoint { .. } => return Err(self.fail("unexpected checkpoint during predict")),
            }
            Ok(())
        })?;
        out.ok_or_else(|| self.fail("predict produced no predictions"))
    }
}
