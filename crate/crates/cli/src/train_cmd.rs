use std::fs::{self, File};
use std::io::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use anyhow::{Context, Result};
use hatemix_core::corpus::read_corpus;
use hatemix_core::dataset::{load_labeled_csv, oversample, CsvLayout, LabeledDataset, Split, TaskSchema};
use hatemix_core::trainer::{backend_from_id, finetune, retrain, Backend, ClassifierHandle, ModelHandle};
use hatemix_core::{ExperimentCondition, LanguageCondition};
use serde_json::{json, Value};

use crate::config::PipelineConfig;
use crate::layout;

/// Stage log of one job; no timestamps so that reruns compare equal.
struct Events {
    file: File,
}

impl Events {
    fn create(path: &Path) -> Result<Self> {
        Ok(Events { file: File::create(path).with_context(|| format!("creating {}", path.display()))? })
    }

    fn push(&mut self, event: Value) -> Result<()> {
        writeln!(self.file, "{event}")?;
        self.file.flush()?;
        Ok(())
    }
}

pub fn csv_layout(cfg: &PipelineConfig) -> CsvLayout {
    CsvLayout {
        text_column: cfg.text_column.clone(),
        label_column: cfg.label_column.clone(),
        id_column: cfg.id_column.clone(),
        ..CsvLayout::default()
    }
}

pub fn load_split(cfg: &PipelineConfig, language: LanguageCondition, split: Split) -> Result<LabeledDataset> {
    let schema = TaskSchema::builtin(cfg.task)?;
    let path = layout::labeled_file(cfg.data_dir()?, language, cfg.task, split);
    load_labeled_csv(&path, &schema, language, split, &csv_layout(cfg))
        .with_context(|| format!("loading {}", path.display()))
}

/// Run `stage`, logging start and outcome.
fn stage<T>(events: &mut Events, name: &str, f: impl FnOnce() -> Result<(T, Value)>) -> Result<T> {
    events.push(json!({"stage": name, "status": "started"}))?;
    match f() {
        Ok((value, mut detail)) => {
            detail["stage"] = json!(name);
            detail["status"] = json!("done");
            events.push(detail)?;
            Ok(value)
        }
        Err(err) => {
            events.push(json!({"stage": name, "status": "failed", "error": format!("{err:#}")}))?;
            Err(err)
        }
    }
}

fn run_job(
    cfg: &PipelineConfig,
    backend: &dyn Backend,
    language: LanguageCondition,
    condition: ExperimentCondition,
) -> Result<ClassifierHandle> {
    let dir = layout::job_dir(&cfg.run_dir, language, cfg.task, condition);
    if dir.exists() {
        fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
    }
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let snapshot = cfg.for_job(language, condition);
    fs::write(dir.join(layout::JOB_CONFIG), serde_json::to_string_pretty(&snapshot)? + "\n")?;
    let mut events = Events::create(&dir.join(layout::JOB_EVENTS))?;

    let train = stage(&mut events, "load", || {
        let train = load_split(cfg, language, Split::Train)?;
        let n = train.len();
        Ok((train, json!({"train_rows": n})))
    })?;
    let validation = load_split(cfg, language, Split::Validation)?;
    let train = stage(&mut events, "oversample", || {
        let out = oversample(&train, cfg.oversampling_seed)?;
        let detail = json!({"rows_before": train.len(), "rows_after": out.len()});
        Ok((out, detail))
    })?;

    let base = ModelHandle::pretrained(backend);
    let model = match condition {
        ExperimentCondition::Baseline => base,
        ExperimentCondition::Retrained | ExperimentCondition::ScriptMixed => {
            let corpus_path = if condition == ExperimentCondition::Retrained {
                layout::corpus_file(&cfg.run_dir, language)
            } else {
                layout::mixed_corpus_file(&cfg.run_dir, language)
            };
            stage(&mut events, "retrain", || {
                let corpus =
                    read_corpus(&corpus_path).with_context(|| format!("reading corpus {}", corpus_path.display()))?;
                let handle = retrain(backend, &base, &corpus, condition, &cfg.retrain_config()?, &dir.join(layout::MLM_DIR))?;
                let detail = json!({"corpus_size": corpus.len(), "eval_loss": handle.eval_loss});
                Ok((handle, detail))
            })?
        }
    };
    stage(&mut events, "finetune", || {
        let handle =
            finetune(backend, &model, &train, &validation, &cfg.finetune_config()?, &dir.join(layout::CLASSIFIER_DIR))?;
        let detail = json!({"eval_loss": handle.eval_loss});
        Ok((handle, detail))
    })
}

/// Train every (language, condition) job, `cfg.jobs` at a time.
pub fn train(cfg: &PipelineConfig) -> Result<()> {
    let backend = backend_from_id(&cfg.backend)?;
    let jobs: Vec<(LanguageCondition, ExperimentCondition)> = cfg
        .languages
        .iter()
        .flat_map(|&l| cfg.conditions.iter().map(move |&c| (l, c)))
        .collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<ClassifierHandle>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    thread::scope(|scope| {
        for _ in 0..cfg.jobs.min(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(language, condition)) = jobs.get(i) else { break };
                let outcome = run_job(cfg, backend.as_ref(), language, condition);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(outcome);
            });
        }
    });

    let mut first_err = None;
    for ((language, condition), outcome) in jobs.iter().zip(results.into_inner().expect("workers finished")) {
        let name = layout::job_name(*language, cfg.task, *condition);
        match outcome.expect("every job ran") {
            Ok(h) => println!("{name}: trained (validation loss {:.4})", h.eval_loss),
            Err(e) => {
                eprintln!("{name}: failed: {e:#}");
                first_err.get_or_insert(e.context(format!("job {name} failed")));
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}
