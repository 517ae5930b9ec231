//! Where things live under the run directory and the labelled-data directory.

use std::path::{Path, PathBuf};

use hatemix_core::dataset::{Split, Task};
use hatemix_core::{ExperimentCondition, LanguageCondition};

pub fn corpus_dir(run_dir: &Path) -> PathBuf {
    run_dir.join("corpus")
}

pub fn corpus_file(run_dir: &Path, language: LanguageCondition) -> PathBuf {
    corpus_dir(run_dir).join(format!("{}.txt", language.name()))
}

pub fn mixed_corpus_file(run_dir: &Path, language: LanguageCondition) -> PathBuf {
    corpus_dir(run_dir).join(format!("{}.mixed.txt", language.name()))
}

pub fn cleaning_report_file(run_dir: &Path) -> PathBuf {
    corpus_dir(run_dir).join("cleaning_report.json")
}

fn task_slug(task: Task) -> String {
    format!("task{}", task.name().to_ascii_lowercase())
}

pub fn jobs_dir(run_dir: &Path) -> PathBuf {
    run_dir.join("jobs")
}

pub fn job_name(language: LanguageCondition, task: Task, condition: ExperimentCondition) -> String {
    format!("{}-{}-{}", language.name(), task_slug(task), condition.name())
}

pub fn job_dir(run_dir: &Path, language: LanguageCondition, task: Task, condition: ExperimentCondition) -> PathBuf {
    jobs_dir(run_dir).join(job_name(language, task, condition))
}

/// Per-job files.
pub const JOB_CONFIG: &str = "config.json";
pub const JOB_EVENTS: &str = "events.jsonl";
pub const MLM_DIR: &str = "mlm";
pub const CLASSIFIER_DIR: &str = "classifier";
pub const PREDICTIONS: &str = "predictions.csv";
pub const REPORT: &str = "report.json";

pub fn reports_dir(run_dir: &Path) -> PathBuf {
    run_dir.join("reports")
}

pub fn table_stem(run_dir: &Path, task: Task) -> PathBuf {
    reports_dir(run_dir).join(format!("{}-{}", task_slug(task), "f1"))
}

fn split_slug(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Validation => "dev",
        Split::Test => "test",
    }
}

/// `<data_dir>/<language>_task<a|b>_<train|dev|test>.csv`
pub fn labeled_file(data_dir: &Path, language: LanguageCondition, task: Task, split: Split) -> PathBuf {
    data_dir.join(format!("{}_{}_{}.csv", language.name(), task_slug(task), split_slug(split)))
}
