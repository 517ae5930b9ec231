use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hatemix_core::dataset::{Split, TaskSchema};
use hatemix_core::metrics::{
    read_submission_labels, validate_submission, write_submission, ComparisonTable, EvalReport, RunProvenance,
    SubmissionFormat, SubmissionMark, SubmissionReport,
};
use hatemix_core::trainer::{backend_from_id, predict, read_classifier_handle};
use hatemix_core::{ExperimentCondition, LanguageCondition};

use crate::config::PipelineConfig;
use crate::layout;
use crate::train_cmd::load_split;

/// A trained job found under the run directory.
struct FoundJob {
    dir: PathBuf,
    config: PipelineConfig,
    language: LanguageCondition,
    condition: ExperimentCondition,
}

fn find_jobs(cfg: &PipelineConfig, conditions: Option<&[ExperimentCondition]>) -> Result<Vec<FoundJob>> {
    let root = layout::jobs_dir(&cfg.run_dir);
    let mut dirs: Vec<PathBuf> = match fs::read_dir(&root) {
        Ok(entries) => entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect(),
        Err(_) => Vec::new(),
    };
    dirs.sort();
    let mut found = Vec::new();
    for dir in dirs {
        let snapshot = dir.join(layout::JOB_CONFIG);
        let Ok(raw) = fs::read_to_string(&snapshot) else { continue };
        let config: PipelineConfig =
            serde_json::from_str(&raw).with_context(|| format!("parsing {}", snapshot.display()))?;
        let (Some(&language), Some(&condition)) = (config.languages.first(), config.conditions.first()) else {
            continue;
        };
        if config.task != cfg.task
            || !cfg.languages.contains(&language)
            || conditions.is_some_and(|c| !c.contains(&condition))
        {
            continue;
        }
        found.push(FoundJob { dir, config, language, condition });
    }
    Ok(found)
}

pub fn submission_marks(cfg: &PipelineConfig) -> Result<BTreeMap<LanguageCondition, SubmissionMark>> {
    cfg.submitted
        .iter()
        .map(|(language, spec)| {
            let (condition, valid) = match spec.split_once(':') {
                Some((c, "invalid")) => (c, false),
                Some((_, other)) => bail!("submission flag for {language} must be 'invalid', got '{other}'"),
                None => (spec.as_str(), true),
            };
            let condition: ExperimentCondition = condition.parse().map_err(anyhow::Error::msg)?;
            Ok((*language, SubmissionMark { condition, valid }))
        })
        .collect()
}

fn score_job(cfg: &PipelineConfig, job: &FoundJob, split: Split) -> Result<EvalReport> {
    let classifier_dir = job.dir.join(layout::CLASSIFIER_DIR);
    let handle = read_classifier_handle(&classifier_dir)
        .with_context(|| format!("no trained classifier in {}", classifier_dir.display()))?;
    let backend = backend_from_id(&job.config.backend)?;
    let gold = load_split(cfg, job.language, split)?;
    let predicted = predict(backend.as_ref(), &handle, &gold.texts())?;

    let format = SubmissionFormat::default();
    let ids: Vec<String> = gold.rows.iter().map(|r| r.id.clone()).collect();
    let pred_path = job.dir.join(layout::PREDICTIONS);
    write_submission(&pred_path, Some(&ids), &predicted, &format)?;
    let check = validate_submission(&pred_path, &gold.schema, gold.len(), &format);
    if !check.is_valid() {
        print_violations(&pred_path, &check);
        bail!("predictions in {} failed validation", pred_path.display());
    }
    let labels = read_submission_labels(&pred_path, &gold.schema, &format)?;
    let provenance = RunProvenance { language: job.language, task: cfg.task, condition: job.condition };
    let report = EvalReport::from_predictions(provenance, &gold.labels(), &labels, &gold.schema)?;
    fs::write(job.dir.join(layout::REPORT), serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(report)
}

/// Predict, validate and score every trained job for the task, then write
/// the comparison table.
pub fn evaluate(cfg: &PipelineConfig, split: Split, conditions: Option<&[ExperimentCondition]>) -> Result<()> {
    let jobs = find_jobs(cfg, conditions)?;
    if jobs.is_empty() {
        bail!("nothing to evaluate: no trained task {} runs under {}", cfg.task, layout::jobs_dir(&cfg.run_dir).display());
    }
    let mut reports = Vec::new();
    for job in &jobs {
        let report = score_job(cfg, job, split)
            .with_context(|| format!("evaluating {}", job.dir.file_name().unwrap_or_default().to_string_lossy()))?;
        println!(
            "{}: weighted macro F1 {:.4} on {} {} rows",
            layout::job_name(job.language, cfg.task, job.condition),
            report.weighted_macro_f1,
            report.matrix.n,
            split
        );
        reports.push(report);
    }
    write_tables(cfg, &reports)
}

/// Rebuild the comparison table from scored jobs.
pub fn report(cfg: &PipelineConfig, conditions: Option<&[ExperimentCondition]>) -> Result<()> {
    let jobs = find_jobs(cfg, conditions)?;
    let mut reports = Vec::new();
    for job in jobs {
        let path = job.dir.join(layout::REPORT);
        if !path.exists() {
            log::warn!("{} has not been evaluated; skipped", job.dir.display());
            continue;
        }
        let raw = fs::read_to_string(&path)?;
        reports.push(serde_json::from_str::<EvalReport>(&raw).with_context(|| format!("parsing {}", path.display()))?);
    }
    if reports.is_empty() {
        bail!("nothing to report: no evaluated task {} runs under {}", cfg.task, layout::jobs_dir(&cfg.run_dir).display());
    }
    write_tables(cfg, &reports)
}

fn write_tables(cfg: &PipelineConfig, reports: &[EvalReport]) -> Result<()> {
    let table = ComparisonTable::from_reports(reports, &submission_marks(cfg)?, &cfg.ranks)?;
    let stem = layout::table_stem(&cfg.run_dir, cfg.task);
    let dir = layout::reports_dir(&cfg.run_dir);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(stem.with_extension("txt"), table.to_text())?;
    fs::write(stem.with_extension("csv"), table.to_csv())?;
    fs::write(stem.with_extension("tex"), table.to_latex())?;
    fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&table)? + "\n")?;
    print!("{}", table.to_text());
    Ok(())
}

pub fn print_violations(path: &Path, report: &SubmissionReport) {
    for v in &report.violations {
        eprintln!("{}: {v}", path.display());
    }
}

/// Check a prediction file; `Err` when it has violations.
pub fn check_submission(path: &Path, schema: &TaskSchema, expected: usize, format: &SubmissionFormat) -> Result<()> {
    let report = validate_submission(path, schema, expected, format);
    if report.is_valid() {
        println!("{}: valid ({} rows)", path.display(), report.rows);
        return Ok(());
    }
    print_violations(path, &report);
    bail!("{}: {} violation(s)", path.display(), report.violations.len())
}

/// `evaluate --validate-only`: row count comes from `expected` or from the
/// gold split of the single selected language.
pub fn validate_only(cfg: &PipelineConfig, path: &Path, split: Split, expected: Option<usize>) -> Result<()> {
    let schema = TaskSchema::builtin(cfg.task)?;
    let expected = match expected {
        Some(n) => n,
        None => {
            let [language] = cfg.languages[..] else {
                bail!("pass --expected-rows or exactly one --language to size the gold split");
            };
            load_split(cfg, language, split)?.len()
        }
    };
    check_submission(path, &schema, expected, &SubmissionFormat::default())
}
