//! `hatemix`: corpus building, script mixing, training, evaluation and
//! result tables for multilingual homophobia/transphobia classification.

mod config;
mod corpus_cmd;
mod evaluate_cmd;
mod layout;
mod train_cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use hatemix_core::dataset::{Split, Task, TaskSchema};
use hatemix_core::metrics::SubmissionFormat;
use hatemix_core::trainer::TrainerError;
use hatemix_core::{ExperimentCondition, LanguageCondition};

use config::{language_map, parse_pair, Overrides, PipelineConfig};

#[derive(Parser)]
#[command(name = "hatemix", version, about = "Multilingual homophobia/transphobia classification pipeline")]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory for corpora, jobs and reports. [default: runs]
    #[arg(long, global = true, env = "HATEMIX_RUN_DIR")]
    run_dir: Option<PathBuf>,
    /// Training backend: reference, stub or external:<program>. [default: reference]
    #[arg(long, global = true, env = "HATEMIX_BACKEND")]
    backend: Option<String>,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Selection {
    /// Language conditions, by name or ISO code. [default: all five]
    #[arg(long = "language", short = 'l', value_delimiter = ',')]
    languages: Vec<LanguageCondition>,
    /// Label schema: A (3 labels) or B (7 labels). [default: A]
    #[arg(long)]
    task: Option<Task>,
}

#[derive(Subcommand)]
enum Command {
    /// Clean, filter and sample a JSONL tweet dump into per-language corpora.
    BuildCorpus {
        #[command(flatten)]
        sel: Selection,
        /// JSONL tweet dump.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Texts per language. [default: 50000]
        #[arg(long)]
        sample_size: Option<usize>,
        /// Minimum cleaned length in characters. [default: 50]
        #[arg(long)]
        min_chars: Option<usize>,
        /// Minimum language-detection confidence. [default: 0.9]
        #[arg(long)]
        confidence: Option<f64>,
        /// Language detector for untagged records: whatlang or none. [default: whatlang]
        #[arg(long)]
        detector: Option<String>,
        /// Country per language, e.g. spanish=ES. [default: IN]
        #[arg(long = "country", value_parser = parse_pair)]
        countries: Vec<(String, String)>,
        /// Drop exact duplicate texts within a language.
        #[arg(long)]
        dedup: bool,
        /// Sampling seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write a script-mixed copy of each Indic corpus with this
        /// romanized share. [default when given without a value: 0.2]
        #[arg(long, num_args = 0..=1, default_missing_value = "0.2")]
        mix: Option<f64>,
        /// Mixing seed.
        #[arg(long)]
        mix_seed: Option<u64>,
    },
    /// Romanize a share of an existing Indic corpus.
    Mix {
        /// Corpus text file written by build-corpus.
        #[arg(long)]
        corpus: PathBuf,
        /// Output path. [default: <corpus>.mixed.txt]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Share of texts to romanize. [default: 0.2]
        #[arg(long)]
        ratio: Option<f64>,
        /// Mixing seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Retrain (unless baseline) and fine-tune one job per language and condition.
    Train {
        #[command(flatten)]
        sel: Selection,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Predict, validate and score trained jobs; write the comparison table.
    Evaluate {
        #[command(flatten)]
        sel: Selection,
        #[command(flatten)]
        table: TableArgs,
        /// Directory with <language>_task<a|b>_<train|dev|test>.csv files.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Gold split to score against: test or dev.
        #[arg(long, default_value = "test")]
        split: Split,
        /// Only validate this prediction file; no scoring.
        #[arg(long)]
        validate_only: Option<PathBuf>,
        /// Expected prediction rows for --validate-only.
        #[arg(long)]
        expected_rows: Option<usize>,
    },
    /// Check a prediction file against a label schema and row count.
    ValidateSubmission {
        /// Prediction file.
        file: PathBuf,
        /// Built-in schema: A or B.
        #[arg(long, default_value = "A")]
        task: Task,
        /// Schema file replacing the built-in one.
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Number of prediction rows the file must have.
        #[arg(long)]
        expected_rows: usize,
        /// One label per line instead of id,label rows.
        #[arg(long)]
        labels_only: bool,
        /// The file has no header line.
        #[arg(long)]
        no_header: bool,
        #[arg(long, default_value = ",")]
        delimiter: char,
    },
    /// Rebuild the comparison table from evaluated jobs.
    Report {
        #[command(flatten)]
        sel: Selection,
        #[command(flatten)]
        table: TableArgs,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Conditions to run: baseline, retrained, script-mixed. [default: baseline]
    #[arg(long = "condition", short = 'c', value_delimiter = ',')]
    conditions: Vec<ExperimentCondition>,
    /// Directory with <language>_task<a|b>_<train|dev|test>.csv files.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Jobs run in parallel. [default: 1]
    #[arg(long, short = 'j')]
    jobs: Option<usize>,
    /// Masked-LM retraining epochs. [default: 4]
    #[arg(long)]
    retrain_epochs: Option<u32>,
    /// Retraining steps between evaluations. [default: 500]
    #[arg(long)]
    retrain_eval_every: Option<u64>,
    /// Fine-tuning epochs. [default: 8]
    #[arg(long)]
    epochs: Option<u32>,
    /// Fine-tuning steps between evaluations. [default: 500]
    #[arg(long)]
    eval_every: Option<u64>,
    /// AdamW learning rate. [default: 4e-5]
    #[arg(long)]
    learning_rate: Option<f64>,
    /// AdamW weight decay. [default: 0]
    #[arg(long)]
    weight_decay: Option<f64>,
    /// [default: 8]
    #[arg(long)]
    batch_size: Option<usize>,
    /// Tokens per text. [default: 512]
    #[arg(long)]
    max_seq_len: Option<usize>,
    /// Oversampling seed.
    #[arg(long)]
    oversample_seed: Option<u64>,
    /// Training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV text column. [default: text]
    #[arg(long)]
    text_column: Option<String>,
    /// CSV label column. [default: category]
    #[arg(long)]
    label_column: Option<String>,
    /// CSV id column. [default: id]
    #[arg(long)]
    id_column: Option<String>,
}

#[derive(Args)]
struct TableArgs {
    /// Only these conditions. [default: all found]
    #[arg(long = "condition", short = 'c', value_delimiter = ',')]
    conditions: Vec<ExperimentCondition>,
    /// Submitted condition per language, e.g. tamil=retrained or
    /// spanish=retrained:invalid.
    #[arg(long = "submitted", value_parser = parse_pair)]
    submitted: Vec<(String, String)>,
    /// Leaderboard rank per language, e.g. malayalam=1.
    #[arg(long = "rank", value_parser = parse_pair)]
    ranks: Vec<(String, String)>,
}

impl Cli {
    fn base_overrides(&self) -> Overrides {
        let mut o = Overrides::default();
        o.set("run_dir", self.run_dir.clone()).set("backend", self.backend.clone());
        o
    }
}

fn selection(o: &mut Overrides, sel: &Selection) {
    o.set_list("languages", &sel.languages).set("task", sel.task);
}

fn table_overrides(o: &mut Overrides, t: &TableArgs) -> Result<()> {
    o.set("submitted", language_map(&t.submitted, |v| Ok(v.to_string()))?);
    o.set("ranks", language_map(&t.ranks, |v| Ok(v.parse::<u32>()?))?);
    Ok(())
}

fn conditions_filter(c: &[ExperimentCondition]) -> Option<&[ExperimentCondition]> {
    (!c.is_empty()).then_some(c)
}

fn run(cli: Cli) -> Result<()> {
    let mut o = cli.base_overrides();
    let file = cli.config.as_deref();
    match &cli.command {
        Command::BuildCorpus {
            sel,
            input,
            sample_size,
            min_chars,
            confidence,
            detector,
            countries,
            dedup,
            seed,
            mix,
            mix_seed,
        } => {
            selection(&mut o, sel);
            o.set("raw_corpus", input.clone())
                .set("sample_size", *sample_size)
                .set("min_chars", *min_chars)
                .set("confidence_threshold", *confidence)
                .set("detector", detector.clone())
                .set("countries", language_map(countries, |v| Ok(v.to_string()))?)
                .set_flag("dedup", *dedup)
                .set("sampling_seed", *seed)
                .set("mix_ratio", *mix)
                .set("mixing_seed", *mix_seed);
            let cfg = PipelineConfig::resolve(file, o)?;
            corpus_cmd::build_corpus(&cfg, mix.map(|_| cfg.mix_ratio))
        }
        Command::Mix { corpus, out, ratio, seed } => {
            o.set("mix_ratio", *ratio).set("mixing_seed", *seed);
            let cfg = PipelineConfig::resolve(file, o)?;
            corpus_cmd::mix(corpus, out.as_deref(), cfg.mix_ratio, cfg.mixing_seed)
        }
        Command::Train { sel, train: t } => {
            selection(&mut o, sel);
            o.set_list("conditions", &t.conditions)
                .set("data_dir", t.data_dir.clone())
                .set("jobs", t.jobs)
                .set("retrain_epochs", t.retrain_epochs)
                .set("retrain_eval_every", t.retrain_eval_every)
                .set("finetune_epochs", t.epochs)
                .set("finetune_eval_every", t.eval_every)
                .set("learning_rate", t.learning_rate)
                .set("weight_decay", t.weight_decay)
                .set("batch_size", t.batch_size)
                .set("max_seq_len", t.max_seq_len)
                .set("oversampling_seed", t.oversample_seed)
                .set("training_seed", t.seed)
                .set("text_column", t.text_column.clone())
                .set("label_column", t.label_column.clone())
                .set("id_column", t.id_column.clone());
            let cfg = PipelineConfig::resolve(file, o)?;
            train_cmd::train(&cfg)
        }
        Command::Evaluate { sel, table, data_dir, split, validate_only, expected_rows } => {
            selection(&mut o, sel);
            table_overrides(&mut o, table)?;
            o.set("data_dir", data_dir.clone());
            let cfg = PipelineConfig::resolve(file, o)?;
            match validate_only {
                Some(path) => evaluate_cmd::validate_only(&cfg, path, *split, *expected_rows),
                None => evaluate_cmd::evaluate(&cfg, *split, conditions_filter(&table.conditions)),
            }
        }
        Command::ValidateSubmission { file: path, task, schema, expected_rows, labels_only, no_header, delimiter } => {
            let schema = match schema {
                Some(p) => TaskSchema::from_json_file(p)?,
                None => TaskSchema::builtin(*task)?,
            };
            let format = SubmissionFormat { with_ids: !labels_only, header: !no_header, delimiter: *delimiter };
            evaluate_cmd::check_submission(path, &schema, *expected_rows, &format)
        }
        Command::Report { sel, table } => {
            selection(&mut o, sel);
            table_overrides(&mut o, table)?;
            let cfg = PipelineConfig::resolve(file, o)?;
            evaluate_cmd::report(&cfg, conditions_filter(&table.conditions))
        }
    }
}

/// 2 for backend failures, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let backend_failed = err
        .chain()
        .any(|e| matches!(e.downcast_ref::<TrainerError>(), Some(TrainerError::BackendFailure { .. })));
    if backend_failed {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
