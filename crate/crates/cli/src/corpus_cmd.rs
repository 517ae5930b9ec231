use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hatemix_core::corpus::{
    filter_records, read_corpus, read_tweets_jsonl, sample_corpus, write_corpus, CorpusFilterConfig,
    LanguageDetector, SpatioTemporalWindow, WhatlangDetector,
};
use hatemix_core::scriptmix::{simulate_mix, write_mixed_corpus};

use crate::config::PipelineConfig;
use crate::layout;

fn filter_config(cfg: &PipelineConfig) -> CorpusFilterConfig {
    let windows = cfg
        .countries
        .iter()
        .map(|(l, c)| (*l, SpatioTemporalWindow { country: c.to_ascii_uppercase(), ..SpatioTemporalWindow::default() }))
        .collect();
    CorpusFilterConfig {
        min_chars: cfg.min_chars,
        confidence_threshold: cfg.confidence_threshold,
        languages: cfg.languages.clone(),
        windows,
        default_window: SpatioTemporalWindow::default(),
        dedup_exact: cfg.dedup,
    }
}

/// Clean, filter, tag and sample the raw dump into one corpus per language,
/// optionally followed by a script-mixed copy of each Indic corpus.
pub fn build_corpus(cfg: &PipelineConfig, mix: Option<f64>) -> Result<()> {
    let input = cfg.raw_corpus.as_deref().context("no raw corpus given (--input)")?;
    let file = fs::File::open(input).with_context(|| format!("cannot open raw corpus {}", input.display()))?;
    let stream =
        read_tweets_jsonl(BufReader::new(file)).with_context(|| format!("reading {}", input.display()))?;
    if !stream.malformed_lines.is_empty() {
        log::warn!("{}: {} malformed lines skipped", input.display(), stream.malformed_lines.len());
    }
    let whatlang = WhatlangDetector;
    let detector: Option<&dyn LanguageDetector> = match cfg.detector.as_str() {
        "whatlang" => Some(&whatlang),
        "none" => None,
        other => bail!("unknown detector '{other}' (expected whatlang or none)"),
    };
    let fc = filter_config(cfg);
    let mut filtered = filter_records(stream.records, &fc, detector)?;
    filtered.report.malformed_lines = stream.malformed_lines.len();
    let report = filtered.report.clone();

    let out = layout::corpus_dir(&cfg.run_dir);
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(layout::cleaning_report_file(&cfg.run_dir), serde_json::to_string_pretty(&report)? + "\n")?;

    if let Some(ratio) = mix {
        if !cfg.languages.iter().any(|l| l.is_indic()) {
            bail!("--mix applies to Indic languages only; none selected");
        }
        if !(0.0..=1.0).contains(&ratio) {
            bail!("mix ratio must be in [0, 1], got {ratio}");
        }
    }

    for &language in &cfg.languages {
        let pool = filtered.by_language.remove(&language).unwrap_or_default();
        let corpus = sample_corpus(&pool, language, cfg.sample_size, cfg.sampling_seed, fc.provenance(language))
            .with_context(|| format!("sampling the {} corpus", language.display_name()))?;
        let path = layout::corpus_file(&cfg.run_dir, language);
        write_corpus(&corpus, &path, Some(&report))?;
        println!("{}: {} texts -> {}", language.name(), corpus.len(), path.display());
        if let Some(ratio) = mix.filter(|_| language.is_indic()) {
            let mixed = simulate_mix(&corpus, ratio, cfg.mixing_seed)?;
            let path = layout::mixed_corpus_file(&cfg.run_dir, language);
            write_mixed_corpus(&mixed, &path)?;
            println!(
                "{}: {} romanized / {} native -> {}",
                language.name(),
                mixed.latin_count(),
                mixed.indic_count(),
                path.display()
            );
        }
    }
    println!(
        "input {} records, retained {}, removed {} ({} malformed lines)",
        report.input_count,
        report.retained,
        report.removed(),
        report.malformed_lines
    );
    Ok(())
}

pub fn default_mixed_path(corpus: &Path) -> PathBuf {
    let stem = corpus.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    corpus.with_file_name(format!("{stem}.mixed.txt"))
}

pub fn mix(corpus_path: &Path, out: Option<&Path>, ratio: f64, seed: u64) -> Result<()> {
    let corpus = read_corpus(corpus_path)?;
    let mixed = simulate_mix(&corpus, ratio, seed)?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| default_mixed_path(corpus_path));
    write_mixed_corpus(&mixed, &out)?;
    println!("{} romanized / {} native -> {}", mixed.latin_count(), mixed.indic_count(), out.display());
    Ok(())
}
