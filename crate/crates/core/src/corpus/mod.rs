//! Retraining-corpus construction: clean raw tweets, filter by length, language
//! and spatio-temporal window, then draw a fixed-size seeded sample per
//! language condition.

mod clean;
mod language;
mod record;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::LanguageCondition;

pub use clean::{
    clean_text, cleaning_violation, contains_hashtag, contains_hyperlink, is_punctuation,
    length_filter,
};
pub use language::{detect_language, Detection, LanguageDetector, WhatlangDetector};
pub use record::{
    parse_tweet_line, read_tweets_jsonl, spatiotemporal_filter, SpatioTemporalWindow, TweetRecord,
    TweetStream,
};

/// Minimum cleaned length, in code points.
pub const DEFAULT_MIN_CHARS: usize = 50;
/// Texts sampled per language condition.
pub const DEFAULT_SAMPLE_SIZE: usize = 50_000;
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.90;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no language detector configured")]
    DetectorUnavailable,
    #[error("language detector returned no candidate")]
    UndecidableText,
    #[error("insufficient data: {available} qualifying records, {requested} requested")]
    InsufficientData { available: usize, requested: usize },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
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

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io { path: path.to_path_buf(), source }
    }
}

/// Per-run accounting of why records were dropped.
///
/// `input_count` equals `retained` plus every `removed_*` counter. Lines that
/// never parsed into a record are tracked in `malformed_lines` and are not part
/// of `input_count`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub input_count: usize,
    pub removed_short: usize,
    pub removed_empty_after_clean: usize,
    pub removed_undecidable: usize,
    pub removed_low_confidence: usize,
    pub removed_other_language: usize,
    pub removed_out_of_window: usize,
    pub removed_duplicate: usize,
    pub retained: usize,
    pub malformed_lines: usize,
}

impl CleaningReport {
    pub fn removed(&self) -> usize {
        self.removed_short
            + self.removed_empty_after_clean
            + self.removed_undecidable
            + self.removed_low_confidence
            + self.removed_other_language
            + self.removed_out_of_window
            + self.removed_duplicate
    }

    pub fn is_conserved(&self) -> bool {
        self.retained + self.removed() == self.input_count
    }
}

/// Filter settings for corpus construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusFilterConfig {
    pub min_chars: usize,
    pub confidence_threshold: f64,
    /// Conditions to keep. Records detected as anything else are dropped.
    pub languages: Vec<LanguageCondition>,
    /// Origin window per condition; conditions without an entry use the default.
    pub windows: BTreeMap<LanguageCondition, SpatioTemporalWindow>,
    pub default_window: SpatioTemporalWindow,
    /// Drop exact duplicate cleaned texts within a condition, keeping the first.
    pub dedup_exact: bool,
}

impl Default for CorpusFilterConfig {
    fn default() -> Self {
        CorpusFilterConfig {
            min_chars: DEFAULT_MIN_CHARS,
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            languages: LanguageCondition::ALL.to_vec(),
            windows: BTreeMap::new(),
            default_window: SpatioTemporalWindow::default(),
            dedup_exact: false,
        }
    }
}

impl CorpusFilterConfig {
    pub fn window_for(&self, language: LanguageCondition) -> &SpatioTemporalWindow {
        self.windows.get(&language).unwrap_or(&self.default_window)
    }

    /// Short human-readable summary stored alongside each corpus.
    pub fn provenance(&self, language: LanguageCondition) -> String {
        let w = self.window_for(language);
        format!(
            "clean(links,hashtags,punctuation,whitespace); min_chars={}; lang={} conf>={}; country={}; dates={}..={}{}",
            self.min_chars,
            language.iso639_1(),
            self.confidence_threshold,
            w.country,
            w.start,
            w.end,
            if self.dedup_exact { "; dedup=exact" } else { "" }
        )
    }
}

/// Cleaned, qualifying records bucketed by language condition, in input order.
#[derive(Debug, Default)]
pub struct FilteredRecords {
    pub by_language: BTreeMap<LanguageCondition, Vec<TweetRecord>>,
    pub report: CleaningReport,
}

/// Clean, length-filter, language-tag and window-filter a batch of records.
///
/// Records that already carry a language tag keep it; the rest go through
/// `detector`. A missing detector is fatal only when an untagged record
/// reaches detection.
pub fn filter_records(
    records: impl IntoIterator<Item = TweetRecord>,
    config: &CorpusFilterConfig,
    detector: Option<&dyn LanguageDetector>,
) -> Result<FilteredRecords, CorpusError> {
    let mut out = FilteredRecords::default();
    let mut seen: BTreeMap<LanguageCondition, HashSet<String>> = BTreeMap::new();
    let report = &mut out.report;

    for record in records {
        report.input_count += 1;
        let cleaned = clean_text(record.text());
        if cleaned.is_empty() {
            report.removed_empty_after_clean += 1;
            continue;
        }
        if !length_filter(&cleaned, config.min_chars) {
            report.removed_short += 1;
            continue;
        }
        let detection = match record.language() {
            Some((lang, confidence)) => Detection { lang: lang.to_string(), confidence },
            None => match detect_language(detector, &cleaned) {
                Ok(d) => d,
                Err(CorpusError::UndecidableText) => {
                    report.removed_undecidable += 1;
                    continue;
                }
                Err(err) => return Err(err),
            },
        };
        if detection.confidence < config.confidence_threshold {
            report.removed_low_confidence += 1;
            continue;
        }
        let Some(language) = LanguageCondition::from_iso639_1(&detection.lang)
            .filter(|l| config.languages.contains(l))
        else {
            report.removed_other_language += 1;
            continue;
        };
        if !config.window_for(language).contains(&record) {
            report.removed_out_of_window += 1;
            continue;
        }
        if config.dedup_exact && !seen.entry(language).or_default().insert(cleaned.clone()) {
            report.removed_duplicate += 1;
            continue;
        }
        let kept = TweetRecord::new(
            record.id(),
            cleaned,
            record.timestamp(),
            record.country().map(str::to_string),
        )?
        .with_language(detection.lang, detection.confidence)?;
        out.by_language.entry(language).or_default().push(kept);
        report.retained += 1;
    }
    Ok(out)
}

/// Unlabelled texts for masked-LM retraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainCorpus {
    pub language: LanguageCondition,
    pub texts: Vec<String>,
    pub seed: u64,
    pub provenance: String,
}

impl RetrainCorpus {
    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    /// Indices and reasons of texts that break the cleaned-corpus invariants.
    pub fn invariant_violations(&self, min_chars: usize) -> Vec<(usize, &'static str)> {
        self.texts
            .iter()
            .enumerate()
            .filter_map(|(i, t)| {
                if !length_filter(t, min_chars) {
                    Some((i, "shorter than minimum"))
                } else {
                    cleaning_violation(t).map(|v| (i, v))
                }
            })
            .collect()
    }
}

/// Draw exactly `n` texts uniformly without replacement from the records
/// tagged with `language`. Output order is the draw order; the same inputs
/// and seed always give the same corpus.
pub fn sample_corpus<'a>(
    records: impl IntoIterator<Item = &'a TweetRecord>,
    language: LanguageCondition,
    n: usize,
    seed: u64,
    provenance: impl Into<String>,
) -> Result<RetrainCorpus, CorpusError> {
    let pool: Vec<&str> = records
        .into_iter()
        .filter(|r| r.language().map(|(l, _)| l) == Some(language.iso639_1()))
        .map(TweetRecord::text)
        .collect();
    if n == 0 || pool.len() < n {
        return Err(CorpusError::InsufficientData { available: pool.len(), requested: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let texts = rand::seq::index::sample(&mut rng, pool.len(), n)
        .into_iter()
        .map(|i| pool[i].to_string())
        .collect();
    Ok(RetrainCorpus { language, texts, seed, provenance: provenance.into() })
}

/// Sidecar metadata written next to a corpus text file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMetadata {
    pub language: LanguageCondition,
    pub seed: u64,
    pub size: usize,
    pub provenance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cleaning_report: Option<CleaningReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixing: Option<crate::scriptmix::MixMetadata>,
}

/// Path of the JSON sidecar belonging to a corpus text file.
pub fn metadata_path(text_path: &Path) -> PathBuf {
    text_path.with_extension("meta.json")
}

pub(crate) fn write_lines(path: &Path, texts: &[String]) -> Result<(), CorpusError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CorpusError::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for t in texts {
        if t.contains('\n') {
            return Err(CorpusError::InvalidRecord(format!(
                "corpus text contains a newline: {t:?}"
            )));
        }
        writeln!(w, "{t}").map_err(|e| CorpusError::io(path, e))?;
    }
    w.flush().map_err(|e| CorpusError::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CorpusError> {
    let mut body = serde_json::to_string_pretty(value)
        .map_err(|e| CorpusError::Json { path: path.to_path_buf(), source: e })?;
    body.push('\n');
    fs::write(path, body).map_err(|e| CorpusError::io(path, e))
}

/// Write `corpus` as one text per line plus its JSON sidecar.
pub fn write_corpus(
    corpus: &RetrainCorpus,
    path: &Path,
    cleaning_report: Option<&CleaningReport>,
) -> Result<(), CorpusError> {
    write_lines(path, &corpus.texts)?;
    let meta = CorpusMetadata {
        language: corpus.language,
        seed: corpus.seed,
        size: corpus.len(),
        provenance: corpus.provenance.clone(),
        cleaning_report: cleaning_report.cloned(),
        mixing: None,
    };
    write_json(&metadata_path(path), &meta)
}

pub(crate) fn read_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    BufReader::new(file)
        .lines()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CorpusError::io(path, e))
}

pub fn read_metadata(text_path: &Path) -> Result<CorpusMetadata, CorpusError> {
    let meta_path = metadata_path(text_path);
    let raw = fs::read_to_string(&meta_path).map_err(|e| CorpusError::io(&meta_path, e))?;
    serde_json::from_str(&raw).map_err(|e| CorpusError::Json { path: meta_path, source: e })
}

/// Load a corpus written by [`write_corpus`] (or the text part of a mixed corpus).
pub fn read_corpus(path: &Path) -> Result<RetrainCorpus, CorpusError> {
    let texts = read_lines(path)?;
    let meta = read_metadata(path)?;
    Ok(RetrainCorpus { language: meta.language, texts, seed: meta.seed, provenance: meta.provenance })
}
