//! Indic-to-Latin transliteration and simulated script-mixed corpora.

mod script;
mod table;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::LanguageCondition;
use crate::corpus::{self, CorpusError, CorpusMetadata, RetrainCorpus};

pub use script::{block_of, classify_script, is_indic_code_point, letter_counts, ScriptTag, MAJORITY_SHARE};
pub use table::{EntryClass, RomanizationTable, Scheme, TableEntry};

/// Share of a corpus transliterated by default.
pub const DEFAULT_MIX_RATIO: f64 = 0.20;

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("text classified as {found} cannot be transliterated with {scheme}")]
    UnsupportedScript { found: ScriptTag, scheme: Scheme },
    #[error("script mixing needs an Indic language condition, got {0}")]
    NonIndicLanguage(LanguageCondition),
    #[error("mix ratio {0} outside [0, 1]")]
    InvalidRatio(f64),
    #[error("{required} texts must be transliterated but only {available} are Indic-script")]
    InsufficientIndicTexts { available: usize, required: usize },
    #[error("romanization table line {line}: {reason}")]
    BadTable { line: usize, reason: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Zero-width joiners only steer Indic glyph shaping and are dropped from
/// romanized output.
fn is_shaping_control(c: char) -> bool {
    matches!(c, '\u{200C}' | '\u{200D}')
}

/// Danda and double danda sit in the Devanagari block but end sentences in
/// every Indic script, so each scheme's table carries them.
fn is_shared_punctuation(c: char) -> bool {
    matches!(c, '\u{0964}' | '\u{0965}')
}

fn table_for(c: char, preferred: Scheme) -> Option<&'static RomanizationTable> {
    let tag = block_of(c);
    if tag == preferred.script() || is_shared_punctuation(c) {
        Some(preferred.table())
    } else {
        Scheme::for_script(tag).map(Scheme::table)
    }
}

/// Romanize every Indic run in `text` and copy everything else verbatim.
/// Indic code points with no table entry are dropped.
fn romanize(text: &str, scheme: Scheme) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len() * 2);
    // a consonant has been written and still owes its inherent vowel
    let mut pending = false;
    let flush = |out: &mut String, pending: &mut bool| {
        if *pending {
            out.push('a');
            *pending = false;
        }
    };

    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if !is_indic_code_point(c) {
            flush(&mut out, &mut pending);
            if !is_shaping_control(c) {
                out.push(c);
            }
            i += 1;
            continue;
        }
        let matched = table_for(c, scheme).and_then(|t| t.longest_match(&chars[i..]));
        let Some((entry, len)) = matched else {
            flush(&mut out, &mut pending);
            i += 1;
            continue;
        };
        match entry.class {
            EntryClass::Consonant => {
                flush(&mut out, &mut pending);
                out.push_str(&entry.latin);
                pending = true;
            }
            EntryClass::Sign => {
                out.push_str(&entry.latin);
                pending = false;
            }
            EntryClass::Virama => pending = false,
            EntryClass::Nukta => {}
            EntryClass::Vowel | EntryClass::Modifier | EntryClass::Final | EntryClass::Symbol => {
                flush(&mut out, &mut pending);
                out.push_str(&entry.latin);
            }
        }
        i += len;
    }
    flush(&mut out, &mut pending);
    out
}

/// Transliterate Indic-script text to Latin with `scheme`.
///
/// Accepts text whose dominant script is the scheme's script, and mixed or
/// letterless text that contains at least one code point of that script
/// (the shared dandas count for every scheme).
/// Only Indic runs are mapped; Latin and other runs pass through unchanged.
pub fn transliterate(text: &str, scheme: Scheme) -> Result<String, ScriptError> {
    let found = classify_script(text);
    let accepted = found == scheme.script()
        || (matches!(found, ScriptTag::Mixed | ScriptTag::Other)
            && text.chars().any(|c| block_of(c) == scheme.script() || is_shared_punctuation(c)));
    if !accepted {
        return Err(ScriptError::UnsupportedScript { found, scheme });
    }
    Ok(romanize(text, scheme))
}

/// Selection parameters recorded with a mixed corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixMetadata {
    pub ratio: f64,
    pub seed: u64,
    pub base_seed: u64,
    pub transliterated_indices: Vec<usize>,
}

/// A corpus where a seeded share of the Indic-script texts was romanized.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedCorpus {
    pub base: RetrainCorpus,
    pub texts: Vec<String>,
    /// Sorted positions in `texts` that were transliterated.
    pub transliterated_indices: Vec<usize>,
    pub ratio: f64,
    pub seed: u64,
}

impl MixedCorpus {
    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    pub fn latin_count(&self) -> usize {
        self.transliterated_indices.len()
    }

    pub fn indic_count(&self) -> usize {
        self.len() - self.latin_count()
    }

    pub fn metadata(&self) -> MixMetadata {
        MixMetadata {
            ratio: self.ratio,
            seed: self.seed,
            base_seed: self.base.seed,
            transliterated_indices: self.transliterated_indices.clone(),
        }
    }

    /// The mixed texts as a corpus usable for retraining.
    pub fn to_corpus(&self) -> RetrainCorpus {
        RetrainCorpus {
            language: self.base.language,
            texts: self.texts.clone(),
            seed: self.seed,
            provenance: format!(
                "{}; script-mixed ratio={} seed={}",
                self.base.provenance, self.ratio, self.seed
            ),
        }
    }
}

/// Number of texts to transliterate: `ratio * n` rounded half to even.
pub fn mix_count(ratio: f64, n: usize) -> usize {
    (ratio * n as f64).round_ties_even() as usize
}

/// Replace `round(ratio * N)` uniformly drawn Indic-script texts with their
/// romanization. Only texts that classify as an Indic script, and whose
/// romanization classifies as Latin, are eligible.
pub fn simulate_mix(corpus: &RetrainCorpus, ratio: f64, seed: u64) -> Result<MixedCorpus, ScriptError> {
    if !corpus.language.is_indic() {
        return Err(ScriptError::NonIndicLanguage(corpus.language));
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(ScriptError::InvalidRatio(ratio));
    }
    let required = mix_count(ratio, corpus.len());

    let mut eligible: Vec<(usize, String)> = Vec::new();
    if required > 0 {
        for (i, text) in corpus.texts.iter().enumerate() {
            let tag = classify_script(text);
            let Some(scheme) = Scheme::for_script(tag) else { continue };
            let latin = romanize(text, scheme);
            if classify_script(&latin) == ScriptTag::Latin {
                eligible.push((i, latin));
            }
        }
    }
    if eligible.len() < required {
        return Err(ScriptError::InsufficientIndicTexts { available: eligible.len(), required });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks: Vec<usize> = rand::seq::index::sample(&mut rng, eligible.len(), required).into_vec();
    picks.sort_unstable();

    let mut texts = corpus.texts.clone();
    let mut indices = Vec::with_capacity(required);
    for p in picks {
        let (idx, latin) = &mut eligible[p];
        texts[*idx] = std::mem::take(latin);
        indices.push(*idx);
    }
    Ok(MixedCorpus { base: corpus.clone(), texts, transliterated_indices: indices, ratio, seed })
}

/// Write a mixed corpus in the plain corpus format with mixing metadata in
/// the sidecar.
pub fn write_mixed_corpus(mixed: &MixedCorpus, path: &Path) -> Result<(), ScriptError> {
    corpus::write_lines(path, &mixed.texts)?;
    let meta = CorpusMetadata {
        language: mixed.base.language,
        seed: mixed.seed,
        size: mixed.len(),
        provenance: mixed.to_corpus().provenance,
        cleaning_report: None,
        mixing: Some(mixed.metadata()),
    };
    corpus::write_json(&corpus::metadata_path(path), &meta)?;
    Ok(())
}
