//! Seeded synthetic fixtures: tweet dumps in the five language conditions and
//! linearly separable labelled datasets. Used for smoke runs and tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::conditions::LanguageCondition;

const LATIN_ONSETS: [&str; 14] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
const LATIN_VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

/// (consonants, vowel signs) per Indic script; an empty sign means the
/// inherent vowel.
fn indic_inventory(language: LanguageCondition) -> Option<(&'static [char], &'static [&'static str])> {
    match language {
        LanguageCondition::Hindi => Some((
            &['क', 'ग', 'त', 'द', 'न', 'प', 'ब', 'म', 'र', 'ल', 'स', 'ह'],
            &["", "\u{093E}", "\u{093F}", "\u{0940}", "\u{0941}", "\u{0947}"],
        )),
        LanguageCondition::Malayalam => Some((
            &['ക', 'ഗ', 'ത', 'ദ', 'ന', 'പ', 'ബ', 'മ', 'ര', 'ല', 'സ', 'വ'],
            &["", "\u{0D3E}", "\u{0D3F}", "\u{0D40}", "\u{0D41}", "\u{0D46}"],
        )),
        LanguageCondition::Tamil => Some((
            &['க', 'ச', 'ட', 'த', 'ந', 'ப', 'ம', 'ய', 'ர', 'ல', 'வ', 'ன'],
            &["", "\u{0BBE}", "\u{0BBF}", "\u{0BC0}", "\u{0BC1}", "\u{0BC6}"],
        )),
        _ => None,
    }
}

/// A pronounceable pseudo-word in the language's script.
pub fn pseudo_word<R: Rng>(rng: &mut R, language: LanguageCondition) -> String {
    let syllables = rng.gen_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        match indic_inventory(language) {
            Some((consonants, signs)) => {
                w.push(*consonants.choose(rng).expect("non-empty"));
                w.push_str(signs.choose(rng).expect("non-empty"));
            }
            None => {
                w.push_str(LATIN_ONSETS.choose(rng).expect("non-empty"));
                w.push_str(LATIN_VOWELS.choose(rng).expect("non-empty"));
            }
        }
    }
    w
}

fn sentence<R: Rng>(rng: &mut R, language: LanguageCondition, min_chars: usize) -> String {
    let mut s = String::new();
    while s.chars().count() < min_chars {
        if !s.is_empty() {
            s.push(' ');
        }
        s.push_str(&pseudo_word(rng, language));
    }
    s
}

/// JSONL lines of a tweet dump: `per_language` tagged, in-window tweets of at
/// least 60 characters for each language, with a little noise to clean
/// (hashtags, links, short and out-of-window tweets).
pub fn tweet_dump(languages: &[LanguageCondition], per_language: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    let mut id = 0u64;
    for &language in languages {
        for i in 0..per_language {
            id += 1;
            let mut text = sentence(&mut rng, language, 60);
            if i % 7 == 0 {
                text.push_str(" #pride https://t.co/x");
            }
            let day = rng.gen_range(1..=28);
            let month = rng.gen_range(1..=12);
            lines.push(
                json!({
                    "id": id.to_string(),
                    "text": text,
                    "timestamp": format!("2019-{month:02}-{day:02}T12:00:00Z"),
                    "country": "IN",
                    "lang": language.iso639_1(),
                    "lang_confidence": 0.99,
                })
                .to_string(),
            );
        }
        // noise the filters must drop
        id += 1;
        lines.push(
            json!({"id": id.to_string(), "text": "too short", "timestamp": "2019-05-01T00:00:00Z",
                   "country": "IN", "lang": language.iso639_1(), "lang_confidence": 0.99})
            .to_string(),
        );
        id += 1;
        lines.push(
            json!({"id": id.to_string(), "text": sentence(&mut rng, language, 60),
                   "timestamp": "2021-05-01T00:00:00Z", "country": "IN",
                   "lang": language.iso639_1(), "lang_confidence": 0.99})
            .to_string(),
        );
    }
    lines
}

/// A labelled row: (id, text, label).
pub type SyntheticRow = (String, String, String);

/// Rows whose label is recoverable from class-specific words: every text has
/// six words from its class vocabulary and four shared filler words.
pub fn separable_rows(labels: &[&str], n: usize, seed: u64) -> Vec<SyntheticRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab: Vec<Vec<String>> = labels
        .iter()
        .map(|_| (0..20).map(|_| pseudo_word(&mut rng, LanguageCondition::English)).collect())
        .collect();
    let filler: Vec<String> = (0..30).map(|_| pseudo_word(&mut rng, LanguageCondition::English)).collect();
    (0..n)
        .map(|i| {
            let class = i % labels.len();
            let mut words: Vec<&str> = Vec::with_capacity(10);
            for _ in 0..6 {
                words.push(vocab[class].choose(&mut rng).expect("non-empty"));
            }
            for _ in 0..4 {
                words.push(filler.choose(&mut rng).expect("non-empty"));
            }
            words.shuffle(&mut rng);
            (format!("r{i:05}"), words.join(" "), labels[class].to_string())
        })
        .collect()
}
