use std::fmt;

use serde::{Deserialize, Serialize};

/// Dominant writing system of a text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScriptTag {
    Devanagari,
    Malayalam,
    Tamil,
    Latin,
    Mixed,
    Other,
}

impl ScriptTag {
    pub fn is_indic(self) -> bool {
        matches!(self, ScriptTag::Devanagari | ScriptTag::Malayalam | ScriptTag::Tamil)
    }

    pub fn name(self) -> &'static str {
        match self {
            ScriptTag::Devanagari => "devanagari",
            ScriptTag::Malayalam => "malayalam",
            ScriptTag::Tamil => "tamil",
            ScriptTag::Latin => "latin",
            ScriptTag::Mixed => "mixed",
            ScriptTag::Other => "other",
        }
    }
}

impl fmt::Display for ScriptTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Share of letters one script must exceed to name the text.
pub const MAJORITY_SHARE: f64 = 0.8;

/// Script block of a code point, for the scripts this crate distinguishes.
/// Anything else maps to `Other`.
pub fn block_of(c: char) -> ScriptTag {
    match c as u32 {
        0x0900..=0x097F | 0xA8E0..=0xA8FF => ScriptTag::Devanagari,
        0x0D00..=0x0D7F => ScriptTag::Malayalam,
        0x0B80..=0x0BFF | 0x11FC0..=0x11FFF => ScriptTag::Tamil,
        0x0041..=0x005A
        | 0x0061..=0x007A
        | 0x00AA
        | 0x00BA
        | 0x00C0..=0x024F
        | 0x0250..=0x02AF
        | 0x1D00..=0x1D7F
        | 0x1E00..=0x1EFF
        | 0x2C60..=0x2C7F
        | 0xA720..=0xA7FF
        | 0xFF21..=0xFF3A
        | 0xFF41..=0xFF5A => ScriptTag::Latin,
        _ => ScriptTag::Other,
    }
}

/// True for code points in the Indic blocks handled by transliteration
/// (Devanagari through Malayalam, plus the Devanagari and Tamil extensions).
pub fn is_indic_code_point(c: char) -> bool {
    matches!(c as u32, 0x0900..=0x0D7F | 0xA8E0..=0xA8FF | 0x11FC0..=0x11FFF)
}

/// Alphabetic code points per script, in the order
/// devanagari, malayalam, tamil, latin, other.
pub fn letter_counts(text: &str) -> [usize; 5] {
    let mut counts = [0usize; 5];
    for c in text.chars().filter(|c| c.is_alphabetic()) {
        let slot = match block_of(c) {
            ScriptTag::Devanagari => 0,
            ScriptTag::Malayalam => 1,
            ScriptTag::Tamil => 2,
            ScriptTag::Latin => 3,
            _ => 4,
        };
        counts[slot] += 1;
    }
    counts
}

/// Classify a text by the script holding more than 80% of its letters.
/// Whitespace, punctuation and digits are not letters; letterless text is
/// `Other`, and no qualifying majority gives `Mixed`.
pub fn classify_script(text: &str) -> ScriptTag {
    const TAGS: [ScriptTag; 5] = [
        ScriptTag::Devanagari,
        ScriptTag::Malayalam,
        ScriptTag::Tamil,
        ScriptTag::Latin,
        ScriptTag::Other,
    ];
    let counts = letter_counts(text);
    let total: usize = counts.iter().sum();
    if total == 0 {
        return ScriptTag::Other;
    }
    let (best, &count) = counts
        .iter()
        .enumerate()
        .max_by_key(|&(_, c)| *c)
        .expect("non-empty");
    if count as f64 > MAJORITY_SHARE * total as f64 {
        TAGS[best]
    } else {
        ScriptTag::Mixed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_script_examples() {
        assert_eq!(classify_script("नमस्ते"), ScriptTag::Devanagari);
        assert_eq!(classify_script("hello"), ScriptTag::Latin);
        assert_eq!(classify_script("വണക്കം"), ScriptTag::Malayalam);
        assert_eq!(classify_script("வணக்கம்"), ScriptTag::Tamil);
        assert_eq!(classify_script("привет"), ScriptTag::Other);
        assert_eq!(classify_script("ānanda ṭhīk"), ScriptTag::Latin);
    }

    #[test]
    fn letterless_is_other() {
        assert_eq!(classify_script(""), ScriptTag::Other);
        assert_eq!(classify_script("123 !? ..."), ScriptTag::Other);
        assert_eq!(classify_script("।"), ScriptTag::Other);
    }

    #[test]
    fn mixed_fixture_against_hand_count() {
        // Latin letters: hello(5) friends(7) okay(4) = 16.
        // नमस्ते: न म स त े are alphabetic, the virama is not = 5.
        let text = "hello नमस्ते friends okay";
        assert_eq!(letter_counts(text), [5, 0, 0, 16, 0]);
        // 16 / 21 = 0.76 is not above 0.8
        assert_eq!(classify_script(text), ScriptTag::Mixed);
        // dropping "नम" leaves 16 / 19 = 0.84
        assert_eq!(classify_script("hello स्ते friends okay"), ScriptTag::Latin);
    }

    #[test]
    fn exact_eighty_percent_is_mixed() {
        // 4 latin, 1 devanagari letter: exactly 0.8
        assert_eq!(classify_script("abcd क"), ScriptTag::Mixed);
        assert_eq!(classify_script("abcde क"), ScriptTag::Latin);
    }

    #[test]
    fn digits_and_punctuation_ignored() {
        assert_eq!(classify_script("१२३ नमस्ते!!! 456"), ScriptTag::Devanagari);
    }
}
