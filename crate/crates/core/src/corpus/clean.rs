//! Tweet text normalisation.
//!
//! Rules run in a fixed order: hyperlinks, hashtags, repeated punctuation,
//! whitespace, trim. A removal can expose a new match for an earlier rule
//! (`www#x.y` becomes `www.y` once the hashtag goes), so the rule pass is
//! repeated until the text stops changing. Every pass after the first only
//! deletes characters, so this terminates.

use std::sync::OnceLock;

use regex::Regex;

fn hyperlink_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:https?://|www\.)\S*").expect("valid regex"))
}

fn hashtag_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"#\w+").expect("valid regex"))
}

fn punctuation_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\p{P}$").expect("valid regex"))
}

fn whitespace_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\s+").expect("valid regex"))
}

/// True for Unicode punctuation (general category P) and the ASCII symbols
/// that `char::is_ascii_punctuation` also counts (`$`, `+`, `<`, ...).
pub fn is_punctuation(c: char) -> bool {
    if c.is_ascii() {
        return c.is_ascii_punctuation();
    }
    let mut buf = [0u8; 4];
    punctuation_re().is_match(c.encode_utf8(&mut buf))
}

/// Matches the hyperlink pattern removed by [`clean_text`].
pub fn contains_hyperlink(text: &str) -> bool {
    hyperlink_re().is_match(text)
}

/// Matches a hashtag token (`#` followed by word characters).
pub fn contains_hashtag(text: &str) -> bool {
    hashtag_re().is_match(text)
}

/// Runs of the same punctuation code point collapse to one; mixed runs such as
/// `?!` are left alone.
fn collapse_repeated_punctuation(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut prev: Option<char> = None;
    for c in text.chars() {
        if prev == Some(c) && is_punctuation(c) {
            continue;
        }
        out.push(c);
        prev = Some(c);
    }
    out
}

fn clean_pass(text: &str) -> String {
    let without_links = hyperlink_re().replace_all(text, "");
    let without_tags = hashtag_re().replace_all(&without_links, "");
    let collapsed = collapse_repeated_punctuation(&without_tags);
    let spaced = whitespace_re().replace_all(&collapsed, " ");
    spaced.trim().to_string()
}

/// Normalise a raw tweet: drop hyperlinks and hashtag tokens, squeeze repeated
/// punctuation and whitespace, trim. Deterministic and idempotent.
pub fn clean_text(raw: &str) -> String {
    let mut current = clean_pass(raw);
    loop {
        let next = clean_pass(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

/// True iff `text` holds at least `min_chars` Unicode scalar values.
pub fn length_filter(text: &str, min_chars: usize) -> bool {
    text.chars().count() >= min_chars
}

/// Checks the properties every cleaned text must have. Returns the first
/// violated property, if any.
pub fn cleaning_violation(text: &str) -> Option<&'static str> {
    if contains_hyperlink(text) {
        return Some("hyperlink");
    }
    if contains_hashtag(text) {
        return Some("hashtag");
    }
    if text.starts_with(char::is_whitespace) || text.ends_with(char::is_whitespace) {
        return Some("untrimmed whitespace");
    }
    let mut prev: Option<char> = None;
    for c in text.chars() {
        if let Some(p) = prev {
            if p.is_whitespace() && c.is_whitespace() {
                return Some("doubled whitespace");
            }
            if p == c && is_punctuation(c) {
                return Some("doubled punctuation");
            }
        }
        prev = Some(c);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        // links -> "Love   wins!!! #pride ", tags -> "Love   wins!!!  ",
        // punctuation -> "Love   wins!  ", whitespace + trim -> "Love wins!"
        assert_eq!(clean_text("Love   wins!!! #pride http://x.co/ab"), "Love wins!");
    }

    #[test]
    fn fixed_point_input() {
        assert_eq!(clean_text("hello world"), "hello world");
    }

    #[test]
    fn all_hashtags_clean_to_empty() {
        assert_eq!(clean_text("#tag1 #tag2"), "");
    }

    #[test]
    fn link_variants() {
        assert_eq!(clean_text("see https://t.co/xyz now"), "see now");
        assert_eq!(clean_text("see WWW.example.com now"), "see now");
        assert_eq!(clean_text("HTTP://A.B"), "");
        // "www" alone is not a link
        assert_eq!(clean_text("www is fine"), "www is fine");
    }

    #[test]
    fn mixed_punctuation_runs_survive() {
        assert_eq!(clean_text("what?! really??"), "what?! really?");
        assert_eq!(clean_text("wait......"), "wait.");
        assert_eq!(clean_text("a -- b"), "a - b");
    }

    #[test]
    fn unicode_punctuation_and_whitespace() {
        assert_eq!(clean_text("क्या।। ठीक\u{00A0}\u{00A0}है"), "क्या। ठीक है");
        assert_eq!(clean_text("line\n\nbreak\ttab"), "line break tab");
        assert_eq!(clean_text("¡¡hola!!"), "¡hola!");
    }

    #[test]
    fn removal_exposing_new_link_is_handled() {
        // hashtag removal joins "www" and ".evil.com"
        let out = clean_text("go www#x.evil.com now");
        assert_eq!(out, "go now");
        assert_eq!(cleaning_violation(&out), None);
        // collapsing ".." forms "www."
        assert_eq!(clean_text("x www..y.com z"), "x z");
        // "//" is itself a doubled punctuation run
        assert_eq!(clean_text("x http:://y z"), "x http:/y z");
    }

    #[test]
    fn indic_hashtags_removed() {
        assert_eq!(clean_text("नमस्ते #भारत दोस्तों"), "नमस्ते दोस्तों");
    }

    #[test]
    fn lone_hash_is_kept() {
        assert_eq!(clean_text("we're # 1"), "we're # 1");
    }

    #[test]
    fn length_boundary() {
        let s49: String = "a".repeat(49);
        let s50: String = "a".repeat(50);
        assert!(!length_filter(&s49, 50));
        assert!(length_filter(&s50, 50));
        assert!(!length_filter("", 50));
        // counted in code points, not bytes
        let dev50: String = "क".repeat(50);
        assert!(length_filter(&dev50, 50));
        assert!(!length_filter(&"क".repeat(49), 50));
    }

    #[test]
    fn violation_detector() {
        assert_eq!(cleaning_violation("a  b"), Some("doubled whitespace"));
        assert_eq!(cleaning_violation("a!!"), Some("doubled punctuation"));
        assert_eq!(cleaning_violation("#x"), Some("hashtag"));
        assert_eq!(cleaning_violation(" a"), Some("untrimmed whitespace"));
        assert_eq!(cleaning_violation("fine, text!"), None);
    }
}
