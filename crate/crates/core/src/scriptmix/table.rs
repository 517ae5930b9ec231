//! Romanization tables loaded from the TSV files under `data/romanization`.
//!
//! Each non-comment line is `codepoints<TAB>latin<TAB>class`, where
//! `codepoints` is a space-separated list of `U+XXXX` values. Lookup is
//! longest-match-first over the code point sequence.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::script::ScriptTag;
use super::ScriptError;

/// How a table entry behaves inside a syllable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryClass {
    /// Independent vowel.
    Vowel,
    /// Consonant carrying an inherent `a` unless a sign or virama follows.
    Consonant,
    /// Dependent vowel sign, replaces the inherent vowel.
    Sign,
    /// Suppresses the inherent vowel.
    Virama,
    /// Nukta not absorbed into a precomposed consonant entry; ignored.
    Nukta,
    /// Anusvara, visarga, candrabindu: follow the syllable's vowel.
    Modifier,
    /// Dead consonant with no inherent vowel (Malayalam chillu letters).
    Final,
    /// Digits, dandas, avagraha and other standalone signs.
    Symbol,
}

impl FromStr for EntryClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "vowel" => EntryClass::Vowel,
            "consonant" => EntryClass::Consonant,
            "sign" => EntryClass::Sign,
            "virama" => EntryClass::Virama,
            "nukta" => EntryClass::Nukta,
            "modifier" => EntryClass::Modifier,
            "final" => EntryClass::Final,
            "symbol" => EntryClass::Symbol,
            other => return Err(format!("unknown entry class '{other}'")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableEntry {
    pub source: Vec<char>,
    pub latin: String,
    pub class: EntryClass,
}

impl TableEntry {
    /// What the entry romanizes to when it stands alone.
    pub fn standalone(&self) -> String {
        match self.class {
            EntryClass::Consonant => format!("{}a", self.latin),
            EntryClass::Virama | EntryClass::Nukta => String::new(),
            _ => self.latin.clone(),
        }
    }
}

/// A romanization scheme id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "devanagari-iso15919")]
    DevanagariIso15919,
    #[serde(rename = "malayalam-iso15919")]
    MalayalamIso15919,
    #[serde(rename = "tamil-iso15919")]
    TamilIso15919,
}

impl Scheme {
    pub const ALL: [Scheme; 3] =
        [Scheme::DevanagariIso15919, Scheme::MalayalamIso15919, Scheme::TamilIso15919];

    pub fn id(self) -> &'static str {
        match self {
            Scheme::DevanagariIso15919 => "devanagari-iso15919",
            Scheme::MalayalamIso15919 => "malayalam-iso15919",
            Scheme::TamilIso15919 => "tamil-iso15919",
        }
    }

    pub fn script(self) -> ScriptTag {
        match self {
            Scheme::DevanagariIso15919 => ScriptTag::Devanagari,
            Scheme::MalayalamIso15919 => ScriptTag::Malayalam,
            Scheme::TamilIso15919 => ScriptTag::Tamil,
        }
    }

    /// Default scheme for an Indic script tag.
    pub fn for_script(tag: ScriptTag) -> Option<Scheme> {
        Scheme::ALL.into_iter().find(|s| s.script() == tag)
    }

    fn source(self) -> &'static str {
        match self {
            Scheme::DevanagariIso15919 => include_str!("../../data/romanization/devanagari.tsv"),
            Scheme::MalayalamIso15919 => include_str!("../../data/romanization/malayalam.tsv"),
            Scheme::TamilIso15919 => include_str!("../../data/romanization/tamil.tsv"),
        }
    }

    /// The shipped table for this scheme.
    pub fn table(self) -> &'static RomanizationTable {
        static TABLES: OnceLock<[RomanizationTable; 3]> = OnceLock::new();
        let tables = TABLES.get_or_init(|| {
            Scheme::ALL.map(|s| {
                RomanizationTable::parse(s, s.source())
                    .unwrap_or_else(|e| panic!("shipped table {} is invalid: {e}", s.id()))
            })
        });
        &tables[Scheme::ALL.iter().position(|s| *s == self).expect("known scheme")]
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|sch| sch.id() == s)
            .ok_or_else(|| format!("unknown romanization scheme '{s}'"))
    }
}

#[derive(Debug, Clone)]
pub struct RomanizationTable {
    scheme: Scheme,
    entries: Vec<TableEntry>,
    index: HashMap<Vec<char>, usize>,
    max_key_len: usize,
}

impl RomanizationTable {
    pub fn parse(scheme: Scheme, source: &str) -> Result<Self, ScriptError> {
        let mut entries = Vec::new();
        let mut index = HashMap::new();
        for (lineno, line) in source.lines().enumerate() {
            let bad = |reason: String| ScriptError::BadTable { line: lineno + 1, reason };
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [codes, latin, class] = fields[..] else {
                return Err(bad(format!("expected 3 tab-separated fields, got {}", fields.len())));
            };
            let source = codes
                .split_whitespace()
                .map(|tok| {
                    tok.strip_prefix("U+")
                        .and_then(|hex| u32::from_str_radix(hex, 16).ok())
                        .and_then(char::from_u32)
                        .ok_or_else(|| bad(format!("bad code point '{tok}'")))
                })
                .collect::<Result<Vec<char>, _>>()?;
            if source.is_empty() {
                return Err(bad("empty code point sequence".into()));
            }
            let class: EntryClass = class.parse().map_err(bad)?;
            if index.insert(source.clone(), entries.len()).is_some() {
                return Err(bad(format!("duplicate entry {codes}")));
            }
            entries.push(TableEntry { source, latin: latin.to_string(), class });
        }
        let max_key_len = entries.iter().map(|e| e.source.len()).max().unwrap_or(0);
        Ok(RomanizationTable { scheme, entries, index, max_key_len })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    /// Longest entry matching a prefix of `input`, with its length.
    pub fn longest_match(&self, input: &[char]) -> Option<(&TableEntry, usize)> {
        let longest = self.max_key_len.min(input.len());
        (1..=longest)
            .rev()
            .find_map(|len| self.index.get(&input[..len]).map(|&i| (&self.entries[i], len)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_tables_parse() {
        for s in Scheme::ALL {
            let t = s.table();
            assert!(t.entries().len() > 50, "{s}");
            assert_eq!(t.scheme(), s);
        }
    }

    #[test]
    fn ka_entry() {
        let t = Scheme::DevanagariIso15919.table();
        let (entry, len) = t.longest_match(&['क']).unwrap();
        assert_eq!(len, 1);
        assert_eq!(entry.class, EntryClass::Consonant);
        assert_eq!(entry.standalone(), "ka");
    }

    #[test]
    fn longest_match_prefers_nukta_sequence() {
        let t = Scheme::DevanagariIso15919.table();
        let (entry, len) = t.longest_match(&['\u{0915}', '\u{093C}', 'x']).unwrap();
        assert_eq!(len, 2);
        assert_eq!(entry.latin, "q");
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = RomanizationTable::parse(
            Scheme::TamilIso15919,
            "# header\nU+0B95\tk\tconsonant\nU+ZZZZ\tx\tvowel\n",
        )
        .unwrap_err();
        assert!(matches!(err, ScriptError::BadTable { line: 3, .. }), "{err}");
        let err = RomanizationTable::parse(Scheme::TamilIso15919, "U+0B95\tk\n").unwrap_err();
        assert!(matches!(err, ScriptError::BadTable { line: 1, .. }));
        let err =
            RomanizationTable::parse(Scheme::TamilIso15919, "U+0B95\tk\tconsonant\nU+0B95\tq\tvowel\n")
                .unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn scheme_ids_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.id().parse::<Scheme>().unwrap(), s);
            assert_eq!(Scheme::for_script(s.script()), Some(s));
        }
        assert_eq!(Scheme::for_script(ScriptTag::Latin), None);
    }
}
