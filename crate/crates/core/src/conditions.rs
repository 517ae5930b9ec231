//! Language conditions and experimental conditions shared by every stage.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the five shared-task language conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LanguageCondition {
    English,
    Hindi,
    Malayalam,
    Spanish,
    Tamil,
}

impl LanguageCondition {
    /// All conditions in display order (alphabetical, as in the result tables).
    pub const ALL: [LanguageCondition; 5] = [
        LanguageCondition::English,
        LanguageCondition::Hindi,
        LanguageCondition::Malayalam,
        LanguageCondition::Spanish,
        LanguageCondition::Tamil,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LanguageCondition::English => "english",
            LanguageCondition::Hindi => "hindi",
            LanguageCondition::Malayalam => "malayalam",
            LanguageCondition::Spanish => "spanish",
            LanguageCondition::Tamil => "tamil",
        }
    }

    /// Capitalised name used in rendered tables.
    pub fn display_name(self) -> &'static str {
        match self {
            LanguageCondition::English => "English",
            LanguageCondition::Hindi => "Hindi",
            LanguageCondition::Malayalam => "Malayalam",
            LanguageCondition::Spanish => "Spanish",
            LanguageCondition::Tamil => "Tamil",
        }
    }

    /// ISO 639-1 code a language detector reports for this condition.
    pub fn iso639_1(self) -> &'static str {
        match self {
            LanguageCondition::English => "en",
            LanguageCondition::Hindi => "hi",
            LanguageCondition::Malayalam => "ml",
            LanguageCondition::Spanish => "es",
            LanguageCondition::Tamil => "ta",
        }
    }

    pub fn from_iso639_1(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.iso639_1() == code)
    }

    /// Conditions natively written in an Indic script.
    pub fn is_indic(self) -> bool {
        matches!(
            self,
            LanguageCondition::Hindi | LanguageCondition::Malayalam | LanguageCondition::Tamil
        )
    }
}

impl fmt::Display for LanguageCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LanguageCondition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lowered = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|c| c.name() == lowered || c.iso639_1() == lowered)
            .ok_or_else(|| format!("unknown language condition '{s}'"))
    }
}

/// The three model conditions compared in the result tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentCondition {
    /// Fine-tune the pretrained model as-is.
    Baseline,
    /// Fine-tune after masked-LM retraining on the filtered corpus.
    Retrained,
    /// Fine-tune after retraining on the script-mixed corpus.
    ScriptMixed,
}

impl ExperimentCondition {
    pub const ALL: [ExperimentCondition; 3] = [
        ExperimentCondition::Baseline,
        ExperimentCondition::Retrained,
        ExperimentCondition::ScriptMixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentCondition::Baseline => "baseline",
            ExperimentCondition::Retrained => "retrained",
            ExperimentCondition::ScriptMixed => "script-mixed",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ExperimentCondition::Baseline => "Baseline",
            ExperimentCondition::Retrained => "Retrained",
            ExperimentCondition::ScriptMixed => "Script-Mixed",
        }
    }
}

impl fmt::Display for ExperimentCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentCondition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "baseline" => Ok(ExperimentCondition::Baseline),
            "retrained" => Ok(ExperimentCondition::Retrained),
            "script-mixed" | "scriptmixed" | "sm" => Ok(ExperimentCondition::ScriptMixed),
            _ => Err(format!("unknown experiment condition '{s}'")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trips() {
        for c in LanguageCondition::ALL {
            assert_eq!(c.name().parse::<LanguageCondition>().unwrap(), c);
            assert_eq!(c.iso639_1().parse::<LanguageCondition>().unwrap(), c);
        }
        for c in ExperimentCondition::ALL {
            assert_eq!(c.name().parse::<ExperimentCondition>().unwrap(), c);
        }
        assert!("klingon".parse::<LanguageCondition>().is_err());
    }

    #[test]
    fn indic_conditions() {
        let indic: Vec<_> = LanguageCondition::ALL.into_iter().filter(|c| c.is_indic()).collect();
        assert_eq!(
            indic,
            vec![LanguageCondition::Hindi, LanguageCondition::Malayalam, LanguageCondition::Tamil]
        );
    }
}
