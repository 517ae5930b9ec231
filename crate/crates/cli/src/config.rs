//! Pipeline configuration: built-in defaults, overlaid by a flat JSON config
//! file, overlaid by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hatemix_core::corpus::{DEFAULT_CONFIDENCE_THRESHOLD, DEFAULT_MIN_CHARS, DEFAULT_SAMPLE_SIZE};
use hatemix_core::dataset::Task;
use hatemix_core::scriptmix::DEFAULT_MIX_RATIO;
use hatemix_core::trainer::{FinetuneConfig, Optimizer, RetrainConfig};
use hatemix_core::{ExperimentCondition, LanguageCondition};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub languages: Vec<LanguageCondition>,
    pub task: Task,
    pub conditions: Vec<ExperimentCondition>,
    pub backend: String,
    pub run_dir: PathBuf,
    pub raw_corpus: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub sampling_seed: u64,
    pub mixing_seed: u64,
    pub oversampling_seed: u64,
    pub training_seed: u64,
    pub min_chars: usize,
    pub sample_size: usize,
    pub confidence_threshold: f64,
    pub detector: String,
    pub dedup: bool,
    /// Country code per language; languages not listed use IN.
    pub countries: BTreeMap<LanguageCondition, String>,
    pub mix_ratio: f64,
    pub retrain_epochs: u32,
    pub retrain_eval_every: u64,
    pub finetune_epochs: u32,
    pub finetune_eval_every: u64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_seq_len: usize,
    pub mask_probability: f64,
    pub jobs: usize,
    /// Submitted condition per language for the result tables, as
    /// `condition` or `condition:invalid`.
    pub submitted: BTreeMap<LanguageCondition, String>,
    /// Leaderboard rank per language, shown as an extra column.
    pub ranks: BTreeMap<LanguageCondition, u32>,
    pub text_column: String,
    pub label_column: String,
    pub id_column: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            languages: LanguageCondition::ALL.to_vec(),
            task: Task::A,
            conditions: vec![ExperimentCondition::Baseline],
            backend: "reference".into(),
            run_dir: PathBuf::from("runs"),
            raw_corpus: None,
            data_dir: None,
            sampling_seed: 13,
            mixing_seed: 17,
            oversampling_seed: 19,
            training_seed: 23,
            min_chars: DEFAULT_MIN_CHARS,
            sample_size: DEFAULT_SAMPLE_SIZE,
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            detector: "whatlang".into(),
            dedup: false,
            countries: BTreeMap::new(),
            mix_ratio: DEFAULT_MIX_RATIO,
            retrain_epochs: RetrainConfig::DEFAULT_EPOCHS,
            retrain_eval_every: RetrainConfig::DEFAULT_EVAL_EVERY,
            finetune_epochs: FinetuneConfig::DEFAULT_EPOCHS,
            finetune_eval_every: FinetuneConfig::DEFAULT_EVAL_EVERY,
            learning_rate: FinetuneConfig::DEFAULT_LEARNING_RATE,
            weight_decay: 0.0,
            batch_size: 8,
            max_seq_len: 512,
            mask_probability: 0.15,
            jobs: 1,
            submitted: BTreeMap::new(),
            ranks: BTreeMap::new(),
            text_column: "text".into(),
            label_column: "category".into(),
            id_column: "id".into(),
        }
    }
}

/// Flag values that were given on the command line, keyed like the config
/// file.
#[derive(Debug, Default)]
pub struct Overrides(Map<String, Value>);

impl Overrides {
    pub fn set<T: Serialize>(&mut self, key: &str, value: Option<T>) -> &mut Self {
        if let Some(v) = value {
            self.0.insert(key.to_string(), serde_json::to_value(v).expect("flag values serialize"));
        }
        self
    }

    pub fn set_list<T: Serialize>(&mut self, key: &str, values: &[T]) -> &mut Self {
        if !values.is_empty() {
            self.0.insert(key.to_string(), serde_json::to_value(values).expect("flag values serialize"));
        }
        self
    }

    pub fn set_flag(&mut self, key: &str, on: bool) -> &mut Self {
        if on {
            self.0.insert(key.to_string(), Value::Bool(true));
        }
        self
    }
}

impl PipelineConfig {
    /// Defaults, then the config file (if any), then the flag overrides.
    pub fn resolve(file: Option<&Path>, overrides: Overrides) -> Result<Self> {
        let Value::Object(mut merged) = serde_json::to_value(PipelineConfig::default())? else {
            unreachable!("config serializes to an object")
        };
        if let Some(path) = file {
            let raw = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let parsed: Value =
                serde_json::from_str(&raw).with_context(|| format!("parsing config {}", path.display()))?;
            let Value::Object(entries) = parsed else {
                bail!("config {} must be a JSON object", path.display());
            };
            merged.extend(entries);
        }
        merged.extend(overrides.0);
        let config: PipelineConfig = serde_json::from_value(Value::Object(merged)).context("invalid configuration")?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.languages.is_empty() {
            bail!("no language conditions selected");
        }
        if self.conditions.is_empty() {
            bail!("no experiment conditions selected");
        }
        if self.task == Task::Custom {
            bail!("task must be A or B");
        }
        if self.conditions.contains(&ExperimentCondition::ScriptMixed) {
            if let Some(l) = self.languages.iter().find(|l| !l.is_indic()) {
                bail!("the script-mixed condition needs an Indic language; {} is not one", l.display_name());
            }
        }
        if !(0.0..=1.0).contains(&self.mix_ratio) {
            bail!("mix ratio must be in [0, 1], got {}", self.mix_ratio);
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            bail!("confidence threshold must be in [0, 1]");
        }
        if self.jobs == 0 {
            bail!("jobs must be at least 1");
        }
        self.retrain_config()?;
        self.finetune_config()?;
        Ok(())
    }

    pub fn retrain_config(&self) -> Result<RetrainConfig> {
        let mut c = RetrainConfig::new(self.retrain_epochs, self.retrain_eval_every, self.training_seed, &self.backend)?;
        c.batch_size = self.batch_size;
        c.max_seq_len = self.max_seq_len;
        c.learning_rate = self.learning_rate;
        c.mask_probability = self.mask_probability;
        c.validate()?;
        Ok(c)
    }

    pub fn finetune_config(&self) -> Result<FinetuneConfig> {
        let mut c =
            FinetuneConfig::new(self.finetune_epochs, self.finetune_eval_every, self.learning_rate, self.training_seed)?;
        c.optimizer = Optimizer::AdamW;
        c.weight_decay = self.weight_decay;
        c.batch_size = self.batch_size;
        c.max_seq_len = self.max_seq_len;
        c.validate()?;
        Ok(c)
    }

    pub fn data_dir(&self) -> Result<&Path> {
        self.data_dir.as_deref().context("no labelled data directory given (--data-dir)")
    }

    /// The same config narrowed to one (language, condition) job.
    pub fn for_job(&self, language: LanguageCondition, condition: ExperimentCondition) -> Self {
        PipelineConfig { languages: vec![language], conditions: vec![condition], ..self.clone() }
    }
}

/// Parse `key=value` pairs such as `spanish=ES`.
pub fn parse_pair(s: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got '{s}'"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Language-keyed map from `lang=value` pairs.
pub fn language_map<T, F>(pairs: &[(String, String)], parse: F) -> Result<Option<BTreeMap<LanguageCondition, T>>>
where
    F: Fn(&str) -> Result<T>,
{
    if pairs.is_empty() {
        return Ok(None);
    }
    let mut out = BTreeMap::new();
    for (k, v) in pairs {
        let language: LanguageCondition = k.parse().map_err(anyhow::Error::msg)?;
        out.insert(language, parse(v)?);
    }
    Ok(Some(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_flag_over_file_over_default() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.json");
        std::fs::write(&file, r#"{"sample_size": 100, "min_chars": 40, "task": "B"}"#).unwrap();
        let mut o = Overrides::default();
        o.set("sample_size", Some(7usize));
        let c = PipelineConfig::resolve(Some(&file), o).unwrap();
        assert_eq!(c.sample_size, 7);
        assert_eq!(c.min_chars, 40);
        assert_eq!(c.task, Task::B);
        assert_eq!(c.mix_ratio, 0.2);
        assert_eq!((c.retrain_epochs, c.finetune_epochs, c.retrain_eval_every), (4, 8, 500));
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.json");
        std::fs::write(&file, r#"{"sampel_size": 100}"#).unwrap();
        assert!(PipelineConfig::resolve(Some(&file), Overrides::default()).is_err());
    }

    #[test]
    fn script_mixed_needs_indic_language() {
        let mut o = Overrides::default();
        o.set_list("languages", &[LanguageCondition::English]);
        o.set_list("conditions", &[ExperimentCondition::ScriptMixed]);
        let err = PipelineConfig::resolve(None, o).unwrap_err();
        assert!(err.to_string().contains("English"), "{err}");
        let mut o = Overrides::default();
        o.set_list("languages", &[LanguageCondition::Hindi]);
        o.set_list("conditions", &[ExperimentCondition::ScriptMixed]);
        assert!(PipelineConfig::resolve(None, o).is_ok());
    }

    #[test]
    fn zero_epochs_rejected() {
        let mut o = Overrides::default();
        o.set("retrain_epochs", Some(0u32));
        assert!(PipelineConfig::resolve(None, o).is_err());
    }
}
