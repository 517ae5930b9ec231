//! Classification scoring: confusion matrices, per-class precision / recall /
//! F1, support-weighted macro F1, result tables and submission checks.

mod submission;
mod table;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::{ExperimentCondition, LanguageCondition};
use crate::dataset::{Task, TaskSchema};

pub use submission::{
    read_submission_labels, validate_submission, write_submission, SubmissionFormat, SubmissionReport,
    Violation,
};
pub use table::{ComparisonTable, SubmissionMark, TableRow};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("gold has {gold} labels but predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("label '{label}' at position {position} is not in the schema")]
    UnknownLabel { label: String, position: usize },
    #[error("no labels to score")]
    EmptyInput,
    #[error("more than one report for {language} / {condition}")]
    DuplicateCell { language: LanguageCondition, condition: ExperimentCondition },
    #[error("reports mix tasks {0} and {1}")]
    MixedTasks(Task, Task),
    #[error("no reports given")]
    NoReports,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// `cells[i][j]` counts items with gold label `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub cells: Vec<Vec<u64>>,
    pub n: u64,
}

impl ConfusionMatrix {
    pub fn get(&self, gold: &str, pred: &str) -> u64 {
        match (self.index(gold), self.index(pred)) {
            (Some(g), Some(p)) => self.cells[g][p],
            _ => 0,
        }
    }

    fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Gold count per class (row sums).
    pub fn supports(&self) -> Vec<u64> {
        self.cells.iter().map(|row| row.iter().sum()).collect()
    }

    /// Predicted count per class (column sums).
    pub fn predicted(&self) -> Vec<u64> {
        (0..self.labels.len()).map(|j| self.cells.iter().map(|row| row[j]).sum()).collect()
    }
}

fn resolve<S: AsRef<str>>(
    schema: &TaskSchema,
    labels: &[S],
) -> Result<Vec<usize>, MetricsError> {
    labels
        .iter()
        .enumerate()
        .map(|(position, raw)| {
            schema
                .normalize(raw.as_ref())
                .and_then(|canonical| schema.index_of(canonical))
                .ok_or_else(|| MetricsError::UnknownLabel { label: raw.as_ref().to_string(), position })
        })
        .collect()
}

/// Count (gold, predicted) pairs over the schema's labels. Labels go through
/// the schema's alias map first.
pub fn confusion_matrix<S: AsRef<str>, T: AsRef<str>>(
    gold: &[S],
    pred: &[T],
    schema: &TaskSchema,
) -> Result<ConfusionMatrix, MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::LengthMismatch { gold: gold.len(), pred: pred.len() });
    }
    let g = resolve(schema, gold)?;
    let p = resolve(schema, pred)?;
    let k = schema.len();
    let mut cells = vec![vec![0u64; k]; k];
    for (gi, pi) in g.into_iter().zip(p) {
        cells[gi][pi] += 1;
    }
    Ok(ConfusionMatrix { labels: schema.labels().to_vec(), cells, n: gold.len() as u64 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall, F1 and gold support per class, in schema order. Every
/// 0/0 is taken as 0.
pub fn per_class_prf(matrix: &ConfusionMatrix) -> Vec<ClassMetrics> {
    let supports = matrix.supports();
    let predicted = matrix.predicted();
    matrix
        .labels
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let tp = matrix.cells[i][i];
            let precision = ratio(tp, predicted[i]);
            let recall = ratio(tp, supports[i]);
            // 2PR/(P+R) == 2TP/(2TP+FP+FN); the count form avoids rounding
            let f1 = ratio(2 * tp, predicted[i] + supports[i]);
            ClassMetrics { label: label.clone(), precision, recall, f1, support: supports[i] }
        })
        .collect()
}

/// Σ_c (support_c / n) · F1_c from a confusion matrix.
pub fn weighted_f1_from_matrix(matrix: &ConfusionMatrix) -> Result<f64, MetricsError> {
    if matrix.n == 0 {
        return Err(MetricsError::EmptyInput);
    }
    // one division at the end keeps a perfect score at exactly 1.0
    let weighted: f64 = per_class_prf(matrix)
        .iter()
        .filter(|c| c.support > 0)
        .map(|c| c.support as f64 * c.f1)
        .sum();
    Ok(weighted / matrix.n as f64)
}

/// Unweighted mean F1 over classes that occur in gold or predictions.
pub fn macro_f1_from_matrix(matrix: &ConfusionMatrix) -> Result<f64, MetricsError> {
    if matrix.n == 0 {
        return Err(MetricsError::EmptyInput);
    }
    let predicted = matrix.predicted();
    let present: Vec<f64> = per_class_prf(matrix)
        .iter()
        .zip(predicted)
        .filter(|(c, p)| c.support > 0 || *p > 0)
        .map(|(c, _)| c.f1)
        .collect();
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

/// Support-weighted macro-averaged F1.
pub fn weighted_macro_f1<S: AsRef<str>, T: AsRef<str>>(
    gold: &[S],
    pred: &[T],
    schema: &TaskSchema,
) -> Result<f64, MetricsError> {
    weighted_f1_from_matrix(&confusion_matrix(gold, pred, schema)?)
}

/// Which run a report scores.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunProvenance {
    pub language: LanguageCondition,
    pub task: Task,
    pub condition: ExperimentCondition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub provenance: RunProvenance,
    pub per_class: Vec<ClassMetrics>,
    pub weighted_macro_f1: f64,
    /// Unweighted macro F1, reported alongside for comparison.
    pub macro_f1: f64,
    pub matrix: ConfusionMatrix,
}

impl EvalReport {
    pub fn from_matrix(provenance: RunProvenance, matrix: ConfusionMatrix) -> Result<Self, MetricsError> {
        Ok(EvalReport {
            provenance,
            per_class: per_class_prf(&matrix),
            weighted_macro_f1: weighted_f1_from_matrix(&matrix)?,
            macro_f1: macro_f1_from_matrix(&matrix)?,
            matrix,
        })
    }

    pub fn from_predictions<S: AsRef<str>, T: AsRef<str>>(
        provenance: RunProvenance,
        gold: &[S],
        pred: &[T],
        schema: &TaskSchema,
    ) -> Result<Self, MetricsError> {
        Self::from_matrix(provenance, confusion_matrix(gold, pred, schema)?)
    }
}
