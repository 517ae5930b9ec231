use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::schema::Task;
use super::{DatasetError, LabeledDataset};
use crate::conditions::LanguageCondition;

/// Per-label row counts of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub task: Task,
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
}

impl ClassCounts {
    pub fn from_counts(task: Task, counts: BTreeMap<String, u64>) -> Self {
        let total = counts.values().sum();
        ClassCounts { task, counts, total }
    }

    pub fn get(&self, label: &str) -> u64 {
        self.counts.get(label).copied().unwrap_or(0)
    }
}

/// Exact count of every schema label, including labels with no rows.
pub fn class_counts(dataset: &LabeledDataset) -> ClassCounts {
    let mut counts: BTreeMap<String, u64> =
        dataset.schema.labels().iter().map(|l| (l.clone(), 0)).collect();
    for row in &dataset.rows {
        *counts.entry(row.label.clone()).or_insert(0) += 1;
    }
    ClassCounts::from_counts(dataset.schema.task(), counts)
}

/// Reference counts to check against. Labels missing from `counts` are not
/// checked, so a total-only expectation is allowed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedCounts {
    pub task: Task,
    #[serde(default)]
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
}

impl From<&ClassCounts> for ExpectedCounts {
    fn from(c: &ClassCounts) -> Self {
        ExpectedCounts { task: c.task, counts: c.counts.clone(), total: c.total }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CountMismatch {
    IncomparableSchemas { actual: Task, expected: Task },
    Label { label: String, expected: u64, actual: u64 },
    Total { expected: u64, actual: u64 },
}

/// Empty when counts match the expectation exactly.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TotalsReport {
    pub mismatches: Vec<CountMismatch>,
}

impl TotalsReport {
    pub fn is_empty(&self) -> bool {
        self.mismatches.is_empty()
    }
}

pub fn validate_totals(counts: &ClassCounts, expected: &ExpectedCounts) -> TotalsReport {
    let mut report = TotalsReport::default();
    if counts.task != expected.task {
        report.mismatches.push(CountMismatch::IncomparableSchemas {
            actual: counts.task,
            expected: expected.task,
        });
        return report;
    }
    for (label, &want) in &expected.counts {
        let got = counts.get(label);
        if got != want {
            report.mismatches.push(CountMismatch::Label { label: label.clone(), expected: want, actual: got });
        }
    }
    if counts.total != expected.total {
        report.mismatches.push(CountMismatch::Total { expected: expected.total, actual: counts.total });
    }
    report
}

#[derive(Debug, Deserialize)]
struct FixtureEntry {
    counts: BTreeMap<String, u64>,
    total: u64,
}

/// Training-split label counts per task and language as published with the
/// shared task.
#[derive(Debug, Clone)]
pub struct ExpectedCountsFixture {
    entries: BTreeMap<(Task, LanguageCondition), ExpectedCounts>,
}

impl ExpectedCountsFixture {
    pub fn from_json(source: &str) -> Result<Self, DatasetError> {
        let raw: BTreeMap<Task, BTreeMap<LanguageCondition, FixtureEntry>> = serde_json::from_str(source)
            .map_err(|e| DatasetError::InvalidSchema(format!("expected-counts fixture: {e}")))?;
        let mut entries = BTreeMap::new();
        for (task, per_language) in raw {
            for (language, entry) in per_language {
                let sum: u64 = entry.counts.values().sum();
                if sum != entry.total {
                    return Err(DatasetError::InvalidSchema(format!(
                        "expected counts for task {task} {language}: labels sum to {sum}, total says {}",
                        entry.total
                    )));
                }
                entries.insert(
                    (task, language),
                    ExpectedCounts { task, counts: entry.counts, total: entry.total },
                );
            }
        }
        Ok(ExpectedCountsFixture { entries })
    }

    /// The fixture shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json(include_str!("../../data/expected_counts.json"))
            .expect("bundled expected-counts fixture is valid")
    }

    pub fn get(&self, task: Task, language: LanguageCondition) -> Option<&ExpectedCounts> {
        self.entries.get(&(task, language))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Task, LanguageCondition, &ExpectedCounts)> {
        self.entries.iter().map(|(&(t, l), e)| (t, l, e))
    }
}
