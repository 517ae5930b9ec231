//! Labelled shared-task data: schemas, CSV loading, counting and minority
//! oversampling.

mod counts;
mod schema;

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::LanguageCondition;

pub use counts::{
    class_counts, validate_totals, ClassCounts, CountMismatch, ExpectedCounts, ExpectedCountsFixture,
    TotalsReport,
};
pub use schema::{Task, TaskSchema, TASK_A_LABELS, TASK_B_LABELS};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unknown label '{raw}' at line {line}")]
    UnknownLabel { raw: String, line: u64 },
    #[error("malformed CSV at line {line}: {reason}")]
    MalformedCsv { line: u64, reason: String },
    #[error("class '{0}' has no rows; cannot oversample")]
    EmptyClass(String),
    #[error("dataset has no rows")]
    Empty,
    #[error("oversampling applies to the training split only, got {0}")]
    NotTrainingSplit(Split),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "validation" | "dev" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub id: String,
    pub text: String,
    /// Canonical schema label.
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub language: LanguageCondition,
    pub schema: TaskSchema,
    pub rows: Vec<LabeledRow>,
    pub split: Split,
}

impl LabeledDataset {
    /// Build a dataset, checking every label against the schema.
    pub fn new(
        language: LanguageCondition,
        schema: TaskSchema,
        rows: Vec<LabeledRow>,
        split: Split,
    ) -> Result<Self, DatasetError> {
        if rows.is_empty() {
            return Err(DatasetError::Empty);
        }
        for (i, row) in rows.iter().enumerate() {
            if !schema.contains(&row.label) {
                return Err(DatasetError::UnknownLabel { raw: row.label.clone(), line: i as u64 + 1 });
            }
        }
        Ok(LabeledDataset { language, schema, rows, split })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn texts(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.text.clone()).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.label.clone()).collect()
    }
}

/// Column layout of a labelled CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvLayout {
    pub text_column: String,
    pub label_column: String,
    /// Used when present in the header; otherwise rows are numbered from 1.
    pub id_column: String,
    pub delimiter: u8,
}

impl Default for CsvLayout {
    fn default() -> Self {
        CsvLayout {
            text_column: "text".into(),
            label_column: "category".into(),
            id_column: "id".into(),
            delimiter: b',',
        }
    }
}

/// Load a UTF-8 CSV with a header row. Quoted fields may span lines.
/// Labels go through the schema's alias map; the first unknown label aborts
/// the load with its line number.
pub fn load_labeled_csv(
    path: &Path,
    schema: &TaskSchema,
    language: LanguageCondition,
    split: Split,
    layout: &CsvLayout,
) -> Result<LabeledDataset, DatasetError> {
    let file = fs::File::open(path).map_err(|e| DatasetError::io(path, e))?;
    read_labeled_csv(file, schema, language, split, layout)
}

pub fn read_labeled_csv<R: std::io::Read>(
    reader: R,
    schema: &TaskSchema,
    language: LanguageCondition,
    split: Split,
    layout: &CsvLayout,
) -> Result<LabeledDataset, DatasetError> {
    let mut csv = csv::ReaderBuilder::new()
        .delimiter(layout.delimiter)
        .has_headers(true)
        .from_reader(reader);
    let malformed = |err: csv::Error| {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        DatasetError::MalformedCsv { line, reason: err.to_string() }
    };
    let headers = csv.headers().map_err(malformed)?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| DatasetError::MalformedCsv {
            line: 1,
            reason: format!("missing column '{name}' in header {:?}", headers.iter().collect::<Vec<_>>()),
        })
    };
    let text_col = column(&layout.text_column)?;
    let label_col = column(&layout.label_column)?;
    let id_col = headers.iter().position(|h| h.trim() == layout.id_column);

    let mut rows = Vec::new();
    for (n, record) in csv.records().enumerate() {
        let record = record.map_err(malformed)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let raw_label = record.get(label_col).unwrap_or_default();
        let label = schema
            .normalize(raw_label)
            .ok_or_else(|| DatasetError::UnknownLabel { raw: raw_label.to_string(), line })?;
        let id = id_col
            .and_then(|c| record.get(c))
            .map(str::to_string)
            .unwrap_or_else(|| (n + 1).to_string());
        rows.push(LabeledRow {
            id,
            text: record.get(text_col).unwrap_or_default().to_string(),
            label: label.to_string(),
        });
    }
    LabeledDataset::new(language, schema.clone(), rows, split)
}

/// Randomly duplicate minority-class rows (with replacement) until every
/// class has as many rows as the largest one.
///
/// The output keeps every original row in order, then appends the duplicates
/// class by class in schema order. Same seed, same output.
pub fn oversample(dataset: &LabeledDataset, seed: u64) -> Result<LabeledDataset, DatasetError> {
    if dataset.split != Split::Train {
        return Err(DatasetError::NotTrainingSplit(dataset.split));
    }
    let by_class: Vec<Vec<usize>> = dataset
        .schema
        .labels()
        .iter()
        .map(|label| {
            dataset
                .rows
                .iter()
                .enumerate()
                .filter(|(_, r)| &r.label == label)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    if let Some(pos) = by_class.iter().position(Vec::is_empty) {
        return Err(DatasetError::EmptyClass(dataset.schema.labels()[pos].clone()));
    }
    let majority = by_class.iter().map(Vec::len).max().unwrap_or(0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = dataset.rows.clone();
    rows.reserve(majority * by_class.len() - dataset.rows.len());
    for members in &by_class {
        for _ in members.len()..majority {
            let pick = members[rng.gen_range(0..members.len())];
            rows.push(dataset.rows[pick].clone());
        }
    }
    Ok(LabeledDataset { rows, ..dataset.clone() })
}

/// Write rows as JSONL (`id`, `text`, `label` per line).
pub fn write_jsonl(dataset: &LabeledDataset, path: &Path) -> Result<(), DatasetError> {
    let file = fs::File::create(path).map_err(|e| DatasetError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in &dataset.rows {
        let line = serde_json::to_string(row).expect("rows serialize");
        writeln!(w, "{line}").map_err(|e| DatasetError::io(path, e))?;
    }
    w.flush().map_err(|e| DatasetError::io(path, e))
}

pub fn read_jsonl(
    path: &Path,
    schema: &TaskSchema,
    language: LanguageCondition,
    split: Split,
) -> Result<LabeledDataset, DatasetError> {
    let file = fs::File::open(path).map_err(|e| DatasetError::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DatasetError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: LabeledRow = serde_json::from_str(&line)
            .map_err(|e| DatasetError::MalformedCsv { line: i as u64 + 1, reason: e.to_string() })?;
        rows.push(row);
    }
    LabeledDataset::new(language, schema.clone(), rows, split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(schema: TaskSchema, labels: &[&str]) -> LabeledDataset {
        let rows = labels
            .iter()
            .enumerate()
            .map(|(i, l)| LabeledRow { id: i.to_string(), text: format!("text {i}"), label: l.to_string() })
            .collect();
        LabeledDataset::new(LanguageCondition::English, schema, rows, Split::Train).unwrap()
    }

    #[test]
    fn counts_synthetic_fixture() {
        let d = dataset(TaskSchema::custom(["a", "b"]).unwrap(), &["a", "a", "b"]);
        let c = class_counts(&d);
        assert_eq!(c.get("a"), 2);
        assert_eq!(c.get("b"), 1);
        assert_eq!(c.total, 3);
    }

    #[test]
    fn counts_include_absent_labels() {
        let d = dataset(TaskSchema::custom(["a", "b", "c"]).unwrap(), &["a"]);
        let c = class_counts(&d);
        assert_eq!(c.counts.get("c"), Some(&0));
    }

    #[test]
    fn oversample_single_minority_row() {
        let d = dataset(TaskSchema::custom(["a", "b"]).unwrap(), &["a", "a", "a", "b"]);
        let out = oversample(&d, 11).unwrap();
        let bs: Vec<&LabeledRow> = out.rows.iter().filter(|r| r.label == "b").collect();
        assert_eq!(bs.len(), 3);
        assert!(bs.iter().all(|r| r.text == "text 3"));
        assert_eq!(out.rows.iter().filter(|r| r.label == "a").count(), 3);
        assert_eq!(&out.rows[..4], &d.rows[..]);
    }

    #[test]
    fn oversample_balanced_is_identity() {
        let d = dataset(
            TaskSchema::custom(["a", "b"]).unwrap(),
            &["a", "b", "a", "b", "a", "b", "a", "b", "a", "b"],
        );
        assert_eq!(oversample(&d, 1).unwrap(), d);
    }

    #[test]
    fn oversample_errors() {
        let d = dataset(TaskSchema::custom(["a", "b"]).unwrap(), &["a", "a"]);
        assert!(matches!(oversample(&d, 0), Err(DatasetError::EmptyClass(l)) if l == "b"));
        let mut v = dataset(TaskSchema::custom(["a"]).unwrap(), &["a"]);
        v.split = Split::Validation;
        assert!(matches!(oversample(&v, 0), Err(DatasetError::NotTrainingSplit(Split::Validation))));
    }

    #[test]
    fn oversample_is_seeded() {
        let labels: Vec<&str> = ["a"; 20].into_iter().chain(["b"; 5]).chain(["c"; 2]).collect();
        let d = dataset(TaskSchema::custom(["a", "b", "c"]).unwrap(), &labels);
        assert_eq!(oversample(&d, 5).unwrap(), oversample(&d, 5).unwrap());
        assert_ne!(oversample(&d, 5).unwrap().rows, oversample(&d, 6).unwrap().rows);
    }

    const CSV: &str = "id,text,category\n\
        1,\"first comment, with comma\",Homophobia\n\
        2,\"second\nspans lines\",Non-anti-LGBT+ content\n\
        3,third,transphobia\n";

    #[test]
    fn csv_with_aliases_and_multiline() {
        let schema = TaskSchema::builtin(Task::A).unwrap();
        let d = read_labeled_csv(CSV.as_bytes(), &schema, LanguageCondition::English, Split::Train, &CsvLayout::default())
            .unwrap();
        assert_eq!(d.labels(), vec!["homophobia", "non-anti-LGBT+", "transphobia"]);
        assert_eq!(d.rows[1].text, "second\nspans lines");
        assert_eq!(d.rows[2].id, "3");
    }

    #[test]
    fn unknown_label_reports_line() {
        let schema = TaskSchema::builtin(Task::A).unwrap();
        let csv = "text,category\nfine,Homophobia\n\"two\nlines\",N\nbad,Homophobic!!\n";
        let err = read_labeled_csv(csv.as_bytes(), &schema, LanguageCondition::Spanish, Split::Train, &CsvLayout::default())
            .unwrap_err();
        match err {
            DatasetError::UnknownLabel { raw, line } => {
                assert_eq!(raw, "Homophobic!!");
                assert_eq!(line, 5);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_csv_reports_line() {
        let schema = TaskSchema::builtin(Task::A).unwrap();
        let csv = "text,category\na,H\nb,N,extra\n";
        let err = read_labeled_csv(csv.as_bytes(), &schema, LanguageCondition::Tamil, Split::Train, &CsvLayout::default())
            .unwrap_err();
        assert!(matches!(err, DatasetError::MalformedCsv { line: 3, .. }), "{err}");
        let err = read_labeled_csv("txt,category\na,H\n".as_bytes(), &schema, LanguageCondition::Tamil, Split::Train, &CsvLayout::default())
            .unwrap_err();
        assert!(matches!(err, DatasetError::MalformedCsv { line: 1, .. }));
    }

    #[test]
    fn custom_columns_and_delimiter() {
        let schema = TaskSchema::builtin(Task::B).unwrap();
        let tsv = "comment\tlabel\nhello\tHope-Speech\n";
        let layout = CsvLayout {
            text_column: "comment".into(),
            label_column: "label".into(),
            delimiter: b'\t',
            ..Default::default()
        };
        let d = read_labeled_csv(tsv.as_bytes(), &schema, LanguageCondition::Tamil, Split::Test, &layout).unwrap();
        assert_eq!(d.rows[0].label, "hope-speech");
        assert_eq!(d.rows[0].id, "1");
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let schema = TaskSchema::builtin(Task::A).unwrap();
        let d = read_labeled_csv(CSV.as_bytes(), &schema, LanguageCondition::English, Split::Train, &CsvLayout::default())
            .unwrap();
        let path = dir.path().join("train.jsonl");
        write_jsonl(&d, &path).unwrap();
        assert_eq!(read_jsonl(&path, &schema, LanguageCondition::English, Split::Train).unwrap(), d);
    }

    #[test]
    fn empty_dataset_rejected() {
        let schema = TaskSchema::builtin(Task::A).unwrap();
        let err = read_labeled_csv("text,category\n".as_bytes(), &schema, LanguageCondition::English, Split::Train, &CsvLayout::default());
        assert!(matches!(err, Err(DatasetError::Empty)));
    }
}
