use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::dataset::TaskSchema;

/// Layout of a prediction file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionFormat {
    /// `true` for `id,label` rows, `false` for one label per line.
    pub with_ids: bool,
    pub header: bool,
    pub delimiter: char,
}

impl Default for SubmissionFormat {
    fn default() -> Self {
        SubmissionFormat { with_ids: true, header: true, delimiter: ',' }
    }
}

impl SubmissionFormat {
    pub fn labels_only() -> Self {
        SubmissionFormat { with_ids: false, header: false, delimiter: ',' }
    }
}

/// One problem found in a prediction file. Line numbers are 1-based and count
/// the header line when there is one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    RowCount { expected: usize, actual: usize },
    UnknownLabel { line: usize, raw: String },
    EmptyRow { line: usize },
    MissingLabelField { line: usize },
    Unreadable { reason: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::RowCount { expected, actual } => {
                write!(f, "expected {expected} prediction rows, found {actual}")
            }
            Violation::UnknownLabel { line, raw } => write!(f, "line {line}: label '{raw}' is not in the schema"),
            Violation::EmptyRow { line } => write!(f, "line {line}: empty row"),
            Violation::MissingLabelField { line } => write!(f, "line {line}: no label field"),
            Violation::Unreadable { reason } => write!(f, "cannot read submission: {reason}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionReport {
    /// Data rows seen, empty ones included.
    pub rows: usize,
    pub violations: Vec<Violation>,
}

impl SubmissionReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn unquote(field: &str) -> &str {
    let f = field.trim();
    f.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(f)
}

/// Label field of a data line, `None` when the row has no label column.
fn label_field(line: &str, format: &SubmissionFormat) -> Option<String> {
    if !format.with_ids {
        return Some(unquote(line).to_string());
    }
    // ids never contain the delimiter in practice, labels might
    let (_, label) = line.split_once(format.delimiter)?;
    Some(unquote(label).to_string())
}

/// Check a prediction file against the schema and the expected row count.
/// Problems are collected, never raised.
pub fn validate_submission(
    path: &Path,
    schema: &TaskSchema,
    expected_n: usize,
    format: &SubmissionFormat,
) -> SubmissionReport {
    let content = match fs::read_to_string(path) {
        Ok(c) => c,
        Err(e) => {
            return SubmissionReport {
                rows: 0,
                violations: vec![Violation::Unreadable { reason: format!("{}: {e}", path.display()) }],
            }
        }
    };
    validate_submission_str(&content, schema, expected_n, format)
}

pub(crate) fn validate_submission_str(
    content: &str,
    schema: &TaskSchema,
    expected_n: usize,
    format: &SubmissionFormat,
) -> SubmissionReport {
    let mut lines: Vec<&str> = content.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    // a trailing newline ends the last row rather than starting an empty one
    if lines.last() == Some(&"") {
        lines.pop();
    }
    let skip = usize::from(format.header);
    let mut report = SubmissionReport::default();
    for (i, line) in lines.iter().enumerate().skip(skip) {
        let line_no = i + 1;
        report.rows += 1;
        if line.trim().is_empty() {
            report.violations.push(Violation::EmptyRow { line: line_no });
            continue;
        }
        match label_field(line, format) {
            None => report.violations.push(Violation::MissingLabelField { line: line_no }),
            Some(raw) if raw.is_empty() => report.violations.push(Violation::MissingLabelField { line: line_no }),
            Some(raw) => {
                if schema.normalize(&raw).is_none() {
                    report.violations.push(Violation::UnknownLabel { line: line_no, raw });
                }
            }
        }
    }
    if report.rows != expected_n {
        report.violations.insert(0, Violation::RowCount { expected: expected_n, actual: report.rows });
    }
    report
}

/// Write predictions. Ids are required when the format carries them.
pub fn write_submission(
    path: &Path,
    ids: Option<&[String]>,
    labels: &[String],
    format: &SubmissionFormat,
) -> Result<(), MetricsError> {
    let io = |source| MetricsError::Io { path: path.to_path_buf(), source };
    let mut out = String::new();
    let d = format.delimiter;
    if format.with_ids {
        let ids = ids.ok_or(MetricsError::LengthMismatch { gold: labels.len(), pred: 0 })?;
        if ids.len() != labels.len() {
            return Err(MetricsError::LengthMismatch { gold: ids.len(), pred: labels.len() });
        }
        if format.header {
            out.push_str(&format!("id{d}label\n"));
        }
        for (id, label) in ids.iter().zip(labels) {
            out.push_str(&format!("{id}{d}{label}\n"));
        }
    } else {
        if format.header {
            out.push_str("label\n");
        }
        for label in labels {
            out.push_str(label);
            out.push('\n');
        }
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(out.as_bytes()).map_err(io)
}

/// Read the label column of a prediction file that already validated,
/// normalised to canonical labels.
pub fn read_submission_labels(
    path: &Path,
    schema: &TaskSchema,
    format: &SubmissionFormat,
) -> Result<Vec<String>, MetricsError> {
    let content =
        fs::read_to_string(path).map_err(|source| MetricsError::Io { path: path.to_path_buf(), source })?;
    content
        .lines()
        .skip(usize::from(format.header))
        .enumerate()
        .map(|(position, line)| {
            let raw = label_field(line, format).unwrap_or_default();
            schema
                .normalize(&raw)
                .map(str::to_string)
                .ok_or(MetricsError::UnknownLabel { label: raw, position })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Task;

    fn schema_a() -> TaskSchema {
        TaskSchema::builtin(Task::A).unwrap()
    }

    #[test]
    fn well_formed_file() {
        let src = "id,label\n1,homophobia\n2,Non-anti-LGBT+ content\n3,transphobia\n";
        let r = validate_submission_str(src, &schema_a(), 3, &SubmissionFormat::default());
        assert!(r.is_valid(), "{r:?}");
        assert_eq!(r.rows, 3);
    }

    #[test]
    fn one_unknown_label() {
        let src = "id,label\n1,homophobia\n2,Homofobia\n3,transphobia\n";
        let r = validate_submission_str(src, &schema_a(), 3, &SubmissionFormat::default());
        assert_eq!(r.violations, vec![Violation::UnknownLabel { line: 3, raw: "Homofobia".into() }]);
    }

    #[test]
    fn short_file() {
        let src = "homophobia\ntransphobia\n";
        let r = validate_submission_str(src, &schema_a(), 3, &SubmissionFormat::labels_only());
        assert_eq!(r.violations, vec![Violation::RowCount { expected: 3, actual: 2 }]);
    }

    #[test]
    fn empty_and_missing_fields() {
        let src = "id,label\n1,homophobia\n\n3\n4,\n";
        let r = validate_submission_str(src, &schema_a(), 4, &SubmissionFormat::default());
        assert_eq!(
            r.violations,
            vec![
                Violation::EmptyRow { line: 3 },
                Violation::MissingLabelField { line: 4 },
                Violation::MissingLabelField { line: 5 },
            ]
        );
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/pred.csv");
        let labels: Vec<String> = ["homophobia", "transphobia"].map(String::from).to_vec();
        let ids: Vec<String> = ["a", "b"].map(String::from).to_vec();
        let fmt = SubmissionFormat::default();
        write_submission(&path, Some(&ids), &labels, &fmt).unwrap();
        assert!(validate_submission(&path, &schema_a(), 2, &fmt).is_valid());
        assert_eq!(read_submission_labels(&path, &schema_a(), &fmt).unwrap(), labels);
        let missing = validate_submission(&dir.path().join("nope.csv"), &schema_a(), 2, &fmt);
        assert!(matches!(missing.violations[..], [Violation::Unreadable { .. }]));
    }
}
