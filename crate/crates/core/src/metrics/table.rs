use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{EvalReport, MetricsError};
use crate::conditions::{ExperimentCondition, LanguageCondition};
use crate::dataset::Task;

/// The condition submitted for a language, and whether the organisers
/// accepted that submission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionMark {
    pub condition: ExperimentCondition,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub language: LanguageCondition,
    /// One entry per column, full precision.
    pub cells: Vec<Option<f64>>,
    pub submitted: Option<SubmissionMark>,
    pub rank: Option<u32>,
}

/// Weighted macro F1 per language (rows) and condition (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub task: Task,
    pub columns: Vec<ExperimentCondition>,
    pub rows: Vec<TableRow>,
    /// Whether the rank column is rendered.
    pub show_rank: bool,
}

impl ComparisonTable {
    /// Build the grid from evaluation reports. Columns and rows appear in
    /// canonical order and only when at least one report fills them.
    pub fn from_reports(
        reports: &[EvalReport],
        submitted: &BTreeMap<LanguageCondition, SubmissionMark>,
        ranks: &BTreeMap<LanguageCondition, u32>,
    ) -> Result<Self, MetricsError> {
        let first = reports.first().ok_or(MetricsError::NoReports)?;
        let task = first.provenance.task;
        let mut grid: BTreeMap<(LanguageCondition, ExperimentCondition), f64> = BTreeMap::new();
        for r in reports {
            let p = &r.provenance;
            if p.task != task {
                return Err(MetricsError::MixedTasks(task, p.task));
            }
            if grid.insert((p.language, p.condition), r.weighted_macro_f1).is_some() {
                return Err(MetricsError::DuplicateCell { language: p.language, condition: p.condition });
            }
        }
        let columns: Vec<ExperimentCondition> = ExperimentCondition::ALL
            .into_iter()
            .filter(|c| grid.keys().any(|(_, cond)| cond == c))
            .collect();
        let rows = LanguageCondition::ALL
            .into_iter()
            .filter(|l| grid.keys().any(|(lang, _)| lang == l))
            .map(|language| TableRow {
                language,
                cells: columns.iter().map(|c| grid.get(&(language, *c)).copied()).collect(),
                submitted: submitted.get(&language).copied(),
                rank: ranks.get(&language).copied(),
            })
            .collect();
        Ok(ComparisonTable { task, columns, rows, show_rank: !ranks.is_empty() })
    }

    pub fn cell(&self, language: LanguageCondition, condition: ExperimentCondition) -> Option<f64> {
        let col = self.columns.iter().position(|c| *c == condition)?;
        self.rows.iter().find(|r| r.language == language)?.cells[col]
    }

    pub fn row(&self, language: LanguageCondition) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.language == language)
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["Language Condition".to_string()];
        h.extend(self.columns.iter().map(|c| c.display_name().to_string()));
        if self.show_rank {
            h.push("Rank".into());
        }
        h
    }

    /// Display strings for a row: value rounded to 2 decimals, `-` when
    /// missing; `bold` and `invalid` wrap the submitted cell.
    fn display_row(&self, row: &TableRow, bold: impl Fn(&str) -> String) -> Vec<String> {
        let mut out = vec![row.language.display_name().to_string()];
        for (col, value) in self.columns.iter().zip(&row.cells) {
            let Some(v) = value else {
                out.push("-".into());
                continue;
            };
            let shown = format!("{v:.2}");
            out.push(match row.submitted {
                Some(mark) if mark.condition == *col && mark.valid => bold(&shown),
                Some(mark) if mark.condition == *col => format!("({shown})"),
                _ => shown,
            });
        }
        if self.show_rank {
            out.push(row.rank.map_or_else(|| "-".to_string(), |r| r.to_string()));
        }
        out
    }

    /// Display cells of one row with the submitted value marked `*x*`.
    pub fn display_cells(&self, language: LanguageCondition) -> Option<Vec<String>> {
        self.row(language).map(|r| self.display_row(r, |s| format!("*{s}*")))
    }

    /// Column-aligned plain text. The submitted value is starred, an invalid
    /// submission is parenthesised.
    pub fn to_text(&self) -> String {
        let mut lines = vec![self.header()];
        lines.extend(self.rows.iter().map(|r| self.display_row(r, |s| format!("*{s}*"))));
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|i| lines.iter().map(|l| l[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = format!("Task {}: weighted macro F1\n", self.task);
        for (n, line) in lines.iter().enumerate() {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, w))| if i == 0 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
            if n == 0 {
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                out.push_str(&rule.join("  "));
                out.push('\n');
            }
        }
        out
    }

    /// CSV with full-precision values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("language");
        for c in &self.columns {
            let _ = write!(out, ",{}", c.name());
        }
        out.push_str(",submitted,submission_valid,rank\n");
        for row in &self.rows {
            out.push_str(row.language.name());
            for v in &row.cells {
                out.push(',');
                if let Some(v) = v {
                    let _ = write!(out, "{v}");
                }
            }
            match row.submitted {
                Some(m) => {
                    let _ = write!(out, ",{},{}", m.condition.name(), m.valid);
                }
                None => out.push_str(",,"),
            }
            out.push(',');
            if let Some(r) = row.rank {
                let _ = write!(out, "{r}");
            }
            out.push('\n');
        }
        out
    }

    /// LaTeX `tabular` body in the layout of the published result tables.
    pub fn to_latex(&self) -> String {
        let mut out = String::new();
        let spec = format!("l{}", "c".repeat(self.header().len() - 1));
        let _ = writeln!(out, "\\begin{{tabular}}{{{spec}}}");
        out.push_str("\\hline\n");
        let header: Vec<String> = self.header().iter().map(|h| format!("\\textbf{{{h}}}")).collect();
        let _ = writeln!(out, "{}\\\\", header.join(" & "));
        out.push_str("\\hline\n");
        for row in &self.rows {
            let cells = self.display_row(row, |s| format!("\\textbf{{{s}}}"));
            let _ = writeln!(out, "{}\\\\", cells.join(" & "));
        }
        out.push_str("\\hline\n\\end{tabular}\n");
        out
    }
}
