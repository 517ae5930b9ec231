use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DatasetError;

/// Which shared-task label schema a dataset follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    /// Three-way homophobia / transphobia / neither.
    A,
    /// Seven-way fine-grained schema.
    B,
    /// Any other label set (synthetic fixtures, experiments).
    Custom,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::A => "A",
            Task::B => "B",
            Task::Custom => "custom",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" | "task-a" | "taska" => Ok(Task::A),
            "b" | "task-b" | "taskb" => Ok(Task::B),
            "custom" => Ok(Task::Custom),
            _ => Err(format!("unknown task '{s}' (expected A or B)")),
        }
    }
}

pub const TASK_A_LABELS: [&str; 3] = ["homophobia", "non-anti-LGBT+", "transphobia"];
pub const TASK_B_LABELS: [&str; 7] = [
    "counter-speech",
    "homophobic-threatening",
    "homophobic-derogation",
    "hope-speech",
    "none-of-the-above",
    "transphobic-threatening",
    "transphobic-derogation",
];

#[derive(Debug, Deserialize)]
struct SchemaFile {
    task: Task,
    labels: Vec<String>,
    #[serde(default)]
    aliases: BTreeMap<String, String>,
}

/// Ordered canonical labels plus the raw-string aliases that map onto them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskSchema {
    task: Task,
    labels: Vec<String>,
    aliases: BTreeMap<String, String>,
    #[serde(skip)]
    lookup: HashMap<String, usize>,
}

fn alias_key(raw: &str) -> String {
    raw.trim().to_lowercase()
}

impl TaskSchema {
    pub fn new(
        task: Task,
        labels: Vec<String>,
        aliases: BTreeMap<String, String>,
    ) -> Result<Self, DatasetError> {
        let invalid = |reason: String| DatasetError::InvalidSchema(reason);
        let required: Option<&[&str]> = match task {
            Task::A => Some(&TASK_A_LABELS),
            Task::B => Some(&TASK_B_LABELS),
            Task::Custom => None,
        };
        if let Some(required) = required {
            let mut got: Vec<&str> = labels.iter().map(String::as_str).collect();
            let mut want = required.to_vec();
            got.sort_unstable();
            want.sort_unstable();
            if got != want {
                return Err(invalid(format!("task {task} must have labels {required:?}, got {labels:?}")));
            }
        }
        if labels.is_empty() {
            return Err(invalid("schema has no labels".into()));
        }

        let mut lookup = HashMap::new();
        for (i, label) in labels.iter().enumerate() {
            if lookup.insert(alias_key(label), i).is_some() {
                return Err(invalid(format!("duplicate label '{label}'")));
            }
        }
        for (raw, canonical) in &aliases {
            let Some(i) = labels.iter().position(|l| l == canonical) else {
                return Err(invalid(format!("alias '{raw}' targets unknown label '{canonical}'")));
            };
            match lookup.insert(alias_key(raw), i) {
                Some(prev) if prev != i => {
                    return Err(invalid(format!("alias '{raw}' is ambiguous")));
                }
                _ => {}
            }
        }
        Ok(TaskSchema { task, labels, aliases, lookup })
    }

    /// Parse a schema config file (`task`, `labels`, `aliases`).
    pub fn from_json(source: &str) -> Result<Self, DatasetError> {
        let file: SchemaFile =
            serde_json::from_str(source).map_err(|e| DatasetError::InvalidSchema(e.to_string()))?;
        TaskSchema::new(file.task, file.labels, file.aliases)
    }

    pub fn from_json_file(path: &Path) -> Result<Self, DatasetError> {
        let raw = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
        TaskSchema::from_json(&raw)
    }

    /// The shipped schema for task A or B.
    pub fn builtin(task: Task) -> Result<Self, DatasetError> {
        match task {
            Task::A => TaskSchema::from_json(include_str!("../../data/schemas/task_a.json")),
            Task::B => TaskSchema::from_json(include_str!("../../data/schemas/task_b.json")),
            Task::Custom => Err(DatasetError::InvalidSchema("no builtin custom schema".into())),
        }
    }

    /// Schema with the given labels and no aliases.
    pub fn custom<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self, DatasetError> {
        TaskSchema::new(Task::Custom, labels.into_iter().map(Into::into).collect(), BTreeMap::new())
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn aliases(&self) -> &BTreeMap<String, String> {
        &self.aliases
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Position of a canonical label.
    pub fn index_of(&self, canonical: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == canonical)
    }

    /// Map a raw label (canonical or alias, case-insensitive, trimmed) to its
    /// canonical form.
    pub fn normalize(&self, raw: &str) -> Option<&str> {
        self.lookup.get(&alias_key(raw)).map(|&i| self.labels[i].as_str())
    }

    pub fn contains(&self, canonical: &str) -> bool {
        self.index_of(canonical).is_some()
    }

    /// Same task and same ordered labels.
    pub fn is_compatible(&self, other: &TaskSchema) -> bool {
        self.task == other.task && self.labels == other.labels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_schemas() {
        let a = TaskSchema::builtin(Task::A).unwrap();
        assert_eq!(a.labels(), TASK_A_LABELS);
        let b = TaskSchema::builtin(Task::B).unwrap();
        assert_eq!(b.len(), 7);
        assert_eq!(b.labels(), TASK_B_LABELS);
    }

    #[test]
    fn alias_normalisation() {
        let a = TaskSchema::builtin(Task::A).unwrap();
        assert_eq!(a.normalize("Non-anti-LGBT+ content"), Some("non-anti-LGBT+"));
        assert_eq!(a.normalize("  homophobia "), Some("homophobia"));
        assert_eq!(a.normalize("TRANSPHOBIA"), Some("transphobia"));
        assert_eq!(a.normalize("Homophobic!!"), None);
        let b = TaskSchema::builtin(Task::B).unwrap();
        assert_eq!(b.normalize("Hope-Speech"), Some("hope-speech"));
        assert_eq!(b.normalize("td"), Some("transphobic-derogation"));
    }

    #[test]
    fn task_label_sets_enforced() {
        let err = TaskSchema::new(Task::A, vec!["x".into(), "y".into()], BTreeMap::new());
        assert!(err.is_err());
        let mut aliases = BTreeMap::new();
        aliases.insert("z".to_string(), "missing".to_string());
        assert!(TaskSchema::new(Task::Custom, vec!["a".into()], aliases).is_err());
        assert!(TaskSchema::custom(["a", "A"]).is_err());
    }

    #[test]
    fn compatibility() {
        let a = TaskSchema::builtin(Task::A).unwrap();
        let b = TaskSchema::builtin(Task::B).unwrap();
        assert!(a.is_compatible(&a.clone()));
        assert!(!a.is_compatible(&b));
    }
}
