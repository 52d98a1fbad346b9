use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid example {example_id}: {message}")]
    Validation { example_id: String, message: String },
    #[error("unknown dataset format {0:?} (expected \"jsonl\")")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub source_example_id: String,
    pub source_split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub example_id: String,
    /// The ground-truth input document set, in file order.
    pub input_docs: Vec<Document>,
    pub reference_summary: String,
    pub additional_input: Option<String>,
    pub split: Split,
}

impl Example {
    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.input_docs.iter().map(|d| d.doc_id.as_str())
    }
}

/// Identifier of an on-disk dataset format. JSON Lines is the only one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    #[default]
    Jsonl,
}

impl FromStr for DatasetFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" | "json-lines" => Ok(DatasetFormat::Jsonl),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

/// Which text stands in for the query of an example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuerySource {
    #[default]
    ReferenceSummary,
    AdditionalInput,
}

/// Per-dataset loading options.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub format: DatasetFormat,
    /// Dataset name; defaults to the file stem.
    pub name: Option<String>,
    /// Keep only the first N documents of every example.
    pub max_input_docs: Option<usize>,
    pub query_source: QuerySource,
    /// Treat a document's first line as its title (oracle lead baseline).
    pub first_line_is_title: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub num_examples: usize,
    pub max_docs: usize,
    pub mean_docs: f64,
    pub total_docs: usize,
    /// Mean whitespace tokens per document.
    pub mean_doc_tokens: f64,
    /// Mean whitespace tokens per reference summary.
    pub mean_summary_tokens: f64,
}

impl DatasetStats {
    fn over<'a>(examples: impl Iterator<Item = &'a Example>) -> Self {
        let mut stats = DatasetStats {
            num_examples: 0,
            max_docs: 0,
            mean_docs: 0.0,
            total_docs: 0,
            mean_doc_tokens: 0.0,
            mean_summary_tokens: 0.0,
        };
        let mut doc_tokens = 0usize;
        let mut summary_tokens = 0usize;
        for ex in examples {
            stats.num_examples += 1;
            stats.max_docs = stats.max_docs.max(ex.input_docs.len());
            stats.total_docs += ex.input_docs.len();
            doc_tokens += ex
                .input_docs
                .iter()
                .map(|d| d.text.split_whitespace().count())
                .sum::<usize>();
            summary_tokens += ex.reference_summary.split_whitespace().count();
        }
        if stats.num_examples > 0 {
            stats.mean_docs = stats.total_docs as f64 / stats.num_examples as f64;
            stats.mean_summary_tokens = summary_tokens as f64 / stats.num_examples as f64;
        }
        if stats.total_docs > 0 {
            stats.mean_doc_tokens = doc_tokens as f64 / stats.total_docs as f64;
        }
        stats
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub config: DatasetConfig,
    /// Examples in file order; use [`Dataset::split`] for a partition.
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn stats(&self) -> DatasetStats {
        DatasetStats::over(self.examples.iter())
    }

    pub fn split_stats(&self, split: Split) -> DatasetStats {
        DatasetStats::over(self.split(split))
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Example> {
        self.examples.iter().filter(move |e| e.split == split)
    }

    pub fn has_split(&self, split: Split) -> bool {
        self.split(split).next().is_some()
    }

    pub fn example(&self, example_id: &str) -> Option<&Example> {
        self.examples.iter().find(|e| e.example_id == example_id)
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.examples.iter().flat_map(|e| e.input_docs.iter())
    }
}

/// One line of the canonical JSON Lines format.
#[derive(Debug, Serialize, Deserialize)]
struct Record {
    example_id: String,
    split: Split,
    documents: Vec<String>,
    reference_summary: String,
    #[serde(default)]
    additional_input: Option<String>,
}

/// Document ids are derived from the example id and the position in the file.
fn doc_id(example_id: &str, position: usize) -> String {
    format!("{example_id}#{position}")
}

pub fn load_dataset(path: &Path, config: &DatasetConfig) -> Result<Dataset, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config = config.clone();
    if config.name.is_none() {
        config.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    }
    read_dataset(BufReader::new(file), &config)
}

pub fn read_dataset(reader: impl BufRead, config: &DatasetConfig) -> Result<Dataset, CorpusError> {
    let mut examples = Vec::new();
    let mut seen_examples = HashSet::new();
    let mut seen_docs = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let example = validate(record, config)?;
        if !seen_examples.insert(example.example_id.clone()) {
            return Err(invalid(&example.example_id, "duplicate example_id"));
        }
        for doc in &example.input_docs {
            if !seen_docs.insert(doc.doc_id.clone()) {
                return Err(invalid(
                    &example.example_id,
                    format!("duplicate doc_id {}", doc.doc_id),
                ));
            }
        }
        examples.push(example);
    }
    Ok(Dataset {
        name: config.name.clone().unwrap_or_else(|| "dataset".to_string()),
        config: config.clone(),
        examples,
    })
}

fn invalid(example_id: &str, message: impl Into<String>) -> CorpusError {
    CorpusError::Validation {
        example_id: example_id.to_string(),
        message: message.into(),
    }
}

fn validate(record: Record, config: &DatasetConfig) -> Result<Example, CorpusError> {
    let id = record.example_id;
    if id.trim().is_empty() {
        return Err(invalid(&id, "empty example_id"));
    }
    if record.reference_summary.trim().is_empty() {
        return Err(invalid(&id, "empty reference_summary"));
    }
    if record.documents.is_empty() {
        return Err(invalid(&id, "no input documents"));
    }
    if let Some(pos) = record.documents.iter().position(|d| d.trim().is_empty()) {
        return Err(invalid(&id, format!("document {pos} is empty")));
    }
    let keep = config.max_input_docs.unwrap_or(usize::MAX);
    if keep == 0 {
        return Err(invalid(&id, "max_input_docs must be at least 1"));
    }
    let input_docs = record
        .documents
        .into_iter()
        .take(keep)
        .enumerate()
        .map(|(pos, text)| Document {
            doc_id: doc_id(&id, pos),
            text,
            source_example_id: id.clone(),
            source_split: record.split,
        })
        .collect();
    Ok(Example {
        example_id: id,
        input_docs,
        reference_summary: record.reference_summary,
        additional_input: record.additional_input,
        split: record.split,
    })
}

/// Write examples in the canonical format, one per line.
pub fn write_dataset<'a>(
    writer: impl Write,
    examples: impl IntoIterator<Item = &'a Example>,
) -> io::Result<()> {
    let mut w = BufWriter::new(writer);
    for ex in examples {
        let record = Record {
            example_id: ex.example_id.clone(),
            split: ex.split,
            documents: ex.input_docs.iter().map(|d| d.text.clone()).collect(),
            reference_summary: ex.reference_summary.clone(),
            additional_input: ex.additional_input.clone(),
        };
        serde_json::to_writer(&mut w, &record)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}
