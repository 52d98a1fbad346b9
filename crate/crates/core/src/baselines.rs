//! Heuristic summaries used to put model scores in context.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, Document, Example};
use crate::metrics::rouge_n;
use crate::text::{first_line, first_sentence, tokenize};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("example {example_id} has no {field}")]
    MissingField {
        example_id: String,
        field: &'static str,
    },
    #[error("random summary needs at least two examples in the dataset")]
    TooFewExamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    RandomSummary,
    AllLead,
    OracleDocument,
    OracleLead,
    BackgroundAbstract,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 5] = [
        BaselineKind::RandomSummary,
        BaselineKind::AllLead,
        BaselineKind::OracleDocument,
        BaselineKind::OracleLead,
        BaselineKind::BackgroundAbstract,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::RandomSummary => "random_summary",
            BaselineKind::AllLead => "all_lead",
            BaselineKind::OracleDocument => "oracle_document",
            BaselineKind::OracleLead => "oracle_lead",
            BaselineKind::BackgroundAbstract => "background_abstract",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown baseline {s:?}"))
    }
}

/// Reference summary of the other example whose reference is closest in
/// token count; ties go to the smallest example id.
pub fn random_summary<'a>(
    example: &Example,
    dataset: &'a Dataset,
) -> Result<&'a str, BaselineError> {
    let target = tokenize(&example.reference_summary).len();
    dataset
        .examples
        .iter()
        .filter(|e| e.example_id != example.example_id)
        .map(|e| {
            let len = tokenize(&e.reference_summary).len();
            (
                len.abs_diff(target),
                e.example_id.as_str(),
                e.reference_summary.as_str(),
            )
        })
        .min()
        .map(|(_, _, summary)| summary)
        .ok_or(BaselineError::TooFewExamples)
}

/// First sentence of every input document, joined by spaces.
pub fn all_lead(example: &Example) -> String {
    example
        .input_docs
        .iter()
        .map(|d| first_sentence(&d.text))
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Input document with the best ROUGE-1 F1 against the reference.
pub fn oracle_document(example: &Example) -> &Document {
    let mut best: Option<(&Document, f64)> = None;
    for d in &example.input_docs {
        let f1 = rouge_n(&d.text, &example.reference_summary, 1, true).f1;
        best = match best {
            Some((b, bf)) if bf > f1 || (bf == f1 && b.doc_id <= d.doc_id) => Some((b, bf)),
            _ => Some((d, f1)),
        };
    }
    best.expect("examples have at least one document").0
}

/// Lead sentence of the oracle document, or its first line when documents
/// start with a title.
pub fn oracle_lead(example: &Example, first_line_is_title: bool) -> String {
    let text = &oracle_document(example).text;
    if first_line_is_title {
        first_line(text).to_string()
    } else {
        first_sentence(text).to_string()
    }
}

pub fn background_abstract(example: &Example) -> Result<&str, BaselineError> {
    example
        .additional_input
        .as_deref()
        .filter(|t| !t.trim().is_empty())
        .ok_or_else(|| BaselineError::MissingField {
            example_id: example.example_id.clone(),
            field: "additional_input",
        })
}

/// Produce one baseline summary.
pub fn baseline_summary(
    kind: BaselineKind,
    example: &Example,
    dataset: &Dataset,
) -> Result<String, BaselineError> {
    Ok(match kind {
        BaselineKind::RandomSummary => random_summary(example, dataset)?.to_string(),
        BaselineKind::AllLead => all_lead(example),
        BaselineKind::OracleDocument => oracle_document(example).text.clone(),
        BaselineKind::OracleLead => oracle_lead(example, dataset.config.first_line_is_title),
        BaselineKind::BackgroundAbstract => background_abstract(example)?.to_string(),
    })
}
