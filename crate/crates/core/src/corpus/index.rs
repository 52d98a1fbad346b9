use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::{Dataset, Document, Split};
use crate::text::TokenizerConfig;

pub const INDEX_FORMAT_VERSION: u32 = 1;
const INDEX_FORMAT_NAME: &str = "odmds-index";

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("index i/o: {0}")]
    Io(#[from] io::Error),
    #[error("malformed index: {0}")]
    Format(String),
    #[error("unsupported index version {found} (this build reads version {expected})")]
    Version { found: u32, expected: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    /// Position of the document in [`DocumentIndex::documents`].
    pub doc: u32,
    pub tf: u32,
}

/// Inverted index over every document of every split.
///
/// Documents are kept sorted by `doc_id`, so document numbers order the same
/// way ids do and the index does not depend on insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentIndex {
    tokenizer: TokenizerConfig,
    documents: Vec<Document>,
    doc_len: Vec<u32>,
    terms: BTreeMap<String, Vec<Posting>>,
    avg_doc_len: f64,
    by_id: HashMap<String, u32>,
    /// Per-document sum of squared term frequencies.
    tf_sq: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    tokenizer: TokenizerConfig,
    num_docs: usize,
    avg_doc_len: f64,
}

#[derive(Serialize, Deserialize)]
struct Body {
    documents: Vec<Document>,
    doc_len: Vec<u32>,
    terms: BTreeMap<String, Vec<(u32, u32)>>,
}

pub fn build_index(dataset: &Dataset, tokenizer: &TokenizerConfig) -> DocumentIndex {
    DocumentIndex::from_documents(dataset.documents().cloned(), tokenizer)
}

impl DocumentIndex {
    /// Build from any collection of documents. Ids must be unique; textually
    /// identical documents stay separate entries.
    pub fn from_documents(
        docs: impl IntoIterator<Item = Document>,
        tokenizer: &TokenizerConfig,
    ) -> Self {
        let mut documents: Vec<Document> = docs.into_iter().collect();
        documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        let mut doc_len = Vec::with_capacity(documents.len());
        let mut terms: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        for (no, doc) in documents.iter().enumerate() {
            let tokens = tokenizer.tokenize(&doc.text);
            doc_len.push(tokens.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, count) in tf {
                terms.entry(term).or_default().push(Posting {
                    doc: no as u32,
                    tf: count,
                });
            }
        }
        let avg_doc_len = if doc_len.is_empty() {
            0.0
        } else {
            doc_len.iter().map(|&l| l as f64).sum::<f64>() / doc_len.len() as f64
        };
        let by_id = id_map(&documents);
        let tf_sq = squared_norms(documents.len(), &terms);
        Self {
            tokenizer: tokenizer.clone(),
            documents,
            doc_len,
            terms,
            avg_doc_len,
            by_id,
            tf_sq,
        }
    }

    pub fn tokenizer(&self) -> &TokenizerConfig {
        &self.tokenizer
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// All documents in ascending `doc_id` order.
    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn doc_no(&self, doc_id: &str) -> Option<u32> {
        self.by_id.get(doc_id).copied()
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.doc_no(doc_id).map(|n| &self.documents[n as usize])
    }

    pub fn doc_len(&self, doc_no: u32) -> u32 {
        self.doc_len[doc_no as usize]
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_len
    }

    /// Squared Euclidean norm of a document's term-count vector.
    pub fn tf_sq_norm(&self, doc_no: u32) -> u64 {
        self.tf_sq[doc_no as usize]
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.terms.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Document frequency of a term.
    pub fn df(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.terms.keys().map(String::as_str)
    }

    /// The example and split a document came from.
    pub fn provenance(&self, doc_id: &str) -> Option<(&str, Split)> {
        self.document(doc_id)
            .map(|d| (d.source_example_id.as_str(), d.source_split))
    }

    pub fn save(&self, writer: impl Write) -> Result<(), IndexError> {
        let mut w = BufWriter::new(writer);
        let header = Header {
            format: INDEX_FORMAT_NAME.to_string(),
            version: INDEX_FORMAT_VERSION,
            tokenizer: self.tokenizer.clone(),
            num_docs: self.documents.len(),
            avg_doc_len: self.avg_doc_len,
        };
        serde_json::to_writer(&mut w, &header).map_err(io::Error::from)?;
        w.write_all(b"\n")?;
        let body = Body {
            documents: self.documents.clone(),
            doc_len: self.doc_len.clone(),
            terms: self
                .terms
                .iter()
                .map(|(t, p)| (t.clone(), p.iter().map(|p| (p.doc, p.tf)).collect()))
                .collect(),
        };
        serde_json::to_writer(&mut w, &body).map_err(io::Error::from)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn save_to(&self, path: &Path) -> Result<(), IndexError> {
        self.save(File::create(path)?)
    }

    pub fn load(reader: impl BufRead) -> Result<Self, IndexError> {
        let mut lines = reader.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| IndexError::Format("missing header".into()))??;
        let header: Header = serde_json::from_str(&header_line)
            .map_err(|e| IndexError::Format(format!("header: {e}")))?;
        if header.format != INDEX_FORMAT_NAME {
            return Err(IndexError::Format(format!(
                "unexpected container {:?}",
                header.format
            )));
        }
        if header.version != INDEX_FORMAT_VERSION {
            return Err(IndexError::Version {
                found: header.version,
                expected: INDEX_FORMAT_VERSION,
            });
        }
        let body_line = lines
            .next()
            .ok_or_else(|| IndexError::Format("missing body".into()))??;
        let body: Body = serde_json::from_str(&body_line)
            .map_err(|e| IndexError::Format(format!("body: {e}")))?;
        let n = body.documents.len();
        if n != header.num_docs || body.doc_len.len() != n {
            return Err(IndexError::Format("document count mismatch".into()));
        }
        if body
            .documents
            .windows(2)
            .any(|w| w[0].doc_id >= w[1].doc_id)
        {
            return Err(IndexError::Format(
                "documents not sorted by unique doc_id".into(),
            ));
        }
        let mut terms = BTreeMap::new();
        for (term, postings) in body.terms {
            if postings.iter().any(|&(doc, _)| doc as usize >= n) {
                return Err(IndexError::Format(format!(
                    "posting out of range for {term:?}"
                )));
            }
            terms.insert(
                term,
                postings
                    .into_iter()
                    .map(|(doc, tf)| Posting { doc, tf })
                    .collect(),
            );
        }
        let by_id = id_map(&body.documents);
        let tf_sq = squared_norms(n, &terms);
        Ok(Self {
            tokenizer: header.tokenizer,
            documents: body.documents,
            doc_len: body.doc_len,
            terms,
            avg_doc_len: header.avg_doc_len,
            by_id,
            tf_sq,
        })
    }

    pub fn load_from(path: &Path) -> Result<Self, IndexError> {
        Self::load(BufReader::new(File::open(path)?))
    }
}

fn squared_norms(num_docs: usize, terms: &BTreeMap<String, Vec<Posting>>) -> Vec<u64> {
    let mut norms = vec![0u64; num_docs];
    for postings in terms.values() {
        for p in postings {
            norms[p.doc as usize] += u64::from(p.tf) * u64::from(p.tf);
        }
    }
    norms
}

fn id_map(documents: &[Document]) -> HashMap<String, u32> {
    documents
        .iter()
        .enumerate()
        .map(|(i, d)| (d.doc_id.clone(), i as u32))
        .collect()
}
