//! Dot-product ranking over precomputed embeddings.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{top_by_score, RankedRetrieval, RetrievalError, ScoredDoc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorKind {
    Doc,
    Query,
}

/// Document vectors keyed by doc id and query vectors keyed by example id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingStore {
    dim: usize,
    docs: BTreeMap<String, Vec<f64>>,
    queries: BTreeMap<String, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct StoreHeader {
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct StoreRecord {
    id: String,
    kind: VectorKind,
    vector: Vec<f64>,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Result<Self, RetrievalError> {
        if dim == 0 {
            return Err(RetrievalError::Store("dim must be positive".into()));
        }
        Ok(Self {
            dim,
            ..Default::default()
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insert(
        &mut self,
        kind: VectorKind,
        id: &str,
        vector: Vec<f64>,
    ) -> Result<(), RetrievalError> {
        if vector.len() != self.dim {
            return Err(RetrievalError::Store(format!(
                "vector for {id} has length {}, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(RetrievalError::Store(format!(
                "vector for {id} is not finite"
            )));
        }
        let map = match kind {
            VectorKind::Doc => &mut self.docs,
            VectorKind::Query => &mut self.queries,
        };
        if map.insert(id.to_string(), vector).is_some() {
            return Err(RetrievalError::Store(format!("duplicate vector for {id}")));
        }
        Ok(())
    }

    pub fn doc_vector(&self, doc_id: &str) -> Option<&[f64]> {
        self.docs.get(doc_id).map(Vec::as_slice)
    }

    pub fn query_vector(&self, example_id: &str) -> Option<&[f64]> {
        self.queries.get(example_id).map(Vec::as_slice)
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    /// Dot product between a document and an example's query vector.
    pub fn similarity(&self, doc_id: &str, example_id: &str) -> Result<f64, RetrievalError> {
        let d = self
            .doc_vector(doc_id)
            .ok_or_else(|| RetrievalError::MissingVector {
                kind: "doc",
                id: doc_id.to_string(),
            })?;
        let q = self
            .query_vector(example_id)
            .ok_or_else(|| RetrievalError::MissingVector {
                kind: "query",
                id: example_id.to_string(),
            })?;
        Ok(dot(d, q))
    }

    /// Header line `{"dim": N}` followed by one `{id, kind, vector}` record per line.
    pub fn read(reader: impl BufRead) -> Result<Self, RetrievalError> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| RetrievalError::Store("missing header line".into()))??;
        let header: StoreHeader = serde_json::from_str(&header)
            .map_err(|e| RetrievalError::Store(format!("header: {e}")))?;
        let mut store = Self::new(header.dim)?;
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: StoreRecord = serde_json::from_str(&line)
                .map_err(|e| RetrievalError::Store(format!("line {}: {e}", i + 2)))?;
            store.insert(rec.kind, &rec.id, rec.vector)?;
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        Self::read(BufReader::new(File::open(path)?))
    }

    pub fn write(&self, writer: impl Write) -> Result<(), RetrievalError> {
        let mut w = BufWriter::new(writer);
        let json = |e: serde_json::Error| RetrievalError::Io(e.into());
        serde_json::to_writer(&mut w, &StoreHeader { dim: self.dim }).map_err(json)?;
        w.write_all(b"\n")?;
        let all = self
            .docs
            .iter()
            .map(|(id, v)| (VectorKind::Doc, id, v))
            .chain(
                self.queries
                    .iter()
                    .map(|(id, v)| (VectorKind::Query, id, v)),
            );
        for (kind, id, vector) in all {
            let rec = StoreRecord {
                id: id.clone(),
                kind,
                vector: vector.clone(),
            };
            serde_json::to_writer(&mut w, &rec).map_err(json)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rank every stored document by dot product with the example's query vector.
pub fn dense_rank(
    store: &EmbeddingStore,
    example_id: &str,
    cutoff: usize,
) -> Result<RankedRetrieval, RetrievalError> {
    if cutoff == 0 {
        return Err(RetrievalError::InvalidCutoff);
    }
    let q = store
        .query_vector(example_id)
        .ok_or_else(|| RetrievalError::MissingVector {
            kind: "query",
            id: example_id.to_string(),
        })?;
    let ids: Vec<&String> = store.docs.keys().collect();
    let scored = store
        .docs
        .values()
        .enumerate()
        .map(|(i, v)| (i, dot(v, q)))
        .collect();
    let ranked = top_by_score(scored, cutoff)
        .into_iter()
        .map(|(i, score)| ScoredDoc {
            doc_id: ids[i].clone(),
            score,
        })
        .collect();
    Ok(RankedRetrieval {
        example_id: example_id.to_string(),
        retriever_id: "dense-dot".to_string(),
        ranked,
    })
}
