//! Uniform access to summarizers and document transformers.
//!
//! A [`Gateway`] either runs a builtin (`builtin:lead`, `builtin:identity`) or
//! talks to a remote adapter over the JSON protocol in [`protocol`]. Inputs are
//! truncated per document before they leave the harness; document separators
//! are the adapter's business.

pub mod protocol;

use std::error::Error as StdError;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::perturbation::DocumentTransformer;
use crate::text::{cap_words, first_sentence};
use protocol::*;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("per-document budget is zero ({max_input_tokens} tokens for {num_docs} documents)")]
    BudgetTooSmall {
        max_input_tokens: usize,
        num_docs: usize,
    },
    #[error("request has no documents")]
    EmptyRequest,
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("remote error (HTTP {status}): {message}")]
    Remote { status: u16, message: String },
    #[error("{endpoint} does not support {operation}")]
    Unsupported {
        endpoint: String,
        operation: &'static str,
    },
    #[error("invalid endpoint {0:?}")]
    InvalidEndpoint(String),
}

impl GatewayError {
    fn retryable(&self) -> bool {
        match self {
            GatewayError::Timeout(_) | GatewayError::Transport(_) => true,
            GatewayError::Remote { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

/// Where requests go.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Endpoint {
    /// First sentence of each (truncated) document.
    BuiltinLead,
    /// Transformer that returns its input.
    BuiltinIdentity,
    /// Base URL of a protocol adapter, without trailing slash.
    Remote(String),
}

impl FromStr for Endpoint {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "builtin:lead" => Ok(Endpoint::BuiltinLead),
            "builtin:identity" => Ok(Endpoint::BuiltinIdentity),
            url if url.starts_with("http://") || url.starts_with("https://") => {
                Ok(Endpoint::Remote(url.trim_end_matches('/').to_string()))
            }
            other => Err(GatewayError::InvalidEndpoint(other.to_string())),
        }
    }
}

impl TryFrom<String> for Endpoint {
    type Error = GatewayError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Endpoint> for String {
    fn from(e: Endpoint) -> String {
        e.to_string()
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::BuiltinLead => f.write_str("builtin:lead"),
            Endpoint::BuiltinIdentity => f.write_str("builtin:identity"),
            Endpoint::Remote(url) => f.write_str(url),
        }
    }
}

fn default_timeout_secs() -> f64 {
    120.0
}

fn default_retries() -> u32 {
    2
}

fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizerSpec {
    pub id: String,
    pub endpoint: Endpoint,
    /// Model input budget shared evenly by the documents of a request.
    pub max_input_tokens: usize,
    #[serde(default)]
    pub max_words_hint: Option<usize>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    /// Extra attempts after a retryable failure.
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// Upper bound on concurrent requests issued by the pipeline.
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

impl SummarizerSpec {
    pub fn builtin_lead(max_input_tokens: usize) -> Self {
        Self {
            id: "builtin-lead".to_string(),
            endpoint: Endpoint::BuiltinLead,
            max_input_tokens,
            max_words_hint: None,
            timeout_secs: default_timeout_secs(),
            retries: default_retries(),
            max_in_flight: default_in_flight(),
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs.max(0.001))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRequest {
    pub documents: Vec<String>,
    pub additional_input: Option<String>,
    pub max_words: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryResponse {
    pub summary: String,
    pub model_id: String,
}

/// Cut every document to `max_input_tokens / docs.len()` whitespace tokens.
///
/// Documents within budget are returned untouched; unused budget is not
/// handed to other documents.
pub fn truncate_inputs<S: AsRef<str>>(
    docs: &[S],
    max_input_tokens: usize,
) -> Result<Vec<String>, GatewayError> {
    if docs.is_empty() {
        return Err(GatewayError::EmptyRequest);
    }
    let per_doc = max_input_tokens / docs.len();
    if per_doc == 0 {
        return Err(GatewayError::BudgetTooSmall {
            max_input_tokens,
            num_docs: docs.len(),
        });
    }
    Ok(docs
        .iter()
        .map(|d| {
            let d = d.as_ref();
            if d.split_whitespace().nth(per_doc).is_none() {
                d.to_string()
            } else {
                cap_words(d, per_doc)
            }
        })
        .collect())
}

/// The builtin extractive summarizer: lead sentence of each document, capped
/// at `max_words` words.
pub fn lead_summary<S: AsRef<str>>(docs: &[S], max_words: Option<usize>) -> String {
    let joined = docs
        .iter()
        .map(|d| first_sentence(d.as_ref()))
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ");
    match max_words {
        Some(n) => cap_words(&joined, n),
        None => joined,
    }
}

/// Stable id derived from request content, so retries reuse it.
fn request_id(kind: &str, body: &impl Serialize) -> String {
    let mut h = Sha256::new();
    h.update(kind.as_bytes());
    h.update(serde_json::to_vec(body).expect("request bodies serialize"));
    let digest = h.finalize();
    let hex: String = digest[..12].iter().map(|b| format!("{b:02x}")).collect();
    format!("{kind}-{hex}")
}

pub struct Gateway {
    spec: SummarizerSpec,
    agent: ureq::Agent,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway").field("spec", &self.spec).finish()
    }
}

impl Gateway {
    pub fn new(spec: SummarizerSpec) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(spec.timeout()).build();
        Self { spec, agent }
    }

    pub fn spec(&self) -> &SummarizerSpec {
        &self.spec
    }

    pub fn summarize(&self, request: &SummaryRequest) -> Result<SummaryResponse, GatewayError> {
        let documents = truncate_inputs(&request.documents, self.spec.max_input_tokens)?;
        let max_words = request.max_words.or(self.spec.max_words_hint);
        match &self.spec.endpoint {
            Endpoint::BuiltinLead => {
                let summary = lead_summary(&documents, max_words);
                if summary.trim().is_empty() {
                    return Err(GatewayError::Protocol("builtin summary is empty".into()));
                }
                Ok(SummaryResponse {
                    summary,
                    model_id: self.spec.id.clone(),
                })
            }
            Endpoint::BuiltinIdentity => Err(self.unsupported("summarize")),
            Endpoint::Remote(base) => {
                let mut body = SummarizeRequest {
                    request_id: String::new(),
                    documents,
                    additional_input: request.additional_input.clone(),
                    max_words,
                };
                body.request_id = request_id("sum", &body);
                let resp: SummarizeResponse = self.post(base, SUMMARIZE_PATH, &body)?;
                check_id(&body.request_id, &resp.request_id)?;
                if resp.summary.trim().is_empty() {
                    return Err(GatewayError::Protocol("empty summary".into()));
                }
                Ok(SummaryResponse {
                    summary: resp.summary,
                    model_id: resp.model_id,
                })
            }
        }
    }

    pub fn transform_document(&self, text: &str) -> Result<String, GatewayError> {
        match &self.spec.endpoint {
            Endpoint::BuiltinIdentity => Ok(text.to_string()),
            Endpoint::BuiltinLead => Err(self.unsupported("transform")),
            Endpoint::Remote(base) => {
                let mut body = TransformRequest {
                    request_id: String::new(),
                    text: text.to_string(),
                };
                body.request_id = request_id("tr", &body);
                let resp: TransformResponse = self.post(base, TRANSFORM_PATH, &body)?;
                check_id(&body.request_id, &resp.request_id)?;
                Ok(resp.text)
            }
        }
    }

    pub fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        let Endpoint::Remote(base) = &self.spec.endpoint else {
            return Err(self.unsupported("embed"));
        };
        let mut body = EmbedRequest {
            request_id: String::new(),
            texts: texts.to_vec(),
        };
        body.request_id = request_id("emb", &body);
        let resp: EmbedResponse = self.post(base, EMBED_PATH, &body)?;
        check_id(&body.request_id, &resp.request_id)?;
        if resp.vectors.len() != texts.len() {
            return Err(GatewayError::Protocol(format!(
                "{} vectors for {} texts",
                resp.vectors.len(),
                texts.len()
            )));
        }
        Ok(resp.vectors)
    }

    fn unsupported(&self, operation: &'static str) -> GatewayError {
        GatewayError::Unsupported {
            endpoint: self.spec.endpoint.to_string(),
            operation,
        }
    }

    fn post<B: Serialize, R: DeserializeOwned>(
        &self,
        base: &str,
        path: &str,
        body: &B,
    ) -> Result<R, GatewayError> {
        let url = format!("{base}{path}");
        let mut attempt = 0;
        loop {
            match self.post_once(&url, body) {
                Err(e) if e.retryable() && attempt < self.spec.retries => attempt += 1,
                other => return other,
            }
        }
    }

    fn post_once<B: Serialize, R: DeserializeOwned>(
        &self,
        url: &str,
        body: &B,
    ) -> Result<R, GatewayError> {
        match self.agent.post(url).send_json(body) {
            Ok(resp) => {
                let text = resp
                    .into_string()
                    .map_err(|e| classify_io(&e, e.to_string()))?;
                serde_json::from_str(&text)
                    .map_err(|e| GatewayError::Protocol(format!("bad response body: {e}")))
            }
            Err(ureq::Error::Status(status, resp)) => {
                let text = resp.into_string().unwrap_or_default();
                let message = serde_json::from_str::<ErrorResponse>(&text)
                    .map(|e| e.error)
                    .unwrap_or(text);
                Err(GatewayError::Remote { status, message })
            }
            Err(ureq::Error::Transport(t)) => {
                let message = t.to_string();
                let timed_out = t
                    .source()
                    .and_then(|s| s.downcast_ref::<std::io::Error>())
                    .is_some_and(is_timeout);
                if timed_out || message.contains("timed out") {
                    Err(GatewayError::Timeout(message))
                } else {
                    Err(GatewayError::Transport(message))
                }
            }
        }
    }
}

fn is_timeout(e: &std::io::Error) -> bool {
    matches!(
        e.kind(),
        std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock
    )
}

fn classify_io(e: &std::io::Error, message: String) -> GatewayError {
    if is_timeout(e) {
        GatewayError::Timeout(message)
    } else {
        GatewayError::Transport(message)
    }
}

fn check_id(sent: &str, received: &str) -> Result<(), GatewayError> {
    if sent != received {
        return Err(GatewayError::Protocol(format!(
            "response request_id {received:?} does not match {sent:?}"
        )));
    }
    Ok(())
}

impl DocumentTransformer for Gateway {
    fn transform(&self, text: &str) -> Result<String, Box<dyn StdError + Send + Sync>> {
        Ok(self.transform_document(text)?)
    }
}
