//! Wire format shared with summarizer adapters: JSON bodies over HTTP POST.

use serde::{Deserialize, Serialize};

pub const SUMMARIZE_PATH: &str = "/summarize";
pub const TRANSFORM_PATH: &str = "/transform";
pub const EMBED_PATH: &str = "/embed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizeRequest {
    pub request_id: String,
    pub documents: Vec<String>,
    pub additional_input: Option<String>,
    pub max_words: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizeResponse {
    pub request_id: String,
    pub summary: String,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRequest {
    pub request_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformResponse {
    pub request_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub request_id: String,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub request_id: String,
    pub vectors: Vec<Vec<f64>>,
}

/// Body of a 4xx/5xx reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    #[serde(default)]
    pub request_id: Option<String>,
    pub error: String,
}
