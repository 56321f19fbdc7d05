use serde::{Deserialize, Serialize};

use super::{LabelSource, PromptBundle};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_logprobs: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ClientError {
    /// Worth retrying: rate limits, server errors, dropped connections.
    #[error("transient: {0}")]
    Transient(String),
    #[error("permanent: {0}")]
    Permanent(String),
}

/// A text generator that turns a prompt bundle into a label.
pub trait TextGenerator: Send + Sync {
    fn generate(&self, bundle: &PromptBundle, max_tokens: usize) -> Result<GenerationResponse, ClientError>;

    fn source(&self) -> LabelSource {
        LabelSource::Client
    }
}
