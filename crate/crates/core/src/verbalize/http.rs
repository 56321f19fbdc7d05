use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::client::{ClientError, GenerationResponse, TextGenerator};
use super::PromptBundle;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    pub endpoint: String,
    /// Environment variable holding the bearer token; unset means no header.
    pub api_key_env: String,
    pub model: Option<String>,
    pub timeout_secs: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            api_key_env: "CITETAX_API_KEY".into(),
            model: None,
            timeout_secs: 60,
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    prompt: String,
    max_tokens: usize,
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<&'a str>,
}

/// JSON-over-HTTP generator.
///
/// Request body: `{"prompt", "max_tokens", "temperature": 0, "model"?}`.
/// Response body: `{"text", "token_logprobs"?}`.
pub struct HttpGenerator {
    agent: ureq::Agent,
    config: HttpConfig,
    api_key: Option<String>,
}

impl HttpGenerator {
    pub fn new(config: HttpConfig) -> Result<Self> {
        if config.endpoint.is_empty() {
            return Err(Error::Config("generator endpoint is not set".into()));
        }
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { agent, config, api_key })
    }
}

fn classify(e: ureq::Error) -> ClientError {
    match e {
        ureq::Error::Io(_)
        | ureq::Error::Timeout(_)
        | ureq::Error::HostNotFound
        | ureq::Error::ConnectionFailed
        | ureq::Error::BodyStalled => ClientError::Transient(e.to_string()),
        other => ClientError::Permanent(other.to_string()),
    }
}

impl TextGenerator for HttpGenerator {
    fn generate(&self, bundle: &PromptBundle, max_tokens: usize) -> std::result::Result<GenerationResponse, ClientError> {
        let body = Request {
            prompt: bundle.render(),
            max_tokens,
            temperature: 0.0,
            model: self.config.model.as_deref(),
        };
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(k) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = req.send_json(&body).map_err(classify)?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(ClientError::Transient(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            return Err(ClientError::Permanent(format!("HTTP {status}")));
        }
        resp.body_mut()
            .read_json::<GenerationResponse>()
            .map_err(|e| ClientError::Permanent(format!("bad response body: {e}")))
    }
}
