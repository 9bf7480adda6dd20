//! External provider wire protocol.
//!
//! Three JSON-over-HTTP endpoints, each a `POST` under a common base URL:
//!
//! | path      | request            | response           |
//! |-----------|--------------------|--------------------|
//! | `/detect` | [`DetectRequest`]  | [`DetectResponse`] |
//! | `/match`  | [`MatchRequest`]   | [`MatchResponse`]  |
//! | `/choose` | [`ChooseRequest`]  | [`ChooseResponse`] |
//!
//! Bodies use the canonical single-line serialization. A bearer token is
//! sent when configured. Transport failures, timeouts and 5xx replies are
//! retried; 4xx and undecodable replies are not.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::perception::{BBox, SymbolicView};

/// Environment variable holding the bearer token for external providers.
pub const AUTH_TOKEN_ENV: &str = "STREETSIM_PROVIDER_TOKEN";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("provider at {endpoint} timed out")]
    Timeout { endpoint: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed provider reply: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpProviderConfig {
    /// Base URL, e.g. `http://127.0.0.1:8080`.
    pub endpoint: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Extra attempts after the first.
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// Bearer token; falls back to [`AUTH_TOKEN_ENV`] when absent.
    #[serde(default, skip_serializing)]
    pub auth_token: Option<String>,
}

fn default_timeout_ms() -> u64 {
    10_000
}

fn default_retries() -> u32 {
    2
}

impl HttpProviderConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout_ms: default_timeout_ms(),
            retries: default_retries(),
            auth_token: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectRequest {
    pub view: SymbolicView,
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireProposal {
    pub bbox: BBox,
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectResponse {
    pub proposals: Vec<WireProposal>,
}

/// Two descriptors to compare: proposal crops, or a photo and a text query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRequest {
    pub a: serde_json::Value,
    pub b: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResponse {
    pub is_match: bool,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChooseRequest {
    pub options: Vec<String>,
    pub context: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChooseResponse {
    pub index: usize,
    #[serde(default)]
    pub rationale: String,
}

/// Blocking JSON client shared by every external provider. Safe to use from
/// many threads at once.
#[derive(Debug, Clone)]
pub struct HttpClient {
    config: HttpProviderConfig,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpClient {
    pub fn new(config: HttpProviderConfig) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms.max(1)))
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let token = config
            .auth_token
            .clone()
            .or_else(|| std::env::var(AUTH_TOKEN_ENV).ok().filter(|t| !t.is_empty()));
        Ok(Self {
            config,
            token,
            client,
        })
    }

    pub fn config(&self) -> &HttpProviderConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.endpoint.trim_end_matches('/'), path)
    }

    fn attempt<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        url: &str,
        body: &Req,
    ) -> Result<Resp, (ProviderError, bool)> {
        let mut req = self
            .client
            .post(url)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(canonical::to_line(body));
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                (
                    ProviderError::Timeout {
                        endpoint: url.to_string(),
                    },
                    true,
                )
            } else {
                (ProviderError::Transport(e.to_string()), true)
            }
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| {
            let err = if e.is_timeout() {
                ProviderError::Timeout {
                    endpoint: url.to_string(),
                }
            } else {
                ProviderError::Transport(e.to_string())
            };
            (err, true)
        })?;
        if !status.is_success() {
            return Err((
                ProviderError::Status {
                    status: status.as_u16(),
                    body: text,
                },
                status.is_server_error(),
            ));
        }
        serde_json::from_str(&text).map_err(|e| (ProviderError::Malformed(e.to_string()), false))
    }

    /// POSTs `body` to `<endpoint>/<path>` and decodes the reply.
    pub fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, ProviderError> {
        let url = self.url(path);
        let mut attempts_left = self.config.retries;
        loop {
            match self.attempt(&url, body) {
                Ok(r) => return Ok(r),
                Err((e, retryable)) => {
                    if !retryable || attempts_left == 0 {
                        return Err(e);
                    }
                    attempts_left -= 1;
                }
            }
        }
    }

    pub fn detect(&self, req: &DetectRequest) -> Result<DetectResponse, ProviderError> {
        self.post("detect", req)
    }

    pub fn match_pair(&self, req: &MatchRequest) -> Result<MatchResponse, ProviderError> {
        let r: MatchResponse = self.post("match", req)?;
        if !r.score.is_finite() {
            return Err(ProviderError::Malformed("non-finite match score".into()));
        }
        Ok(r)
    }

    pub fn choose(&self, req: &ChooseRequest) -> Result<ChooseResponse, ProviderError> {
        self.post("choose", req)
    }
}
