//! Completion backends: a deterministic mock and a remote HTTP endpoint.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompt::SEPARATOR;

/// Environment variable holding the remote API credential.
pub const API_KEY_ENV: &str = "LFPROBE_API_KEY";

/// Appended to every token the corrupting mock mutates.
pub const CORRUPTION_MARK: &str = "~";

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("authentication failed (HTTP {0})")]
    Auth(u16),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    BadResponse(String),
    #[error("no gold text for request {0:?}")]
    GoldMiss(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("simulated failure for request {0:?}")]
    Simulated(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    /// Caller-chosen id; responses carry it back.
    pub id: String,
    pub prompt: String,
    pub max_new_tokens: u32,
    pub temperature: f64,
    pub top_k: u32,
    pub top_p: f64,
    pub beam_size: u32,
    pub stop: Vec<String>,
}

impl CompletionRequest {
    /// Request with the default decoding configuration: temperature 1,
    /// top-k 50, top-p 0.9, beam 5.
    pub fn new(id: impl Into<String>, prompt: impl Into<String>) -> CompletionRequest {
        CompletionRequest {
            id: id.into(),
            prompt: prompt.into(),
            max_new_tokens: 256,
            temperature: 1.0,
            top_k: 50,
            top_p: 0.9,
            beam_size: 5,
            stop: vec!["[SEP]".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub id: String,
    /// Continuation only, prompt excluded.
    pub text: String,
    pub backend: String,
    pub latency: Duration,
    pub retry_count: u32,
    /// Decoding parameters the backend could not transmit.
    pub dropped_params: Vec<String>,
}

pub trait CompletionBackend: Send + Sync {
    fn id(&self) -> String;

    /// Returns the text and retry count.
    fn generate(&self, request: &CompletionRequest) -> Result<(String, u32, Vec<String>), GatewayError>;

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        let start = Instant::now();
        let (text, retry_count, dropped_params) = self.generate(request)?;
        Ok(CompletionResponse {
            id: request.id.clone(),
            text,
            backend: self.id(),
            latency: start.elapsed(),
            retry_count,
            dropped_params,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum MockMode {
    /// Return the gold text registered for the request id.
    EchoGold,
    /// Return the output half of the last demonstration in the prompt.
    CopyDemo,
    Fixed {
        text: String,
    },
    /// Gold text with each whitespace token mutated with probability `rate`.
    Corrupt {
        rate: f64,
        seed: u64,
    },
}

impl MockMode {
    /// Parses `echo_gold`, `copy_demo`, `fixed:TEXT`, `corrupt:RATE[:SEED]`.
    pub fn parse(spec: &str) -> Result<MockMode, GatewayError> {
        let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
        match head {
            "echo_gold" => Ok(MockMode::EchoGold),
            "copy_demo" => Ok(MockMode::CopyDemo),
            "fixed" => Ok(MockMode::Fixed { text: rest.to_string() }),
            "corrupt" => {
                let (rate, seed) = rest.split_once(':').unwrap_or((rest, "0"));
                let rate: f64 = rate
                    .parse()
                    .map_err(|_| GatewayError::Config(format!("bad corrupt rate {rate:?}")))?;
                let seed: u64 = seed
                    .parse()
                    .map_err(|_| GatewayError::Config(format!("bad corrupt seed {seed:?}")))?;
                if !(0.0..=1.0).contains(&rate) {
                    return Err(GatewayError::Config(format!("corrupt rate {rate} outside [0, 1]")));
                }
                Ok(MockMode::Corrupt { rate, seed })
            }
            other => Err(GatewayError::Config(format!("unknown mock mode {other:?}"))),
        }
    }

    fn label(&self) -> String {
        match self {
            MockMode::EchoGold => "echo_gold".into(),
            MockMode::CopyDemo => "copy_demo".into(),
            MockMode::Fixed { .. } => "fixed".into(),
            MockMode::Corrupt { rate, seed } => format!("corrupt({rate},{seed})"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    pub mode: Option<MockMode>,
    /// Request id to gold continuation.
    pub gold: BTreeMap<String, String>,
    /// Request ids that fail, for exercising error paths.
    pub fail_ids: BTreeSet<String>,
}

impl MockBackend {
    pub fn new(mode: MockMode) -> MockBackend {
        MockBackend {
            mode: Some(mode),
            ..MockBackend::default()
        }
    }

    pub fn with_gold(mut self, gold: BTreeMap<String, String>) -> MockBackend {
        self.gold = gold;
        self
    }

    fn gold_for(&self, id: &str) -> Result<&str, GatewayError> {
        self.gold
            .get(id)
            .map(String::as_str)
            .ok_or_else(|| GatewayError::GoldMiss(id.to_string()))
    }
}

/// Output half of the last demonstration in an assembled prompt.
pub fn last_demo_output(prompt: &str) -> String {
    let segments: Vec<&str> = prompt.split(SEPARATOR).collect();
    if segments.len() < 2 {
        return String::new();
    }
    let demo = segments[segments.len() - 2];
    [" is verbalized as: ", " is parsed into: "]
        .iter()
        .filter_map(|c| demo.rfind(c).map(|i| (i, c.len())))
        .max()
        .map(|(i, n)| demo[i + n..].to_string())
        .unwrap_or_default()
}

/// Corrupts whitespace tokens of `gold`. One uniform draw per token from a
/// generator seeded by `seed` and the request id, so the corrupted set only
/// grows with `rate`.
pub fn corrupt_text(gold: &str, rate: f64, seed: u64, request_id: &str) -> String {
    let digest = Sha256::digest(request_id.as_bytes());
    let mut key = [0u8; 8];
    key.copy_from_slice(&digest[..8]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ u64::from_le_bytes(key));
    gold.split_whitespace()
        .map(|t| {
            let u: f64 = rng.random();
            if u < rate {
                format!("{t}{CORRUPTION_MARK}")
            } else {
                t.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

impl CompletionBackend for MockBackend {
    fn id(&self) -> String {
        format!("mock:{}", self.mode.as_ref().map_or("none".into(), MockMode::label))
    }

    fn generate(&self, request: &CompletionRequest) -> Result<(String, u32, Vec<String>), GatewayError> {
        if self.fail_ids.contains(&request.id) {
            return Err(GatewayError::Simulated(request.id.clone()));
        }
        let mode = self
            .mode
            .as_ref()
            .ok_or_else(|| GatewayError::Config("mock without mode".into()))?;
        let text = match mode {
            MockMode::EchoGold => self.gold_for(&request.id)?.to_string(),
            MockMode::CopyDemo => last_demo_output(&request.prompt),
            MockMode::Fixed { text } => text.clone(),
            MockMode::Corrupt { rate, seed } => corrupt_text(self.gold_for(&request.id)?, *rate, *seed, &request.id),
        };
        Ok((text, 0, Vec::new()))
    }
}

/// Request/response mapping of a remote provider.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// OpenAI-style `/v1/completions`: no top-k, no beams.
    Openai,
    /// `{prompt, parameters}` in, `{text}` or `{generated_text}` out; every
    /// parameter transmitted.
    #[default]
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    pub preset: Preset,
    pub api_key_env: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub backoff_cap_ms: u64,
    pub max_in_flight: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: String::new(),
            model: String::new(),
            preset: Preset::Generic,
            api_key_env: API_KEY_ENV.into(),
            timeout_ms: 60_000,
            max_retries: 4,
            backoff_base_ms: 500,
            backoff_cap_ms: 30_000,
            max_in_flight: 4,
        }
    }
}

impl RemoteConfig {
    /// Delay before retry number `attempt` (0-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let ms = self.backoff_base_ms.saturating_mul(1u64 << attempt.min(32));
        Duration::from_millis(ms.min(self.backoff_cap_ms))
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl RemoteBackend {
    /// Reads the credential from the configured environment variable.
    pub fn new(config: RemoteConfig) -> Result<RemoteBackend, GatewayError> {
        let key = std::env::var(&config.api_key_env).ok();
        RemoteBackend::with_key(config, key)
    }

    pub fn with_key(config: RemoteConfig, api_key: Option<String>) -> Result<RemoteBackend, GatewayError> {
        if config.endpoint.is_empty() {
            return Err(GatewayError::Config("remote endpoint URL is empty".into()));
        }
        if config.preset == Preset::Openai && api_key.is_none() {
            return Err(GatewayError::Config(format!(
                "credential variable {} is not set",
                config.api_key_env
            )));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(RemoteBackend { config, api_key, agent })
    }

    /// Request body and the parameters the preset cannot carry.
    pub fn request_body(&self, r: &CompletionRequest) -> (Value, Vec<String>) {
        match self.config.preset {
            Preset::Openai => (
                json!({
                    "model": self.config.model,
                    "prompt": r.prompt,
                    "max_tokens": r.max_new_tokens,
                    "temperature": r.temperature,
                    "top_p": r.top_p,
                    "stop": r.stop,
                }),
                vec!["top_k".into(), "beam_size".into()],
            ),
            Preset::Generic => (
                json!({
                    "model": self.config.model,
                    "prompt": r.prompt,
                    "parameters": {
                        "max_new_tokens": r.max_new_tokens,
                        "temperature": r.temperature,
                        "top_k": r.top_k,
                        "top_p": r.top_p,
                        "num_beams": r.beam_size,
                        "stop": r.stop,
                    }
                }),
                Vec::new(),
            ),
        }
    }

    fn extract_text(&self, body: &Value, prompt: &str) -> Result<String, GatewayError> {
        let text = match self.config.preset {
            Preset::Openai => body.pointer("/choices/0/text").and_then(Value::as_str),
            Preset::Generic => body
                .get("text")
                .or_else(|| body.get("generated_text"))
                .and_then(Value::as_str),
        }
        .ok_or_else(|| GatewayError::BadResponse(body.to_string()))?;
        // some servers echo the prompt before the continuation
        Ok(text.strip_prefix(prompt).unwrap_or(text).to_string())
    }

    fn attempt(&self, body: &Value, prompt: &str) -> Result<String, Attempt> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        match status {
            200..=299 => {
                let v: Value = serde_json::from_str(&text)
                    .map_err(|e| Attempt::Fatal(GatewayError::BadResponse(e.to_string())))?;
                self.extract_text(&v, prompt).map_err(Attempt::Fatal)
            }
            401 | 403 => Err(Attempt::Fatal(GatewayError::Auth(status))),
            429 | 500..=599 => Err(Attempt::Retry(format!("HTTP {status}"))),
            _ => Err(Attempt::Fatal(GatewayError::Http { status, body: text })),
        }
    }
}

enum Attempt {
    Retry(String),
    Fatal(GatewayError),
}

impl CompletionBackend for RemoteBackend {
    fn id(&self) -> String {
        format!("remote:{}", self.config.model)
    }

    fn generate(&self, request: &CompletionRequest) -> Result<(String, u32, Vec<String>), GatewayError> {
        let (body, dropped) = self.request_body(request);
        if !dropped.is_empty() {
            log::debug!("request {}: preset drops {:?}", request.id, dropped);
        }
        let mut retries = 0;
        loop {
            match self.attempt(&body, &request.prompt) {
                Ok(text) => return Ok((text, retries, dropped)),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(last)) => {
                    if retries >= self.config.max_retries {
                        return Err(GatewayError::RetriesExhausted {
                            attempts: retries + 1,
                            last,
                        });
                    }
                    log::warn!("request {} failed ({last}), retry {}", request.id, retries + 1);
                    std::thread::sleep(self.config.backoff(retries));
                    retries += 1;
                }
            }
        }
    }
}

/// Runs many requests with at most `max_in_flight` outstanding; results come
/// back in request order.
pub struct Gateway {
    backend: Arc<dyn CompletionBackend>,
    pool: rayon::ThreadPool,
}

impl Gateway {
    pub fn new(backend: Arc<dyn CompletionBackend>, max_in_flight: usize) -> Result<Gateway, GatewayError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(max_in_flight.max(1))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(Gateway { backend, pool })
    }

    pub fn backend_id(&self) -> String {
        self.backend.id()
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        self.backend.complete(request)
    }

    pub fn complete_all(&self, requests: &[CompletionRequest]) -> Vec<Result<CompletionResponse, GatewayError>> {
        use rayon::prelude::*;
        self.pool
            .install(|| requests.par_iter().map(|r| self.backend.complete(r)).collect())
    }
}
