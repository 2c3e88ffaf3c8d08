use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::LlmError;

pub const API_KEY_ENV: &str = "CHEX_API_KEY";
pub const DEFAULT_MAX_TOKENS: u32 = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl LlmRequest {
    /// Temperature 0 and the default token budget.
    pub fn new(model: impl Into<String>, prompt: impl Into<String>) -> Self {
        LlmRequest { model: model.into(), prompt: prompt.into(), temperature: 0.0, max_tokens: DEFAULT_MAX_TOKENS }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    #[serde(default)]
    pub usage: Option<TokenUsage>,
    #[serde(default)]
    pub latency_ms: u64,
}

impl LlmResponse {
    pub fn text(text: impl Into<String>) -> Self {
        LlmResponse { text: text.into(), usage: None, latency_ms: 0 }
    }
}

/// Anything that answers a rendered prompt.
pub trait ChatClient: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError>;
}

/// Chat-completion endpoint over HTTP: `POST {base_url}/chat/completions`
/// with a bearer token.
#[derive(Debug)]
pub struct HttpChatClient {
    agent: ureq::Agent,
    endpoint: String,
    api_key: String,
}

impl HttpChatClient {
    pub fn new(base_url: &str, api_key: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpChatClient {
            agent,
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key: api_key.into(),
        }
    }

    /// Reads the token from `CHEX_API_KEY`.
    pub fn from_env(base_url: &str, timeout: Duration) -> Result<Self, LlmError> {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.trim().is_empty());
        let key = key.ok_or(LlmError::MissingCredentials(API_KEY_ENV))?;
        Ok(Self::new(base_url, key, timeout))
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<TokenUsage>,
}

impl ChatClient for HttpChatClient {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let body = json!({
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let started = Instant::now();
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| LlmError::Provider { retryable: true, message: e.to_string() })?;
        let status = resp.status().as_u16();
        if status != 200 {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            let retryable = status == 429 || status >= 500;
            return Err(LlmError::Provider {
                retryable,
                message: format!("HTTP {status}: {}", text.chars().take(300).collect::<String>()),
            });
        }
        let wire: WireResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::Provider { retryable: false, message: format!("bad response body: {e}") })?;
        let text = wire
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::Provider { retryable: false, message: "response has no choices".into() })?;
        Ok(LlmResponse { text, usage: wire.usage, latency_ms: started.elapsed().as_millis() as u64 })
    }
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, d: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NoSleep;

impl Sleeper for NoSleep {
    fn sleep(&self, _: Duration) {}
}

/// Records requested delays instead of sleeping.
#[derive(Debug, Default)]
pub struct RecordingSleeper {
    delays: Mutex<Vec<Duration>>,
}

impl RecordingSleeper {
    pub fn delays(&self) -> Vec<Duration> {
        self.delays.lock().unwrap().clone()
    }
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, d: Duration) {
        self.delays.lock().unwrap().push(d);
    }
}

/// Exponential backoff: the n-th retry waits `base * factor^(n-1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub base: Duration,
    pub factor: f64,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { base: Duration::from_secs(1), factor: 2.0, max_attempts: 5 }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        self.base.mul_f64(self.factor.powi(retry.saturating_sub(1) as i32))
    }
}

/// Calls the client until success, a non-retryable error, or the attempt
/// budget runs out. Returns the result and the number of retries made.
pub fn call_with_retry(
    client: &dyn ChatClient,
    request: &LlmRequest,
    policy: &RetryPolicy,
    sleeper: &dyn Sleeper,
) -> (Result<LlmResponse, LlmError>, u32) {
    let mut retries = 0;
    loop {
        match client.complete(request) {
            Ok(r) => return (Ok(r), retries),
            Err(e) if e.is_retryable() && retries + 1 < policy.max_attempts.max(1) => {
                retries += 1;
                sleeper.sleep(policy.delay(retries));
            }
            Err(e) => return (Err(e), retries),
        }
    }
}
