//! Chat-completion client with bounded concurrency and retries.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LlmError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("endpoint answered {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed reply: {0}")]
    Protocol(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: Box<LlmError> },
    #[error("environment variable {0} holding the API key is not set")]
    MissingKey(String),
}

impl LlmError {
    /// Failures worth retrying: transport errors, rate limiting, server errors.
    pub fn is_transient(&self) -> bool {
        match self {
            LlmError::Transport(_) => true,
            LlmError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub system_prompt: Option<String>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            model: "gpt-4o-mini".to_string(),
            temperature: 0.01,
            max_tokens: 256,
            system_prompt: None,
        }
    }
}

/// Anything that turns a prompt into reply text.
pub trait LlmClient: Send + Sync {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, LlmError>;
}

impl<C: LlmClient + ?Sized> LlmClient for &C {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, LlmError> {
        (**self).complete(prompt, params)
    }
}

impl<C: LlmClient + ?Sized> LlmClient for std::sync::Arc<C> {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, LlmError> {
        (**self).complete(prompt, params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn new(prompt: &str, params: &GenerationParams) -> Self {
        let mut messages = Vec::with_capacity(2);
        if let Some(system) = &params.system_prompt {
            messages.push(ChatMessage {
                role: "system".into(),
                content: system.clone(),
            });
        }
        messages.push(ChatMessage {
            role: "user".into(),
            content: prompt.to_string(),
        });
        Self {
            model: params.model.clone(),
            messages,
            temperature: params.temperature,
            max_tokens: params.max_tokens,
        }
    }
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatReplyMessage,
}

#[derive(Debug, Deserialize)]
struct ChatReplyMessage {
    content: Option<String>,
}

/// Extracts the first choice's message content from a reply body.
pub fn parse_chat_reply(body: &str) -> Result<String, LlmError> {
    let reply: ChatResponse =
        serde_json::from_str(body).map_err(|e| LlmError::Protocol(e.to_string()))?;
    reply
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| LlmError::Protocol("reply has no message content".into()))
}

/// Moves a JSON body to an endpoint and returns `(status, body)`.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &str,
    ) -> Result<(u16, String), String>;
}

#[derive(Debug, Clone)]
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent }
    }
}

impl Transport for UreqTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &str,
    ) -> Result<(u16, String), String> {
        let mut req = self
            .agent
            .post(url)
            .header("Content-Type", "application/json");
        if let Some(key) = bearer {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send(body).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| e.to_string())?;
        Ok((status, text))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Extra attempts after the first.
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    fn delay(&self, retry: u32) -> Duration {
        self.base_delay
            .saturating_mul(1u32 << retry.min(16))
            .min(self.max_delay)
    }
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(width: usize) -> Self {
        Self {
            free: Mutex::new(width.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut free = self.0.free.lock().unwrap_or_else(|e| e.into_inner());
        *free += 1;
        self.0.cv.notify_one();
    }
}

/// Client for OpenAI-style `chat/completions` endpoints.
pub struct ChatClient<T: Transport = UreqTransport> {
    endpoint: String,
    api_key: Option<String>,
    transport: T,
    retry: RetryPolicy,
    limiter: Limiter,
}

impl<T: Transport> std::fmt::Debug for ChatClient<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChatClient")
            .field("endpoint", &self.endpoint)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("retry", &self.retry)
            .finish()
    }
}

impl ChatClient<UreqTransport> {
    /// Reads the API key from `key_env` if that variable is set and non-empty.
    pub fn from_env(
        endpoint: impl Into<String>,
        key_env: &str,
        timeout: Duration,
        retry: RetryPolicy,
        max_in_flight: usize,
    ) -> Self {
        let api_key = std::env::var(key_env).ok().filter(|k| !k.is_empty());
        if api_key.is_none() {
            log::warn!("{key_env} is not set; sending requests without an API key");
        }
        Self::with_transport(
            endpoint,
            api_key,
            UreqTransport::new(timeout),
            retry,
            max_in_flight,
        )
    }
}

impl<T: Transport> ChatClient<T> {
    pub fn with_transport(
        endpoint: impl Into<String>,
        api_key: Option<String>,
        transport: T,
        retry: RetryPolicy,
        max_in_flight: usize,
    ) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key,
            transport,
            retry,
            limiter: Limiter::new(max_in_flight),
        }
    }

    fn attempt(&self, body: &str) -> Result<String, LlmError> {
        let (status, reply) = self
            .transport
            .post_json(&self.endpoint, self.api_key.as_deref(), body)
            .map_err(LlmError::Transport)?;
        if !(200..300).contains(&status) {
            return Err(LlmError::Status {
                status,
                body: reply.chars().take(512).collect(),
            });
        }
        parse_chat_reply(&reply)
    }
}

impl<T: Transport> LlmClient for ChatClient<T> {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, LlmError> {
        let body = serde_json::to_string(&ChatRequest::new(prompt, params))
            .map_err(|e| LlmError::Protocol(e.to_string()))?;
        let _permit = self.limiter.acquire();
        let mut retries = 0;
        loop {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_transient() => {
                    if retries >= self.retry.max_retries {
                        return Err(LlmError::Exhausted {
                            attempts: retries + 1,
                            last: Box::new(e),
                        });
                    }
                    log::warn!(
                        "LLM call failed ({e}); retry {} of {}",
                        retries + 1,
                        self.retry.max_retries
                    );
                    std::thread::sleep(self.retry.delay(retries));
                    retries += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Fails the first `failures` calls with a transport error.
    struct Flaky {
        failures: usize,
        calls: AtomicUsize,
        reply: (u16, String),
    }

    impl Transport for Flaky {
        fn post_json(&self, _: &str, _: Option<&str>, _: &str) -> Result<(u16, String), String> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err("connection reset".into())
            } else {
                Ok(self.reply.clone())
            }
        }
    }

    fn ok_body(text: &str) -> (u16, String) {
        (
            200,
            format!(r#"{{"choices":[{{"message":{{"role":"assistant","content":"{text}"}}}}]}}"#),
        )
    }

    fn fast_retry(max_retries: u32) -> RetryPolicy {
        RetryPolicy {
            max_retries,
            base_delay: Duration::from_millis(1),
            max_delay: Duration::from_millis(2),
        }
    }

    fn client(failures: usize, reply: (u16, String), retries: u32) -> ChatClient<Flaky> {
        ChatClient::with_transport(
            "http://unused",
            None,
            Flaky {
                failures,
                calls: AtomicUsize::new(0),
                reply,
            },
            fast_retry(retries),
            4,
        )
    }

    #[test]
    fn default_decoding_parameters() {
        let p = GenerationParams::default();
        assert_eq!(p.temperature, 0.01);
        assert_eq!(p.max_tokens, 256);
    }

    #[test]
    fn two_failures_then_success_within_budget() {
        let c = client(2, ok_body("Paris"), 3);
        assert_eq!(
            c.complete("q", &GenerationParams::default()).unwrap(),
            "Paris"
        );
        assert_eq!(c.transport.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn exhausted_budget_reports_attempts() {
        let c = client(10, ok_body("Paris"), 2);
        match c.complete("q", &GenerationParams::default()) {
            Err(LlmError::Exhausted { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_reply_is_protocol_error_without_retry() {
        let c = client(0, (200, "{\"nope\":1}".into()), 3);
        assert!(matches!(
            c.complete("q", &GenerationParams::default()),
            Err(LlmError::Protocol(_))
        ));
        assert_eq!(c.transport.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let c = client(0, (401, "unauthorized".into()), 3);
        assert!(matches!(
            c.complete("q", &GenerationParams::default()),
            Err(LlmError::Status { status: 401, .. })
        ));
        assert_eq!(c.transport.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn request_shape() {
        let params = GenerationParams {
            system_prompt: Some("be brief".into()),
            ..GenerationParams::default()
        };
        let v = serde_json::to_value(ChatRequest::new("hello", &params)).unwrap();
        assert_eq!(v["messages"][0]["role"], "system");
        assert_eq!(v["messages"][1]["role"], "user");
        assert_eq!(v["messages"][1]["content"], "hello");
        assert_eq!(v["temperature"], 0.01);
        assert_eq!(v["max_tokens"], 256);
    }

    #[test]
    fn debug_output_hides_key() {
        let c = ChatClient::with_transport(
            "http://x",
            Some("sk-secret".into()),
            Flaky {
                failures: 0,
                calls: AtomicUsize::new(0),
                reply: ok_body("x"),
            },
            RetryPolicy::default(),
            1,
        );
        assert!(!format!("{c:?}").contains("sk-secret"));
    }
}
