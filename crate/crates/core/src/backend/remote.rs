//! Remote chat-completion backend.
//!
//! Speaks the ubiquitous chat-completion shape: POST to the configured
//! endpoint with `{model, temperature, messages: [{role: "user", content}]}`
//! and read the first choice's message content back. Authorization is a
//! bearer token taken from the `CJ_API_KEY` environment variable — never
//! from a config file, so credentials cannot end up committed next to
//! experiment configs.
//!
//! Transport failures and 5xx/429 responses are retried with exponential
//! backoff up to `max_retries` total attempts; other HTTP errors and
//! malformed completion bodies fail immediately (retrying a 401 or a schema
//! mismatch will not help). In-flight requests across threads are bounded by
//! `max_in_flight`.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Backend, BackendError, BackendReply, BackendRequest};

/// Environment variable holding the bearer token for remote calls.
pub const API_KEY_VAR: &str = "CJ_API_KEY";

fn default_temperature() -> f64 {
    1.0
}
fn default_timeout_secs() -> u64 {
    60
}
fn default_max_retries() -> u32 {
    3
}
fn default_initial_backoff_ms() -> u64 {
    250
}
fn default_max_in_flight() -> usize {
    4
}

/// Connection settings for a chat-completion endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Full URL of the completion route (e.g. ".../v1/chat/completions").
    pub endpoint: String,
    pub model: String,
    /// Sampling temperature sent with every request.
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    /// Total attempts per call, first try included.
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// First retry delay; doubles on each further retry.
    #[serde(default = "default_initial_backoff_ms")]
    pub initial_backoff_ms: u64,
    /// Concurrent request cap across all threads sharing this backend.
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
}

impl RemoteConfig {
    /// Settings for `endpoint`/`model` with every tunable at its default.
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature: default_temperature(),
            timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            initial_backoff_ms: default_initial_backoff_ms(),
            max_in_flight: default_max_in_flight(),
        }
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Gate {
    permits: Mutex<usize>,
    released: Condvar,
}

struct GatePermit<'a>(&'a Gate);

impl Gate {
    fn new(permits: usize) -> Self {
        Gate { permits: Mutex::new(permits.max(1)), released: Condvar::new() }
    }

    fn acquire(&self) -> GatePermit<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.released.wait(permits).unwrap();
        }
        *permits -= 1;
        GatePermit(self)
    }
}

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap() += 1;
        self.0.released.notify_one();
    }
}

/// A [`Backend`] that forwards prompts to a chat-completion API.
#[derive(Debug)]
pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    gate: Gate,
}

enum SendFailure {
    /// Worth another attempt: connection trouble, 5xx, or throttling.
    Retryable(String),
    /// Retrying cannot help: auth errors, bad requests, schema mismatches.
    Fatal(String),
}

impl RemoteBackend {
    /// Builds a backend, reading the bearer token from `CJ_API_KEY` (the
    /// variable may be absent for endpoints that need no auth).
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        let api_key = std::env::var(API_KEY_VAR).ok();
        Self::with_api_key(config, api_key)
    }

    /// Builds a backend with an explicit token (or none). Exists so tests
    /// can exercise auth without mutating process-wide environment state.
    pub fn with_api_key(
        config: RemoteConfig,
        api_key: Option<String>,
    ) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Unavailable { attempts: 0, reason: e.to_string() })?;
        let gate = Gate::new(config.max_in_flight);
        Ok(RemoteBackend { config, client, api_key, gate })
    }

    fn send(&self, prompt: &str) -> Result<String, SendFailure> {
        let body = json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut request = self.client.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| SendFailure::Retryable(e.to_string()))?;
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(SendFailure::Retryable(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(SendFailure::Fatal(format!("HTTP {status}")));
        }
        let payload: serde_json::Value =
            response.json().map_err(|e| SendFailure::Fatal(format!("invalid JSON body: {e}")))?;
        payload
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| {
                SendFailure::Fatal("response carries no choices[0].message.content".to_string())
            })
    }
}

impl Backend for RemoteBackend {
    fn respond(
        &self,
        _request: &BackendRequest<'_>,
        prompt: &str,
    ) -> Result<BackendReply, BackendError> {
        let _permit = self.gate.acquire();
        let mut backoff = Duration::from_millis(self.config.initial_backoff_ms);
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            match self.send(prompt) {
                Ok(text) => return Ok(BackendReply { text, attempts }),
                Err(SendFailure::Fatal(reason)) => {
                    return Err(BackendError::Unavailable { attempts, reason });
                }
                Err(SendFailure::Retryable(reason)) => {
                    if attempts >= self.config.max_retries.max(1) {
                        return Err(BackendError::Unavailable { attempts, reason });
                    }
                    thread::sleep(backoff);
                    backoff = backoff.saturating_mul(2);
                }
            }
        }
    }

    fn describe(&self) -> String {
        format!("remote(model={})", self.config.model)
    }
}

#[cfg(test)]
mod tests {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    use super::*;

    /// Minimal scripted HTTP server: answers each incoming request with the
    /// next (status, body) in the script, recording request bodies and the
    /// Authorization header. Panics in the handler thread surface as hangs,
    /// so assertions happen on the collected records instead.
    pub(crate) struct StubServer {
        pub endpoint: String,
        handle: Option<std::thread::JoinHandle<Vec<RecordedRequest>>>,
    }

    #[derive(Debug, Clone)]
    pub(crate) struct RecordedRequest {
        pub body: serde_json::Value,
        pub authorization: Option<String>,
    }

    impl StubServer {
        pub fn start(script: Vec<(u16, String)>) -> Self {
            let listener = TcpListener::bind("127.0.0.1:0").unwrap();
            let endpoint = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
            let handle = std::thread::spawn(move || {
                let mut recorded = Vec::new();
                for (status, body) in script {
                    let (stream, _) = listener.accept().unwrap();
                    recorded.push(serve_one(stream, status, &body));
                }
                recorded
            });
            StubServer { endpoint, handle: Some(handle) }
        }

        pub fn finish(mut self) -> Vec<RecordedRequest> {
            self.handle.take().unwrap().join().unwrap()
        }
    }

    fn serve_one(stream: std::net::TcpStream, status: u16, body: &str) -> RecordedRequest {
        let mut reader = BufReader::new(stream);
        let mut line = String::new();
        reader.read_line(&mut line).unwrap(); // request line
        let mut content_length = 0usize;
        let mut authorization = None;
        loop {
            let mut header = String::new();
            reader.read_line(&mut header).unwrap();
            let header = header.trim_end().to_string();
            if header.is_empty() {
                break;
            }
            if let Some((name, value)) = header.split_once(':') {
                let value = value.trim();
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => content_length = value.parse().unwrap(),
                    "authorization" => authorization = Some(value.to_string()),
                    _ => {}
                }
            }
        }
        let mut raw = vec![0u8; content_length];
        reader.read_exact(&mut raw).unwrap();
        let request_body: serde_json::Value = serde_json::from_slice(&raw).unwrap();

        let reason = match status {
            200 => "OK",
            500 => "Internal Server Error",
            _ => "Error",
        };
        let response = format!(
            "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len(),
        );
        let mut stream = reader.into_inner();
        stream.write_all(response.as_bytes()).unwrap();
        stream.flush().unwrap();
        RecordedRequest { body: request_body, authorization }
    }

    pub(crate) fn completion_body(content: &str) -> String {
        json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
    }

    fn test_config(endpoint: String) -> RemoteConfig {
        RemoteConfig {
            endpoint,
            model: "test-model".to_string(),
            temperature: 1.0,
            timeout_secs: 5,
            max_retries: 3,
            initial_backoff_ms: 5,
            max_in_flight: 2,
        }
    }

    fn any_request<'a>() -> BackendRequest<'a> {
        // The remote backend only reads the prompt; any variant works. An
        // empty forward request is the cheapest to fabricate.
        static EMPTY: std::sync::OnceLock<(crate::engine::FactSet, crate::lang::Fact)> =
            std::sync::OnceLock::new();
        let (premises, phe) = EMPTY.get_or_init(|| {
            (crate::engine::FactSet::new(), crate::lang::parse_premise("Anne is calm").unwrap())
        });
        BackendRequest::Forward { premises, rules: &[], phenomenon: phe }
    }

    #[test]
    fn sends_model_temperature_and_single_user_message() {
        let server = StubServer::start(vec![(200, completion_body("True"))]);
        let backend = RemoteBackend::with_api_key(
            test_config(server.endpoint.clone()),
            Some("test-key-123".to_string()),
        )
        .unwrap();
        let reply = backend.respond(&any_request(), "the prompt").unwrap();
        assert_eq!(reply.text, "True");
        assert_eq!(reply.attempts, 1);

        let recorded = server.finish();
        assert_eq!(recorded.len(), 1);
        let body = &recorded[0].body;
        assert_eq!(body["model"], "test-model");
        assert_eq!(body["temperature"], 1.0);
        assert_eq!(body["messages"].as_array().unwrap().len(), 1);
        assert_eq!(body["messages"][0]["role"], "user");
        assert_eq!(body["messages"][0]["content"], "the prompt");
        assert_eq!(recorded[0].authorization.as_deref(), Some("Bearer test-key-123"));
    }

    #[test]
    fn omits_authorization_without_a_key() {
        let server = StubServer::start(vec![(200, completion_body("ok"))]);
        let backend =
            RemoteBackend::with_api_key(test_config(server.endpoint.clone()), None).unwrap();
        backend.respond(&any_request(), "p").unwrap();
        assert_eq!(server.finish()[0].authorization, None);
    }

    #[test]
    fn retries_server_errors_with_bounded_attempts() {
        let server = StubServer::start(vec![
            (500, "{}".to_string()),
            (500, "{}".to_string()),
            (200, completion_body("recovered")),
        ]);
        let backend =
            RemoteBackend::with_api_key(test_config(server.endpoint.clone()), None).unwrap();
        let reply = backend.respond(&any_request(), "p").unwrap();
        assert_eq!(reply.text, "recovered");
        assert_eq!(reply.attempts, 3);
        assert_eq!(server.finish().len(), 3);
    }

    #[test]
    fn gives_up_after_max_retries() {
        let server = StubServer::start(vec![
            (500, "{}".to_string()),
            (500, "{}".to_string()),
            (500, "{}".to_string()),
        ]);
        let backend =
            RemoteBackend::with_api_key(test_config(server.endpoint.clone()), None).unwrap();
        let err = backend.respond(&any_request(), "p").unwrap_err();
        match err {
            BackendError::Unavailable { attempts, .. } => assert_eq!(attempts, 3),
        }
        assert_eq!(server.finish().len(), 3, "exactly max_retries requests hit the wire");
    }

    #[test]
    fn client_errors_fail_without_retry() {
        let server = StubServer::start(vec![(401, "{}".to_string())]);
        let backend =
            RemoteBackend::with_api_key(test_config(server.endpoint.clone()), None).unwrap();
        let err = backend.respond(&any_request(), "p").unwrap_err();
        match err {
            BackendError::Unavailable { attempts, reason } => {
                assert_eq!(attempts, 1);
                assert!(reason.contains("401"), "reason: {reason}");
            }
        }
        assert_eq!(server.finish().len(), 1);
    }

    #[test]
    fn malformed_completion_bodies_fail_fast() {
        let server = StubServer::start(vec![(200, r#"{"choices": []}"#.to_string())]);
        let backend =
            RemoteBackend::with_api_key(test_config(server.endpoint.clone()), None).unwrap();
        let err = backend.respond(&any_request(), "p").unwrap_err();
        match err {
            BackendError::Unavailable { attempts, reason } => {
                assert_eq!(attempts, 1);
                assert!(reason.contains("choices"), "reason: {reason}");
            }
        }
        server.finish();
    }
}
