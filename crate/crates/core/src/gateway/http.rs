//! Blocking HTTP plumbing shared by the chat backend and the live tool
//! adapters: per-host rate limiting plus capped, jittered retries.

use std::sync::Arc;
use std::thread;
use std::time::Duration;

use rand::Rng;
use serde_json::{json, Value};

use super::{ChatModel, CompletionRequest, GatewayError, RateLimiter, Role};

/// Environment variable holding the chat endpoint's bearer token.
pub const API_KEY_ENV: &str = "HUBRISK_LLM_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    /// Relative jitter, e.g. 0.2 for ±20%.
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_secs(1),
            max_delay: Duration::from_secs(4),
            jitter: 0.2,
        }
    }
}

impl RetryPolicy {
    /// Nominal (un-jittered) wait before retry number `retry` (0-based).
    pub fn nominal_delay(&self, retry: u32) -> Duration {
        let factor = 2u32.saturating_pow(retry);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }

    fn jittered_delay(&self, retry: u32) -> Duration {
        let nominal = self.nominal_delay(retry).as_secs_f64();
        let j = self.jitter.abs();
        let scale = if j > 0.0 {
            1.0 + rand::rng().random_range(-j..=j)
        } else {
            1.0
        };
        Duration::from_secs_f64((nominal * scale).max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

impl HttpReply {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    pub fn json(&self) -> Result<Value, GatewayError> {
        serde_json::from_str(&self.body)
            .map_err(|e| GatewayError::Protocol(format!("response is not JSON: {e}")))
    }
}

fn is_transient_status(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

fn host_of(url: &str) -> String {
    url.parse::<ureq::http::Uri>()
        .ok()
        .and_then(|u| u.authority().map(|a| a.to_string()))
        .unwrap_or_else(|| url.to_string())
}

#[derive(Clone)]
pub struct HttpClient {
    agent: ureq::Agent,
    retry: RetryPolicy,
    limiter: Arc<RateLimiter>,
}

impl HttpClient {
    pub fn new(retry: RetryPolicy, limiter: Arc<RateLimiter>) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build();
        Self {
            agent: ureq::Agent::new_with_config(config),
            retry,
            limiter,
        }
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        self.retry
    }

    pub fn get(&self, url: &str, bearer: Option<&str>) -> Result<HttpReply, GatewayError> {
        self.with_retries(url, || {
            let mut req = self.agent.get(url).header("Accept", "application/json");
            if let Some(token) = bearer {
                req = req.header("Authorization", format!("Bearer {token}"));
            }
            req.call()
        })
    }

    pub fn post_json(&self, url: &str, body: &Value, bearer: Option<&str>) -> Result<HttpReply, GatewayError> {
        self.with_retries(url, || {
            let mut req = self.agent.post(url).header("Accept", "application/json");
            if let Some(token) = bearer {
                req = req.header("Authorization", format!("Bearer {token}"));
            }
            req.send_json(body)
        })
    }

    /// Retries connection failures, 429 and 5xx. Any other status is
    /// returned to the caller as-is.
    fn with_retries<F>(&self, url: &str, mut send: F) -> Result<HttpReply, GatewayError>
    where
        F: FnMut() -> Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    {
        let host = host_of(url);
        let attempts = self.retry.max_attempts.max(1);
        let mut last_error = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(self.retry.jittered_delay(attempt - 1));
            }
            self.limiter.acquire(&host);
            match send() {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let body = resp
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| GatewayError::Transport(format!("reading body from {host}: {e}")));
                    match body {
                        Ok(body) if !is_transient_status(status) => return Ok(HttpReply { status, body }),
                        Ok(body) => {
                            last_error = format!("HTTP {status}: {}", body.chars().take(200).collect::<String>())
                        }
                        Err(e) => last_error = e.to_string(),
                    }
                }
                Err(e) => last_error = e.to_string(),
            }
            log::warn!("request to {host} failed (attempt {}/{attempts}): {last_error}", attempt + 1);
        }
        Err(GatewayError::Transport(format!(
            "{host}: giving up after {attempts} attempts: {last_error}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Key(String),
    Index(usize),
}

/// Dotted JSON path with array indices, e.g. `choices[0].message.content`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponsePath(Vec<Segment>);

impl ResponsePath {
    pub fn parse(raw: &str) -> Result<Self, GatewayError> {
        let bad = || GatewayError::InvalidRequest(format!("bad response path {raw:?}"));
        let mut segments = Vec::new();
        for part in raw.split('.') {
            let (key, mut rest) = match part.find('[') {
                Some(i) => (&part[..i], &part[i..]),
                None => (part, ""),
            };
            if !key.is_empty() {
                segments.push(Segment::Key(key.to_string()));
            }
            while !rest.is_empty() {
                let close = rest.find(']').ok_or_else(bad)?;
                let idx = rest[1..close].parse().map_err(|_| bad())?;
                segments.push(Segment::Index(idx));
                rest = &rest[close + 1..];
                if !rest.is_empty() && !rest.starts_with('[') {
                    return Err(bad());
                }
            }
        }
        if segments.is_empty() {
            return Err(bad());
        }
        Ok(Self(segments))
    }

    pub fn extract<'a>(&self, value: &'a Value) -> Option<&'a Value> {
        self.0.iter().try_fold(value, |v, seg| match seg {
            Segment::Key(k) => v.get(k.as_str()),
            Segment::Index(i) => v.get(*i),
        })
    }
}

pub struct HttpChatBackend {
    client: HttpClient,
    endpoint: String,
    model: String,
    response_path: ResponsePath,
    api_key: Option<String>,
}

impl HttpChatBackend {
    pub fn new(
        client: HttpClient,
        endpoint: String,
        model: String,
        response_path: ResponsePath,
        api_key: Option<String>,
    ) -> Self {
        Self {
            client,
            endpoint,
            model,
            response_path,
            api_key,
        }
    }

    /// Request body. Tool observations go out as user turns because the
    /// agent protocol is plain text, not provider-native tool calling.
    pub fn request_body(&self, request: &CompletionRequest) -> Value {
        let messages: Vec<Value> = request
            .messages()
            .iter()
            .map(|m| {
                let role = match m.role {
                    Role::Tool => Role::User,
                    r => r,
                };
                json!({ "role": role.as_str(), "content": m.content })
            })
            .collect();
        json!({
            "model": self.model,
            "messages": messages,
            "temperature": request.temperature(),
            "max_tokens": request.max_output_tokens(),
            "stop": request.stop_sequences(),
        })
    }
}

impl ChatModel for HttpChatBackend {
    fn generate(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let body = self.request_body(request);
        let reply = self
            .client
            .post_json(&self.endpoint, &body, self.api_key.as_deref())?;
        if !reply.is_success() {
            return Err(GatewayError::Transport(format!(
                "HTTP {} from chat endpoint: {}",
                reply.status,
                reply.body.chars().take(200).collect::<String>()
            )));
        }
        let value = reply.json()?;
        match self.response_path.extract(&value) {
            Some(Value::String(text)) if !text.is_empty() => Ok(text.clone()),
            Some(Value::String(_)) => Err(GatewayError::Protocol("assistant text is empty".into())),
            Some(other) => Err(GatewayError::Protocol(format!(
                "assistant text is not a string: {other}"
            ))),
            None => Err(GatewayError::Protocol("response lacks the assistant text path".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_response_paths() {
        let p = ResponsePath::parse("choices[0].message.content").unwrap();
        let v = json!({"choices": [{"message": {"content": "hi"}}]});
        assert_eq!(p.extract(&v), Some(&json!("hi")));
        let nested = ResponsePath::parse("a[1][0]").unwrap();
        assert_eq!(nested.extract(&json!({"a": [[0], [7]]})), Some(&json!(7)));
        assert!(ResponsePath::parse("").is_err());
        assert!(ResponsePath::parse("a[x]").is_err());
        assert!(ResponsePath::parse("a[0]b").is_err());
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy::default();
        assert_eq!(p.nominal_delay(0), Duration::from_secs(1));
        assert_eq!(p.nominal_delay(1), Duration::from_secs(2));
        assert_eq!(p.nominal_delay(2), Duration::from_secs(4));
        assert_eq!(p.nominal_delay(5), Duration::from_secs(4));
        for _ in 0..50 {
            let d = p.jittered_delay(1).as_secs_f64();
            assert!((1.6..=2.4).contains(&d), "{d}");
        }
    }

    #[test]
    fn host_extraction() {
        assert_eq!(host_of("http://127.0.0.1:8080/v1/chat"), "127.0.0.1:8080");
        assert_eq!(host_of("https://api.example.com/x?y=1"), "api.example.com");
    }

    #[test]
    fn wire_body_maps_tool_role_to_user() {
        use crate::gateway::ChatMessage;
        let backend = HttpChatBackend::new(
            HttpClient::new(RetryPolicy::default(), Arc::new(RateLimiter::new(0.0))),
            "http://localhost".into(),
            "gpt-x".into(),
            ResponsePath::parse("choices[0].message.content").unwrap(),
            None,
        );
        let req = CompletionRequest::new(
            vec![
                ChatMessage::system("s"),
                ChatMessage::user("u"),
                ChatMessage::tool("Observation: o"),
            ],
            0.0,
            32,
            vec!["\nObservation:".into()],
        )
        .unwrap();
        let body = backend.request_body(&req);
        assert_eq!(body["model"], "gpt-x");
        assert_eq!(body["max_tokens"], 32);
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["stop"], json!(["\nObservation:"]));
        assert_eq!(body["messages"][2], json!({"role": "user", "content": "Observation: o"}));
    }
}
