use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

use super::{LlmClient, LlmConfig, LlmError, Provider};

/// Blocking token bucket shared across worker threads.
#[derive(Debug)]
pub struct TokenBucket {
    capacity: f64,
    per_second: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn per_minute(rate: u32) -> Self {
        let capacity = rate.max(1) as f64;
        TokenBucket {
            capacity,
            per_second: capacity / 60.0,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Take one token, sleeping until one is available.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().unwrap();
                let now = Instant::now();
                let refill = now.duration_since(state.1).as_secs_f64() * self.per_second;
                state.0 = (state.0 + refill).min(self.capacity);
                state.1 = now;
                if state.0 >= 1.0 {
                    state.0 -= 1.0;
                    return;
                }
                (1.0 - state.0) / self.per_second
            };
            thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

/// Chat-completion client over HTTP for the supported provider shapes.
pub struct HttpClient {
    config: LlmConfig,
    http: Client,
    bucket: Option<TokenBucket>,
}

impl HttpClient {
    pub fn new(config: LlmConfig) -> Result<Self, LlmError> {
        let http = Client::builder()
            .timeout(Duration::from_secs(config.request_timeout_s))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let bucket = config.requests_per_minute.map(TokenBucket::per_minute);
        Ok(HttpClient { config, http, bucket })
    }

    fn body(&self, system: &str, user: &str) -> Value {
        let c = &self.config;
        match c.provider {
            Provider::OpenAi => json!({
                "model": c.model_name,
                "messages": [
                    {"role": "system", "content": system},
                    {"role": "user", "content": user},
                ],
                "temperature": c.temperature,
                "max_tokens": c.max_tokens,
            }),
            Provider::Anthropic => json!({
                "model": c.model_name,
                "system": system,
                "messages": [{"role": "user", "content": user}],
                "temperature": c.temperature,
                "max_tokens": c.max_tokens,
            }),
        }
    }

    fn attempt(&self, system: &str, user: &str) -> Result<String, LlmError> {
        if let Some(bucket) = &self.bucket {
            bucket.acquire();
        }
        let key = std::env::var(&self.config.api_key_ref).unwrap_or_default();
        let mut req = self.http.post(&self.config.endpoint).json(&self.body(system, user));
        req = match self.config.provider {
            Provider::OpenAi => req.bearer_auth(key),
            Provider::Anthropic => req.header("x-api-key", key).header("anthropic-version", "2023-06-01"),
        };
        let resp = req.send().map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| LlmError::Transport(e.to_string()))?;
        if let Some(err) = classify_status(status, &text) {
            return Err(err);
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| LlmError::Transport(format!("bad response body: {e}")))?;
        let reply = reply_text(self.config.provider, &value);
        if reply.trim().is_empty() {
            Err(LlmError::EmptyReply)
        } else {
            Ok(reply)
        }
    }
}

fn classify_status(status: StatusCode, body: &str) -> Option<LlmError> {
    if status.is_success() {
        return None;
    }
    let msg = format!("{status}: {}", body.chars().take(300).collect::<String>());
    Some(match status.as_u16() {
        401 | 403 => LlmError::Auth(msg),
        429 => LlmError::RateLimit(msg),
        _ => LlmError::Transport(msg),
    })
}

pub(crate) fn reply_text(provider: Provider, value: &Value) -> String {
    match provider {
        Provider::OpenAi => value["choices"][0]["message"]["content"].as_str().unwrap_or("").to_string(),
        Provider::Anthropic => value["content"]
            .as_array()
            .map(|blocks| {
                blocks
                    .iter()
                    .filter(|b| b["type"] == "text")
                    .filter_map(|b| b["text"].as_str())
                    .collect::<Vec<_>>()
                    .join("")
            })
            .unwrap_or_default(),
    }
}

impl LlmClient for HttpClient {
    fn complete(&self, system: &str, user: &str) -> Result<String, LlmError> {
        let attempts = self.config.retry.attempts.max(1);
        let mut last = LlmError::EmptyReply;
        for i in 0..attempts {
            match self.attempt(system, user) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_transient() && i + 1 < attempts => {
                    log::warn!("llm request failed ({e}); retrying");
                    let pause = self.config.retry.backoff_ms.saturating_mul(1 << i.min(10));
                    thread::sleep(Duration::from_millis(pause));
                    last = e;
                }
                Err(e) => return Err(e),
            }
        }
        Err(last)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Write};
    use std::net::TcpListener;

    fn serve_once(status: &'static str, body: &'static str) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut buf = vec![0; len];
            std::io::Read::read_exact(&mut reader, &mut buf).unwrap();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        });
        format!("http://{addr}/v1/chat")
    }

    fn client(endpoint: String, provider: Provider) -> HttpClient {
        HttpClient::new(LlmConfig {
            provider,
            endpoint,
            retry: super::super::RetryPolicy {
                attempts: 1,
                backoff_ms: 1,
            },
            ..LlmConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn openai_shape_round_trip() {
        let url = serve_once("200 OK", r#"{"choices":[{"message":{"content":"hello"}}]}"#);
        assert_eq!(client(url, Provider::OpenAi).complete("s", "u").unwrap(), "hello");
    }

    #[test]
    fn anthropic_shape_round_trip() {
        let url = serve_once("200 OK", r#"{"content":[{"type":"text","text":"hi "},{"type":"text","text":"there"}]}"#);
        assert_eq!(client(url, Provider::Anthropic).complete("s", "u").unwrap(), "hi there");
    }

    #[test]
    fn unauthorized_maps_to_auth() {
        let url = serve_once("401 Unauthorized", r#"{"error":"bad key"}"#);
        assert!(matches!(client(url, Provider::OpenAi).complete("s", "u"), Err(LlmError::Auth(_))));
    }

    #[test]
    fn empty_content_is_reported() {
        let url = serve_once("200 OK", r#"{"choices":[{"message":{"content":"  "}}]}"#);
        assert_eq!(client(url, Provider::OpenAi).complete("s", "u"), Err(LlmError::EmptyReply));
    }

    #[test]
    fn bucket_throttles_after_burst() {
        let bucket = TokenBucket::per_minute(600);
        let start = Instant::now();
        for _ in 0..601 {
            bucket.acquire();
        }
        assert!(start.elapsed() >= Duration::from_millis(80));
    }
}
