use std::thread::sleep;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatBackend, ChatRequest, ChatResponse, GatewayError, Usage};

const BODY_EXCERPT: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Server root; `/v1/chat/completions` is appended.
    pub base_url: String,
    pub api_key: Option<String>,
    /// Extra attempts after the first for retryable failures.
    pub retries: u32,
    pub backoff_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self { base_url: "http://localhost:8000".into(), api_key: None, retries: 3, backoff_ms: 500 }
    }
}

#[derive(Debug, Clone)]
pub struct HttpBackend {
    pub config: HttpConfig,
}

enum Attempt {
    Done(ChatResponse),
    Retry(GatewayError),
    Fail(GatewayError),
}

fn excerpt(body: &str) -> String {
    body.chars().take(BODY_EXCERPT).collect()
}

fn parse_completion(body: &str, latency_ms: u64) -> Result<ChatResponse, GatewayError> {
    let bad = |why: &str| GatewayError::BadStatus { code: 200, body: format!("{why}: {}", excerpt(body)) };
    let value: Value = serde_json::from_str(body).map_err(|_| bad("response is not JSON"))?;
    let choice = value["choices"].get(0).ok_or_else(|| bad("no choices"))?;
    let content = choice["message"]["content"].as_str().ok_or_else(|| bad("no message content"))?;
    let usage = value.get("usage").and_then(|u| {
        Some(Usage { prompt_tokens: u["prompt_tokens"].as_u64()?, completion_tokens: u["completion_tokens"].as_u64()? })
    });
    Ok(ChatResponse {
        content: content.to_string(),
        finish_reason: choice["finish_reason"].as_str().map(str::to_string),
        latency_ms,
        usage,
    })
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        Self { config }
    }

    fn url(&self) -> String {
        format!("{}/v1/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn body(request: &ChatRequest) -> Value {
        let d = &request.decoding;
        let mut body = json!({
            "model": d.model,
            "messages": request.messages,
            "temperature": d.temperature,
            "n": 1,
        });
        if let Some(max) = d.max_tokens {
            body["max_tokens"] = json!(max);
        }
        if !d.stop.is_empty() {
            body["stop"] = json!(d.stop);
        }
        body
    }

    fn attempt(&self, agent: &ureq::Agent, payload: &str) -> Attempt {
        let mut req = agent.post(&self.url()).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let started = Instant::now();
        let mut response = match req.send(payload) {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(GatewayError::Timeout),
            Err(e) => return Attempt::Retry(GatewayError::Transport { message: e.to_string() }),
        };
        let code = response.status().as_u16();
        let body = match response.body_mut().read_to_string() {
            Ok(b) => b,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(GatewayError::Timeout),
            Err(e) => return Attempt::Retry(GatewayError::Transport { message: e.to_string() }),
        };
        let latency_ms = started.elapsed().as_millis() as u64;
        match code {
            200..=299 => match parse_completion(&body, latency_ms) {
                Ok(r) => Attempt::Done(r),
                Err(e) => Attempt::Fail(e),
            },
            429 | 500..=599 => Attempt::Retry(GatewayError::BadStatus { code, body: excerpt(&body) }),
            _ => Attempt::Fail(GatewayError::BadStatus { code, body: excerpt(&body) }),
        }
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(request.decoding.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let payload = Self::body(request).to_string();
        let mut last = GatewayError::Transport { message: "no attempt made".into() };
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                let delay = self.config.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                log::debug!("retrying chat request in {delay} ms after: {last}");
                sleep(Duration::from_millis(delay));
            }
            match self.attempt(&agent, &payload) {
                Attempt::Done(r) => return Ok(r),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) => last = e,
            }
        }
        Err(last)
    }

    fn identity(&self) -> String {
        format!("http:{}", self.config.base_url)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Decoding, Message};
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// Serves the given status/body pairs in order, one per connection.
    fn serve(replies: Vec<(u16, String)>) -> (String, Arc<AtomicUsize>, Arc<std::sync::Mutex<Vec<String>>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let bodies = Arc::new(std::sync::Mutex::new(Vec::new()));
        let (h, b) = (hits.clone(), bodies.clone());
        std::thread::spawn(move || {
            for (status, body) in replies {
                let Ok((mut stream, _)) = listener.accept() else { return };
                let mut buf = Vec::new();
                let mut chunk = [0u8; 4096];
                loop {
                    let n = stream.read(&mut chunk).unwrap_or(0);
                    buf.extend_from_slice(&chunk[..n]);
                    let text = String::from_utf8_lossy(&buf);
                    if let Some(end) = text.find("\r\n\r\n") {
                        let len = text[..end]
                            .lines()
                            .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap()))
                            .unwrap_or(0);
                        if buf.len() >= end + 4 + len {
                            b.lock().unwrap().push(text[end + 4..].to_string());
                            break;
                        }
                    }
                    if n == 0 {
                        break;
                    }
                }
                h.fetch_add(1, Ordering::SeqCst);
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(reply.as_bytes());
            }
        });
        (addr, hits, bodies)
    }

    fn ok_body(text: &str) -> String {
        json!({"choices": [{"message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
               "usage": {"prompt_tokens": 3, "completion_tokens": 2}})
        .to_string()
    }

    fn backend(base_url: String, retries: u32) -> HttpBackend {
        HttpBackend::new(HttpConfig { base_url, api_key: None, retries, backoff_ms: 1 })
    }

    fn request() -> ChatRequest {
        ChatRequest::new(vec![Message::user("Pick up a pillow")], Decoding { timeout_ms: 5_000, ..Decoding::default() })
    }

    #[test]
    fn retries_server_errors_then_succeeds() {
        let (url, hits, bodies) = serve(vec![(503, "busy".into()), (200, ok_body("1. done()"))]);
        let resp = backend(url, 2).complete(&request()).unwrap();
        assert_eq!(resp.content, "1. done()");
        assert_eq!(resp.usage, Some(Usage { prompt_tokens: 3, completion_tokens: 2 }));
        assert_eq!(hits.load(Ordering::SeqCst), 2);
        let sent: Value = serde_json::from_str(&bodies.lock().unwrap()[0]).unwrap();
        assert_eq!(sent["temperature"], 0.0);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (url, hits, _) = serve(vec![(400, "bad".into()), (200, ok_body("x"))]);
        let err = backend(url, 3).complete(&request()).unwrap_err();
        assert_eq!(err, GatewayError::BadStatus { code: 400, body: "bad".into() });
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn unreachable_host_is_transport_error() {
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let err = backend(format!("http://127.0.0.1:{port}"), 2).complete(&request()).unwrap_err();
        assert!(matches!(err, GatewayError::Transport { .. }), "{err:?}");
    }
}
