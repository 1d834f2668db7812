//! Chat-completion access behind one trait, with an HTTP backend for any
//! chat-completions server and a scripted backend for offline runs.

mod http;
mod scripted;

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use http::{HttpBackend, HttpConfig};
pub use scripted::{ScriptRule, ScriptedBackend};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GatewayError {
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {message}")]
    Transport { message: String },
    #[error("HTTP {code}: {body}")]
    BadStatus { code: u16, body: String },
    #[error("no scripted response for prompt {prompt_sha256}")]
    ScriptMiss { prompt_sha256: String },
    #[error("invalid request: {message}")]
    InvalidRequest { message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// Decoding settings shared by every request of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Decoding {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub stop: Vec<String>,
    pub timeout_ms: u64,
}

impl Default for Decoding {
    fn default() -> Self {
        Self { model: "default".into(), temperature: 0.0, max_tokens: Some(512), stop: Vec::new(), timeout_ms: 60_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<Message>,
    #[serde(flatten)]
    pub decoding: Decoding,
}

impl ChatRequest {
    pub fn new(messages: Vec<Message>, decoding: Decoding) -> Self {
        Self { messages, decoding }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let message = if self.messages.is_empty() {
            "no messages"
        } else if self.decoding.temperature.is_nan() || self.decoding.temperature < 0.0 {
            "temperature must be non-negative"
        } else {
            return Ok(());
        };
        Err(GatewayError::InvalidRequest { message: message.into() })
    }

    /// SHA-256 over the JSON of the messages alone, so decoding settings do
    /// not change which scripted rule answers.
    pub fn prompt_sha256(&self) -> String {
        let json = serde_json::to_string(&self.messages).expect("messages serialize");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn system_text(&self) -> Option<&str> {
        self.messages.iter().find(|m| m.role == Role::System).map(|m| m.content.as_str())
    }

    /// Content of the final user message.
    pub fn last_user_text(&self) -> Option<&str> {
        self.messages.iter().rev().find(|m| m.role == Role::User).map(|m| m.content.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub finish_reason: Option<String>,
    pub latency_ms: u64,
    pub usage: Option<Usage>,
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError>;

    /// Stable description recorded in run artifacts.
    fn identity(&self) -> String;
}

/// One line of the request log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub timestamp: f64,
    pub backend: String,
    pub prompt_sha256: String,
    pub request: ChatRequest,
    pub response: Result<ChatResponse, GatewayError>,
}

pub fn read_log(path: impl AsRef<Path>) -> std::io::Result<Vec<LogRecord>> {
    BufReader::new(File::open(path)?)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| serde_json::from_str(&l?).map_err(std::io::Error::other))
        .collect()
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("semaphore poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("semaphore poisoned");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("semaphore poisoned") += 1;
        self.0.cv.notify_one();
    }
}

/// Shared front door to a backend: bounds in-flight requests and appends
/// every exchange to an optional JSONL log.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    identity: Arc<str>,
    pub decoding: Decoding,
    slots: Arc<Semaphore>,
    log: Option<Arc<Mutex<File>>>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>, decoding: Decoding, concurrency: usize) -> Self {
        Self {
            identity: backend.identity().into(),
            backend,
            decoding,
            slots: Arc::new(Semaphore { free: Mutex::new(concurrency.max(1)), cv: Condvar::new() }),
            log: None,
        }
    }

    pub fn with_log(mut self, path: impl AsRef<Path>) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.log = Some(Arc::new(Mutex::new(file)));
        Ok(self)
    }

    pub fn identity(&self) -> String {
        self.identity.to_string()
    }

    pub fn request(&self, messages: Vec<Message>) -> ChatRequest {
        ChatRequest::new(messages, self.decoding.clone())
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let result = {
            let _permit = self.slots.acquire();
            self.backend.complete(request)
        };
        if let Some(log) = &self.log {
            let record = LogRecord {
                timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64()),
                backend: self.identity(),
                prompt_sha256: request.prompt_sha256(),
                request: request.clone(),
                response: result.clone(),
            };
            let line = serde_json::to_string(&record).expect("log record serializes");
            let mut file = log.lock().expect("log poisoned");
            if let Err(e) = writeln!(file, "{line}") {
                log::warn!("request log write failed: {e}");
            }
        }
        result
    }

    /// Sends `messages` with the run's decoding settings and returns the text.
    pub fn chat(&self, messages: Vec<Message>) -> Result<String, GatewayError> {
        self.complete(&self.request(messages)).map(|r| r.content)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scripted() -> ScriptedBackend {
        ScriptedBackend::new(vec![ScriptRule::user_contains("Pick up a pillow", "1. move_to('pillow', 'floor')")])
    }

    #[test]
    fn defaults_are_greedy() {
        let req = ChatRequest::new(vec![Message::user("hi")], Decoding::default());
        let json = serde_json::to_value(&req).unwrap();
        assert_eq!(json["temperature"], 0.0);
        assert_eq!(json["messages"][0]["role"], "user");
    }

    #[test]
    fn invalid_requests() {
        let gw = Gateway::new(Arc::new(scripted()), Decoding::default(), 2);
        assert!(matches!(gw.chat(vec![]), Err(GatewayError::InvalidRequest { .. })));
        let mut req = gw.request(vec![Message::user("x")]);
        req.decoding.temperature = -1.0;
        assert!(matches!(gw.complete(&req), Err(GatewayError::InvalidRequest { .. })));
    }

    #[test]
    fn log_replays_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("requests.jsonl");
        let gw = Gateway::new(Arc::new(scripted()), Decoding::default(), 1).with_log(&path).unwrap();
        let first = gw.chat(vec![Message::system("planner"), Message::user("Pick up a pillow from the floor")]).unwrap();
        let _ = gw.chat(vec![Message::user("unknown")]);

        let records = read_log(&path).unwrap();
        assert_eq!(records.len(), 2);
        assert!(records[1].response.is_err());
        let replay = Gateway::new(Arc::new(ScriptedBackend::from_log(&records)), Decoding::default(), 1);
        let again = replay.chat(vec![Message::system("planner"), Message::user("Pick up a pillow from the floor")]).unwrap();
        assert_eq!(first, again);
    }

    #[test]
    fn concurrent_calls_share_the_bound() {
        let gw = Gateway::new(Arc::new(scripted()), Decoding::default(), 2);
        std::thread::scope(|s| {
            for _ in 0..8 {
                let gw = gw.clone();
                s.spawn(move || gw.chat(vec![Message::user("Pick up a pillow")]).unwrap());
            }
        });
        assert_eq!(*gw.slots.free.lock().unwrap(), 2);
    }
}
