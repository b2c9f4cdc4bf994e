//! Chat-completions transport for the judge and synthesizer endpoints.
//!
//! Requests follow the widely used `POST {url}` chat-completions shape:
//!
//! ```json
//! {"model": "m", "temperature": 0.0,
//!  "messages": [{"role": "user", "content": [
//!     {"type": "text", "text": "..."},
//!     {"type": "image_url", "image_url": {"url": "data:image/png;base64,..."}}]}]}
//! ```
//!
//! The response text is read from `choices[0].message.content`. The JSON
//! schema for request bodies ships as `schemas/chat_request.schema.json`.

use std::collections::{HashMap, VecDeque};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};

pub const ENV_URL: &str = "MUSCLELAB_ENDPOINT_URL";
pub const ENV_MODEL: &str = "MUSCLELAB_MODEL";
pub const ENV_API_KEY: &str = "MUSCLELAB_API_KEY";
pub const ENV_TIMEOUT: &str = "MUSCLELAB_TIMEOUT_S";
pub const DEFAULT_TIMEOUT_S: f64 = 120.0;

pub const REQUEST_SCHEMA: &str = include_str!("../schemas/chat_request.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentPart {
    Text { text: String },
    ImageUrl { image_url: ImageUrl },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageUrl {
    pub url: String,
}

impl ContentPart {
    pub fn text(s: impl Into<String>) -> Self {
        ContentPart::Text { text: s.into() }
    }

    pub fn png(bytes: &[u8]) -> Self {
        let b64 = base64::engine::general_purpose::STANDARD.encode(bytes);
        ContentPart::ImageUrl { image_url: ImageUrl { url: format!("data:image/png;base64,{b64}") } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: Vec<ContentPart>,
}

impl ChatMessage {
    pub fn user(content: Vec<ContentPart>) -> Self {
        Self { role: "user".into(), content }
    }

    pub fn system(text: impl Into<String>) -> Self {
        Self { role: "system".into(), content: vec![ContentPart::text(text)] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("endpoint not configured: set {0}")]
    NotConfigured(&'static str),
    #[error("http error: {0}")]
    Http(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Response(String),
    #[error("no recorded response for request (model {model}, {messages} messages)")]
    ReplayMiss { model: String, messages: usize },
    #[error("transcript {path}: {detail}")]
    Transcript { path: PathBuf, detail: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Sends one chat request and returns the assistant's text.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointConfig {
    pub url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl EndpointConfig {
    pub fn from_env() -> Result<Self, TransportError> {
        let url = std::env::var(ENV_URL).map_err(|_| TransportError::NotConfigured(ENV_URL))?;
        let model = std::env::var(ENV_MODEL).map_err(|_| TransportError::NotConfigured(ENV_MODEL))?;
        let api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        let secs = std::env::var(ENV_TIMEOUT).ok().and_then(|s| s.parse::<f64>().ok()).unwrap_or(DEFAULT_TIMEOUT_S);
        Ok(Self { url, model, api_key, timeout: Duration::from_secs_f64(secs.max(1.0)) })
    }
}

pub struct HttpTransport {
    config: EndpointConfig,
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(config: EndpointConfig) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| TransportError::Http(e.to_string()))?;
        Ok(Self { config, client })
    }

    pub fn model(&self) -> &str {
        &self.config.model
    }
}

/// Extracts `choices[0].message.content` from a response body.
pub fn response_text(body: &str) -> Result<String, TransportError> {
    let v: serde_json::Value = serde_json::from_str(body).map_err(|e| TransportError::Response(e.to_string()))?;
    let content = &v["choices"][0]["message"]["content"];
    if let Some(s) = content.as_str() {
        return Ok(s.to_string());
    }
    if let Some(parts) = content.as_array() {
        let text: Vec<&str> = parts.iter().filter_map(|p| p["text"].as_str()).collect();
        if !text.is_empty() {
            return Ok(text.join(""));
        }
    }
    Err(TransportError::Response("missing choices[0].message.content".into()))
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut req = self.client.post(&self.config.url).json(request);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| TransportError::Http(e.to_string()))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| TransportError::Http(e.to_string()))?;
        if !status.is_success() {
            return Err(TransportError::Status { status: status.as_u16(), body });
        }
        response_text(&body)
    }
}

/// One logged exchange; transcripts are JSON lines of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub request: ChatRequest,
    pub response: String,
}

/// Forwards to an inner transport and appends every exchange to a JSON-lines file.
pub struct RecordingTransport<T> {
    inner: T,
    path: PathBuf,
    lock: Mutex<()>,
}

impl<T: ChatTransport> RecordingTransport<T> {
    pub fn new(inner: T, path: impl Into<PathBuf>) -> Self {
        Self { inner, path: path.into(), lock: Mutex::new(()) }
    }
}

impl<T: ChatTransport> ChatTransport for RecordingTransport<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let response = self.inner.complete(request)?;
        let line = serde_json::to_string(&Exchange { request: request.clone(), response: response.clone() })
            .expect("exchange serializes");
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(dir) = self.path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        writeln!(f, "{line}")?;
        Ok(response)
    }
}

/// Answers requests from recorded transcripts. Identical requests are
/// answered in the order they were recorded.
pub struct ReplayTransport {
    queue: Mutex<HashMap<String, VecDeque<String>>>,
}

impl ReplayTransport {
    pub fn from_exchanges(exchanges: impl IntoIterator<Item = Exchange>) -> Self {
        let mut map: HashMap<String, VecDeque<String>> = HashMap::new();
        for ex in exchanges {
            map.entry(request_key(&ex.request)).or_default().push_back(ex.response);
        }
        Self { queue: Mutex::new(map) }
    }

    /// Loads every `*.jsonl` file under `dir`, recursively, in sorted path order.
    pub fn from_dir(dir: &Path) -> Result<Self, TransportError> {
        let mut files = Vec::new();
        collect_jsonl(dir, &mut files)?;
        files.sort();
        let mut exchanges = Vec::new();
        for path in files {
            exchanges.extend(read_transcript(&path)?);
        }
        Ok(Self::from_exchanges(exchanges))
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap_or_else(|e| e.into_inner()).values().map(|q| q.len()).sum()
    }
}

fn collect_jsonl(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_jsonl(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "jsonl") {
            out.push(path);
        }
    }
    Ok(())
}

pub fn read_transcript(path: &Path) -> Result<Vec<Exchange>, TransportError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ex = serde_json::from_str(&line).map_err(|e| TransportError::Transcript {
            path: path.to_path_buf(),
            detail: format!("line {}: {e}", i + 1),
        })?;
        out.push(ex);
    }
    Ok(out)
}

fn request_key(request: &ChatRequest) -> String {
    serde_json::to_string(request).expect("request serializes")
}

impl ChatTransport for ReplayTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut q = self.queue.lock().unwrap_or_else(|e| e.into_inner());
        q.get_mut(&request_key(request)).and_then(|v| v.pop_front()).ok_or_else(|| TransportError::ReplayMiss {
            model: request.model.clone(),
            messages: request.messages.len(),
        })
    }
}

/// Returns canned responses in order; for tests and offline dry runs.
pub struct ScriptedTransport {
    responses: Mutex<VecDeque<String>>,
    pub requests: Mutex<Vec<ChatRequest>>,
}

impl ScriptedTransport {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self {
            responses: Mutex::new(responses.into_iter().map(Into::into).collect()),
            requests: Mutex::new(Vec::new()),
        }
    }
}

impl ChatTransport for ScriptedTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self.requests.lock().unwrap_or_else(|e| e.into_inner()).push(request.clone());
        self.responses
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .pop_front()
            .ok_or_else(|| TransportError::Http("script exhausted".into()))
    }
}

impl<T: ChatTransport + ?Sized> ChatTransport for std::sync::Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        (**self).complete(request)
    }
}

impl<T: ChatTransport + ?Sized> ChatTransport for Box<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        (**self).complete(request)
    }
}
