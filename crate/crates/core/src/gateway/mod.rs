//! Chat-completion and embedding client with response caching, retries
//! and an in-flight request bound.
//!
//! The wire protocol is the common OpenAI-style JSON shape:
//! `POST {base}/chat/completions` and `POST {base}/embeddings`.

pub mod cache;
pub mod mock;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::DiskCache;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("endpoint capability missing: {0}")]
    Capability(String),
    #[error("could not decode endpoint response: {0}")]
    Decode(String),
    #[error("response cache: {0}")]
    Cache(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GatewayError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    pub user: String,
    #[serde(default)]
    pub temperature: f64,
    pub max_output_tokens: u32,
    #[serde(default)]
    pub want_logprobs: bool,
    /// Alternatives requested per generated token. Only sent with logprobs.
    #[serde(default)]
    pub top_logprobs: u8,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, user: impl Into<String>) -> Self {
        ChatRequest {
            model: model.into(),
            system: None,
            user: user.into(),
            temperature: 0.0,
            max_output_tokens: 512,
            want_logprobs: false,
            top_logprobs: 0,
        }
    }

    pub fn with_system(mut self, system: impl Into<String>) -> Self {
        self.system = Some(system.into());
        self
    }

    pub fn with_logprobs(mut self, top: u8) -> Self {
        self.want_logprobs = true;
        self.top_logprobs = top;
        self
    }

    pub fn with_max_output_tokens(mut self, n: u32) -> Self {
        self.max_output_tokens = n;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprob {
    pub surface: String,
    pub logprob: f64,
    /// Top alternatives at this position, including the realized token when
    /// the endpoint lists it.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub top: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub tokens: Option<Vec<TokenLogprob>>,
    pub model: String,
    pub cached: bool,
    pub usage: Usage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingResponse {
    pub vectors: Vec<Vec<f64>>,
}

impl EmbeddingResponse {
    pub fn dimension(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }
}

/// Stable content hash of a chat request.
pub fn cache_key(req: &ChatRequest) -> String {
    let canonical = json!({
        "kind": "chat",
        "model": req.model,
        "system": req.system,
        "user": req.user,
        "temperature": req.temperature,
        "max_output_tokens": req.max_output_tokens,
        "want_logprobs": req.want_logprobs,
        "top_logprobs": if req.want_logprobs { req.top_logprobs } else { 0 },
    });
    sha256_hex(&canonical)
}

pub fn embedding_cache_key(model: &str, text: &str) -> String {
    sha256_hex(&json!({ "kind": "embedding", "model": model, "input": text }))
}

fn sha256_hex(v: &Value) -> String {
    // serde_json maps are ordered, so this serialization is canonical.
    let bytes = serde_json::to_vec(v).expect("json value serializes");
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub embedding_model: String,
    pub cache_dir: Option<PathBuf>,
    pub max_in_flight: usize,
    pub max_attempts: u32,
    pub backoff_base: Duration,
    pub timeout: Duration,
    pub embedding_batch: usize,
}

impl GatewayConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        GatewayConfig {
            base_url: base_url.into(),
            api_key: None,
            embedding_model: "text-embedding".into(),
            cache_dir: None,
            max_in_flight: 8,
            max_attempts: 4,
            backoff_base: Duration::from_millis(250),
            timeout: Duration::from_secs(120),
            embedding_batch: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GatewayStats {
    pub network_calls: u64,
    pub cache_hits: u64,
    pub retries: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Default)]
struct Counters {
    network_calls: AtomicU64,
    cache_hits: AtomicU64,
    retries: AtomicU64,
    prompt_tokens: AtomicU64,
    completion_tokens: AtomicU64,
}

struct Limiter {
    max: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(max: usize) -> Self {
        Limiter {
            max: max.max(1),
            used: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut used = self.used.lock().unwrap_or_else(|e| e.into_inner());
        while *used >= self.max {
            used = self.freed.wait(used).unwrap_or_else(|e| e.into_inner());
        }
        *used += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut used = self.0.used.lock().unwrap_or_else(|e| e.into_inner());
        *used -= 1;
        self.0.freed.notify_one();
    }
}

/// Shareable client handle. All methods take `&self`.
pub struct Gateway {
    cfg: GatewayConfig,
    agent: ureq::Agent,
    cache: Option<DiskCache>,
    limiter: Limiter,
    counters: Counters,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("base_url", &self.cfg.base_url)
            .field("cache", &self.cache.as_ref().map(|c| c.dir().to_path_buf()))
            .finish()
    }
}

impl Gateway {
    pub fn new(cfg: GatewayConfig) -> Result<Self> {
        let cache = cfg.cache_dir.as_ref().map(DiskCache::open).transpose()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(cfg.timeout))
            .build()
            .into();
        Ok(Gateway {
            limiter: Limiter::new(cfg.max_in_flight),
            cfg,
            agent,
            cache,
            counters: Counters::default(),
        })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.cfg
    }

    pub fn stats(&self) -> GatewayStats {
        let c = &self.counters;
        GatewayStats {
            network_calls: c.network_calls.load(Ordering::Relaxed),
            cache_hits: c.cache_hits.load(Ordering::Relaxed),
            retries: c.retries.load(Ordering::Relaxed),
            prompt_tokens: c.prompt_tokens.load(Ordering::Relaxed),
            completion_tokens: c.completion_tokens.load(Ordering::Relaxed),
        }
    }

    pub fn chat_complete(&self, req: &ChatRequest) -> Result<ChatResponse> {
        if req.user.trim().is_empty() {
            return Err(GatewayError::Precondition("user prompt is empty".into()));
        }
        if req.temperature != 0.0 {
            tracing::warn!(requested = req.temperature, "temperature clamped to 0");
        }
        let key = cache_key(req);
        if let Some(raw) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            self.counters.cache_hits.fetch_add(1, Ordering::Relaxed);
            let mut resp = decode_chat(&raw, req)?;
            resp.cached = true;
            return Ok(resp);
        }

        let mut messages = Vec::new();
        if let Some(system) = &req.system {
            messages.push(json!({ "role": "system", "content": system }));
        }
        messages.push(json!({ "role": "user", "content": req.user }));
        let mut body = json!({
            "model": req.model,
            "messages": messages,
            "temperature": 0.0,
            "max_tokens": req.max_output_tokens,
        });
        if req.want_logprobs {
            body["logprobs"] = json!(true);
            if req.top_logprobs > 0 {
                body["top_logprobs"] = json!(req.top_logprobs);
            }
        }

        let raw = self.post("chat/completions", &body)?;
        let resp = decode_chat(&raw, req)?;
        self.counters
            .prompt_tokens
            .fetch_add(resp.usage.prompt_tokens, Ordering::Relaxed);
        self.counters
            .completion_tokens
            .fetch_add(resp.usage.completion_tokens, Ordering::Relaxed);
        if let Some(cache) = &self.cache {
            cache.put(&key, &raw)?;
        }
        Ok(resp)
    }

    /// Embeds `texts` with the configured embedding model. Vectors align
    /// with the inputs; duplicate texts are fetched once.
    pub fn embed(&self, texts: &[&str]) -> Result<EmbeddingResponse> {
        if texts.is_empty() {
            return Err(GatewayError::Precondition("embed called with no texts".into()));
        }
        if let Some(i) = texts.iter().position(|t| t.is_empty()) {
            return Err(GatewayError::Precondition(format!("text {i} is empty")));
        }
        let model = &self.cfg.embedding_model;
        let mut known: HashMap<&str, Vec<f64>> = HashMap::new();
        let mut missing: Vec<&str> = Vec::new();
        for &t in texts {
            if known.contains_key(t) || missing.contains(&t) {
                continue;
            }
            let cached = self
                .cache
                .as_ref()
                .and_then(|c| c.get(&embedding_cache_key(model, t)))
                .and_then(|raw| serde_json::from_str::<Vec<f64>>(&raw).ok());
            match cached {
                Some(v) => {
                    self.counters.cache_hits.fetch_add(1, Ordering::Relaxed);
                    known.insert(t, v);
                }
                None => missing.push(t),
            }
        }

        for batch in missing.chunks(self.cfg.embedding_batch.max(1)) {
            let raw = self.post("embeddings", &json!({ "model": model, "input": batch }))?;
            let vectors = decode_embeddings(&raw, batch.len())?;
            for (&t, v) in batch.iter().zip(vectors) {
                if let Some(cache) = &self.cache {
                    let body = serde_json::to_string(&v).expect("vector serializes");
                    cache.put(&embedding_cache_key(model, t), &body)?;
                }
                known.insert(t, v);
            }
        }

        let vectors: Vec<Vec<f64>> = texts.iter().map(|t| known[t].clone()).collect();
        let dim = vectors[0].len();
        if dim == 0 || vectors.iter().any(|v| v.len() != dim) {
            return Err(GatewayError::Decode("embedding dimensions are empty or unequal".into()));
        }
        Ok(EmbeddingResponse { vectors })
    }

    fn post(&self, path: &str, body: &Value) -> Result<String> {
        let url = format!("{}/{}", self.cfg.base_url.trim_end_matches('/'), path);
        let attempts = self.cfg.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            if attempt > 1 {
                self.counters.retries.fetch_add(1, Ordering::Relaxed);
                let factor = 1u32 << (attempt - 2).min(10);
                let wait = (self.cfg.backoff_base * factor).min(Duration::from_secs(30));
                tracing::warn!(attempt, wait_ms = wait.as_millis() as u64, reason = %last, "retrying");
                std::thread::sleep(wait);
            }
            let outcome = {
                let _permit = self.limiter.acquire();
                self.counters.network_calls.fetch_add(1, Ordering::Relaxed);
                let mut rb = self.agent.post(&url).header("Content-Type", "application/json");
                if let Some(key) = &self.cfg.api_key {
                    rb = rb.header("Authorization", &format!("Bearer {key}"));
                }
                rb.send_json(body).and_then(|mut r| {
                    let status = r.status().as_u16();
                    r.body_mut().read_to_string().map(|text| (status, text))
                })
            };
            match outcome {
                Ok((status, text)) if (200..300).contains(&status) => return Ok(text),
                Ok((status, text)) if status == 429 || status >= 500 => {
                    last = format!("HTTP {status}");
                    let _ = text;
                }
                Ok((status, text)) => return Err(GatewayError::Http { status, body: text }),
                Err(e) => last = e.to_string(),
            }
        }
        Err(GatewayError::Transport {
            attempts,
            message: last,
        })
    }
}

#[derive(Deserialize)]
struct WireChat {
    #[serde(default)]
    model: Option<String>,
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    #[serde(default)]
    logprobs: Option<WireLogprobs>,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireLogprobs {
    #[serde(default)]
    content: Option<Vec<WireToken>>,
}

#[derive(Deserialize)]
struct WireToken {
    token: String,
    logprob: f64,
    #[serde(default)]
    top_logprobs: Vec<WireAlt>,
}

#[derive(Deserialize)]
struct WireAlt {
    token: String,
    logprob: f64,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

fn nonpositive(lp: f64) -> Result<f64> {
    if !lp.is_finite() && lp != f64::NEG_INFINITY {
        return Err(GatewayError::Decode(format!("logprob {lp} is not a number")));
    }
    if lp > 1e-6 {
        return Err(GatewayError::Decode(format!("logprob {lp} is positive")));
    }
    Ok(lp.min(0.0))
}

fn decode_chat(raw: &str, req: &ChatRequest) -> Result<ChatResponse> {
    let wire: WireChat = serde_json::from_str(raw).map_err(|e| GatewayError::Decode(e.to_string()))?;
    let choice = wire
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| GatewayError::Decode("response has no choices".into()))?;
    let text = choice.message.content.unwrap_or_default();
    let tokens = if req.want_logprobs {
        let content = choice.logprobs.and_then(|l| l.content).ok_or_else(|| {
            GatewayError::Capability(format!(
                "model {} returned no token logprobs; Tok calibration needs an endpoint that supports them",
                req.model
            ))
        })?;
        let mut out = Vec::with_capacity(content.len());
        for t in content {
            let top = t
                .top_logprobs
                .into_iter()
                .map(|a| nonpositive(a.logprob).map(|lp| (a.token, lp)))
                .collect::<Result<Vec<_>>>()?;
            out.push(TokenLogprob {
                surface: t.token,
                logprob: nonpositive(t.logprob)?,
                top,
            });
        }
        Some(out)
    } else {
        None
    };
    let usage = wire.usage.map_or(Usage::default(), |u| Usage {
        prompt_tokens: u.prompt_tokens,
        completion_tokens: u.completion_tokens,
    });
    Ok(ChatResponse {
        text,
        tokens,
        model: wire.model.unwrap_or_else(|| req.model.clone()),
        cached: false,
        usage,
    })
}

#[derive(Deserialize)]
struct WireEmbeddings {
    data: Vec<WireEmbedding>,
}

#[derive(Deserialize)]
struct WireEmbedding {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f64>,
}

fn decode_embeddings(raw: &str, expected: usize) -> Result<Vec<Vec<f64>>> {
    let wire: WireEmbeddings = serde_json::from_str(raw).map_err(|e| GatewayError::Decode(e.to_string()))?;
    if wire.data.len() != expected {
        return Err(GatewayError::Decode(format!(
            "expected {expected} embeddings, got {}",
            wire.data.len()
        )));
    }
    let mut slots: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (pos, item) in wire.data.into_iter().enumerate() {
        slots.insert(item.index.unwrap_or(pos), item.embedding);
    }
    if slots.len() != expected || slots.keys().copied().ne(0..expected) {
        return Err(GatewayError::Decode("embedding indices are not 0..n".into()));
    }
    Ok(slots.into_values().collect())
}
