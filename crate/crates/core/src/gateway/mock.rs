//! Local fixture server speaking the same wire shape as the real
//! endpoints. Used by tests, examples and `diras mock-server`.
//!
//! A fixtures directory may contain:
//!
//! * `chat.jsonl`: one [`ChatRule`] per line. The first rule whose `when`
//!   substrings all occur in the prompt (system and user joined) answers.
//! * `mock.json`: optional [`MockSettings`].

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::io::{read_json, read_jsonl, IoError};

fn default_fail_status() -> u16 {
    429
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRule {
    #[serde(default)]
    pub when: Vec<String>,
    pub reply: String,
    /// Log-probability per trimmed token surface.
    #[serde(default)]
    pub token_logprobs: BTreeMap<String, f64>,
    /// Probability per trimmed token surface; converted with `ln`.
    #[serde(default)]
    pub token_probs: BTreeMap<String, f64>,
    /// Alternatives listed under `top_logprobs` for a surface.
    #[serde(default)]
    pub alternatives: BTreeMap<String, Vec<(String, f64)>>,
    #[serde(default)]
    pub default_logprob: f64,
    #[serde(default)]
    pub fail_first: usize,
    #[serde(default = "default_fail_status")]
    pub fail_status: u16,
    #[serde(default)]
    pub no_logprobs: bool,
}

impl ChatRule {
    pub fn reply(text: impl Into<String>) -> Self {
        ChatRule {
            when: Vec::new(),
            reply: text.into(),
            token_logprobs: BTreeMap::new(),
            token_probs: BTreeMap::new(),
            alternatives: BTreeMap::new(),
            default_logprob: 0.0,
            fail_first: 0,
            fail_status: 429,
            no_logprobs: false,
        }
    }

    pub fn when(mut self, needle: impl Into<String>) -> Self {
        self.when.push(needle.into());
        self
    }

    pub fn token_prob(mut self, surface: impl Into<String>, p: f64) -> Self {
        self.token_probs.insert(surface.into(), p);
        self
    }

    pub fn failing_first(mut self, n: usize, status: u16) -> Self {
        self.fail_first = n;
        self.fail_status = status;
        self
    }

    pub fn without_logprobs(mut self) -> Self {
        self.no_logprobs = true;
        self
    }

    fn matches(&self, prompt: &str) -> bool {
        self.when.iter().all(|w| prompt.contains(w.as_str()))
    }

    fn logprob_of(&self, surface: &str) -> f64 {
        let key = surface.trim();
        if let Some(lp) = self.token_logprobs.get(key) {
            *lp
        } else if let Some(p) = self.token_probs.get(key) {
            p.ln()
        } else {
            self.default_logprob
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockSettings {
    pub embedding_dimension: usize,
    pub supports_logprobs: bool,
}

impl Default for MockSettings {
    fn default() -> Self {
        MockSettings {
            embedding_dimension: 256,
            supports_logprobs: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MockFixtures {
    pub rules: Vec<ChatRule>,
    pub settings: MockSettings,
}

impl MockFixtures {
    pub fn load(dir: &Path) -> Result<Self, IoError> {
        let chat = dir.join("chat.jsonl");
        let rules = if chat.exists() { read_jsonl(&chat)? } else { Vec::new() };
        let settings_path = dir.join("mock.json");
        let settings = if settings_path.exists() {
            read_json(&settings_path)?
        } else {
            MockSettings::default()
        };
        Ok(MockFixtures { rules, settings })
    }

    pub fn with_rule(mut self, rule: ChatRule) -> Self {
        self.rules.push(rule);
        self
    }
}

/// Hashed bag-of-words vector: lowercase alphanumeric words, FNV-1a
/// bucketed into `dim` counts.
pub fn bag_of_words(text: &str, dim: usize) -> Vec<f64> {
    let dim = dim.max(1);
    let mut v = vec![0.0; dim];
    for word in text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
    {
        let h = crate::fnv1a(word.to_lowercase().as_bytes());
        v[(h % dim as u64) as usize] += 1.0;
    }
    v
}

struct State {
    fixtures: MockFixtures,
    hits: Mutex<Vec<usize>>,
    received: Mutex<Vec<Value>>,
    token_re: Regex,
}

impl State {
    fn chat(&self, body: &Value) -> (u16, Value) {
        let prompt: String = body["messages"]
            .as_array()
            .map(|ms| {
                ms.iter()
                    .filter_map(|m| m["content"].as_str())
                    .collect::<Vec<_>>()
                    .join("\n")
            })
            .unwrap_or_default();
        let Some(idx) = self.fixtures.rules.iter().position(|r| r.matches(&prompt)) else {
            return (404, json!({ "error": { "message": "no fixture matches the prompt" } }));
        };
        let rule = &self.fixtures.rules[idx];
        let seen = {
            let mut hits = self.hits.lock().unwrap_or_else(|e| e.into_inner());
            hits[idx] += 1;
            hits[idx]
        };
        if seen <= rule.fail_first {
            return (rule.fail_status, json!({ "error": { "message": "injected failure" } }));
        }

        let want = body["logprobs"].as_bool().unwrap_or(false);
        let top_n = body["top_logprobs"].as_u64().unwrap_or(0) as usize;
        let logprobs = if want && self.fixtures.settings.supports_logprobs && !rule.no_logprobs {
            let tokens: Vec<Value> = self
                .token_re
                .find_iter(&rule.reply)
                .map(|m| {
                    let surface = m.as_str();
                    let lp = rule.logprob_of(surface);
                    let top: Vec<Value> = rule
                        .alternatives
                        .get(surface.trim())
                        .map(|alts| {
                            alts.iter()
                                .take(top_n)
                                .map(|(t, l)| json!({ "token": t, "logprob": l }))
                                .collect()
                        })
                        .unwrap_or_default();
                    json!({ "token": surface, "logprob": lp, "top_logprobs": top })
                })
                .collect();
            json!({ "content": tokens })
        } else {
            Value::Null
        };
        let completion_tokens = self.token_re.find_iter(&rule.reply).count();
        let prompt_tokens = prompt.split_whitespace().count();
        (
            200,
            json!({
                "id": "mock",
                "object": "chat.completion",
                "model": body["model"],
                "choices": [{
                    "index": 0,
                    "message": { "role": "assistant", "content": rule.reply },
                    "logprobs": logprobs,
                    "finish_reason": "stop",
                }],
                "usage": {
                    "prompt_tokens": prompt_tokens,
                    "completion_tokens": completion_tokens,
                    "total_tokens": prompt_tokens + completion_tokens,
                },
            }),
        )
    }

    fn embeddings(&self, body: &Value) -> (u16, Value) {
        let inputs: Vec<&str> = match &body["input"] {
            Value::String(s) => vec![s.as_str()],
            Value::Array(xs) => xs.iter().filter_map(Value::as_str).collect(),
            _ => Vec::new(),
        };
        if inputs.is_empty() {
            return (400, json!({ "error": { "message": "input is empty" } }));
        }
        let dim = self.fixtures.settings.embedding_dimension;
        let data: Vec<Value> = inputs
            .iter()
            .enumerate()
            .map(|(i, t)| json!({ "object": "embedding", "index": i, "embedding": bag_of_words(t, dim) }))
            .collect();
        (200, json!({ "object": "list", "model": body["model"], "data": data }))
    }

    fn handle(&self, mut req: tiny_http::Request) {
        let mut raw = String::new();
        let (status, reply) = if req.as_reader().read_to_string(&mut raw).is_err() {
            (400, json!({ "error": { "message": "unreadable body" } }))
        } else {
            match serde_json::from_str::<Value>(&raw) {
                Err(e) => (400, json!({ "error": { "message": e.to_string() } })),
                Ok(body) => {
                    self.received
                        .lock()
                        .unwrap_or_else(|e| e.into_inner())
                        .push(body.clone());
                    let url = req.url().to_string();
                    if *req.method() != tiny_http::Method::Post {
                        (405, json!({ "error": { "message": "POST only" } }))
                    } else if url.ends_with("/chat/completions") {
                        self.chat(&body)
                    } else if url.ends_with("/embeddings") {
                        self.embeddings(&body)
                    } else {
                        (404, json!({ "error": { "message": format!("unknown path {url}") } }))
                    }
                }
            }
        };
        let header = tiny_http::Header::from_bytes("Content-Type", "application/json").expect("static header");
        let resp = tiny_http::Response::from_string(reply.to_string())
            .with_status_code(status)
            .with_header(header);
        if let Err(e) = req.respond(resp) {
            tracing::debug!(error = %e, "mock client went away");
        }
    }
}

/// Running fixture server bound to a loopback port. Stops on drop.
pub struct MockServer {
    server: Arc<tiny_http::Server>,
    state: Arc<State>,
    stop: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
    addr: String,
}

impl MockServer {
    pub fn start(fixtures: MockFixtures) -> std::io::Result<Self> {
        Self::bind("127.0.0.1:0", fixtures)
    }

    pub fn bind(addr: &str, fixtures: MockFixtures) -> std::io::Result<Self> {
        let server = tiny_http::Server::http(addr).map_err(std::io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("mock server has no ip address"))?
            .to_string();
        let state = Arc::new(State {
            hits: Mutex::new(vec![0; fixtures.rules.len()]),
            fixtures,
            received: Mutex::new(Vec::new()),
            token_re: Regex::new(r"\s*\S+").expect("valid regex"),
        });
        let server = Arc::new(server);
        let stop = Arc::new(AtomicBool::new(false));
        let workers = (0..8)
            .map(|_| {
                let (server, state, stop) = (server.clone(), state.clone(), stop.clone());
                std::thread::spawn(move || {
                    while !stop.load(Ordering::SeqCst) {
                        match server.recv() {
                            Ok(req) => state.handle(req),
                            Err(_) => break,
                        }
                    }
                })
            })
            .collect();
        Ok(MockServer {
            server,
            state,
            stop,
            workers,
            addr,
        })
    }

    pub fn addr(&self) -> &str {
        &self.addr
    }

    /// Base URL to put in a gateway config.
    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    /// Request bodies received so far, in arrival order.
    pub fn received(&self) -> Vec<Value> {
        self.state
            .received
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }

    /// Blocks the calling thread until the process is killed.
    pub fn serve_forever(self) -> ! {
        loop {
            std::thread::park();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bag_of_words_is_case_insensitive() {
        assert_eq!(bag_of_words("Net Zero", 32), bag_of_words("net zero!", 32));
        assert_eq!(bag_of_words("a b a", 16).iter().sum::<f64>(), 3.0);
    }

    #[test]
    fn rule_matching_requires_all_needles() {
        let r = ChatRule::reply("x").when("alpha").when("beta");
        assert!(r.matches("alpha and beta"));
        assert!(!r.matches("alpha only"));
        assert!(ChatRule::reply("x").matches("anything"));
    }

    #[test]
    fn fixtures_load_from_dir() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("chat.jsonl"),
            "{\"when\":[\"q\"],\"reply\":\"[Guess]: No\",\"token_probs\":{\"No\":0.6}}\n",
        )
        .unwrap();
        std::fs::write(dir.path().join("mock.json"), "{\"embedding_dimension\": 8}").unwrap();
        let fx = MockFixtures::load(dir.path()).unwrap();
        assert_eq!(fx.rules.len(), 1);
        assert_eq!(fx.settings.embedding_dimension, 8);
        assert!(fx.settings.supports_logprobs);
        assert!((fx.rules[0].logprob_of(" No").exp() - 0.6).abs() < 1e-12);
    }
}
