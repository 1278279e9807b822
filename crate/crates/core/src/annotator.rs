//! Pointwise annotation with verbalized and token-level confidence, the
//! listwise sliding-window baseline, and per-query relevance summaries.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusIndex, DocumentChunk, Query, QueryDocPair};
use crate::gateway::{ChatRequest, ChatResponse, Gateway, GatewayError, GatewayStats};
use crate::metrics::ScoredPair;
use crate::prompting::{
    parse_listwise_response, parse_pointwise_response, render_listwise_prompt, render_pointwise_prompt,
    ConfidencePhrasing, Guess, PromptError, PromptVariant,
};
use crate::retrieval::{Ranking, RetrievalError};

const GUESS_LABEL: &str = "[Guess]:";

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("confidence extraction failed: {0}")]
    Extraction(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

impl AnnotateError {
    /// Errors that would repeat for every pair, so a corpus run stops.
    pub fn is_fatal(&self) -> bool {
        match self {
            AnnotateError::Config(_) => true,
            AnnotateError::Prompt(PromptError::NotPointwise(_)) => true,
            AnnotateError::Gateway(GatewayError::Capability(_)) => true,
            AnnotateError::Gateway(GatewayError::Http { status, .. }) => matches!(status, 401 | 403),
            _ => false,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            AnnotateError::Config(_) => "config",
            AnnotateError::Prompt(_) => "prompt",
            AnnotateError::Gateway(_) => "gateway",
            AnnotateError::Extraction(_) => "extraction",
            AnnotateError::MissingInput(_) => "missing_input",
            AnnotateError::Retrieval(_) => "retrieval",
        }
    }
}

pub type Result<T> = std::result::Result<T, AnnotateError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationMode {
    /// Verbalized confidence only. Never requests logprobs.
    Ask,
    /// Token probability of the guess. Requires logprobs.
    Tok,
    #[default]
    Both,
}

impl std::str::FromStr for CalibrationMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ask" => Ok(CalibrationMode::Ask),
            "tok" => Ok(CalibrationMode::Tok),
            "both" => Ok(CalibrationMode::Both),
            other => Err(format!("unknown calibration mode `{other}`")),
        }
    }
}

impl CalibrationMode {
    fn wants_tok(self) -> bool {
        self != CalibrationMode::Ask
    }

    /// Source used for the relevance score: token probability whenever it
    /// is collected.
    pub fn default_source(self) -> ScoreSource {
        if self.wants_tok() {
            ScoreSource::Tok
        } else {
            ScoreSource::Ask
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSource {
    Ask,
    Tok,
}

impl std::str::FromStr for ScoreSource {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ask" => Ok(ScoreSource::Ask),
            "tok" => Ok(ScoreSource::Tok),
            other => Err(format!("unknown score source `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorConfig {
    pub model: String,
    pub variant: PromptVariant,
    pub calibration: CalibrationMode,
    /// Defaults to [`CalibrationMode::default_source`].
    pub source: Option<ScoreSource>,
    /// Divide the guess token probability by the Yes/No mass among the
    /// listed alternatives.
    pub renormalize_tok: bool,
    pub top_logprobs: u8,
    pub max_output_tokens: u32,
}

impl AnnotatorConfig {
    pub fn new(model: impl Into<String>, variant: PromptVariant) -> Self {
        AnnotatorConfig {
            model: model.into(),
            variant,
            calibration: CalibrationMode::Both,
            source: None,
            renormalize_tok: false,
            top_logprobs: 5,
            max_output_tokens: 512,
        }
    }

    fn check(&self) -> Result<ScoreSource> {
        if !self.variant.is_pointwise() {
            return Err(AnnotateError::Config(format!(
                "variant {} is not pointwise",
                self.variant
            )));
        }
        let source = self.source.unwrap_or(self.calibration.default_source());
        if source == ScoreSource::Tok && !self.calibration.wants_tok() {
            return Err(AnnotateError::Config(
                "score source tok needs calibration tok or both".into(),
            ));
        }
        if source == ScoreSource::Ask && self.calibration == CalibrationMode::Tok {
            return Err(AnnotateError::Config(
                "score source ask needs calibration ask or both".into(),
            ));
        }
        Ok(source)
    }
}

/// One pointwise judgment. Confidences are confidence in `guess`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub query_id: String,
    pub doc_id: String,
    pub guess: Guess,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence_ask: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence_tok: Option<f64>,
    pub relevance_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub model: String,
    pub variant: PromptVariant,
}

impl Annotation {
    /// Confidence in the guess implied by the relevance score.
    pub fn confidence(&self) -> f64 {
        match self.guess {
            Guess::Yes => self.relevance_score,
            Guess::No => 1.0 - self.relevance_score,
        }
    }

    pub fn to_scored(&self) -> ScoredPair {
        ScoredPair {
            query_id: self.query_id.clone(),
            doc_id: self.doc_id.clone(),
            predicted_relevant: self.guess == Guess::Yes,
            confidence: self.confidence(),
            relevance_score: self.relevance_score,
        }
    }
}

/// Yes keeps the confidence, No takes its complement.
pub fn derive_relevance_score(guess: Guess, confidence: f64) -> f64 {
    match guess {
        Guess::Yes => confidence,
        Guess::No => 1.0 - confidence,
    }
}

/// Probability of the first yes/no token generated after the final
/// `[Guess]:` label.
pub fn extract_tok_confidence(response: &ChatResponse) -> Result<f64> {
    locate_guess_token(response).map(|(_, _, lp)| lp.exp()).and_then(nonzero)
}

fn nonzero(p: f64) -> Result<f64> {
    if p > 0.0 {
        Ok(p.min(1.0))
    } else {
        Err(AnnotateError::Extraction("guess token has zero probability".into()))
    }
}

/// Returns (token index, guess, logprob).
fn locate_guess_token(response: &ChatResponse) -> Result<(usize, Guess, f64)> {
    let tokens = response.tokens.as_ref().ok_or_else(|| {
        AnnotateError::Gateway(GatewayError::Capability(
            "response carries no token logprobs".into(),
        ))
    })?;
    let text: String = tokens.iter().map(|t| t.surface.as_str()).collect();
    let label_end = text
        .rfind(GUESS_LABEL)
        .map(|p| p + GUESS_LABEL.len())
        .ok_or_else(|| AnnotateError::Extraction("no [Guess]: label in the token stream".into()))?;
    let mut offset = 0;
    for (i, t) in tokens.iter().enumerate() {
        let start = offset;
        offset += t.surface.len();
        if offset <= label_end {
            continue;
        }
        let visible = if start < label_end {
            &t.surface[label_end - start..]
        } else {
            t.surface.as_str()
        };
        if let Some(g) = Guess::from_surface(visible.trim()) {
            return Ok((i, g, t.logprob));
        }
    }
    Err(AnnotateError::Extraction(
        "no Yes/No token after the final [Guess]: label".into(),
    ))
}

/// Guess probability divided by the total Yes/No probability among the
/// alternatives listed at that position.
fn renormalized_tok(response: &ChatResponse) -> Result<f64> {
    let (i, guess, lp) = locate_guess_token(response)?;
    let tok = &response.tokens.as_ref().expect("located above")[i];
    let mut mass: HashMap<Guess, f64> = HashMap::new();
    let mut listed_self = false;
    for (surface, alt_lp) in &tok.top {
        if let Some(g) = Guess::from_surface(surface.trim()) {
            *mass.entry(g).or_default() += alt_lp.exp();
            listed_self |= surface == &tok.surface;
        }
    }
    if !listed_self {
        *mass.entry(guess).or_default() += lp.exp();
    }
    let total: f64 = mass.values().sum();
    nonzero(mass.get(&guess).copied().unwrap_or(0.0) / total)
}

/// Renders, calls and parses one pair.
pub fn annotate_pair(
    pair: &QueryDocPair,
    query: &Query,
    chunk: &DocumentChunk,
    cfg: &AnnotatorConfig,
    gateway: &Gateway,
) -> Result<Annotation> {
    let source = cfg.check()?;
    let prompt = render_pointwise_prompt(&query.text, query.definition.as_ref(), &chunk.text, &cfg.variant)?;
    let mut req = ChatRequest::new(&cfg.model, prompt).with_max_output_tokens(cfg.max_output_tokens);
    if cfg.calibration.wants_tok() {
        req = req.with_logprobs(if cfg.renormalize_tok { cfg.top_logprobs } else { 0 });
    }
    let resp = gateway.chat_complete(&req)?;
    let parsed = parse_pointwise_response(&resp.text, &cfg.variant)?;

    let confidence_ask = (cfg.calibration != CalibrationMode::Tok).then(|| {
        match cfg.variant.confidence_phrasing {
            ConfidencePhrasing::AskConfidence => parsed.confidence,
            // stated P(helpful); express it as confidence in the guess
            ConfidencePhrasing::AskProbability => derive_relevance_score(parsed.guess, parsed.confidence),
        }
    });
    let confidence_tok = if cfg.calibration.wants_tok() {
        let (_, tok_guess, _) = locate_guess_token(&resp)?;
        if tok_guess != parsed.guess {
            return Err(AnnotateError::Extraction(format!(
                "token guess {} disagrees with parsed guess {}",
                tok_guess.as_str(),
                parsed.guess.as_str()
            )));
        }
        Some(if cfg.renormalize_tok {
            renormalized_tok(&resp)?
        } else {
            extract_tok_confidence(&resp)?
        })
    } else {
        None
    };
    let primary = match source {
        ScoreSource::Ask => confidence_ask,
        ScoreSource::Tok => confidence_tok,
    }
    .expect("source checked against calibration mode");

    Ok(Annotation {
        query_id: pair.query_id.clone(),
        doc_id: pair.doc_id.clone(),
        guess: parsed.guess,
        confidence_ask,
        confidence_tok,
        relevance_score: derive_relevance_score(parsed.guess, primary),
        reason: parsed.reason,
        model: cfg.model.clone(),
        variant: cfg.variant,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub query_id: String,
    pub doc_id: String,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    pub pairs: usize,
    pub annotated: usize,
    pub failed: usize,
    pub gateway: GatewayStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRun {
    pub annotations: Vec<Annotation>,
    pub errors: Vec<LedgerEntry>,
    pub stats: RunStats,
}

/// Annotates `pairs` on a pool of `parallelism` threads. Output keeps the
/// input order. Per-pair failures go to the ledger; a fatal error stops
/// the run and is returned.
pub fn annotate_corpus(
    pairs: &[QueryDocPair],
    index: &CorpusIndex,
    cfg: &AnnotatorConfig,
    gateway: &Gateway,
    parallelism: usize,
) -> Result<CorpusRun> {
    if parallelism == 0 {
        return Err(AnnotateError::Config("parallelism must be at least 1".into()));
    }
    cfg.check()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| AnnotateError::Config(e.to_string()))?;
    let abort = AtomicBool::new(false);
    let done = AtomicUsize::new(0);
    let total = pairs.len();

    let results: Vec<Option<Result<Annotation>>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|pair| {
                if abort.load(Ordering::Relaxed) {
                    return None;
                }
                let out = lookup(pair, index).and_then(|(q, c)| annotate_pair(pair, q, c, cfg, gateway));
                if out.as_ref().is_err_and(AnnotateError::is_fatal) {
                    abort.store(true, Ordering::Relaxed);
                }
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                if n.is_multiple_of(100) || n == total {
                    tracing::info!(done = n, total, "annotation progress");
                }
                Some(out)
            })
            .collect()
    });

    let mut annotations = Vec::with_capacity(total);
    let mut errors = Vec::new();
    for (pair, res) in pairs.iter().zip(results) {
        match res {
            None => {}
            Some(Ok(a)) => annotations.push(a),
            Some(Err(e)) if e.is_fatal() => return Err(e),
            Some(Err(e)) => {
                tracing::warn!(query_id = %pair.query_id, doc_id = %pair.doc_id, error = %e, "pair failed");
                errors.push(LedgerEntry {
                    query_id: pair.query_id.clone(),
                    doc_id: pair.doc_id.clone(),
                    kind: e.kind().to_string(),
                    message: e.to_string(),
                });
            }
        }
    }
    let stats = RunStats {
        pairs: total,
        annotated: annotations.len(),
        failed: errors.len(),
        gateway: gateway.stats(),
    };
    Ok(CorpusRun {
        annotations,
        errors,
        stats,
    })
}

fn lookup<'a>(pair: &QueryDocPair, index: &'a CorpusIndex) -> Result<(&'a Query, &'a DocumentChunk)> {
    let q = index
        .queries
        .get(&pair.query_id)
        .ok_or_else(|| AnnotateError::MissingInput(format!("query {}", pair.query_id)))?;
    let c = index
        .chunks
        .get(&pair.doc_id)
        .ok_or_else(|| AnnotateError::MissingInput(format!("chunk {}", pair.doc_id)))?;
    Ok((q, c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ListwiseOutcome {
    pub ranking: Ranking,
    /// Windows whose reply could not be parsed and were left as they were.
    pub malformed_windows: usize,
    pub windows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub window: usize,
    pub step: usize,
}

impl WindowSpec {
    /// Half-open index ranges visited, from the tail toward the head.
    pub fn positions(&self, n: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        if n < 2 {
            return out;
        }
        let mut end = n;
        loop {
            let start = end.saturating_sub(self.window);
            out.push((start, end));
            if start == 0 {
                break;
            }
            end -= self.step;
        }
        out
    }
}

/// Sliding-window listwise reranking of `initial`. Returns the final order
/// with scores `(n - i) / n`.
pub fn listwise_rerank(
    query: &Query,
    initial: &Ranking,
    chunks: &HashMap<String, DocumentChunk>,
    spec: WindowSpec,
    with_definition: bool,
    model: &str,
    gateway: &Gateway,
) -> Result<ListwiseOutcome> {
    if spec.window < 2 || spec.step == 0 || spec.step > spec.window {
        return Err(AnnotateError::Config(format!(
            "need window >= 2 and 1 <= step <= window, got {}/{}",
            spec.window, spec.step
        )));
    }
    let definition = if with_definition {
        Some(query.definition.as_ref().ok_or_else(|| {
            AnnotateError::MissingInput(format!("definition for query {}", query.id))
        })?)
    } else {
        None
    };
    let mut order: Vec<String> = initial.doc_ids().map(str::to_string).collect();
    let texts: Vec<&str> = order
        .iter()
        .map(|d| {
            chunks
                .get(d)
                .map(|c| c.text.as_str())
                .ok_or_else(|| AnnotateError::MissingInput(format!("chunk {d}")))
        })
        .collect::<Result<_>>()?;
    let text_of: HashMap<String, &str> = order.iter().cloned().zip(texts).collect();
    let positions = spec.positions(order.len());
    let mut malformed = 0;
    for &(start, end) in &positions {
        let window: Vec<String> = order[start..end].to_vec();
        let passages: Vec<&str> = window.iter().map(|d| text_of[d]).collect();
        let prompt = render_listwise_prompt(&query.text, &passages, definition)?;
        let req = ChatRequest::new(model, prompt.user).with_system(prompt.system);
        let resp = gateway.chat_complete(&req)?;
        match parse_listwise_response(&resp.text, window.len()) {
            Ok(perm) => {
                for (slot, id) in perm.iter().enumerate() {
                    order[start + slot] = window[id - 1].clone();
                }
            }
            Err(e) => {
                malformed += 1;
                tracing::warn!(query_id = %query.id, start, end, error = %e, "unparseable window left in prior order");
            }
        }
    }
    let n = order.len() as f64;
    let entries = order
        .into_iter()
        .enumerate()
        .map(|(i, d)| (d, (n - i as f64) / n))
        .collect();
    Ok(ListwiseOutcome {
        ranking: Ranking {
            query_id: initial.query_id.clone(),
            entries,
        },
        malformed_windows: malformed,
        windows: positions.len(),
    })
}

/// Mean relevance score per query, highest first.
pub fn relevant_info_proxy(annotations: &[Annotation]) -> Vec<(String, f64)> {
    let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for a in annotations {
        let e = acc.entry(a.query_id.as_str()).or_default();
        e.0 += a.relevance_score;
        e.1 += 1;
    }
    let mut out: Vec<(String, f64)> = acc
        .into_iter()
        .map(|(q, (sum, n))| (q.to_string(), sum / n as f64))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

pub fn proxy_to_csv(rows: &[(String, f64)]) -> String {
    let mut out = String::from("query_id,mean_relevance\n");
    for (q, v) in rows {
        out.push_str(&format!("{q},{v}\n"));
    }
    out
}
