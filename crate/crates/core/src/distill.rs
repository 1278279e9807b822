//! Teacher annotations to supervised fine-tuning records.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::annotator::Annotation;
use crate::corpus::{CorpusIndex, Split};
use crate::io::{self, IoError};
use crate::prompting::{
    format_pointwise_answer, render_pointwise_prompt, template_digests, ConfidencePhrasing, Guess, ParsedPointwise,
    PromptError, PromptVariant, TEMPLATE_VERSION,
};

#[derive(Debug, Error)]
pub enum DistillError {
    #[error("leakage: pair ({query_id}, {doc_id}) touches the test split")]
    Leakage { query_id: String, doc_id: String },
    #[error("annotation ({query_id}, {doc_id}) was made with variant {found}, export uses {expected}")]
    VariantMismatch {
        query_id: String,
        doc_id: String,
        found: PromptVariant,
        expected: PromptVariant,
    },
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("no records to audit")]
    Empty,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Io(#[from] IoError),
}

pub type Result<T> = std::result::Result<T, DistillError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub query_id: String,
    pub doc_id: String,
    pub variant: PromptVariant,
    pub teacher_model: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingRecord {
    pub prompt: String,
    pub completion: String,
    pub meta: RecordMeta,
}

#[derive(Serialize, Deserialize)]
struct ChatMessage {
    role: String,
    content: String,
}

#[derive(Serialize, Deserialize)]
struct ChatRecord {
    messages: Vec<ChatMessage>,
    meta: RecordMeta,
}

impl TrainingRecord {
    /// `{"messages": [user, assistant], "meta": {...}}`
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "messages": [
                { "role": "user", "content": self.prompt },
                { "role": "assistant", "content": self.completion },
            ],
            "meta": self.meta,
        })
    }

    fn from_chat(rec: ChatRecord) -> Option<Self> {
        let content = |role: &str| {
            rec.messages
                .iter()
                .find(|m| m.role == role)
                .map(|m| m.content.clone())
        };
        Some(TrainingRecord {
            prompt: content("user")?,
            completion: content("assistant")?,
            meta: rec.meta,
        })
    }

    /// Guess stated in the completion.
    pub fn guess(&self) -> Option<Guess> {
        crate::prompting::parse_pointwise_response(&self.completion, &self.meta.variant)
            .ok()
            .map(|p| p.guess)
    }
}

pub fn read_training_records(path: &Path) -> Result<Vec<TrainingRecord>> {
    let raw: Vec<ChatRecord> = io::read_jsonl(path)?;
    raw.into_iter()
        .map(|r| {
            let (q, d) = (r.meta.query_id.clone(), r.meta.doc_id.clone());
            TrainingRecord::from_chat(r)
                .ok_or_else(|| DistillError::MissingInput(format!("messages for ({q}, {d})")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub records: usize,
    pub skipped_missing_reason: usize,
    pub yes: usize,
    pub no: usize,
    pub yes_fraction: f64,
    pub variant: PromptVariant,
    pub teacher_models: BTreeSet<String>,
    pub split_seed: u64,
    pub template_version: String,
    pub template_digests: BTreeMap<String, String>,
}

/// The value written after the confidence label.
fn target_confidence(a: &Annotation, variant: &PromptVariant) -> f64 {
    match variant.confidence_phrasing {
        ConfidencePhrasing::AskConfidence => a.confidence(),
        ConfidencePhrasing::AskProbability => a.relevance_score,
    }
}

/// Builds records without writing. Every pair must be train-only; a pair
/// touching the test split fails the whole export.
pub fn build_training_records(
    annotations: &[Annotation],
    split: &Split,
    index: &CorpusIndex,
    variant: &PromptVariant,
) -> Result<(Vec<TrainingRecord>, usize)> {
    let mut records = Vec::with_capacity(annotations.len());
    let mut skipped = 0;
    for a in annotations {
        let chunk = index
            .chunks
            .get(&a.doc_id)
            .ok_or_else(|| DistillError::MissingInput(format!("chunk {}", a.doc_id)))?;
        if split.touches_test(&a.query_id, &chunk.report_id)
            || split.side_of(&a.query_id, &chunk.report_id) != crate::corpus::SplitSide::Train
        {
            return Err(DistillError::Leakage {
                query_id: a.query_id.clone(),
                doc_id: a.doc_id.clone(),
            });
        }
        if a.variant != *variant {
            return Err(DistillError::VariantMismatch {
                query_id: a.query_id.clone(),
                doc_id: a.doc_id.clone(),
                found: a.variant,
                expected: *variant,
            });
        }
        let query = index
            .queries
            .get(&a.query_id)
            .ok_or_else(|| DistillError::MissingInput(format!("query {}", a.query_id)))?;
        if variant.cot && a.reason.as_deref().is_none_or(|r| r.trim().is_empty()) {
            tracing::warn!(query_id = %a.query_id, doc_id = %a.doc_id, "reasoning variant without a reason; record skipped");
            skipped += 1;
            continue;
        }
        let prompt = render_pointwise_prompt(&query.text, query.definition.as_ref(), &chunk.text, variant)?;
        let completion = format_pointwise_answer(
            &ParsedPointwise {
                reason: a.reason.clone(),
                guess: a.guess,
                confidence: target_confidence(a, variant),
                clamped_from: None,
            },
            variant,
        );
        records.push(TrainingRecord {
            prompt,
            completion,
            meta: RecordMeta {
                query_id: a.query_id.clone(),
                doc_id: a.doc_id.clone(),
                variant: *variant,
                teacher_model: a.model.clone(),
            },
        });
    }
    Ok((records, skipped))
}

/// Writes `train.jsonl`-style records to `out_path` and returns the
/// manifest. Nothing is written when any pair leaks.
pub fn export_training_data(
    annotations: &[Annotation],
    split: &Split,
    index: &CorpusIndex,
    variant: &PromptVariant,
    out_path: &Path,
) -> Result<ExportManifest> {
    let (records, skipped) = build_training_records(annotations, split, index, variant)?;
    let lines: Vec<serde_json::Value> = records.iter().map(TrainingRecord::to_json).collect();
    io::write_jsonl(out_path, &lines)?;
    let yes = annotations_yes(&records);
    let no = records.len() - yes;
    Ok(ExportManifest {
        records: records.len(),
        skipped_missing_reason: skipped,
        yes,
        no,
        yes_fraction: if records.is_empty() { 0.0 } else { yes as f64 / records.len() as f64 },
        variant: *variant,
        teacher_models: records.iter().map(|r| r.meta.teacher_model.clone()).collect(),
        split_seed: split.seed,
        template_version: TEMPLATE_VERSION.to_string(),
        template_digests: template_digests(),
    })
}

fn annotations_yes(records: &[TrainingRecord]) -> usize {
    records.iter().filter(|r| r.guess() == Some(Guess::Yes)).count()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub yes: usize,
    pub no: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub yes: usize,
    pub no: usize,
    pub yes_fraction: f64,
    pub band: (f64, f64),
    pub flagged: bool,
    pub per_query: BTreeMap<String, Counts>,
    /// Expected queries with no records at all.
    pub empty_queries: Vec<String>,
    /// Queries whose own Yes fraction falls outside the band.
    pub flagged_queries: Vec<String>,
}

pub const DEFAULT_BAND: (f64, f64) = (0.25, 0.75);

/// Yes/No counts overall and per query, flagging fractions outside `band`.
pub fn audit_balance(records: &[TrainingRecord], expected_queries: &[String], band: (f64, f64)) -> Result<BalanceReport> {
    if records.is_empty() {
        return Err(DistillError::Empty);
    }
    let mut per_query: BTreeMap<String, Counts> = expected_queries
        .iter()
        .map(|q| (q.clone(), Counts::default()))
        .collect();
    for r in records {
        let c = per_query.entry(r.meta.query_id.clone()).or_default();
        match r.guess() {
            Some(Guess::Yes) => c.yes += 1,
            Some(Guess::No) => c.no += 1,
            None => tracing::warn!(query_id = %r.meta.query_id, doc_id = %r.meta.doc_id, "completion has no guess"),
        }
    }
    let in_band = |c: &Counts| {
        let n = c.yes + c.no;
        n > 0 && {
            let f = c.yes as f64 / n as f64;
            f >= band.0 && f <= band.1
        }
    };
    let total = per_query.values().fold(Counts::default(), |acc, c| Counts {
        yes: acc.yes + c.yes,
        no: acc.no + c.no,
    });
    let empty_queries = per_query
        .iter()
        .filter(|(_, c)| c.yes + c.no == 0)
        .map(|(q, _)| q.clone())
        .collect();
    let flagged_queries = per_query
        .iter()
        .filter(|(_, c)| c.yes + c.no > 0 && !in_band(c))
        .map(|(q, _)| q.clone())
        .collect();
    let n = total.yes + total.no;
    Ok(BalanceReport {
        yes: total.yes,
        no: total.no,
        yes_fraction: if n == 0 { 0.0 } else { total.yes as f64 / n as f64 },
        band,
        flagged: !in_band(&total),
        per_query,
        empty_queries,
        flagged_queries,
    })
}
