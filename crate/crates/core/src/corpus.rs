//! Core data model, corpus validation, chunk normalization and
//! leakage-free train/test splitting.

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CorpusError {
    #[error("split impossible: need at least 2 {what}, got {got}")]
    SplitImpossible { what: &'static str, got: usize },
    #[error("test fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("min_tokens must be positive")]
    InvalidMinTokens,
}

/// A user question, optionally paired with explicit relevance criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<RelevanceDefinition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    #[default]
    Generated,
    /// Generated with expert-annotated examples in the prompt.
    Improved,
    /// The constant definition used for QA-style datasets.
    Fixed,
    Human,
}

/// What counts as relevant for a query: a short explanation of the
/// question plus example information an analyst would be looking for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceDefinition {
    pub meaning: String,
    #[serde(default)]
    pub examples: Vec<String>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl RelevanceDefinition {
    /// Renders the definition the way it is shown to annotators.
    pub fn to_background_text(&self) -> String {
        let mut out = format!("Meaning of the question: {}", self.meaning.trim());
        if !self.examples.is_empty() {
            out.push_str("\n\nExamples of information that the question is looking for:");
            for (i, ex) in self.examples.iter().enumerate() {
                out.push_str(&format!("\n{}. {}", i + 1, ex.trim()));
            }
        }
        out
    }
}

pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// Whitespace-delimited token count, the default counting rule.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokens;

impl TokenCounter for WhitespaceTokens {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawChunk")]
pub struct DocumentChunk {
    pub id: String,
    pub report_id: String,
    pub text: String,
    pub token_count: usize,
}

#[derive(Deserialize)]
struct RawChunk {
    id: String,
    report_id: String,
    text: String,
    #[serde(default)]
    token_count: Option<usize>,
}

impl From<RawChunk> for DocumentChunk {
    fn from(raw: RawChunk) -> Self {
        let token_count = raw
            .token_count
            .unwrap_or_else(|| WhitespaceTokens.count(&raw.text));
        DocumentChunk {
            id: raw.id,
            report_id: raw.report_id,
            text: raw.text,
            token_count,
        }
    }
}

impl DocumentChunk {
    pub fn new(
        id: impl Into<String>,
        report_id: impl Into<String>,
        text: impl Into<String>,
        counter: &dyn TokenCounter,
    ) -> Self {
        let text = text.into();
        DocumentChunk {
            id: id.into(),
            report_id: report_id.into(),
            token_count: counter.count(&text),
            text,
        }
    }

    pub fn recount(&mut self, counter: &dyn TokenCounter) {
        self.token_count = counter.count(&self.text);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SplitSide {
    Train,
    Test,
    #[default]
    Unassigned,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QueryDocPair {
    pub query_id: String,
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retriever_rank: Option<u32>,
    #[serde(default)]
    pub split: SplitSide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryLabel {
    Relevant,
    Partial,
    Irrelevant,
}

/// Human ground truth for one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub query_id: String,
    pub doc_id: String,
    /// Graded relevance gain in [0, 1].
    pub grade: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary: Option<BinaryLabel>,
    #[serde(default)]
    pub uncertain: bool,
}

/// Disjoint train/test partitions over queries and reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_queries: BTreeSet<String>,
    pub test_queries: BTreeSet<String>,
    pub train_reports: BTreeSet<String>,
    pub test_reports: BTreeSet<String>,
    pub seed: u64,
}

impl Split {
    /// A pair is train (test) only when both its query and its report are.
    pub fn side_of(&self, query_id: &str, report_id: &str) -> SplitSide {
        if self.train_queries.contains(query_id) && self.train_reports.contains(report_id) {
            SplitSide::Train
        } else if self.test_queries.contains(query_id) && self.test_reports.contains(report_id) {
            SplitSide::Test
        } else {
            SplitSide::Unassigned
        }
    }

    /// True when either side of the pair was held out for testing.
    pub fn touches_test(&self, query_id: &str, report_id: &str) -> bool {
        self.test_queries.contains(query_id) || self.test_reports.contains(report_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    pub chunks: Vec<DocumentChunk>,
    /// Reports whose final chunk stayed below the threshold: (report_id, chunk id).
    pub short_tails: Vec<(String, String)>,
}

/// Greedily concatenates adjacent chunks of the same report until each
/// reaches `min_tokens`. Texts are joined with a single newline and merged
/// ids with `+`. Only the final chunk of a report may stay short.
pub fn merge_short_chunks(
    chunks: &[DocumentChunk],
    min_tokens: usize,
) -> Result<MergeOutcome, CorpusError> {
    if min_tokens == 0 {
        return Err(CorpusError::InvalidMinTokens);
    }
    let mut out = Vec::new();
    let mut short_tails = Vec::new();
    let mut pending: Option<DocumentChunk> = None;

    let flush_tail = |pending: &mut Option<DocumentChunk>,
                      out: &mut Vec<DocumentChunk>,
                      short_tails: &mut Vec<(String, String)>| {
        if let Some(p) = pending.take() {
            if p.token_count < min_tokens {
                tracing::warn!(report_id = %p.report_id, chunk = %p.id, tokens = p.token_count, "short final chunk");
                short_tails.push((p.report_id.clone(), p.id.clone()));
            }
            out.push(p);
        }
    };

    for chunk in chunks {
        if pending
            .as_ref()
            .is_some_and(|p| p.report_id != chunk.report_id)
        {
            flush_tail(&mut pending, &mut out, &mut short_tails);
        }
        let acc = match pending.take() {
            None => chunk.clone(),
            Some(mut p) => {
                p.id = format!("{}+{}", p.id, chunk.id);
                p.text = format!("{}\n{}", p.text, chunk.text);
                p.token_count += chunk.token_count;
                p
            }
        };
        if acc.token_count >= min_tokens {
            out.push(acc);
        } else {
            pending = Some(acc);
        }
    }
    flush_tail(&mut pending, &mut out, &mut short_tails);
    Ok(MergeOutcome {
        chunks: out,
        short_tails,
    })
}

/// Number of held-out items: round(fraction * n), kept within [1, n - 1].
fn test_size(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n - 1)
}

fn partition(ids: &[String], fraction: f64, rng: &mut ChaCha8Rng) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut sorted: Vec<&String> = ids.iter().collect::<BTreeSet<_>>().into_iter().collect();
    sorted.shuffle(rng);
    let n_test = test_size(fraction, sorted.len());
    let test = sorted[..n_test].iter().map(|s| (*s).clone()).collect();
    let train = sorted[n_test..].iter().map(|s| (*s).clone()).collect();
    (train, test)
}

/// Splits queries and reports independently so that no test query or
/// test report is seen in training. Input order does not matter.
pub fn split_train_test(
    query_ids: &[String],
    report_ids: &[String],
    query_test_fraction: f64,
    report_test_fraction: f64,
    seed: u64,
) -> Result<Split, CorpusError> {
    for f in [query_test_fraction, report_test_fraction] {
        if !(f > 0.0 && f < 1.0) {
            return Err(CorpusError::InvalidFraction(f));
        }
    }
    let distinct_q = query_ids.iter().collect::<HashSet<_>>().len();
    if distinct_q < 2 {
        return Err(CorpusError::SplitImpossible {
            what: "queries",
            got: distinct_q,
        });
    }
    let distinct_r = report_ids.iter().collect::<HashSet<_>>().len();
    if distinct_r < 2 {
        return Err(CorpusError::SplitImpossible {
            what: "reports",
            got: distinct_r,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (train_queries, test_queries) = partition(query_ids, query_test_fraction, &mut rng);
    let (train_reports, test_reports) = partition(report_ids, report_test_fraction, &mut rng);
    Ok(Split {
        train_queries,
        test_queries,
        train_reports,
        test_reports,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    DuplicateQueryId { id: String },
    DuplicateDocId { id: String },
    EmptyQueryText { id: String },
    EmptyDocText { id: String },
    EmptyDefinition { query_id: String },
    ImprovedWithoutExamples { query_id: String },
    TokenCountMismatch { id: String, stated: usize, counted: usize },
    DanglingQuery { query_id: String, doc_id: String },
    DanglingDoc { query_id: String, doc_id: String },
    GradeOutOfRange { query_id: String, doc_id: String, grade: String },
    IrrelevantWithGrade { query_id: String, doc_id: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Collects every structural problem in a corpus. Never fails.
///
/// Document ids must be unique across the whole corpus, since pairs,
/// rankings and gold files refer to documents by id alone.
pub fn validate_corpus(
    queries: &[Query],
    chunks: &[DocumentChunk],
    gold: Option<&[GoldLabel]>,
) -> ValidationReport {
    let mut findings = Vec::new();

    let mut seen_q = HashSet::new();
    for q in queries {
        if !seen_q.insert(q.id.as_str()) {
            findings.push(Finding::DuplicateQueryId { id: q.id.clone() });
        }
        if q.text.trim().is_empty() {
            findings.push(Finding::EmptyQueryText { id: q.id.clone() });
        }
        if let Some(def) = &q.definition {
            if def.meaning.trim().is_empty() {
                findings.push(Finding::EmptyDefinition {
                    query_id: q.id.clone(),
                });
            }
            if def.provenance == Provenance::Improved && def.examples.is_empty() {
                findings.push(Finding::ImprovedWithoutExamples {
                    query_id: q.id.clone(),
                });
            }
        }
    }

    let mut seen_d = HashSet::new();
    for c in chunks {
        if !seen_d.insert(c.id.as_str()) {
            findings.push(Finding::DuplicateDocId { id: c.id.clone() });
        }
        if c.text.trim().is_empty() {
            findings.push(Finding::EmptyDocText { id: c.id.clone() });
        }
        let counted = WhitespaceTokens.count(&c.text);
        if counted != c.token_count {
            findings.push(Finding::TokenCountMismatch {
                id: c.id.clone(),
                stated: c.token_count,
                counted,
            });
        }
    }

    for g in gold.unwrap_or_default() {
        if !seen_q.contains(g.query_id.as_str()) {
            findings.push(Finding::DanglingQuery {
                query_id: g.query_id.clone(),
                doc_id: g.doc_id.clone(),
            });
        }
        if !seen_d.contains(g.doc_id.as_str()) {
            findings.push(Finding::DanglingDoc {
                query_id: g.query_id.clone(),
                doc_id: g.doc_id.clone(),
            });
        }
        if !(0.0..=1.0).contains(&g.grade) {
            findings.push(Finding::GradeOutOfRange {
                query_id: g.query_id.clone(),
                doc_id: g.doc_id.clone(),
                grade: g.grade.to_string(),
            });
        }
        if g.binary == Some(BinaryLabel::Irrelevant) && g.grade != 0.0 {
            findings.push(Finding::IrrelevantWithGrade {
                query_id: g.query_id.clone(),
                doc_id: g.doc_id.clone(),
            });
        }
    }
    ValidationReport { findings }
}

/// Id-keyed lookup over a corpus.
#[derive(Debug, Clone, Default)]
pub struct CorpusIndex {
    pub queries: HashMap<String, Query>,
    pub chunks: HashMap<String, DocumentChunk>,
}

impl CorpusIndex {
    pub fn new(queries: &[Query], chunks: &[DocumentChunk]) -> Self {
        CorpusIndex {
            queries: queries.iter().map(|q| (q.id.clone(), q.clone())).collect(),
            chunks: chunks.iter().map(|c| (c.id.clone(), c.clone())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chunk(id: &str, report: &str, tokens: usize) -> DocumentChunk {
        let text = (0..tokens).map(|i| format!("{id}w{i}")).collect::<Vec<_>>().join(" ");
        DocumentChunk::new(id, report, text, &WhitespaceTokens)
    }

    fn counts(chunks: &[DocumentChunk]) -> Vec<usize> {
        chunks.iter().map(|c| c.token_count).collect()
    }

    /// Independent oracle: walk the token counts with a running sum.
    fn greedy_oracle(counts: &[usize], min: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut acc = 0;
        for &c in counts {
            acc += c;
            if acc >= min {
                out.push(acc);
                acc = 0;
            }
        }
        if acc > 0 {
            out.push(acc);
        }
        out
    }

    #[test]
    fn merge_leaves_long_chunks_alone() {
        let input = vec![chunk("a", "r", 150), chunk("b", "r", 200)];
        let out = merge_short_chunks(&input, 120).unwrap();
        assert_eq!(out.chunks, input);
        assert!(out.short_tails.is_empty());
    }

    #[test]
    fn merge_accumulates_left_to_right() {
        let input = vec![
            chunk("a", "r", 50),
            chunk("b", "r", 60),
            chunk("c", "r", 40),
            chunk("d", "r", 200),
        ];
        assert_eq!(greedy_oracle(&[50, 60, 40, 200], 120), vec![150, 200]);
        let out = merge_short_chunks(&input, 120).unwrap();
        assert_eq!(counts(&out.chunks), vec![150, 200]);
        assert_eq!(out.chunks[0].id, "a+b+c");
        assert_eq!(
            out.chunks[0].text,
            format!("{}\n{}\n{}", input[0].text, input[1].text, input[2].text)
        );
    }

    #[test]
    fn single_short_chunk_is_flagged() {
        let out = merge_short_chunks(&[chunk("a", "r", 80)], 120).unwrap();
        assert_eq!(counts(&out.chunks), vec![80]);
        assert_eq!(out.short_tails, vec![("r".to_string(), "a".to_string())]);
    }

    #[test]
    fn merge_restarts_per_report_and_handles_empty() {
        let input = vec![chunk("a", "r1", 50), chunk("b", "r2", 60), chunk("c", "r2", 70)];
        let out = merge_short_chunks(&input, 120).unwrap();
        assert_eq!(counts(&out.chunks), vec![50, 130]);
        assert_eq!(out.short_tails.len(), 1);
        assert!(merge_short_chunks(&[], 120).unwrap().chunks.is_empty());
        assert_eq!(
            merge_short_chunks(&input, 0).unwrap_err(),
            CorpusError::InvalidMinTokens
        );
    }

    #[test]
    fn split_sizes_follow_fractions() {
        let q: Vec<String> = (0..31).map(|i| format!("q{i}")).collect();
        let r: Vec<String> = (0..80).map(|i| format!("r{i}")).collect();
        let split = split_train_test(&q, &r, 11.0 / 31.0, 30.0 / 80.0, 40).unwrap();
        assert_eq!(split.test_queries.len(), 11);
        assert_eq!(split.train_queries.len(), 20);
        assert_eq!(split.test_reports.len(), 30);
        assert_eq!(split.train_reports.len(), 50);
        assert_eq!(split, split_train_test(&q, &r, 11.0 / 31.0, 30.0 / 80.0, 40).unwrap());
    }

    #[test]
    fn split_rejects_degenerate_inputs() {
        let one = vec!["q".to_string()];
        let two = vec!["a".to_string(), "b".to_string()];
        assert!(matches!(
            split_train_test(&one, &two, 0.5, 0.5, 1),
            Err(CorpusError::SplitImpossible { what: "queries", .. })
        ));
        assert!(matches!(
            split_train_test(&two, &one, 0.5, 0.5, 1),
            Err(CorpusError::SplitImpossible { what: "reports", .. })
        ));
        assert_eq!(
            split_train_test(&two, &two, 1.0, 0.5, 1),
            Err(CorpusError::InvalidFraction(1.0))
        );
        // tiny fractions still hold out one item per side
        let s = split_train_test(&two, &two, 0.01, 0.99, 1).unwrap();
        assert_eq!((s.test_queries.len(), s.train_reports.len()), (1, 1));
    }

    fn fixture() -> (Vec<Query>, Vec<DocumentChunk>, Vec<GoldLabel>) {
        let queries = vec![Query {
            id: "q1".into(),
            text: "What is the firm's Scope 3 emission?".into(),
            definition: None,
        }];
        let chunks = vec![chunk("d1", "r1", 10), chunk("d2", "r1", 12)];
        let gold = vec![GoldLabel {
            query_id: "q1".into(),
            doc_id: "d1".into(),
            grade: 1.0,
            binary: Some(BinaryLabel::Relevant),
            uncertain: false,
        }];
        (queries, chunks, gold)
    }

    #[test]
    fn validation_flags_problems() {
        let (mut queries, chunks, mut gold) = fixture();
        assert!(validate_corpus(&queries, &chunks, Some(&gold)).is_ok());

        gold.push(GoldLabel {
            doc_id: "nope".into(),
            ..gold[0].clone()
        });
        let report = validate_corpus(&queries, &chunks, Some(&gold));
        assert_eq!(
            report.findings,
            vec![Finding::DanglingDoc {
                query_id: "q1".into(),
                doc_id: "nope".into()
            }]
        );

        gold.pop();
        queries.push(queries[0].clone());
        let report = validate_corpus(&queries, &chunks, Some(&gold));
        assert_eq!(report.findings, vec![Finding::DuplicateQueryId { id: "q1".into() }]);
    }

    #[test]
    fn validation_checks_grades() {
        let (queries, chunks, mut gold) = fixture();
        gold[0].grade = 1.5;
        gold.push(GoldLabel {
            query_id: "q1".into(),
            doc_id: "d2".into(),
            grade: 0.5,
            binary: Some(BinaryLabel::Irrelevant),
            uncertain: true,
        });
        let report = validate_corpus(&queries, &chunks, Some(&gold));
        assert_eq!(report.findings.len(), 2);
    }

    #[test]
    fn missing_token_count_is_filled_on_load() {
        let c: DocumentChunk =
            serde_json::from_str(r#"{"id":"d","report_id":"r","text":"one two  three"}"#).unwrap();
        assert_eq!(c.token_count, 3);
    }

    proptest! {
        #[test]
        fn merge_preserves_text_and_is_idempotent(
            spec in prop::collection::vec((0usize..3, 1usize..80), 0..20),
            min in 1usize..150,
        ) {
            let input: Vec<DocumentChunk> = spec
                .iter()
                .enumerate()
                .map(|(i, (r, n))| chunk(&format!("c{i}"), &format!("r{r}"), *n))
                .collect();
            let once = merge_short_chunks(&input, min).unwrap().chunks;
            let joined_in: Vec<String> = input.iter().flat_map(|c| c.text.split_whitespace().map(String::from).collect::<Vec<_>>()).collect();
            let joined_out: Vec<String> = once.iter().flat_map(|c| c.text.split_whitespace().map(String::from).collect::<Vec<_>>()).collect();
            prop_assert_eq!(joined_in, joined_out);
            for c in &once {
                prop_assert_eq!(c.token_count, WhitespaceTokens.count(&c.text));
            }
            // only the last chunk of each report run may be short
            for w in once.windows(2) {
                if w[0].report_id == w[1].report_id {
                    prop_assert!(w[0].token_count >= min);
                }
            }
            let twice = merge_short_chunks(&once, min).unwrap().chunks;
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn split_is_disjoint_and_pure(nq in 2usize..40, nr in 2usize..40, fq in 0.05f64..0.95, fr in 0.05f64..0.95, seed: u64) {
            let q: Vec<String> = (0..nq).map(|i| format!("q{i}")).collect();
            let r: Vec<String> = (0..nr).map(|i| format!("r{i}")).collect();
            let s = split_train_test(&q, &r, fq, fr, seed).unwrap();
            prop_assert!(s.train_queries.is_disjoint(&s.test_queries));
            prop_assert!(s.train_reports.is_disjoint(&s.test_reports));
            prop_assert_eq!(s.train_queries.len() + s.test_queries.len(), nq);
            let mut rev = q.clone();
            rev.reverse();
            prop_assert_eq!(s, split_train_test(&rev, &r, fq, fr, seed).unwrap());
        }
    }
}
