//! Balanced pair sampling around a retrieval cutoff, and confidence-binned
//! disagreement sampling for auditing original labels.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotator::Annotation;
use crate::corpus::{CorpusIndex, GoldLabel, QueryDocPair, Split, SplitSide};
use crate::metrics::{gold_is_relevant, PartialPolicy};
use crate::prompting::Guess;
use crate::retrieval::Ranking;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("ranking for query {0} is empty")]
    EmptyRanking(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, SamplerError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FillPolicy {
    /// Report a short side and leave the deficit.
    #[default]
    Strict,
    /// Top up a short side from the other side's leftovers.
    Fill,
}

impl std::str::FromStr for FillPolicy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "strict" => Ok(FillPolicy::Strict),
            "fill" => Ok(FillPolicy::Fill),
            other => Err(format!("unknown fill policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub inside: usize,
    pub outside: usize,
    /// How many of the missing pairs were borrowed from the other side.
    pub filled: usize,
}

impl Shortfall {
    pub fn total(&self) -> usize {
        self.inside + self.outside
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancedSample {
    pub pairs: Vec<QueryDocPair>,
    pub shortfall: Option<Shortfall>,
}

/// Per-query RNG so that queries sample independently of each other and of
/// the order they are processed in.
fn query_rng(seed: u64, query_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ crate::fnv1a(query_id.as_bytes()))
}

/// Samples up to `per_side` documents from ranks `1..=k` and as many from
/// ranks beyond `k`, without replacement. Output is sorted by rank.
pub fn balanced_sample(
    ranking: &Ranking,
    k: usize,
    per_side: usize,
    seed: u64,
    policy: FillPolicy,
) -> Result<BalancedSample> {
    if ranking.is_empty() {
        return Err(SamplerError::EmptyRanking(ranking.query_id.clone()));
    }
    if k == 0 || per_side == 0 {
        return Err(SamplerError::Precondition("k and per_side must be at least 1".into()));
    }
    let n = ranking.len();
    let cut = k.min(n);
    let mut rng = query_rng(seed, &ranking.query_id);
    let mut inside: Vec<usize> = (0..cut).collect();
    let mut outside: Vec<usize> = (cut..n).collect();
    inside.shuffle(&mut rng);
    outside.shuffle(&mut rng);

    let want_in = per_side.min(inside.len());
    let want_out = per_side.min(outside.len());
    let short_in = per_side - want_in;
    let short_out = per_side - want_out;
    let mut chosen: Vec<usize> = inside[..want_in].to_vec();
    chosen.extend_from_slice(&outside[..want_out]);

    let mut filled = 0;
    if policy == FillPolicy::Fill {
        let spare_out = &outside[want_out..];
        let borrow = short_in.min(spare_out.len());
        chosen.extend_from_slice(&spare_out[..borrow]);
        let spare_in = &inside[want_in..];
        let borrow_in = short_out.min(spare_in.len());
        chosen.extend_from_slice(&spare_in[..borrow_in]);
        filled = borrow + borrow_in;
    }
    let shortfall = (short_in + short_out > 0).then(|| {
        let s = Shortfall {
            inside: short_in,
            outside: short_out,
            filled,
        };
        tracing::warn!(query_id = %ranking.query_id, inside = s.inside, outside = s.outside, filled, "balanced sample is short");
        s
    });

    chosen.sort_unstable();
    let pairs = chosen
        .into_iter()
        .map(|i| QueryDocPair {
            query_id: ranking.query_id.clone(),
            doc_id: ranking.entries[i].0.clone(),
            retriever_rank: Some(i as u32 + 1),
            split: SplitSide::Unassigned,
        })
        .collect();
    Ok(BalancedSample { pairs, shortfall })
}

/// Tags each pair with its side of `split`, looking up the chunk's report.
/// Pairs whose chunk is unknown stay unassigned.
pub fn assign_splits(pairs: &mut [QueryDocPair], split: &Split, index: &CorpusIndex) {
    for p in pairs {
        p.split = index
            .chunks
            .get(&p.doc_id)
            .map_or(SplitSide::Unassigned, |c| split.side_of(&p.query_id, &c.report_id));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Relevant,
    Irrelevant,
}

impl From<Guess> for Verdict {
    fn from(g: Guess) -> Self {
        match g {
            Guess::Yes => Verdict::Relevant,
            Guess::No => Verdict::Irrelevant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConfidenceBin {
    #[serde(rename = "lt90")]
    Lt90,
    #[serde(rename = "b90_95")]
    B90To95,
    #[serde(rename = "b95_98")]
    B95To98,
    #[serde(rename = "b98_100")]
    B98To100,
}

impl ConfidenceBin {
    pub const ALL: [ConfidenceBin; 4] = [
        ConfidenceBin::Lt90,
        ConfidenceBin::B90To95,
        ConfidenceBin::B95To98,
        ConfidenceBin::B98To100,
    ];

    /// Half-open bins `[0, .90) [.90, .95) [.95, .98) [.98, 1]`.
    pub fn of(confidence: f64) -> ConfidenceBin {
        if confidence < 0.90 {
            ConfidenceBin::Lt90
        } else if confidence < 0.95 {
            ConfidenceBin::B90To95
        } else if confidence < 0.98 {
            ConfidenceBin::B95To98
        } else {
            ConfidenceBin::B98To100
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub query_id: String,
    pub doc_id: String,
    pub model_guess: Verdict,
    pub original_label: Verdict,
    pub confidence: f64,
    pub bin: ConfidenceBin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedSample {
    pub disagreements: Vec<Disagreement>,
    /// Bins holding fewer than `per_bin` disagreements, with their sizes.
    pub short_bins: BTreeMap<String, usize>,
}

/// Original binary label per pair. Pairs without a gold row count as
/// irrelevant, which is how unannotated pairs are treated downstream.
pub fn original_labels(gold: &[GoldLabel], policy: PartialPolicy) -> HashMap<(String, String), Verdict> {
    gold.iter()
        .map(|g| {
            let v = if gold_is_relevant(g, policy) {
                Verdict::Relevant
            } else {
                Verdict::Irrelevant
            };
            ((g.query_id.clone(), g.doc_id.clone()), v)
        })
        .collect()
}

/// Keeps pairs where the model disagrees with the original label and
/// samples up to `per_bin` from each confidence bin.
pub fn stratify_disagreements(
    annotations: &[Annotation],
    originals: &HashMap<(String, String), Verdict>,
    per_bin: usize,
    seed: u64,
) -> StratifiedSample {
    let mut bins: BTreeMap<ConfidenceBin, Vec<Disagreement>> = BTreeMap::new();
    for a in annotations {
        let model_guess = Verdict::from(a.guess);
        let original_label = originals
            .get(&(a.query_id.clone(), a.doc_id.clone()))
            .copied()
            .unwrap_or(Verdict::Irrelevant);
        if model_guess == original_label {
            continue;
        }
        let confidence = a.confidence();
        let bin = ConfidenceBin::of(confidence);
        bins.entry(bin).or_default().push(Disagreement {
            query_id: a.query_id.clone(),
            doc_id: a.doc_id.clone(),
            model_guess,
            original_label,
            confidence,
            bin,
        });
    }
    let mut out = Vec::new();
    let mut short_bins = BTreeMap::new();
    for (i, bin) in ConfidenceBin::ALL.iter().enumerate() {
        let mut members = bins.remove(bin).unwrap_or_default();
        if members.len() < per_bin {
            let name = serde_json::to_value(bin).expect("bin serializes");
            let name = name.as_str().expect("bin is a string").to_string();
            tracing::warn!(bin = %name, size = members.len(), per_bin, "confidence bin is short");
            short_bins.insert(name, members.len());
        }
        members.sort_by(|a, b| (&a.query_id, &a.doc_id).cmp(&(&b.query_id, &b.doc_id)));
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        members.shuffle(&mut rng);
        members.truncate(per_bin);
        members.sort_by(|a, b| (&a.query_id, &a.doc_id).cmp(&(&b.query_id, &b.doc_id)));
        out.extend(members);
    }
    StratifiedSample {
        disagreements: out,
        short_bins,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HumanVerdict {
    /// The model's guess was right; the original label was wrong.
    Model,
    Original,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditedDisagreement {
    #[serde(flatten)]
    pub disagreement: Disagreement,
    pub human_verdict: HumanVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCell {
    pub correct: usize,
    pub total: usize,
    /// Percentage of items where the model was right.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub relevant: Option<AccuracyCell>,
    pub irrelevant: Option<AccuracyCell>,
    pub all: Option<AccuracyCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub cutoff: f64,
    /// Confidence above the cutoff.
    pub high: AccuracyRow,
    /// Confidence at or below the cutoff.
    pub low: AccuracyRow,
    /// Share of all annotations with confidence above the cutoff, when
    /// the full annotation set was supplied.
    pub fraction_above: Option<f64>,
}

fn cell(items: &[&AuditedDisagreement]) -> Option<AccuracyCell> {
    if items.is_empty() {
        return None;
    }
    let correct = items
        .iter()
        .filter(|a| a.human_verdict == HumanVerdict::Model)
        .count();
    Some(AccuracyCell {
        correct,
        total: items.len(),
        accuracy: 100.0 * correct as f64 / items.len() as f64,
    })
}

fn row(items: &[&AuditedDisagreement]) -> AccuracyRow {
    let by = |v: Verdict| -> Vec<&AuditedDisagreement> {
        items
            .iter()
            .copied()
            .filter(|a| a.disagreement.original_label == v)
            .collect()
    };
    AccuracyRow {
        relevant: cell(&by(Verdict::Relevant)),
        irrelevant: cell(&by(Verdict::Irrelevant)),
        all: cell(items),
    }
}

/// Model accuracy on audited disagreements, split at `cutoff` and by the
/// original label. Empty strata are absent.
pub fn disagreement_accuracy_table(
    audited: &[AuditedDisagreement],
    cutoff: f64,
    all_confidences: Option<&[f64]>,
) -> AccuracyTable {
    let (high, low): (Vec<&AuditedDisagreement>, Vec<&AuditedDisagreement>) =
        audited.iter().partition(|a| a.disagreement.confidence > cutoff);
    let fraction_above = all_confidences
        .filter(|c| !c.is_empty())
        .map(|c| c.iter().filter(|&&x| x > cutoff).count() as f64 / c.len() as f64);
    AccuracyTable {
        cutoff,
        high: row(&high),
        low: row(&low),
        fraction_above,
    }
}
