use serde::{Deserialize, Serialize};

use super::{check_finite, MetricError, Result};
use crate::corpus::{BinaryLabel, GoldLabel};

/// How a gold "partially relevant" label counts for binary metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartialPolicy {
    #[default]
    AsRelevant,
    AsIrrelevant,
}

impl std::str::FromStr for PartialPolicy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "as_relevant" | "relevant" => Ok(PartialPolicy::AsRelevant),
            "as_irrelevant" | "irrelevant" => Ok(PartialPolicy::AsIrrelevant),
            other => Err(format!("unknown partial policy `{other}`")),
        }
    }
}

/// Binary relevance of a gold row. Without an explicit label the grade
/// decides: 1 is relevant, strictly between 0 and 1 is partial.
pub fn gold_is_relevant(gold: &GoldLabel, policy: PartialPolicy) -> bool {
    let label = gold.binary.unwrap_or(if gold.grade >= 1.0 {
        BinaryLabel::Relevant
    } else if gold.grade > 0.0 {
        BinaryLabel::Partial
    } else {
        BinaryLabel::Irrelevant
    });
    match label {
        BinaryLabel::Relevant => true,
        BinaryLabel::Partial => policy == PartialPolicy::AsRelevant,
        BinaryLabel::Irrelevant => false,
    }
}

/// Average precision of `scores` as a detector of `positives`.
///
/// Items are visited in descending score order; equal scores keep their
/// input order.
pub fn average_precision(scores: &[f64], positives: &[bool]) -> Result<f64> {
    if scores.len() != positives.len() {
        return Err(MetricError::LengthMismatch {
            left: scores.len(),
            right: positives.len(),
        });
    }
    check_finite(scores, "score")?;
    let n_pos = positives.iter().filter(|&&p| p).count();
    if n_pos == 0 {
        return Err(MetricError::Undefined(
            "average precision needs at least one positive".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank0, &i) in order.iter().enumerate() {
        if positives[i] {
            hits += 1;
            sum += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(sum / n_pos as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn from_bools(predicted: &[bool], gold: &[bool]) -> Self {
        let mut c = ConfusionCounts::default();
        for (&p, &g) in predicted.iter().zip(gold) {
            match (p, g) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; 0 when both are 0.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1_from_bools(predicted: &[bool], gold: &[bool]) -> Result<f64> {
    if predicted.len() != gold.len() {
        return Err(MetricError::LengthMismatch {
            left: predicted.len(),
            right: gold.len(),
        });
    }
    Ok(ConfusionCounts::from_bools(predicted, gold).f1())
}

/// F1 of binary relevance predictions against gold labels, with the
/// relevant class as positive.
pub fn f1_binary(predicted_relevant: &[bool], gold: &[GoldLabel], policy: PartialPolicy) -> Result<f64> {
    let gold_bin: Vec<bool> = gold.iter().map(|g| gold_is_relevant(g, policy)).collect();
    f1_from_bools(predicted_relevant, &gold_bin)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub theta: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Scores each threshold in `grid` by predicting relevant iff
/// `score >= theta`.
pub fn f1_threshold_sweep(scores: &[f64], gold: &[bool], grid: &[f64]) -> Result<Vec<SweepPoint>> {
    if scores.len() != gold.len() {
        return Err(MetricError::LengthMismatch {
            left: scores.len(),
            right: gold.len(),
        });
    }
    check_finite(scores, "score")?;
    grid.iter()
        .map(|&theta| {
            if !(0.0..=1.0).contains(&theta) {
                return Err(MetricError::InvalidInput(format!(
                    "threshold {theta} outside [0, 1]"
                )));
            }
            let predicted: Vec<bool> = scores.iter().map(|&s| s >= theta).collect();
            let c = ConfusionCounts::from_bools(&predicted, gold);
            Ok(SweepPoint {
                theta,
                precision: c.precision(),
                recall: c.recall(),
                f1: c.f1(),
            })
        })
        .collect()
}

/// `theta,f1` rows with a header line.
pub fn sweep_to_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("theta,f1\n");
    for p in points {
        out.push_str(&format!("{},{}\n", p.theta, p.f1));
    }
    out
}
