//! Evaluation mathematics for relevance annotators and retrievers.
//!
//! Four dimensions are scored, each on a 0..100 scale:
//!
//! | Dimension | Sub-metrics | Labels used |
//! | --------- | ----------- | ----------- |
//! | Uncertainty (`unc`) | average precision of `1 - confidence` | uncertainty flags |
//! | Binary relevance (`bin`) | F1 | relevance labels |
//! | Calibration (`cal`) | AUROC, `1 - ECE`, `1 - Brier` | correctness of the guess |
//! | Information retrieval (`info`) | nDCG, MAP | graded gains |
//!
//! Every function keeps full precision; rounding happens only when a
//! report is formatted for display.

mod calibration;
mod classification;
mod evaluate;
mod gain;
mod ranking;
mod report;

pub use calibration::{auroc, brier, ece, CalibrationInput};
pub use classification::{
    average_precision, f1_binary, f1_from_bools, f1_threshold_sweep, gold_is_relevant,
    sweep_to_csv, ConfusionCounts, PartialPolicy, SweepPoint,
};
pub use evaluate::{evaluate, gold_gain, EvalOptions, Evaluation, ScoredPair};
pub use gain::{gain_mapping, GainMap, LabelScheme};
pub use ranking::{
    kendall_tau, kendall_tau_b, map, ndcg, QueryRun, RankingScore, RunAndGold,
};
pub use report::{aggregate_report, MetricReport, SubMetrics};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("missing sub-metric `{0}`")]
    MissingSubMetric(&'static str),
    #[error("unknown label `{label}` for scheme {scheme}")]
    UnknownLabel { scheme: String, label: String },
    #[error("rankings cover different id sets")]
    MismatchedIds,
}

pub type Result<T> = std::result::Result<T, MetricError>;

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(MetricError::InvalidInput(format!("non-finite {what}")));
    }
    Ok(())
}
