use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{
    aggregate_report, auroc, average_precision, brier, ece, f1_binary, gain_mapping, gold_is_relevant, map,
    ndcg, CalibrationInput, LabelScheme, MetricReport, PartialPolicy, QueryRun, Result, RunAndGold,
    SubMetrics,
};
use crate::corpus::GoldLabel;

/// One model judgment reduced to what the metrics need.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub query_id: String,
    pub doc_id: String,
    pub predicted_relevant: bool,
    /// Confidence in the stated guess.
    pub confidence: f64,
    /// Probability of relevance, used for ranking.
    pub relevance_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub scheme: LabelScheme,
    pub partial_policy: PartialPolicy,
    pub ece_bins: usize,
    pub k: Option<usize>,
    pub map_threshold: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            scheme: LabelScheme::ThreeWay,
            partial_policy: PartialPolicy::AsRelevant,
            ece_bins: 10,
            k: None,
            map_threshold: 0.0,
        }
    }
}

/// Output of [`evaluate`]. `report` is absent when any sub-metric is
/// undefined on the data; `undefined` then says why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub pairs: usize,
    pub unmatched_predictions: usize,
    pub unmatched_gold: usize,
    pub options: EvalOptions,
    pub report: Option<MetricReport>,
    pub sub_metrics: SubMetrics,
    pub undefined: BTreeMap<String, String>,
    pub excluded_queries: Vec<String>,
    pub per_query_ndcg: BTreeMap<String, f64>,
}

/// Gain of a gold row under `scheme`. Graded grades are already gains;
/// word labels go through the scheme's mapping.
pub fn gold_gain(gold: &GoldLabel, scheme: LabelScheme) -> f64 {
    let map = gain_mapping(scheme);
    match scheme {
        LabelScheme::Graded1To3 => gold.grade,
        LabelScheme::ThreeWay => gold.binary.map_or(gold.grade, |l| map.gain_of(l)),
        LabelScheme::Binary => match gold.binary {
            Some(l) => map.gain_of(l),
            None if gold.grade >= 1.0 => 1.0,
            None => 0.0,
        },
    }
}

/// Scores predictions against gold on the pairs present in both.
pub fn evaluate(scored: &[ScoredPair], gold: &[GoldLabel], opts: &EvalOptions) -> Result<Evaluation> {
    let by_key: HashMap<(&str, &str), &GoldLabel> = gold
        .iter()
        .map(|g| ((g.query_id.as_str(), g.doc_id.as_str()), g))
        .collect();
    let joined: Vec<(&ScoredPair, &GoldLabel)> = scored
        .iter()
        .filter_map(|s| by_key.get(&(s.query_id.as_str(), s.doc_id.as_str())).map(|g| (s, *g)))
        .collect();
    let mut undefined = BTreeMap::new();
    let mut sub = SubMetrics::default();
    let mut note = |name: &str, e: super::MetricError| {
        undefined.insert(name.to_string(), e.to_string());
    };

    let predicted: Vec<bool> = joined.iter().map(|(s, _)| s.predicted_relevant).collect();
    let gold_rows: Vec<GoldLabel> = joined.iter().map(|(_, g)| (*g).clone()).collect();
    let correct: Vec<bool> = joined
        .iter()
        .map(|(s, g)| s.predicted_relevant == gold_is_relevant(g, opts.partial_policy))
        .collect();
    let confidences: Vec<f64> = joined.iter().map(|(s, _)| s.confidence).collect();

    match CalibrationInput::new(confidences.clone(), correct) {
        Ok(cal) => {
            match ece(&cal, opts.ece_bins) {
                Ok(v) => sub.ece = Some(v),
                Err(e) => note("ece", e),
            }
            sub.brier = Some(brier(&cal));
            match auroc(&cal) {
                Ok(v) => sub.auroc = Some(v),
                Err(e) => note("auroc", e),
            }
        }
        Err(e) => {
            note("ece", e.clone());
            note("brier", e.clone());
            note("auroc", e);
        }
    }

    match f1_binary(&predicted, &gold_rows, opts.partial_policy) {
        Ok(v) if !joined.is_empty() => sub.f1 = Some(v),
        Ok(_) => note("f1", super::MetricError::Undefined("no matched pairs".into())),
        Err(e) => note("f1", e),
    }

    let uncertainty: Vec<f64> = confidences.iter().map(|c| 1.0 - c).collect();
    let flags: Vec<bool> = joined.iter().map(|(_, g)| g.uncertain).collect();
    match average_precision(&uncertainty, &flags) {
        Ok(v) => sub.ap = Some(v),
        Err(e) => note("ap", e),
    }

    let mut runs: BTreeMap<&str, QueryRun> = BTreeMap::new();
    for (s, g) in &joined {
        let run = runs.entry(s.query_id.as_str()).or_insert_with(|| QueryRun {
            query_id: s.query_id.clone(),
            ..QueryRun::default()
        });
        run.predicted.insert(s.doc_id.clone(), s.relevance_score);
        run.gold.insert(s.doc_id.clone(), gold_gain(g, opts.scheme));
    }
    let run = RunAndGold {
        queries: runs.into_values().collect(),
    };
    let mut excluded_queries = Vec::new();
    let mut per_query_ndcg = BTreeMap::new();
    match ndcg(&run, opts.k) {
        Ok(r) => {
            sub.ndcg = Some(r.mean);
            excluded_queries = r.excluded;
            per_query_ndcg = r.per_query;
        }
        Err(e) => note("ndcg", e),
    }
    match map(&run, opts.k, opts.map_threshold) {
        Ok(r) => sub.map = Some(r.mean),
        Err(e) => note("map", e),
    }

    let report = aggregate_report(&sub).ok();
    let matched_gold = joined.len();
    Ok(Evaluation {
        pairs: joined.len(),
        unmatched_predictions: scored.len() - joined.len(),
        unmatched_gold: gold.len().saturating_sub(matched_gold),
        options: *opts,
        report,
        sub_metrics: sub,
        undefined,
        excluded_queries,
        per_query_ndcg,
    })
}
