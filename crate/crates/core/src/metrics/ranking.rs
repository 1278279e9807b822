use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{check_finite, MetricError, Result};

/// Predicted scores and gold gains for one query.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QueryRun {
    pub query_id: String,
    /// doc_id -> predicted score (higher ranks first)
    pub predicted: BTreeMap<String, f64>,
    /// doc_id -> gold gain in [0, 1]
    pub gold: BTreeMap<String, f64>,
}

impl QueryRun {
    /// Predicted doc ids sorted by descending score, ties by doc id.
    pub fn predicted_order(&self) -> Vec<&str> {
        let mut docs: Vec<(&str, f64)> = self.predicted.iter().map(|(d, &s)| (d.as_str(), s)).collect();
        docs.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        docs.into_iter().map(|(d, _)| d).collect()
    }

    fn gains_in_predicted_order(&self) -> Vec<f64> {
        self.predicted_order()
            .into_iter()
            .map(|d| self.gold.get(d).copied().unwrap_or(0.0))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunAndGold {
    pub queries: Vec<QueryRun>,
}

impl RunAndGold {
    fn validate(&self) -> Result<()> {
        for q in &self.queries {
            let scores: Vec<f64> = q.predicted.values().copied().collect();
            check_finite(&scores, "score")?;
            if let Some(d) = q.gold.keys().find(|d| !q.predicted.contains_key(*d)) {
                return Err(MetricError::InvalidInput(format!(
                    "query {}: gold doc {d} has no prediction",
                    q.query_id
                )));
            }
            if let Some(g) = q.gold.values().find(|g| !(0.0..=1.0).contains(*g)) {
                return Err(MetricError::InvalidInput(format!(
                    "query {}: gain {g} outside [0, 1]",
                    q.query_id
                )));
            }
        }
        Ok(())
    }
}

/// A macro-averaged ranking metric with its per-query breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingScore {
    pub mean: f64,
    pub per_query: BTreeMap<String, f64>,
    /// Queries without any positive gold gain.
    pub excluded: Vec<String>,
}

fn macro_average(
    run: &RunAndGold,
    metric: impl Fn(&QueryRun) -> Option<f64>,
) -> Result<RankingScore> {
    run.validate()?;
    let mut per_query = BTreeMap::new();
    let mut excluded = Vec::new();
    for q in &run.queries {
        match metric(q) {
            Some(v) => {
                per_query.insert(q.query_id.clone(), v);
            }
            None => {
                tracing::warn!(query_id = %q.query_id, "query has no positive gold; excluded from ranking average");
                excluded.push(q.query_id.clone());
            }
        }
    }
    if per_query.is_empty() {
        return Err(MetricError::Undefined(
            "no query has a positive gold gain".into(),
        ));
    }
    let mean = per_query.values().sum::<f64>() / per_query.len() as f64;
    Ok(RankingScore {
        mean,
        per_query,
        excluded,
    })
}

fn dcg(gains: &[f64], k: usize) -> f64 {
    gains
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, g)| g / ((i + 2) as f64).log2())
        .sum()
}

/// nDCG with linear gains, cut at `k` (whole list when `None`),
/// macro-averaged over queries with at least one positive gain.
pub fn ndcg(run: &RunAndGold, k: Option<usize>) -> Result<RankingScore> {
    if k == Some(0) {
        return Err(MetricError::InvalidInput("k must be >= 1".into()));
    }
    macro_average(run, |q| {
        let mut ideal: Vec<f64> = q.gold.values().copied().collect();
        ideal.sort_by(|a, b| b.total_cmp(a));
        if ideal.first().is_none_or(|&g| g <= 0.0) {
            return None;
        }
        let cut = k.unwrap_or(usize::MAX);
        Some(dcg(&q.gains_in_predicted_order(), cut) / dcg(&ideal, cut))
    })
}

/// Mean average precision with gold binarized as `gain > binarize_threshold`.
/// AP@k sums precision at relevant ranks within the cutoff and divides by
/// the total number of relevant documents for the query.
pub fn map(run: &RunAndGold, k: Option<usize>, binarize_threshold: f64) -> Result<RankingScore> {
    if k == Some(0) {
        return Err(MetricError::InvalidInput("k must be >= 1".into()));
    }
    macro_average(run, |q| {
        let n_rel = q.gold.values().filter(|&&g| g > binarize_threshold).count();
        if n_rel == 0 {
            return None;
        }
        let mut hits = 0usize;
        let mut sum = 0.0;
        for (i, g) in q
            .gains_in_predicted_order()
            .into_iter()
            .take(k.unwrap_or(usize::MAX))
            .enumerate()
        {
            if g > binarize_threshold {
                hits += 1;
                sum += hits as f64 / (i + 1) as f64;
            }
        }
        Some(sum / n_rel as f64)
    })
}

/// Counts inversions (i < j with v[i] > v[j]) while sorting `v`.
fn sort_count_inversions(v: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mut right = v.split_off(n / 2);
    let mut inv = sort_count_inversions(v) + sort_count_inversions(&mut right);
    let left = std::mem::take(v);
    v.reserve(n);
    let (mut i, mut j) = (0, 0);
    while i < left.len() && j < right.len() {
        if right[j] < left[i] {
            inv += (left.len() - i) as u64;
            v.push(right[j]);
            j += 1;
        } else {
            v.push(left[i]);
            i += 1;
        }
    }
    v.extend_from_slice(&left[i..]);
    v.extend_from_slice(&right[j..]);
    inv
}

fn tied_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as u64;
        total += t * (t - 1) / 2;
        i = j + 1;
    }
    total
}

/// Kendall's tau-b between two paired samples, using Knight's
/// O(n log n) merge-sort formulation.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    check_finite(x, "x")?;
    check_finite(y, "y")?;
    let n = x.len();
    if n < 2 {
        return Err(MetricError::Undefined("tau needs at least 2 items".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    // ties in x, and joint ties in (x, y)
    let mut x_ties = 0u64;
    let mut joint_ties = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let t = (j - i + 1) as u64;
        x_ties += t * (t - 1) / 2;
        let ys: Vec<f64> = idx[i..=j].iter().map(|&k| y[k]).collect();
        joint_ties += tied_pairs(&ys);
        i = j + 1;
    }

    let mut ys: Vec<f64> = idx.iter().map(|&k| y[k]).collect();
    let discordant = sort_count_inversions(&mut ys);
    let y_ties = tied_pairs(&ys);

    let total = (n as u64) * (n as u64 - 1) / 2;
    let numer = total as f64 - x_ties as f64 - y_ties as f64 + joint_ties as f64
        - 2.0 * discordant as f64;
    let denom = ((total - x_ties) as f64 * (total - y_ties) as f64).sqrt();
    if denom == 0.0 {
        return Err(MetricError::Undefined(
            "tau undefined when one side is entirely tied".into(),
        ));
    }
    Ok(numer / denom)
}

/// Kendall's tau between two orderings of the same ids.
pub fn kendall_tau<S: AsRef<str>>(rank_a: &[S], rank_b: &[S]) -> Result<f64> {
    let pos_b: HashMap<&str, usize> = rank_b
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_ref(), i))
        .collect();
    let set_a: HashSet<&str> = rank_a.iter().map(|s| s.as_ref()).collect();
    if set_a.len() != rank_a.len() || pos_b.len() != rank_b.len() || set_a.len() != pos_b.len()
    {
        return Err(MetricError::MismatchedIds);
    }
    let mut xs = Vec::with_capacity(rank_a.len());
    let mut ys = Vec::with_capacity(rank_a.len());
    for (i, id) in rank_a.iter().enumerate() {
        let j = pos_b.get(id.as_ref()).ok_or(MetricError::MismatchedIds)?;
        xs.push(i as f64);
        ys.push(*j as f64);
    }
    kendall_tau_b(&xs, &ys)
}
