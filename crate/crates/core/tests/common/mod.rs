//! Brute-force reference implementations. Each one works from the
//! definition by direct summation or exhaustive pair counting and shares
//! no code with the library.

#![allow(dead_code)]

use std::collections::BTreeMap;

/// ECE with bins `[b/B, (b+1)/B)`, the last one closed.
pub fn ece(conf: &[f64], correct: &[bool], bins: usize) -> f64 {
    let n = conf.len() as f64;
    let mut total = 0.0;
    for b in 0..bins {
        let lo = b as f64 / bins as f64;
        let hi = (b + 1) as f64 / bins as f64;
        let members: Vec<usize> = (0..conf.len())
            .filter(|&i| {
                let c = conf[i];
                if b + 1 == bins {
                    c >= lo
                } else {
                    c >= lo && c < hi
                }
            })
            .collect();
        if members.is_empty() {
            continue;
        }
        let m = members.len() as f64;
        let acc = members.iter().filter(|&&i| correct[i]).count() as f64 / m;
        let mean_conf = members.iter().map(|&i| conf[i]).sum::<f64>() / m;
        total += m / n * (acc - mean_conf).abs();
    }
    total
}

pub fn brier(conf: &[f64], correct: &[bool]) -> f64 {
    let mut s = 0.0;
    for i in 0..conf.len() {
        let y = if correct[i] { 1.0 } else { 0.0 };
        s += (conf[i] - y).powi(2);
    }
    s / conf.len() as f64
}

/// Probability that a correct item outscores an incorrect one, ties half.
pub fn auroc(conf: &[f64], correct: &[bool]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..conf.len() {
        for j in 0..conf.len() {
            if correct[i] && !correct[j] {
                pairs += 1.0;
                if conf[i] > conf[j] {
                    wins += 1.0;
                } else if conf[i] == conf[j] {
                    wins += 0.5;
                }
            }
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}

/// 1-based position of item `i` when sorted by descending score with
/// ties kept in input order.
fn stable_position(scores: &[f64], i: usize) -> usize {
    1 + (0..scores.len())
        .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i))
        .count()
}

pub fn average_precision(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    if n_pos == 0 {
        return None;
    }
    let mut s = 0.0;
    for i in (0..scores.len()).filter(|&i| positive[i]) {
        let r = stable_position(scores, i);
        let above = (0..scores.len())
            .filter(|&j| positive[j] && stable_position(scores, j) <= r)
            .count();
        s += above as f64 / r as f64;
    }
    Some(s / n_pos as f64)
}

/// Rank of `doc` under descending score, ties broken by doc id.
fn rank_of(pred: &BTreeMap<String, f64>, doc: &str) -> usize {
    let s = pred[doc];
    1 + pred
        .iter()
        .filter(|(d, &t)| t > s || (t == s && d.as_str() < doc))
        .count()
}

/// nDCG for one query; `None` without any positive gain.
pub fn ndcg(pred: &BTreeMap<String, f64>, gold: &BTreeMap<String, f64>, k: Option<usize>) -> Option<f64> {
    let k = k.unwrap_or(usize::MAX);
    let mut dcg = 0.0;
    for doc in pred.keys() {
        let r = rank_of(pred, doc);
        if r <= k {
            dcg += gold.get(doc).copied().unwrap_or(0.0) / ((r + 1) as f64).log2();
        }
    }
    let mut ideal: Vec<f64> = gold.values().copied().collect();
    ideal.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if ideal.first().is_none_or(|&g| g <= 0.0) {
        return None;
    }
    let idcg: f64 = ideal
        .iter()
        .enumerate()
        .filter(|(i, _)| *i < k)
        .map(|(i, g)| g / ((i + 2) as f64).log2())
        .sum();
    Some(dcg / idcg)
}

/// AP@k for one query with relevance `gain > threshold`, divided by the
/// total number of relevant documents.
pub fn ap_at_k(pred: &BTreeMap<String, f64>, gold: &BTreeMap<String, f64>, k: Option<usize>, threshold: f64) -> Option<f64> {
    let k = k.unwrap_or(usize::MAX);
    let rel = |d: &str| gold.get(d).copied().unwrap_or(0.0) > threshold;
    let n_rel = gold.values().filter(|&&g| g > threshold).count();
    if n_rel == 0 {
        return None;
    }
    let mut s = 0.0;
    for doc in pred.keys().filter(|d| rel(d)) {
        let r = rank_of(pred, doc);
        if r > k {
            continue;
        }
        let hits = pred.keys().filter(|d| rel(d) && rank_of(pred, d) <= r).count();
        s += hits as f64 / r as f64;
    }
    Some(s / n_rel as f64)
}

/// Kendall tau-b by counting every pair.
pub fn tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut c, mut d, mut tx, mut ty) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let n = x.len();
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tx += 1.0;
            } else if dy == 0.0 {
                ty += 1.0;
            } else if dx.signum() == dy.signum() {
                c += 1.0;
            } else {
                d += 1.0;
            }
        }
    }
    let denom = ((c + d + tx) * (c + d + ty)).sqrt();
    (denom > 0.0).then(|| (c - d) / denom)
}
