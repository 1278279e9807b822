//! Dense ranking of chunks per query, top-k cuts and threshold retrieval.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DocumentChunk, Query};
use crate::gateway::{Gateway, GatewayError};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("vectors have different dimensions ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("duplicate doc id {0} in ranking")]
    DuplicateDoc(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

pub type Result<T> = std::result::Result<T, RetrievalError>;

/// Documents for one query, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub query_id: String,
    pub entries: Vec<(String, f64)>,
}

/// Descending score, then ascending doc id.
fn by_score_then_id(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

impl Ranking {
    /// Sorts arbitrary scores into ranking order. Doc ids must be unique.
    pub fn from_scores(query_id: impl Into<String>, mut entries: Vec<(String, f64)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (id, score) in &entries {
            if !seen.insert(id.as_str()) {
                return Err(RetrievalError::DuplicateDoc(id.clone()));
            }
            if score.is_nan() {
                return Err(RetrievalError::Precondition(format!("score for {id} is NaN")));
            }
        }
        entries.sort_by(by_score_then_id);
        Ok(Ranking {
            query_id: query_id.into(),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(RetrievalError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(RetrievalError::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Embeds the query and every chunk in one batch and ranks by cosine.
pub fn rank_documents(query: &Query, chunks: &[DocumentChunk], gateway: &Gateway) -> Result<Ranking> {
    if chunks.is_empty() {
        return Err(RetrievalError::Precondition("no chunks to rank".into()));
    }
    let texts: Vec<&str> = std::iter::once(query.text.as_str())
        .chain(chunks.iter().map(|c| c.text.as_str()))
        .collect();
    let emb = gateway.embed(&texts)?;
    let (q, docs) = emb.vectors.split_first().expect("at least two vectors");
    let entries = chunks
        .iter()
        .zip(docs)
        .map(|(c, v)| cosine_similarity(q, v).map(|s| (c.id.clone(), s)))
        .collect::<Result<Vec<_>>>()?;
    Ranking::from_scores(query.id.clone(), entries)
}

pub fn retrieve_top_k(ranking: &Ranking, k: usize) -> Result<Vec<&str>> {
    if k == 0 {
        return Err(RetrievalError::Precondition("k must be at least 1".into()));
    }
    Ok(ranking.doc_ids().take(k).collect())
}

/// Every id whose score is at least `theta`, best first.
pub fn retrieve_by_threshold(scores: &[(String, f64)], theta: f64) -> Result<Vec<String>> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(RetrievalError::Precondition(format!("theta {theta} outside [0, 1]")));
    }
    let mut kept: Vec<(String, f64)> = scores.iter().filter(|(_, s)| *s >= theta).cloned().collect();
    kept.sort_by(by_score_then_id);
    Ok(kept.into_iter().map(|(id, _)| id).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::WhitespaceTokens;
    use crate::gateway::mock::{MockFixtures, MockServer};
    use crate::gateway::GatewayConfig;
    use proptest::prelude::*;

    fn scores(pairs: &[(&str, f64)]) -> Vec<(String, f64)> {
        pairs.iter().map(|(id, s)| (id.to_string(), *s)).collect()
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let v = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(RetrievalError::ZeroVector)
        ));
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 0.0]),
            Err(RetrievalError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dense_ranking_against_mock() {
        let server = MockServer::start(MockFixtures::default()).unwrap();
        let gw = Gateway::new(GatewayConfig::new(server.base_url())).unwrap();
        let q = Query {
            id: "q1".into(),
            text: "Does the company have a net zero target?".into(),
            definition: None,
        };
        let chunk = |id: &str, text: &str| DocumentChunk::new(id, "r1", text, &WhitespaceTokens);
        let chunks = vec![
            chunk("a", "Revenue grew in all regions this year."),
            chunk("b", "Does the company have a net zero target?"),
            chunk("c", "Our target is to reduce emissions."),
        ];
        let r = rank_documents(&q, &chunks, &gw).unwrap();
        assert_eq!(r.entries[0].0, "b");
        assert!((r.entries[0].1 - 1.0).abs() < 1e-12);

        let single = rank_documents(&q, &chunks[..1], &gw).unwrap();
        assert_eq!(single.len(), 1);

        let dup = vec![chunk("z", "same words here"), chunk("y", "same words here")];
        let r = rank_documents(&q, &dup, &gw).unwrap();
        assert_eq!(r.doc_ids().collect::<Vec<_>>(), ["y", "z"]);
        assert!(rank_documents(&q, &[], &gw).is_err());
    }

    #[test]
    fn top_k_examples() {
        let r = Ranking::from_scores("q", (0..10).map(|i| (format!("d{i}"), i as f64)).collect()).unwrap();
        assert_eq!(retrieve_top_k(&r, 5).unwrap().len(), 5);
        let small = Ranking::from_scores("q", scores(&[("a", 1.0), ("b", 0.5), ("c", 0.1)])).unwrap();
        assert_eq!(retrieve_top_k(&small, 5).unwrap(), ["a", "b", "c"]);
        assert!(retrieve_top_k(&small, 0).is_err());
    }

    #[test]
    fn threshold_examples() {
        let s = scores(&[("a", 0.9), ("b", 0.5), ("c", 0.2)]);
        assert_eq!(retrieve_by_threshold(&s, 0.5).unwrap(), ["a", "b"]);
        assert_eq!(retrieve_by_threshold(&s, 0.0).unwrap(), ["a", "b", "c"]);
        assert!(retrieve_by_threshold(&s, 1.0).unwrap().is_empty());
        let one = scores(&[("x", 1.0), ("y", 0.99)]);
        assert_eq!(retrieve_by_threshold(&one, 1.0).unwrap(), ["x"]);
        assert!(retrieve_by_threshold(&s, 1.5).is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        assert!(matches!(
            Ranking::from_scores("q", scores(&[("a", 0.1), ("a", 0.2)])),
            Err(RetrievalError::DuplicateDoc(_))
        ));
    }

    proptest! {
        #[test]
        fn threshold_is_monotone(s in prop::collection::vec(0.0f64..=1.0, 0..30), t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let sc: Vec<(String, f64)> = s.iter().enumerate().map(|(i, v)| (format!("d{i}"), *v)).collect();
            let wide: HashSet<String> = retrieve_by_threshold(&sc, lo).unwrap().into_iter().collect();
            let narrow = retrieve_by_threshold(&sc, hi).unwrap();
            prop_assert!(narrow.iter().all(|d| wide.contains(d)));
        }

        #[test]
        fn top_k_prefix(s in prop::collection::vec(-1.0f64..=1.0, 1..30), k in 1usize..35) {
            let r = Ranking::from_scores("q", s.iter().enumerate().map(|(i, v)| (format!("d{i}"), *v)).collect()).unwrap();
            let a = retrieve_top_k(&r, k).unwrap();
            let b = retrieve_top_k(&r, k + 1).unwrap();
            prop_assert_eq!(&b[..a.len()], &a[..]);
            prop_assert!(r.entries.windows(2).all(|w| w[0].1 >= w[1].1));
        }
    }
}
