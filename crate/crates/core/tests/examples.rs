//! Every example under `examples/` runs and produces sensible output.

macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!("../examples/", stringify!($name), ".rs"));
        }
    };
}

example!(balanced_sampling);
example!(calibration_metrics);
example!(cli_pipeline);
example!(corpus_ingest);
example!(dense_retrieval);
example!(disagreement_audit);
example!(distill_export);
example!(listwise_rerank);
example!(metric_report);
example!(mock_gateway);
example!(pointwise_annotation);
example!(prompt_roundtrip);
example!(ranking_metrics);
example!(threshold_sweep);

#[test]
fn balanced_sampling_example() {
    let (even, filled) = balanced_sampling::run_example().unwrap();
    let inside = even.pairs.iter().filter(|p| p.retriever_rank.unwrap() <= 10).count();
    assert_eq!((inside, even.pairs.len()), (5, 10));
    assert_eq!(filled.pairs.len(), 12);
    assert_eq!(filled.shortfall.unwrap().filled, 2);
}

#[test]
fn calibration_metrics_example() {
    let (e, b, a) = calibration_metrics::run_example().unwrap();
    // 5 of 8 correct at mean confidence 0.75
    let brier = (0.05f64.powi(2) + 0.1f64.powi(2) + 0.15f64.powi(2) + 0.8f64.powi(2) + 0.3f64.powi(2)
        + 0.65f64.powi(2) + 0.4f64.powi(2) + 0.55f64.powi(2))
        / 8.0;
    assert!((b - brier).abs() < 1e-12);
    // correct/incorrect pairs won: 0.95,0.9,0.85 beat all 3; 0.7 beats 0.65,0.55; 0.6 beats 0.55
    assert!((a - 12.0 / 15.0).abs() < 1e-12);
    assert!(e > 0.0 && e < 1.0);
}

#[test]
fn cli_pipeline_example() {
    let report = cli_pipeline::run_example().unwrap();
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert!(v["report"]["avg"].as_f64().unwrap() > 50.0);
}

#[test]
fn corpus_ingest_example() {
    let out = corpus_ingest::run_example().unwrap();
    assert_eq!(out.findings, 0);
    assert_eq!(out.chunks.len(), 19);
    assert!(out.chunks.iter().any(|c| c.id == "r2-c2+r2-c3"));
    assert!(out.split.train_reports.is_disjoint(&out.split.test_reports));
}

#[test]
fn dense_retrieval_example() {
    let r = dense_retrieval::run_example().unwrap();
    assert_eq!(r.len(), 20);
    assert_eq!(r.entries[0].0, "r4-c1");
    assert!(r.entries.windows(2).all(|w| w[0].1 >= w[1].1));
}

#[test]
fn disagreement_audit_example() {
    let t = disagreement_audit::run_example().unwrap();
    assert_eq!(t.fraction_above, Some(0.25));
    let high = t.high.all.unwrap();
    assert_eq!(high.correct, high.total);
}

#[test]
fn distill_export_example() {
    let b = distill_export::run_example().unwrap();
    assert_eq!((b.yes, b.no), (2, 2));
    assert!(!b.flagged);
}

#[test]
fn listwise_rerank_example() {
    let out = listwise_rerank::run_example().unwrap();
    assert_eq!(out.ranking.doc_ids().collect::<Vec<_>>(), ["3", "1", "2"]);
    assert_eq!(out.windows, 2);
}

#[test]
fn metric_report_example() {
    let (report, manual) = metric_report::run_example().unwrap();
    assert!((manual.avg - (50.0 + 75.0 + 88.333_333_333_333_33 + 85.0) / 4.0).abs() < 1e-9);
    assert!(report.avg > 0.0 && report.avg <= 100.0);
}

#[test]
fn mock_gateway_example() {
    let s = mock_gateway::run_example().unwrap();
    assert_eq!((s.network_calls, s.retries, s.cache_hits), (2, 1, 1));
}

#[test]
fn pointwise_annotation_example() {
    let run = pointwise_annotation::run_example().unwrap();
    assert_eq!(run.annotations.len(), 4);
    let first = &run.annotations[0];
    assert_eq!(first.doc_id, "r1-c1");
    assert_eq!(first.confidence_tok, Some(0.95));
}

#[test]
fn prompt_roundtrip_example() {
    let p = prompt_roundtrip::run_example().unwrap();
    assert_eq!(p.confidence, 0.9);
}

#[test]
fn ranking_metrics_example() {
    let (n, m, tau) = ranking_metrics::run_example().unwrap();
    let q1 = (1.0 + 0.5 / 4f64.log2()) / (1.0 + 0.5 / 3f64.log2());
    let q2 = (1.0 / 3f64.log2() + 1.0 / 4f64.log2()) / (1.0 + 1.0 / 3f64.log2());
    assert!((n - (q1 + q2) / 2.0).abs() < 1e-12);
    let map = ((1.0 + 2.0 / 3.0) / 2.0 + (0.5 + 2.0 / 3.0) / 2.0) / 2.0;
    assert!((m - map).abs() < 1e-12);
    assert!((tau - 4.0 / 6.0).abs() < 1e-12);
}

#[test]
fn threshold_sweep_example() {
    let pts = threshold_sweep::run_example().unwrap();
    assert_eq!(pts[0].recall, 1.0);
    assert_eq!(pts.len(), 11);
}
