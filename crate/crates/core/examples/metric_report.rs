// Join annotations with gold labels and print the four-dimension table
// row: uncertainty, binary relevance, calibration, ranking, average.

use diras::corpus::{BinaryLabel, GoldLabel};
use diras::metrics::{aggregate_report, evaluate, EvalOptions, MetricReport, ScoredPair, SubMetrics};

fn pair(q: &str, d: &str, yes: bool, confidence: f64) -> ScoredPair {
    ScoredPair {
        query_id: q.into(),
        doc_id: d.into(),
        predicted_relevant: yes,
        confidence,
        relevance_score: if yes { confidence } else { 1.0 - confidence },
    }
}

fn gold(q: &str, d: &str, label: BinaryLabel, uncertain: bool) -> GoldLabel {
    let grade = match label {
        BinaryLabel::Relevant => 1.0,
        BinaryLabel::Partial => 0.5,
        BinaryLabel::Irrelevant => 0.0,
    };
    GoldLabel {
        query_id: q.into(),
        doc_id: d.into(),
        grade,
        binary: Some(label),
        uncertain,
    }
}

pub fn run_example() -> anyhow::Result<(MetricReport, MetricReport)> {
    use BinaryLabel::*;
    let scored = vec![
        pair("q1", "a", true, 0.95),
        pair("q1", "b", true, 0.6),
        pair("q1", "c", false, 0.9),
        pair("q1", "d", false, 0.7),
        pair("q2", "e", true, 0.85),
        pair("q2", "f", false, 0.55),
        pair("q2", "g", false, 0.95),
    ];
    let labels = vec![
        gold("q1", "a", Relevant, false),
        gold("q1", "b", Partial, true),
        gold("q1", "c", Irrelevant, false),
        gold("q1", "d", Relevant, true),
        gold("q2", "e", Relevant, false),
        gold("q2", "f", Irrelevant, true),
        gold("q2", "g", Irrelevant, false),
    ];
    let ev = evaluate(&scored, &labels, &EvalOptions::default())?;
    let report = ev.report.ok_or_else(|| anyhow::anyhow!("undefined metrics: {:?}", ev.undefined))?;
    println!("Unc.\tBin.\tCal.\tInfo.\tAvg.");
    println!("{}", report.table_row());

    // a report can also be assembled from sub-metrics computed elsewhere
    let manual = aggregate_report(&SubMetrics {
        ece: Some(0.05),
        brier: Some(0.1),
        auroc: Some(0.8),
        ndcg: Some(0.9),
        map: Some(0.8),
        f1: Some(0.75),
        ap: Some(0.5),
    })?;
    println!("{}", manual.table_row());
    Ok((report, manual))
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()?;
    Ok(())
}
