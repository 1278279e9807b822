// Export teacher annotations on train-split pairs as chat fine-tuning
// records and check the Yes/No balance.

use std::path::Path;

use diras::annotator::Annotation;
use diras::corpus::{CorpusIndex, DocumentChunk, Query, Split};
use diras::distill::{audit_balance, export_training_data, read_training_records, BalanceReport, DEFAULT_BAND};
use diras::io::read_jsonl;
use diras::prompting::{Guess, PromptVariant};

fn annotation(q: &str, d: &str, guess: Guess, confidence: f64) -> Annotation {
    Annotation {
        query_id: q.into(),
        doc_id: d.into(),
        guess,
        confidence_ask: Some(confidence),
        confidence_tok: None,
        relevance_score: diras::annotator::derive_relevance_score(guess, confidence),
        reason: None,
        model: "teacher".into(),
        variant: PromptVariant::default(),
    }
}

pub fn run_example() -> anyhow::Result<BalanceReport> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/climate");
    let queries: Vec<Query> = read_jsonl(dir.join("queries.jsonl"))?;
    let chunks: Vec<DocumentChunk> = read_jsonl(dir.join("chunks.jsonl"))?;
    let index = CorpusIndex::new(&queries, &chunks);
    let split = Split {
        train_queries: ["q1", "q2"].map(String::from).into(),
        test_queries: ["q3", "q4"].map(String::from).into(),
        train_reports: ["r1", "r2", "r3"].map(String::from).into(),
        test_reports: ["r4"].map(String::from).into(),
        seed: 0,
    };
    let anns = vec![
        annotation("q1", "r1-c1", Guess::Yes, 0.9),
        annotation("q1", "r1-c4", Guess::No, 0.95),
        annotation("q2", "r3-c4", Guess::Yes, 0.85),
        annotation("q2", "r2-c1", Guess::No, 0.8),
    ];
    let out = tempfile::tempdir()?;
    let path = out.path().join("train.jsonl");
    let manifest = export_training_data(&anns, &split, &index, &PromptVariant::default(), &path)?;
    println!("{} records, yes fraction {:.2}", manifest.records, manifest.yes_fraction);
    println!("{}", std::fs::read_to_string(&path)?.lines().next().unwrap_or_default());

    // a pair from a test report is refused outright
    let leaked = annotation("q1", "r4-c3", Guess::No, 0.6);
    let err = export_training_data(&[leaked], &split, &index, &PromptVariant::default(), &path).unwrap_err();
    println!("refused: {err}");

    let records = read_training_records(&path)?;
    let expected: Vec<String> = split.train_queries.iter().cloned().collect();
    Ok(audit_balance(&records, &expected, DEFAULT_BAND)?)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    let balance = run_example()?;
    println!("flagged: {}", balance.flagged);
    Ok(())
}
