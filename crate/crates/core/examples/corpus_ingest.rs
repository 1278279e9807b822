// Validate the bundled climate corpus, merge short chunks and draw a
// query/report split.

use std::path::Path;

use diras::corpus::{merge_short_chunks, split_train_test, validate_corpus, DocumentChunk, GoldLabel, Query, Split};
use diras::io::read_jsonl;

pub struct Ingested {
    pub chunks: Vec<DocumentChunk>,
    pub split: Split,
    pub findings: usize,
}

pub fn run_example() -> anyhow::Result<Ingested> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/climate");
    let queries: Vec<Query> = read_jsonl(dir.join("queries.jsonl"))?;
    let chunks: Vec<DocumentChunk> = read_jsonl(dir.join("chunks.jsonl"))?;
    let gold: Vec<GoldLabel> = read_jsonl(dir.join("gold.jsonl"))?;

    let report = validate_corpus(&queries, &chunks, Some(&gold));
    let merged = merge_short_chunks(&chunks, 20)?;
    for c in merged.chunks.iter().filter(|c| c.id.contains('+')) {
        println!("merged {} ({} tokens)", c.id, c.token_count);
    }

    let query_ids: Vec<String> = queries.iter().map(|q| q.id.clone()).collect();
    let mut reports: Vec<String> = merged.chunks.iter().map(|c| c.report_id.clone()).collect();
    reports.dedup();
    let split = split_train_test(&query_ids, &reports, 0.25, 0.25, 13)?;
    println!("test queries {:?}, test reports {:?}", split.test_queries, split.test_reports);

    Ok(Ingested {
        chunks: merged.chunks,
        split,
        findings: report.findings.len(),
    })
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    let out = run_example()?;
    println!("{} chunks, {} findings", out.chunks.len(), out.findings);
    Ok(())
}
