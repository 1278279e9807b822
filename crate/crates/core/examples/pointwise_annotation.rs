// Annotate sampled pairs of the climate corpus against the fixture server,
// keeping both the stated and the token-probability confidence.

use std::path::Path;

use diras::annotator::{annotate_corpus, AnnotatorConfig, CorpusRun};
use diras::corpus::{CorpusIndex, DocumentChunk, Query, QueryDocPair};
use diras::gateway::mock::{MockFixtures, MockServer};
use diras::gateway::{Gateway, GatewayConfig};
use diras::io::read_jsonl;
use diras::prompting::PromptVariant;

pub fn run_example() -> anyhow::Result<CorpusRun> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let queries: Vec<Query> = read_jsonl(dir.join("climate/queries.jsonl"))?;
    let chunks: Vec<DocumentChunk> = read_jsonl(dir.join("climate/chunks.jsonl"))?;
    let index = CorpusIndex::new(&queries, &chunks);
    let server = MockServer::start(MockFixtures::load(&dir.join("mock"))?)?;
    let gw = Gateway::new(GatewayConfig::new(server.base_url()))?;

    let pairs: Vec<QueryDocPair> = ["r1-c1", "r1-c3", "r3-c3", "r4-c3"]
        .iter()
        .map(|d| QueryDocPair {
            query_id: "q1".into(),
            doc_id: d.to_string(),
            retriever_rank: None,
            split: Default::default(),
        })
        .collect();
    let cfg = AnnotatorConfig::new("judge", PromptVariant::default());
    let run = annotate_corpus(&pairs, &index, &cfg, &gw, 4)?;
    for a in &run.annotations {
        println!(
            "{} {}: {} ask={:?} tok={:?} score={:.3}",
            a.query_id,
            a.doc_id,
            a.guess.as_str(),
            a.confidence_ask,
            a.confidence_tok,
            a.relevance_score
        );
    }
    Ok(run)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()?;
    Ok(())
}
