// Sliding-window listwise reranking with a model that reverses every
// window it sees.

use std::collections::HashMap;
use std::path::Path;

use diras::annotator::{listwise_rerank, ListwiseOutcome, WindowSpec};
use diras::corpus::{DocumentChunk, Query, WhitespaceTokens};
use diras::gateway::mock::{MockFixtures, MockServer};
use diras::gateway::{Gateway, GatewayConfig};
use diras::retrieval::Ranking;

pub fn run_example() -> anyhow::Result<ListwiseOutcome> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/listwise_reversal");
    let server = MockServer::start(MockFixtures::load(&dir)?)?;
    let gw = Gateway::new(GatewayConfig::new(server.base_url()))?;

    let query = Query {
        id: "q".into(),
        text: "Which passage comes first?".into(),
        definition: None,
    };
    let mut chunks = HashMap::new();
    for (i, word) in ["one", "two", "three"].iter().enumerate() {
        let id = format!("{}", i + 1);
        chunks.insert(id.clone(), DocumentChunk::new(id, "r", format!("Passage {word}."), &WhitespaceTokens));
    }
    let initial = Ranking::from_scores("q", vec![("1".into(), 0.9), ("2".into(), 0.8), ("3".into(), 0.7)])?;
    let spec = WindowSpec { window: 2, step: 1 };
    let out = listwise_rerank(&query, &initial, &chunks, spec, false, "ranker", &gw)?;
    let order: Vec<&str> = out.ranking.doc_ids().collect();
    println!("{} windows, final order {order:?}", out.windows);
    Ok(out)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()?;
    Ok(())
}
