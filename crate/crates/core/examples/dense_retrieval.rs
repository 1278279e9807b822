// Rank the climate corpus for one query with the fixture server's
// bag-of-words embeddings, then retrieve by rank and by score threshold.

use std::path::Path;

use diras::corpus::{DocumentChunk, Query};
use diras::gateway::mock::{MockFixtures, MockServer};
use diras::gateway::{Gateway, GatewayConfig};
use diras::io::read_jsonl;
use diras::retrieval::{rank_documents, retrieve_by_threshold, retrieve_top_k, Ranking};

pub fn run_example() -> anyhow::Result<Ranking> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let queries: Vec<Query> = read_jsonl(dir.join("climate/queries.jsonl"))?;
    let chunks: Vec<DocumentChunk> = read_jsonl(dir.join("climate/chunks.jsonl"))?;
    let server = MockServer::start(MockFixtures::load(&dir.join("mock"))?)?;
    let gw = Gateway::new(GatewayConfig::new(server.base_url()))?;

    let query = &queries[2];
    let ranking = rank_documents(query, &chunks, &gw)?;
    println!("{}", query.text);
    for id in retrieve_top_k(&ranking, 3)? {
        println!("  top: {id}");
    }
    let above = retrieve_by_threshold(&ranking.entries, 0.3)?;
    println!("  {} chunks with cosine >= 0.3", above.len());
    Ok(ranking)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()?;
    Ok(())
}
