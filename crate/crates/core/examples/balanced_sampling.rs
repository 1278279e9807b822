// Draw equal numbers of pairs from inside and outside the top-k.

use diras::retrieval::Ranking;
use diras::sampler::{balanced_sample, BalancedSample, FillPolicy};

pub fn run_example() -> anyhow::Result<(BalancedSample, BalancedSample)> {
    let ranking = Ranking::from_scores(
        "q1",
        (0..30).map(|i| (format!("doc{i:02}"), 1.0 - i as f64 / 30.0)).collect(),
    )?;
    let even = balanced_sample(&ranking, 10, 5, 13, FillPolicy::Strict)?;
    let ranks: Vec<u32> = even.pairs.iter().filter_map(|p| p.retriever_rank).collect();
    println!("sampled ranks {ranks:?}");

    // only 4 documents above the cutoff: strict reports the gap, fill borrows
    let strict = balanced_sample(&ranking, 4, 6, 13, FillPolicy::Strict)?;
    let filled = balanced_sample(&ranking, 4, 6, 13, FillPolicy::Fill)?;
    println!(
        "strict {} pairs, shortfall {:?}; fill {} pairs",
        strict.pairs.len(),
        strict.shortfall,
        filled.pairs.len()
    );
    Ok((even, filled))
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()?;
    Ok(())
}
