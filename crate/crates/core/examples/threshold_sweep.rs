// F1 of threshold retrieval over a grid of relevance-score cutoffs.

use diras::metrics::{f1_threshold_sweep, sweep_to_csv, SweepPoint};
use diras::retrieval::retrieve_by_threshold;

pub fn run_example() -> anyhow::Result<Vec<SweepPoint>> {
    let scores = [0.97, 0.91, 0.8, 0.62, 0.55, 0.4, 0.2, 0.05];
    let relevant = [true, true, false, true, true, false, false, false];
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let points = f1_threshold_sweep(&scores, &relevant, &grid)?;
    print!("{}", sweep_to_csv(&points));

    let named: Vec<(String, f64)> = scores.iter().enumerate().map(|(i, &s)| (format!("d{i}"), s)).collect();
    println!("kept at 0.5: {:?}", retrieve_by_threshold(&named, 0.5)?);
    Ok(points)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()?;
    Ok(())
}
