// ECE, Brier score and AUROC on a small hand-made set of judgments.

use diras::metrics::{auroc, brier, ece, CalibrationInput};

pub fn run_example() -> anyhow::Result<(f64, f64, f64)> {
    // confidence in each guess, and whether the guess was right
    let confidences = vec![0.95, 0.9, 0.85, 0.8, 0.7, 0.65, 0.6, 0.55];
    let correct = vec![true, true, true, false, true, false, true, false];
    let input = CalibrationInput::new(confidences, correct)?;

    let e = ece(&input, 10)?;
    let b = brier(&input);
    let a = auroc(&input)?;
    println!("ECE {e:.4}  Brier {b:.4}  AUROC {a:.4}");
    Ok((e, b, a))
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()?;
    Ok(())
}
