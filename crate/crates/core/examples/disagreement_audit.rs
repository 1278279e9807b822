// Find pairs where the model contradicts the original labels, sample them
// by confidence bin, and tabulate how often human review sided with the
// model.

use diras::annotator::{derive_relevance_score, Annotation};
use diras::corpus::GoldLabel;
use diras::metrics::PartialPolicy;
use diras::prompting::{Guess, PromptVariant};
use diras::sampler::{
    disagreement_accuracy_table, original_labels, stratify_disagreements, AccuracyTable, AuditedDisagreement,
    HumanVerdict,
};

pub fn run_example() -> anyhow::Result<AccuracyTable> {
    let mut annotations = Vec::new();
    let mut gold = Vec::new();
    for i in 0..40 {
        let doc = format!("d{i:02}");
        let guess = if i % 2 == 0 { Guess::Yes } else { Guess::No };
        let confidence = 0.8 + (i % 20) as f64 / 100.0;
        annotations.push(Annotation {
            query_id: "q".into(),
            doc_id: doc.clone(),
            guess,
            confidence_ask: Some(confidence),
            confidence_tok: None,
            relevance_score: derive_relevance_score(guess, confidence),
            reason: None,
            model: "teacher".into(),
            variant: PromptVariant::default(),
        });
        // every third original label disagrees with the model
        let relevant = (guess == Guess::Yes) != (i % 3 == 0);
        gold.push(GoldLabel {
            query_id: "q".into(),
            doc_id: doc,
            grade: if relevant { 1.0 } else { 0.0 },
            binary: None,
            uncertain: false,
        });
    }
    let originals = original_labels(&gold, PartialPolicy::AsRelevant);
    let sample = stratify_disagreements(&annotations, &originals, 3, 7);
    println!("{} disagreements sampled", sample.disagreements.len());

    // pretend reviewers backed the model whenever it was very confident
    let audited: Vec<AuditedDisagreement> = sample
        .disagreements
        .into_iter()
        .map(|d| AuditedDisagreement {
            human_verdict: if d.confidence > 0.95 { HumanVerdict::Model } else { HumanVerdict::Original },
            disagreement: d,
        })
        .collect();
    let confidences: Vec<f64> = annotations.iter().map(Annotation::confidence).collect();
    let table = disagreement_accuracy_table(&audited, 0.95, Some(&confidences));
    println!("{}", serde_json::to_string_pretty(&table)?);
    Ok(table)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()?;
    Ok(())
}
