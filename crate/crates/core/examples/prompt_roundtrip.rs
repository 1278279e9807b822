// Render a pointwise prompt, then format and parse an answer block.

use diras::corpus::RelevanceDefinition;
use diras::prompting::{
    format_pointwise_answer, parse_listwise_response, parse_pointwise_response, render_pointwise_prompt, Guess,
    ParsedPointwise, PromptVariant,
};

pub fn run_example() -> anyhow::Result<ParsedPointwise> {
    let variant: PromptVariant = "point-cot-ask-d".parse()?;
    let definition = RelevanceDefinition {
        meaning: "Whether the company commits to quantified emission cuts.".into(),
        examples: vec!["A 2030 reduction target against a base year.".into()],
        provenance: Default::default(),
    };
    let prompt = render_pointwise_prompt(
        "Does the company set emission targets?",
        Some(&definition),
        "We will halve operational emissions by 2030.",
        &variant,
    )?;
    println!("{prompt}\n");

    let answer = ParsedPointwise {
        reason: Some("The paragraph states a dated reduction target.".into()),
        guess: Guess::Yes,
        confidence: 0.9,
        clamped_from: None,
    };
    let text = format_pointwise_answer(&answer, &variant);
    println!("{text}\n");
    let parsed = parse_pointwise_response(&text, &variant)?;
    assert_eq!(parsed, answer);

    let perm = parse_listwise_response("[3] > [1] > [3] > [9]", 4)?;
    println!("listwise permutation {perm:?}");
    Ok(parsed)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()?;
    Ok(())
}
