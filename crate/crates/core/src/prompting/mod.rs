//! Prompt rendering for relevance judgments and definition generation,
//! and parsing of the structured replies.

mod parse;
mod templates;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Provenance, RelevanceDefinition};

pub use parse::{
    format_pointwise_answer, parse_definition_response, parse_listwise_response,
    parse_pointwise_response, render_confidence, Guess, ParsedPointwise,
};
pub use templates::{template_digests, TEMPLATE_VERSION};

/// Upper bound on passages in one listwise prompt.
pub const MAX_LISTWISE_PASSAGES: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PromptError {
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("variant {0} requires a relevance definition")]
    MissingDefinition(PromptVariant),
    #[error("variant {0} is not pointwise")]
    NotPointwise(PromptVariant),
    #[error("listwise prompt takes 1..={max} passages, got {got}")]
    WindowSize { got: usize, max: usize },
    #[error("missing {field} in response: {raw:?}")]
    MissingField { field: &'static str, raw: String },
    #[error("invalid {field} `{value}` in response")]
    InvalidField {
        field: &'static str,
        value: String,
        raw: String,
    },
    #[error("unknown prompt variant `{0}`")]
    UnknownVariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankingMode {
    Pointwise,
    Listwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidencePhrasing {
    /// "[Confidence]": confidence that the guess is correct
    AskConfidence,
    /// "[Probability Helpful]": probability that the paragraph is helpful
    AskProbability,
}

/// A prompt setting. Written as `point[-cot]-ask[-prob][-d]` or `list[-d]`,
/// e.g. `point-ask-d`, `point-cot-ask-prob-d`, `list-d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PromptVariant {
    pub ranking_mode: RankingMode,
    pub cot: bool,
    pub with_definition: bool,
    pub confidence_phrasing: ConfidencePhrasing,
}

impl PromptVariant {
    pub fn pointwise(cot: bool, with_definition: bool, confidence_phrasing: ConfidencePhrasing) -> Self {
        PromptVariant {
            ranking_mode: RankingMode::Pointwise,
            cot,
            with_definition,
            confidence_phrasing,
        }
    }

    /// Listwise prompts ignore `cot` and `confidence_phrasing`; they are
    /// normalized so that equal settings compare equal.
    pub fn listwise(with_definition: bool) -> Self {
        PromptVariant {
            ranking_mode: RankingMode::Listwise,
            cot: false,
            with_definition,
            confidence_phrasing: ConfidencePhrasing::AskConfidence,
        }
    }

    pub fn is_pointwise(&self) -> bool {
        self.ranking_mode == RankingMode::Pointwise
    }

    /// Label of the confidence field in the answer block.
    pub fn confidence_label(&self) -> &'static str {
        match self.confidence_phrasing {
            ConfidencePhrasing::AskConfidence => "[Confidence]:",
            ConfidencePhrasing::AskProbability => "[Probability Helpful]:",
        }
    }
}

impl Default for PromptVariant {
    fn default() -> Self {
        PromptVariant::pointwise(false, true, ConfidencePhrasing::AskConfidence)
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.ranking_mode {
            RankingMode::Listwise => f.write_str("list")?,
            RankingMode::Pointwise => {
                f.write_str("point")?;
                if self.cot {
                    f.write_str("-cot")?;
                }
                f.write_str("-ask")?;
                if self.confidence_phrasing == ConfidencePhrasing::AskProbability {
                    f.write_str("-prob")?;
                }
            }
        }
        if self.with_definition {
            f.write_str("-d")?;
        }
        Ok(())
    }
}

impl FromStr for PromptVariant {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || PromptError::UnknownVariant(s.to_string());
        let lower = s.trim().to_ascii_lowercase();
        let mut parts: Vec<&str> = lower.split('-').collect();
        let with_definition = parts.last() == Some(&"d");
        if with_definition {
            parts.pop();
        }
        match parts.as_slice() {
            ["list"] => Ok(PromptVariant::listwise(with_definition)),
            ["point", rest @ ..] => {
                let (cot, rest) = match rest {
                    ["cot", r @ ..] => (true, r),
                    r => (false, r),
                };
                let phrasing = match rest {
                    ["ask"] => ConfidencePhrasing::AskConfidence,
                    ["ask", "prob"] => ConfidencePhrasing::AskProbability,
                    _ => return Err(unknown()),
                };
                Ok(PromptVariant::pointwise(cot, with_definition, phrasing))
            }
            _ => Err(unknown()),
        }
    }
}

impl Serialize for PromptVariant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PromptVariant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn require_text(text: &str, what: &'static str) -> Result<(), PromptError> {
    if text.trim().is_empty() {
        Err(PromptError::Empty(what))
    } else {
        Ok(())
    }
}

/// Prompt asking a model to draft a relevance definition for `question`.
pub fn render_definition_prompt(question: &str) -> Result<String, PromptError> {
    require_text(question, "question")?;
    Ok(templates::fill(templates::get("definition"), &[("question", question)])
        .trim_end()
        .to_string())
}

/// Like [`render_definition_prompt`], but seeded with expert-annotated
/// example passages listed between the BEGIN/END markers.
pub fn render_improved_definition_prompt(
    question: &str,
    gold_examples: &[String],
) -> Result<String, PromptError> {
    require_text(question, "question")?;
    if gold_examples.is_empty() {
        return Err(PromptError::Empty("gold examples"));
    }
    let examples = gold_examples
        .iter()
        .enumerate()
        .map(|(i, e)| format!("{}. {}", i + 1, e))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(templates::fill(
        templates::get("improved_definition"),
        &[("question", question), ("examples", &examples)],
    )
    .trim_end()
    .to_string())
}

/// Background text inserted for a definition. The fixed QA definition is
/// used verbatim; others carry the "Meaning of the question" layout.
pub fn background_text(definition: &RelevanceDefinition) -> String {
    match definition.provenance {
        Provenance::Fixed => definition.meaning.clone(),
        _ => definition.to_background_text(),
    }
}

/// Full pointwise prompt for one (query, paragraph) pair.
pub fn render_pointwise_prompt(
    question: &str,
    definition: Option<&RelevanceDefinition>,
    paragraph: &str,
    variant: &PromptVariant,
) -> Result<String, PromptError> {
    if !variant.is_pointwise() {
        return Err(PromptError::NotPointwise(*variant));
    }
    require_text(question, "question")?;
    require_text(paragraph, "paragraph")?;
    let task = if variant.with_definition {
        let def = definition.ok_or(PromptError::MissingDefinition(*variant))?;
        let background = background_text(def);
        templates::fill(
            templates::get("pointwise_task_definition"),
            &[
                ("background_information", &background),
                ("question", question),
                ("paragraph_chunk", paragraph),
            ],
        )
    } else {
        templates::fill(
            templates::get("pointwise_task_no_definition"),
            &[("question", question), ("paragraph_chunk", paragraph)],
        )
    };
    let output_template = match variant.confidence_phrasing {
        ConfidencePhrasing::AskConfidence => templates::get("pointwise_output_confidence"),
        ConfidencePhrasing::AskProbability => templates::get("pointwise_output_probability"),
    };
    let reason_line = if variant.cot {
        templates::get("reason_line")
    } else {
        ""
    };
    let output = templates::fill(output_template, &[("reason_line", reason_line)]);
    Ok(format!("{task}{}", output.trim_end()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListwisePrompt {
    pub system: String,
    pub user: String,
}

/// Listwise ranking prompt; passages are numbered `[1]..[n]` in order.
pub fn render_listwise_prompt(
    query: &str,
    passages: &[&str],
    definition: Option<&RelevanceDefinition>,
) -> Result<ListwisePrompt, PromptError> {
    require_text(query, "query")?;
    if passages.is_empty() || passages.len() > MAX_LISTWISE_PASSAGES {
        return Err(PromptError::WindowSize {
            got: passages.len(),
            max: MAX_LISTWISE_PASSAGES,
        });
    }
    let listing = passages
        .iter()
        .enumerate()
        .map(|(i, p)| format!("[{}] {}", i + 1, p))
        .collect::<Vec<_>>()
        .join("\n");
    let num = passages.len().to_string();
    let user = match definition {
        Some(def) => templates::fill(
            templates::get("listwise_user_definition"),
            &[
                ("num", &num),
                ("query", query),
                ("passages", &listing),
                ("relevance_definition", &background_text(def)),
            ],
        ),
        None => templates::fill(
            templates::get("listwise_user"),
            &[("num", &num), ("query", query), ("passages", &listing)],
        ),
    };
    Ok(ListwisePrompt {
        system: templates::get("listwise_system").trim_end().to_string(),
        user: user.trim_end().to_string(),
    })
}

/// The constant definition for QA datasets, where a paragraph counts only
/// if it directly answers (part of) the question.
pub fn render_fixed_qa_definition() -> RelevanceDefinition {
    RelevanceDefinition {
        meaning: templates::get("fixed_qa_definition").trim_end().to_string(),
        examples: Vec::new(),
        provenance: Provenance::Fixed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn def() -> RelevanceDefinition {
        RelevanceDefinition {
            meaning: "The question asks about scope 3 emissions.".into(),
            examples: vec!["Scope 3 totals".into(), "Supplier emissions".into()],
            provenance: Provenance::Generated,
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for name in ["point-ask-d", "point-ask", "point-cot-ask-prob-d", "point-cot-ask", "list", "list-d"] {
            let v: PromptVariant = name.parse().unwrap();
            assert_eq!(v.to_string(), name);
        }
        assert!("point-d".parse::<PromptVariant>().is_err());
        assert!("pairwise".parse::<PromptVariant>().is_err());
        let json = serde_json::to_string(&PromptVariant::default()).unwrap();
        assert_eq!(json, "\"point-ask-d\"");
    }

    #[test]
    fn definition_prompt() {
        let q = "What is the firm's Scope 3 emission?";
        let p = render_definition_prompt(q).unwrap();
        assert!(p.contains(&format!("<question>: \"\"{q}\"\"")));
        assert!(p.contains("Meaning of the question:"));
        assert!(p.contains("Examples of information that the question is looking for:"));
        assert!(render_definition_prompt("  ").is_err());
    }

    #[test]
    fn improved_definition_prompt() {
        let ex = vec!["first example".to_string(), "second example".to_string()];
        let p = render_improved_definition_prompt("Q?", &ex).unwrap();
        let begin = p.find("[BEGIN").unwrap();
        let end = p.find("[END").unwrap();
        let a = p.find("first example").unwrap();
        let b = p.find("second example").unwrap();
        assert!(begin < a && a < b && b < end);
        assert_eq!(
            render_improved_definition_prompt("Q?", &[]),
            Err(PromptError::Empty("gold examples"))
        );
    }

    #[test]
    fn pointwise_prompt_variants() {
        let ask = PromptVariant::pointwise(false, true, ConfidencePhrasing::AskConfidence);
        let p = render_pointwise_prompt("Q?", Some(&def()), "para", &ask).unwrap();
        assert!(p.contains("Give your honest confidence score between 0.0 and 1.0"));
        assert!(p.contains("<background_information>: \"Meaning of the question: The question asks"));
        assert!(!p.contains("[Reason]"));
        assert!(p.ends_with("very confident about the guess.>"));

        let prob = PromptVariant::pointwise(true, true, ConfidencePhrasing::AskProbability);
        let p = render_pointwise_prompt("Q?", Some(&def()), "para", &prob).unwrap();
        assert!(p.contains("[Probability Helpful]"));
        assert!(p.contains("[Reason]: <Reason why"));

        let bare = PromptVariant::pointwise(false, false, ConfidencePhrasing::AskConfidence);
        let p = render_pointwise_prompt("Q?", None, "para", &bare).unwrap();
        assert!(p.starts_with("You will be provided with a <question> the analyst seeks to answer, and a <paragraph>"));
        assert!(!p.contains("background_information>:"));

        assert_eq!(
            render_pointwise_prompt("Q?", None, "para", &ask),
            Err(PromptError::MissingDefinition(ask))
        );
        assert!(render_pointwise_prompt("Q?", None, "para", &PromptVariant::listwise(false)).is_err());
    }

    #[test]
    fn listwise_prompt() {
        let p = render_listwise_prompt("q", &["alpha", "beta", "gamma"], None).unwrap();
        // the format example "[4] > [2]" also carries brackets, so count
        // passage headers at line starts
        for (id, text) in [("[1]", "alpha"), ("[2]", "beta"), ("[3]", "gamma")] {
            let header = format!("\n{id} ");
            assert_eq!(p.user.matches(&header).count(), 1, "{id}");
            assert!(p.user.contains(&format!("{id} {text}\n")));
        }
        assert_eq!(
            p.system,
            "You are RankLLM, an intelligent assistant that can rank passages based on their relevancy to the query."
        );
        assert!(p.user.starts_with("I will provide you with 3 passages"));
        let with_def = render_listwise_prompt("q", &["alpha"], Some(&def())).unwrap();
        assert!(with_def.user.contains("background information that explains the query"));
        assert!(render_listwise_prompt("q", &[], None).is_err());
    }

    #[test]
    fn fixed_qa_definition() {
        let d = render_fixed_qa_definition();
        assert!(d.meaning.contains("directly answer the <question>"));
        assert_eq!(d.provenance, Provenance::Fixed);
        assert_eq!(d, render_fixed_qa_definition());
        let v = PromptVariant::default();
        let p = render_pointwise_prompt("Q?", Some(&d), "para", &v).unwrap();
        assert!(p.contains("<background_information>: \"The <paragraph> is useful only if"));
    }

    fn marker() -> impl Strategy<Value = String> {
        "[a-z]{6,12}".prop_map(|s| format!("ZX{s}QW"))
    }

    proptest! {
        #[test]
        fn inputs_appear_once_in_their_slot(q in marker(), para in marker(), meaning in marker(), cot: bool, prob: bool) {
            let def = RelevanceDefinition { meaning: meaning.clone(), examples: vec![], provenance: Provenance::Human };
            let phrasing = if prob { ConfidencePhrasing::AskProbability } else { ConfidencePhrasing::AskConfidence };
            let v = PromptVariant::pointwise(cot, true, phrasing);
            let p = render_pointwise_prompt(&q, Some(&def), &para, &v).unwrap();
            let q_slot = format!("<question>: \"{q}\"");
            let para_slot = format!("<paragraph>: \"{para}\"");
            prop_assert_eq!(p.matches(&q).count(), 1);
            prop_assert!(p.contains(&q_slot));
            prop_assert_eq!(p.matches(&para).count(), 1);
            prop_assert!(p.contains(&para_slot));
            prop_assert_eq!(p.matches(&meaning).count(), 1);

            let d = render_definition_prompt(&q).unwrap();
            prop_assert_eq!(d.matches(&q).count(), 1);

            let l = render_listwise_prompt(&q, &[&para], None).unwrap();
            let listed = format!("[1] {para}");
            prop_assert_eq!(l.user.matches(&para).count(), 1);
            prop_assert!(l.user.contains(&listed));
        }
    }
}
