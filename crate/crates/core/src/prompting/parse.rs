use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{PromptError, PromptVariant};
use crate::corpus::{Provenance, RelevanceDefinition};

const GUESS_LABEL: &str = "[Guess]:";
const REASON_LABEL: &str = "[Reason]:";

static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?").unwrap());
static BRACKETED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[\s*(\d+)\s*\]").unwrap());
static LIST_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:\d+[.)]|[-*•])\s*").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Guess {
    Yes,
    No,
}

impl Guess {
    /// Matches a yes/no surface form, ignoring case, whitespace and
    /// surrounding punctuation.
    pub fn from_surface(surface: &str) -> Option<Guess> {
        let word = surface.trim_matches(|c: char| !c.is_alphanumeric());
        if word.eq_ignore_ascii_case("yes") {
            Some(Guess::Yes)
        } else if word.eq_ignore_ascii_case("no") {
            Some(Guess::No)
        } else {
            None
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Guess::Yes => "Yes",
            Guess::No => "No",
        }
    }
}

/// Fields of a pointwise answer block. For probability-phrased variants
/// `confidence` holds the stated probability that the paragraph helps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedPointwise {
    pub reason: Option<String>,
    pub guess: Guess,
    pub confidence: f64,
    /// Original value when the stated confidence fell outside [0, 1].
    pub clamped_from: Option<f64>,
}

/// Text after the last occurrence of `label`, up to the end of the line.
/// An empty remainder falls through to the next non-blank line.
fn last_field<'a>(text: &'a str, label: &str) -> Option<(usize, &'a str)> {
    let pos = text.rfind(label)?;
    let after = &text[pos + label.len()..];
    let value = after
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("");
    Some((pos, value))
}

pub fn parse_pointwise_response(
    text: &str,
    variant: &PromptVariant,
) -> Result<ParsedPointwise, PromptError> {
    let (guess_pos, guess_raw) =
        last_field(text, GUESS_LABEL).ok_or_else(|| PromptError::MissingField {
            field: "guess",
            raw: text.to_string(),
        })?;
    let first_word = guess_raw.split_whitespace().next().unwrap_or("");
    let guess = Guess::from_surface(first_word).ok_or_else(|| PromptError::InvalidField {
        field: "guess",
        value: guess_raw.to_string(),
        raw: text.to_string(),
    })?;

    let conf_label = variant.confidence_label();
    let (_, conf_raw) = last_field(text, conf_label).ok_or_else(|| PromptError::MissingField {
        field: "confidence",
        raw: text.to_string(),
    })?;
    let stated: f64 = NUMBER
        .find(conf_raw)
        .and_then(|m| m.as_str().parse().ok())
        .filter(|v: &f64| v.is_finite())
        .ok_or_else(|| PromptError::InvalidField {
            field: "confidence",
            value: conf_raw.to_string(),
            raw: text.to_string(),
        })?;
    let confidence = stated.clamp(0.0, 1.0);
    let clamped_from = (confidence != stated).then(|| {
        tracing::warn!(stated, clamped = confidence, "confidence outside [0, 1] clamped");
        stated
    });

    let reason = if variant.cot {
        let head = &text[..guess_pos];
        let start = head.rfind(REASON_LABEL).ok_or_else(|| PromptError::MissingField {
            field: "reason",
            raw: text.to_string(),
        })?;
        Some(head[start + REASON_LABEL.len()..].trim().to_string())
    } else {
        None
    };

    Ok(ParsedPointwise {
        reason,
        guess,
        confidence,
        clamped_from,
    })
}

/// One decimal when that is exact, otherwise the shortest representation
/// that parses back to the same value.
pub fn render_confidence(value: f64) -> String {
    if ((value * 10.0).round() / 10.0) == value {
        format!("{value:.1}")
    } else {
        format!("{value}")
    }
}

/// The answer block a model is asked to produce, e.g.
/// `[Guess]: Yes\n[Confidence]: 0.9`.
pub fn format_pointwise_answer(parsed: &ParsedPointwise, variant: &PromptVariant) -> String {
    let mut out = String::new();
    if variant.cot {
        out.push_str(REASON_LABEL);
        out.push(' ');
        out.push_str(parsed.reason.as_deref().unwrap_or(""));
        out.push('\n');
    }
    out.push_str(&format!(
        "{GUESS_LABEL} {}\n{} {}",
        parsed.guess.as_str(),
        variant.confidence_label(),
        render_confidence(parsed.confidence)
    ));
    out
}

/// Extracts a permutation of `1..=n` from a `[a] > [b] > ...` reply.
/// Out-of-range and repeated ids are dropped; ids never mentioned are
/// appended in their original order.
pub fn parse_listwise_response(text: &str, n: usize) -> Result<Vec<usize>, PromptError> {
    let mut found_any = false;
    let mut seen = vec![false; n + 1];
    let mut order = Vec::with_capacity(n);
    for cap in BRACKETED.captures_iter(text) {
        found_any = true;
        let Ok(id) = cap[1].parse::<usize>() else {
            continue;
        };
        if (1..=n).contains(&id) && !seen[id] {
            seen[id] = true;
            order.push(id);
        }
    }
    if !found_any {
        return Err(PromptError::MissingField {
            field: "ranking",
            raw: text.to_string(),
        });
    }
    order.extend((1..=n).filter(|&id| !seen[id]));
    Ok(order)
}

/// Reads a "Meaning of the question: ... Examples of information ...:"
/// reply into a definition.
pub fn parse_definition_response(
    text: &str,
    provenance: Provenance,
) -> Result<RelevanceDefinition, PromptError> {
    const MEANING: &str = "Meaning of the question:";
    const EXAMPLES: &str = "Examples of information that the question is looking for:";
    let start = text.rfind(MEANING).ok_or_else(|| PromptError::MissingField {
        field: "meaning",
        raw: text.to_string(),
    })? + MEANING.len();
    let body = &text[start..];
    let (meaning, examples_block) = match body.find(EXAMPLES) {
        Some(p) => (&body[..p], &body[p + EXAMPLES.len()..]),
        None => (body, ""),
    };
    let meaning = meaning.trim().to_string();
    if meaning.is_empty() {
        return Err(PromptError::Empty("meaning"));
    }
    let examples = examples_block
        .lines()
        .map(|l| LIST_MARKER.replace(l, "").trim().to_string())
        .filter(|l| !l.is_empty())
        .collect();
    Ok(RelevanceDefinition {
        meaning,
        examples,
        provenance,
    })
}
