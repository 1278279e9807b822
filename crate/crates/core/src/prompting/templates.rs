//! Prompt template assets and a single-pass placeholder renderer.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

pub const TEMPLATE_VERSION: &str = "v1";

macro_rules! asset {
    ($name:literal) => {
        ($name, include_str!(concat!("../../templates/v1/", $name, ".txt")))
    };
}

const ASSETS: &[(&str, &str)] = &[
    asset!("pointwise_task_definition"),
    asset!("pointwise_task_no_definition"),
    asset!("pointwise_output_confidence"),
    asset!("pointwise_output_probability"),
    asset!("reason_line"),
    asset!("definition"),
    asset!("improved_definition"),
    asset!("listwise_system"),
    asset!("listwise_user"),
    asset!("listwise_user_definition"),
    asset!("fixed_qa_definition"),
];

pub(crate) fn get(name: &str) -> &'static str {
    ASSETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, body)| *body)
        .unwrap_or_else(|| panic!("unknown template asset {name}"))
}

/// sha256 of every template asset, keyed by `<version>/<name>`.
pub fn template_digests() -> BTreeMap<String, String> {
    ASSETS
        .iter()
        .map(|(name, body)| {
            (
                format!("{TEMPLATE_VERSION}/{name}"),
                hex::encode(Sha256::digest(body.as_bytes())),
            )
        })
        .collect()
}

/// Replaces `{name}` placeholders in one left-to-right pass. Substituted
/// values are never rescanned, and braces that do not name a provided
/// variable are copied through unchanged.
pub(crate) fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + vars.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let matched = after.find('}').and_then(|close| {
            let key = &after[..close];
            vars.iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| (*v, close))
        });
        match matched {
            Some((value, close)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}
