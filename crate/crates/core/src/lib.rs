//! Relevance annotation with calibrated LLM judges: corpus preparation,
//! pair sampling, prompting, annotation, evaluation and distillation data.

pub mod annotator;
pub mod cli;
pub mod corpus;
pub mod distill;
pub mod gateway;
pub mod io;
pub mod metrics;
pub mod prompting;
pub mod retrieval;
pub mod sampler;

/// 64-bit FNV-1a. Stable across platforms and releases, unlike the std
/// hasher, so it is safe for seeds and fixture hashing.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
