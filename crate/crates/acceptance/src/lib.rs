//! Acceptance checks for `diras` live in `tests/acceptance.rs`.
