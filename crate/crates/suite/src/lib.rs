//! Acceptance checks for bcpsim live in `tests/acceptance.rs`.
