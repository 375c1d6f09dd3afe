//! Acceptance suite for `pinncert`; see `tests/acceptance.rs`.
