//! Acceptance criteria for `carflow`; see `tests/acceptance.rs`.
