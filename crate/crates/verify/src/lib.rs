//! Acceptance suite for `becbell`; see `tests/acceptance.rs`.
