//! End-to-end acceptance checks for the workspace live in `tests/acceptance.rs`.
//! This package has no library code; it exists so the acceptance run is a
//! separate target that executes after the per-crate suites.
