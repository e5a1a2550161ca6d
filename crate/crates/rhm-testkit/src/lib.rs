//! Test support for the `rhm` crate: enumeration oracles independent of the
//! inference code, plus small statistical helpers for seeded checks.

pub mod oracle;
pub mod stats;
