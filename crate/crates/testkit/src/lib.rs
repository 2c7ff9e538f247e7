//! Shared test support: the bundled fixture pages and reference
//! implementations written independently of the production code paths.

pub mod detect_oracle;
pub mod fixtures;
pub mod synth;
pub mod telemetry_oracle;

pub use fixtures::{corpus, fixture, Fixture};
