#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
pub mod fit;
pub mod harness;
pub mod levels;
pub mod metrics;
pub mod observation;
pub mod pattern;
pub mod scheme;
pub mod simulate;
pub mod trace;
