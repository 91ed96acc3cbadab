//! Deterministic synthetic tick-corpus generator with a ground-truth
//! manifest: the verification oracle for parsing, hit segmentation,
//! aggregation and the pre-hit analyses.
//!
//! A [`scenario::ScenarioSpec`] (JSON) names stocks, dates with regime
//! labels, and per-stock-day plans; [`generator::generate`] emits the
//! corpus in the canonical CSV format together with a
//! [`manifest::TruthManifest`] derived from the plan alone, independent of
//! the emitted tick encoding.

pub mod demo;
pub mod generator;
pub mod manifest;
pub mod scenario;

pub use generator::{generate, GenError, GeneratedCorpus};
pub use manifest::TruthManifest;
pub use scenario::ScenarioSpec;
