//! Experiment kit for citation text generation with instruction-following
//! language models.
//!
//! The crate covers the whole offline pipeline: corpus ingestion and cleanup,
//! intent handling, prompt rendering, cached generation, native surface
//! metrics and ROUGE-L, the scorer sidecar client, statistical analysis and
//! the pyramid-style human evaluation backend.

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod exec;
pub mod gateway;
pub mod humeval;
pub mod intents;
pub mod metrics;
pub mod promptgen;
pub mod provenance;
pub mod scorer;
pub mod text;

pub use error::{Error, ErrorClass, Result};
pub use exec::Exec;
