//! Command-line front end for the recommendation pipeline: index building,
//! bookmark ingestion, similarity queries, immune-network recommendation
//! runs, and a seeded evaluation harness with synthetic corpora.
//!
//! The command implementations live here rather than in the binary so tests
//! can drive them in-process with an arbitrary writer.

pub mod commands;
pub mod config;
pub mod error;
pub mod eval;
pub mod synth;
