//! idiorec-core: bookmark-driven user profiling over a web directory ontology.
//!
//! The crate is organised around a small pipeline:
//!
//! * [`ontology`] loads a DMOZ-style category tree and indexes its URLs,
//! * [`ingest`] pulls raw bookmarks out of browser export files,
//! * [`profile`] turns cleaned bookmark lists into per-user category vote vectors,
//! * [`similarity`] compares two profiles with a tree-structure-aware measure
//!   (plus a flat Pearson baseline),
//! * [`ais`] runs an idiotypic immune-network loop over candidate profiles to
//!   select a diverse neighbourhood and emit recommendations.
//!
//! Everything is deterministic: no hidden randomness, no system clocks. Any
//! randomness lives in the caller (seeded RNGs in the CLI and test harnesses).

pub mod ais;
pub mod config;
pub mod ingest;
pub mod ontology;
pub mod profile;
pub mod similarity;

pub use ais::{AisError, AisParams, AisState, Antibody, Termination};
pub use config::ConfigError;
pub use ontology::{CategoryId, OntologyError, OntologyIndex, TreeAddress};
pub use profile::{LookupMode, ProfileEncoding, SizeBasis, WebProfile};
pub use similarity::{Matcher, Measure, SimilarityParams};
