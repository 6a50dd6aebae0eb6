//! Temporal signed link prediction.
//!
//! A signed-graph attention encoder produces per-snapshot node embeddings;
//! a historical context module (adaptive temporal weighting, an LSTM over the
//! snapshot axis, multi-head temporal attention, and a learned fusion gate)
//! enhances the current snapshot's embeddings with information from the
//! preceding window. Everything trains end to end with hand-written
//! reverse-mode gradients over flat `f64` buffers — no autodiff framework.
//!
//! The crate also ships synthetic temporal signed-network generators
//! (small-world and preferential-attachment), CSV ingestion for signed-edge
//! logs, and a seeded evaluation harness (AUC / F1 / precision@k with paired
//! t-tests) behind the `tslp` command-line binary.

pub mod backbone;
pub mod cli;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod graph;
pub mod hcim;
pub mod io;
pub mod linalg;
pub mod params;
pub mod plot;
pub mod report;
pub mod synth;
pub mod training;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
