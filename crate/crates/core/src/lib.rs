//! Temporal transaction-graph toolkit for illicit-transaction classification.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`] ingests the three-file CSV release into an immutable
//!   [`graph::TemporalGraph`] and validates it.
//! * [`features`] computes one-hop neighbour aggregates and assembles the
//!   local / all / embedding-enhanced feature sets.
//! * [`numerics`] holds the sparse and dense kernels, losses and optimiser.
//! * [`models`] registers the six classifier families behind one trait.
//! * [`bench`] runs the temporal evaluation protocol and writes reports.

pub mod bench;
pub mod features;
pub mod graph;
pub mod label;
pub mod models;
pub mod numerics;

pub use label::{Class, ClassWeights, Label};
