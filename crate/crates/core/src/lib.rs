//! Expressiveness datasets for graph neural networks and the tools to certify
//! and learn them.
//!
//! - [`logic`]: CNF formulas, DIMACS, DPLL.
//! - [`graph`]: typed clause graphs, the CNF encoding, exact isomorphism.
//! - [`wl`]: 1-WL and folklore 2-WL refinement.
//! - [`datagen`]: EXP/CEXP generation, validation and serialization.
//! - [`rni`]: random node initialization and the individualization check.
//! - [`nn`]: message-passing network with global readout, backprop, Adam,
//!   training and cross-validation.

pub mod datagen;
pub mod error;
pub mod graph;
pub mod logic;
pub mod nn;
pub mod rni;
pub mod wl;

pub use error::{Error, Result};
