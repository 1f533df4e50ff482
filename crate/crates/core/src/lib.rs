//! Value-change (VC) analysis for neural-network function approximation.
//!
//! The VC of a sampled function at a node is the largest difference between
//! any two samples inside an axis-aligned window of side `L` centred at the
//! node, with the window clipped to the domain. Around this quantity the crate
//! provides:
//!
//! - [`grid`]: regular box grids, sampled scalar fields and their file formats
//!   (`csv-grid`, `f64grid`, PGM).
//! - [`vc`]: separable windowed extrema, VC fields, integral VC (IVC) and the
//!   IVC distance between two fields.
//! - [`density`]: Gaussian KDE of VC samples and density ratios (VCDR).
//! - [`nn`]: a small double-precision tanh MLP with MSE loss, SGD and Adam.
//! - [`vcp`]: VC-guided preprocessing, either by pre-training a compact network
//!   and widening it, or by subtracting a multilinear surrogate.
//! - [`experiments`]: error-vs-VC profiles, density evolution, strategy
//!   comparisons and the canned desk-scale experiments.
//! - [`cli`]: the `vc` command-line tool.
//!
//! Grids are linearized row-major (last axis fastest) everywhere.

pub mod cli;
pub mod density;
pub mod experiments;
pub mod grid;
pub mod nn;
pub mod vc;
pub mod vcp;

mod error;
mod util;

pub use error::{Error, Result};
