//! Desk-scale experiments on the smallest singular value of shifted random
//! matrices `A + M`.
//!
//! The crate is split by subject:
//!
//! * [`ensembles`]: seeded scalar laws, random matrices and vectors, shift matrices.
//! * [`spectra`]: singular values, K-rank, row minors, singular-subspace projections.
//! * [`arithmetic`]: compressibility, least common denominator (LCD), Lévy concentration.
//! * [`tail`]: Monte Carlo tail probabilities with exact binomial intervals.
//! * [`counterexample`]: the diagonal-shift constructions and the Neumann-series reduction.
//! * [`lattice`]: lattice counting, ellipsoid covers and LCD level-set nets.
//! * [`stats`]: small statistical helpers shared by the experiments.
//! * [`runner`]: deterministic trial-parallel execution.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arithmetic;
pub mod counterexample;
pub mod ensembles;
mod error;
pub mod lattice;
pub mod runner;
pub mod spectra;
pub mod stats;
pub mod tail;

pub use error::{Error, Result};

/// Dense real matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense real column vector.
pub type Vector = nalgebra::DVector<f64>;
