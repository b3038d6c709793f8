//! Simulation and multifractal analysis of b-adic independent cascade
//! functions `F_W ∘ F_L^{-1}`.
//!
//! [`generator`] holds the joint law of one tree node, [`spectrum`] the exact
//! functions derived from it, [`cascade`] reproducible realizations and their
//! finite-level traces, [`measures`] the mass distributions living on the
//! tree, and [`estimators`] the numerical dimension fits.

pub mod cascade;
pub mod error;
pub mod estimators;
pub mod generator;
pub mod measures;
pub mod rng;
pub mod spectrum;

pub use cascade::{CascadeRealization, FunctionTrace, Word};
pub use error::{Error, Result};
pub use generator::{check_assumptions, presets, AssumptionReport, Atom, GeneratorSpec, Side};
pub use spectrum::{
    derivatives, interval_j, predicted_spectra, tau, tau_star, upper_bounds, IntervalJ,
    PredictedSpectra, SpectrumPoint, Subinterval, UpperBounds,
};
