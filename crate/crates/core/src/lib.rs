//! Continuous-time Markov chain approximations of Lévy processes on
//! equidistant lattices.
//!
//! A [`LevyModel`] is discretized into a spatially homogeneous chain whose
//! generator is built by [`discretization`]. Transition densities of the chain
//! are obtained either by Fourier inversion of its characteristic exponent or
//! through the action of the matrix exponential of the truncated generator,
//! and compared against the exact density of the process by [`convergence`].

pub mod cli;
pub mod convergence;
pub mod density;
pub mod discretization;
pub mod error;
pub mod levy_model;
pub mod quadrature;

pub use discretization::{LatticeSpec, SchemeKind};
pub use error::{LevyError, Result};
pub use levy_model::{LevyMeasure, LevyModel};
