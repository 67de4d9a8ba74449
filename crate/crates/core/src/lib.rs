//! Post-processing of MCMC output from finite mixture models to undo label
//! switching.
//!
//! The crate is organised around five modules:
//!
//! * [`model`]: mixture specifications, draws, traces and permutations.
//! * [`sampler`]: data generators and Gibbs samplers producing traces.
//! * [`relabel`]: six relabelling algorithms and the assignment solver.
//! * [`diagnostics`]: misclassification, KL distance, posterior summaries, R-hat.
//! * [`cli`]: file formats, built-in experiments and the command-line driver.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod model;
pub mod relabel;
pub mod sampler;

pub use error::{Error, Result};
