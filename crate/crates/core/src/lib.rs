//! Finite-N realization of permutation-averaged ("macroscopic") observables
//! on `(C^d)^{⊗N}`: symmetrization maps, frequency operators, product and
//! symmetric states, their large-N limits, De Finetti mixtures, and the
//! classical Bernoulli counterpart.

pub mod cli;
pub mod definetti;
pub mod error;
pub mod linalg;
pub mod macrolimit;
pub mod optimize;
pub mod sections;
pub mod states;
pub mod stochastics;

pub use error::{Error, Result};
