//! Grassmann geometry, block Rayleigh quotient calculus and the
//! asymptotic and finite-sample excess-risk theory of PCA, with the
//! Monte Carlo machinery used to check it.

pub mod error;
pub mod fd;
pub mod grassmann;
pub mod linalg;
pub mod models;
pub mod moments;
pub mod montecarlo;
pub mod quadrature;
pub mod rayleigh;
pub mod risk;
pub mod rng;
pub mod serde_matrix;
pub mod tolerances;

pub use error::{Error, Result};
