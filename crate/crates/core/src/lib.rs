//! Estimation of unexplained disparities and their reduction under
//! hypothetical interventions on two sequential factors.

pub mod crossfit;
pub mod data;
pub mod decomposition;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
