pub mod error;
pub mod exec;
pub mod minimax_audit;
pub mod numerics;
pub mod radial_convolution;
pub mod radial_models;
pub mod risk_sim;
pub mod rv_priors;
pub mod shrinkage;
pub mod special_integrals;

pub use error::{Error, Result};
