//! Numerical laboratory for the life span of solutions to the heat equation on
//! the half-space R^N_+ with the nonlinear boundary flux -∂u/∂x_N = u^p.
//!
//! The crate solves the boundary integral equation (N = 1), evaluates
//! necessary and sufficient solvability conditions at a given time, encodes
//! the asymptotic life-span laws, and fits κ-sweeps against them.

pub mod conditions;
pub mod error;
pub mod float_serde;
pub mod kernel;
pub mod numeric;
pub mod param;
pub mod predictor;
pub mod problem;
pub mod profiles;
pub mod quadrature;
pub mod sweep;
pub mod volterra;

pub use error::{Error, Result};
pub use param::Param;
pub use problem::ProblemSpec;
pub use profiles::InitialProfile;
