//! Covariate-adjusted estimation of marginal treatment effects in randomized
//! trials, with influence-function standard errors and a Monte Carlo harness.

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod estimators;
pub mod glm;
pub mod learners;
pub mod linalg;
pub mod selection;
pub mod simulation;
pub mod variance;

pub use error::{Error, ErrorKind, Result};
