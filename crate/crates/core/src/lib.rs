//! Likelihood-based inference for Birnbaum-Saunders log-linear regression.
//!
//! Responses are modelled as `y_i = x_i' beta + eps_i` with sinh-normal
//! errors `eps_i ~ SN(alpha, 0, 2)`; equivalently `exp(y_i)` follows a
//! Birnbaum-Saunders law with shape `alpha` and scale `exp(x_i' beta)`.
//!
//! The crate provides maximum likelihood fitting (with and without
//! restrictions), the likelihood ratio, Wald, score and gradient tests for
//! a subset of the regression coefficients or for the shape parameter,
//! local power expansions under Pitman alternatives and a Monte Carlo
//! harness for size and power studies.

pub mod error;
pub mod estimate;
pub mod hypothesis;
pub mod localpower;
pub mod mcharness;
pub mod model;
pub mod optim;
pub mod sinh_normal;
pub mod specfun;

pub use error::{Error, Result};
pub use estimate::{fit, std_errors, FitResult, Restriction};
pub use hypothesis::{test_alpha, test_beta_subset, FourStatistics, Hypothesis, TestReport};
pub use model::{Dataset, Theta};
