//! Estimators of `Q₀` from noisy samples.
//!
//! - [`gan_fit`]: the GAN-type estimator `argmin_g d_F(Q_g, ℙ_n)`.
//! - [`mle_fit`]: the sieve likelihood baseline on perturbed data.
//! - [`oracle_audit`]: term-by-term check of the oracle inequality against a
//!   synthetic truth.

mod adam;
mod audit;
mod gan;
mod mle;

pub use audit::{evaluate_estimator, oracle_audit, AuditConfig, AuditInput, OracleTerms, Term, MIN_EVAL};
pub use gan::{gan_fit, write_trace, Critic, GanConfig, GanFit, GeneratorArch, TraceRow};
pub use mle::{default_sigma_tilde, mle_fit, mle_objective, MleConfig, MleFit, SIGMA_FIT_MAX, SIGMA_FIT_MIN};
