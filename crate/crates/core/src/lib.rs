//! Numerical laboratory for estimating singular distributions.
//!
//! The crate covers the full pipeline behind a GAN-type estimator for data
//! generated as `g₀(Z) + σ₀ ε` with a low-dimensional latent `Z`:
//!
//! - [`composite`]: structured truth generators (compositions of Hölder maps)
//!   and their intrinsic dimension / smoothness.
//! - [`netgen`]: sparse ReLU networks of the class `D(L, p, s, F)`, with exact
//!   backpropagation, constraint projection, sizing rules and entropy bounds.
//! - [`measures`]: latent sampling, pushforwards, Gaussian convolution and
//!   weighted empirical measures.
//! - [`ot`]: exact Wasserstein distances (network simplex, assignment, 1-D
//!   monotone coupling), Kantorovich potentials and empirical rate tables.
//! - [`ipm`]: integral probability metrics for finite potential sets,
//!   Lipschitz networks and smooth feature sets.
//! - [`estimators`]: the GAN-type estimator, the perturbed-data likelihood
//!   baseline and the oracle-inequality audit.
//! - [`fano`]: the bump-function packing construction behind the minimax
//!   lower bound.
//! - [`harness`]: experiment configuration, exponent fitting and report
//!   emission used by the `lab` binary.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default) and plain iterators otherwise.

// `!(x > 0.0)` is used on purpose to reject NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod composite;
pub mod error;
pub mod estimators;
pub mod fano;
pub mod generator;
pub mod harness;
pub mod ipm;
pub mod measures;
pub mod netgen;
pub mod ot;
pub mod par;
pub mod quadrature;
pub mod rng;

pub use error::{Error, Result};
pub use generator::Generator;
