//! Decentralized gradient descent over fixed mixing networks.
//!
//! Agents hold private smooth convex objectives and repeat two moves per
//! synchronized round: average with their neighbors through a symmetric
//! doubly stochastic mixing matrix, then take a local negative-gradient step
//! with a fixed stepsize. This crate bundles the simulation engine with the
//! spectral and convexity constants that predict where such a run lands:
//!
//! - [`netgen`]: random connected communication graphs.
//! - [`mixing`]: mixing matrices and their spectrum (`beta`, `lambda_n`).
//! - [`problems`]: consensus objectives — a quadratic averaging toy, least
//!   squares, and the dual of column-partitioned basis pursuit.
//! - [`engine`]: the iteration itself, with divergence guards and traces.
//! - [`theory`]: stepsize ceilings, gradient and deviation bounds, and
//!   linear-rate constants.
//! - [`diagnostics`]: per-round error metrics audited against those bounds.
//! - [`oracle`]: centralized reference solvers providing ground truth.
//!
//! All numeric code is generic over [`scalar::Real`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar for the common case.

pub mod config;
pub mod diagnostics;
pub mod engine;
pub mod linalg;
pub mod mixing;
pub mod netgen;
pub mod oracle;
pub mod problems;
pub mod scalar;
pub mod theory;

pub use scalar::Real;

/// f64 instantiations of the core types.
pub type Matrix64 = linalg::DenseMatrix<f64>;
pub type MixingMatrix64 = mixing::MixingMatrix<f64>;
pub type AgentStates64 = engine::AgentStates<f64>;
pub type Trace64 = engine::Trace<f64>;
pub type BoundSet64 = theory::BoundSet<f64>;
pub type IterationRecord64 = diagnostics::IterationRecord<f64>;
