//! Experiment harness for decentralized gradient descent: declarative TOML
//! configs, canned scenarios, per-round CSV traces, bound audits, and
//! stepsize comparison tables.

pub mod compare;
pub mod config;
pub mod runner;
pub mod scenario;
pub mod trace;
