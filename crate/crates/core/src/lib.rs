//! Multi-antenna GLRT synchronization statistic and its large-system
//! Gaussian approximations.
//!
//! The library computes the log-GLRT statistic for detecting a known
//! training sequence received through an unknown multipath channel in
//! Gaussian noise with unknown spatial covariance, and provides three
//! closed-form approximations of its distribution (classical chi-squared,
//! large-(M,N) Gaussian, large-(L,M,N) Gaussian) together with a
//! Monte-Carlo harness for validating them via moments and ROC curves.

pub mod asymptotics;
pub mod config;
pub mod error;
pub mod experiment;
pub mod glrt;
pub mod matkernel;
pub mod montecarlo;
pub mod signal;

pub use error::{Error, Result};
