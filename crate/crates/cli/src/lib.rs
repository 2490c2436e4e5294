//! Experiment harness for hybrid-array spatial covariance estimation: JSON
//! configuration, seeded Monte Carlo sweeps over SNR, frame count, or path
//! count, and flat CSV/JSON outputs suitable for plotting.

pub mod config;
pub mod output;
pub mod runner;
