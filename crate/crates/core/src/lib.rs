//! Deterministic discrete-event simulation and stability analysis of
//! k-station cascade queueing systems.
//!
//! A cascade system is a series of single-server stations with renewal
//! arrivals and i.i.d. service times. Whenever station `i` holds more
//! of its own customers than a threshold `c_i` while station `i + 1`
//! is completely empty, one waiting customer moves down and is served
//! there with its own service law, preempted by (and resumed after) the
//! receiving station's own arrivals.
//!
//! The crate provides:
//!
//! - [`sim`]: an event-driven simulator of the exact Markov state, with
//!   reproducible variate streams and per-path invariant checking;
//! - [`metrics`]: counting processes, time integrals, and batch-means
//!   estimators for effective traffic intensities, idle fractions, drift,
//!   and the transfer-rate bound;
//! - [`stability`]: the stability criterion `rho~_i =
//!   lambda_i / (mu_i + mu_{i|i+1} (1 - rho*_{i+1})) < 1`, evaluated in
//!   closed form for two stations and by backward induction with
//!   simulated effective intensities for longer cascades;
//! - [`oracle`]: independent ground truths — a Lindley recursion for the
//!   standalone GI/G/1 station and a truncated-CTMC stationary solver for
//!   the exponential two-station system;
//! - [`scenario`] and [`runner`]: the TOML scenario surface and the
//!   experiment harness behind the `cascade` command-line tool.

pub mod config;
pub mod dist;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod runner;
pub mod scenario;
pub mod sim;
pub mod stability;
pub mod stats;

pub use config::{StationConfig, SystemConfig, TransferRule};
pub use dist::{make_stream, DistributionSpec, SpreadOutReport, VariateStream};
pub use error::{Error, Result};
pub use metrics::{Estimate, EstimatorOptions, TrajectoryRecord};
pub use sim::{run_trajectory, RunOptions, Simulator};
pub use stability::{backward_induction, classify_two_station, rho_tilde, StabilityVerdict};
