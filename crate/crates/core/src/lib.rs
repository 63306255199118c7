//! Deadline-based Wi-Fi offloading as a three-state M/MMSP/1 queue.
//!
//! A device with a frame backlog transmits over Wi-Fi when a hotspot is in
//! range. When Wi-Fi is lost it defers transmission and starts a deadline
//! timer; if no hotspot appears before the timer expires it switches to
//! cellular. The crate computes mean delay and offloading efficiency of this
//! policy along three independent numeric paths, simulates it, and picks the
//! deadline that maximizes a delay/efficiency utility.
//!
//! * [`params`]: parameters, stationary channel quantities, utility
//! * [`analytic`]: closed forms from the embedded chain
//! * [`ctmc`]: generating functions and the truncated-chain oracle
//! * [`sim`]: discrete-event simulator
//! * [`optimize`]: deadline sweeps, optimal deadline, strategy comparison
//! * [`cli`]: the `offload` command-line front end

// `!(x < y)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod ctmc;
pub mod error;
pub mod optimize;
pub mod params;
pub mod sim;

pub use analytic::{analyze, max_mean_delay, Analysis, AnalyticPerformance};
pub use error::{Error, Result};
pub use params::{utility, Deadline, Preference, ServiceState, SystemParams};
