//! Discrete-event simulation of the offloading queue.
//!
//! The channel alternates between a Wi-Fi zone and a cellular-only zone on
//! its own, whether or not frames are waiting. Frames arrive as a Poisson
//! stream, carry exponential work with mean 1 and are served first come first
//! served at the rate of the current service state.

mod engine;
mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Deadline, Preference, SystemParams};

pub use stats::Estimate;

/// When the device falls back to cellular after losing Wi-Fi.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Immediately.
    OnTheSpot,
    /// Never; wait for the next hotspot.
    Pure,
    /// After a deadline with the mean given by the parameters.
    Deadline,
}

impl Strategy {
    pub fn effective_deadline(self, params: &SystemParams) -> Deadline {
        match self {
            Strategy::OnTheSpot => Deadline::Finite(0.0),
            Strategy::Pure => Deadline::Infinite,
            Strategy::Deadline => params.deadline,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeadlineKind {
    /// Exponential timer with the given mean, as in the queueing model.
    #[default]
    Exponential,
    /// Fixed timer.
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Seconds(f64),
    /// Roughly this many frames arrive after the warmup.
    Frames(u64),
}

/// Wi-Fi service rate of each hotspot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HotspotModel {
    /// Every hotspot serves at `mu2`.
    #[default]
    Fixed,
    /// Drawn uniformly from `[lo, hi]` frames/s on every Wi-Fi connection.
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: SystemParams,
    pub strategy: Strategy,
    #[serde(default)]
    pub deadline_kind: DeadlineKind,
    pub horizon: Horizon,
    #[serde(default = "default_warmup")]
    pub warmup_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub hotspot: HotspotModel,
}

fn default_warmup() -> f64 {
    0.1
}

fn default_replications() -> usize {
    20
}

impl SimConfig {
    pub fn new(params: SystemParams, strategy: Strategy) -> Self {
        SimConfig {
            params,
            strategy,
            deadline_kind: DeadlineKind::Exponential,
            horizon: Horizon::Frames(1_000_000),
            warmup_fraction: default_warmup(),
            seed: 0,
            replications: default_replications(),
            hotspot: HotspotModel::Fixed,
        }
    }

    pub fn with_strategy(self, strategy: Strategy) -> Self {
        SimConfig { strategy, ..self }
    }

    pub fn with_deadline(self, deadline: Deadline) -> Self {
        SimConfig {
            params: self.params.with_deadline(deadline),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.check_rates()?;
        let bad = |msg: String| Err(Error::Config(msg));
        match self.horizon {
            Horizon::Seconds(s) if !(s > 0.0 && s.is_finite()) => {
                return bad(format!("horizon must be positive, got {s} s"))
            }
            Horizon::Frames(0) => return bad("horizon must be at least one frame".into()),
            _ => {}
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return bad(format!(
                "warmup fraction must lie in [0, 1), got {}",
                self.warmup_fraction
            ));
        }
        if self.replications == 0 {
            return bad("at least one replication is required".into());
        }
        if let HotspotModel::Uniform { lo, hi } = self.hotspot {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return bad(format!("hotspot rate range [{lo}, {hi}] is invalid"));
            }
        }
        Ok(())
    }

    /// Simulated seconds, warmup included.
    pub fn horizon_secs(&self) -> f64 {
        match self.horizon {
            Horizon::Seconds(s) => s,
            Horizon::Frames(n) => n as f64 / (self.params.lambda * (1.0 - self.warmup_fraction)),
        }
    }

    /// Seed of replication `index`, derived from the master seed.
    pub fn replication_seed(&self, index: usize) -> u64 {
        let mut z = self.seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// `Ok(false)` flags an unstable pure-offloading run; any other strategy
    /// whose capacity does not exceed the arrival rate is an error.
    fn stability(&self) -> Result<bool> {
        let deadline = self.strategy.effective_deadline(&self.params);
        let p = self.params.with_deadline(deadline);
        if self.strategy == Strategy::Pure {
            return Ok(p.lambda < p.capacity());
        }
        let capacity = match (self.deadline_kind, deadline) {
            (DeadlineKind::Deterministic, Deadline::Finite(tau)) => {
                let r = p.availability();
                (1.0 - r) * (-p.r_c * tau).exp() * p.mu1 + r * p.mu2
            }
            _ => p.capacity(),
        };
        if p.lambda < capacity {
            Ok(true)
        } else {
            Err(Error::Unstable {
                lambda: p.lambda,
                capacity,
            })
        }
    }
}

/// Per-frame record of a traced run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameRecord {
    pub arrival_s: f64,
    /// Time the frame reached the head of the queue.
    pub start_s: f64,
    pub depart_s: f64,
    pub wifi_work_fraction: f64,
}

/// Outcome of one or more replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub strategy: Strategy,
    #[serde(rename = "deadline_s")]
    pub deadline: Deadline,
    pub deadline_kind: DeadlineKind,
    pub replications: usize,
    pub frames_served: u64,
    #[serde(rename = "mean_delay_s")]
    pub mean_delay: Estimate,
    pub eta: Estimate,
    /// Time fraction with an empty queue in the deferred state.
    pub p00_est: Estimate,
    /// Time fractions of (deferred, cellular, Wi-Fi).
    pub state_fractions: [f64; 3],
    /// Time fractions busy in each service state.
    pub busy_fractions: [f64; 3],
    pub mean_in_system: f64,
    /// `|L - lambda_obs D| / (lambda_obs D)` over the measurement window.
    pub little_deviation: f64,
    /// Relative gap between work served and the integral of the service rate over busy time.
    pub work_conservation_error: f64,
    /// Pure offloading with `lambda >= R mu2`: the queue grows without bound.
    pub unstable: bool,
    pub utility: Option<Estimate>,
    #[serde(skip)]
    units: Vec<stats::Unit>,
}

impl SimResult {
    /// Scores each replication (or batch) with the utility and attaches the estimate.
    pub fn with_utility(mut self, pref: Preference, d_hat: f64) -> Self {
        let scores: Vec<f64> = self.units.iter().map(|u| pref.score(u.delay, d_hat, u.eta)).collect();
        self.utility = Some(Estimate::from_samples(&scores));
        self
    }

    pub fn utility_estimate(&self, pref: Preference, d_hat: f64) -> Estimate {
        let scores: Vec<f64> = self.units.iter().map(|u| pref.score(u.delay, d_hat, u.eta)).collect();
        Estimate::from_samples(&scores)
    }
}

/// A single replication seeded with the master seed. Confidence intervals
/// come from batch means within the run.
pub fn run(config: &SimConfig) -> Result<SimResult> {
    run_inner(config, None)
}

/// Like [`run`], also returning the record of every frame that arrived after the warmup.
pub fn run_traced(config: &SimConfig) -> Result<(SimResult, Vec<FrameRecord>)> {
    let mut trace = Vec::new();
    let result = run_inner(config, Some(&mut trace))?;
    Ok((result, trace))
}

fn run_inner(config: &SimConfig, trace: Option<&mut Vec<FrameRecord>>) -> Result<SimResult> {
    config.validate()?;
    let stable = config.stability()?;
    let out = engine::simulate(config, config.seed, trace);
    Ok(stats::from_batches(config, out, !stable))
}

/// Independent replications, run in parallel and aggregated in index order.
pub fn replicate(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let stable = config.stability()?;
    let outputs: Vec<engine::RunOutput> = (0..config.replications)
        .into_par_iter()
        .map(|i| engine::simulate(config, config.replication_seed(i), None))
        .collect();
    Ok(stats::from_replications(config, outputs, !stable))
}
