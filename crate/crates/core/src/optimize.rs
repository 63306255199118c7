//! Deadline sweeps, the optimal deadline for a preference weight, and the
//! simulated comparison against on-the-spot and pure offloading.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{analyze, max_mean_delay};
use crate::error::{Error, Result};
use crate::params::{utility, Deadline, Preference, SystemParams};
use crate::sim::{replicate, Estimate, SimConfig, SimResult, Strategy};

/// Largest deadline considered by default (s).
pub const DEFAULT_TAU_CAP: f64 = 1e5;
/// Log-spaced points between 1e-2 s and the cap in the default grid.
pub const DEFAULT_GRID_POINTS: usize = 200;

/// `0` followed by [`DEFAULT_GRID_POINTS`] log-spaced deadlines over `[1e-2, cap]`.
pub fn default_grid(cap: f64) -> Vec<f64> {
    let lo = 1e-2f64.min(cap);
    let mut grid = vec![0.0];
    grid.extend(log_space(lo, cap, DEFAULT_GRID_POINTS));
    grid
}

pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            i if i == n - 1 => hi,
            i => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

pub fn lin_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// One deadline of a sweep. Unstable deadlines carry NaN figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub tau_s: f64,
    pub delay_s: f64,
    pub eta: f64,
    pub utility: f64,
    /// The printed start-service probabilities were rejected for this deadline.
    pub flag_oracle_pihat: bool,
    /// `g(z)` had more than one sign change on (0, 1).
    pub flag_multiroot: bool,
    pub unstable: bool,
}

fn sweep_row(params: &SystemParams, pref: Preference, d_hat: f64, tau: f64) -> Result<SweepRow> {
    match analyze(&params.with_deadline(Deadline::from_secs(tau))) {
        Ok(a) => Ok(SweepRow {
            tau_s: tau,
            delay_s: a.delay(),
            eta: a.eta(),
            utility: utility(a.delay(), d_hat, a.eta(), pref)?,
            flag_oracle_pihat: a.start_service.printed_rejected,
            flag_multiroot: a.boundary.multiple_roots,
            unstable: false,
        }),
        Err(Error::Unstable { .. }) => Ok(SweepRow {
            tau_s: tau,
            delay_s: f64::NAN,
            eta: f64::NAN,
            utility: f64::NAN,
            flag_oracle_pihat: false,
            flag_multiroot: false,
            unstable: true,
        }),
        Err(e) => Err(e),
    }
}

/// Analytic delay, efficiency and utility on every deadline of `grid`, sorted by deadline.
pub fn sweep(params: &SystemParams, pref: Preference, grid: &[f64]) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::Config("deadline grid is empty".into()));
    }
    let d_hat = max_mean_delay(params)?;
    let mut taus = grid.to_vec();
    taus.sort_by(f64::total_cmp);
    taus.par_iter()
        .map(|&tau| sweep_row(params, pref, d_hat, tau))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Step up from zero in fixed increments; stop at the first step that does not improve.
    #[serde(rename = "paper_procedure")]
    Stepping,
    /// Argmax over the whole grid.
    FullScan,
}

impl FromStr for SearchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "step" | "paper_procedure" => Ok(SearchMode::Stepping),
            "scan" | "full_scan" => Ok(SearchMode::FullScan),
            other => Err(Error::Config(format!(
                "unknown search mode `{other}` (expected step or scan)"
            ))),
        }
    }
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchMode::Stepping => "step",
            SearchMode::FullScan => "scan",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalDeadline {
    pub tau_star_s: f64,
    pub utility_star: f64,
    pub delay_s: f64,
    pub eta: f64,
    pub d_hat_s: f64,
    pub mode: SearchMode,
    pub grid: String,
    pub evaluations: usize,
}

/// Optimal deadline for preference `pref`. The scan uses [`default_grid`];
/// the stepping procedure uses increments of `delta_tau`, the last step
/// clamped to `tau_cap`.
pub fn optimal_deadline(
    params: &SystemParams,
    pref: Preference,
    delta_tau: f64,
    tau_cap: f64,
    mode: SearchMode,
) -> Result<OptimalDeadline> {
    if !(delta_tau > 0.0) {
        return Err(Error::Config(format!(
            "deadline step must be positive, got {delta_tau}"
        )));
    }
    if !(tau_cap >= 0.0 && tau_cap.is_finite()) {
        return Err(Error::Config(format!(
            "deadline cap must be finite and >= 0, got {tau_cap}"
        )));
    }
    match mode {
        SearchMode::FullScan => {
            let grid = default_grid(tau_cap);
            let desc = format!("0 + log:1e-2:{tau_cap}:{DEFAULT_GRID_POINTS}");
            optimal_on_grid(params, pref, &grid, mode, desc)
        }
        SearchMode::Stepping => {
            let steps = (tau_cap / delta_tau).ceil() as usize;
            let grid: Vec<f64> = (0..=steps).map(|i| (i as f64 * delta_tau).min(tau_cap)).collect();
            let desc = format!("0:{delta_tau}:{tau_cap}");
            optimal_on_grid(params, pref, &grid, mode, desc)
        }
    }
}

/// Either search mode over an explicit increasing grid.
pub fn optimal_on_grid(
    params: &SystemParams,
    pref: Preference,
    grid: &[f64],
    mode: SearchMode,
    grid_desc: String,
) -> Result<OptimalDeadline> {
    let d_hat = max_mean_delay(params)?;
    let best = match mode {
        SearchMode::FullScan => {
            let rows = sweep(params, pref, grid)?;
            let evaluations = rows.len();
            let best = rows
                .iter()
                .filter(|r| !r.unstable)
                .fold(None::<SweepRow>, |acc, r| match acc {
                    Some(b) if b.utility >= r.utility => Some(b),
                    _ => Some(*r),
                })
                .ok_or_else(|| unstable_everywhere(params))?;
            (best, evaluations)
        }
        SearchMode::Stepping => {
            let mut current: Option<SweepRow> = None;
            let mut evaluations = 0;
            for &tau in grid {
                let row = sweep_row(params, pref, d_hat, tau)?;
                evaluations += 1;
                if row.unstable {
                    continue;
                }
                match current {
                    Some(c) if row.utility <= c.utility => break,
                    _ => current = Some(row),
                }
            }
            (current.ok_or_else(|| unstable_everywhere(params))?, evaluations)
        }
    };
    let (row, evaluations) = best;
    Ok(OptimalDeadline {
        tau_star_s: row.tau_s,
        utility_star: row.utility,
        delay_s: row.delay_s,
        eta: row.eta,
        d_hat_s: d_hat,
        mode,
        grid: grid_desc,
        evaluations,
    })
}

fn unstable_everywhere(params: &SystemParams) -> Error {
    Error::Unstable {
        lambda: params.lambda,
        capacity: params.with_deadline(Deadline::Finite(0.0)).capacity(),
    }
}

/// Simulated utilities of the three strategies for one preference weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrategyComparison {
    pub a: f64,
    pub tau_star_s: f64,
    pub on_the_spot: Estimate,
    pub pure: Estimate,
    pub ours: Estimate,
}

/// Simulation of each strategy, reused across preference weights.
#[derive(Debug, Default)]
pub struct SimulationCache {
    runs: HashMap<(Strategy, u64), SimResult>,
}

impl SimulationCache {
    pub fn get(&mut self, base: &SimConfig, strategy: Strategy, tau: f64) -> Result<&SimResult> {
        // A zero deadline is the on-the-spot run.
        let (strategy, tau) = match (strategy, tau) {
            (Strategy::Deadline, 0.0) => (Strategy::OnTheSpot, 0.0),
            (Strategy::Deadline, t) => (Strategy::Deadline, t),
            (s, _) => (s, 0.0),
        };
        let key = (strategy, tau.to_bits());
        match self.runs.entry(key) {
            Entry::Occupied(e) => Ok(e.into_mut()),
            Entry::Vacant(e) => {
                let cfg = base.with_strategy(strategy).with_deadline(Deadline::from_secs(tau));
                Ok(e.insert(replicate(&cfg)?))
            }
        }
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }
}

/// Simulates on-the-spot, pure and the deadline strategy at `tau_star`, and
/// scores each with the analytic maximal delay. All strategies share the
/// seeds of `sim`, so the comparison uses common random numbers.
pub fn compare_strategies(
    params: &SystemParams,
    pref: Preference,
    sim: &SimConfig,
    tau_star: f64,
    cache: &mut SimulationCache,
) -> Result<StrategyComparison> {
    let d_hat = max_mean_delay(params)?;
    let base = SimConfig {
        params: *params,
        ..*sim
    };
    let score = |r: &SimResult| r.utility_estimate(pref, d_hat);
    let on_the_spot = score(cache.get(&base, Strategy::OnTheSpot, 0.0)?);
    let pure = score(cache.get(&base, Strategy::Pure, 0.0)?);
    let ours = score(cache.get(&base, Strategy::Deadline, tau_star)?);
    Ok(StrategyComparison {
        a: pref.weight(),
        tau_star_s: tau_star,
        on_the_spot,
        pure,
        ours,
    })
}

/// [`compare_strategies`] for each weight, with the deadline chosen by the full scan.
pub fn compare_over_preferences(
    params: &SystemParams,
    weights: &[f64],
    sim: &SimConfig,
    tau_cap: f64,
) -> Result<Vec<StrategyComparison>> {
    let mut cache = SimulationCache::default();
    weights
        .iter()
        .map(|&a| {
            let pref = Preference::new(a)?;
            let best = optimal_deadline(params, pref, 1.0, tau_cap, SearchMode::FullScan)?;
            compare_strategies(params, pref, sim, best.tau_star_s, &mut cache)
        })
        .collect()
}

fn num(x: f64) -> String {
    x.to_string()
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "tau_s",
        "delay_s",
        "eta",
        "utility",
        "flag_oracle_pihat",
        "flag_multiroot",
    ])?;
    for r in rows {
        w.write_record([
            num(r.tau_s),
            num(r.delay_s),
            num(r.eta),
            num(r.utility),
            r.flag_oracle_pihat.to_string(),
            r.flag_multiroot.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_comparison_csv<W: Write>(out: W, rows: &[StrategyComparison]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["a", "U_onthespot", "U_pure", "U_ours", "tau_star"])?;
    for r in rows {
        w.write_record([
            num(r.a),
            num(r.on_the_spot.mean),
            num(r.pure.mean),
            num(r.ours.mean),
            num(r.tau_star_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}
