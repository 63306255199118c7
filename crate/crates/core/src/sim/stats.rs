use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::engine::{Batch, RunOutput};
use super::{SimConfig, SimResult};

/// Sample mean with the half-width of its 95% Student-t confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

impl Estimate {
    /// With fewer than two samples the half-width is zero.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                half_width: f64::NAN,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Estimate { mean, half_width: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("degrees of freedom are positive")
            .inverse_cdf(0.975);
        Estimate {
            mean,
            half_width: t * (var / n as f64).sqrt(),
        }
    }

    pub fn lo(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lo()..=self.hi()).contains(&x)
    }

    pub fn overlaps(&self, other: &Estimate) -> bool {
        self.lo() <= other.hi() && other.lo() <= self.hi()
    }
}

/// One independent observation: a replication, or a batch within a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Unit {
    pub delay: f64,
    pub eta: f64,
    pub p00: f64,
}

impl Unit {
    fn of(b: &Batch) -> Unit {
        Unit {
            delay: b.delay_sum / b.frames as f64,
            eta: b.wifi_work / b.work,
            p00: b.empty_deferred_time / b.duration,
        }
    }
}

fn summarize(
    config: &SimConfig,
    units: Vec<Unit>,
    total: Batch,
    served: f64,
    rate_integral: f64,
    unstable: bool,
) -> SimResult {
    let pick = |f: fn(&Unit) -> f64| Estimate::from_samples(&units.iter().map(f).collect::<Vec<_>>());
    let frac = |xs: [f64; 3]| xs.map(|x| x / total.duration);
    let mean_in_system = total.area / total.duration;
    let observed_rate = total.frames as f64 / total.duration;
    let delay = total.delay_sum / total.frames as f64;
    SimResult {
        strategy: config.strategy,
        deadline: config.strategy.effective_deadline(&config.params),
        deadline_kind: config.deadline_kind,
        replications: config.replications,
        frames_served: total.frames,
        mean_delay: pick(|u| u.delay),
        eta: pick(|u| u.eta),
        p00_est: pick(|u| u.p00),
        state_fractions: frac(total.state_time),
        busy_fractions: frac(total.busy_time),
        mean_in_system,
        little_deviation: (mean_in_system - observed_rate * delay).abs() / (observed_rate * delay),
        work_conservation_error: (served - rate_integral).abs() / served,
        unstable,
        utility: None,
        units,
    }
}

pub(crate) fn from_batches(config: &SimConfig, out: RunOutput, unstable: bool) -> SimResult {
    let mut total = Batch::default();
    for b in &out.batches {
        total.merge(b);
    }
    let units = out.batches.iter().filter(|b| b.frames > 0).map(Unit::of).collect();
    let mut r = summarize(config, units, total, out.served_total, out.rate_integral, unstable);
    // Point estimates over the whole window; batches only supply the spread.
    let whole = Unit::of(&total);
    r.mean_delay.mean = whole.delay;
    r.eta.mean = whole.eta;
    r.p00_est.mean = whole.p00;
    r.replications = 1;
    r
}

pub(crate) fn from_replications(config: &SimConfig, outs: Vec<RunOutput>, unstable: bool) -> SimResult {
    let mut total = Batch::default();
    let mut units = Vec::with_capacity(outs.len());
    let (mut served, mut integral) = (0.0, 0.0);
    for out in &outs {
        let mut run = Batch::default();
        for b in &out.batches {
            run.merge(b);
        }
        units.push(Unit::of(&run));
        total.merge(&run);
        served += out.served_total;
        integral += out.rate_integral;
    }
    summarize(config, units, total, served, integral, unstable)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_interval() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        // t_{0.975, 3} = 3.182446
        assert!((e.half_width - 3.182446 * (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-5);
        assert_eq!(Estimate::from_samples(&[1.0]).half_width, 0.0);
        assert!(e.contains(2.0) && !e.contains(10.0));
    }
}
