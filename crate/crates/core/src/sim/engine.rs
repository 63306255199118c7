use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use super::{DeadlineKind, FrameRecord, HotspotModel, SimConfig};
use crate::params::{Deadline, ServiceState};

pub(crate) const BATCHES: usize = 20;

/// Independent random streams, one per source of randomness.
struct Streams {
    arrivals: ChaCha8Rng,
    work: ChaCha8Rng,
    channel: ChaCha8Rng,
    deadline: ChaCha8Rng,
    hotspot: ChaCha8Rng,
    initial: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Streams {
            arrivals: stream(1),
            work: stream(2),
            channel: stream(3),
            deadline: stream(4),
            hotspot: stream(5),
            initial: stream(6),
        }
    }
}

fn exp(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e * mean
}

struct Frame {
    arrival: f64,
    remaining: f64,
    served: f64,
    wifi: f64,
    head_since: f64,
    batch: Option<usize>,
}

/// Sums over one slice of the measurement window.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Batch {
    pub duration: f64,
    pub frames: u64,
    pub delay_sum: f64,
    pub work: f64,
    pub wifi_work: f64,
    pub state_time: [f64; 3],
    pub busy_time: [f64; 3],
    pub empty_deferred_time: f64,
    pub area: f64,
}

impl Batch {
    pub fn merge(&mut self, other: &Batch) {
        self.duration += other.duration;
        self.frames += other.frames;
        self.delay_sum += other.delay_sum;
        self.work += other.work;
        self.wifi_work += other.wifi_work;
        for j in 0..3 {
            self.state_time[j] += other.state_time[j];
            self.busy_time[j] += other.busy_time[j];
        }
        self.empty_deferred_time += other.empty_deferred_time;
        self.area += other.area;
    }
}

pub(crate) struct RunOutput {
    pub batches: Vec<Batch>,
    pub served_total: f64,
    pub rate_integral: f64,
}

pub(crate) fn simulate(config: &SimConfig, seed: u64, mut trace: Option<&mut Vec<FrameRecord>>) -> RunOutput {
    let p = config.params;
    let deadline = config.strategy.effective_deadline(&p);
    let horizon = config.horizon_secs();
    let window_start = config.warmup_fraction * horizon;
    let batch_len = (horizon - window_start) / BATCHES as f64;
    let mut rng = Streams::new(seed);

    let draw_deadline = |rng: &mut ChaCha8Rng| -> f64 {
        match (deadline, config.deadline_kind) {
            (Deadline::Infinite, _) => f64::INFINITY,
            (Deadline::Finite(tau), DeadlineKind::Exponential) => exp(rng, tau),
            (Deadline::Finite(tau), DeadlineKind::Deterministic) => tau,
        }
    };
    let draw_hotspot = |rng: &mut ChaCha8Rng| -> f64 {
        match config.hotspot {
            HotspotModel::Fixed => p.mu2,
            HotspotModel::Uniform { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..=hi)
                }
            }
        }
    };

    let pi = p.with_deadline(deadline).derived().pi;
    let u: f64 = rng.initial.random();
    let mut state = if u < pi[2] {
        ServiceState::Wifi
    } else if u < pi[2] + pi[1] {
        ServiceState::Cellular
    } else {
        ServiceState::Deferred
    };
    let mut t = 0.0;
    let mut wifi_rate = p.mu2;
    let mut next_channel;
    let mut next_deadline = f64::INFINITY;
    match state {
        ServiceState::Wifi => {
            wifi_rate = draw_hotspot(&mut rng.hotspot);
            next_channel = exp(&mut rng.channel, 1.0 / p.r_f);
        }
        ServiceState::Deferred => {
            next_channel = exp(&mut rng.channel, 1.0 / p.r_c);
            next_deadline = draw_deadline(&mut rng.deadline);
        }
        ServiceState::Cellular => next_channel = exp(&mut rng.channel, 1.0 / p.r_c),
    }
    let mut next_arrival = exp(&mut rng.arrivals, 1.0 / p.lambda);

    let mut queue: VecDeque<Frame> = VecDeque::new();
    let mut batches = vec![Batch::default(); BATCHES];
    let mut served_total = 0.0;
    let mut rate_integral = 0.0;

    loop {
        let rate = match state {
            ServiceState::Deferred => 0.0,
            ServiceState::Cellular => p.mu1,
            ServiceState::Wifi => wifi_rate,
        };
        let next_completion = match queue.front() {
            Some(f) if rate > 0.0 => t + f.remaining / rate,
            _ => f64::INFINITY,
        };
        if next_arrival == f64::INFINITY && queue.is_empty() {
            break;
        }
        let t_next = next_arrival.min(next_channel).min(next_deadline).min(next_completion);

        // Time integrals over the part of [t, t_next] inside the window.
        let (a, b) = (t.max(window_start), t_next.min(horizon));
        if b > a {
            let n = queue.len() as f64;
            let s = state.index();
            let mut lo = a;
            let mut k = (((a - window_start) / batch_len) as usize).min(BATCHES - 1);
            while lo < b {
                let edge = if k + 1 == BATCHES {
                    b
                } else {
                    (window_start + (k + 1) as f64 * batch_len).min(b)
                };
                let dt = edge - lo;
                let bt = &mut batches[k];
                bt.state_time[s] += dt;
                bt.area += n * dt;
                if n > 0.0 {
                    bt.busy_time[s] += dt;
                } else if state == ServiceState::Deferred {
                    bt.empty_deferred_time += dt;
                }
                lo = edge;
                k += 1;
            }
        }

        // Serve the head frame up to t_next.
        if rate > 0.0 {
            if let Some(f) = queue.front_mut() {
                let chunk = if t_next == next_completion {
                    f.remaining
                } else {
                    (rate * (t_next - t)).min(f.remaining)
                };
                rate_integral += rate * (t_next - t);
                f.remaining -= chunk;
                f.served += chunk;
                if state == ServiceState::Wifi {
                    f.wifi += chunk;
                }
                served_total += chunk;
            }
        }
        t = t_next;

        if t == next_completion {
            let f = queue.pop_front().expect("completion with an empty queue");
            if let Some(k) = f.batch {
                let bt = &mut batches[k];
                bt.frames += 1;
                bt.delay_sum += t - f.arrival;
                bt.work += f.served;
                bt.wifi_work += f.wifi;
                if let Some(tr) = trace.as_deref_mut() {
                    tr.push(FrameRecord {
                        arrival_s: f.arrival,
                        start_s: f.head_since,
                        depart_s: t,
                        wifi_work_fraction: f.wifi / f.served,
                    });
                }
            }
            if let Some(next) = queue.front_mut() {
                next.head_since = t;
            }
        } else if t == next_arrival {
            let batch = if t >= window_start {
                Some((((t - window_start) / batch_len) as usize).min(BATCHES - 1))
            } else {
                None
            };
            let size = exp(&mut rng.work, 1.0);
            queue.push_back(Frame {
                arrival: t,
                remaining: size,
                served: 0.0,
                wifi: 0.0,
                head_since: t,
                batch,
            });
            next_arrival = t + exp(&mut rng.arrivals, 1.0 / p.lambda);
            if next_arrival > horizon {
                next_arrival = f64::INFINITY;
            }
        } else if t == next_channel {
            if state == ServiceState::Wifi {
                next_channel = t + exp(&mut rng.channel, 1.0 / p.r_c);
                if deadline.is_zero() {
                    state = ServiceState::Cellular;
                } else {
                    state = ServiceState::Deferred;
                    next_deadline = t + draw_deadline(&mut rng.deadline);
                }
            } else {
                state = ServiceState::Wifi;
                wifi_rate = draw_hotspot(&mut rng.hotspot);
                next_deadline = f64::INFINITY;
                next_channel = t + exp(&mut rng.channel, 1.0 / p.r_f);
            }
        } else {
            state = ServiceState::Cellular;
            next_deadline = f64::INFINITY;
        }
    }

    let window = horizon - window_start;
    for (k, bt) in batches.iter_mut().enumerate() {
        bt.duration = if k + 1 == BATCHES {
            window - batch_len * (BATCHES - 1) as f64
        } else {
            batch_len
        };
    }
    RunOutput {
        batches,
        served_total,
        rate_integral,
    }
}
