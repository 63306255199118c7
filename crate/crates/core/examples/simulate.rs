//! Replicated simulation of the three transmission strategies.

use mmsp_offload::sim::{replicate, Horizon, SimConfig, Strategy};
use mmsp_offload::{analyze, Deadline, SystemParams};

fn main() -> mmsp_offload::Result<()> {
    let p = SystemParams::vehicular(Deadline::Finite(10.0));
    let base = SimConfig {
        horizon: Horizon::Frames(500_000),
        replications: 10,
        seed: 7,
        ..SimConfig::new(p, Strategy::Deadline)
    };
    let exact = analyze(&p)?;
    println!(
        "closed form at tau = 10 s: D = {:.4} s, eta = {:.4}",
        exact.delay(),
        exact.eta()
    );
    for strategy in [Strategy::OnTheSpot, Strategy::Deadline, Strategy::Pure] {
        let r = replicate(&base.with_strategy(strategy))?;
        println!(
            "{strategy:?}: D = {:.4} +- {:.4} s, eta = {:.4} +- {:.4}, Little deviation {:.1e}",
            r.mean_delay.mean, r.mean_delay.half_width, r.eta.mean, r.eta.half_width, r.little_deviation
        );
    }
    Ok(())
}
