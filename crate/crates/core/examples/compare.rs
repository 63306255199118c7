//! Simulated utility of on-the-spot, pure and deadline-based offloading
//! across preference weights.

use mmsp_offload::optimize::{compare_over_preferences, lin_space, DEFAULT_TAU_CAP};
use mmsp_offload::sim::{Horizon, SimConfig, Strategy};
use mmsp_offload::{Deadline, SystemParams};

fn main() -> mmsp_offload::Result<()> {
    let p = SystemParams::vehicular(Deadline::Infinite);
    let cfg = SimConfig {
        horizon: Horizon::Frames(500_000),
        replications: 10,
        seed: 2024,
        ..SimConfig::new(p, Strategy::Deadline)
    };
    println!(
        "{:>4} {:>9} {:>16} {:>16} {:>16}",
        "a", "tau*", "on the spot", "pure", "deadline"
    );
    for r in compare_over_preferences(&p, &lin_space(0.0, 1.0, 11), &cfg, DEFAULT_TAU_CAP)? {
        let fmt = |e: mmsp_offload::sim::Estimate| format!("{:.3} +- {:.3}", e.mean, e.half_width);
        println!(
            "{:>4.1} {:>9.2} {:>16} {:>16} {:>16}",
            r.a,
            r.tau_star_s,
            fmt(r.on_the_spot),
            fmt(r.pure),
            fmt(r.ours)
        );
    }
    Ok(())
}
