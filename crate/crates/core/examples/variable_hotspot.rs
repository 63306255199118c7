//! Hotspots whose Wi-Fi rate is drawn per connection, compared with the
//! fixed-rate model at the same mean.

use mmsp_offload::sim::{replicate, Horizon, HotspotModel, SimConfig, Strategy};
use mmsp_offload::{Deadline, SystemParams};

fn main() -> mmsp_offload::Result<()> {
    let p = SystemParams::vehicular(Deadline::Finite(55.5));
    for hotspot in [HotspotModel::Fixed, HotspotModel::Uniform { lo: 1100.0, hi: 5000.0 }] {
        let cfg = SimConfig {
            horizon: Horizon::Frames(500_000),
            replications: 10,
            seed: 3,
            hotspot,
            ..SimConfig::new(p, Strategy::Deadline)
        };
        let r = replicate(&cfg)?;
        println!(
            "{hotspot:?}: D = {:.3} +- {:.3} s, eta = {:.4} +- {:.4}",
            r.mean_delay.mean, r.mean_delay.half_width, r.eta.mean, r.eta.half_width
        );
    }
    Ok(())
}
