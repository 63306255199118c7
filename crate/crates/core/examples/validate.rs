//! Cross-check every delay path on a small parameter set.

use mmsp_offload::cli::validate;
use mmsp_offload::sim::{Horizon, SimConfig, Strategy};
use mmsp_offload::{Deadline, SystemParams};

fn main() -> mmsp_offload::Result<()> {
    let p = SystemParams::from_rates(0.5, 1.0, 2.0, 1.0, 1.0, Deadline::Finite(1.0));
    let sim = SimConfig {
        horizon: Horizon::Frames(200_000),
        replications: 10,
        seed: 1,
        ..SimConfig::new(p, Strategy::Deadline)
    };
    let report = validate(&p, &sim)?;
    for c in &report.checks {
        println!(
            "{:<24} D = {:.6} s, eta = {}, gap {:.2e} (tol {:.0e}) {}",
            c.path,
            c.delay_s,
            c.eta.map_or("-".into(), |e| format!("{e:.5}")),
            c.relative_gap,
            c.tolerance,
            if c.pass { "ok" } else { "FAIL" }
        );
    }
    println!("all pass: {}", report.all_pass);
    Ok(())
}
