//! Best deadline for several preference weights, by full scan and by the
//! stepping search that stops at the first non-improvement.

use mmsp_offload::optimize::{optimal_deadline, SearchMode, DEFAULT_TAU_CAP};
use mmsp_offload::{Deadline, Preference, SystemParams};

fn main() -> mmsp_offload::Result<()> {
    let p = SystemParams::vehicular(Deadline::Infinite);
    for a in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let pref = Preference::new(a)?;
        let scan = optimal_deadline(&p, pref, 1.0, DEFAULT_TAU_CAP, SearchMode::FullScan)?;
        let step = optimal_deadline(&p, pref, 1.0, DEFAULT_TAU_CAP, SearchMode::Stepping)?;
        println!(
            "a = {a}: scan tau* = {:.2} s (U = {:.4}), stepping tau* = {:.2} s (U = {:.4}, {} evaluations)",
            scan.tau_star_s, scan.utility_star, step.tau_star_s, step.utility_star, step.evaluations
        );
    }
    Ok(())
}
