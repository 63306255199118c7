//! Closed-form delay and offloading efficiency for a handful of deadlines.
//!
//! ```bash
//! cargo run --release --example analyze
//! ```

use mmsp_offload::{analyze, Deadline, SystemParams};

fn main() -> mmsp_offload::Result<()> {
    let base = SystemParams::vehicular(Deadline::Infinite);
    let d = base.derived();
    println!(
        "availability {:.4}, pure-offloading capacity {:.1} fps, D_hat {:.2} s",
        d.availability,
        d.availability * base.mu2,
        mmsp_offload::max_mean_delay(&base)?
    );
    println!("{:>10} {:>12} {:>8} {:>10}", "tau (s)", "delay (s)", "eta", "capacity");
    for tau in [0.0, 1.0, 10.0, 55.5, 200.0, 1e4] {
        let p = base.with_deadline(Deadline::Finite(tau));
        let a = analyze(&p)?;
        println!("{tau:>10} {:>12.5} {:>8.5} {:>10.2}", a.delay(), a.eta(), p.capacity());
    }
    Ok(())
}
