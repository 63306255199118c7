//! Brute-force reference: solve the chain truncated at a finite queue length,
//! doubling the length until the top levels hold negligible mass.

use std::time::Instant;

use mmsp_offload::ctmc::{truncated_chain_adaptive, TruncationPolicy};
use mmsp_offload::{analyze, Deadline, SystemParams};

fn main() -> mmsp_offload::Result<()> {
    let policy = TruncationPolicy::default();
    for tau in [1.0, 10.0, 55.5] {
        let p = SystemParams::vehicular(Deadline::Finite(tau));
        let start = Instant::now();
        let chain = truncated_chain_adaptive(&p, &policy)?;
        let closed = analyze(&p)?.delay();
        println!(
            "tau {tau:>5}: {:>8} levels, tail {:.1e}, D = {:.6} s (closed form {closed:.6}), eta = {:.5}, {:.2?}",
            chain.levels,
            chain.tail_mass,
            chain.mean_delay(),
            chain.eta(),
            start.elapsed()
        );
    }
    Ok(())
}
