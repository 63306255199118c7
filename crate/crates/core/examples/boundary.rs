//! Root of the characteristic polynomial, boundary probabilities and the
//! generating functions they pin down.

use mmsp_offload::ctmc::{boundary_solution, eval_g, numeric_mean_delay};
use mmsp_offload::{Deadline, SystemParams};

fn main() -> mmsp_offload::Result<()> {
    let p = SystemParams::vehicular(Deadline::Finite(10.0));
    println!("g(0) = {:.4e}, g(1) = {:.4e}", eval_g(&p, 0.0)?, eval_g(&p, 1.0)?);

    let sol = boundary_solution(&p)?;
    println!(
        "root z0 = {:?} (residual {:.1e}, {} sign changes)",
        sol.z0, sol.root_residual, sol.sign_changes
    );
    println!("empty probabilities {:?}", sol.empty_probs());
    println!("|G(1) - 1| = {:.1e}", sol.normalization_error);
    for z in [0.0, 0.5, 0.9, 0.999] {
        let g = sol.eval(z)?;
        println!("G({z}) = {:.6} = {:?}", g.total(), g.as_array());
    }
    println!("mean delay from G'(1): {:.6} s", numeric_mean_delay(&p, &sol)?);
    Ok(())
}
