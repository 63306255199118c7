//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use mmsp_offload::analytic::ServiceMoments;
use mmsp_offload::{Deadline, SystemParams};

pub fn vehicular(tau: f64) -> SystemParams {
    SystemParams::vehicular(Deadline::from_secs(tau))
}

pub fn unit(tau: f64) -> SystemParams {
    SystemParams::from_rates(0.5, 1.0, 2.0, 1.0, 1.0, Deadline::from_secs(tau))
}

fn branching(p: &SystemParams) -> (f64, f64, f64) {
    match p.deadline {
        Deadline::Infinite => (0.0, 1.0, 1.0 / p.r_c),
        Deadline::Finite(tau) => {
            let s = p.r_c * tau + 1.0;
            (1.0 / s, p.r_c * tau / s, tau / s)
        }
    }
}

fn rel(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300)
}

/// Largest relative residual of the first-step equations for the conditional
/// service times (`et`) and Wi-Fi service times (`eu`).
pub fn moment_residuals(p: &SystemParams, m: &ServiceMoments) -> (f64, f64) {
    let (c0, d0, sojourn) = branching(p);
    let cell_exit = p.mu1 + p.r_c;
    let wifi_exit = p.mu2 + p.r_f;
    let et = m.et;
    let r_et = [
        rel(et[0], sojourn + c0 * et[1] + d0 * et[2]),
        rel(et[1], 1.0 / cell_exit + p.r_c / cell_exit * et[2]),
        rel(et[2], 1.0 / wifi_exit + p.r_f / wifi_exit * et[0]),
    ];
    let eu = m.eu;
    let r_eu = [
        rel(eu[0], c0 * eu[1] + d0 * eu[2]),
        rel(eu[1], p.r_c / cell_exit * eu[2]),
        rel(eu[2], 1.0 / wifi_exit + p.r_f / wifi_exit * eu[0]),
    ];
    let max = |r: [f64; 3]| r.into_iter().fold(0.0, f64::max);
    (max(r_et), max(r_eu))
}

/// Relative difference, symmetric in its arguments.
pub fn gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}
