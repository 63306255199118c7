//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Criteria 6 and 7 run both the full profile (2e6 frames, 20 replications,
//! strict dominance) and the reduced profile (5e5 frames, 10 replications,
//! confidence-interval overlap). Set `OFFLOAD_ACCEPTANCE=reduced` to skip the
//! full profile.

mod common;

use std::time::{Duration, Instant};

use common::{gap, moment_residuals, vehicular};
use mmsp_offload::analytic::{
    analyze, max_mean_delay, modulation_constants, start_service_closed_form, start_service_recursion,
};
use mmsp_offload::ctmc::{boundary_solution, numeric_mean_delay, truncated_chain_adaptive, TruncationPolicy};
use mmsp_offload::optimize::{compare_over_preferences, lin_space, log_space, optimal_deadline, SearchMode};
use mmsp_offload::sim::{replicate, run, Horizon, HotspotModel, SimConfig, Strategy};
use mmsp_offload::{Deadline, Preference, SystemParams};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(failures: Vec<String>, summary: String) -> Outcome {
    if failures.is_empty() {
        Outcome {
            pass: true,
            detail: summary,
        }
    } else {
        Outcome {
            pass: false,
            detail: format!("{summary}; failures: {}", failures.join("; ")),
        }
    }
}

fn d_hat_reproduction() -> Outcome {
    let d_hat = max_mean_delay(&vehicular(f64::INFINITY)).unwrap();
    let err = gap(d_hat, 136.21);
    let mut fails = vec![];
    if err > 1e-3 {
        fails.push(format!("D_hat = {d_hat}, off by {:.3}%", err * 100.0));
    }
    outcome(fails, format!("D_hat = {d_hat:.4} s (target 136.21 s +-0.1%)"))
}

fn optimal_deadlines() -> Outcome {
    let p = vehicular(f64::INFINITY);
    let mut fails = vec![];
    let mut found = vec![];
    for (a, check) in [
        (0.9, Box::new(|t: f64| t == 0.0) as Box<dyn Fn(f64) -> bool>),
        (0.5, Box::new(|t: f64| (t - 55.5).abs() <= 0.05 * 55.5)),
        (0.1, Box::new(|t: f64| t == 1e5)),
    ] {
        let start = Instant::now();
        let best = optimal_deadline(&p, Preference::new(a).unwrap(), 1.0, 1e5, SearchMode::FullScan).unwrap();
        let took = start.elapsed();
        found.push(format!("a={a}: tau*={:.2} s", best.tau_star_s));
        if !check(best.tau_star_s) {
            fails.push(format!("a={a}: tau* = {}", best.tau_star_s));
        }
        if took > Duration::from_secs(10) {
            fails.push(format!("a={a}: scan took {took:?}"));
        }
    }
    outcome(fails, found.join(", "))
}

fn delay_paths() -> Outcome {
    let mut fails = vec![];
    let mut worst_exact: f64 = 0.0;
    let mut worst_sim: f64 = 0.0;
    for tau in [1.0, 10.0, 55.5, 200.0] {
        let p = vehicular(tau);
        let closed = analyze(&p).unwrap().delay();
        let gf = numeric_mean_delay(&p, &boundary_solution(&p).unwrap()).unwrap();
        let chain = truncated_chain_adaptive(&p, &TruncationPolicy::default()).unwrap();
        let oracle = chain.mean_delay();
        for (name, a, b) in [
            ("closed/gf", closed, gf),
            ("closed/chain", closed, oracle),
            ("gf/chain", gf, oracle),
        ] {
            let g = gap(a, b);
            worst_exact = worst_exact.max(g);
            if g > 5e-3 {
                fails.push(format!("tau={tau} {name}: {a} vs {b}"));
            }
        }
        let cfg = SimConfig {
            horizon: Horizon::Frames(2_000_000),
            replications: 20,
            seed: 31,
            ..SimConfig::new(p, Strategy::Deadline)
        };
        let sim = replicate(&cfg).unwrap();
        let g = gap(sim.mean_delay.mean, closed);
        worst_sim = worst_sim.max(g);
        if g > 0.03 && !sim.mean_delay.contains(closed) {
            fails.push(format!(
                "tau={tau} simulation {} +- {} vs {closed}",
                sim.mean_delay.mean, sim.mean_delay.half_width
            ));
        }
    }
    outcome(
        fails,
        format!(
            "closed form / generating function / chain worst gap {worst_exact:.2e}; simulation worst gap {:.2}% (within CI where > 3%)",
            worst_sim * 100.0
        ),
    )
}

fn limits() -> Outcome {
    let mut fails = vec![];
    let eta = analyze(&vehicular(1e6)).unwrap().eta();
    if eta < 0.999 {
        fails.push(format!("eta(1e6) = {eta}"));
    }
    let base = SimConfig {
        horizon: Horizon::Frames(500_000),
        replications: 10,
        seed: 5,
        ..SimConfig::new(vehicular(10.0), Strategy::Pure)
    };
    let pure = replicate(&base).unwrap();
    if pure.eta.mean != 1.0 {
        fails.push(format!("pure eta = {:?}", pure.eta));
    }
    let spot = replicate(&base.with_strategy(Strategy::OnTheSpot)).unwrap();
    let zero = replicate(
        &base
            .with_strategy(Strategy::Deadline)
            .with_deadline(Deadline::Finite(0.0)),
    )
    .unwrap();
    if !(spot.mean_delay.overlaps(&zero.mean_delay) && spot.eta.overlaps(&zero.eta)) {
        fails.push(format!(
            "zero deadline {:?}/{:?} vs on-the-spot {:?}/{:?}",
            zero.mean_delay, zero.eta, spot.mean_delay, spot.eta
        ));
    }
    outcome(
        fails,
        format!(
            "eta(1e6 s) = {eta:.6}, simulated pure eta = {}, zero deadline D = {:.5} vs on-the-spot D = {:.5}",
            pure.eta.mean, zero.mean_delay.mean, spot.mean_delay.mean
        ),
    )
}

fn monotonicity() -> Outcome {
    let grid = log_space(1e-2, 1e5, 50);
    let rows: Vec<(f64, f64)> = grid
        .iter()
        .map(|&t| {
            let a = analyze(&vehicular(t)).unwrap();
            (a.delay(), a.eta())
        })
        .collect();
    let mut fails = vec![];
    let mut slopes = vec![];
    for (i, w) in rows.windows(2).enumerate() {
        if w[1].0 < w[0].0 || w[1].1 < w[0].1 {
            fails.push(format!("decrease between tau = {} and {}", grid[i], grid[i + 1]));
        }
        slopes.push((w[1].0 - w[0].0) / (w[1].1 - w[0].1));
    }
    for (i, s) in slopes.windows(2).enumerate() {
        if s[1] < s[0] {
            fails.push(format!("slope drops after tau = {}: {} -> {}", grid[i + 1], s[0], s[1]));
        }
    }
    outcome(
        fails,
        format!(
            "D and eta nondecreasing on 50 points; dD/deta grows from {:.2} to {:.1}",
            slopes[0],
            slopes[slopes.len() - 1]
        ),
    )
}

#[derive(Clone, Copy)]
enum Profile {
    Full,
    Reduced,
}

fn dominance(hotspot: HotspotModel, profile: Profile) -> Outcome {
    let p = vehicular(f64::INFINITY);
    let (frames, reps) = match profile {
        Profile::Full => (2_000_000, 20),
        Profile::Reduced => (500_000, 10),
    };
    let cfg = SimConfig {
        horizon: Horizon::Frames(frames),
        replications: reps,
        seed: 2024,
        hotspot,
        ..SimConfig::new(p, Strategy::Deadline)
    };
    let start = Instant::now();
    let rows = compare_over_preferences(&p, &lin_space(0.0, 1.0, 11), &cfg, 1e5).unwrap();
    let took = start.elapsed();
    let mut fails = vec![];
    for r in &rows {
        let best = if r.on_the_spot.mean >= r.pure.mean {
            r.on_the_spot
        } else {
            r.pure
        };
        let ok = match profile {
            Profile::Full => r.ours.mean >= best.mean - r.ours.half_width,
            Profile::Reduced => r.ours.mean >= best.mean - r.ours.half_width || r.ours.overlaps(&best),
        };
        if !ok {
            fails.push(format!("a={:.1}: ours {:?} vs best {:?}", r.a, r.ours, best));
        }
        let a = (r.a * 10.0).round() / 10.0;
        if (a == 0.0 || a == 1.0) && r.ours.mean < 0.99 {
            fails.push(format!("a={a}: U_ours = {}", r.ours.mean));
        }
        if matches!(hotspot, HotspotModel::Fixed) && a == 0.5 && !(0.70..=0.85).contains(&r.ours.mean) {
            fails.push(format!("a=0.5: U_ours = {}", r.ours.mean));
        }
    }
    if matches!(profile, Profile::Reduced) && took > Duration::from_secs(300) {
        fails.push(format!("reduced profile took {took:?}"));
    }
    let mid = &rows[5];
    outcome(
        fails,
        format!(
            "11 weights, U_ours(0.5) = {:.3} +- {:.3} at tau* = {:.1} s ({} frames x {} replications, {:.1?})",
            mid.ours.mean, mid.ours.half_width, mid.tau_star_s, frames, reps, took
        ),
    )
}

fn dominance_profiles(hotspot: HotspotModel) -> Outcome {
    let reduced = dominance(hotspot, Profile::Reduced);
    if std::env::var("OFFLOAD_ACCEPTANCE").as_deref() == Ok("reduced") {
        return Outcome {
            pass: reduced.pass,
            detail: format!("reduced: {}", reduced.detail),
        };
    }
    let full = dominance(hotspot, Profile::Full);
    Outcome {
        pass: reduced.pass && full.pass,
        detail: format!("full: {} | reduced: {}", full.detail, reduced.detail),
    }
}

fn structural() -> Outcome {
    let mut fails = vec![];
    let taus = [0.0, 0.1, 1.0, 10.0, 55.5, 200.0, 1e4];
    let params: Vec<SystemParams> = taus
        .iter()
        .map(|&t| vehicular(t))
        .chain(taus.iter().map(|&t| common::unit(t)))
        .collect();
    let (mut worst_norm, mut worst_pi, mut worst_fp, mut worst_q): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for p in &params {
        let a = analyze(p).unwrap();
        worst_norm = worst_norm.max(a.boundary.normalization_error);
        let pi_sum: f64 = a.derived.pi.iter().sum();
        worst_pi = worst_pi.max((pi_sum - 1.0).abs());
        let (r_et, r_eu) = moment_residuals(p, &a.moments);
        worst_fp = worst_fp.max(r_et).max(r_eu);
        for m in 1..=20 {
            for start in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.2, 0.3, 0.5]] {
                let x = start_service_recursion(p, start, m);
                let y = start_service_closed_form(p, start, m);
                for j in 0..3 {
                    worst_q = worst_q.max((x[j] - y[j]).abs());
                }
            }
        }
        if a.moments.mean_service < 1.0 / p.capacity() {
            fails.push(format!("E[T] below 1/capacity at {:?}", p.deadline));
        }
    }
    if worst_norm > 1e-8 {
        fails.push(format!("|G(1) - 1| = {worst_norm:e}"));
    }
    if worst_pi > f64::EPSILON {
        fails.push(format!("|sum pi - 1| = {worst_pi:e}"));
    }
    if worst_fp >= 1e-10 {
        fails.push(format!("fixed-point residual {worst_fp:e}"));
    }
    if worst_q > 1e-12 {
        fails.push(format!("matrix power vs closed form {worst_q:e}"));
    }

    let mut worst_series: f64 = 0.0;
    for tau in [1.0, 10.0, 55.5] {
        let p = vehicular(tau);
        let chain = truncated_chain_adaptive(&p, &TruncationPolicy::default()).unwrap();
        let series = chain.start_service_series(&modulation_constants(&p));
        worst_series = worst_series.max((series.iter().sum::<f64>() - 1.0).abs());
    }
    if worst_series > 1e-6 {
        fails.push(format!("chain start-service sum off by {worst_series:e}"));
    }

    let cfg = SimConfig {
        horizon: Horizon::Frames(2_000_000),
        ..SimConfig::new(vehicular(10.0), Strategy::Deadline)
    };
    let little = run(&cfg).unwrap().little_deviation;
    if little > 0.02 {
        fails.push(format!("Little's law deviation {little}"));
    }
    outcome(
        fails,
        format!(
            "|G(1)-1| <= {worst_norm:.1e}, |sum pi - 1| <= {worst_pi:.1e}, chain start-service sum error {worst_series:.1e}, \
             fixed-point residual {worst_fp:.1e}, power vs closed form {worst_q:.1e}, Little {little:.1e}"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 maximal delay", d_hat_reproduction),
        ("2 optimal deadlines", optimal_deadlines),
        ("3 four-path delay agreement", delay_paths),
        ("4 limits", limits),
        ("5 monotonicity and slope growth", monotonicity),
        ("6 dominance", || dominance_profiles(HotspotModel::Fixed)),
        ("7 dominance, variable hotspot rates", || {
            dominance_profiles(HotspotModel::Uniform { lo: 1100.0, hi: 5000.0 })
        }),
        ("8 structural invariants", structural),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {name}: {verdict} ({:.1?}) {}", start.elapsed(), o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 8 criteria passed");
}
