//! The two-dimensional (queue length, service state) Markov chain.
//!
//! Two independent numeric routes live here:
//!
//! * the generating-function route: the root `z0` of `g(z)` in (0, 1) fixes
//!   the boundary probability `p_{0,2}`, after which the partial generating
//!   functions `G_0, G_1, G_2` and the mean delay `G'(1) / lambda` follow in
//!   closed form;
//! * a brute-force oracle that solves the balance equations of the chain
//!   truncated at `N` levels (reflecting at the top) by linear level
//!   reduction.

use log::warn;
use nalgebra::{Matrix3, RowVector3, Vector3};
use serde::Serialize;

use crate::analytic::ModulationConstants;
use crate::error::{Error, Result};
use crate::params::{Deadline, SystemParams};

/// Resolution of the sign scan used to detect several roots of `g`.
pub const ROOT_SCAN_POINTS: usize = 10_000;
/// Bisection stops once the bracket is narrower than this.
pub const ROOT_TOLERANCE: f64 = 1e-14;
/// Offset used around the removable singularities of the generating functions.
pub const SINGULARITY_OFFSET: f64 = 1e-7;
const SINGULARITY_AGREEMENT: f64 = 1e-6;
/// `|G(1) - 1|` above this rejects a boundary solution.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-8;

/// `-lambda z^2 + (lambda + r_C + mu1) z - mu1`, the denominator of `G_1`.
fn cellular_quadratic(p: &SystemParams, z: f64) -> f64 {
    -p.lambda * z * z + (p.lambda + p.r_c + p.mu1) * z - p.mu1
}

/// Root of [`cellular_quadratic`] inside (0, 1); it is -mu1 at 0 and r_C at 1.
fn cellular_quadratic_root(p: &SystemParams) -> f64 {
    let b = p.lambda + p.r_c + p.mu1;
    let disc = (b * b - 4.0 * p.lambda * p.mu1).sqrt();
    2.0 * p.mu1 / (b + disc)
}

/// The quartic in the denominator of `G_0`, multiplied through by `tau` so
/// that it stays finite at `tau = 0`.
fn g_poly(p: &SystemParams, tau: f64, z: f64) -> f64 {
    let (lam, mu1, mu2) = (p.lambda, p.mu1, p.mu2);
    let wifi = -lam * z * z + (lam + p.r_f + mu2) * z - mu2;
    let outer = -lam * tau * wifi + (p.r_c * tau + 1.0) * (mu2 - lam * z);
    outer * cellular_quadratic(p, z) + p.r_f * (mu1 - lam * z) * z
}

/// `g(z)` for a finite positive deadline, normalized so that
/// `g(0) = -mu1 mu2 (lambda + r_C + 1/tau)` and
/// `g(1) = (r_C + r_F)(r_C tau + 1)(capacity - lambda) / tau`.
pub fn eval_g(params: &SystemParams, z: f64) -> Result<f64> {
    match params.deadline {
        Deadline::Finite(tau) if tau > 0.0 => Ok(g_poly(params, tau, z) / tau),
        other => Err(Error::Domain(format!(
            "g(z) needs a finite positive deadline, got {other}"
        ))),
    }
}

/// Values of the partial generating functions at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratingFunctions {
    pub g0: f64,
    pub g1: f64,
    pub g2: f64,
}

impl GeneratingFunctions {
    pub fn total(&self) -> f64 {
        self.g0 + self.g1 + self.g2
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.g0, self.g1, self.g2]
    }
}

/// Boundary probabilities of the chain and everything needed to evaluate the
/// generating functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundarySolution {
    #[serde(skip)]
    pub params: SystemParams,
    /// Root of `g` in (0, 1). `None` for an infinite deadline, where the
    /// chain collapses to two service states and `p_{0,2}` is explicit.
    pub z0: Option<f64>,
    /// Probability of an empty system in the Wi-Fi state.
    pub p02: f64,
    /// Probability of an empty system in the deferred state.
    pub p00: f64,
    /// `|g(z0)|` relative to `max(|g(0)|, |g(1)|)`.
    pub root_residual: f64,
    /// Number of sign changes of `g` found by the scan.
    pub sign_changes: usize,
    /// Set when the scan saw more than one sign change.
    pub multiple_roots: bool,
    /// `|G(1) - 1|`.
    pub normalization_error: f64,
}

/// Locates `z0`, then derives `p_{0,2}` and `p_{0,0} = G_0(0)`.
pub fn boundary_solution(params: &SystemParams) -> Result<BoundarySolution> {
    let p = params.validate()?;
    let tau = match p.deadline {
        Deadline::Infinite => return pure_limit_boundary(&p),
        Deadline::Finite(tau) => tau,
    };
    let capacity = p.capacity();

    let g = |z: f64| g_poly(&p, tau, z);
    let (g_lo, g_hi) = (g(0.0), g(1.0));
    if !(g_lo < 0.0 && g_hi > 0.0) {
        return Err(Error::NoSignChange {
            g0: g_lo / tau.max(f64::MIN_POSITIVE),
            g1: g_hi / tau.max(f64::MIN_POSITIVE),
        });
    }

    let mut brackets = Vec::new();
    let mut prev_z = 0.0;
    let mut prev_g = g_lo;
    for i in 1..=ROOT_SCAN_POINTS {
        let z = i as f64 / ROOT_SCAN_POINTS as f64;
        let gz = if i == ROOT_SCAN_POINTS { g_hi } else { g(z) };
        if (prev_g < 0.0) != (gz < 0.0) {
            brackets.push((prev_z, z));
        }
        prev_z = z;
        prev_g = gz;
    }
    let sign_changes = brackets.len();
    let multiple_roots = sign_changes > 1;
    if multiple_roots {
        warn!("g(z) changes sign {sign_changes} times on (0, 1) for {p:?}; using the first root that normalizes");
    }

    let scale = g_lo.abs().max(g_hi.abs());
    let mut last_err = None;
    for (lo, hi) in brackets {
        let z0 = bisect(g, lo, hi);
        let wifi_empty = p02_from_root(&p, capacity, z0);
        let mut sol = BoundarySolution {
            params: p,
            z0: Some(z0),
            p02: wifi_empty,
            p00: 0.0,
            root_residual: g(z0).abs() / scale,
            sign_changes,
            multiple_roots,
            normalization_error: f64::NAN,
        };
        sol.p00 = sol.eval(0.0)?.g0;
        sol.normalization_error = (sol.eval(1.0)?.total() - 1.0).abs();
        let probabilities_ok = (0.0..=1.0).contains(&sol.p00) && (0.0..=1.0).contains(&sol.p02);
        if probabilities_ok && sol.normalization_error <= NORMALIZATION_TOLERANCE {
            return Ok(sol);
        }
        last_err = Some(Error::BoundaryInvalid {
            deviation: sol.normalization_error,
        });
    }
    Err(last_err.unwrap_or(Error::NoSignChange {
        g0: g_lo / tau,
        g1: g_hi / tau,
    }))
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo_negative = f(lo) < 0.0;
    while hi - lo > ROOT_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) < 0.0) == f_lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `p_{0,2}` from the requirement that the numerator of `G_0` vanishes at `z0`.
/// The denominator `mu2 (lambda z^2 - (mu1 + lambda) z + mu1)` is kept in its
/// factored form `mu2 (1 - z)(mu1 - lambda z)`.
fn p02_from_root(p: &SystemParams, capacity: f64, z0: f64) -> f64 {
    p.r_c * (capacity - p.lambda) * z0 / (p.mu2 * (1.0 - z0) * (p.mu1 - p.lambda * z0))
}

/// Infinite deadline: two service states (deferred, Wi-Fi). The empty-Wi-Fi
/// probability follows from the throughput balance `lambda = mu2 (R - p02)`.
fn pure_limit_boundary(p: &SystemParams) -> Result<BoundarySolution> {
    let r = p.availability();
    if !(p.lambda < r * p.mu2) {
        return Err(Error::Unstable {
            lambda: p.lambda,
            capacity: r * p.mu2,
        });
    }
    let p02 = (r * p.mu2 - p.lambda) / p.mu2;
    let p00 = p.r_f * p02 / (p.lambda + p.r_c);
    let mut sol = BoundarySolution {
        params: *p,
        z0: None,
        p02,
        p00,
        root_residual: 0.0,
        sign_changes: 0,
        multiple_roots: false,
        normalization_error: f64::NAN,
    };
    sol.normalization_error = (sol.eval(1.0)?.total() - 1.0).abs();
    Ok(sol)
}

impl BoundarySolution {
    /// Evaluates `(G_0, G_1, G_2)` at `z`. Within [`SINGULARITY_OFFSET`] of a
    /// removable singularity the value is interpolated from both sides.
    pub fn eval(&self, z: f64) -> Result<GeneratingFunctions> {
        let p = &self.params;
        let tau = match p.deadline {
            Deadline::Infinite => return Ok(self.eval_pure_limit(z)),
            Deadline::Finite(t) => t,
        };
        let z1 = cellular_quadratic_root(p);
        let near_z1 = (z - z1).abs() < SINGULARITY_OFFSET;
        let near_z0 = self.z0.is_some_and(|z0| (z - z0).abs() < SINGULARITY_OFFSET);

        if !(near_z0 || near_z1) {
            return Ok(self.eval_direct(tau, z));
        }
        let center = if near_z1 { z1 } else { self.z0.unwrap_or(z) };
        let h = SINGULARITY_OFFSET;
        let side = |sign: f64| -> [f64; 3] {
            let nodes = [1.0, 2.0, 3.0].map(|k| center + sign * k * h);
            let values = nodes.map(|x| self.eval_direct(tau, x).as_array());
            let mut out = [0.0; 3];
            for (j, slot) in out.iter_mut().enumerate() {
                *slot = lagrange3(nodes, [values[0][j], values[1][j], values[2][j]], z);
            }
            out
        };
        let left = side(-1.0);
        let right = side(1.0);
        let mut out = [0.0; 3];
        for j in 0..3 {
            let scale = left[j].abs().max(right[j].abs()).max(1e-300);
            let finite = left[j].is_finite() && right[j].is_finite();
            if !finite || (left[j] - right[j]).abs() > SINGULARITY_AGREEMENT * scale {
                return Err(Error::SingularityUnresolved {
                    z,
                    left: left[j],
                    right: right[j],
                });
            }
            out[j] = 0.5 * (left[j] + right[j]);
        }
        Ok(GeneratingFunctions {
            g0: out[0],
            g1: out[1],
            g2: out[2],
        })
    }

    fn eval_direct(&self, tau: f64, z: f64) -> GeneratingFunctions {
        let p = &self.params;
        let (lam, mu1, mu2) = (p.lambda, p.mu1, p.mu2);
        let capacity = p.capacity();
        let p02 = self.p02;
        let numerator =
            -mu2 * p02 * lam * z * z + ((mu1 + lam) * mu2 * p02 + p.r_c * (capacity - lam)) * z - mu1 * mu2 * p02;
        let ratio = numerator / g_poly(p, tau, z);
        let g0 = p.r_f * tau * ratio;
        let g2 = (-lam * tau * z + (p.r_c + lam) * tau + 1.0) * ratio;
        let g1 = ((capacity - lam - mu2 * p02) * (z - 1.0) + z * p.r_f * ratio) / cellular_quadratic(p, z);
        GeneratingFunctions { g0, g1, g2 }
    }

    /// Two-state generating functions:
    /// `G_2 = mu2 p02 (lambda + r_C - lambda z) / k(z)`, `G_0 = r_F mu2 p02 / k(z)`
    /// with `k(z) = lambda^2 z^2 - lambda (lambda + r_C + r_F + mu2) z + mu2 (lambda + r_C)`.
    fn eval_pure_limit(&self, z: f64) -> GeneratingFunctions {
        let p = &self.params;
        let lam = p.lambda;
        let k = lam * lam * z * z - lam * (lam + p.r_c + p.r_f + p.mu2) * z + p.mu2 * (lam + p.r_c);
        let scale = p.mu2 * self.p02 / k;
        GeneratingFunctions {
            g0: p.r_f * scale,
            g1: 0.0,
            g2: (lam + p.r_c - lam * z) * scale,
        }
    }

    /// Empty-system probabilities `(p00, p01, p02)`.
    pub fn empty_probs(&self) -> [f64; 3] {
        let p = &self.params;
        let p01 = match p.deadline {
            Deadline::Infinite => 0.0,
            Deadline::Finite(_) => (p.capacity() - p.lambda - p.mu2 * self.p02) / p.mu1,
        };
        [self.p00, p01, self.p02]
    }
}

fn lagrange3(x: [f64; 3], y: [f64; 3], at: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..3 {
        let mut w = 1.0;
        for j in 0..3 {
            if i != j {
                w *= (at - x[j]) / (x[i] - x[j]);
            }
        }
        acc += w * y[i];
    }
    acc
}

/// Mean delay `G'(1) / lambda` in closed form.
pub fn numeric_mean_delay(params: &SystemParams, sol: &BoundarySolution) -> Result<f64> {
    let p = params.validate()?;
    let (lam, mu1, mu2, rc, rf) = (p.lambda, p.mu1, p.mu2, p.r_c, p.r_f);
    let s = rc + rf;
    let tau = match p.deadline {
        Deadline::Infinite => {
            let r = p.availability();
            if !(lam < r * mu2) {
                return Err(Error::Unstable {
                    lambda: lam,
                    capacity: r * mu2,
                });
            }
            return Ok((s + (1.0 - r) * mu2) / (s * (r * mu2 - lam)));
        }
        Deadline::Finite(t) => t,
    };
    let stretch = rc * tau + 1.0;
    let d = lam * s * stretch * (lam * s * stretch - rc * mu2 * stretch - mu1 * rf);
    let num = -lam * s * s - (mu2 - mu1) * rc * (mu2 - lam)
        + rc * (-2.0 * lam * s * s + (mu2 - lam) * (mu1 * rf - 2.0 * rc * (mu2 - mu1))) * tau
        - rc * (lam * (rc + mu1) * s * s + mu2 * rc * (rc * (mu2 - lam) - mu1 * s)) * tau * tau
        - mu2 * stretch * s * (mu1 * rf * tau - (mu2 - mu1) * stretch) * sol.p02;
    Ok(num / d)
}

/// Truncation control for [`truncated_chain_adaptive`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub initial_levels: usize,
    pub tail_bound: f64,
    pub max_levels: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            initial_levels: 5000,
            tail_bound: 1e-10,
            max_levels: 1 << 23,
        }
    }
}

/// Stationary distribution of the chain truncated at `levels`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedChainSolution {
    pub params: SystemParams,
    pub levels: usize,
    /// `probs[n][j]` is the probability of `n` frames in the system in service state `j`.
    pub probs: Vec<[f64; 3]>,
    /// Probability mass in the top 5% of levels.
    pub tail_mass: f64,
    /// Largest balance-equation residual, divided by the largest rate.
    pub balance_residual: f64,
}

/// Level-independent generator blocks of the chain.
struct Blocks {
    /// Service-state transitions within a level (a generator: rows sum to 0).
    modulation: Matrix3<f64>,
    /// Service completions, `diag(0, mu1, mu2)`.
    down: Matrix3<f64>,
    lambda: f64,
}

impl Blocks {
    fn new(p: &SystemParams) -> Self {
        // (f01, f02, f12, f20, f21)
        let (f01, f02, f12, f20, f21) = match p.deadline {
            // Deferred state unreachable; it keeps a dummy exit so the level
            // matrices stay invertible.
            Deadline::Finite(0.0) => (1.0, 0.0, p.r_c, 0.0, p.r_f),
            Deadline::Finite(t) => (1.0 / t, p.r_c, p.r_c, p.r_f, 0.0),
            Deadline::Infinite => (0.0, p.r_c, p.r_c, p.r_f, 0.0),
        };
        let modulation = Matrix3::new(
            -(f01 + f02),
            f01,
            f02, //
            0.0,
            -f12,
            f12, //
            f20,
            f21,
            -(f20 + f21),
        );
        Blocks {
            modulation,
            down: Matrix3::from_diagonal(&Vector3::new(0.0, p.mu1, p.mu2)),
            lambda: p.lambda,
        }
    }

    fn local(&self, arrivals: bool, service: bool) -> Matrix3<f64> {
        let mut m = self.modulation;
        if arrivals {
            m -= Matrix3::identity() * self.lambda;
        }
        if service {
            m -= self.down;
        }
        m
    }
}

fn invert(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    m.try_inverse()
        .ok_or_else(|| Error::Domain("singular level matrix in truncated chain".into()))
}

/// Solves the balance equations of the chain truncated at `levels` (arrivals
/// blocked at the top level) by linear level reduction.
pub fn truncated_chain(params: &SystemParams, levels: usize) -> Result<TruncatedChainSolution> {
    let p = params.validate()?;
    if levels < 10 {
        return Err(Error::Config(format!(
            "truncation needs at least 10 levels, got {levels}"
        )));
    }
    let blocks = Blocks::new(&p);
    let lam = blocks.lambda;

    // rates[n] maps p_{n-1} to p_n.
    let mut rates: Vec<Matrix3<f64>> = vec![Matrix3::zeros(); levels + 1];
    rates[levels] = invert(&(-blocks.local(false, true)))? * lam;
    let interior = blocks.local(true, true);
    for n in (1..levels).rev() {
        let m = -(interior + rates[n + 1] * blocks.down);
        rates[n] = invert(&m)? * lam;
    }

    let censored = blocks.local(true, false) + rates[1] * blocks.down;
    let p0 = stationary_row(&censored)?;

    let mut probs = Vec::with_capacity(levels + 1);
    let mut row = p0;
    probs.push([row[0], row[1], row[2]]);
    for rate in rates.iter().skip(1) {
        row *= rate;
        probs.push([row[0], row[1], row[2]]);
    }
    drop(rates);

    let total: f64 = probs.iter().map(|v| v[0] + v[1] + v[2]).sum();
    for v in probs.iter_mut() {
        for x in v.iter_mut() {
            *x = (*x / total).max(0.0);
        }
    }

    let top = levels - levels / 20;
    let tail_mass = probs[top + 1..].iter().map(|v| v[0] + v[1] + v[2]).sum();
    let balance_residual = balance_residual(&blocks, &probs);
    Ok(TruncatedChainSolution {
        params: p,
        levels,
        probs,
        tail_mass,
        balance_residual,
    })
}

/// Doubles the truncation level until the tail mass drops below the bound.
pub fn truncated_chain_adaptive(params: &SystemParams, policy: &TruncationPolicy) -> Result<TruncatedChainSolution> {
    let mut levels = policy.initial_levels.max(10);
    loop {
        let sol = truncated_chain(params, levels)?;
        if sol.tail_mass < policy.tail_bound {
            return Ok(sol);
        }
        if levels >= policy.max_levels {
            return Err(Error::TruncationInsufficient {
                levels,
                tail_mass: sol.tail_mass,
                bound: policy.tail_bound,
            });
        }
        levels = (levels * 2).min(policy.max_levels);
    }
}

/// Stationary row vector of a 3x3 generator-like matrix: `x C = 0`, `sum x = 1`.
fn stationary_row(c: &Matrix3<f64>) -> Result<RowVector3<f64>> {
    let mut system = nalgebra::Matrix4x3::<f64>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            system[(i, j)] = c[(j, i)];
        }
        system[(3, i)] = 1.0;
    }
    let rhs = nalgebra::Vector4::new(0.0, 0.0, 0.0, 1.0);
    let x = system
        .svd(true, true)
        .solve(&rhs, 1e-300)
        .map_err(|e| Error::Domain(format!("boundary level solve failed: {e}")))?;
    Ok(RowVector3::new(x[0], x[1], x[2]))
}

fn balance_residual(blocks: &Blocks, probs: &[[f64; 3]]) -> f64 {
    let n_max = probs.len() - 1;
    let row = |n: usize| RowVector3::new(probs[n][0], probs[n][1], probs[n][2]);
    let scale = blocks.lambda + blocks.down[(1, 1)] + blocks.down[(2, 2)] + blocks.modulation.abs().max();
    let mut worst: f64 = 0.0;
    for n in 0..=n_max {
        let local = blocks.local(n < n_max, n > 0);
        let mut r = row(n) * local;
        if n > 0 {
            r += row(n - 1) * blocks.lambda;
        }
        if n < n_max {
            r += row(n + 1) * blocks.down;
        }
        worst = worst.max(r.abs().max());
    }
    worst / scale
}

impl TruncatedChainSolution {
    pub fn total_mass(&self) -> f64 {
        self.probs.iter().map(|v| v[0] + v[1] + v[2]).sum()
    }

    pub fn mean_in_system(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, v)| n as f64 * (v[0] + v[1] + v[2]))
            .sum()
    }

    /// Little's law on the mean number in system. The chain counts the frame
    /// in service, so no service time is added.
    pub fn mean_delay(&self) -> f64 {
        self.mean_in_system() / self.params.lambda
    }

    /// Share of work carried over Wi-Fi: Wi-Fi throughput over arrival rate.
    pub fn eta(&self) -> f64 {
        let busy_wifi: f64 = self.probs.iter().skip(1).map(|v| v[2]).sum();
        self.params.mu2 * busy_wifi / self.params.lambda
    }

    /// Time fraction spent empty in the deferred state.
    pub fn p00(&self) -> f64 {
        self.probs[0][0]
    }

    /// Partial sums `sum_n p_{n,j} z^n`.
    pub fn partial_gf(&self, z: f64) -> [f64; 3] {
        let mut acc = [0.0; 3];
        for v in self.probs.iter().rev() {
            for j in 0..3 {
                acc[j] = acc[j] * z + v[j];
            }
        }
        acc
    }

    /// `sum_n Qhat^n p_n`, the probability that an arriving frame starts
    /// service in each state, evaluated by Horner's scheme.
    pub fn start_service_series(&self, constants: &ModulationConstants) -> [f64; 3] {
        let q = constants.q_hat;
        let mut acc = Vector3::zeros();
        for v in self.probs.iter().rev() {
            acc = Vector3::new(v[0], v[1], v[2]) + q * acc;
        }
        [acc[0], acc[1], acc[2]]
    }
}
