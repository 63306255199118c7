//! Closed forms from the hybrid embedded chain, whose points are service
//! starts and service-state transitions.
//!
//! Everything here is a function of the parameters plus, for the start-service
//! probabilities, the boundary solution of [`crate::ctmc`].

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::ctmc::{boundary_solution, BoundarySolution};
use crate::error::{Error, Result};
use crate::params::{DerivedQuantities, ParamsFile, ServiceState, SystemParams};

/// Deviation between the printed and the series-consistent start-service
/// probabilities above which the printed form is flagged.
pub const PRINTED_FORM_TOLERANCE: f64 = 1e-4;

/// `r_F mu1 / (r_C tau + 1) + r_C mu2 + mu1 mu2`: the denominator shared by the
/// decay factor and the conditional service times, divided by `r_C tau + 1`
/// so that it stays finite for an infinite deadline.
fn shared_denominator(p: &SystemParams) -> f64 {
    p.r_f * p.mu1 / p.stretch() + p.r_c * p.mu2 + p.mu1 * p.mu2
}

/// Constants of the embedded transition matrix between consecutive service starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulationConstants {
    /// Geometric decay factor in (0, 1).
    pub beta: f64,
    /// Cellular share of the capacity.
    pub theta1: f64,
    /// Wi-Fi share of the capacity.
    pub theta2: f64,
    /// Column-stochastic map from the state at one service start to the next,
    /// ordered (deferred, cellular, Wi-Fi). The first row is zero.
    #[serde(skip)]
    pub q_hat: Matrix3<f64>,
    /// `(q_hat - theta 1^T) / beta`, so that `q_hat^m = theta 1^T + beta^m decay` for `m >= 1`.
    #[serde(skip)]
    pub decay: Matrix3<f64>,
}

impl ModulationConstants {
    pub fn theta(&self) -> Vector3<f64> {
        Vector3::new(0.0, self.theta1, self.theta2)
    }
}

pub fn modulation_constants(params: &SystemParams) -> ModulationConstants {
    let p = params;
    let beta = p.mu1 * p.mu2 / shared_denominator(p);
    let d = p.derived();
    let capacity = d.capacity;
    let theta1 = d.pi[1] * p.mu1 / capacity;
    let theta2 = d.pi[2] * p.mu2 / capacity;
    let (c0, d0) = p.deferred_split();
    let to_wifi = p.r_c / p.mu1;
    let to_deferred = p.r_f / p.mu2;

    let q_hat = Matrix3::new(
        0.0,
        0.0,
        0.0,
        beta * c0 * (1.0 + to_deferred),
        beta * (1.0 + c0 * to_deferred),
        beta * c0 * to_deferred,
        beta * (to_wifi + d0),
        beta * to_wifi,
        beta * (1.0 + to_wifi),
    );
    let decay = Matrix3::new(
        0.0,
        0.0,
        0.0,
        theta2 - d0,
        theta2,
        -theta1,
        -(theta2 - d0),
        -theta2,
        theta1,
    );
    ModulationConstants {
        beta,
        theta1,
        theta2,
        q_hat,
        decay,
    }
}

/// `q_hat^m initial` by repeated multiplication.
pub fn start_service_recursion(params: &SystemParams, initial: [f64; 3], m: u32) -> [f64; 3] {
    let q = modulation_constants(params).q_hat;
    let mut v = Vector3::from(initial);
    for _ in 0..m {
        v = q * v;
    }
    v.into()
}

/// The same quantity in closed form, for a probability vector `initial`.
pub fn start_service_closed_form(params: &SystemParams, initial: [f64; 3], m: u32) -> [f64; 3] {
    if m == 0 {
        return initial;
    }
    let k = modulation_constants(params);
    let v = k.theta() + k.decay * Vector3::from(initial) * k.beta.powi(m as i32);
    v.into()
}

/// Probability that an arriving frame starts service in each state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StartServiceProbs {
    /// `sum_n q_hat^n p_n`, the value used downstream.
    pub probs: [f64; 3],
    /// The printed transcription, whose deferred term enters the Wi-Fi
    /// component with the cellular branching weight.
    pub printed: [f64; 3],
    /// Largest componentwise gap between the two.
    pub printed_deviation: f64,
    /// Set when the gap exceeds [`PRINTED_FORM_TOLERANCE`].
    pub printed_rejected: bool,
}

impl StartServiceProbs {
    pub fn get(&self, state: ServiceState) -> f64 {
        self.probs[state.index()]
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Start-service probabilities from the generating functions evaluated at the
/// decay factor.
pub fn start_service_probs(params: &SystemParams, boundary: &BoundarySolution) -> Result<StartServiceProbs> {
    if !(boundary.normalization_error <= crate::ctmc::NORMALIZATION_TOLERANCE) {
        return Err(Error::BoundaryInvalid {
            deviation: boundary.normalization_error,
        });
    }
    if params.deadline.is_infinite() {
        let p00 = boundary.p00;
        let probs = [p00, 0.0, 1.0 - p00];
        return Ok(StartServiceProbs {
            probs,
            printed: probs,
            printed_deviation: 0.0,
            printed_rejected: false,
        });
    }

    let k = modulation_constants(params);
    let empty = Vector3::from(boundary.empty_probs());
    let at_beta = Vector3::from(boundary.eval(k.beta)?.as_array());
    let probs = empty + k.theta() * (1.0 - empty.sum()) + k.decay * (at_beta - empty);

    let (c0, d0) = params.deferred_split();
    let p00 = boundary.p00;
    let [g0, g1, g2] = [at_beta[0], at_beta[1], at_beta[2]];
    let mixed = (k.theta2 - d0) * g0 + k.theta2 * g1 - k.theta1 * g2;
    let printed = [p00, k.theta1 + mixed - c0 * p00, k.theta2 - mixed - c0 * p00];

    let printed_deviation = (0..3).map(|j| (printed[j] - probs[j]).abs()).fold(0.0, f64::max);
    Ok(StartServiceProbs {
        probs: probs.into(),
        printed,
        printed_deviation,
        printed_rejected: printed_deviation > PRINTED_FORM_TOLERANCE,
    })
}

/// Conditional mean service times (`et`) and mean Wi-Fi service times (`eu`)
/// by the state in which service starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ServiceMoments {
    pub et: [f64; 3],
    pub mean_service: f64,
    pub eu: [f64; 3],
    pub mean_wifi_service: f64,
}

/// `(E[T_j], E[U_j])` for j = deferred, cellular, Wi-Fi.
fn conditional_times(p: &SystemParams) -> ([f64; 3], [f64; 3]) {
    let den = shared_denominator(p);
    let sojourn = p.deferred_sojourn();
    let sum_rates = p.r_c + p.r_f;

    let et1 = (sum_rates + p.mu2) / den;
    let et = [
        et1 * (1.0 + p.mu1 * sojourn),
        et1,
        (sum_rates + p.mu1 * (1.0 + p.r_f * sojourn)) / den,
    ];
    let eu1 = p.r_c / den;
    let eu = [eu1 * (1.0 + p.mu1 * sojourn), eu1, (p.r_c + p.mu1) / den];
    (et, eu)
}

pub fn service_moments(params: &SystemParams, pihat: &StartServiceProbs) -> ServiceMoments {
    let (et, eu) = conditional_times(params);
    let dot = |x: &[f64; 3]| (0..3).map(|j| pihat.probs[j] * x[j]).sum::<f64>();
    ServiceMoments {
        et,
        mean_service: dot(&et),
        eu,
        mean_wifi_service: dot(&eu),
    }
}

/// Expected time until a frame that is `k` places from the head of the queue
/// (state `state`) becomes the head frame.
pub fn conditional_wait(params: &SystemParams, k: u32, state: ServiceState) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let p = params;
    let beta = modulation_constants(p).beta;
    let capacity = p.capacity();
    let (et, _) = conditional_times(p);
    let kf = f64::from(k);
    let beta_k = beta.powi(k as i32);
    match state {
        ServiceState::Deferred => {
            et[0]
                + (kf - 1.0) / capacity
                + (beta - beta_k) / (1.0 - beta) * (et[0] - 1.0 / capacity - p.deferred_sojourn())
        }
        s => {
            let j = s.index();
            kf / capacity + (1.0 - beta_k) / (1.0 - beta) * (et[j] - 1.0 / capacity)
        }
    }
}

/// Delay and offloading figures of one deadline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticPerformance {
    #[serde(rename = "waiting_s")]
    pub waiting: f64,
    #[serde(rename = "delay_s")]
    pub delay: f64,
    pub eta: f64,
    /// Mean delay of pure offloading; infinite when pure offloading is unstable.
    #[serde(rename = "d_hat_s")]
    pub d_hat: f64,
}

/// Mean delay under pure offloading,
/// `(r_C + R (1 - R) mu2) / (r_C (R mu2 - lambda))`.
pub fn max_mean_delay(params: &SystemParams) -> Result<f64> {
    params.check_rates()?;
    let r = params.availability();
    let wifi_capacity = r * params.mu2;
    if !(params.lambda < wifi_capacity) {
        return Err(Error::Unstable {
            lambda: params.lambda,
            capacity: wifi_capacity,
        });
    }
    Ok((params.r_c + r * (1.0 - r) * params.mu2) / (params.r_c * (wifi_capacity - params.lambda)))
}

pub fn performance(
    params: &SystemParams,
    pihat: &StartServiceProbs,
    moments: &ServiceMoments,
) -> Result<AnalyticPerformance> {
    let p = params.validate()?;
    let d_hat = max_mean_delay(&p).unwrap_or(f64::INFINITY);
    if p.deadline.is_infinite() {
        return Ok(AnalyticPerformance {
            waiting: d_hat - moments.mean_service,
            delay: d_hat,
            eta: 1.0,
            d_hat,
        });
    }
    let k = modulation_constants(&p);
    let beta = k.beta;
    let derived = p.derived();
    let load = p.lambda / derived.capacity;
    let pi = derived.pi;
    let ph = pihat.probs;

    let mixing: f64 = (0..3).map(|j| moments.et[j] * (pi[j] - ph[j])).sum();
    let deferred = beta / (1.0 - beta) * p.deferred_sojourn() * (pi[0] - ph[0]);
    let waiting = (load * moments.mean_service + mixing / (1.0 - beta) - deferred) / (1.0 - load);
    Ok(AnalyticPerformance {
        waiting,
        delay: waiting + moments.mean_service,
        eta: p.mu2 * moments.mean_wifi_service,
        d_hat,
    })
}

/// Everything the closed-form path produces for one parameter set.
#[derive(Debug, Clone, Serialize)]
pub struct Analysis {
    pub params: ParamsFile,
    pub derived: DerivedQuantities,
    pub modulation: ModulationConstants,
    pub boundary: BoundarySolution,
    pub start_service: StartServiceProbs,
    pub moments: ServiceMoments,
    #[serde(flatten)]
    pub performance: AnalyticPerformance,
}

impl Analysis {
    pub fn delay(&self) -> f64 {
        self.performance.delay
    }

    pub fn eta(&self) -> f64 {
        self.performance.eta
    }
}

/// Boundary solution, start-service probabilities, moments and performance in one call.
pub fn analyze(params: &SystemParams) -> Result<Analysis> {
    let p = params.validate()?;
    let boundary = boundary_solution(&p)?;
    let start_service = start_service_probs(&p, &boundary)?;
    let moments = service_moments(&p, &start_service);
    let performance = performance(&p, &start_service, &moments)?;
    Ok(Analysis {
        params: ParamsFile::from(&p),
        derived: p.derived(),
        modulation: modulation_constants(&p),
        boundary,
        start_service,
        moments,
        performance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::truncated_chain;
    use crate::params::Deadline;
    use approx::assert_relative_eq;

    fn uniform_start() -> StartServiceProbs {
        let probs = [1.0 / 3.0; 3];
        StartServiceProbs {
            probs,
            printed: probs,
            printed_deviation: 0.0,
            printed_rejected: false,
        }
    }

    fn unit(tau: f64) -> SystemParams {
        SystemParams::from_rates(0.5, 1.0, 2.0, 1.0, 1.0, Deadline::from_secs(tau))
    }

    #[test]
    fn constants_unit_set() {
        let k = modulation_constants(&unit(1.0));
        assert_relative_eq!(k.beta, 4.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(k.theta1, 0.2, epsilon = 1e-15);
        assert_relative_eq!(k.theta2, 0.8, epsilon = 1e-15);
        let fixed = k.q_hat * k.theta();
        for j in 0..3 {
            assert!((fixed[j] - k.theta()[j]).abs() < 1e-12);
        }
        assert_relative_eq!(modulation_constants(&unit(0.0)).beta, 0.4, epsilon = 1e-15);
    }

    #[test]
    fn q_hat_is_column_stochastic() {
        for tau in [0.0, 0.7, 5.0, f64::INFINITY] {
            let q = modulation_constants(&unit(tau)).q_hat;
            for c in 0..3 {
                assert_relative_eq!(q.column(c).sum(), 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn recursion_matches_closed_form() {
        let p = unit(1.0);
        let start = [1.0, 0.0, 0.0];
        assert_eq!(start_service_recursion(&p, start, 0), start);
        let a = start_service_recursion(&p, start, 5);
        let b = start_service_closed_form(&p, start, 5);
        assert_eq!(a[0], 0.0);
        for j in 0..3 {
            assert!((a[j] - b[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn moments_unit_set() {
        let m = service_moments(&unit(1.0), &uniform_start());
        let et = [4.0 / 3.0, 8.0 / 9.0, 7.0 / 9.0];
        let eu = [1.0 / 3.0, 2.0 / 9.0, 4.0 / 9.0];
        for j in 0..3 {
            assert_relative_eq!(m.et[j], et[j], epsilon = 1e-14);
            assert_relative_eq!(m.eu[j], eu[j], epsilon = 1e-14);
        }
        let m0 = service_moments(&unit(0.0), &uniform_start());
        assert_relative_eq!(m0.et[0], m0.et[1], epsilon = 1e-15);
        let minf = service_moments(&unit(f64::INFINITY), &uniform_start());
        assert_relative_eq!(minf.eu[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(minf.eu[2], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn start_service_probs_match_chain_series() {
        for tau in [1.0, 3.0] {
            let p = unit(tau);
            let b = boundary_solution(&p).unwrap();
            let ph = start_service_probs(&p, &b).unwrap();
            let chain = truncated_chain(&p, 2000).unwrap();
            let series = chain.start_service_series(&modulation_constants(&p));
            for j in 0..3 {
                assert!((ph.probs[j] - series[j]).abs() < 1e-9);
            }
            assert!((ph.sum() - 1.0).abs() < 1e-9);
        }
        let p = unit(3.0);
        let ph = start_service_probs(&p, &boundary_solution(&p).unwrap()).unwrap();
        assert!(ph.printed_rejected);
        let printed_sum: f64 = ph.printed.iter().sum();
        let (c0, _) = p.deferred_split();
        assert_relative_eq!(printed_sum, 1.0 + ph.probs[0] * (1.0 - 2.0 * c0), epsilon = 1e-9);
    }

    #[test]
    fn start_service_light_traffic() {
        let p = unit(1.0).with_lambda(1e-6);
        let ph = start_service_probs(&p, &boundary_solution(&p).unwrap()).unwrap();
        let pi = p.derived().pi;
        for j in 0..3 {
            assert!((ph.probs[j] - pi[j]).abs() < 1e-4);
        }
    }

    #[test]
    fn pure_limit_start_service() {
        let p = unit(f64::INFINITY);
        let ph = start_service_probs(&p, &boundary_solution(&p).unwrap()).unwrap();
        assert_eq!(ph.probs[1], 0.0);
        assert_eq!(ph.probs[0] + ph.probs[2], 1.0);
    }

    fn wait_by_recursion(p: &SystemParams, k: u32) -> [f64; 3] {
        let (c0, d0) = p.deferred_split();
        let sojourn = p.deferred_sojourn();
        let a1 = p.mu1 / (p.mu1 + p.r_c);
        let a2 = p.mu2 / (p.mu2 + p.r_f);
        let (t1, t2) = (1.0 / (p.mu1 + p.r_c), 1.0 / (p.mu2 + p.r_f));
        let mut prev = [0.0; 3];
        for _ in 0..k {
            // w0 = s + c0 w1 + d0 w2; w1 = t1 + a1 prev1 + (1-a1) w2; w2 = t2 + a2 prev2 + (1-a2) w0
            let m = nalgebra::Matrix3::new(1.0, -c0, -d0, 0.0, 1.0, -(1.0 - a1), -(1.0 - a2), 0.0, 1.0);
            let rhs = Vector3::new(sojourn, t1 + a1 * prev[1], t2 + a2 * prev[2]);
            let w = m.try_inverse().unwrap() * rhs;
            prev = [w[0], w[1], w[2]];
        }
        prev
    }

    #[test]
    fn conditional_wait_matches_recursion() {
        let p = unit(1.0);
        assert_eq!(conditional_wait(&p, 0, ServiceState::Cellular), 0.0);
        let et = service_moments(&p, &uniform_start()).et;
        assert_relative_eq!(conditional_wait(&p, 1, ServiceState::Cellular), et[1], epsilon = 1e-12);
        for k in 1..8 {
            let rec = wait_by_recursion(&p, k);
            for s in ServiceState::ALL {
                assert!(
                    (conditional_wait(&p, k, s) - rec[s.index()]).abs() < 1e-10,
                    "k={k} {s:?}"
                );
            }
        }
    }

    #[test]
    fn unit_performance() {
        let a = analyze(&unit(1.0)).unwrap();
        assert_relative_eq!(a.delay(), 1.58438739, max_relative = 1e-7);
        assert_relative_eq!(a.eta(), 0.753162, max_relative = 1e-5);
        assert_relative_eq!(a.performance.d_hat, 3.0, epsilon = 1e-12);
        let a = analyze(&unit(3.0)).unwrap();
        assert_relative_eq!(a.delay(), 2.12224289, max_relative = 1e-7);
        let a = analyze(&unit(f64::INFINITY)).unwrap();
        assert_eq!(a.delay(), 3.0);
        assert_eq!(a.eta(), 1.0);
    }

    #[test]
    fn vehicular_d_hat() {
        let d = max_mean_delay(&SystemParams::vehicular(Deadline::Infinite)).unwrap();
        assert!((d - 136.21).abs() / 136.21 < 1e-3);
    }

    #[test]
    fn performance_rejects_unstable() {
        let p = unit(1.0).with_lambda(1.3);
        let ph = uniform_start();
        let m = service_moments(&p, &ph);
        assert!(matches!(performance(&p, &ph, &m), Err(Error::Unstable { .. })));
    }
}
