//! Model parameters, stationary service-state quantities and the user utility.
//!
//! Channel durations are stored as exit rates. The deadline is stored as its
//! mean because both ends of its range are meaningful: a zero deadline falls
//! back to cellular immediately (on-the-spot offloading) and an infinite one
//! waits for the next hotspot (pure offloading).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Mean of the deadline timer started whenever Wi-Fi is lost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Deadline {
    Finite(f64),
    Infinite,
}

impl Deadline {
    /// Maps `f64::INFINITY` onto [`Deadline::Infinite`].
    pub fn from_secs(tau: f64) -> Self {
        if tau == f64::INFINITY {
            Deadline::Infinite
        } else {
            Deadline::Finite(tau)
        }
    }

    pub fn secs(self) -> f64 {
        match self {
            Deadline::Finite(t) => t,
            Deadline::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Deadline::Infinite)
    }

    pub fn is_zero(self) -> bool {
        matches!(self, Deadline::Finite(t) if t == 0.0)
    }
}

impl fmt::Display for Deadline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Deadline::Finite(t) => write!(f, "{t}"),
            Deadline::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Deadline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
            return Ok(Deadline::Infinite);
        }
        let tau: f64 = s
            .parse()
            .map_err(|_| Error::Config(format!("deadline `{s}` is neither a number nor `inf`")))?;
        Ok(Deadline::from_secs(tau))
    }
}

impl Serialize for Deadline {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Deadline::Finite(t) => serializer.serialize_f64(*t),
            Deadline::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Deadline {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(t) => Ok(Deadline::from_secs(t)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Service state of the modulated channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceState {
    /// Wi-Fi lost, deadline running, nothing transmitted.
    Deferred,
    Cellular,
    Wifi,
}

impl ServiceState {
    pub const ALL: [ServiceState; 3] = [ServiceState::Deferred, ServiceState::Cellular, ServiceState::Wifi];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Full parameterization of the offloading queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Frame arrival rate (frames/s).
    pub lambda: f64,
    /// Cellular service rate (frames/s).
    pub mu1: f64,
    /// Wi-Fi service rate (frames/s).
    pub mu2: f64,
    /// Exit rate of the cellular-only channel state C (1/s).
    pub r_c: f64,
    /// Exit rate of the Wi-Fi channel state F (1/s).
    pub r_f: f64,
    pub deadline: Deadline,
}

impl SystemParams {
    pub fn from_rates(lambda: f64, mu1: f64, mu2: f64, r_c: f64, r_f: f64, deadline: Deadline) -> Self {
        SystemParams {
            lambda,
            mu1,
            mu2,
            r_c,
            r_f,
            deadline,
        }
    }

    /// Channel states given by their mean durations in seconds.
    pub fn from_means(lambda: f64, mu1: f64, mu2: f64, mean_c: f64, mean_f: f64, deadline: Deadline) -> Self {
        Self::from_rates(lambda, mu1, mu2, 1.0 / mean_c, 1.0 / mean_f, deadline)
    }

    /// Vehicular user: 800 frames/s of 8.184 kb frames over an 8.7 Mbps
    /// cellular link and 24.4 Mbps hotspots, with cellular-only stretches of
    /// 28.42 s and Wi-Fi stretches of 12.57 s on average.
    pub fn vehicular(deadline: Deadline) -> Self {
        Self::from_means(800.0, 1088.0, 3050.0, 28.42, 12.57, deadline)
    }

    pub fn with_deadline(self, deadline: Deadline) -> Self {
        SystemParams { deadline, ..self }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        SystemParams { lambda, ..self }
    }

    /// Returns the parameters unchanged when every rate is positive and the
    /// queue is stable (`lambda < capacity`, strictly).
    pub fn validate(self) -> Result<Self> {
        self.check_rates()?;
        let capacity = self.capacity();
        if !(self.lambda < capacity) {
            return Err(Error::Unstable {
                lambda: self.lambda,
                capacity,
            });
        }
        Ok(self)
    }

    /// Rate and deadline checks only, without the stability bound.
    pub fn check_rates(&self) -> Result<()> {
        for (name, value) in [
            ("lambda", self.lambda),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("r_c", self.r_c),
            ("r_f", self.r_f),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveRate { name, value });
            }
        }
        if let Deadline::Finite(tau) = self.deadline {
            if !(tau >= 0.0 && tau.is_finite()) {
                return Err(Error::Domain(format!("deadline must be >= 0, got {tau}")));
            }
        }
        Ok(())
    }

    /// Wi-Fi availability ratio `R = r_C / (r_C + r_F)`.
    pub fn availability(&self) -> f64 {
        self.r_c / (self.r_c + self.r_f)
    }

    /// `r_C * tau + 1`, infinite for an infinite deadline.
    pub(crate) fn stretch(&self) -> f64 {
        self.r_c * self.deadline.secs() + 1.0
    }

    /// Branching probabilities out of the deferred state: (to cellular, to Wi-Fi).
    pub(crate) fn deferred_split(&self) -> (f64, f64) {
        match self.deadline {
            Deadline::Infinite => (0.0, 1.0),
            Deadline::Finite(tau) => {
                let s = self.r_c * tau + 1.0;
                (1.0 / s, self.r_c * tau / s)
            }
        }
    }

    /// Mean sojourn in the deferred state, `1 / (f01 + f02) = tau / (r_C tau + 1)`.
    pub(crate) fn deferred_sojourn(&self) -> f64 {
        match self.deadline {
            Deadline::Infinite => 1.0 / self.r_c,
            Deadline::Finite(tau) => tau / (self.r_c * tau + 1.0),
        }
    }

    /// Offered capacity `pi1 mu1 + pi2 mu2`, nonincreasing in the deadline.
    pub fn capacity(&self) -> f64 {
        let r = self.availability();
        let cellular = match self.deadline {
            Deadline::Infinite => 0.0,
            Deadline::Finite(_) => (1.0 - r) / self.stretch() * self.mu1,
        };
        cellular + r * self.mu2
    }

    pub fn derived(&self) -> DerivedQuantities {
        let r = self.availability();
        let pi1 = match self.deadline {
            Deadline::Infinite => 0.0,
            Deadline::Finite(_) => (1.0 - r) / self.stretch(),
        };
        let pi2 = r;
        let pi0 = (1.0 - pi2) - pi1;
        let f01 = match self.deadline {
            Deadline::Infinite => 0.0,
            Deadline::Finite(tau) => 1.0 / tau,
        };
        DerivedQuantities {
            availability: r,
            f01,
            f02: self.r_c,
            f12: self.r_c,
            f20: self.r_f,
            pi: [pi0, pi1, pi2],
            capacity: pi1 * self.mu1 + pi2 * self.mu2,
        }
    }
}

/// Stationary quantities of the autonomous service-state process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedQuantities {
    /// Wi-Fi availability ratio R.
    pub availability: f64,
    /// Deferred -> cellular (deadline expiry), infinite for a zero deadline.
    pub f01: f64,
    /// Deferred -> Wi-Fi.
    pub f02: f64,
    /// Cellular -> Wi-Fi.
    pub f12: f64,
    /// Wi-Fi -> deferred.
    pub f20: f64,
    /// Stationary probabilities of deferred, cellular and Wi-Fi service states.
    pub pi: [f64; 3],
    /// Capacity in frames/s.
    pub capacity: f64,
}

/// JSON parameter object as read from `--config` files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub lambda_fps: f64,
    pub mu1_fps: f64,
    pub mu2_fps: f64,
    pub mean_c_s: f64,
    pub mean_f_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_s: Option<Deadline>,
}

impl ParamsFile {
    /// `fallback` is used when the file carries no `tau_s`.
    pub fn to_params(&self, fallback: Option<Deadline>) -> Result<SystemParams> {
        let deadline = self
            .tau_s
            .or(fallback)
            .ok_or_else(|| Error::Config("no deadline given (tau_s or --tau)".into()))?;
        Ok(SystemParams::from_means(
            self.lambda_fps,
            self.mu1_fps,
            self.mu2_fps,
            self.mean_c_s,
            self.mean_f_s,
            deadline,
        ))
    }
}

impl From<&SystemParams> for ParamsFile {
    fn from(p: &SystemParams) -> Self {
        ParamsFile {
            lambda_fps: p.lambda,
            mu1_fps: p.mu1,
            mu2_fps: p.mu2,
            mean_c_s: 1.0 / p.r_c,
            mean_f_s: 1.0 / p.r_f,
            tau_s: Some(p.deadline),
        }
    }
}

/// Delay-sensitivity weight `a` in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct Preference(f64);

impl Preference {
    pub fn new(a: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&a) {
            Ok(Preference(a))
        } else {
            Err(Error::Domain(format!("preference weight must lie in [0, 1], got {a}")))
        }
    }

    pub fn weight(self) -> f64 {
        self.0
    }

    /// The affine utility without domain checks. Simulated delays can exceed
    /// the analytic maximum through sampling noise, so scoring simulated
    /// strategies goes through here.
    pub fn score(self, delay: f64, d_hat: f64, eta: f64) -> f64 {
        1.0 - self.0 * (delay / d_hat) - (1.0 - self.0) * (1.0 - eta)
    }
}

/// `U = 1 - a D / D_hat - (1 - a)(1 - eta)`.
pub fn utility(delay: f64, d_hat: f64, eta: f64, pref: Preference) -> Result<f64> {
    if !(delay > 0.0 && delay <= d_hat) {
        return Err(Error::Domain(format!(
            "utility needs 0 < D <= D_hat, got D = {delay}, D_hat = {d_hat}"
        )));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("offloading efficiency {eta} outside [0, 1]")));
    }
    Ok(pref.score(delay, d_hat, eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit(tau: f64) -> SystemParams {
        SystemParams::from_rates(0.5, 1.0, 2.0, 1.0, 1.0, Deadline::from_secs(tau))
    }

    #[test]
    fn unit_params_stationary() {
        let d = unit(1.0).validate().unwrap().derived();
        assert_relative_eq!(d.availability, 0.5);
        assert_relative_eq!(d.pi[0], 0.25, epsilon = 1e-15);
        assert_relative_eq!(d.pi[1], 0.25, epsilon = 1e-15);
        assert_relative_eq!(d.pi[2], 0.5, epsilon = 1e-15);
        assert_relative_eq!(d.capacity, 1.25, epsilon = 1e-15);
        assert_eq!(d.f01, 1.0);
        assert_eq!((d.f02, d.f12, d.f20), (1.0, 1.0, 1.0));
    }

    #[test]
    fn zero_deadline_removes_deferred_state() {
        let d = unit(0.0).derived();
        assert_eq!(d.pi, [0.0, 0.5, 0.5]);
        assert_relative_eq!(d.capacity, 1.5);
        assert_eq!(d.f01, f64::INFINITY);
    }

    #[test]
    fn infinite_deadline_has_no_cellular_state() {
        let p = SystemParams::vehicular(Deadline::Infinite);
        let d = p.validate().unwrap().derived();
        assert_eq!(d.pi[1], 0.0);
        assert_relative_eq!(d.capacity, d.availability * 3050.0, max_relative = 1e-15);
        assert!(d.capacity > 935.0 && d.capacity < 936.0);
    }

    #[test]
    fn vehicular_reference_values() {
        let p = SystemParams::vehicular(Deadline::Finite(0.0));
        assert_relative_eq!(p.availability(), 12.57 / (28.42 + 12.57), max_relative = 1e-14);
        assert!((p.availability() - 0.3067).abs() < 1e-4);
        assert!((p.capacity() - 1689.7).abs() < 0.05);
    }

    #[test]
    fn stability_is_strict() {
        assert!(unit(1.0).validate().is_ok());
        let err = unit(1.0).with_lambda(1.25).validate().unwrap_err();
        match err {
            Error::Unstable { lambda, capacity } => {
                assert_eq!(lambda, 1.25);
                assert_eq!(capacity, 1.25);
            }
            other => panic!("expected Unstable, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_positive_rates() {
        let mut p = unit(1.0);
        p.r_f = 0.0;
        assert!(matches!(p.validate(), Err(Error::NonPositiveRate { name: "r_f", .. })));
        let mut p = unit(1.0);
        p.mu1 = f64::NAN;
        assert!(matches!(p.validate(), Err(Error::NonPositiveRate { name: "mu1", .. })));
        assert!(matches!(unit(-1.0).validate(), Err(Error::Domain(_))));
    }

    #[test]
    fn capacity_limit_at_huge_deadline() {
        let p = SystemParams::vehicular(Deadline::Finite(1e12));
        let limit = p.availability() * p.mu2;
        assert!((p.capacity() - limit).abs() <= 1e-9 * limit);
    }

    #[test]
    fn utility_examples() {
        for a in [0.0, 0.3, 1.0] {
            let pref = Preference::new(a).unwrap();
            assert_relative_eq!(utility(2.0, 2.0, 1.0, pref).unwrap(), 1.0 - a);
        }
        let u = utility(1.0, 4.0, 1.0, Preference::new(0.0).unwrap()).unwrap();
        assert_eq!(u, 1.0);
        let u = utility(1.0, 2.0, 0.8, Preference::new(0.5).unwrap()).unwrap();
        assert_relative_eq!(u, 0.65, epsilon = 1e-15);
    }

    #[test]
    fn utility_domain_errors() {
        let pref = Preference::new(0.5).unwrap();
        assert!(utility(3.0, 2.0, 0.5, pref).is_err());
        assert!(utility(1.0, 2.0, 1.5, pref).is_err());
        assert!(utility(0.0, 2.0, 0.5, pref).is_err());
        assert!(Preference::new(1.01).is_err());
        assert!(Preference::new(-0.1).is_err());
    }

    #[test]
    fn params_json_accepts_inf() {
        let json = r#"{"lambda_fps": 800, "mu1_fps": 1088, "mu2_fps": 3050,
                       "mean_c_s": 28.42, "mean_f_s": 12.57, "tau_s": "inf"}"#;
        let file: ParamsFile = serde_json::from_str(json).unwrap();
        let p = file.to_params(None).unwrap();
        assert_eq!(p.deadline, Deadline::Infinite);
        assert_eq!(p, SystemParams::vehicular(Deadline::Infinite));

        let json = r#"{"lambda_fps": 800, "mu1_fps": 1088, "mu2_fps": 3050,
                       "mean_c_s": 28.42, "mean_f_s": 12.57, "tau_s": 10}"#;
        let file: ParamsFile = serde_json::from_str(json).unwrap();
        assert_eq!(file.tau_s, Some(Deadline::Finite(10.0)));
        let back = serde_json::to_string(&file).unwrap();
        assert!(back.contains("\"tau_s\":10.0"));
    }

    #[test]
    fn missing_deadline_needs_fallback() {
        let json = r#"{"lambda_fps": 1, "mu1_fps": 2, "mu2_fps": 3, "mean_c_s": 1, "mean_f_s": 1}"#;
        let file: ParamsFile = serde_json::from_str(json).unwrap();
        assert!(file.to_params(None).is_err());
        assert_eq!(
            file.to_params(Some(Deadline::Finite(2.0))).unwrap().deadline,
            Deadline::Finite(2.0)
        );
    }

    #[test]
    fn deadline_parsing() {
        assert_eq!("inf".parse::<Deadline>().unwrap(), Deadline::Infinite);
        assert_eq!("55.5".parse::<Deadline>().unwrap(), Deadline::Finite(55.5));
        assert!("soon".parse::<Deadline>().is_err());
    }
}
