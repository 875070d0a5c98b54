use serde::{Deserialize, Serialize};

use super::DynamicsError;

/// Default smoothing parameter of [`smoothed_sat`].
pub const DEFAULT_SAT_NU: f64 = 1e-3;

/// Infinitely differentiable approximation of `clamp(u, 0, gamma)`:
///
/// ```text
/// gamma/4 * (2 + sqrt(nu + (2u/gamma)^2) - sqrt(nu + (2u/gamma - 2)^2))
/// ```
pub fn smoothed_sat(u: f64, gamma: f64, nu: f64) -> f64 {
    let x = 2.0 * u / gamma;
    0.25 * gamma * (2.0 + (nu + x * x).sqrt() - (nu + (x - 2.0) * (x - 2.0)).sqrt())
}

/// `d smoothed_sat / du`.
pub fn smoothed_sat_derivative(u: f64, gamma: f64, nu: f64) -> f64 {
    let x = 2.0 * u / gamma;
    0.5 * (x / (nu + x * x).sqrt() - (x - 2.0) / (nu + (x - 2.0) * (x - 2.0)).sqrt())
}

pub fn hard_sat(u: f64, gamma: f64) -> f64 {
    u.clamp(0.0, gamma)
}

/// Actuator limit applied after the control law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Saturation {
    /// N m
    pub u_max: f64,
    pub nu: f64,
}

impl Saturation {
    pub fn new(u_max: f64) -> Self {
        Self { u_max, nu: DEFAULT_SAT_NU }
    }

    pub fn apply(&self, u: f64) -> f64 {
        smoothed_sat(u, self.u_max, self.nu)
    }
}

/// How an open-loop schedule is evaluated between samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Samples come in triples `(t_k, t_k+1/2, t_k+1)` sharing end points; the
    /// quadratic through each triple is used, as produced by collocation.
    Collocation,
    Linear,
}

/// Sampled control trajectory `u(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenLoopSchedule {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub interpolation: Interpolation,
    /// Output is clamped into this interval when set.
    #[serde(with = "bounds_serde")]
    pub bounds: Option<(f64, f64)>,
}

/// An infinite upper bound is written as `null`.
mod bounds_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(b: &Option<(f64, f64)>, s: S) -> Result<S::Ok, S::Error> {
        b.map(|(lo, hi)| (lo, hi.is_finite().then_some(hi))).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<(f64, f64)>, D::Error> {
        Ok(Option::<(f64, Option<f64>)>::deserialize(d)?.map(|(lo, hi)| (lo, hi.unwrap_or(f64::INFINITY))))
    }
}

impl OpenLoopSchedule {
    pub fn linear(t: Vec<f64>, u: Vec<f64>) -> Result<Self, DynamicsError> {
        let s = Self { t, u, interpolation: Interpolation::Linear, bounds: None };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let n = self.t.len();
        if n < 2 || n != self.u.len() {
            return Err(DynamicsError::InvalidSettings(format!(
                "schedule needs >= 2 matching samples (t {}, u {})",
                n,
                self.u.len()
            )));
        }
        if self.t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DynamicsError::InvalidSettings("schedule times must ascend".into()));
        }
        if self.u.iter().any(|u| !u.is_finite()) {
            return Err(DynamicsError::InvalidSettings("non-finite schedule value".into()));
        }
        if self.interpolation == Interpolation::Collocation && n % 2 == 0 {
            return Err(DynamicsError::InvalidSettings(
                "collocation schedule needs an odd sample count".into(),
            ));
        }
        Ok(())
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    pub fn end(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    /// Whether `t` lies outside the sampled domain (the value is then clamped).
    pub fn out_of_domain(&self, t: f64) -> bool {
        t < self.start() || t > self.end()
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let t = t.clamp(self.start(), self.end());
        let u = match self.interpolation {
            Interpolation::Linear => {
                let j = self.t.partition_point(|&x| x <= t).clamp(1, self.t.len() - 1);
                let i = j - 1;
                let w = (t - self.t[i]) / (self.t[j] - self.t[i]);
                self.u[i] + w * (self.u[j] - self.u[i])
            }
            Interpolation::Collocation => {
                let segments = (self.t.len() - 1) / 2;
                let j = self.t.partition_point(|&x| x <= t);
                let k = (j.saturating_sub(1) / 2).min(segments - 1);
                let (t0, t1, t2) = (self.t[2 * k], self.t[2 * k + 1], self.t[2 * k + 2]);
                let (u0, u1, u2) = (self.u[2 * k], self.u[2 * k + 1], self.u[2 * k + 2]);
                u0 * (t - t1) * (t - t2) / ((t0 - t1) * (t0 - t2))
                    + u1 * (t - t0) * (t - t2) / ((t1 - t0) * (t1 - t2))
                    + u2 * (t - t0) * (t - t1) / ((t2 - t0) * (t2 - t1))
            }
        };
        match self.bounds {
            Some((lo, hi)) => u.clamp(lo, hi),
            None => u,
        }
    }
}

/// Generator torque law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LawKind {
    OpenLoop { schedule: OpenLoopSchedule },
    /// `u = k1 w`
    Linear { k1: f64 },
    /// `u = k2 w^2`
    Quadratic { k2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlLaw {
    pub kind: LawKind,
    pub saturation: Option<Saturation>,
}

impl ControlLaw {
    pub fn linear(k1: f64) -> Self {
        Self { kind: LawKind::Linear { k1 }, saturation: None }
    }

    pub fn quadratic(k2: f64) -> Self {
        Self { kind: LawKind::Quadratic { k2 }, saturation: None }
    }

    pub fn open_loop(schedule: OpenLoopSchedule) -> Self {
        Self { kind: LawKind::OpenLoop { schedule }, saturation: None }
    }

    pub fn saturated(mut self, saturation: Saturation) -> Self {
        self.saturation = Some(saturation);
        self
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        match &self.kind {
            LawKind::OpenLoop { schedule } => schedule.validate()?,
            LawKind::Linear { k1: k } | LawKind::Quadratic { k2: k } => {
                if !(*k >= 0.0) || !k.is_finite() {
                    return Err(DynamicsError::InvalidSettings(format!("gain {k} must be >= 0")));
                }
            }
        }
        if let Some(s) = &self.saturation {
            if !(s.u_max > 0.0) || !(s.nu > 0.0) {
                return Err(DynamicsError::InvalidSettings(format!(
                    "saturation needs u_max > 0 and nu > 0, got {s:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_feedback(&self) -> bool {
        !matches!(self.kind, LawKind::OpenLoop { .. })
    }

    /// Commanded torque for the fed-back speed `omega` at time `t`.
    pub fn control_torque(&self, omega: f64, t: f64) -> f64 {
        let u = match &self.kind {
            LawKind::OpenLoop { schedule } => schedule.evaluate(t),
            LawKind::Linear { k1 } => k1 * omega,
            LawKind::Quadratic { k2 } => k2 * omega * omega,
        };
        match &self.saturation {
            Some(s) => s.apply(u),
            None => u,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sat_symmetry_point() {
        assert!((smoothed_sat(350.0, 700.0, 1e-3) - 350.0).abs() < 1e-12);
    }

    #[test]
    fn sat_at_zero() {
        let y = smoothed_sat(0.0, 700.0, 1e-3);
        let by_hand = 175.0 * (2.0 + 1e-3f64.sqrt() - 4.001f64.sqrt());
        assert!((y - by_hand).abs() < 1e-12);
        assert!((y - 5.490).abs() < 5e-4, "{y}");
    }

    #[test]
    fn sat_derivative_matches_difference() {
        for &u in &[-100.0, 0.0, 200.0, 699.0, 1031.0] {
            let h = 1e-4;
            let fd = (smoothed_sat(u + h, 700.0, 1e-3) - smoothed_sat(u - h, 700.0, 1e-3)) / (2.0 * h);
            assert!((fd - smoothed_sat_derivative(u, 700.0, 1e-3)).abs() < 1e-7);
        }
    }

    #[test]
    fn quadratic_law_before_saturation() {
        assert!((ControlLaw::quadratic(10.98).control_torque(5.0, 0.0) - 274.5).abs() < 1e-12);
        assert_eq!(ControlLaw::linear(0.0).control_torque(12.0, 3.0), 0.0);
    }

    #[test]
    fn saturated_law_below_limit() {
        let law = ControlLaw::quadratic(7.16).saturated(Saturation::new(700.0));
        let u = law.control_torque(12.0, 0.0);
        assert!(u < 700.0 && u > 690.0, "{u}");
        assert!((u - smoothed_sat(1031.04, 700.0, 1e-3)).abs() < 1e-9);
    }

    #[test]
    fn collocation_schedule_is_exact_for_quadratics() {
        let t: Vec<f64> = (0..=8).map(|i| i as f64 * 0.5).collect();
        let f = |t: f64| 3.0 - t + 0.25 * t * t;
        let s = OpenLoopSchedule {
            u: t.iter().map(|&x| f(x)).collect(),
            t,
            interpolation: Interpolation::Collocation,
            bounds: None,
        };
        s.validate().unwrap();
        for i in 0..=400 {
            let x = i as f64 * 0.01;
            assert!((s.evaluate(x) - f(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn schedule_clamps_outside_domain() {
        let s = OpenLoopSchedule::linear(vec![0.0, 1.0], vec![2.0, 4.0]).unwrap();
        assert_eq!(s.evaluate(0.5), 3.0);
        assert_eq!(s.evaluate(5.0), 4.0);
        assert!(s.out_of_domain(5.0) && s.out_of_domain(-0.1) && !s.out_of_domain(1.0));
    }

    #[test]
    fn rejects_negative_gain() {
        assert!(ControlLaw::linear(-1.0).validate().is_err());
        assert!(ControlLaw::quadratic(2.0).saturated(Saturation::new(0.0)).validate().is_err());
    }
}
