use serde::{Deserialize, Serialize};

/// Deterministic inflow speed history `v(t)`, m/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlowProfile {
    Constant {
        speed: f64,
    },
    /// `base + step / (1 + exp(-(t - center)))`
    SmoothedStep {
        base: f64,
        step: f64,
        center: f64,
    },
    /// `mean + amplitude * sin(angular_frequency * t + phase)`
    Sinusoid {
        amplitude: f64,
        angular_frequency: f64,
        phase: f64,
        mean: f64,
    },
    Scaled {
        inner: Box<FlowProfile>,
        factor: f64,
    },
}

impl FlowProfile {
    /// 1.2 m/s stepping to 1.4 m/s around t = 30 s.
    pub fn step_scenario() -> Self {
        Self::SmoothedStep { base: 1.2, step: 0.2, center: 30.0 }
    }

    /// `0.2 sin(0.25 t) + 1.5`.
    pub fn sinusoid_scenario() -> Self {
        Self::Sinusoid { amplitude: 0.2, angular_frequency: 0.25, phase: 0.0, mean: 1.5 }
    }

    pub fn velocity(&self, t: f64) -> f64 {
        match self {
            Self::Constant { speed } => *speed,
            Self::SmoothedStep { base, step, center } => base + step / (1.0 + (-(t - center)).exp()),
            Self::Sinusoid { amplitude, angular_frequency, phase, mean } => {
                mean + amplitude * (angular_frequency * t + phase).sin()
            }
            Self::Scaled { inner, factor } => factor * inner.velocity(t),
        }
    }

    /// Minimum of `v` over `[0, horizon]`.
    pub fn min_velocity(&self, horizon: f64) -> f64 {
        match self {
            Self::Constant { speed } => *speed,
            Self::SmoothedStep { .. } => self.velocity(0.0).min(self.velocity(horizon)),
            Self::Sinusoid { amplitude, angular_frequency, phase, mean } => {
                if sin_hits_minus_one(*angular_frequency, *phase, horizon) {
                    return mean - amplitude.abs();
                }
                // no trough inside the window: the minimum sits on the sampled edge
                let n = 2000;
                (0..=n)
                    .map(|i| self.velocity(horizon * i as f64 / n as f64))
                    .fold(f64::INFINITY, f64::min)
            }
            Self::Scaled { inner, factor } => {
                if *factor >= 0.0 {
                    factor * inner.min_velocity(horizon)
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

/// Whether `sin(w t + p)` reaches -1 for some t in [0, horizon].
fn sin_hits_minus_one(w: f64, p: f64, horizon: f64) -> bool {
    let tau = std::f64::consts::TAU;
    let target = 1.5 * std::f64::consts::PI;
    let (lo, hi) = if w >= 0.0 { (p, p + w * horizon) } else { (p + w * horizon, p) };
    let k = ((lo - target) / tau).ceil();
    target + k * tau <= hi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_starts_at_base_speed() {
        let v = FlowProfile::step_scenario().velocity(0.0);
        assert!((v - 1.2).abs() < 5e-5, "{v}");
    }

    #[test]
    fn step_midpoint() {
        assert!((FlowProfile::step_scenario().velocity(30.0) - 1.3).abs() < 1e-15);
    }

    #[test]
    fn sinusoid_direct_evaluation() {
        let v = FlowProfile::sinusoid_scenario().velocity(10.0);
        assert!((v - (0.2 * 2.5f64.sin() + 1.5)).abs() < 1e-15);
        assert!((v - 1.61969).abs() < 1e-5);
    }

    #[test]
    fn min_velocity_of_full_period() {
        let f = FlowProfile::sinusoid_scenario();
        assert!((f.min_velocity(50.0) - 1.3).abs() < 1e-12);
        assert!((f.min_velocity(1.0) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn serde_tagging() {
        let f = FlowProfile::Scaled { inner: Box::new(FlowProfile::sinusoid_scenario()), factor: 1.1 };
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"kind\":\"scaled\""));
        let back: FlowProfile = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
    }
}
