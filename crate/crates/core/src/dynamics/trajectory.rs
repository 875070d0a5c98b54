use serde::{Deserialize, Serialize};

use super::DynamicsError;

/// Interval during which the `w >= 0` floor was binding, s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StallEvent {
    pub start: f64,
    pub end: f64,
}

/// Sampled closed- or open-loop response.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub omega: Vec<f64>,
    pub u: Vec<f64>,
    pub torque: Vec<f64>,
    pub power: Vec<f64>,
    /// trapezoid of `power` over `t`, J
    pub energy: f64,
    pub stall_events: Vec<StallEvent>,
    /// an open-loop schedule was queried outside its domain
    pub schedule_clamped: bool,
}

pub fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2).zip(y.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).sum()
}

impl Trajectory {
    /// Builds a trajectory, deriving `P = Q w` and the energy.
    pub fn new(
        t: Vec<f64>,
        omega: Vec<f64>,
        u: Vec<f64>,
        torque: Vec<f64>,
    ) -> Result<Self, DynamicsError> {
        let n = t.len();
        if omega.len() != n || u.len() != n || torque.len() != n {
            return Err(DynamicsError::InvalidSettings(format!(
                "series lengths differ: t {n}, omega {}, u {}, Q {}",
                omega.len(),
                u.len(),
                torque.len()
            )));
        }
        let power: Vec<f64> = torque.iter().zip(&omega).map(|(q, w)| q * w).collect();
        let energy = trapezoid(&t, &power);
        Ok(Self { t, omega, u, torque, power, energy, stall_events: Vec::new(), schedule_clamped: false })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn stalled(&self) -> bool {
        !self.stall_events.is_empty()
    }

    pub fn min_omega(&self) -> f64 {
        self.omega.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_u(&self) -> f64 {
        self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Tip speed ratio series for rotor radius `r` under inflow `v(t)`.
    pub fn tsr(&self, r: f64, v: impl Fn(f64) -> f64) -> Vec<f64> {
        self.t.iter().zip(&self.omega).map(|(&t, &w)| w * r / v(t)).collect()
    }

    /// CSV body with header `t,omega,u,Q,P`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.len() * 120);
        out.push_str("t,omega,u,Q,P\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                self.t[i], self.omega[i], self.u[i], self.torque[i], self.power[i]
            ));
        }
        out
    }

    /// Sidecar document `{energy_J, stall_events, settings}`.
    pub fn sidecar(&self, settings: serde_json::Value) -> serde_json::Value {
        serde_json::json!({
            "energy_J": self.energy,
            "stall_events": self.stall_events,
            "schedule_clamped": self.schedule_clamped,
            "settings": settings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_is_trapezoid_of_power() {
        let t = vec![0.0, 0.5, 1.5];
        let tr = Trajectory::new(t, vec![1.0, 2.0, 3.0], vec![0.0; 3], vec![4.0, 4.0, 2.0]).unwrap();
        assert_eq!(tr.power, vec![4.0, 8.0, 6.0]);
        assert_eq!(tr.energy, 0.25 * 12.0 + 0.5 * 14.0);
    }

    #[test]
    fn csv_header() {
        let tr = Trajectory::new(vec![0.0], vec![1.0], vec![2.0], vec![3.0]).unwrap();
        let csv = tr.to_csv_string();
        assert!(csv.starts_with("t,omega,u,Q,P\n"));
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn mismatched_lengths() {
        assert!(Trajectory::new(vec![0.0, 1.0], vec![1.0], vec![2.0], vec![3.0]).is_err());
    }
}
