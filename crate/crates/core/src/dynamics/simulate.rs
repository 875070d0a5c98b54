use serde::{Deserialize, Serialize};

use super::{
    noise_std, ControlLaw, DynamicsError, FlowProfile, LawKind, SensorChain, SensorModel,
    StallEvent, Trajectory,
};
use crate::roots::brent;
use crate::rotor::TorqueModel;

/// Integration settings for [`simulate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    /// s
    pub horizon: f64,
    /// s
    pub dt: f64,
    /// rotor inertia, kg m^2
    pub inertia: f64,
    /// Starting speed; the largest stable equilibrium of the law is used when
    /// absent.
    pub initial_omega: Option<f64>,
}

impl SimulationSettings {
    pub fn new(horizon: f64, dt: f64, inertia: f64) -> Self {
        Self { horizon, dt, inertia, initial_omega: None }
    }

    pub fn steps(&self) -> Result<usize, DynamicsError> {
        if !(self.horizon > 0.0) || !(self.dt > 0.0) || !(self.inertia > 0.0) {
            return Err(DynamicsError::InvalidSettings(format!(
                "horizon, dt and inertia must be > 0 (got {}, {}, {})",
                self.horizon, self.dt, self.inertia
            )));
        }
        let n = (self.horizon / self.dt).round();
        if (n * self.dt - self.horizon).abs() > 1e-9 * self.horizon || n < 1.0 {
            return Err(DynamicsError::InvalidSettings(format!(
                "horizon {} is not a whole number of steps of {}",
                self.horizon, self.dt
            )));
        }
        Ok(n as usize)
    }
}

/// Largest tip speed ratio scanned for equilibria.
const EQUILIBRIUM_MAX_TSR: f64 = 25.0;
const EQUILIBRIUM_SCAN: usize = 100;

/// Largest stable root of `Q(v0, w) = u(w)`, or 0 if the law overpowers the
/// rotor at every speed.
pub fn equilibrium_omega(
    model: &dyn TorqueModel,
    law: &ControlLaw,
    v0: f64,
) -> Result<f64, DynamicsError> {
    let w_max = EQUILIBRIUM_MAX_TSR * v0 / model.tip_radius();
    let g = |w: f64| -> Result<f64, DynamicsError> {
        let q = model.torque(v0, w).map_err(|source| DynamicsError::Torque { t: 0.0, source })?;
        Ok(q - law.control_torque(w, 0.0))
    };
    let mut prev = (0.0, g(0.0)?);
    let mut found = None;
    for i in 1..=EQUILIBRIUM_SCAN {
        let w = w_max * i as f64 / EQUILIBRIUM_SCAN as f64;
        let gw = g(w)?;
        if prev.1 > 0.0 && gw <= 0.0 {
            found = Some((prev.0, w));
        }
        prev = (w, gw);
    }
    let Some((lo, hi)) = found else {
        return Ok(0.0);
    };
    let root = brent(|w| g(w).unwrap_or(f64::NAN), lo, hi, 1e-13, 200);
    Ok(root.map_or(hi, |r| r.x))
}

/// Integrates `I dw/dt = Q(v(t), w) - u` with fixed-step RK4.
///
/// Without a sensor the law is evaluated at every stage. With one, the fed-back
/// speed is measured once per step through the noise and filter chain and the
/// command is held over the step. The noise level is set from the mean square
/// speed of a noise-free run of the same law.
pub fn simulate(
    model: &dyn TorqueModel,
    law: &ControlLaw,
    profile: &FlowProfile,
    settings: &SimulationSettings,
    sensor: Option<&SensorModel>,
) -> Result<Trajectory, DynamicsError> {
    law.validate()?;
    let n = settings.steps()?;
    let v_min = profile.min_velocity(settings.horizon);
    if !(v_min > 0.0) {
        return Err(DynamicsError::InvalidSettings(format!(
            "inflow speed must stay positive over the horizon (min {v_min})"
        )));
    }
    let omega0 = match settings.initial_omega {
        Some(w) if w >= 0.0 && w.is_finite() => w,
        Some(w) => {
            return Err(DynamicsError::InvalidSettings(format!("initial speed {w} must be >= 0")))
        }
        None => equilibrium_omega(model, law, profile.velocity(0.0))?,
    };
    let sensor = sensor.filter(|_| law.is_feedback());
    match sensor {
        None => integrate(model, law, profile, settings, n, omega0, None),
        Some(s) => {
            s.validate(settings.dt)?;
            let clean = integrate(model, law, profile, settings, n, omega0, None)?;
            let ms = clean.omega.iter().map(|w| w * w).sum::<f64>() / clean.len() as f64;
            let mut chain = SensorChain::new(s, settings.dt, noise_std(ms, s.snr_db))?;
            integrate(model, law, profile, settings, n, omega0, Some(&mut chain))
        }
    }
}

fn integrate(
    model: &dyn TorqueModel,
    law: &ControlLaw,
    profile: &FlowProfile,
    settings: &SimulationSettings,
    n: usize,
    omega0: f64,
    mut chain: Option<&mut SensorChain>,
) -> Result<Trajectory, DynamicsError> {
    let (dt, inertia) = (settings.dt, settings.inertia);
    let torque = |t: f64, w: f64| {
        model
            .torque(profile.velocity(t), w.max(0.0))
            .map_err(|source| DynamicsError::Torque { t, source })
    };
    let schedule = match &law.kind {
        LawKind::OpenLoop { schedule } => Some(schedule),
        _ => None,
    };

    let mut ts = Vec::with_capacity(n + 1);
    let mut ws = Vec::with_capacity(n + 1);
    let mut us = Vec::with_capacity(n + 1);
    let mut qs = Vec::with_capacity(n + 1);
    let mut stalls = Vec::new();
    let mut stall_start: Option<f64> = None;
    let mut clamped = false;

    let mut w = omega0;
    let mut q = torque(0.0, w)?;
    for i in 0..=n {
        let t = i as f64 * dt;
        let held = chain.as_deref_mut().map(|c| law.control_torque(c.measure(w), t));
        let u = held.unwrap_or_else(|| law.control_torque(w, t));
        ts.push(t);
        ws.push(w);
        us.push(u);
        qs.push(q);
        if let Some(s) = schedule {
            clamped |= s.out_of_domain(t);
        }
        if i == n {
            break;
        }

        let rate = |tt: f64, ww: f64| -> Result<f64, DynamicsError> {
            let uu = held.unwrap_or_else(|| law.control_torque(ww.max(0.0), tt));
            Ok((torque(tt, ww)? - uu) / inertia)
        };
        let th = t + 0.5 * dt;
        let k1 = (q - u) / inertia;
        let k2 = rate(th, w + 0.5 * dt * k1)?;
        let k3 = rate(th, w + 0.5 * dt * k2)?;
        let t1 = (i + 1) as f64 * dt;
        let k4 = rate(t1, w + dt * k3)?;
        let mut next = w + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(DynamicsError::NonFinite { t: t1 });
        }
        if next < 0.0 {
            next = 0.0;
            stall_start.get_or_insert(t1);
        } else if next > 0.0 {
            if let Some(start) = stall_start.take() {
                stalls.push(StallEvent { start, end: t1 });
            }
        }
        w = next;
        q = torque(t1, w)?;
    }
    if let Some(start) = stall_start {
        stalls.push(StallEvent { start, end: n as f64 * dt });
    }
    let mut traj = Trajectory::new(ts, ws, us, qs)?;
    traj.stall_events = stalls;
    traj.schedule_clamped = clamped;
    Ok(traj)
}
