//! Single-state rotor dynamics `I dw/dt = Q(v, w) - u`, generator torque laws
//! and the speed sensor chain.

mod control;
mod flow;
mod sensor;
mod simulate;
mod trajectory;

use thiserror::Error;

use crate::rotor::RotorError;

pub use control::{
    hard_sat, smoothed_sat, smoothed_sat_derivative, ControlLaw, Interpolation, LawKind,
    OpenLoopSchedule, Saturation, DEFAULT_SAT_NU,
};
pub use flow::FlowProfile;
pub use sensor::{apply_sensor_chain, noise_std, Butterworth2, SensorChain, SensorModel};
pub use simulate::{equilibrium_omega, simulate, SimulationSettings};
pub use trajectory::{trapezoid, StallEvent, Trajectory};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DynamicsError {
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("state became non-finite at t = {t} s")]
    NonFinite { t: f64 },
    #[error("torque evaluation failed at t = {t} s: {source}")]
    Torque { t: f64, source: RotorError },
}
