//! Blade-element momentum rotor model: geometry, section polars, torque,
//! power coefficient and blade inertia.

mod bem;
mod geometry;
mod performance;
mod polar;
mod table;

pub use bem::{
    rotor_torque, rotor_torque_with_gradient, solve_bem_section, FluidEnvironment, RotorConstants,
    SectionLoads, TorqueSensitivity, OMEGA_FLOOR,
};
pub use geometry::{BladeGeometry, GeometryBounds, Segment};
pub use performance::{
    available_power, cp_curve, default_tsr_grid, power_coefficient, rotor_inertia,
    rotor_inertia_chord_gradient, tip_speed_ratio, BladeMaterial, CpCurve, CpPoint, BETZ_LIMIT,
};
pub use polar::{AirfoilPolar, DEFAULT_CL_MAX, DEFAULT_STALL_DEG, DEFAULT_ZERO_LIFT_DEG};
pub use table::{ExactTorque, TorqueModel, TorqueTable, TABLE_MAX_TSR, TABLE_STEP};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RotorError {
    #[error("angle of attack {0} deg outside [-180, 180]")]
    AlphaOutOfRange(f64),
    #[error("invalid polar: {0}")]
    InvalidPolar(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid operating point: {0}")]
    InvalidOperatingPoint(String),
    #[error(
        "inflow-angle residual not bracketed at r = {r_mid} m (v = {v} m/s, omega = {omega} rad/s): \
         R(lo) = {residual_lo}, R(pi/2) = {residual_hi}"
    )]
    NoBracket { r_mid: f64, v: f64, omega: f64, residual_lo: f64, residual_hi: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}
