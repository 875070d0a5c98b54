//! Blade-element momentum solution of a single annulus, following the
//! one-dimensional residual-in-inflow-angle formulation: for each section the
//! inflow angle `phi` is the root of
//!
//! ```text
//! R(phi) = sin(phi) / (1 - a(phi)) - cos(phi) * (1 - kp(phi)) / lambda_r
//! ```
//!
//! with `a`, `a' = kp / (1 - kp)` closed-form in `phi`, Prandtl tip/hub loss
//! and Buhl's empirical relation above `a = 0.4`. Because the residual is
//! bracketed on `(0, pi/2]` for any turbine-state section, Brent's method
//! always converges.
//!
//! Derivatives of the section torque with respect to rotor speed, chord and
//! twist are obtained by implicit differentiation of `R(phi*) = 0`, with the
//! partials of the explicit expressions computed by forward-mode dual numbers.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{U1, U4};
use num_dual::{DualNum, DualSVec64};
use serde::{Deserialize, Serialize};

use super::{AirfoilPolar, BladeGeometry, RotorError, Segment};
use crate::roots::brent;

/// Rotor speed used in place of exactly zero to avoid the tip-speed-ratio
/// singularity, rad/s.
pub const OMEGA_FLOOR: f64 = 1e-3;
const PHI_LO: f64 = 1e-6;
const PHI_TOL: f64 = 1e-12;
const MAX_ITER: usize = 200;

/// Working-fluid properties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidEnvironment {
    /// kg/m^3
    pub density: f64,
}

impl Default for FluidEnvironment {
    fn default() -> Self {
        Self { density: 1000.0 }
    }
}

/// Rotor-level constants entering every section solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorConstants {
    pub hub_radius: f64,
    pub tip_radius: f64,
    pub num_blades: u32,
}

impl BladeGeometry {
    pub fn constants(&self) -> RotorConstants {
        RotorConstants {
            hub_radius: self.hub_radius,
            tip_radius: self.tip_radius,
            num_blades: self.num_blades,
        }
    }
}

/// Converged state of one blade element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionLoads {
    /// axial induction
    pub a: f64,
    /// tangential induction
    pub a_tan: f64,
    /// inflow angle, rad
    pub phi: f64,
    /// torque contribution of all blades at this station, N m
    pub dq: f64,
    /// thrust contribution of all blades at this station, N
    pub dt: f64,
    /// combined Prandtl tip and hub loss factor
    pub loss_factor: f64,
    /// residual at the returned `phi`
    pub residual: f64,
}

struct Station<'a> {
    r: f64,
    dr: f64,
    v: f64,
    rho: f64,
    blades: f64,
    tip_radius: f64,
    hub_radius: f64,
    polar: &'a AirfoilPolar,
}

struct Evaluation<D> {
    residual: D,
    a: D,
    a_tan: D,
    dq: D,
    dt: D,
    loss: D,
}

impl Station<'_> {
    fn eval<D: DualNum<Primitive = f64> + Copy>(&self, phi: D, omega: D, chord: D, twist: D) -> Evaluation<D> {
        let sphi = phi.sin();
        let cphi = phi.cos();
        let alpha_deg = (phi - twist) * (180.0 / PI);
        let (cl, cd) = self.polar.lookup_dual(alpha_deg);
        let cn = cl * cphi + cd * sphi;
        let ct = cl * sphi - cd * cphi;
        let solidity = chord * (self.blades / (2.0 * PI * self.r));

        let abs_s = if sphi.re() < 0.0 { -sphi } else { sphi };
        let half_b = 0.5 * self.blades;
        let f_tip = abs_s.recip() * (half_b * (self.tip_radius - self.r) / self.r);
        let f_hub = abs_s.recip() * (half_b * (self.r - self.hub_radius) / self.hub_radius);
        let loss_tip = (-f_tip).exp().acos() * (2.0 / PI);
        let loss_hub = (-f_hub).exp().acos() * (2.0 / PI);
        let loss = loss_tip * loss_hub;

        let k = solidity * cn / (loss * sphi * sphi * 4.0);
        let kp = solidity * ct / (loss * sphi * cphi * 4.0);
        let lambda_r = omega * self.r / self.v;
        let one = D::one();

        let (a, residual) = if phi.re() > 0.0 {
            let a = if k.re() <= 2.0 / 3.0 {
                k / (one + k)
            } else {
                // Buhl's empirical high-induction relation, blended with the loss factor
                let two_fk = loss * k * 2.0;
                let g1 = two_fk - (-loss + 10.0 / 9.0);
                let g2 = two_fk - loss * (-loss + 4.0 / 3.0);
                let g3 = two_fk - (loss * -2.0 + 25.0 / 9.0);
                if g3.re().abs() < 1e-6 {
                    one - (g2.sqrt() * 2.0).recip()
                } else {
                    (g1 - g2.sqrt()) / g3
                }
            };
            (a, sphi / (one - a) - cphi * (one - kp) / lambda_r)
        } else {
            // propeller-brake region
            let a = if k.re() > 1.0 { k / (k - 1.0) } else { D::zero() };
            (a, sphi * (one - k) - cphi * (one - kp) / lambda_r)
        };
        let a_tan = kp / (one - kp);

        let axial = (one - a) * self.v;
        let tangential = omega * self.r * (one + a_tan);
        let w2 = axial * axial + tangential * tangential;
        let q = w2 * chord * (0.5 * self.rho * self.blades);
        Evaluation {
            residual,
            a,
            a_tan,
            dq: q * ct * (self.r * self.dr),
            dt: q * cn * self.dr,
            loss,
        }
    }

    fn residual(&self, phi: f64, omega: f64, chord: f64, twist: f64) -> f64 {
        self.eval(phi, omega, chord, twist).residual
    }
}

fn station<'a>(
    seg: &Segment,
    consts: &RotorConstants,
    v: f64,
    polar: &'a AirfoilPolar,
    fluid: &FluidEnvironment,
) -> Station<'a> {
    Station {
        r: seg.r_mid,
        dr: seg.dr,
        v,
        rho: fluid.density,
        blades: consts.num_blades as f64,
        tip_radius: consts.tip_radius,
        hub_radius: consts.hub_radius,
        polar,
    }
}

fn solve_phi(st: &Station<'_>, omega: f64, chord: f64, twist: f64) -> Result<f64, RotorError> {
    let f = |phi: f64| st.residual(phi, omega, chord, twist);
    let brackets = [(PHI_LO, FRAC_PI_2), (-FRAC_PI_4, -PHI_LO), (FRAC_PI_2, PI - PHI_LO)];
    for &(lo, hi) in &brackets {
        if let Some(root) = brent(f, lo, hi, PHI_TOL, MAX_ITER) {
            return Ok(root.x);
        }
    }
    Err(RotorError::NoBracket {
        r_mid: st.r,
        v: st.v,
        omega,
        residual_lo: f(PHI_LO),
        residual_hi: f(FRAC_PI_2),
    })
}

fn check_inputs(v: f64, omega: f64) -> Result<(), RotorError> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(RotorError::InvalidOperatingPoint(format!("inflow speed {v} must be > 0")));
    }
    if !(omega >= 0.0) || !omega.is_finite() {
        return Err(RotorError::InvalidOperatingPoint(format!(
            "rotor speed {omega} must be >= 0"
        )));
    }
    Ok(())
}

/// Solves the momentum/blade-element balance of one segment.
pub fn solve_bem_section(
    seg: &Segment,
    consts: &RotorConstants,
    v: f64,
    omega: f64,
    polar: &AirfoilPolar,
    fluid: &FluidEnvironment,
) -> Result<SectionLoads, RotorError> {
    check_inputs(v, omega)?;
    let omega = omega.max(OMEGA_FLOOR);
    let st = station(seg, consts, v, polar, fluid);
    let phi = solve_phi(&st, omega, seg.chord, seg.twist)?;
    let e = st.eval(phi, omega, seg.chord, seg.twist);
    Ok(SectionLoads {
        a: e.a,
        a_tan: e.a_tan,
        phi,
        dq: e.dq,
        dt: e.dt,
        loss_factor: e.loss,
        residual: e.residual,
    })
}

/// Shaft torque `Q = sum(dQ_i)`, N m.
///
/// A negative `omega` is interpreted as the mirror-image rotor turning the
/// other way, so `Q(-w; mirrored) = -Q(w)`.
pub fn rotor_torque(
    geometry: &BladeGeometry,
    v: f64,
    omega: f64,
    polar: &AirfoilPolar,
    fluid: &FluidEnvironment,
) -> Result<f64, RotorError> {
    if omega < 0.0 {
        let q = rotor_torque(&geometry.mirrored(), v, -omega, &polar.mirrored(), fluid)?;
        return Ok(-q);
    }
    check_inputs(v, omega)?;
    let consts = geometry.constants();
    let omega = omega.max(OMEGA_FLOOR);
    let mut total = 0.0;
    for seg in &geometry.segments {
        let st = station(seg, &consts, v, polar, fluid);
        let phi = solve_phi(&st, omega, seg.chord, seg.twist)?;
        total += st.eval(phi, omega, seg.chord, seg.twist).dq;
    }
    Ok(total)
}

/// Torque and its exact first derivatives at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct TorqueSensitivity {
    pub torque: f64,
    /// dQ/d(omega); zero below the speed floor
    pub d_omega: f64,
    /// dQ/d(chord_i)
    pub d_chord: Vec<f64>,
    /// dQ/d(twist_i), per radian
    pub d_twist: Vec<f64>,
}

pub fn rotor_torque_with_gradient(
    geometry: &BladeGeometry,
    v: f64,
    omega: f64,
    polar: &AirfoilPolar,
    fluid: &FluidEnvironment,
) -> Result<TorqueSensitivity, RotorError> {
    check_inputs(v, omega)?;
    let consts = geometry.constants();
    let floored = omega < OMEGA_FLOOR;
    let omega = omega.max(OMEGA_FLOOR);
    let n = geometry.num_segments();
    let mut out = TorqueSensitivity {
        torque: 0.0,
        d_omega: 0.0,
        d_chord: vec![0.0; n],
        d_twist: vec![0.0; n],
    };
    for (i, seg) in geometry.segments.iter().enumerate() {
        let st = station(seg, &consts, v, polar, fluid);
        let phi = solve_phi(&st, omega, seg.chord, seg.twist)?;
        let e = st.eval(
            DualSVec64::<4>::from_re(phi).derivative(0),
            DualSVec64::<4>::from_re(omega).derivative(1),
            DualSVec64::<4>::from_re(seg.chord).derivative(2),
            DualSVec64::<4>::from_re(seg.twist).derivative(3),
        );
        let r = e.residual.eps.unwrap_generic(U4, U1);
        let q = e.dq.eps.unwrap_generic(U4, U1);
        // d(phi*)/dp = -R_p / R_phi
        let total = |j: usize| q[j] - q[0] * r[j] / r[0];
        out.torque += e.dq.re;
        if !floored {
            out.d_omega += total(1);
        }
        out.d_chord[i] = total(2);
        out.d_twist[i] = total(3);
    }
    Ok(out)
}
