use serde::{Deserialize, Serialize};

use super::{rotor_torque, AirfoilPolar, BladeGeometry, FluidEnvironment, RotorError};
use crate::roots::golden_max;

/// Betz limit, 16/27 rounded to three digits.
pub const BETZ_LIMIT: f64 = 0.593;

/// Solid-section blade material used for the rotor inertia.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BladeMaterial {
    /// kg/m^3 (aluminum 6061 by default)
    pub density: f64,
    /// maximum thickness over chord
    pub thickness_ratio: f64,
    /// section area over (chord x thickness)
    pub area_factor: f64,
}

impl Default for BladeMaterial {
    fn default() -> Self {
        Self { density: 2700.0, thickness_ratio: 0.15, area_factor: 0.6 }
    }
}

impl BladeMaterial {
    pub fn validate(&self) -> Result<(), RotorError> {
        if !(self.density > 0.0)
            || !(self.thickness_ratio > 0.0 && self.thickness_ratio < 1.0)
            || !(self.area_factor > 0.0 && self.area_factor < 1.0)
        {
            return Err(RotorError::InvalidGeometry(format!("invalid blade material {self:?}")));
        }
        Ok(())
    }

    fn section_factor(&self) -> f64 {
        self.density * self.area_factor * self.thickness_ratio
    }
}

/// Rotational inertia of the blades about the shaft, hub excluded:
/// `I = B * sum(rho_m * k_A * (t/c) * c_i^2 * dr_i * r_i^2)`.
pub fn rotor_inertia(geometry: &BladeGeometry, material: &BladeMaterial) -> f64 {
    let k = material.section_factor() * geometry.num_blades as f64;
    geometry
        .segments
        .iter()
        .map(|s| k * s.chord * s.chord * s.dr * s.r_mid * s.r_mid)
        .sum()
}

/// `dI/dc_i` for each segment.
pub fn rotor_inertia_chord_gradient(geometry: &BladeGeometry, material: &BladeMaterial) -> Vec<f64> {
    let k = material.section_factor() * geometry.num_blades as f64;
    geometry.segments.iter().map(|s| 2.0 * k * s.chord * s.dr * s.r_mid * s.r_mid).collect()
}

pub fn tip_speed_ratio(omega: f64, tip_radius: f64, v: f64) -> f64 {
    omega * tip_radius / v
}

/// `Cp = Q w / (1/2 rho pi R^2 v^3)`, evaluated at unit inflow speed.
pub fn power_coefficient(
    geometry: &BladeGeometry,
    polar: &AirfoilPolar,
    fluid: &FluidEnvironment,
    tsr: f64,
) -> Result<f64, RotorError> {
    let v = 1.0;
    let omega = tsr * v / geometry.tip_radius;
    let q = rotor_torque(geometry, v, omega, polar, fluid)?;
    Ok(q * omega / available_power(geometry, fluid, v))
}

/// `1/2 rho pi R^2 v^3`, W.
pub fn available_power(geometry: &BladeGeometry, fluid: &FluidEnvironment, v: f64) -> f64 {
    0.5 * fluid.density * std::f64::consts::PI * geometry.tip_radius.powi(2) * v.powi(3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpPoint {
    pub tsr: f64,
    /// `None` where the section solver failed
    pub cp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpCurve {
    pub points: Vec<CpPoint>,
    /// argmax of Cp, refined between the neighbouring grid points
    pub optimal_tsr: f64,
    pub max_cp: f64,
}

impl CpCurve {
    /// Torque gain that places the `u = K w^2` equilibrium at the optimal
    /// tip speed ratio: `K* = 1/2 rho pi R^5 Cp(l*) / l*^3`.
    pub fn optimal_quadratic_gain(&self, geometry: &BladeGeometry, fluid: &FluidEnvironment) -> f64 {
        0.5 * fluid.density
            * std::f64::consts::PI
            * geometry.tip_radius.powi(5)
            * self.max_cp
            / self.optimal_tsr.powi(3)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("tsr,cp\n");
        for p in &self.points {
            match p.cp {
                Some(cp) => out.push_str(&format!("{:.16e},{:.16e}\n", p.tsr, cp)),
                None => out.push_str(&format!("{:.16e},\n", p.tsr)),
            }
        }
        out
    }
}

/// Sweeps Cp over `tsr_grid` (positive, ascending). Failed points are kept as
/// gaps; an error is returned only if the grid is invalid or every point fails.
pub fn cp_curve(
    geometry: &BladeGeometry,
    polar: &AirfoilPolar,
    fluid: &FluidEnvironment,
    tsr_grid: &[f64],
) -> Result<CpCurve, RotorError> {
    if tsr_grid.is_empty()
        || tsr_grid[0] <= 0.0
        || tsr_grid.windows(2).any(|w| !(w[1] > w[0]))
    {
        return Err(RotorError::InvalidOperatingPoint(
            "tsr grid must be positive and strictly ascending".into(),
        ));
    }
    let points: Vec<CpPoint> = tsr_grid
        .iter()
        .map(|&tsr| CpPoint { tsr, cp: power_coefficient(geometry, polar, fluid, tsr).ok() })
        .collect();
    let (best, _) = points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.cp.map(|c| (i, c)))
        .fold((None, f64::NEG_INFINITY), |(bi, bc), (i, c)| {
            if c > bc {
                (Some(i), c)
            } else {
                (bi, bc)
            }
        });
    let best = best.ok_or_else(|| {
        RotorError::InvalidOperatingPoint("section solver failed at every tsr".into())
    })?;
    let lo = tsr_grid[best.saturating_sub(1)];
    let hi = tsr_grid[(best + 1).min(tsr_grid.len() - 1)];
    let (optimal_tsr, max_cp) = if hi > lo {
        golden_max(
            |x| power_coefficient(geometry, polar, fluid, x).unwrap_or(f64::NEG_INFINITY),
            lo,
            hi,
            1e-9,
        )
    } else {
        (tsr_grid[best], points[best].cp.unwrap())
    };
    Ok(CpCurve { points, optimal_tsr, max_cp })
}

/// Default sweep grid: 0.1 to 14 in steps of 0.1.
pub fn default_tsr_grid() -> Vec<f64> {
    (1..=140).map(|i| i as f64 * 0.1).collect()
}
