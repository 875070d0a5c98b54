//! Torque evaluators used by the time-domain simulator.
//!
//! The section model is Reynolds invariant, so at fixed tip speed ratio the
//! torque scales with `v^2`: `Q(v, w) = v^2 q(wR/v)` where `q(l) = Q(1, l/R)`.
//! [`TorqueTable`] caches `q` and `dq/dl` on a uniform tip-speed-ratio grid the
//! first time a cell is visited and interpolates with cubic Hermite
//! polynomials, which keeps closed-loop simulations cheap enough to sit inside
//! an optimizer.

use std::sync::OnceLock;

use super::{
    rotor_torque, rotor_torque_with_gradient, AirfoilPolar, BladeGeometry, FluidEnvironment,
    RotorError, OMEGA_FLOOR,
};

/// Source of the fluid torque `Q(v, w)` for the rotor dynamics.
pub trait TorqueModel: Sync {
    fn torque(&self, v: f64, omega: f64) -> Result<f64, RotorError>;
    fn tip_radius(&self) -> f64;
}

/// Direct element-momentum evaluation at every call.
#[derive(Debug, Clone, Copy)]
pub struct ExactTorque<'a> {
    pub geometry: &'a BladeGeometry,
    pub polar: &'a AirfoilPolar,
    pub fluid: FluidEnvironment,
}

impl TorqueModel for ExactTorque<'_> {
    fn torque(&self, v: f64, omega: f64) -> Result<f64, RotorError> {
        rotor_torque(self.geometry, v, omega.max(0.0), self.polar, &self.fluid)
    }

    fn tip_radius(&self) -> f64 {
        self.geometry.tip_radius
    }
}

/// Grid spacing in tip speed ratio.
pub const TABLE_STEP: f64 = 0.01;
/// Largest tabulated tip speed ratio; beyond it the exact model is used.
pub const TABLE_MAX_TSR: f64 = 30.0;

/// Lazily filled cubic-Hermite table of `q(l)`.
#[derive(Debug)]
pub struct TorqueTable {
    geometry: BladeGeometry,
    polar: AirfoilPolar,
    fluid: FluidEnvironment,
    nodes: Vec<OnceLock<Result<(f64, f64), RotorError>>>,
}

impl TorqueTable {
    pub fn new(geometry: BladeGeometry, polar: AirfoilPolar, fluid: FluidEnvironment) -> Self {
        let n = (TABLE_MAX_TSR / TABLE_STEP).round() as usize + 1;
        Self { geometry, polar, fluid, nodes: (0..n).map(|_| OnceLock::new()).collect() }
    }

    pub fn geometry(&self) -> &BladeGeometry {
        &self.geometry
    }

    pub fn polar(&self) -> &AirfoilPolar {
        &self.polar
    }

    pub fn fluid(&self) -> &FluidEnvironment {
        &self.fluid
    }

    /// `(q, dq/dl)` at grid node `i`.
    fn node(&self, i: usize) -> Result<(f64, f64), RotorError> {
        self.nodes[i]
            .get_or_init(|| {
                let r = self.geometry.tip_radius;
                let omega = (i as f64 * TABLE_STEP / r).max(OMEGA_FLOOR);
                let s = rotor_torque_with_gradient(&self.geometry, 1.0, omega, &self.polar, &self.fluid)?;
                Ok((s.torque, s.d_omega / r))
            })
            .clone()
    }

    /// Normalized torque `q(l) = Q(1, l/R)` and its slope.
    pub fn normalized(&self, tsr: f64) -> Result<(f64, f64), RotorError> {
        let x = tsr / TABLE_STEP;
        let i = (x.floor() as usize).min(self.nodes.len() - 2);
        let s = x - i as f64;
        let (y0, d0) = self.node(i)?;
        let (y1, d1) = self.node(i + 1)?;
        let (m0, m1) = (d0 * TABLE_STEP, d1 * TABLE_STEP);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let q = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
        let dq = ((6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * m1)
            / TABLE_STEP;
        Ok((q, dq))
    }
}

impl TorqueModel for TorqueTable {
    fn torque(&self, v: f64, omega: f64) -> Result<f64, RotorError> {
        if !(v > 0.0) {
            return Err(RotorError::InvalidOperatingPoint(format!("inflow speed {v} must be > 0")));
        }
        let tsr = omega.max(0.0) * self.geometry.tip_radius / v;
        if tsr >= TABLE_MAX_TSR {
            return rotor_torque(&self.geometry, v, omega.max(0.0), &self.polar, &self.fluid);
        }
        Ok(v * v * self.normalized(tsr)?.0)
    }

    fn tip_radius(&self) -> f64 {
        self.geometry.tip_radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_agrees_with_exact_model() {
        let g = BladeGeometry::baseline();
        let p = AirfoilPolar::default_section();
        let f = FluidEnvironment::default();
        let table = TorqueTable::new(g.clone(), p.clone(), f);
        let exact = ExactTorque { geometry: &g, polar: &p, fluid: f };
        for &(v, omega) in &[(1.3, 5.1), (1.5, 7.77), (1.7, 9.03), (1.2, 2.5), (1.45, 11.3)] {
            let a = table.torque(v, omega).unwrap();
            let b = exact.torque(v, omega).unwrap();
            assert!((a - b).abs() <= 1e-5 * b.abs().max(1.0), "v={v} w={omega}: {a} vs {b}");
        }
    }

    #[test]
    fn table_reproduces_nodes_exactly() {
        let g = BladeGeometry::baseline();
        let p = AirfoilPolar::default_section();
        let f = FluidEnvironment::default();
        let table = TorqueTable::new(g.clone(), p.clone(), f);
        let tsr = 600.0 * TABLE_STEP;
        let q = table.torque(1.0, tsr / g.tip_radius).unwrap();
        let e = rotor_torque(&g, 1.0, tsr / g.tip_radius, &p, &f).unwrap();
        assert!((q - e).abs() < 1e-12 * e.abs());
    }
}
