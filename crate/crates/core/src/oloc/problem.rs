use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::grid::{hermite_midpoint, hermite_state, simpson_defect};
use super::{CollocationGrid, OlocError};
use crate::dynamics::{FlowProfile, Interpolation, OpenLoopSchedule, Trajectory};
use crate::nlp::{Derivatives, GradientMode, NlpError, NlpProblem, Values};
use crate::rotor::{
    available_power, rotor_inertia, rotor_inertia_chord_gradient, rotor_torque,
    rotor_torque_with_gradient, AirfoilPolar, BladeGeometry, BladeMaterial, FluidEnvironment,
    GeometryBounds, TorqueSensitivity,
};

/// Speed scale, rad/s. Defects are divided by the same value.
pub const OMEGA_SCALE: f64 = 10.0;
/// Control scale when no torque limit is given, N m.
pub const DEFAULT_U_SCALE: f64 = 700.0;
pub const CHORD_SCALE: f64 = 1.0;
/// Twist scale: 30 degrees, in radians.
pub const TWIST_SCALE: f64 = 30.0 * std::f64::consts::PI / 180.0;

/// Per-segment box for the blade design block. Twists in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryBox {
    pub chord_lo: Vec<f64>,
    pub chord_hi: Vec<f64>,
    pub twist_lo: Vec<f64>,
    pub twist_hi: Vec<f64>,
}

impl GeometryBox {
    pub fn uniform(bounds: &GeometryBounds, n: usize) -> Self {
        Self {
            chord_lo: vec![bounds.chord_min; n],
            chord_hi: vec![bounds.chord_max; n],
            twist_lo: vec![bounds.twist_min; n],
            twist_hi: vec![bounds.twist_max; n],
        }
    }

    /// Box pinned to `geometry`.
    pub fn collapsed(geometry: &BladeGeometry) -> Self {
        let (c, t) = (geometry.chords(), geometry.twists());
        Self { chord_lo: c.clone(), chord_hi: c, twist_lo: t.clone(), twist_hi: t }
    }

    pub fn is_collapsed(&self) -> bool {
        self.chord_lo == self.chord_hi && self.twist_lo == self.twist_hi
    }

    pub fn len(&self) -> usize {
        self.chord_lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chord_lo.is_empty()
    }

    pub fn contains(&self, geometry: &BladeGeometry) -> bool {
        geometry.num_segments() == self.len()
            && geometry.segments.iter().enumerate().all(|(i, s)| {
                s.chord >= self.chord_lo[i]
                    && s.chord <= self.chord_hi[i]
                    && s.twist >= self.twist_lo[i]
                    && s.twist <= self.twist_hi[i]
            })
    }
}

/// Inputs of an open-loop optimal control transcription.
#[derive(Debug, Clone, PartialEq)]
pub struct OlocSetup {
    /// Fixed geometry, or the starting design when `geometry_box` is set.
    pub geometry: BladeGeometry,
    pub geometry_box: Option<GeometryBox>,
    pub polar: AirfoilPolar,
    pub fluid: FluidEnvironment,
    pub material: BladeMaterial,
    pub profile: FlowProfile,
    pub grid: CollocationGrid,
    /// generator torque limit, N m; `None` leaves `u` unbounded above
    pub u_max: Option<f64>,
    /// pins the initial speed; free when `None`
    pub initial_omega: Option<f64>,
}

/// Positions of the variable blocks in the decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    /// speeds at the `n + 1` segment boundaries
    pub n_omega: usize,
    /// controls at all `2n + 1` nodes
    pub n_u: usize,
    /// chords then twists, `2 N_blade` entries, or 0 for fixed geometry
    pub n_geometry: usize,
}

impl Layout {
    pub fn u_offset(&self) -> usize {
        self.n_omega
    }

    pub fn geometry_offset(&self) -> usize {
        self.n_omega + self.n_u
    }

    pub fn dimension(&self) -> usize {
        self.n_omega + self.n_u + self.n_geometry
    }
}

/// Physical values of a decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub omega: Vec<f64>,
    pub u: Vec<f64>,
    pub geometry: BladeGeometry,
    pub inertia: f64,
}

/// Physical-unit evaluation of the transcription.
#[derive(Debug, Clone, PartialEq)]
struct Evaluation {
    energy: f64,
    defects: Vec<f64>,
    d_energy: Vec<f64>,
    /// `n_segments x dimension`, row-major
    d_defects: Vec<f64>,
}

/// Open-loop problem: maximize `J = int Q w dt` subject to Simpson defects of
/// `I dw/dt = Q - u`, with compressed Hermite-Simpson states (midpoint speeds
/// follow from the end values) and separate midpoint controls.
#[derive(Debug)]
pub struct TranscribedProblem {
    setup: OlocSetup,
    layout: Layout,
    u_scale: f64,
    energy_scale: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cache: Mutex<Option<(Vec<f64>, Values, Derivatives)>>,
}

pub fn transcribe(setup: OlocSetup) -> Result<TranscribedProblem, OlocError> {
    setup.geometry.validate()?;
    setup.material.validate()?;
    if let Some(u) = setup.u_max {
        if !(u > 0.0) {
            return Err(OlocError::Config(format!("u_max {u} must be > 0")));
        }
    }
    let v_min = setup.profile.min_velocity(setup.grid.horizon);
    if !(v_min > 0.0) {
        return Err(OlocError::Config(format!(
            "inflow must stay positive over [0, {}] s (min {v_min})",
            setup.grid.horizon
        )));
    }
    if let Some(w) = setup.initial_omega {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(OlocError::Config(format!("initial speed {w} must be >= 0")));
        }
    }
    let n_blade = setup.geometry.num_segments();
    if let Some(b) = &setup.geometry_box {
        if b.len() != n_blade || b.chord_hi.len() != n_blade || b.twist_lo.len() != n_blade || b.twist_hi.len() != n_blade {
            return Err(OlocError::Config("geometry box does not match the blade".into()));
        }
        if !b.contains(&setup.geometry) {
            return Err(OlocError::Config("starting geometry lies outside its box".into()));
        }
    }
    let layout = Layout {
        n_omega: setup.grid.n_segments + 1,
        n_u: setup.grid.num_nodes(),
        n_geometry: setup.geometry_box.as_ref().map_or(0, |_| 2 * n_blade),
    };
    let u_scale = setup.u_max.unwrap_or(DEFAULT_U_SCALE);
    let energy_scale = 0.25
        * available_power(&setup.geometry, &setup.fluid, setup.profile.velocity(0.0))
        * setup.grid.horizon;

    let mut lower = Vec::with_capacity(layout.dimension());
    let mut upper = Vec::with_capacity(layout.dimension());
    for k in 0..layout.n_omega {
        match setup.initial_omega.filter(|_| k == 0) {
            Some(w) => {
                lower.push(w / OMEGA_SCALE);
                upper.push(w / OMEGA_SCALE);
            }
            None => {
                lower.push(0.0);
                upper.push(f64::INFINITY);
            }
        }
    }
    for _ in 0..layout.n_u {
        lower.push(0.0);
        upper.push(setup.u_max.map_or(f64::INFINITY, |u| u / u_scale));
    }
    if let Some(b) = &setup.geometry_box {
        lower.extend(b.chord_lo.iter().map(|c| c / CHORD_SCALE));
        upper.extend(b.chord_hi.iter().map(|c| c / CHORD_SCALE));
        lower.extend(b.twist_lo.iter().map(|t| t / TWIST_SCALE));
        upper.extend(b.twist_hi.iter().map(|t| t / TWIST_SCALE));
    }
    Ok(TranscribedProblem {
        setup,
        layout,
        u_scale,
        energy_scale,
        lower,
        upper,
        cache: Mutex::new(None),
    })
}

/// Value with partials over the local variables of one segment:
/// `[w_k, w_k+1, u_k, u_mid, u_k+1, chords.., twists..]`.
#[derive(Debug, Clone)]
struct Lin {
    v: f64,
    d: Vec<f64>,
}

impl Lin {
    fn var(v: f64, index: usize, len: usize) -> Self {
        let mut d = vec![0.0; len];
        d[index] = 1.0;
        Self { v, d }
    }

    fn constant(v: f64, len: usize) -> Self {
        Self { v, d: vec![0.0; len] }
    }

    /// `sum c_i x_i`
    fn comb(terms: &[(f64, &Lin)]) -> Self {
        let len = terms[0].1.d.len();
        let mut out = Self::constant(0.0, len);
        for (c, x) in terms {
            out.v += c * x.v;
            for (o, dx) in out.d.iter_mut().zip(&x.d) {
                *o += c * dx;
            }
        }
        out
    }

    fn mul(&self, other: &Lin) -> Self {
        Self {
            v: self.v * other.v,
            d: self.d.iter().zip(&other.d).map(|(a, b)| a * other.v + self.v * b).collect(),
        }
    }

    fn div(&self, other: &Lin) -> Self {
        let q = self.v / other.v;
        Self { v: q, d: self.d.iter().zip(&other.d).map(|(a, b)| (a - q * b) / other.v).collect() }
    }
}

const LOCAL_BASE: usize = 5;

impl TranscribedProblem {
    pub fn setup(&self) -> &OlocSetup {
        &self.setup
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn grid(&self) -> &CollocationGrid {
        &self.setup.grid
    }

    pub fn geometry_free(&self) -> bool {
        self.layout.n_geometry > 0
    }

    /// Control upper bound, N m (`+inf` when unbounded).
    pub fn u_upper(&self) -> f64 {
        self.setup.u_max.unwrap_or(f64::INFINITY)
    }

    /// Reference energy dividing the objective, J.
    pub fn energy_scale(&self) -> f64 {
        self.energy_scale
    }

    /// Physical-unit multiplier of each scaled variable.
    fn scales(&self) -> Vec<f64> {
        let l = self.layout;
        let mut s = vec![OMEGA_SCALE; l.n_omega];
        s.extend(std::iter::repeat_n(self.u_scale, l.n_u));
        s.extend(std::iter::repeat_n(CHORD_SCALE, l.n_geometry / 2));
        s.extend(std::iter::repeat_n(TWIST_SCALE, l.n_geometry / 2));
        s
    }

    fn check_len(&self, x: &[f64]) -> Result<(), OlocError> {
        if x.len() != self.layout.dimension() {
            return Err(OlocError::Dimension { expected: self.layout.dimension(), got: x.len() });
        }
        Ok(())
    }

    pub fn decode(&self, x: &[f64]) -> Result<Decoded, OlocError> {
        self.check_len(x)?;
        let l = self.layout;
        let omega = x[..l.n_omega].iter().map(|w| w * OMEGA_SCALE).collect();
        let u = x[l.u_offset()..l.u_offset() + l.n_u].iter().map(|u| u * self.u_scale).collect();
        let geometry = if self.geometry_free() {
            let g = &x[l.geometry_offset()..];
            let nb = l.n_geometry / 2;
            let chords: Vec<f64> = g[..nb].iter().map(|c| c * CHORD_SCALE).collect();
            let twists: Vec<f64> = g[nb..].iter().map(|t| t * TWIST_SCALE).collect();
            self.setup.geometry.with_design(&chords, &twists)
        } else {
            self.setup.geometry.clone()
        };
        let inertia = rotor_inertia(&geometry, &self.setup.material);
        Ok(Decoded { omega, u, geometry, inertia })
    }

    /// Scaled decision vector from physical boundary speeds, node controls and
    /// (when the design is free) geometry.
    pub fn encode(&self, omega: &[f64], u: &[f64], geometry: &BladeGeometry) -> Result<Vec<f64>, OlocError> {
        let l = self.layout;
        if omega.len() != l.n_omega || u.len() != l.n_u {
            return Err(OlocError::Dimension { expected: l.n_omega + l.n_u, got: omega.len() + u.len() });
        }
        let mut x: Vec<f64> = omega.iter().map(|w| w / OMEGA_SCALE).collect();
        x.extend(u.iter().map(|v| v / self.u_scale));
        if self.geometry_free() {
            x.extend(geometry.chords().iter().map(|c| c / CHORD_SCALE));
            x.extend(geometry.twists().iter().map(|t| t / TWIST_SCALE));
        }
        for i in 0..x.len() {
            x[i] = x[i].clamp(self.lower[i], self.upper[i]);
        }
        Ok(x)
    }

    /// Warm start sampled (linearly) from a simulated trajectory.
    pub fn encode_trajectory(&self, trajectory: &Trajectory, geometry: &BladeGeometry) -> Result<Vec<f64>, OlocError> {
        let grid = &self.setup.grid;
        let omega: Vec<f64> = (0..self.layout.n_omega)
            .map(|k| sample(&trajectory.t, &trajectory.omega, grid.boundary_time(k)))
            .collect();
        let u: Vec<f64> = (0..self.layout.n_u)
            .map(|j| sample(&trajectory.t, &trajectory.u, grid.node_time(j)))
            .collect();
        self.encode(&omega, &u, geometry)
    }

    fn node_velocity(&self, j: usize) -> f64 {
        self.setup.profile.velocity(self.setup.grid.node_time(j))
    }

    fn sensitivity(&self, geometry: &BladeGeometry, v: f64, omega: f64) -> Result<TorqueSensitivity, OlocError> {
        Ok(rotor_torque_with_gradient(geometry, v, omega, &self.setup.polar, &self.setup.fluid)?)
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation, OlocError> {
        let dec = self.decode(x)?;
        let l = self.layout;
        let n = self.setup.grid.n_segments;
        let h = self.setup.grid.segment_length();
        let nb = l.n_geometry / 2;
        let len = LOCAL_BASE + l.n_geometry;
        let dim = l.dimension();

        let inertia = if self.geometry_free() {
            let grad = rotor_inertia_chord_gradient(&dec.geometry, &self.setup.material);
            let mut d = vec![0.0; len];
            d[LOCAL_BASE..LOCAL_BASE + nb].copy_from_slice(&grad);
            Lin { v: dec.inertia, d }
        } else {
            Lin::constant(dec.inertia, len)
        };
        let torque = |s: &TorqueSensitivity, w: &Lin| {
            let mut q = Lin { v: s.torque, d: w.d.iter().map(|dw| s.d_omega * dw).collect() };
            if nb > 0 {
                for i in 0..nb {
                    q.d[LOCAL_BASE + i] += s.d_chord[i];
                    q.d[LOCAL_BASE + nb + i] += s.d_twist[i];
                }
            }
            q
        };

        let boundary: Vec<TorqueSensitivity> = (0..=n)
            .map(|k| self.sensitivity(&dec.geometry, self.node_velocity(2 * k), dec.omega[k]))
            .collect::<Result<_, _>>()?;

        let mut energy = 0.0;
        let mut defects = vec![0.0; n];
        let mut d_energy = vec![0.0; dim];
        let mut d_defects = vec![0.0; n * dim];
        for k in 0..n {
            let wa = Lin::var(dec.omega[k], 0, len);
            let wb = Lin::var(dec.omega[k + 1], 1, len);
            let ua = Lin::var(dec.u[2 * k], 2, len);
            let um = Lin::var(dec.u[2 * k + 1], 3, len);
            let ub = Lin::var(dec.u[2 * k + 2], 4, len);
            let qa = torque(&boundary[k], &wa);
            let qb = torque(&boundary[k + 1], &wb);
            let fa = Lin::comb(&[(1.0, &qa), (-1.0, &ua)]).div(&inertia);
            let fb = Lin::comb(&[(1.0, &qb), (-1.0, &ub)]).div(&inertia);
            let wm = Lin::comb(&[(0.5, &wa), (0.5, &wb), (h / 8.0, &fa), (-h / 8.0, &fb)]);
            debug_assert!((wm.v - hermite_midpoint(h, wa.v, wb.v, fa.v, fb.v)).abs() < 1e-12 * (1.0 + wm.v.abs()));
            let sm = self.sensitivity(&dec.geometry, self.node_velocity(2 * k + 1), wm.v)?;
            let qm = torque(&sm, &wm);
            let fm = Lin::comb(&[(1.0, &qm), (-1.0, &um)]).div(&inertia);
            let c = h / 6.0;
            let defect = Lin::comb(&[(1.0, &wb), (-1.0, &wa), (-c, &fa), (-4.0 * c, &fm), (-c, &fb)]);
            let pa = qa.mul(&wa);
            let pm = qm.mul(&wm);
            let pb = qb.mul(&wb);
            let e = Lin::comb(&[(c, &pa), (4.0 * c, &pm), (c, &pb)]);

            energy += e.v;
            defects[k] = defect.v;
            let globals = self.local_to_global(k);
            let row = &mut d_defects[k * dim..(k + 1) * dim];
            for (li, &gi) in globals.iter().enumerate() {
                row[gi] += defect.d[li];
                d_energy[gi] += e.d[li];
            }
        }
        Ok(Evaluation { energy, defects, d_energy, d_defects })
    }

    fn local_to_global(&self, k: usize) -> Vec<usize> {
        let l = self.layout;
        let u0 = l.u_offset();
        let mut idx = vec![k, k + 1, u0 + 2 * k, u0 + 2 * k + 1, u0 + 2 * k + 2];
        idx.extend(l.geometry_offset()..l.geometry_offset() + l.n_geometry);
        idx
    }

    /// Physical defects `w_k+1 - w_k - h/6 (f_k + 4 f_mid + f_k+1)`, rad/s.
    pub fn defect_residuals(&self, x: &[f64]) -> Result<Vec<f64>, OlocError> {
        let dec = self.decode(x)?;
        let h = self.setup.grid.segment_length();
        let n = self.setup.grid.n_segments;
        let f = |j: usize, w: f64| -> Result<f64, OlocError> {
            let q = rotor_torque(&dec.geometry, self.node_velocity(j), w, &self.setup.polar, &self.setup.fluid)?;
            Ok((q - dec.u[j]) / dec.inertia)
        };
        let fb: Vec<f64> = (0..=n).map(|k| f(2 * k, dec.omega[k])).collect::<Result<_, _>>()?;
        (0..n)
            .map(|k| {
                let wm = hermite_midpoint(h, dec.omega[k], dec.omega[k + 1], fb[k], fb[k + 1]);
                Ok(simpson_defect(h, dec.omega[k], dec.omega[k + 1], fb[k], f(2 * k + 1, wm)?, fb[k + 1]))
            })
            .collect()
    }

    /// Simpson quadrature of `Q w`, J.
    pub fn energy(&self, x: &[f64]) -> Result<f64, OlocError> {
        Ok(self.evaluate(x)?.energy)
    }

    /// Control samples at the nodes, interpolated per segment.
    pub fn schedule(&self, x: &[f64]) -> Result<OpenLoopSchedule, OlocError> {
        let dec = self.decode(x)?;
        Ok(OpenLoopSchedule {
            t: self.setup.grid.node_times(),
            u: dec.u,
            interpolation: Interpolation::Collocation,
            bounds: Some((0.0, self.u_upper())),
        })
    }

    /// Samples the piecewise-cubic state and the control at step `dt`, with
    /// the torque re-evaluated along the interpolated speed.
    pub fn extract_trajectory(&self, x: &[f64], dt: f64) -> Result<Trajectory, OlocError> {
        let dec = self.decode(x)?;
        let grid = self.setup.grid;
        let steps = (grid.horizon / dt).round();
        if !(dt > 0.0) || (steps * dt - grid.horizon).abs() > 1e-9 * grid.horizon {
            return Err(OlocError::Config(format!(
                "sample step {dt} must divide the horizon {}",
                grid.horizon
            )));
        }
        let schedule = self.schedule(x)?;
        let h = grid.segment_length();
        let (polar, fluid) = (&self.setup.polar, &self.setup.fluid);
        let fb: Vec<f64> = (0..=grid.n_segments)
            .map(|k| {
                let q = rotor_torque(&dec.geometry, self.node_velocity(2 * k), dec.omega[k], polar, fluid)?;
                Ok((q - dec.u[2 * k]) / dec.inertia)
            })
            .collect::<Result<_, OlocError>>()?;
        let n = steps as usize;
        let (mut t, mut w, mut u, mut q) = (
            Vec::with_capacity(n + 1),
            Vec::with_capacity(n + 1),
            Vec::with_capacity(n + 1),
            Vec::with_capacity(n + 1),
        );
        for i in 0..=n {
            let ti = if i == n { grid.horizon } else { i as f64 * dt };
            let k = grid.segment_of(ti);
            let s = ((ti - grid.boundary_time(k)) / h).clamp(0.0, 1.0);
            let wi = if s == 0.0 {
                dec.omega[k]
            } else if s == 1.0 {
                dec.omega[k + 1]
            } else {
                hermite_state(h, dec.omega[k], dec.omega[k + 1], fb[k], fb[k + 1], s).max(0.0)
            };
            let qi = rotor_torque(&dec.geometry, self.setup.profile.velocity(ti), wi, polar, fluid)?;
            t.push(ti);
            w.push(wi);
            u.push(schedule.evaluate(ti));
            q.push(qi);
        }
        Ok(Trajectory::new(t, w, u, q)?)
    }

    fn cached(&self, x: &[f64]) -> Result<(Values, Derivatives), NlpError> {
        if let Some((cx, v, d)) = self.cache.lock().expect("cache lock").as_ref() {
            if cx.as_slice() == x {
                return Ok((v.clone(), d.clone()));
            }
        }
        let e = self.evaluate(x).map_err(|err| NlpError::Evaluation { message: err.to_string(), x: x.to_vec() })?;
        let scales = self.scales();
        let dim = self.layout.dimension();
        let values = Values {
            objective: -e.energy / self.energy_scale,
            constraints: e.defects.iter().map(|d| d / OMEGA_SCALE).collect(),
        };
        let gradient = e.d_energy.iter().zip(&scales).map(|(g, s)| -g * s / self.energy_scale).collect();
        let mut jacobian = e.d_defects;
        for row in jacobian.chunks_mut(dim) {
            for (j, s) in row.iter_mut().zip(&scales) {
                *j *= s / OMEGA_SCALE;
            }
        }
        let derivs = Derivatives { gradient, jacobian };
        *self.cache.lock().expect("cache lock") = Some((x.to_vec(), values.clone(), derivs.clone()));
        Ok((values, derivs))
    }
}

fn sample(t: &[f64], y: &[f64], at: f64) -> f64 {
    let j = t.partition_point(|&x| x <= at).clamp(1, t.len() - 1);
    let i = j - 1;
    let w = ((at - t[i]) / (t[j] - t[i])).clamp(0.0, 1.0);
    y[i] + w * (y[j] - y[i])
}

impl NlpProblem for TranscribedProblem {
    fn dimension(&self) -> usize {
        self.layout.dimension()
    }

    fn num_equalities(&self) -> usize {
        self.setup.grid.n_segments
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lower.clone(), self.upper.clone())
    }

    fn values(&self, x: &[f64]) -> Result<Values, NlpError> {
        Ok(self.cached(x)?.0)
    }

    fn gradient_mode(&self) -> GradientMode {
        GradientMode::Analytic
    }

    fn derivatives(&self, x: &[f64]) -> Result<Derivatives, NlpError> {
        Ok(self.cached(x)?.1)
    }
}
