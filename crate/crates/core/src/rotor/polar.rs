//! Airfoil lift/drag polars tabulated over the full angle-of-attack circle.

use std::path::Path;

use num_dual::DualNum;
use serde::{Deserialize, Serialize};

use super::RotorError;

/// Zero-lift angle of the default cambered section, degrees.
pub const DEFAULT_ZERO_LIFT_DEG: f64 = -4.0;
/// Peak lift coefficient of the default section.
pub const DEFAULT_CL_MAX: f64 = 1.6;
/// Angle at which the default section reaches `DEFAULT_CL_MAX`, degrees.
pub const DEFAULT_STALL_DEG: f64 = 14.0;
/// Grid spacing of the generated default polar, degrees.
const DEFAULT_GRID_STEP_DEG: f64 = 0.25;
/// Aspect ratio used for the Viterna maximum drag estimate.
const VITERNA_ASPECT_RATIO: f64 = 10.0;
/// Drag coefficient at +/-180 degrees (trailing edge into the flow).
const CD_REVERSED: f64 = 0.1;

/// Tabulated lift and drag coefficients.
///
/// `alpha_deg` is ascending and spans [-180, 180]; lookups are piecewise
/// linear in angle of attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AirfoilPolar {
    alpha_deg: Vec<f64>,
    cl: Vec<f64>,
    cd: Vec<f64>,
}

impl AirfoilPolar {
    pub fn new(alpha_deg: Vec<f64>, cl: Vec<f64>, cd: Vec<f64>) -> Result<Self, RotorError> {
        if alpha_deg.len() < 2 || alpha_deg.len() != cl.len() || alpha_deg.len() != cd.len() {
            return Err(RotorError::InvalidPolar(format!(
                "grid lengths must match and be >= 2 (alpha {}, cl {}, cd {})",
                alpha_deg.len(),
                cl.len(),
                cd.len()
            )));
        }
        if alpha_deg.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(RotorError::InvalidPolar("alpha grid must be strictly ascending".into()));
        }
        if alpha_deg[0] > -180.0 || alpha_deg[alpha_deg.len() - 1] < 180.0 {
            return Err(RotorError::InvalidPolar(format!(
                "alpha grid must cover [-180, 180], got [{}, {}]",
                alpha_deg[0],
                alpha_deg[alpha_deg.len() - 1]
            )));
        }
        if let Some(bad) = cd.iter().find(|c| !(**c >= 0.0)) {
            return Err(RotorError::InvalidPolar(format!("negative or non-finite cd {bad}")));
        }
        if cl.iter().chain(alpha_deg.iter()).any(|v| !v.is_finite()) {
            return Err(RotorError::InvalidPolar("non-finite entry".into()));
        }
        Ok(Self { alpha_deg, cl, cd })
    }

    pub fn alpha_deg(&self) -> &[f64] {
        &self.alpha_deg
    }

    pub fn cl(&self) -> &[f64] {
        &self.cl
    }

    pub fn cd(&self) -> &[f64] {
        &self.cd
    }

    /// Piecewise-linear `(cl, cd)` at `alpha_deg`.
    pub fn interpolate(&self, alpha_deg: f64) -> Result<(f64, f64), RotorError> {
        if !(-180.0..=180.0).contains(&alpha_deg) {
            return Err(RotorError::AlphaOutOfRange(alpha_deg));
        }
        Ok(self.lookup(alpha_deg))
    }

    /// Unchecked lookup; angles are wrapped into [-180, 180].
    pub(crate) fn lookup(&self, alpha_deg: f64) -> (f64, f64) {
        let (i, w) = self.cell(alpha_deg);
        (
            self.cl[i] + w * (self.cl[i + 1] - self.cl[i]),
            self.cd[i] + w * (self.cd[i + 1] - self.cd[i]),
        )
    }

    /// Lookup carrying derivatives through the angle of attack.
    pub(crate) fn lookup_dual<D: DualNum<Primitive = f64> + Copy>(&self, alpha_deg: D) -> (D, D) {
        let (i, _) = self.cell(alpha_deg.re());
        let span = self.alpha_deg[i + 1] - self.alpha_deg[i];
        let shift = wrap_deg(alpha_deg.re()) - alpha_deg.re();
        let w = (alpha_deg + (shift - self.alpha_deg[i])) / span;
        (
            w * (self.cl[i + 1] - self.cl[i]) + self.cl[i],
            w * (self.cd[i + 1] - self.cd[i]) + self.cd[i],
        )
    }

    fn cell(&self, alpha_deg: f64) -> (usize, f64) {
        let a = wrap_deg(alpha_deg);
        let n = self.alpha_deg.len();
        let j = self.alpha_deg.partition_point(|&x| x <= a);
        let i = j.clamp(1, n - 1) - 1;
        let w = (a - self.alpha_deg[i]) / (self.alpha_deg[i + 1] - self.alpha_deg[i]);
        (i, w)
    }

    /// Section mirrored about the chord line: `cl'(a) = -cl(-a)`, `cd'(a) = cd(-a)`.
    pub fn mirrored(&self) -> Self {
        let n = self.alpha_deg.len();
        let mut alpha = Vec::with_capacity(n);
        let mut cl = Vec::with_capacity(n);
        let mut cd = Vec::with_capacity(n);
        for i in (0..n).rev() {
            alpha.push(-self.alpha_deg[i]);
            cl.push(-self.cl[i]);
            cd.push(self.cd[i]);
        }
        Self { alpha_deg: alpha, cl, cd }
    }

    /// Generic cambered section: thin-airfoil lift slope from a -4 degree
    /// zero-lift angle, rounded into a 1.6 peak at 14 degrees, quadratic
    /// drag polar while attached and Viterna flat-plate behavior past stall.
    pub fn default_section() -> Self {
        let n = (360.0 / DEFAULT_GRID_STEP_DEG).round() as usize;
        let mut alpha = Vec::with_capacity(n + 1);
        let mut cl = Vec::with_capacity(n + 1);
        let mut cd = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let a = -180.0 + k as f64 * DEFAULT_GRID_STEP_DEG;
            let (l, d) = default_coefficients(a);
            alpha.push(a);
            cl.push(l);
            cd.push(d);
        }
        Self { alpha_deg: alpha, cl, cd }
    }

    /// Reads a CSV polar with header `alpha_deg,cl,cd`.
    pub fn from_csv_path(path: &Path) -> Result<Self, RotorError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RotorError::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self, RotorError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| RotorError::Parse(e.to_string()))?.clone();
        let expected = ["alpha_deg", "cl", "cd"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(RotorError::Parse(format!(
                "polar header must be `alpha_deg,cl,cd`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let (mut alpha, mut cl, mut cd) = (Vec::new(), Vec::new(), Vec::new());
        for (line, rec) in reader.deserialize::<(f64, f64, f64)>().enumerate() {
            let (a, l, d) = rec.map_err(|e| RotorError::Parse(format!("row {}: {e}", line + 1)))?;
            alpha.push(a);
            cl.push(l);
            cd.push(d);
        }
        Self::new(alpha, cl, cd)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("alpha_deg,cl,cd\n");
        for i in 0..self.alpha_deg.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e}\n",
                self.alpha_deg[i], self.cl[i], self.cd[i]
            ));
        }
        out
    }
}

fn wrap_deg(a: f64) -> f64 {
    if (-180.0..=180.0).contains(&a) {
        a
    } else {
        (a + 180.0).rem_euclid(360.0) - 180.0
    }
}

fn lift_slope_per_deg() -> f64 {
    2.0 * std::f64::consts::PI * std::f64::consts::PI / 180.0
}

/// Angle where the linear lift line hands over to the quadratic rounding that
/// meets `DEFAULT_CL_MAX` with zero slope at `DEFAULT_STALL_DEG`.
fn rounding_start_deg() -> f64 {
    let s = lift_slope_per_deg();
    2.0 * (DEFAULT_CL_MAX / s + DEFAULT_ZERO_LIFT_DEG) - DEFAULT_STALL_DEG
}

/// Attached-flow lift on the positive side of the zero-lift angle, mirrored
/// about it for negative lift.
fn attached_cl(alpha_deg: f64) -> f64 {
    let s = lift_slope_per_deg();
    let rel = alpha_deg - DEFAULT_ZERO_LIFT_DEG;
    let span_lin = rounding_start_deg() - DEFAULT_ZERO_LIFT_DEG;
    let span_stall = DEFAULT_STALL_DEG - DEFAULT_ZERO_LIFT_DEG;
    let x = rel.abs();
    let mag = if x <= span_lin {
        s * x
    } else {
        let d = span_stall - x;
        DEFAULT_CL_MAX - s / (2.0 * (span_stall - span_lin)) * d * d
    };
    mag.copysign(rel)
}

fn attached_cd(cl: f64) -> f64 {
    0.008 + 0.012 * cl * cl
}

/// Viterna-Corrigan post-stall model for `|alpha|` in [stall, 180] degrees,
/// continuous with the stall point `(cl_s, cd_s)`.
fn post_stall(alpha_abs_deg: f64, stall_deg: f64, cl_s: f64, cd_s: f64) -> (f64, f64) {
    let cd_max = 1.11 + 0.018 * VITERNA_ASPECT_RATIO;
    let viterna = |a_deg: f64| {
        let a = a_deg.to_radians();
        let s = stall_deg.to_radians();
        let a1 = cd_max / 2.0;
        let a2 = (cl_s - cd_max * s.sin() * s.cos()) * s.sin() / (s.cos() * s.cos());
        let b1 = cd_max;
        let b2 = (cd_s - cd_max * s.sin() * s.sin()) / s.cos();
        let cl = a1 * (2.0 * a).sin() + a2 * a.cos() * a.cos() / a.sin();
        let cd = b1 * a.sin() * a.sin() + b2 * a.cos();
        (cl, cd)
    };
    let back_start = 180.0 - stall_deg;
    if alpha_abs_deg <= 90.0 {
        viterna(alpha_abs_deg)
    } else if alpha_abs_deg <= back_start {
        let (cl, cd) = viterna(180.0 - alpha_abs_deg);
        (-0.7 * cl, cd)
    } else {
        // trailing-edge-first: blend to zero lift at 180 degrees
        let (cl_b, cd_b) = viterna(stall_deg);
        let w = (alpha_abs_deg - back_start) / stall_deg;
        (-0.7 * cl_b * (1.0 - w), cd_b + w * (CD_REVERSED - cd_b))
    }
}

fn default_coefficients(alpha_deg: f64) -> (f64, f64) {
    let neg_stall = 2.0 * DEFAULT_ZERO_LIFT_DEG - DEFAULT_STALL_DEG;
    if (neg_stall..=DEFAULT_STALL_DEG).contains(&alpha_deg) {
        let cl = attached_cl(alpha_deg);
        (cl, attached_cd(cl))
    } else if alpha_deg > DEFAULT_STALL_DEG {
        let cl_s = DEFAULT_CL_MAX;
        post_stall(alpha_deg, DEFAULT_STALL_DEG, cl_s, attached_cd(cl_s))
    } else {
        let cl_s = -attached_cl(neg_stall);
        let (cl, cd) = post_stall(-alpha_deg, -neg_stall, cl_s, attached_cd(cl_s));
        (-cl, cd)
    }
}
