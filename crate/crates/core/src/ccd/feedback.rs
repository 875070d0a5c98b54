use crate::dynamics::{simulate, ControlLaw, SimulationSettings, Trajectory};
use crate::nlp::{self, GradientMode, NlpError, NlpProblem, SolverSettings, Values};
use crate::oloc::{CHORD_SCALE, TWIST_SCALE};
use crate::rotor::{available_power, cp_curve, default_tsr_grid, BladeGeometry, TorqueTable};

use super::{inertia_of, CcdError, CcdResult, CcdSpec, ControlMode, DesignedControl, Provenance};

/// Upper gain bound of `u = K1 w`, N m s/rad.
pub const LINEAR_GAIN_MAX: f64 = 500.0;
/// Upper gain bound of `u = K2 w^2`, N m s^2/rad^2.
pub const QUADRATIC_GAIN_MAX: f64 = 50.0;

/// Single-shooting problem over `[K, chords.., twists..]`: every evaluation
/// runs the closed loop over the full horizon.
#[derive(Debug)]
pub struct FeedbackProblem<'a> {
    spec: &'a CcdSpec,
    gain_lo: f64,
    gain_hi: f64,
    gain_scale: f64,
    energy_scale: f64,
}

impl<'a> FeedbackProblem<'a> {
    pub fn new(spec: &'a CcdSpec) -> Result<Self, CcdError> {
        spec.validate()?;
        let default_hi = match spec.mode {
            ControlMode::LinearFb => LINEAR_GAIN_MAX,
            ControlMode::QuadraticFb => QUADRATIC_GAIN_MAX,
            ControlMode::Oloc => {
                return Err(CcdError::Config("feedback design needs a feedback mode".into()))
            }
        };
        let (gain_lo, gain_hi) = spec.gain_bounds.unwrap_or((0.0, default_hi));
        let energy_scale =
            0.25 * available_power(&spec.geometry, &spec.fluid, spec.profile.velocity(0.0)) * spec.horizon;
        Ok(Self { spec, gain_lo, gain_hi, gain_scale: default_hi, energy_scale })
    }

    fn n_blade(&self) -> usize {
        if self.spec.freeze_geometry {
            0
        } else {
            self.spec.geometry.num_segments()
        }
    }

    pub fn decode(&self, x: &[f64]) -> (f64, BladeGeometry) {
        let k = x[0] * self.gain_scale;
        let nb = self.n_blade();
        if nb == 0 {
            return (k, self.spec.geometry.clone());
        }
        let chords: Vec<f64> = x[1..1 + nb].iter().map(|c| c * CHORD_SCALE).collect();
        let twists: Vec<f64> = x[1 + nb..].iter().map(|t| t * TWIST_SCALE).collect();
        (k, self.spec.geometry.with_design(&chords, &twists))
    }

    pub fn encode(&self, k: f64, geometry: &BladeGeometry) -> Vec<f64> {
        let mut x = vec![k.clamp(self.gain_lo, self.gain_hi) / self.gain_scale];
        if self.n_blade() > 0 {
            x.extend(geometry.chords().iter().map(|c| c / CHORD_SCALE));
            x.extend(geometry.twists().iter().map(|t| t / TWIST_SCALE));
        }
        x
    }

    pub fn law(&self, k: f64) -> ControlLaw {
        let base = match self.spec.mode {
            ControlMode::LinearFb => ControlLaw::linear(k),
            _ => ControlLaw::quadratic(k),
        };
        ControlLaw { saturation: self.spec.saturation(), ..base }
    }

    /// Closed-loop response of a design from its own equilibrium speed.
    pub fn simulate_design(&self, k: f64, geometry: &BladeGeometry) -> Result<Trajectory, CcdError> {
        let table = TorqueTable::new(geometry.clone(), self.spec.polar.clone(), self.spec.fluid);
        let settings = SimulationSettings::new(self.spec.horizon, self.spec.dt, inertia_of(self.spec, geometry));
        Ok(simulate(&table, &self.law(k), &self.spec.profile, &settings, None)?)
    }

    /// Starting gain: `K*` of the starting blade, times the nominal speed
    /// `l* v_mean / R` for the linear law.
    pub fn initial_gain(&self) -> Result<f64, CcdError> {
        let s = self.spec;
        let curve = cp_curve(&s.geometry, &s.polar, &s.fluid, &default_tsr_grid())?;
        let k_star = curve.optimal_quadratic_gain(&s.geometry, &s.fluid);
        Ok(match s.mode {
            ControlMode::LinearFb => {
                let samples = 1000;
                let v_mean = (0..=samples)
                    .map(|i| s.profile.velocity(s.horizon * i as f64 / samples as f64))
                    .sum::<f64>()
                    / (samples + 1) as f64;
                k_star * curve.optimal_tsr * v_mean / s.geometry.tip_radius
            }
            _ => k_star,
        })
    }
}

impl NlpProblem for FeedbackProblem<'_> {
    fn dimension(&self) -> usize {
        1 + 2 * self.n_blade()
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let b = &self.spec.bounds;
        let nb = self.n_blade();
        let mut lo = vec![self.gain_lo / self.gain_scale];
        let mut hi = vec![self.gain_hi / self.gain_scale];
        lo.extend(std::iter::repeat_n(b.chord_min / CHORD_SCALE, nb));
        hi.extend(std::iter::repeat_n(b.chord_max / CHORD_SCALE, nb));
        lo.extend(std::iter::repeat_n(b.twist_min / TWIST_SCALE, nb));
        hi.extend(std::iter::repeat_n(b.twist_max / TWIST_SCALE, nb));
        (lo, hi)
    }

    fn values(&self, x: &[f64]) -> Result<Values, NlpError> {
        let (k, geometry) = self.decode(x);
        let tr = self
            .simulate_design(k, &geometry)
            .map_err(|e| NlpError::Evaluation { message: e.to_string(), x: x.to_vec() })?;
        Ok(Values { objective: -tr.energy / self.energy_scale, constraints: vec![] })
    }

    fn gradient_mode(&self) -> GradientMode {
        GradientMode::FiniteDifference
    }
}

/// Feedback CCD over the gain and (unless frozen) the blade design.
pub fn ccd_feedback(spec: &CcdSpec) -> Result<CcdResult, CcdError> {
    let problem = FeedbackProblem::new(spec)?;
    let x0 = problem.encode(problem.initial_gain()?, &spec.geometry);
    let settings = SolverSettings { seed: spec.seed, ..spec.solver };
    let solution = nlp::solve(&problem, &x0, &settings)?;
    let (k, geometry) = problem.decode(&solution.x);
    let trajectory = problem.simulate_design(k, &geometry)?;
    let control = match spec.mode {
        ControlMode::LinearFb => DesignedControl::Linear { k1: k },
        _ => DesignedControl::Quadratic { k2: k },
    };
    Ok(CcdResult {
        mode: spec.mode,
        cp_curve: cp_curve(&geometry, &spec.polar, &spec.fluid, &default_tsr_grid())?,
        inertia: inertia_of(spec, &geometry),
        geometry,
        control,
        u_max: spec.u_max,
        nu: spec.nu,
        energy: trajectory.energy,
        status: solution.status,
        iterations: solution.iterations,
        max_violation: solution.max_violation,
        optimality: solution.optimality,
        provenance: Provenance { spec_hash: spec.hash(), seed: spec.seed },
        trajectory,
    })
}
