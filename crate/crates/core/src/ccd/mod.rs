//! Simultaneous blade and controller design.

mod compare;
mod feedback;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dynamics::{
    simulate, ControlLaw, DynamicsError, FlowProfile, OpenLoopSchedule, Saturation, SimulationSettings, Trajectory,
    DEFAULT_SAT_NU,
};
use crate::nlp::{NlpError, SolverSettings, Status};
use crate::oloc::{solve_oloc, CollocationGrid, GeometryBox, OlocError, OlocSetup};
use crate::rotor::{
    cp_curve, default_tsr_grid, rotor_inertia, AirfoilPolar, BladeGeometry, BladeMaterial, CpCurve, ExactTorque,
    FluidEnvironment, GeometryBounds, RotorError, TorqueTable,
};

pub use compare::{compare_controllers, ComparisonReport, ComparisonRow};
pub use feedback::{ccd_feedback, FeedbackProblem, LINEAR_GAIN_MAX, QUADRATIC_GAIN_MAX};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CcdError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Rotor(#[from] RotorError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Oloc(#[from] OlocError),
    #[error(transparent)]
    Nlp(#[from] NlpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    Oloc,
    LinearFb,
    QuadraticFb,
}

impl ControlMode {
    pub const ALL: [ControlMode; 3] = [ControlMode::Oloc, ControlMode::QuadraticFb, ControlMode::LinearFb];

    pub fn label(self) -> &'static str {
        match self {
            Self::Oloc => "oloc",
            Self::LinearFb => "linear",
            Self::QuadraticFb => "quadratic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdSpec {
    pub mode: ControlMode,
    pub profile: FlowProfile,
    /// s
    pub horizon: f64,
    /// generator torque limit, N m
    pub u_max: Option<f64>,
    pub bounds: GeometryBounds,
    /// starting design
    pub geometry: BladeGeometry,
    /// hold the blade fixed and design the controller only
    pub freeze_geometry: bool,
    pub polar: AirfoilPolar,
    pub fluid: FluidEnvironment,
    pub material: BladeMaterial,
    pub solver: SolverSettings,
    /// smoothing of the feedback saturation
    pub nu: f64,
    /// collocation segments (open loop)
    pub n_segments: usize,
    /// integration step (feedback), s
    pub dt: f64,
    /// overrides the feedback gain box `[lo, hi]`
    pub gain_bounds: Option<(f64, f64)>,
    pub seed: u64,
}

impl CcdSpec {
    pub fn new(mode: ControlMode, profile: FlowProfile, horizon: f64, u_max: Option<f64>) -> Self {
        Self {
            mode,
            profile,
            horizon,
            u_max,
            bounds: GeometryBounds::default(),
            geometry: BladeGeometry::baseline(),
            freeze_geometry: false,
            polar: AirfoilPolar::default_section(),
            fluid: FluidEnvironment::default(),
            material: BladeMaterial::default(),
            solver: SolverSettings::default(),
            nu: DEFAULT_SAT_NU,
            n_segments: 50,
            dt: 0.01,
            gain_bounds: None,
            seed: 0,
        }
    }

    pub fn with_mode(&self, mode: ControlMode) -> Self {
        Self { mode, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), CcdError> {
        if let Some(u) = self.u_max {
            if !(u > 0.0) || !u.is_finite() {
                return Err(CcdError::Config(format!("u_max {u} must be > 0")));
            }
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(CcdError::Config(format!("horizon {} must be > 0", self.horizon)));
        }
        if !(self.nu > 0.0) {
            return Err(CcdError::Config(format!("nu {} must be > 0", self.nu)));
        }
        self.geometry.validate()?;
        if !self.bounds.contains(&self.geometry) {
            return Err(CcdError::Config("initial geometry lies outside the design bounds".into()));
        }
        if let Some((lo, hi)) = self.gain_bounds {
            if !(lo >= 0.0) || !(hi >= lo) || !hi.is_finite() {
                return Err(CcdError::Config(format!("gain bounds [{lo}, {hi}] are invalid")));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn saturation(&self) -> Option<Saturation> {
        self.u_max.map(|u_max| Saturation { u_max, nu: self.nu })
    }

    fn geometry_box(&self) -> GeometryBox {
        if self.freeze_geometry {
            GeometryBox::collapsed(&self.geometry)
        } else {
            GeometryBox::uniform(&self.bounds, self.geometry.num_segments())
        }
    }
}

/// Designed controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignedControl {
    Trajectory { schedule: OpenLoopSchedule, initial_omega: f64 },
    Linear { k1: f64 },
    Quadratic { k2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdResult {
    pub mode: ControlMode,
    pub geometry: BladeGeometry,
    pub control: DesignedControl,
    pub u_max: Option<f64>,
    pub nu: f64,
    /// J
    pub energy: f64,
    pub inertia: f64,
    pub cp_curve: CpCurve,
    pub status: Status,
    pub iterations: usize,
    pub max_violation: f64,
    pub optimality: f64,
    pub provenance: Provenance,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

impl CcdResult {
    /// Law that replays this design in the simulator.
    pub fn law(&self) -> ControlLaw {
        let saturation = self.u_max.map(|u_max| Saturation { u_max, nu: self.nu });
        match &self.control {
            DesignedControl::Trajectory { schedule, .. } => ControlLaw::open_loop(schedule.clone()),
            DesignedControl::Linear { k1 } => {
                ControlLaw { saturation, ..ControlLaw::linear(*k1) }
            }
            DesignedControl::Quadratic { k2 } => {
                ControlLaw { saturation, ..ControlLaw::quadratic(*k2) }
            }
        }
    }

    /// Initial speed used in the design run, or `None` when the simulator
    /// starts from the law's own equilibrium.
    pub fn initial_omega(&self) -> Option<f64> {
        match &self.control {
            DesignedControl::Trajectory { initial_omega, .. } => Some(*initial_omega),
            _ => None,
        }
    }

    pub fn gain(&self) -> Option<f64> {
        match &self.control {
            DesignedControl::Linear { k1 } => Some(*k1),
            DesignedControl::Quadratic { k2 } => Some(*k2),
            DesignedControl::Trajectory { .. } => None,
        }
    }

    /// JSON document with the geometry as an embedded CSV block and an
    /// optional reference to the trajectory file.
    pub fn to_json(&self, trajectory_file: Option<&str>) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("result serializes");
        v["geometry_csv"] = serde_json::Value::String(self.geometry.to_csv_string());
        v["trajectory_file"] = trajectory_file.map_or(serde_json::Value::Null, |f| f.into());
        v
    }
}

/// Open-loop CCD: one transcription with the blade design free inside the
/// spec's bounds (or frozen when `freeze_geometry` is set).
pub fn ccd_oloc(spec: &CcdSpec) -> Result<CcdResult, CcdError> {
    spec.validate()?;
    if spec.mode != ControlMode::Oloc {
        return Err(CcdError::Config(format!("ccd_oloc called with mode {:?}", spec.mode)));
    }
    let setup = OlocSetup {
        geometry: spec.geometry.clone(),
        geometry_box: Some(spec.geometry_box()),
        polar: spec.polar.clone(),
        fluid: spec.fluid,
        material: spec.material,
        profile: spec.profile.clone(),
        grid: CollocationGrid::new(spec.horizon, spec.n_segments)?,
        u_max: spec.u_max,
        initial_omega: None,
    };
    let settings = SolverSettings { seed: spec.seed, ..spec.solver };
    let out = solve_oloc(setup, &settings, None)?;
    let geometry = out.decoded.geometry.clone();
    let schedule = out.problem.schedule(&out.solution.x)?;
    Ok(CcdResult {
        mode: ControlMode::Oloc,
        cp_curve: cp_curve(&geometry, &spec.polar, &spec.fluid, &default_tsr_grid())?,
        geometry,
        control: DesignedControl::Trajectory { schedule, initial_omega: out.decoded.omega[0] },
        u_max: spec.u_max,
        nu: spec.nu,
        energy: out.energy,
        inertia: out.decoded.inertia,
        status: out.solution.status,
        iterations: out.solution.iterations,
        max_violation: out.solution.max_violation,
        optimality: out.solution.optimality,
        provenance: Provenance { spec_hash: spec.hash(), seed: spec.seed },
        trajectory: out.trajectory,
    })
}

/// Runs the mode named in the spec.
pub fn run_ccd(spec: &CcdSpec) -> Result<CcdResult, CcdError> {
    match spec.mode {
        ControlMode::Oloc => ccd_oloc(spec),
        ControlMode::LinearFb | ControlMode::QuadraticFb => ccd_feedback(spec),
    }
}

/// Replays a design through the simulator on `profile`. Open-loop designs
/// use the exact element model from their stored initial speed; feedback
/// designs use the tabulated model from their own equilibrium, as in design.
pub fn resimulate(
    result: &CcdResult,
    spec: &CcdSpec,
    profile: &FlowProfile,
    dt: f64,
    sensor: Option<&crate::dynamics::SensorModel>,
) -> Result<Trajectory, CcdError> {
    let mut settings = SimulationSettings::new(spec.horizon, dt, result.inertia);
    settings.initial_omega = result.initial_omega();
    let law = result.law();
    let t = if law.is_feedback() {
        let table = TorqueTable::new(result.geometry.clone(), spec.polar.clone(), spec.fluid);
        simulate(&table, &law, profile, &settings, sensor)?
    } else {
        let exact = ExactTorque { geometry: &result.geometry, polar: &spec.polar, fluid: spec.fluid };
        simulate(&exact, &law, profile, &settings, sensor)?
    };
    Ok(t)
}

fn inertia_of(spec: &CcdSpec, geometry: &BladeGeometry) -> f64 {
    rotor_inertia(geometry, &spec.material)
}
