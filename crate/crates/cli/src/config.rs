//! Campaign configuration: one TOML file whose values the command line can
//! override. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hkt_ccd::ccd::{CcdSpec, ControlMode};
use hkt_ccd::dynamics::{FlowProfile, SensorModel};
use hkt_ccd::nlp::SolverSettings;
use hkt_ccd::rotor::{AirfoilPolar, BladeGeometry, BladeMaterial, FluidEnvironment};
use hkt_ccd::sensitivity::UncertaintyKind;

use crate::error::CliError;

/// Step-inflow scenario: 1.2 m/s rising to 1.4 m/s near t = 30 s.
pub const SCENARIO_STEP: u8 = 1;
/// Sinusoidal-inflow scenario `0.2 sin(0.25 t) + 1.5`.
pub const SCENARIO_SINUSOID: u8 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    /// prefix of every artifact name
    #[serde(default = "default_name")]
    pub name: String,
    /// 1 = step inflow (60 s), 2 = sinusoidal inflow (50 s)
    #[serde(default = "default_scenario")]
    pub scenario: u8,
    /// `baseline` or a geometry CSV path
    #[serde(default = "default_geometry")]
    pub geometry: String,
    /// `default` or a polar CSV path
    #[serde(default = "default_polar")]
    pub polar: String,
    /// replaces the scenario inflow
    #[serde(default)]
    pub flow: Option<FlowConfig>,
    /// s; defaults to the scenario horizon
    #[serde(default)]
    pub horizon: Option<f64>,
    /// integration step, s
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// generator torque limit, N m; absent means unconstrained
    #[serde(default)]
    pub u_max: Option<f64>,
    #[serde(default = "default_modes")]
    pub modes: Vec<ModeName>,
    /// design the controller only
    #[serde(default)]
    pub freeze_geometry: bool,
    /// collocation segments of the open-loop transcription
    #[serde(default = "default_segments")]
    pub n_segments: usize,
    /// optimizer restart seed
    #[serde(default)]
    pub seed: u64,
    /// sensor-noise seeds of the robustness study
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// relative to `$HKT_CCD_OUT` (or the working directory)
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub physical: PhysicalConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub sensitivity: SensitivityConfig,
    #[serde(default)]
    pub bem_curve: BemCurveConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Oloc,
    Quadratic,
    Linear,
}

impl ModeName {
    pub fn mode(self) -> ControlMode {
        match self {
            Self::Oloc => ControlMode::Oloc,
            Self::Quadratic => ControlMode::QuadraticFb,
            Self::Linear => ControlMode::LinearFb,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FlowConfig {
    Constant { speed: f64 },
    SmoothedStep { base: f64, step: f64, center: f64 },
    Sinusoid { amplitude: f64, angular_frequency: f64, phase: f64, mean: f64 },
}

impl FlowConfig {
    pub fn profile(&self) -> FlowProfile {
        match *self {
            Self::Constant { speed } => FlowProfile::Constant { speed },
            Self::SmoothedStep { base, step, center } => FlowProfile::SmoothedStep { base, step, center },
            Self::Sinusoid { amplitude, angular_frequency, phase, mean } => {
                FlowProfile::Sinusoid { amplitude, angular_frequency, phase, mean }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub max_iterations: usize,
    pub max_restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverSettings::default();
        Self {
            feasibility_tol: s.feasibility_tol,
            optimality_tol: s.optimality_tol,
            max_iterations: s.max_iterations,
            max_restarts: s.max_restarts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConfig {
    /// kg/m^3
    pub water_density: f64,
    /// kg/m^3
    pub blade_density: f64,
    pub thickness_ratio: f64,
    pub area_factor: f64,
}

impl Default for PhysicalConfig {
    fn default() -> Self {
        let m = BladeMaterial::default();
        Self {
            water_density: FluidEnvironment::default().density,
            blade_density: m.density,
            thickness_ratio: m.thickness_ratio,
            area_factor: m.area_factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum LawName {
    Quadratic,
    Linear,
    /// zero generator torque
    Freewheel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub law: LawName,
    /// defaults to K* of the geometry (times the nominal speed for `linear`)
    pub gain: Option<f64>,
    /// rad/s; the law's own equilibrium when absent
    pub initial_omega: Option<f64>,
    /// feed the law through the noisy, filtered speed sensor
    pub sensor_noise: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { law: LawName::Quadratic, gain: None, initial_omega: None, sensor_noise: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivityConfig {
    pub kinds: Vec<KindName>,
    pub snr_db: f64,
    pub cutoff_hz: f64,
    /// evaluate feedback laws without sensor noise
    pub noise_free: bool,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        let s = SensorModel::default();
        Self { kinds: vec![KindName::A, KindName::B, KindName::C], snr_db: s.snr_db, cutoff_hz: s.cutoff_hz, noise_free: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub enum KindName {
    A,
    B,
    C,
}

impl KindName {
    pub fn kind(self) -> UncertaintyKind {
        match self {
            Self::A => UncertaintyKind::A,
            Self::B => UncertaintyKind::B,
            Self::C => UncertaintyKind::C,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct BemCurveConfig {
    pub tsr_min: f64,
    pub tsr_max: f64,
    pub tsr_step: f64,
}

impl Default for BemCurveConfig {
    fn default() -> Self {
        Self { tsr_min: 0.1, tsr_max: 14.0, tsr_step: 0.1 }
    }
}

fn default_name() -> String {
    "campaign".into()
}
fn default_scenario() -> u8 {
    SCENARIO_SINUSOID
}
fn default_geometry() -> String {
    "baseline".into()
}
fn default_polar() -> String {
    "default".into()
}
fn default_dt() -> f64 {
    0.01
}
fn default_modes() -> Vec<ModeName> {
    vec![ModeName::Oloc, ModeName::Quadratic, ModeName::Linear]
}
fn default_segments() -> usize {
    50
}
fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}
fn default_output_dir() -> String {
    "out".into()
}

impl Default for CampaignConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config takes every default")
    }
}

impl CampaignConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config: {}", e.message())))
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn json_schema() -> serde_json::Value {
        serde_json::to_value(schemars::schema_for!(CampaignConfig)).expect("schema serializes")
    }

    /// Checks every value that does not need file access.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return bad(format!("name {:?} must be non-empty [A-Za-z0-9_-]", self.name));
        }
        if ![SCENARIO_STEP, SCENARIO_SINUSOID].contains(&self.scenario) {
            return bad(format!("scenario {} must be 1 or 2", self.scenario));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt {} must be > 0", self.dt));
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0) || !h.is_finite() {
                return bad(format!("horizon {h} must be > 0"));
            }
        }
        if let Some(u) = self.u_max {
            if !(u > 0.0) || !u.is_finite() {
                return bad(format!("u_max {u} must be > 0"));
            }
        }
        if self.modes.is_empty() {
            return bad("modes must not be empty".into());
        }
        if self.n_segments == 0 {
            return bad("n_segments must be >= 1".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        let s = &self.solver;
        if !(s.feasibility_tol > 0.0 && s.optimality_tol > 0.0) || s.max_iterations == 0 {
            return bad("solver tolerances must be > 0 and max_iterations >= 1".into());
        }
        let b = &self.bem_curve;
        if !(b.tsr_min > 0.0 && b.tsr_max > b.tsr_min && b.tsr_step > 0.0) {
            return bad("bem_curve needs 0 < tsr_min < tsr_max and tsr_step > 0".into());
        }
        if let Some(g) = self.simulate.gain {
            if !(g >= 0.0) || !g.is_finite() {
                return bad(format!("simulate.gain {g} must be >= 0"));
            }
        }
        if self.sensitivity.kinds.is_empty() {
            return bad("sensitivity.kinds must not be empty".into());
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or(if self.scenario == SCENARIO_STEP { 60.0 } else { 50.0 })
    }

    pub fn profile(&self) -> FlowProfile {
        match &self.flow {
            Some(f) => f.profile(),
            None if self.scenario == SCENARIO_STEP => FlowProfile::step_scenario(),
            None => FlowProfile::sinusoid_scenario(),
        }
    }

    /// Artifact prefix `<name>_s<scenario>`.
    pub fn stem(&self) -> String {
        format!("{}_s{}", self.name, self.scenario)
    }

    /// SHA-256 of the canonical JSON form, ignoring where outputs go.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir.clear();
        let json = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `$HKT_CCD_OUT/<output_dir>`; an absolute `output_dir` stands alone.
    pub fn output_path(&self) -> PathBuf {
        let root = std::env::var_os("HKT_CCD_OUT").map(PathBuf::from).unwrap_or_default();
        root.join(&self.output_dir)
    }

    pub fn load_geometry(&self) -> Result<BladeGeometry, CliError> {
        if self.geometry == "baseline" {
            return Ok(BladeGeometry::baseline());
        }
        let path = Path::new(&self.geometry);
        if !path.exists() {
            return Err(CliError::Io(format!("geometry file {} not found", path.display())));
        }
        BladeGeometry::from_csv_path(path).map_err(|e| CliError::Config(format!("geometry {}: {e}", path.display())))
    }

    pub fn load_polar(&self) -> Result<AirfoilPolar, CliError> {
        if self.polar == "default" {
            return Ok(AirfoilPolar::default_section());
        }
        let path = Path::new(&self.polar);
        if !path.exists() {
            return Err(CliError::Io(format!("polar file {} not found", path.display())));
        }
        AirfoilPolar::from_csv_path(path).map_err(|e| CliError::Config(format!("polar {}: {e}", path.display())))
    }

    pub fn fluid(&self) -> FluidEnvironment {
        FluidEnvironment { density: self.physical.water_density }
    }

    pub fn material(&self) -> BladeMaterial {
        BladeMaterial {
            density: self.physical.blade_density,
            thickness_ratio: self.physical.thickness_ratio,
            area_factor: self.physical.area_factor,
        }
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            feasibility_tol: self.solver.feasibility_tol,
            optimality_tol: self.solver.optimality_tol,
            max_iterations: self.solver.max_iterations,
            max_restarts: self.solver.max_restarts,
            seed: self.seed,
            ..SolverSettings::default()
        }
    }

    pub fn sensor(&self) -> SensorModel {
        SensorModel { snr_db: self.sensitivity.snr_db, cutoff_hz: self.sensitivity.cutoff_hz, ..SensorModel::default() }
    }

    /// Design spec for one mode.
    pub fn ccd_spec(&self, mode: ControlMode) -> Result<CcdSpec, CliError> {
        let mut spec = CcdSpec::new(mode, self.profile(), self.horizon(), self.u_max);
        spec.geometry = self.load_geometry()?;
        spec.polar = self.load_polar()?;
        spec.fluid = self.fluid();
        spec.material = self.material();
        spec.solver = self.solver_settings();
        spec.freeze_geometry = self.freeze_geometry;
        spec.n_segments = self.n_segments;
        spec.dt = self.dt;
        spec.seed = self.seed;
        spec.validate()?;
        Ok(spec)
    }
}
