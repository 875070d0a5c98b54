//! Robustness of finished designs under inflow uncertainty and noisy speed
//! feedback, measured against an open-loop optimum that knows the true flow.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ccd::{resimulate, CcdError, CcdResult, CcdSpec};
use crate::dynamics::{FlowProfile, SensorModel, Trajectory};
use crate::nlp::{SolverSettings, Status};
use crate::oloc::{solve_oloc, CollocationGrid, OlocSetup};
use crate::rotor::BladeGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UncertaintyKind {
    /// amplitude of the whole inflow scaled by 1.1
    A,
    /// angular frequency 0.225 rad/s
    B,
    /// phase shifted by 0.2 pi rad
    C,
}

impl UncertaintyKind {
    pub const ALL: [UncertaintyKind; 3] = [Self::A, Self::B, Self::C];

    pub fn label(self) -> &'static str {
        match self {
            Self::A => "A",
            Self::B => "B",
            Self::C => "C",
        }
    }
}

pub const AMPLITUDE_FACTOR: f64 = 1.1;
pub const PERTURBED_FREQUENCY: f64 = 0.225;
pub const PHASE_SHIFT: f64 = 0.2 * PI;

/// Perturbed copy of a sinusoidal inflow.
pub fn perturb_flow(base: &FlowProfile, kind: UncertaintyKind) -> Result<FlowProfile, CcdError> {
    let FlowProfile::Sinusoid { amplitude, angular_frequency, phase, mean } = *base else {
        return Err(CcdError::Config("uncertainty types apply to a sinusoidal inflow only".into()));
    };
    Ok(match kind {
        UncertaintyKind::A => FlowProfile::Scaled { inner: Box::new(base.clone()), factor: AMPLITUDE_FACTOR },
        UncertaintyKind::B => {
            FlowProfile::Sinusoid { amplitude, angular_frequency: PERTURBED_FREQUENCY, phase, mean }
        }
        UncertaintyKind::C => FlowProfile::Sinusoid { amplitude, angular_frequency, phase: phase + PHASE_SHIFT, mean },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignEvaluation {
    /// J; 0 when the rotor stalled
    pub energy: f64,
    /// energy integrated regardless of stall, J
    pub raw_energy: f64,
    pub stalled: bool,
    pub trajectory: Trajectory,
}

/// Replays a design against `profile`. Feedback laws see the sensor chain;
/// open-loop schedules run uncorrected from their stored initial speed. A
/// run that stalls is reported as non-generating.
pub fn evaluate_design(
    result: &CcdResult,
    spec: &CcdSpec,
    profile: &FlowProfile,
    sensor: Option<&SensorModel>,
) -> Result<DesignEvaluation, CcdError> {
    let trajectory = resimulate(result, spec, profile, spec.dt, sensor)?;
    let stalled = trajectory.stalled();
    Ok(DesignEvaluation {
        energy: if stalled { 0.0 } else { trajectory.energy },
        raw_energy: trajectory.energy,
        stalled,
        trajectory,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ceiling {
    pub energy: f64,
    pub status: Status,
    pub max_violation: f64,
}

/// Open-loop optimum for a fixed blade on the true flow.
pub fn redesigned_oloc_ceiling(
    geometry: &BladeGeometry,
    spec: &CcdSpec,
    profile: &FlowProfile,
    u_max: Option<f64>,
) -> Result<Ceiling, CcdError> {
    let setup = OlocSetup {
        geometry: geometry.clone(),
        geometry_box: None,
        polar: spec.polar.clone(),
        fluid: spec.fluid,
        material: spec.material,
        profile: profile.clone(),
        grid: CollocationGrid::new(spec.horizon, spec.n_segments)?,
        u_max,
        initial_omega: None,
    };
    let out = solve_oloc(setup, &SolverSettings { seed: spec.seed, ..spec.solver }, None)?;
    if out.solution.max_violation > spec.solver.feasibility_tol {
        return Err(CcdError::Config(format!(
            "ceiling solve ended infeasible (violation {:.3e}, status {:?})",
            out.solution.max_violation, out.solution.status
        )));
    }
    Ok(Ceiling { energy: out.energy, status: out.solution.status, max_violation: out.solution.max_violation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySettings {
    pub kinds: Vec<UncertaintyKind>,
    pub sensor: Option<SensorModel>,
    pub seeds: Vec<u64>,
}

impl Default for SensitivitySettings {
    fn default() -> Self {
        Self { kinds: UncertaintyKind::ALL.to_vec(), sensor: Some(SensorModel::default()), seeds: (0..10).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCell {
    pub controller: String,
    pub kind: UncertaintyKind,
    /// mean over seeds, J
    pub energy: Option<f64>,
    pub per_seed: Vec<f64>,
    pub ceiling: Option<f64>,
    /// `100 energy / ceiling`
    pub percent_of_ceiling: Option<f64>,
    pub stalled: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    /// ceiling of the open-loop CCD blade per uncertainty type
    pub ceilings: Vec<(UncertaintyKind, Option<f64>)>,
    pub cells: Vec<SensitivityCell>,
    pub settings: SensitivitySettings,
}

impl SensitivityReport {
    pub fn cell(&self, controller: &str, kind: UncertaintyKind) -> Option<&SensitivityCell> {
        self.cells.iter().find(|c| c.controller == controller && c.kind == kind)
    }

    /// Matrix with one row per controller plus the ceiling row, one column
    /// per type; cells read `energy (delta vs ceiling %)`, `stall`, or `(ref)`.
    pub fn to_csv_string(&self) -> String {
        let kinds = &self.settings.kinds;
        let mut out = String::from("controller");
        for k in kinds {
            out.push_str(&format!(",type_{}", k.label()));
        }
        out.push('\n');
        out.push_str("oloc_redesigned");
        for k in kinds {
            let c = self.ceilings.iter().find(|(kk, _)| kk == k).and_then(|(_, e)| *e);
            out.push_str(&c.map_or(",failed".into(), |e| format!(",{e:.0} (ref)")));
        }
        out.push('\n');
        let mut controllers: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !controllers.contains(&c.controller.as_str()) {
                controllers.push(&c.controller);
            }
        }
        for name in controllers {
            out.push_str(name);
            for k in kinds {
                let cell = self.cell(name, *k);
                let text = match cell {
                    Some(c) if c.stalled => "stall".to_string(),
                    Some(SensitivityCell { energy: Some(e), percent_of_ceiling: Some(p), .. }) => {
                        format!("{e:.0} ({:+.1}%)", p - 100.0)
                    }
                    Some(SensitivityCell { energy: Some(e), .. }) => format!("{e:.0}"),
                    _ => "failed".into(),
                };
                out.push_str(&format!(",{text}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluates every design under every type; each design's ceiling is the
/// redesigned open-loop optimum of its own blade on the true flow.
pub fn sensitivity_table(
    designs: &[(String, CcdResult)],
    spec: &CcdSpec,
    settings: &SensitivitySettings,
) -> Result<SensitivityReport, CcdError> {
    let mut ceilings = Vec::new();
    let mut cells = Vec::new();
    let mut cache: Vec<(BladeGeometry, UncertaintyKind, Result<f64, String>)> = Vec::new();
    for &kind in &settings.kinds {
        let profile = perturb_flow(&spec.profile, kind)?;
        for (name, design) in designs {
            let ceiling = match cache.iter().find(|(g, k, _)| *g == design.geometry && *k == kind) {
                Some((_, _, c)) => c.clone(),
                None => {
                    let c = redesigned_oloc_ceiling(&design.geometry, spec, &profile, design.u_max)
                        .map(|c| c.energy)
                        .map_err(|e| e.to_string());
                    cache.push((design.geometry.clone(), kind, c.clone()));
                    c
                }
            };
            if design.mode == crate::ccd::ControlMode::Oloc {
                ceilings.push((kind, ceiling.clone().ok()));
            }
            let runs: Result<Vec<DesignEvaluation>, CcdError> = if design.law().is_feedback() {
                match &settings.sensor {
                    Some(s) => settings
                        .seeds
                        .iter()
                        .map(|&seed| evaluate_design(design, spec, &profile, Some(&s.with_seed(seed))))
                        .collect(),
                    None => evaluate_design(design, spec, &profile, None).map(|e| vec![e]),
                }
            } else {
                evaluate_design(design, spec, &profile, None).map(|e| vec![e])
            };
            let cell = match runs {
                Ok(runs) => {
                    let per_seed: Vec<f64> = runs.iter().map(|r| r.energy).collect();
                    let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
                    let c = ceiling.as_ref().ok().copied();
                    SensitivityCell {
                        controller: name.clone(),
                        kind,
                        energy: Some(mean),
                        per_seed,
                        ceiling: c,
                        percent_of_ceiling: c.map(|c| 100.0 * mean / c),
                        stalled: runs.iter().any(|r| r.stalled),
                        error: ceiling.err(),
                    }
                }
                Err(e) => SensitivityCell {
                    controller: name.clone(),
                    kind,
                    energy: None,
                    per_seed: vec![],
                    ceiling: ceiling.ok(),
                    percent_of_ceiling: None,
                    stalled: false,
                    error: Some(e.to_string()),
                },
            };
            cells.push(cell);
        }
    }
    Ok(SensitivityReport { ceilings, cells, settings: settings.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perturbed_profiles() {
        let base = FlowProfile::sinusoid_scenario();
        let a = perturb_flow(&base, UncertaintyKind::A).unwrap();
        assert!((a.velocity(10.0) - 1.1 * base.velocity(10.0)).abs() < 1e-15);
        assert!((base.velocity(10.0) - 1.61969).abs() < 1e-5);
        assert!((a.velocity(10.0) - 1.78166).abs() < 1e-5);
        let b = perturb_flow(&base, UncertaintyKind::B).unwrap();
        assert_eq!(b.velocity(0.0), 1.5);
        assert!((b.velocity(3.0) - (0.2 * (0.225f64 * 3.0).sin() + 1.5)).abs() < 1e-15);
        let c = perturb_flow(&base, UncertaintyKind::C).unwrap();
        assert!((c.velocity(0.0) - 1.61756).abs() < 1e-5);
    }

    #[test]
    fn non_sinusoid_base_is_rejected() {
        assert!(perturb_flow(&FlowProfile::step_scenario(), UncertaintyKind::A).is_err());
    }
}
