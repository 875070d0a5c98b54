use std::path::PathBuf;

use serde_json::json;

use hkt_ccd::ccd::{compare_controllers, run_ccd, CcdResult, ComparisonReport, ControlMode, FeedbackProblem};
use hkt_ccd::dynamics::{simulate as integrate, ControlLaw, Saturation, SimulationSettings, DEFAULT_SAT_NU};
use hkt_ccd::oloc::{solve_oloc, CollocationGrid, OlocSetup};
use hkt_ccd::rotor::{cp_curve, rotor_inertia, ExactTorque};
use hkt_ccd::sensitivity::{sensitivity_table, SensitivitySettings};

use crate::artifacts::{embedded_hash, Artifacts};
use crate::config::{CampaignConfig, LawName, ModeName};
use crate::error::CliError;
use crate::report::{write_overlays, Member};

pub fn bem_curve(c: &CampaignConfig) -> Result<Vec<PathBuf>, CliError> {
    let geometry = c.load_geometry()?;
    let polar = c.load_polar()?;
    let fluid = c.fluid();
    let b = c.bem_curve;
    let n = ((b.tsr_max - b.tsr_min) / b.tsr_step + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| b.tsr_min + i as f64 * b.tsr_step).collect();
    let curve = cp_curve(&geometry, &polar, &fluid, &grid)?;
    let mut out = Artifacts::new(c)?;
    out.csv("cp_curve.csv", &curve.to_csv_string())?;
    out.json(
        "cp_curve.json",
        json!({
            "optimal_tsr": curve.optimal_tsr,
            "max_cp": curve.max_cp,
            "k_star": curve.optimal_quadratic_gain(&geometry, &fluid),
            "failed_points": curve.points.iter().filter(|p| p.cp.is_none()).count(),
        }),
    )?;
    Ok(out.written().to_vec())
}

pub fn simulate(c: &CampaignConfig) -> Result<Vec<PathBuf>, CliError> {
    let geometry = c.load_geometry()?;
    let polar = c.load_polar()?;
    let sim = c.simulate;
    let (law, gain) = match sim.law {
        LawName::Freewheel => (ControlLaw::quadratic(0.0), 0.0),
        LawName::Quadratic | LawName::Linear => {
            let mode = if sim.law == LawName::Linear { ControlMode::LinearFb } else { ControlMode::QuadraticFb };
            let k = match sim.gain {
                Some(k) => k,
                None => FeedbackProblem::new(&c.ccd_spec(mode)?)?.initial_gain()?,
            };
            (if mode == ControlMode::LinearFb { ControlLaw::linear(k) } else { ControlLaw::quadratic(k) }, k)
        }
    };
    let law = match c.u_max {
        Some(u_max) => law.saturated(Saturation { u_max, nu: DEFAULT_SAT_NU }),
        None => law,
    };
    let mut settings = SimulationSettings::new(c.horizon(), c.dt, rotor_inertia(&geometry, &c.material()));
    settings.initial_omega = sim.initial_omega;
    let sensor = sim.sensor_noise.then(|| c.sensor().with_seed(c.seeds[0]));
    let exact = ExactTorque { geometry: &geometry, polar: &polar, fluid: c.fluid() };
    let tr = integrate(&exact, &law, &c.profile(), &settings, sensor.as_ref())?;
    let mut out = Artifacts::new(c)?;
    let trajectory_file = out.file_name("simulate_trajectory.csv");
    out.csv("simulate_trajectory.csv", &tr.to_csv_string())?;
    out.json(
        "simulate.json",
        tr.sidecar(json!({
            "law": sim.law,
            "gain": gain,
            "u_max": c.u_max,
            "simulation": settings,
            "profile": c.profile(),
            "sensor": sensor,
            "trajectory_file": trajectory_file,
        })),
    )?;
    Ok(out.written().to_vec())
}

pub fn oloc(c: &CampaignConfig) -> Result<Vec<PathBuf>, CliError> {
    let spec = c.ccd_spec(ControlMode::Oloc)?;
    let setup = OlocSetup {
        geometry: spec.geometry.clone(),
        geometry_box: None,
        polar: spec.polar.clone(),
        fluid: spec.fluid,
        material: spec.material,
        profile: spec.profile.clone(),
        grid: CollocationGrid::new(spec.horizon, spec.n_segments)?,
        u_max: spec.u_max,
        initial_omega: None,
    };
    let outcome = solve_oloc(setup, &spec.solver, None)?;
    let s = &outcome.solution;
    let mut out = Artifacts::new(c)?;
    let trajectory_file = out.file_name("oloc_trajectory.csv");
    out.csv("oloc_trajectory.csv", &outcome.trajectory.to_csv_string())?;
    out.json(
        "oloc.json",
        json!({
            "energy_J": outcome.energy,
            "initial_omega": outcome.decoded.omega[0],
            "u_max": spec.u_max,
            "status": s.status,
            "iterations": s.iterations,
            "max_violation": s.max_violation,
            "optimality": s.optimality,
            "schedule": outcome.problem.schedule(&s.x)?,
            "trajectory_file": trajectory_file,
        }),
    )?;
    if s.max_violation > spec.solver.feasibility_tol {
        return Err(CliError::Solver(format!(
            "open-loop solve ended infeasible (violation {:.3e}, status {:?})",
            s.max_violation, s.status
        )));
    }
    Ok(out.written().to_vec())
}

/// Writes the JSON, geometry, Cp and trajectory files of one design.
fn write_design(out: &mut Artifacts, label: &str, r: &CcdResult) -> Result<(), CliError> {
    let trajectory_file = out.file_name(&format!("ccd_{label}_trajectory.csv"));
    out.csv(&format!("ccd_{label}_trajectory.csv"), &r.trajectory.to_csv_string())?;
    out.csv(&format!("ccd_{label}_geometry.csv"), &r.geometry.to_csv_string())?;
    out.csv(&format!("ccd_{label}_cp.csv"), &r.cp_curve.to_csv_string())?;
    out.json(&format!("ccd_{label}.json"), r.to_json(Some(&trajectory_file)))?;
    Ok(())
}

/// Failures and infeasible open-loop members of a finished campaign.
fn campaign_failures(report: &ComparisonReport, feasibility_tol: f64) -> Vec<String> {
    report
        .results
        .iter()
        .filter_map(|(label, _, r)| match r {
            Err(e) => Some(format!("{label}: {e}")),
            Ok(r) if r.mode == ControlMode::Oloc && r.max_violation > feasibility_tol => {
                Some(format!("{label}: infeasible (violation {:.3e})", r.max_violation))
            }
            Ok(_) => None,
        })
        .collect()
}

fn design_campaign(
    c: &CampaignConfig,
    modes: &[ModeName],
    with_baseline: bool,
    table: &str,
) -> Result<(Artifacts, ComparisonReport), CliError> {
    let specs = modes.iter().map(|m| c.ccd_spec(m.mode())).collect::<Result<Vec<_>, _>>()?;
    let report = compare_controllers(&specs, with_baseline)?;
    let mut out = Artifacts::new(c)?;
    for (label, _, r) in &report.results {
        if let Ok(r) = r {
            write_design(&mut out, label, r)?;
        }
    }
    out.csv(&format!("{table}_energy.csv"), &report.to_csv_string())?;
    out.json(&format!("{table}_energy.json"), json!({ "reference_energy_J": report.reference_energy, "rows": report.rows }))?;
    Ok((out, report))
}

pub fn ccd(c: &CampaignConfig) -> Result<Vec<PathBuf>, CliError> {
    let (out, report) = design_campaign(c, &c.modes, false, "ccd")?;
    let failures = campaign_failures(&report, c.solver.feasibility_tol);
    if !failures.is_empty() {
        return Err(CliError::Solver(failures.join("; ")));
    }
    Ok(out.written().to_vec())
}

pub fn compare(c: &CampaignConfig) -> Result<Vec<PathBuf>, CliError> {
    let all = [ModeName::Oloc, ModeName::Quadratic, ModeName::Linear];
    let (mut out, report) = design_campaign(c, &all, true, "compare")?;
    let members: Vec<Member> = report
        .results
        .iter()
        .filter_map(|(label, _, r)| r.as_ref().ok().map(|r| Member::new(label, r.clone(), r.trajectory.clone())))
        .collect();
    write_overlays(&mut out, "compare", &members, &c.profile())?;
    let failures = campaign_failures(&report, c.solver.feasibility_tol);
    if !failures.is_empty() {
        return Err(CliError::Solver(failures.join("; ")));
    }
    Ok(out.written().to_vec())
}

/// Loads `<stem>_ccd_<label>.json` written under the same config, if present.
fn stored_design(out: &Artifacts, label: &str) -> Result<Option<CcdResult>, CliError> {
    let path = out.path(&format!("ccd_{label}.json"));
    if !path.exists() || embedded_hash(&path)?.as_deref() != Some(out.hash()) {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let r = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(Some(r))
}

pub fn sensitivity(c: &CampaignConfig) -> Result<Vec<PathBuf>, CliError> {
    let base = c.ccd_spec(ControlMode::Oloc)?;
    hkt_ccd::sensitivity::perturb_flow(&base.profile, hkt_ccd::sensitivity::UncertaintyKind::A)?;
    let mut out = Artifacts::new(c)?;
    let mut designs = Vec::new();
    for m in &c.modes {
        let label = m.mode().label();
        let design = match stored_design(&out, label)? {
            Some(d) => d,
            None => {
                let d = run_ccd(&c.ccd_spec(m.mode())?)?;
                write_design(&mut out, label, &d)?;
                d
            }
        };
        designs.push((label.to_string(), design));
    }
    let settings = SensitivitySettings {
        kinds: c.sensitivity.kinds.iter().map(|k| k.kind()).collect(),
        sensor: (!c.sensitivity.noise_free).then(|| c.sensor()),
        seeds: c.seeds.clone(),
    };
    let report = sensitivity_table(&designs, &base, &settings)?;
    out.csv("sensitivity.csv", &report.to_csv_string())?;
    out.json("sensitivity.json", serde_json::to_value(&report).expect("report serializes"))?;
    let failures: Vec<String> = report
        .cells
        .iter()
        .filter_map(|cell| cell.error.as_ref().map(|e| format!("{} type {}: {e}", cell.controller, cell.kind.label())))
        .collect();
    if !failures.is_empty() {
        return Err(CliError::Solver(failures.join("; ")));
    }
    Ok(out.written().to_vec())
}
