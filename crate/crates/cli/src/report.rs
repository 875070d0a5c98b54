//! Table and figure data assembled from earlier outputs of one config.

use std::path::{Path, PathBuf};

use serde_json::json;

use hkt_ccd::ccd::{CcdResult, ComparisonRow};
use hkt_ccd::dynamics::{FlowProfile, Trajectory};

use crate::artifacts::{embedded_hash, fmt, read_csv, Artifacts};
use crate::config::CampaignConfig;
use crate::error::CliError;

/// Plot order of the overlay members.
const LABELS: [&str; 4] = ["oloc", "quadratic", "linear", "baseline_oloc"];

/// One design in an overlay figure.
#[derive(Debug, Clone)]
pub struct Member {
    pub label: String,
    pub result: CcdResult,
    pub trajectory: Trajectory,
}

impl Member {
    pub fn new(label: &str, result: CcdResult, trajectory: Trajectory) -> Self {
        Self { label: label.to_string(), result, trajectory }
    }
}

/// Writes `<prefix>_geometry.csv`, `<prefix>_cp.csv` and
/// `<prefix>_trajectories.csv`, one long-format block per member.
pub fn write_overlays(
    out: &mut Artifacts,
    prefix: &str,
    members: &[Member],
    profile: &FlowProfile,
) -> Result<(), CliError> {
    let mut geometry = String::from("controller,r_mid_m,r_over_R,chord_m,twist_deg\n");
    let mut cp = String::from("controller,tsr,cp\n");
    let mut traj = String::from("controller,t,v,omega,u,P,tsr\n");
    for m in members {
        let g = &m.result.geometry;
        for s in &g.segments {
            geometry.push_str(&format!(
                "{},{},{},{},{}\n",
                m.label,
                fmt(s.r_mid),
                fmt(s.r_mid / g.tip_radius),
                fmt(s.chord),
                fmt(s.twist.to_degrees())
            ));
        }
        for p in &m.result.cp_curve.points {
            cp.push_str(&format!("{},{},{}\n", m.label, fmt(p.tsr), p.cp.map_or(String::new(), fmt)));
        }
        let tr = &m.trajectory;
        for i in 0..tr.len() {
            let v = profile.velocity(tr.t[i]);
            traj.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                m.label,
                fmt(tr.t[i]),
                fmt(v),
                fmt(tr.omega[i]),
                fmt(tr.u[i]),
                fmt(tr.power[i]),
                fmt(tr.omega[i] * g.tip_radius / v)
            ));
        }
    }
    out.csv(&format!("{prefix}_geometry.csv"), &geometry)?;
    out.csv(&format!("{prefix}_cp.csv"), &cp)?;
    out.csv(&format!("{prefix}_trajectories.csv"), &traj)?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

/// Body of a CSV artifact without its hash line.
fn csv_body(path: &Path) -> Result<String, CliError> {
    let text = read_text(path)?;
    Ok(text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect())
}

/// Every `<stem>_*` artifact other than earlier report output, after checking
/// that each carries the current config hash.
fn campaign_files(out: &Artifacts, stem: &str) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(out.dir())
        .map_err(|e| CliError::Io(format!("cannot list {}: {e}", out.dir().display())))?;
    let prefix = format!("{stem}_");
    let report_prefix = format!("{stem}_report");
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::Io(e.to_string()))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        if !name.starts_with(&prefix) || name.starts_with(&report_prefix) {
            continue;
        }
        if !(name.ends_with(".csv") || name.ends_with(".json")) {
            continue;
        }
        match embedded_hash(&path)? {
            Some(h) if h == out.hash() => files.push(path),
            Some(h) => {
                return Err(CliError::Config(format!(
                    "{name} was written under config {h}, not the current {}; rerun it or use another --out",
                    out.hash()
                )))
            }
            None => return Err(CliError::Config(format!("{name} carries no config hash"))),
        }
    }
    files.sort();
    Ok(files)
}

fn load_member(out: &Artifacts, label: &str) -> Result<Option<Member>, CliError> {
    let path = out.path(&format!("ccd_{label}.json"));
    if !path.exists() {
        return Ok(None);
    }
    let doc: serde_json::Value = serde_json::from_str(&read_text(&path)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let result: CcdResult = serde_json::from_value(doc.clone())
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let trajectory = match doc.get("trajectory_file").and_then(|f| f.as_str()) {
        Some(file) => {
            let tpath = out.dir().join(file);
            let (header, rows) = read_csv(&tpath)?;
            let column = |name: &str| -> Result<Vec<f64>, CliError> {
                let j = header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| CliError::Config(format!("{} lacks column {name}", tpath.display())))?;
                rows.iter()
                    .map(|r| r[j].parse::<f64>().map_err(|e| CliError::Config(format!("{}: {e}", tpath.display()))))
                    .collect()
            };
            Trajectory::new(column("t")?, column("omega")?, column("u")?, column("Q")?)?
        }
        None => Trajectory::default(),
    };
    Ok(Some(Member::new(label, result, trajectory)))
}

fn energy_rows(path: &Path) -> Result<Vec<ComparisonRow>, CliError> {
    let doc: serde_json::Value = serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_value(doc["rows"].clone()).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn report(c: &CampaignConfig) -> Result<Vec<PathBuf>, CliError> {
    let stem = c.stem();
    let mut out = Artifacts::new(c)?;
    let sources = campaign_files(&out, &stem)?;
    if sources.is_empty() {
        return Err(CliError::Io(format!(
            "no outputs named {stem}_* in {}; run ccd, compare or sensitivity first",
            out.dir().display()
        )));
    }

    let energy_source = ["compare_energy.json", "ccd_energy.json"].into_iter().map(|s| out.path(s)).find(|p| p.exists());
    let rows = match &energy_source {
        Some(p) => energy_rows(p)?,
        None => Vec::new(),
    };
    if !rows.is_empty() {
        let mut table = String::from("controller,energy_J,delta_percent,gain,status,cell\n");
        for r in &rows {
            let status = r
                .status
                .and_then(|s| serde_json::to_value(s).ok())
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_else(|| "error".into());
            table.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.label,
                r.energy.map_or(String::new(), fmt),
                r.delta_percent.map_or(String::new(), |d| format!("{d:.3}")),
                r.gain.map_or(String::new(), fmt),
                status,
                r.energy_cell()
            ));
        }
        out.csv("report_table_energy.csv", &table)?;
    }

    let sensitivity = out.path("sensitivity.csv");
    if sensitivity.exists() {
        out.csv("report_table_sensitivity.csv", &csv_body(&sensitivity)?)?;
    }

    let mut members = Vec::new();
    for label in LABELS {
        if let Some(m) = load_member(&out, label)? {
            members.push(m);
        }
    }
    if !members.is_empty() {
        write_overlays(&mut out, "report_fig", &members, &c.profile())?;
    }

    let names = |paths: &[PathBuf]| -> Vec<String> {
        paths.iter().filter_map(|p| p.file_name().and_then(|n| n.to_str()).map(String::from)).collect()
    };
    let produced = names(out.written());
    out.json(
        "report.json",
        json!({
            "stem": stem,
            "energy": rows,
            "designs": members.iter().map(|m| json!({
                "controller": m.label,
                "energy_J": m.result.energy,
                "gain": m.result.gain(),
                "status": m.result.status,
                "max_violation": m.result.max_violation,
                "stalled": m.trajectory.stalled(),
            })).collect::<Vec<_>>(),
            "sources": names(&sources),
            "outputs": produced,
        }),
    )?;
    Ok(out.written().to_vec())
}
