use serde::{Deserialize, Serialize};

use crate::nlp::Status;

use super::{ccd_oloc, run_ccd, CcdError, CcdResult, CcdSpec, ControlMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub mode: ControlMode,
    pub energy: Option<f64>,
    /// `100 (E - E_oloc) / E_oloc`, rounded to 3 decimals
    pub delta_percent: Option<f64>,
    pub gain: Option<f64>,
    pub status: Option<Status>,
    pub error: Option<String>,
}

impl ComparisonRow {
    /// Table cell in the `322248 (-0.601%)` style; the reference reads `(ref)`.
    pub fn energy_cell(&self) -> String {
        match (self.energy, self.delta_percent) {
            (Some(e), Some(_)) if self.label == ControlMode::Oloc.label() => format!("{e:.0} (ref)"),
            (Some(e), Some(d)) => format!("{e:.0} ({d:+.3}%)"),
            (Some(e), None) => format!("{e:.0}"),
            _ => "failed".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub reference_energy: Option<f64>,
    pub rows: Vec<ComparisonRow>,
    #[serde(skip)]
    pub results: Vec<(String, ControlMode, Result<CcdResult, CcdError>)>,
}

impl ComparisonReport {
    pub fn result(&self, label: &str) -> Option<&CcdResult> {
        self.results.iter().find(|(l, _, _)| l == label).and_then(|(_, _, r)| r.as_ref().ok())
    }

    /// CSV body with header `controller,energy_J,delta_percent,gain,status`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("controller,energy_J,delta_percent,gain,status\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.16e}"));
        for r in &self.rows {
            let status = match (&r.status, &r.error) {
                (Some(s), _) => serde_json::to_value(s).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                (None, Some(_)) => "error".into(),
                _ => String::new(),
            };
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.label,
                opt(r.energy),
                r.delta_percent.map_or(String::new(), |d| format!("{d:.3}")),
                opt(r.gain),
                status
            ));
        }
        out
    }
}

pub fn percent_delta(energy: f64, reference: f64) -> f64 {
    // adding zero turns a rounded -0 into 0
    (100.0 * (energy - reference) / reference * 1000.0).round() / 1000.0 + 0.0
}

/// Runs every spec (one per mode) and, if asked, the baseline-geometry OLOC,
/// reporting energies relative to the open-loop CCD member.
pub fn compare_controllers(specs: &[CcdSpec], with_baseline: bool) -> Result<ComparisonReport, CcdError> {
    let first = specs.first().ok_or_else(|| CcdError::Config("nothing to compare".into()))?;
    for s in specs {
        if s.profile != first.profile || s.horizon != first.horizon || s.u_max != first.u_max {
            return Err(CcdError::Config("compared specs must share flow, horizon and u_max".into()));
        }
    }
    let mut results: Vec<(String, ControlMode, Result<CcdResult, CcdError>)> =
        specs.iter().map(|s| (s.mode.label().to_string(), s.mode, run_ccd(s))).collect();
    if with_baseline {
        let base = CcdSpec { freeze_geometry: true, ..first.with_mode(ControlMode::Oloc) };
        results.push(("baseline_oloc".into(), ControlMode::Oloc, ccd_oloc(&base)));
    }
    let reference = results
        .iter()
        .find(|(l, _, _)| l == ControlMode::Oloc.label())
        .and_then(|(_, _, r)| r.as_ref().ok())
        .map(|r| r.energy);
    let rows = results
        .iter()
        .map(|(label, mode, r)| match r {
            Ok(r) => ComparisonRow {
                label: label.clone(),
                mode: *mode,
                energy: Some(r.energy),
                delta_percent: reference.map(|e0| percent_delta(r.energy, e0)),
                gain: r.gain(),
                status: Some(r.status),
                error: None,
            },
            Err(e) => ComparisonRow {
                label: label.clone(),
                mode: *mode,
                energy: None,
                delta_percent: None,
                gain: None,
                status: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(ComparisonReport { reference_energy: reference, rows, results })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_rounds_to_three_decimals() {
        assert_eq!(percent_delta(100.0, 100.0), 0.0);
        assert!(percent_delta(99.999999, 100.0).is_sign_positive());
        assert_eq!(percent_delta(302778.0, 322248.0), -6.042);
        assert_eq!(percent_delta(320312.0, 322248.0), -0.601);
    }
}
