use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RotorError;

const BASELINE_CSV: &str = include_str!("../../data/baseline_geometry.csv");

/// Slack on `r_mid + dr/2 <= R` for radii read from rounded text files.
const RADIUS_SLACK: f64 = 1e-9;

/// One blade element. `twist` is in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub r_mid: f64,
    pub dr: f64,
    pub chord: f64,
    pub twist: f64,
}

/// Box constraints on the per-segment design variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryBounds {
    pub chord_min: f64,
    pub chord_max: f64,
    /// radians
    pub twist_min: f64,
    /// radians
    pub twist_max: f64,
}

impl Default for GeometryBounds {
    fn default() -> Self {
        Self {
            chord_min: 0.01,
            chord_max: 1.0,
            twist_min: (-30f64).to_radians(),
            twist_max: 30f64.to_radians(),
        }
    }
}

impl GeometryBounds {
    pub fn contains(&self, geometry: &BladeGeometry) -> bool {
        geometry.segments.iter().all(|s| {
            (self.chord_min..=self.chord_max).contains(&s.chord)
                && (self.twist_min..=self.twist_max).contains(&s.twist)
        })
    }
}

/// Blade planform plus the rotor-level constants the element model needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BladeGeometry {
    pub hub_radius: f64,
    pub tip_radius: f64,
    pub num_blades: u32,
    pub segments: Vec<Segment>,
}

impl BladeGeometry {
    pub fn new(
        hub_radius: f64,
        tip_radius: f64,
        num_blades: u32,
        segments: Vec<Segment>,
    ) -> Result<Self, RotorError> {
        let g = Self { hub_radius, tip_radius, num_blades, segments };
        g.validate()?;
        Ok(g)
    }

    /// The scaled three-bladed baseline rotor (R = 1.4 m, nine segments).
    pub fn baseline() -> Self {
        Self::from_csv_str(BASELINE_CSV).expect("bundled baseline geometry is valid")
    }

    pub fn validate(&self) -> Result<(), RotorError> {
        let bad = |msg: String| Err(RotorError::InvalidGeometry(msg));
        if self.num_blades < 1 {
            return bad("num_blades must be >= 1".into());
        }
        if !(self.hub_radius > 0.0 && self.tip_radius > self.hub_radius) {
            return bad(format!(
                "need 0 < hub_radius < tip_radius, got {} and {}",
                self.hub_radius, self.tip_radius
            ));
        }
        let bounds = GeometryBounds::default();
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.dr > 0.0) {
                return bad(format!("segment {i}: dr must be positive"));
            }
            if !(s.chord >= bounds.chord_min && s.chord <= bounds.chord_max) {
                return bad(format!("segment {i}: chord {} outside [0.01, 1] m", s.chord));
            }
            if !(s.twist >= bounds.twist_min - 1e-12 && s.twist <= bounds.twist_max + 1e-12) {
                return bad(format!(
                    "segment {i}: twist {} deg outside [-30, 30]",
                    s.twist.to_degrees()
                ));
            }
        }
        if let Some(first) = self.segments.first() {
            if !(first.r_mid > self.hub_radius) {
                return bad("first segment midpoint must lie outside the hub".into());
            }
        }
        if let Some(last) = self.segments.last() {
            if last.r_mid + 0.5 * last.dr > self.tip_radius + RADIUS_SLACK {
                return bad("last segment extends past the tip".into());
            }
        }
        if self.segments.windows(2).any(|w| !(w[1].r_mid > w[0].r_mid)) {
            return bad("segment midpoints must be strictly increasing".into());
        }
        Ok(())
    }

    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn chords(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.chord).collect()
    }

    pub fn twists(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.twist).collect()
    }

    /// Copy with chords and twists (radians) replaced.
    pub fn with_design(&self, chords: &[f64], twists: &[f64]) -> Self {
        let mut g = self.clone();
        for (s, (&c, &t)) in g.segments.iter_mut().zip(chords.iter().zip(twists)) {
            s.chord = c;
            s.twist = t;
        }
        g
    }

    /// Mirror-image blade: twists negated. Pairs with [`AirfoilPolar::mirrored`](super::AirfoilPolar::mirrored).
    pub fn mirrored(&self) -> Self {
        let mut g = self.clone();
        for s in &mut g.segments {
            s.twist = -s.twist;
        }
        g
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, RotorError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RotorError::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }

    /// Parses the geometry file format: `key=value` preamble lines
    /// (`tip_radius_m`, `hub_radius_m`, `num_blades`) followed by a CSV block
    /// with header `r_mid_m,dr_m,chord_m,twist_deg`. `#` starts a comment line.
    pub fn from_csv_str(text: &str) -> Result<Self, RotorError> {
        let mut tip = None;
        let mut hub = None;
        let mut blades = None;
        let mut body = String::new();
        let mut in_body = false;
        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !in_body {
                if let Some((k, v)) = line.split_once('=') {
                    let v = v.trim();
                    let num = |v: &str| {
                        v.parse::<f64>()
                            .map_err(|e| RotorError::Parse(format!("preamble `{line}`: {e}")))
                    };
                    match k.trim() {
                        "tip_radius_m" => tip = Some(num(v)?),
                        "hub_radius_m" => hub = Some(num(v)?),
                        "num_blades" => {
                            blades = Some(v.parse::<u32>().map_err(|e| {
                                RotorError::Parse(format!("preamble `{line}`: {e}"))
                            })?)
                        }
                        other => {
                            return Err(RotorError::Parse(format!("unknown preamble key `{other}`")))
                        }
                    }
                    continue;
                }
                in_body = true;
            }
            body.push_str(line);
            body.push('\n');
        }
        let missing = |k: &str| RotorError::Parse(format!("missing preamble key `{k}`"));
        let tip = tip.ok_or_else(|| missing("tip_radius_m"))?;
        let hub = hub.ok_or_else(|| missing("hub_radius_m"))?;
        let blades = blades.ok_or_else(|| missing("num_blades"))?;

        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
        let headers = reader.headers().map_err(|e| RotorError::Parse(e.to_string()))?.clone();
        let expected = ["r_mid_m", "dr_m", "chord_m", "twist_deg"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(RotorError::Parse(format!(
                "geometry header must be `{}`",
                expected.join(",")
            )));
        }
        let mut segments = Vec::new();
        for (i, rec) in reader.deserialize::<(f64, f64, f64, f64)>().enumerate() {
            let (r_mid, dr, chord, twist_deg) =
                rec.map_err(|e| RotorError::Parse(format!("segment row {}: {e}", i + 1)))?;
            segments.push(Segment { r_mid, dr, chord, twist: twist_deg.to_radians() });
        }
        Self::new(hub, tip, blades, segments)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = format!(
            "tip_radius_m={:.16e}\nhub_radius_m={:.16e}\nnum_blades={}\nr_mid_m,dr_m,chord_m,twist_deg\n",
            self.tip_radius, self.hub_radius, self.num_blades
        );
        for s in &self.segments {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                s.r_mid,
                s.dr,
                s.chord,
                s.twist.to_degrees()
            ));
        }
        out
    }
}
