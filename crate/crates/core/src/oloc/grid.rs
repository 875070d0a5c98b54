use serde::{Deserialize, Serialize};

use super::OlocError;

/// Uniform mesh of `n_segments` three-node Lobatto segments on `[0, horizon]`.
/// Nodes sit at segment ends and midpoints; ends are shared between
/// neighbours, giving `2 n + 1` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollocationGrid {
    pub horizon: f64,
    pub n_segments: usize,
}

impl CollocationGrid {
    pub fn new(horizon: f64, n_segments: usize) -> Result<Self, OlocError> {
        if !(horizon > 0.0) || !horizon.is_finite() || n_segments == 0 {
            return Err(OlocError::Config(format!(
                "grid needs horizon > 0 and >= 1 segment (got {horizon}, {n_segments})"
            )));
        }
        Ok(Self { horizon, n_segments })
    }

    pub fn segment_length(&self) -> f64 {
        self.horizon / self.n_segments as f64
    }

    pub fn num_nodes(&self) -> usize {
        2 * self.n_segments + 1
    }

    /// Time of node `j` (even `j` are segment boundaries).
    pub fn node_time(&self, j: usize) -> f64 {
        if j == self.num_nodes() - 1 {
            self.horizon
        } else {
            j as f64 * 0.5 * self.segment_length()
        }
    }

    pub fn boundary_time(&self, k: usize) -> f64 {
        self.node_time(2 * k)
    }

    pub fn node_times(&self) -> Vec<f64> {
        (0..self.num_nodes()).map(|j| self.node_time(j)).collect()
    }

    /// Segment containing `t`, clamped to the mesh.
    pub fn segment_of(&self, t: f64) -> usize {
        let k = (t / self.segment_length()).floor();
        (k.max(0.0) as usize).min(self.n_segments - 1)
    }
}

/// Midpoint value of the cubic Hermite interpolant through `(w0, f0)` and
/// `(w1, f1)` over a segment of length `h`.
pub fn hermite_midpoint(h: f64, w0: f64, w1: f64, f0: f64, f1: f64) -> f64 {
    0.5 * (w0 + w1) + h / 8.0 * (f0 - f1)
}

/// Simpson defect `w1 - w0 - h/6 (f0 + 4 fm + f1)`.
pub fn simpson_defect(h: f64, w0: f64, w1: f64, f0: f64, fm: f64, f1: f64) -> f64 {
    w1 - w0 - h / 6.0 * (f0 + 4.0 * fm + f1)
}

/// Cubic Hermite state at local coordinate `s` in [0, 1].
pub fn hermite_state(h: f64, w0: f64, w1: f64, f0: f64, f1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * w0
        + (s3 - 2.0 * s2 + s) * h * f0
        + (-2.0 * s3 + 3.0 * s2) * w1
        + (s3 - s2) * h * f1
}
