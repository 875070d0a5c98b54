//! Direct collocation of the open-loop energy maximization problem.

mod grid;
mod problem;
mod solve;

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::nlp::NlpError;
use crate::rotor::RotorError;

pub use grid::{hermite_midpoint, hermite_state, simpson_defect, CollocationGrid};
pub use problem::{
    transcribe, Decoded, GeometryBox, Layout, OlocSetup, TranscribedProblem, CHORD_SCALE,
    DEFAULT_U_SCALE, OMEGA_SCALE, TWIST_SCALE,
};
pub use solve::{sample_step, solve_oloc, warm_start, OlocOutcome};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OlocError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("decision vector has {got} entries, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Rotor(#[from] RotorError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Nlp(#[from] NlpError),
}
