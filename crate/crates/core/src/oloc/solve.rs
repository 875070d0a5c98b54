use crate::dynamics::{simulate, ControlLaw, Saturation, SimulationSettings, Trajectory};
use crate::nlp::{self, NlpSolution, SolverSettings};
use crate::rotor::{cp_curve, default_tsr_grid, TorqueTable};

use super::{transcribe, Decoded, OlocError, OlocSetup, TranscribedProblem};

/// Samples per collocation segment in the warm-start simulation and in the
/// extracted trajectory.
const SAMPLES_PER_SEGMENT: usize = 100;

#[derive(Debug)]
pub struct OlocOutcome {
    pub problem: TranscribedProblem,
    pub solution: NlpSolution,
    pub decoded: Decoded,
    /// Simpson energy of the transcription, J
    pub energy: f64,
    pub trajectory: Trajectory,
}

impl OlocOutcome {
    pub fn converged(&self) -> bool {
        self.solution.converged()
    }
}

/// Extraction step that divides every segment evenly.
pub fn sample_step(problem: &TranscribedProblem) -> f64 {
    problem.grid().segment_length() / SAMPLES_PER_SEGMENT as f64
}

/// Warm start from the `K* w^2` law of the starting geometry, saturated at
/// `u_max` when one is set.
pub fn warm_start(problem: &TranscribedProblem) -> Result<Vec<f64>, OlocError> {
    let setup = problem.setup();
    let curve = cp_curve(&setup.geometry, &setup.polar, &setup.fluid, &default_tsr_grid())?;
    let mut law = ControlLaw::quadratic(curve.optimal_quadratic_gain(&setup.geometry, &setup.fluid));
    if let Some(u) = setup.u_max {
        law = law.saturated(Saturation::new(u));
    }
    let table = TorqueTable::new(setup.geometry.clone(), setup.polar.clone(), setup.fluid);
    let inertia = crate::rotor::rotor_inertia(&setup.geometry, &setup.material);
    let mut settings = SimulationSettings::new(setup.grid.horizon, sample_step(problem), inertia);
    settings.initial_omega = setup.initial_omega;
    let sim = simulate(&table, &law, &setup.profile, &settings, None)?;
    problem.encode_trajectory(&sim, &setup.geometry)
}

/// Transcribes and solves, warm-started from `x0` or from [`warm_start`].
pub fn solve_oloc(
    setup: OlocSetup,
    settings: &SolverSettings,
    x0: Option<Vec<f64>>,
) -> Result<OlocOutcome, OlocError> {
    let problem = transcribe(setup)?;
    let x0 = match x0 {
        Some(x) => x,
        None => warm_start(&problem)?,
    };
    let solution = nlp::solve(&problem, &x0, settings)?;
    let decoded = problem.decode(&solution.x)?;
    let energy = problem.energy(&solution.x)?;
    let trajectory = problem.extract_trajectory(&solution.x, sample_step(&problem))?;
    Ok(OlocOutcome { problem, solution, decoded, energy, trajectory })
}
