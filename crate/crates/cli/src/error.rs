use hkt_ccd::ccd::CcdError;
use hkt_ccd::dynamics::DynamicsError;
use hkt_ccd::oloc::OlocError;
use hkt_ccd::rotor::RotorError;
use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    /// invalid or inconsistent configuration
    #[error("{0}")]
    Config(String),
    /// optimizer or simulator failure, or an infeasible result
    #[error("{0}")]
    Solver(String),
    /// missing input or unwritable output
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Solver(_) => EXIT_SOLVER,
            Self::Io(_) => EXIT_IO,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Solver(_) => "solver",
            Self::Io(_) => "io",
        }
    }

    /// One-line JSON record `{"error":..,"exit_code":..,"message":..}`.
    pub fn record(&self) -> String {
        serde_json::json!({ "error": self.kind(), "exit_code": self.exit_code(), "message": self.to_string() })
            .to_string()
    }
}

impl From<CcdError> for CliError {
    fn from(e: CcdError) -> Self {
        match &e {
            CcdError::Config(_) => Self::Config(e.to_string()),
            CcdError::Rotor(r) => Self::from(r.clone()),
            CcdError::Dynamics(d) => Self::from(d.clone()),
            CcdError::Oloc(o) => Self::from(o.clone()),
            CcdError::Nlp(_) => Self::Solver(e.to_string()),
        }
    }
}

impl From<RotorError> for CliError {
    fn from(e: RotorError) -> Self {
        match e {
            RotorError::InvalidGeometry(_) | RotorError::InvalidPolar(_) | RotorError::Parse(_) => {
                Self::Config(e.to_string())
            }
            RotorError::Io(_) => Self::Io(e.to_string()),
            _ => Self::Solver(e.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::InvalidSettings(_) => Self::Config(e.to_string()),
            _ => Self::Solver(e.to_string()),
        }
    }
}

impl From<OlocError> for CliError {
    fn from(e: OlocError) -> Self {
        match e {
            OlocError::Config(_) => Self::Config(e.to_string()),
            OlocError::Rotor(r) => Self::from(r),
            OlocError::Dynamics(d) => Self::from(d),
            _ => Self::Solver(e.to_string()),
        }
    }
}
