use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not skew-symmetric (residual {residual:.3e})")]
    NonSkewInput { residual: f64 },

    #[error("attitude error too close to 180 degrees (trace {trace:.9})")]
    NearSingularAttitude { trace: f64 },

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("infeasible envelope on axis {axis}: rho0 - |xi0| - margin = {slack:.6}")]
    InfeasibleEnvelope { axis: usize, slack: f64 },

    #[error("non-finite state at t = {time:.6} s ({what})")]
    NonFiniteState { time: f64, what: &'static str },

    #[error("thrust vector norm {0:.3e} is too small to define a desired attitude")]
    DegenerateThrust(f64),

    #[error("desired yaw direction is parallel to the thrust axis")]
    YawAlignmentSingularity,

    #[error("not enough desired-attitude history for differencing ({have} of {need})")]
    InsufficientHistory { have: usize, need: usize },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable identifier used in CLI JSON errors and FFI codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonSkewInput { .. } => "NonSkewInput",
            Error::NearSingularAttitude { .. } => "NearSingularAttitude",
            Error::NegativeTime(_) => "NegativeTime",
            Error::InfeasibleEnvelope { .. } => "InfeasibleEnvelope",
            Error::NonFiniteState { .. } => "NonFiniteState",
            Error::DegenerateThrust(_) => "DegenerateThrust",
            Error::YawAlignmentSingularity => "YawAlignmentSingularity",
            Error::InsufficientHistory { .. } => "InsufficientHistory",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
