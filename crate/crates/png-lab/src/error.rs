use thiserror::Error;

/// Failures split along the CLI's exit-code contract: configuration
/// problems exit 2, everything that goes wrong during a run exits 3.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("config: {0}")]
    Config(String),
    #[error("runtime: {0}")]
    Runtime(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Dynamics(#[from] png_core::dynamics::DynamicsError),
    #[error(transparent)]
    Geometry(#[from] png_core::geometry::GeometryError),
    #[error(transparent)]
    Sampling(#[from] png_core::sampling::SamplingError),
    #[error(transparent)]
    Lpp(#[from] png_core::lpp::LppError),
    #[error(transparent)]
    Kernel(#[from] png_core::kernels::KernelError),
    #[error(transparent)]
    Stats(#[from] png_core::stats::StatsError),
}

impl LabError {
    pub fn config(msg: impl Into<String>) -> Self {
        LabError::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        LabError::Runtime(msg.into())
    }

    /// Exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            _ => 3,
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;
