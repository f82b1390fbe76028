use thiserror::Error;

/// Errors raised by the numerical pipelines.
///
/// Input errors map to exit code 2 in the CLI; everything else is a
/// numerical failure and maps to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("mask is disconnected ({components} components)")]
    DisconnectedMask { components: usize },

    #[error("iterative solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("period mismatch: closed form has period {period:.3e} around a hole of the mask")]
    PeriodMismatch { period: f64 },

    #[error("path leaves the active mask at ({x:.6}, {y:.6})")]
    PathExitsMask { x: f64, y: f64 },

    #[error("chart is degenerate: Jacobian never exceeds {floor:.3e}")]
    DegenerateChart { floor: f64 },

    #[error("coefficient matrix lost ellipticity: eigenvalue {eigenvalue:.3e} below {floor:.3e}")]
    Ellipticity { eigenvalue: f64, floor: f64 },

    #[error("Hopf floor violated: min |grad v| on the boundary is {min_grad:.3e} (window too large)")]
    WindowTooLarge { min_grad: f64 },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn is_input(&self) -> bool {
        matches!(self, Error::Input(_) | Error::DisconnectedMask { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
