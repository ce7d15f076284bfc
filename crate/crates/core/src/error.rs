use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("unknown shape kind `{0}`")]
    UnknownShape(String),

    #[error("unknown design method `{0}`")]
    UnknownDesigner(String),

    #[error("degenerate design: {0}")]
    DegenerateShape(String),

    #[error("azimuthal FOV {fov_phi} exceeds polar FOV {fov_theta_equator} at the equator")]
    FovConstraintViolated { fov_phi: f64, fov_theta_equator: f64 },

    #[error("radial spacing {dkr} exceeds the alias-free bound {limit}")]
    SpacingTooCoarse { dkr: f64, limit: f64 },

    #[error("sample at |k| = {k} lies outside the representable band (0.5 cycles/px)")]
    OutOfBand { k: f64 },

    #[error("no aliasing ridge found along direction {psi} rad")]
    RidgeNotFound { psi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag for the error variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidShape(_) => "InvalidShape",
            Error::UnknownShape(_) => "UnknownShape",
            Error::UnknownDesigner(_) => "UnknownDesigner",
            Error::DegenerateShape(_) => "DegenerateShape",
            Error::FovConstraintViolated { .. } => "FovConstraintViolated",
            Error::SpacingTooCoarse { .. } => "SpacingTooCoarse",
            Error::OutOfBand { .. } => "OutOfBand",
            Error::RidgeNotFound { .. } => "RidgeNotFound",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }

    /// True for errors caused by malformed input rather than by the design itself.
    pub fn is_argument_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidShape(_)
                | Error::UnknownShape(_)
                | Error::UnknownDesigner(_)
                | Error::InvalidArgument(_)
                | Error::Json(_)
        )
    }
}
