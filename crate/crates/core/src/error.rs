use thiserror::Error;

/// Errors raised by the model. Each variant names the module that produced it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("density: {0}")]
    DensityStructure(String),

    #[error("density: validation failed ({failed})")]
    DensityInvalid { failed: String },

    #[error("gammamap: {0}")]
    Degenerate(String),

    #[error("gammamap: {0}")]
    MapParameter(String),

    #[error("{module}: non-finite input {value}")]
    NonFinite { module: &'static str, value: f64 },

    #[error("{module}: {value} outside the domain {domain}")]
    Domain {
        module: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("fisher: information is singular at theta = {0}")]
    Singular(f64),

    #[error("engine: {0}")]
    Settings(String),

    #[error("angle: cannot parse {0:?}")]
    AngleParse(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short name of the module the error belongs to.
    pub fn module(&self) -> &'static str {
        match self {
            Error::DensityStructure(_) | Error::DensityInvalid { .. } => "density",
            Error::Degenerate(_) | Error::MapParameter(_) => "gammamap",
            Error::NonFinite { module, .. } | Error::Domain { module, .. } => module,
            Error::Singular(_) => "fisher",
            Error::Settings(_) => "engine",
            Error::AngleParse(_) => "angle",
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
