use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid source: {0}")]
    InvalidSource(String),

    #[error("CFL condition violated: {0}")]
    Cfl(String),

    #[error("under-resolved discretization: {0}")]
    UnderResolved(String),

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("point ({x1}, {x2}) lies outside the domain")]
    OutsideDomain { x1: f64, x2: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("component limit of {0} exceeded while building the surrogate")]
    TooManyComponents(usize),

    #[error("no stored reference data at t = {0}")]
    NoReferenceData(f64),

    #[error("scene: {0}")]
    Scene(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
