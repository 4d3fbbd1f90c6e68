use thiserror::Error;

#[derive(Debug, Error)]
pub enum DwmsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("potential tail too large at r_asym = {r_asym}: |dV|·r² = {tail:e} exceeds {threshold:e}")]
    TailTooLarge { r_asym: f64, tail: f64, threshold: f64 },
    #[error("radius {r} outside sampled range [{lo}, {hi}]")]
    OutOfRange { r: f64, lo: f64, hi: f64 },
    #[error("singular matrix in {context} (condition estimate {cond:e})")]
    Singular { context: String, cond: f64 },
    #[error("quadrature did not converge in {context}: last change {delta:e}")]
    Quadrature { context: String, delta: f64 },
    #[error("continuation failed at center {center}: {reason}")]
    Continuation { center: usize, reason: String },
    #[error("evaluation point at a singular site: {0}")]
    SingularPoint(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DwmsError>;
