use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("truncation exceeded: spin {needed} needed, model holds {available}")]
    TruncationExceeded { needed: u32, available: u32 },
    #[error("unknown generator: {0}")]
    UnknownGenerator(String),
    #[error("scalar not invertible in the exact ring: {0}")]
    NotInvertible(String),
    #[error("singular solve: {0}")]
    SingularSolve(String),
    #[error("quadrature under-resolved: Gram drift {drift:.3e} exceeds {tol:.3e}")]
    QuadratureUnderResolved { drift: f64, tol: f64 },
    #[error("spectral gap failure at grid point {point}: {detail}")]
    SpectralGap { point: usize, detail: String },
    #[error("non-invertible lift at grid point {0}")]
    NonInvertibleLift(usize),
    #[error("input is not invertible")]
    NotInvertibleMatrix,
    #[error("determinant {0} is not 1")]
    NotUnimodular(String),
    #[error("window mismatch: {0}")]
    WindowMismatch(String),
    #[error("zero-rank corner at parameter index {0}")]
    ZeroRankCorner(usize),
    #[error("unknown corner type: {0}")]
    UnknownCornerType(String),
    #[error("section value at grid point {point} is outside its fibre: {detail}")]
    NotInFibre { point: usize, detail: String },
    #[error("deformation-square axiom violated: {0}")]
    AxiomViolation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
