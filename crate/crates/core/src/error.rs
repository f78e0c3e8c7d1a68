use thiserror::Error;

#[derive(Debug, Error)]
pub enum BrandError {
    #[error("subset of size {h} cannot support a {p}-dimensional covariance (need h >= p + 1)")]
    InsufficientRows { h: usize, p: usize },

    #[error("subset covariance is singular (determinant {determinant:e})")]
    SingularSubset { determinant: f64 },

    #[error("all rows are identical; no scatter can be estimated")]
    DegenerateData,

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("class {class}: {source}")]
    Class {
        class: usize,
        #[source]
        source: Box<BrandError>,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("slice variable vector is empty")]
    EmptySlice,

    #[error("unit {unit} has no eligible mixture component under its slice variable")]
    AllSlicesEmpty { unit: usize },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<BrandError>,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid knot configuration: {0}")]
    InvalidKnots(String),

    #[error("basis matrix is rank deficient on the observation grid")]
    RankDeficientBasis,

    #[error("time grids of test curves and priors differ")]
    GridMismatch,

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: String,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Format(String),
}

impl BrandError {
    pub(crate) fn in_class(self, class: usize) -> Self {
        BrandError::Class {
            class,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        BrandError::Iteration {
            iteration,
            source: Box::new(self),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        BrandError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            BrandError::SingularSubset { .. }
            | BrandError::NotPositiveDefinite(_)
            | BrandError::AllSlicesEmpty { .. }
            | BrandError::RankDeficientBasis
            | BrandError::EmptySlice => true,
            BrandError::Class { source, .. } | BrandError::Iteration { source, .. } => {
                source.is_numerical()
            }
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, BrandError>;
