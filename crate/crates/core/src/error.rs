use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("{op}: input is not positive definite (eigenvalue {eigenvalue:.6e} at index {index})")]
    NotPositiveDefinite { op: &'static str, index: usize, eigenvalue: f64 },

    #[error("cholesky: non-positive pivot {value:.6e} at index {index}")]
    CholeskyPivot { index: usize, value: f64 },

    #[error("symmetric eigensolver did not converge (residual {residual:.3e})")]
    EigenNotConverged { residual: f64 },

    #[error("matrix is not a rotation (orthogonality residual {orth:.3e}, det {det:.6})")]
    NotRotation { orth: f64, det: f64 },

    #[error("matrix is not skew-symmetric (residual {residual:.3e})")]
    NotSkew { residual: f64 },

    #[error("parameter domain: {0}")]
    ParameterDomain(String),

    #[error("degenerate hyperplane: tangent parameter has zero norm")]
    DegenerateHyperplane,

    #[error("parallel transport under {family} is only available from the identity")]
    UnsupportedOrigin { family: &'static str },

    #[error("rotation angle {angle:.9} is within {eps:e} of pi; the logarithm branch is ambiguous, perturb the input")]
    NearPiBranch { angle: f64, eps: f64 },

    #[error("rotation axis undefined at angle {angle:.9}")]
    DegenerateAngle { angle: f64 },

    #[error("rotation logarithm did not converge (residual {residual:.3e})")]
    LogNotConverged { residual: f64 },

    #[error("optimizer diverged: slot {slot} produced non-finite values")]
    Divergence { slot: String },

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
}

pub(crate) fn shape_err(expected: impl ToString, got: impl ToString) -> Error {
    Error::Shape { expected: expected.to_string(), got: got.to_string() }
}
