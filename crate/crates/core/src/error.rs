use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate element {element}: jacobian determinant {det_j:e}")]
    DegenerateElement { element: usize, det_j: f64 },
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("entry ({row}, {col}) is not in the sparsity pattern")]
    NotInPattern { row: usize, col: usize },
    #[error("singular system at pivot {pivot}")]
    SingularSystem { pivot: usize },
    #[error("linear solve did not converge: relative residual {residual:e}")]
    ConvergenceFailure { residual: f64 },
    #[error("incompatible sources: integral of the mass source is {integral:e} with no pressure boundary")]
    Compatibility { integral: f64 },
    #[error("non-finite value in field `{field}` at node {node} (step {step})")]
    NonFinite { field: &'static str, node: usize, step: usize },
    #[error("invalid configuration: {}", .0.join(", "))]
    Validation(alloc::vec::Vec<String>),
}

impl Error {
    /// Attaches the element index to a degenerate-element error.
    pub(crate) fn at_element(self, element: usize) -> Self {
        match self {
            Error::DegenerateElement { det_j, .. } => Error::DegenerateElement { element, det_j },
            other => other,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
