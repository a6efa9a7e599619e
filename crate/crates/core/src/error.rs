use alloc::string::String;
use core::fmt;

/// Errors raised by the numeric kernel, the model and the training loop.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not agree.
    DimensionMismatch {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    /// A matrix that must be square is not.
    NonSquare { rows: usize, cols: usize },
    /// A matrix that must be symmetric is not (largest asymmetry given).
    NotSymmetric { max_asymmetry: f64 },
    /// Jacobi sweeps exceeded the limit.
    NoConvergence { sweeps: usize, off_norm: f64 },
    /// Some eigenvalue sum `λᵢ + μⱼ` of a Sylvester pencil is not positive.
    SingularPencil { min_sum: f64 },
    /// A graph vertex vector has zero norm, so its cosine is undefined.
    ZeroVector { vertex: usize },
    /// Neighbor count must satisfy `1 <= k < vertices`.
    KTooLarge { k: usize, vertices: usize },
    /// `backward` was called on a non-scalar node.
    NonScalarLoss { rows: usize, cols: usize },
    /// A class label is outside `[0, classes)`.
    LabelOutOfRange { label: usize, classes: usize },
    /// A sequence with zero frames was supplied.
    EmptySequence,
    /// A batch operation received no samples.
    EmptyBatch,
    /// Input data contains NaN or infinity.
    NonFinite { what: &'static str },
    /// Training was asked to run on an empty training set.
    EmptyTrainingSet,
    /// The training loss became NaN or infinite.
    NonFiniteLoss { epoch: usize, batch: usize, diagnostics: String },
    /// A configuration value violates its invariant.
    InvalidConfig(String),
    /// An attribute value lies outside the range of its kind.
    OutOfRangeAttribute { class: usize, attribute: usize, value: f64 },
    /// A gesture class has no attribute vector.
    MissingClass { class: usize },
    /// A gesture class id is not part of the partition.
    UnknownClassId { class: usize },
    /// Seen and unseen sets overlap, or the emotion map is incomplete.
    InvalidPartition(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(op: &'static str, expected: (usize, usize), found: (usize, usize)) -> Self {
        Error::DimensionMismatch { op, expected, found }
    }

    /// True for failures of the numeric kernel (as opposed to bad input data).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::SingularPencil { .. }
                | Error::NonFiniteLoss { .. }
                | Error::NotSymmetric { .. }
        )
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { op, expected, found } => write!(
                f,
                "{op}: dimension mismatch, expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::NonSquare { rows, cols } => write!(f, "matrix is not square ({rows}x{cols})"),
            Error::NotSymmetric { max_asymmetry } => {
                write!(f, "matrix is not symmetric (max |a - a^T| = {max_asymmetry:e})")
            }
            Error::NoConvergence { sweeps, off_norm } => write!(
                f,
                "Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})"
            ),
            Error::SingularPencil { min_sum } => {
                write!(f, "singular Sylvester pencil (min eigenvalue sum {min_sum:e})")
            }
            Error::ZeroVector { vertex } => {
                write!(f, "vertex {vertex} has a zero vector; cosine similarity undefined")
            }
            Error::KTooLarge { k, vertices } => {
                write!(f, "neighbor count {k} invalid for {vertices} vertices")
            }
            Error::NonScalarLoss { rows, cols } => {
                write!(f, "loss must be a 1x1 scalar, got {rows}x{cols}")
            }
            Error::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            Error::EmptySequence => f.write_str("sequence has no frames"),
            Error::EmptyBatch => f.write_str("batch has no samples"),
            Error::NonFinite { what } => write!(f, "{what} contains non-finite values"),
            Error::EmptyTrainingSet => f.write_str("training set is empty"),
            Error::NonFiniteLoss { epoch, batch, diagnostics } => write!(
                f,
                "non-finite loss at epoch {epoch}, batch {batch}: {diagnostics}"
            ),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::OutOfRangeAttribute { class, attribute, value } => {
                write!(f, "class {class}: attribute {attribute} value {value} out of range")
            }
            Error::MissingClass { class } => write!(f, "class {class} has no attribute vector"),
            Error::UnknownClassId { class } => write!(f, "class id {class} is not in the partition"),
            Error::InvalidPartition(msg) => write!(f, "invalid partition: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
