use thiserror::Error;

/// Errors raised by the library.
///
/// Each variant corresponds to a distinct failure mode that callers are
/// expected to react to differently; `name()` gives a stable identifier
/// for command-line reporting.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The real part is too large to evaluate the exponential in double
    /// precision; the point should be treated as escaped.
    #[error("overflow guard: |re| = {re} exceeds the evaluation limit")]
    OverflowGuard { re: f64 },

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The map is not supported by this operation, or its parameters are invalid.
    #[error("unsupported map: {0}")]
    UnsupportedMap(String),

    /// The target of an inverse branch lies on (or within the axis band of)
    /// the slit removed from the branch's codomain.
    #[error("branch domain error at {re}{im:+}i{}", depth.map(|d| format!(" (pullback depth {d})")).unwrap_or_default())]
    BranchDomain { re: f64, im: f64, depth: Option<usize> },

    /// An inverse branch failed its forward round-trip check.
    #[error("verification error: residual {residual:e} for target {re}{im:+}i")]
    Verification { re: f64, im: f64, residual: f64 },

    /// A regression could not be formed from the supplied counts.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// A removal step would exceed the length of its host interval.
    #[error("infeasible removal at generation {generation}")]
    InfeasibleRemoval { generation: usize },

    /// A construction schedule does not leave room for disjoint pieces.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// The explicit cover would exceed the exact-integer range or the work budget.
    #[error("cover too large: {0}")]
    CoverTooLarge(String),
}

impl Error {
    /// Stable name of the error kind, used in CLI diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::OverflowGuard { .. } => "OverflowGuard",
            Error::Domain(_) => "DomainError",
            Error::UnsupportedMap(_) => "UnsupportedMap",
            Error::BranchDomain { .. } => "BranchDomainError",
            Error::Verification { .. } => "VerificationError",
            Error::DegenerateFit(_) => "DegenerateFit",
            Error::InfeasibleRemoval { .. } => "InfeasibleRemoval",
            Error::Geometry(_) => "GeometryError",
            Error::CoverTooLarge(_) => "CoverTooLarge",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
