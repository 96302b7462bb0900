//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors are reserved for violated preconditions and numerical breakdowns.
/// Negative mathematical verdicts (a set failing to be a corner, a map
/// failing complete positivity, automorphisms failing inner conjugacy) are
/// ordinary return values carrying a witness, not errors.
#[derive(Clone, Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("matrix is not hermitian: defect {defect:.3e} exceeds {tol:.3e}")]
    NotHermitian { defect: f64, tol: f64 },

    #[error("eigendecomposition failed to converge")]
    EigenFailure,

    #[error("not a member of the operator space: residual {residual:.3e} exceeds {tol:.3e}")]
    NotMember { residual: f64, tol: f64 },

    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),

    #[error("operator space is not closed under {operation}: residual {residual:.3e}")]
    NotClosed { operation: &'static str, residual: f64 },

    #[error("state is not faithful: Gram rank {rank} < dimension {dim} (null direction {witness})")]
    NotFaithful {
        rank: usize,
        dim: usize,
        witness: String,
    },

    #[error("state violates {property}: defect {defect:.3e}")]
    InvalidState { property: &'static str, defect: f64 },

    #[error("not an algebra element: {0}")]
    NotInAlgebra(String),

    #[error("not a *-representation: {kind} defect {defect:.3e}")]
    NotRepresentation { kind: &'static str, defect: f64 },

    #[error("not an algebra automorphism: {kind} defect {defect:.3e}")]
    NotAutomorphism { kind: &'static str, defect: f64 },

    #[error("representation is not faithful: block {block} has multiplicity 0")]
    NotFaithfulRepresentation { block: usize },

    #[error("state is not invariant under the automorphism: defect {defect:.3e}")]
    NotInvariantState { defect: f64 },

    #[error("generic-element retry budget exhausted after {attempts} attempts: {context}")]
    RetryBudgetExhausted { attempts: usize, context: String },

    #[error("not a projection: defect {defect:.3e}")]
    NotProjection { defect: f64 },

    #[error("not a partial isometry: defect {defect:.3e}")]
    NotPartialIsometry { defect: f64 },

    #[error("operator does not commute with {with}: defect {defect:.3e}")]
    NotInCommutant { with: &'static str, defect: f64 },

    #[error("not a submodule: E1·E*·E escapes E1 at basis triple ({i},{j},{k}), residual {residual:.3e}")]
    NotSubmodule {
        i: usize,
        j: usize,
        k: usize,
        residual: f64,
    },

    #[error("functional is not module-linear: basis pair ({i},{j}) has defect {defect:.3e}")]
    NotModuleLinear { i: usize, j: usize, defect: f64 },

    #[error("{which} generators span dimension {got}, module has dimension {expected}")]
    NotGenerating {
        which: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("{which} module is not standard")]
    NotStandard { which: &'static str },

    #[error("algebras differ: {0}")]
    AlgebraMismatch(String),

    #[error("map does not preserve adjoints: defect {defect:.3e}")]
    NotAdjointPreserving { defect: f64 },

    #[error("map is not positive: {0}")]
    NotPositive(String),

    #[error("degenerate dilation: the central support of the map is zero")]
    DegenerateDilation,

    #[error("internal consistency failure in {context}: residual {residual:.3e}")]
    Inconsistency { context: String, residual: f64 },
}

impl Error {
    pub(crate) fn shape(expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            expected: expected.into(),
            got: got.into(),
        }
    }

    pub(crate) fn inconsistency(context: impl Into<String>, residual: f64) -> Self {
        Error::Inconsistency {
            context: context.into(),
            residual,
        }
    }

    /// True for errors that signal a broken internal invariant rather than a
    /// bad input; the CLI maps these to a dedicated exit status.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            Error::Inconsistency { .. } | Error::RetryBudgetExhausted { .. } | Error::EigenFailure
        )
    }
}
