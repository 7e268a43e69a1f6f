use thiserror::Error;

/// Errors raised by model construction and the algebraic operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("elements belong to different models")]
    ModelMismatch,

    #[error("invalid model descriptor: {0}")]
    InvalidDescriptor(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("element is singular (smallest singular value {min_singular_value:.3e})")]
    SingularElement { min_singular_value: f64 },

    #[error("element is not von Neumann regular (singular value {value:.3e} inside the zero band)")]
    NotRegular { value: f64 },

    #[error("element is not a tripotent (residual {residual:.3e})")]
    NotTripotent { residual: f64 },

    #[error("element is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("element is not self-adjoint (residual {residual:.3e})")]
    NotSelfAdjoint { residual: f64 },

    #[error("unitaries are too far apart: distance {distance:.6} exceeds {limit:.6}")]
    DistanceTooLarge { distance: f64, limit: f64 },

    #[error("spectrum approaches -1 within {gap:.3e}; principal logarithm is ill-defined")]
    LogBranch { gap: f64 },

    #[error("phase jump {jump:.4} rad between consecutive grid points is too large")]
    PhaseJumpTooLarge { jump: f64 },

    #[error("operation requires a circle-function model")]
    NotCircleModel,

    #[error("unitary has nonzero winding number {winding}")]
    NonZeroWinding { winding: i64 },

    #[error("function is undefined at spectrum point {point:.6e}")]
    UndefinedOnSpectrum { point: f64 },

    #[error("one-parameter family violates U_u(t)(u(s)) = u(2t+s) (residual {residual:.3e})")]
    FamilyInvariantViolated { residual: f64 },

    #[error("derivative did not converge (reconstruction residual {residual:.3e})")]
    NonConvergent { residual: f64 },

    #[error("isometry is not unital (residual {residual:.3e})")]
    NotUnital { residual: f64 },

    #[error("k(1) is not a central symmetry: {0}")]
    NotCentralSymmetry(String),

    #[error("map is not a Jordan *-isomorphism: {0}")]
    NotJordanIsomorphism(String),

    #[error("structured isometry invariant violated: {0}")]
    InvalidIsometry(String),

    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("the unitary set of this model is connected")]
    ConnectedUnitarySet,

    #[error("could not certify membership: {0}")]
    Inconclusive(String),
}

pub type Result<T> = std::result::Result<T, Error>;
