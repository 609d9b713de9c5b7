use thiserror::Error;

/// Errors raised by the geometric kernels, integrators and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (defect {defect:.3e})")]
    NonSkewInput { defect: f64 },

    #[error("inertia matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("operation requires a bi-invariant metric (J = c I)")]
    NotBiInvariant,

    #[error("rotation is antipodal or too close to it (angle {angle:.6} rad)")]
    AntipodalRotation { angle: f64 },

    #[error("matrix is degenerate (smallest singular value {sigma_min:.3e})")]
    DegenerateMatrix { sigma_min: f64 },

    #[error("matrix is not a rotation (orthonormality defect {defect:.3e}, det {det:.6})")]
    NotRotation { defect: f64, det: f64 },

    #[error("advected parameter kind does not match the system action")]
    ParameterKindMismatch,

    #[error("algebra element is not horizontal (vertical defect {defect:.3e})")]
    NotHorizontal { defect: f64 },

    #[error("vector is not tangent to the sphere (normal defect {defect:.3e})")]
    NotTangent { defect: f64 },

    #[error("vector is not of unit length (norm {norm:.12})")]
    NotUnit { norm: f64 },

    #[error("invalid reductive split: {0}")]
    InvalidSplit(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("integration became non-finite at t = {t}")]
    StepUnstable { t: f64 },

    #[error("shooting did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("boundary target is antipodal to the start")]
    AntipodalTarget,
}

pub type Result<T> = std::result::Result<T, Error>;
