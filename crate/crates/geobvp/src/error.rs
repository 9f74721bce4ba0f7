//! Error taxonomy shared by every solver stage.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Metric matrix at a chart point is numerically degenerate.
    #[error("metric is singular at {point:?} (|eig|min/|eig|max = {ratio:.3e})")]
    SingularMetric { point: Vec<f64>, ratio: f64 },

    /// Metric eigenvalue signs do not match the declared index.
    #[error("metric index mismatch at {point:?}: expected {expected} negative eigenvalues, found {found}")]
    IndexMismatch {
        point: Vec<f64>,
        expected: usize,
        found: usize,
    },

    /// Trajectory left the declared valid chart region.
    #[error("trajectory left the chart domain at t = {t:.6}, x = {point:?}")]
    DomainExit { t: f64, point: Vec<f64> },

    /// Adaptive step size underflowed before reaching the end of the interval.
    #[error("integrator stalled at t = {t:.6} (step {step:.3e})")]
    IntegratorStall { t: f64, step: f64 },

    /// Boundary-condition Jacobian lost column rank.
    #[error("boundary embedding is not an immersion at u = {u:?} (rank {rank} < {expected})")]
    ImmersionFailure {
        u: Vec<f64>,
        rank: usize,
        expected: usize,
    },

    /// Vector handed to the second fundamental form is not normal to P.
    #[error("direction is not normal to the boundary condition (max tangent pairing {pairing:.3e})")]
    NotNormal { pairing: f64 },

    /// Induced metric on P degenerates; P is not a usable boundary condition.
    #[error("boundary condition is degenerate (gram conditioning {conditioning:.3e} at u = {u:?})")]
    DegenerateBoundary { u: Vec<f64>, conditioning: f64 },

    /// Newton iteration failed to converge.
    #[error("no convergence after {iters} Newton iterations (residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },

    /// Shooting Jacobian is rank deficient and no progress can be made.
    #[error("singular shooting Jacobian (smallest singular value {sigma_min:.3e})")]
    SingularJacobian { sigma_min: f64 },

    /// Vector field is a multiple of the tangent at every knot.
    #[error("field is everywhere parallel to the tangent")]
    EverywhereParallel,

    /// Periodic geodesic whose kernel shift-sums vanish identically.
    #[error("geodesic is strongly degenerate: all shift-sums of the kernel vanish")]
    StronglyDegenerate,

    /// No perturbation interval clear of intersections at the mesh scale.
    #[error("no admissible perturbation interval (largest clear gap {gap:.3e})")]
    NoInterval { gap: f64 },

    /// Perturbation tube cannot avoid the rest of the curve.
    #[error("perturbation tube overlaps the curve outside its interval (radius floor {radius:.3e})")]
    TubeOverlap { radius: f64 },

    /// Transversality pairing is not safely positive.
    #[error("transversality certificate failed (pairing {value:.3e}, error bound {bound:.3e})")]
    CertificateFailed { value: f64, bound: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
