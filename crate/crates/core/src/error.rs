//! Error type shared by all modules.

use num_complex::Complex64;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Gradient or α₁ requested on a potential that is not C².
    #[error("potential is not differentiable (smoothness class C² not satisfied)")]
    NotDifferentiable,

    /// Adaptive quadrature refinement still moves the result beyond tolerance.
    #[error("quadrature not converged: refinement changed result by {delta:.3e} (tol {tol:.3e})")]
    QuadratureNotConverged { delta: f64, tol: f64 },

    /// Requested grid exceeds the configured node budget.
    #[error("resolution too large: {requested} nodes exceeds budget of {budget}")]
    ResolutionTooLarge { requested: usize, budget: usize },

    /// Dense eigenvalue decomposition failed to converge.
    #[error("eigenvalue solve failed")]
    EigenSolveFailed,

    /// I + Q₀(k) is numerically singular: k is a zero of D (bound state or resonance).
    #[error("I + Q₀(k) singular at k = {k}: determinant zero within tolerance")]
    SingularAtEigenvalue { k: Complex64 },

    /// Branch continuation could not resolve a jump even at the minimum step.
    #[error("branch jump detected near k = {k} (|Δ log D| = {jump:.3e} at minimum step)")]
    BranchJumpDetected { k: Complex64, jump: f64 },

    /// Blaschke evaluation at a pole k = −i√λ_j.
    #[error("Blaschke product pole hit at k = {k}")]
    PoleHit { k: Complex64 },

    /// Hadamard fit requires D(0) ≠ 0.
    #[error("D(0) vanishes within tolerance; Hadamard normalization undefined")]
    ZeroAtOrigin,

    /// Search region extends below the conditioning depth κ_max.
    #[error("search depth {requested:.3} exceeds conditioning limit κ_max = {kappa_max:.3}")]
    DepthLimitExceeded { requested: f64, kappa_max: f64 },

    /// Contour nudging failed to move the boundary away from a zero of D.
    #[error("contour boundary still within {residual:.3e} of a zero after {nudges} nudges")]
    BoundaryNearZero { residual: f64, nudges: usize },

    /// Fitted integrand tail did not reach the requested accuracy.
    #[error("integrand tail not converged: estimate {estimate:.3e} exceeds tolerance {tol:.3e}")]
    TailNotConverged { estimate: f64, tol: f64 },

    /// Asymptotic coefficient fit is unstable (ill-conditioned or non-decaying residual).
    #[error("asymptotic fit unstable: {0}")]
    FitUnstable(String),

    /// Lattice box cannot resolve the requested test function support.
    #[error("lattice box too small: {0}")]
    BoxTooSmall(String),

    /// Grid-file parsing / I/O problems.
    #[error("grid file error: {0}")]
    GridFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
