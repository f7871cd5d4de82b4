//! Spectral analysis of the Schrödinger operator −Δ + V in L²(R³) through its
//! modified Fredholm determinant.
//!
//! The central object is the Birman–Schwinger operator
//! Q₀(k) = |V|^{1/2} (−Δ − k²)^{−1} Ṽ^{1/2}, a Hilbert–Schmidt integral
//! operator with kernel |V(x)|^{1/2} e^{ik|x−y|}/(4π|x−y|) Ṽ^{1/2}(y), and the
//! regularized determinant
//!
//!     D(k) = det[(I + Q₀(k)) e^{−Q₀(k)}] = Π (1 + μ_j) e^{−μ_j},
//!
//! whose zeros in the closed upper half-plane are the bound-state momenta
//! i√λ_j and whose zeros in the lower half-plane are the resonances of H.
//! On top of D the crate evaluates the scattering determinant and phase,
//! high-energy trace formulas, a Dirichlet-integral identity, the Hadamard
//! factorization over resonances, and the Breit–Wigner expansion of the phase
//! derivative, each checked against independent oracles (radial shooting,
//! the s-wave Jost condition, and the autocorrelation form of Tr Q₀²).
//!
//! Module map:
//! - [`potential`]: potential models, gradients, moment integrals α₋₁, α₀, α₁
//! - [`discretize`]: quadrature grids and dense Nyström matrices for Q₀, Q₀′, Q
//! - [`reference`]: independent oracles (radial bound states, Jost resonances,
//!   the reduced double-integral form of Tr Q₀², a crude lattice trace)
//! - [`determinant`]: det₂, branch-continued log D, Blaschke data, D_B
//! - [`spectral`]: bound states, resonance search, Hadamard data, Breit–Wigner
//! - [`traceform`]: real-axis scans, det S, trace formulas, Dirichlet and
//!   Hilbert identities, Krein's trace formula

pub mod determinant;
pub mod discretize;
pub mod error;
pub mod potential;
pub mod quadrature;
pub mod reference;
pub mod spectral;
pub mod traceform;

pub use error::{Error, Result};

/// Spatial point or vector in R³.
pub type Vec3 = [f64; 3];

pub(crate) fn vec3_sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn vec3_norm(a: Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

pub(crate) fn vec3_dist(a: Vec3, b: Vec3) -> f64 {
    vec3_norm(vec3_sub(a, b))
}
