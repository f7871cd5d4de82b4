//! The modified Fredholm determinant D(k) = det[(I+Q₀(k))e^{−Q₀(k)}], a
//! globally continued branch of log D, the Blaschke product over bound
//! states, and the coefficient families β_n, γ_n.
//!
//! Two evaluation routes coexist:
//!
//! - `det2` consumes an assembled matrix and multiplies (1+μ_j)e^{−μ_j} over
//!   its spectrum (the defining formula);
//! - [`DetEvaluator`] is the production path: LU log-det of I+Q₀ with the
//!   second-order trace correction −(Tr Q₀²_true − Tr M²)/2 applied in log
//!   domain (Tr Q₀²_true from the reduced autocorrelation integral), and a
//!   large-|k| series route log D = −Tr Q₀²/2 − i α₁⁰/k³ where the grid can
//!   no longer resolve the kernel. The correction factor is entire and
//!   nonvanishing, so zeros of D are those of the matrix determinant.
//!
//! Branches: `det2` and `eval_principal` return per-eigenvalue-principal and
//! principal phases respectively; `continue_log` threads a path from a seed
//! where the Lemma-2.2 series converges (‖Q₀‖ < 1/2), matching consecutive
//! phases to the nearest 2π.

use crate::discretize::{self, MatrixKind, OperatorMatrix, QuadratureGrid};
use crate::error::{Error, Result};
use crate::potential::{Moments, Potential};
use crate::quadrature::pairwise_sum_c;
use crate::reference;
use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// D(k) with a path-continued logarithm.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DetValue {
    pub k: Complex64,
    pub d: Complex64,
    /// log D on the branch identified by `branch_path_id`; exp(log_d) = d.
    pub log_d: Complex64,
    /// Spectrum of Q₀(k) when the value came from the eigenvalue product;
    /// empty for LU/series evaluations.
    pub eigenvalues: Vec<Complex64>,
    pub branch_path_id: u64,
}

impl DetValue {
    /// ρ = log|D|.
    pub fn rho(&self) -> f64 {
        self.log_d.re
    }

    /// φ = continued arg D.
    pub fn phi(&self) -> f64 {
        self.log_d.im
    }
}

fn wrap_to_principal(phi: f64) -> f64 {
    let mut p = phi % (2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    } else if p <= -PI {
        p += 2.0 * PI;
    }
    p
}

/// det₂ from the spectrum of an assembled Q₀ matrix: D = Π (1+μ_j)e^{−μ_j},
/// log D = Σ [Log(1+μ_j) − μ_j] with per-term principal branches.
///
/// Eigenvalues with |1+μ| < 1e−14 clamp D to exactly zero.
pub fn det2(matrix: &OperatorMatrix) -> Result<DetValue> {
    assert!(matrix.kind == MatrixKind::Q0, "det2 consumes Q0 matrices");
    if matrix.frobenius_norm() == 0.0 {
        return Ok(DetValue {
            k: matrix.k,
            d: Complex64::new(1.0, 0.0),
            log_d: Complex64::new(0.0, 0.0),
            eigenvalues: vec![Complex64::new(0.0, 0.0); matrix.size()],
            branch_path_id: 0,
        });
    }
    let eigs: Vec<Complex64> = matrix
        .entries
        .eigenvalues()
        .map_err(|_| Error::EigenSolveFailed)?;
    Ok(det2_from_eigenvalues(matrix.k, eigs))
}

/// The determinant product over an explicit spectrum.
pub fn det2_from_eigenvalues(k: Complex64, eigs: Vec<Complex64>) -> DetValue {
    let mut log_terms = Vec::with_capacity(eigs.len());
    let mut clamped = false;
    for mu in &eigs {
        let one_mu = 1.0 + mu;
        if one_mu.norm() < 1e-14 {
            clamped = true;
            continue;
        }
        log_terms.push(one_mu.ln() - mu);
    }
    let log_d = pairwise_sum_c(&log_terms);
    let (d, log_d) = if clamped {
        (
            Complex64::new(0.0, 0.0),
            Complex64::new(f64::NEG_INFINITY, log_d.im),
        )
    } else {
        (log_d.exp(), log_d)
    };
    DetValue {
        k,
        d,
        log_d,
        eigenvalues: eigs,
        branch_path_id: 0,
    }
}

// ---------------------------------------------------------------------------
// Blaschke product and coefficient families
// ---------------------------------------------------------------------------

/// B(k) = Π_j (k − i√λ_j)/(k + i√λ_j); `bound_momenta` holds the √λ_j.
pub fn blaschke(bound_momenta: &[f64], k: Complex64) -> Result<Complex64> {
    let mut b = Complex64::new(1.0, 0.0);
    for &a in bound_momenta {
        let denom = k + Complex64::i() * a;
        if denom.norm() < 1e-12 * a.max(1.0) {
            return Err(Error::PoleHit { k });
        }
        b *= (k - Complex64::i() * a) / denom;
    }
    Ok(b)
}

/// log B on the branch with i log B = β₀/k − β₂/k³ + … at large |k|
/// (principal logarithm per Möbius factor on Re k ≥ 0, reflected by
/// log B(−k̄) = conj log B(k) on Re k < 0). On the real axis this branch has
/// arg B(0⁺) = −πN, matching the continued scattering phase.
pub fn log_blaschke(bound_momenta: &[f64], k: Complex64) -> Complex64 {
    if k.re < 0.0 {
        return log_blaschke(bound_momenta, -k.conj()).conj();
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for &a in bound_momenta {
        acc += (k - Complex64::i() * a).ln() - (k + Complex64::i() * a).ln();
    }
    acc
}

/// B′(k)/B(k) = Σ_j [1/(k−i√λ_j) − 1/(k+i√λ_j)].
pub fn blaschke_log_deriv(bound_momenta: &[f64], k: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &a in bound_momenta {
        acc += 1.0 / (k - Complex64::i() * a) - 1.0 / (k + Complex64::i() * a);
    }
    acc
}

/// Bound-state data with the β and γ coefficient families.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlaschkeData {
    /// √λ_j, deepest first.
    pub bound_momenta: Vec<f64>,
    pub n_states: usize,
    /// β_n = (2/(n+1)) Σ_j (√λ_j)^{n+1}, n = 0..4.
    pub beta: [f64; 5],
    /// γ₋₁ = α₋₁ + 2 Σ_j λ_j^{−1/2}  (the combination entering the
    /// threshold trace formula; see the sign note in the crate docs).
    pub gamma_m1: f64,
    /// γ₀ = α₀ − β₀.
    pub gamma_0: f64,
    /// γ₁ = α₁ + β₂ (present when α₁ is known).
    pub gamma_1: Option<f64>,
}

impl BlaschkeData {
    pub fn empty(moments: &Moments) -> Self {
        beta_gamma(&[], moments)
    }
}

/// Fill β₀…β₄ and γ₋₁, γ₀, γ₁ from bound-state momenta and moments.
pub fn beta_gamma(bound_momenta: &[f64], moments: &Moments) -> BlaschkeData {
    let mut sorted = bound_momenta.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut beta = [0.0; 5];
    for (n, b) in beta.iter_mut().enumerate() {
        let p = n as i32 + 1;
        *b = 2.0 / (n as f64 + 1.0) * sorted.iter().map(|a| a.powi(p)).sum::<f64>();
    }
    let inv_sum: f64 = sorted.iter().map(|a| 1.0 / a).sum();
    BlaschkeData {
        n_states: sorted.len(),
        gamma_m1: moments.alpha_m1 + 2.0 * inv_sum,
        gamma_0: moments.alpha_0 - beta[0],
        gamma_1: moments.alpha_1.map(|a1| a1 + beta[2]),
        bound_momenta: sorted,
        beta,
    }
}

/// D_B = D/B with log D_B = log D − log B on the matched branch.
pub fn db_quotient(dv: &DetValue, data: &BlaschkeData) -> Result<DetValue> {
    for &a in &data.bound_momenta {
        if (dv.k - Complex64::i() * a).norm() < 1e-10 * a.max(1.0)
            || (dv.k + Complex64::i() * a).norm() < 1e-10 * a.max(1.0)
        {
            return Err(Error::PoleHit { k: dv.k });
        }
    }
    let log_b = log_blaschke(&data.bound_momenta, dv.k);
    let b = blaschke(&data.bound_momenta, dv.k)?;
    Ok(DetValue {
        k: dv.k,
        d: dv.d / b,
        log_d: dv.log_d - log_b,
        eigenvalues: Vec::new(),
        branch_path_id: dv.branch_path_id,
    })
}

// ---------------------------------------------------------------------------
// production evaluator
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// LU log-det of the assembled matrix (+ trace correction).
    Matrix,
    /// Lemma-2.2 series head with the reduced Tr Q₀² integral.
    Series,
}

#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    /// Apply the −(Tr Q₀²_true − Tr M²)/2 log-domain correction.
    pub trace_correction: bool,
    /// Matrix route validity radius (oscillation capacity of the grid).
    pub t_matrix_max: f64,
    /// Series route validity floor.
    pub t_series_min: f64,
    /// Lower half-plane depth gate.
    pub kappa_max: f64,
    /// Minimum continuation step before BranchJumpDetected.
    pub min_step: f64,
}

/// Hybrid evaluator for D(k) over one (potential, grid) pair.
pub struct DetEvaluator {
    potential: Potential,
    grid: QuadratureGrid,
    /// α₁⁰ = ∫V³/(96π), the 1/k³ coefficient of −(i/3)Tr Q₀³.
    alpha10: f64,
    pub opts: EvalOptions,
}

impl DetEvaluator {
    pub fn new(potential: &Potential, grid: QuadratureGrid) -> Self {
        let r = grid.radius;
        let t_matrix_max = match grid.scheme {
            discretize::GridScheme::TensorGaussLegendre => {
                let res = (grid.len() as f64).cbrt().round();
                (1.6 * (res - 5.0) / r).max(1.0)
            }
            discretize::GridScheme::RadialAngularProduct => {
                // radial count dominates the resolvable phase 2kR
                let nr = estimate_radial_count(&grid);
                (0.9 * (nr as f64 - 4.0) / r).max(1.0)
            }
        };
        let t_series_min = series_floor(potential);
        let alpha10 = potential.v_cubed_integral() / (96.0 * PI);
        DetEvaluator {
            potential: potential.clone(),
            grid,
            alpha10,
            opts: EvalOptions {
                trace_correction: true,
                t_matrix_max,
                t_series_min,
                kappa_max: discretize::kappa_max(r),
                min_step: 1e-6,
            },
        }
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    /// Route selection for a wavenumber.
    pub fn route(&self, k: Complex64) -> Result<Route> {
        if self.potential.is_zero() {
            return Ok(Route::Series);
        }
        if k.im >= 0.0 && k.norm() >= self.opts.t_series_min {
            return Ok(Route::Series);
        }
        if k.im < -self.opts.kappa_max {
            return Err(Error::DepthLimitExceeded {
                requested: -k.im,
                kappa_max: self.opts.kappa_max,
            });
        }
        if k.norm() <= self.opts.t_matrix_max {
            return Ok(Route::Matrix);
        }
        Err(Error::FitUnstable(format!(
            "k = {k} outside the validated evaluation region (matrix ≤ {:.2}, series ≥ {:.2})",
            self.opts.t_matrix_max, self.opts.t_series_min
        )))
    }

    /// Principal-phase evaluation (branch fixing happens in `continue_log`).
    pub fn eval_principal(&self, k: Complex64) -> Result<DetValue> {
        if self.potential.is_zero() {
            return Ok(DetValue {
                k,
                d: Complex64::new(1.0, 0.0),
                log_d: Complex64::new(0.0, 0.0),
                eigenvalues: Vec::new(),
                branch_path_id: 0,
            });
        }
        let log_d = match self.route(k)? {
            Route::Series => self.series_log_d(k)?,
            Route::Matrix => {
                let raw = self.matrix_log_d(k)?;
                Complex64::new(raw.re, wrap_to_principal(raw.im))
            }
        };
        Ok(DetValue {
            k,
            d: log_d.exp(),
            log_d,
            eigenvalues: Vec::new(),
            branch_path_id: 0,
        })
    }

    /// Series route: log D = −Tr Q₀²(k)/2 − i α₁⁰/k³ (absolute branch).
    pub fn series_log_d(&self, k: Complex64) -> Result<Complex64> {
        let tr2 = reference::trq0_squared_direct(&self.potential, k)?;
        Ok(-tr2 / 2.0 - Complex64::i() * self.alpha10 / (k * k * k))
    }

    /// Matrix route: Log det(I+M) − Tr M − δ₂/2, principal in each LU factor
    /// (phase meaningful only mod 2π).
    pub fn matrix_log_d(&self, k: Complex64) -> Result<Complex64> {
        let m = discretize::assemble_q0(&self.grid, &self.potential, k);
        self.matrix_log_d_from(&m)
    }

    fn matrix_log_d_from(&self, m: &OperatorMatrix) -> Result<Complex64> {
        let k = m.k;
        let n = m.size();
        let a = Mat::from_fn(n, n, |i, j| {
            let id = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            id + m.entries[(i, j)]
        });
        let lu = a.partial_piv_lu();
        let mut log_det = Complex64::new(0.0, 0.0);
        let u = lu.U();
        for i in 0..n {
            let uii = u[(i, i)];
            if uii.norm() == 0.0 {
                return Err(Error::SingularAtEigenvalue { k });
            }
            log_det += uii.ln();
        }
        if permutation_parity(lu.P().arrays().0) {
            log_det += Complex64::new(0.0, PI);
        }
        let mut log_d = log_det - m.trace();
        if self.opts.trace_correction {
            let tr2_true = reference::trq0_squared_direct(&self.potential, k)?;
            log_d -= (tr2_true - m.trace_squared()) / 2.0;
        }
        Ok(log_d)
    }

    /// d/dk log D on the same route and with the same correction as the value.
    pub fn log_derivative(&self, k: Complex64) -> Result<Complex64> {
        if self.potential.is_zero() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        match self.route(k)? {
            Route::Series => {
                let dtr2 = reference::trq0_squared_direct_deriv(&self.potential, k)?;
                Ok(-dtr2 / 2.0 + 3.0 * Complex64::i() * self.alpha10 / (k * k * k * k))
            }
            Route::Matrix => {
                let m = discretize::assemble_q0(&self.grid, &self.potential, k);
                let mp = assemble_q0_deriv(&self.grid, &self.potential, k);
                let n = m.size();
                let a = Mat::from_fn(n, n, |i, j| {
                    let id = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
                    id + m.entries[(i, j)]
                });
                let lu = a.partial_piv_lu();
                let x = lu.solve(&mp.entries);
                let mut tr = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    tr += x[(i, i)];
                }
                // d/dk [log det(I+M) − Tr M] = Tr[(I+M)^{-1}M′] − Tr M′
                let mut log_d_prime = tr - mp.trace();
                if self.opts.trace_correction {
                    let dtr2_true = reference::trq0_squared_direct_deriv(&self.potential, k)?;
                    // d/dk Tr M² = 2 Tr(M′ M)
                    let mut tr_mp_m = Complex64::new(0.0, 0.0);
                    for i in 0..n {
                        for j in 0..n {
                            tr_mp_m += mp.entries[(i, j)] * m.entries[(j, i)];
                        }
                    }
                    log_d_prime -= (dtr2_true - 2.0 * tr_mp_m) / 2.0;
                }
                Ok(log_d_prime)
            }
        }
    }

    /// Spec-form seed: −Σ_{n≥2} Tr(−Q₀)ⁿ/n truncated once the Lemma-2.2
    /// remainder bound ‖Q₀‖^{N+1}‖Q₀‖₂²/(N+3) drops below 1e−12, with the
    /// n = 2 term replaced by the reduced integral. Requires ‖Q₀(k)‖ < 1/2.
    pub fn seed_log_d(&self, k: Complex64) -> Result<Complex64> {
        if self.potential.is_zero() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if self.route(k)? == Route::Series {
            return self.series_log_d(k);
        }
        let m = discretize::assemble_q0(&self.grid, &self.potential, k);
        let op_norm = m.spectral_norm_estimate();
        let hs2 = {
            let f = m.frobenius_norm();
            f * f
        };
        if op_norm >= 0.5 {
            return Err(Error::FitUnstable(format!(
                "seed requires ‖Q₀‖ < 1/2, got {op_norm:.3} at k = {k}"
            )));
        }
        let tr2_true = if self.opts.trace_correction {
            reference::trq0_squared_direct(&self.potential, k)?
        } else {
            m.trace_squared()
        };
        let mut log_d = -tr2_true / 2.0;
        // higher terms from matrix powers until the remainder bound clears
        let mut power = &m.entries * &m.entries;
        let mut n_term = 2usize;
        loop {
            let bound = op_norm.powi(n_term as i32 - 1) * hs2 / (n_term as f64 + 2.0);
            if bound < 1e-12 || n_term > 60 {
                break;
            }
            n_term += 1;
            power = &power * &m.entries;
            let mut tr = Complex64::new(0.0, 0.0);
            for i in 0..power.nrows() {
                tr += power[(i, i)];
            }
            // −Tr(−Q₀)ⁿ/n = −(−1)ⁿ Tr Q₀ⁿ/n
            let sign = if n_term % 2 == 0 { -1.0 } else { 1.0 };
            log_d += sign * tr / n_term as f64;
        }
        Ok(log_d)
    }
}

fn series_floor(potential: &Potential) -> f64 {
    if potential.is_zero() {
        return 0.0;
    }
    // Schur-type scale for sup |k|·‖Q₀(k)‖: (1/4π)·V₀·(2πa²) with the
    // effective range; the series model also needs |k| a few inverse lengths
    let a = potential.characteristic_length();
    let depth_scale = 0.5 * potential.max_abs() * a * a;
    (3.0 / a).max(1.4 * depth_scale / a.max(1e-12)).max(2.0)
}

fn estimate_radial_count(grid: &QuadratureGrid) -> usize {
    // distinct radii about the centroid of a radial-product grid
    let n = grid.nodes.len().max(1) as f64;
    let mut c = [0.0; 3];
    for p in &grid.nodes {
        for d in 0..3 {
            c[d] += p[d] / n;
        }
    }
    let mut radii: Vec<f64> = grid
        .nodes
        .iter()
        .map(|&p| crate::vec3_norm(crate::vec3_sub(p, c)))
        .collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * grid.radius);
    radii.len()
}

fn permutation_parity(forward: &[usize]) -> bool {
    let n = forward.len();
    let mut seen = vec![false; n];
    let mut odd = false;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = forward[i];
            len += 1;
        }
        if len % 2 == 0 {
            odd = !odd;
        }
    }
    odd
}

/// Entrywise d/dk of the assembled Q₀, including the averaged-diagonal
/// derivative, so that matrix-route derivatives are exact derivatives of the
/// matrix-route values.
fn assemble_q0_deriv(grid: &QuadratureGrid, potential: &Potential, k: Complex64) -> OperatorMatrix {
    let n = grid.len();
    let mut m = discretize::assemble_q0_prime(grid, potential, k);
    for i in 0..n {
        let (s, st) = potential.split_weights(grid.nodes[i]);
        if s == 0.0 {
            continue;
        }
        // d/dk [(1/w)∫_ball e^{ikr}/(4πr)] = (i/w)∫₀^R r² e^{ikr} dr
        let r = grid.cell_radius[i];
        m.entries[(i, i)] =
            grid.weights[i] * s * st * Complex64::i() * ball_r2_moment(k, r) / grid.weights[i];
    }
    m
}

/// ∫₀^R r² e^{ikr} dr.
fn ball_r2_moment(k: Complex64, r: f64) -> Complex64 {
    let z = Complex64::i() * k * r;
    if z.norm() < 0.2 {
        // r³ Σ zⁿ/(n!(n+3))
        let mut term = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(1.0 / 3.0, 0.0);
        for n in 1..12 {
            term *= z / n as f64;
            acc += term / (n as f64 + 3.0);
        }
        acc * r * r * r
    } else {
        let ik = Complex64::i() * k;
        // by parts: (r²e^{ikr}/(ik)) − (2/ik)∫ r e^{ikr}
        let z_exp = z.exp();
        let int_r = (Complex64::new(1.0, 0.0) + z_exp * (z - 1.0)) / (ik * ik);
        (r * r * z_exp - 2.0 * int_r) / ik
    }
}

// ---------------------------------------------------------------------------
// branch continuation
// ---------------------------------------------------------------------------

/// Continue log D along an ordered path of wavenumbers.
///
/// The first point seeds the absolute branch (series region or ‖Q₀‖ < 1/2);
/// subsequent points take the principal-phase value shifted by the nearest
/// multiple of 2π to the previous point, with adaptive midpoint insertion
/// whenever |Δ log D| > π/2. Hitting the minimum step raises
/// `BranchJumpDetected` (a zero of D on or near the path).
pub fn continue_log(
    ev: &DetEvaluator,
    path: &[Complex64],
    branch_path_id: u64,
) -> Result<Vec<DetValue>> {
    assert!(!path.is_empty());
    let mut out: Vec<DetValue> = Vec::with_capacity(path.len());
    let seed = ev.seed_log_d(path[0])?;
    out.push(DetValue {
        k: path[0],
        d: seed.exp(),
        log_d: seed,
        eigenvalues: Vec::new(),
        branch_path_id,
    });
    for idx in 1..path.len() {
        let prev = out.last().unwrap().log_d;
        let next = continue_segment(ev, path[idx - 1], prev, path[idx], ev.opts.min_step, 0)?;
        out.push(DetValue {
            k: path[idx],
            d: next.exp(),
            log_d: next,
            eigenvalues: Vec::new(),
            branch_path_id,
        });
    }
    Ok(out)
}

fn continue_segment(
    ev: &DetEvaluator,
    k_from: Complex64,
    log_from: Complex64,
    k_to: Complex64,
    min_step: f64,
    depth: u32,
) -> Result<Complex64> {
    let val = ev.eval_principal(k_to)?;
    let adjusted = match_branch(val.log_d, log_from);
    if (adjusted - log_from).norm() <= 0.5 * PI {
        return Ok(adjusted);
    }
    if (k_to - k_from).norm() <= min_step || depth > 48 {
        return Err(Error::BranchJumpDetected {
            k: k_to,
            jump: (adjusted - log_from).norm(),
        });
    }
    let mid = 0.5 * (k_from + k_to);
    let at_mid = continue_segment(ev, k_from, log_from, mid, min_step, depth + 1)?;
    continue_segment(ev, mid, at_mid, k_to, min_step, depth + 1)
}

/// Shift the imaginary part of `value` by the 2π multiple nearest `anchor`.
pub fn match_branch(value: Complex64, anchor: Complex64) -> Complex64 {
    let m = ((anchor.im - value.im) / (2.0 * PI)).round();
    Complex64::new(value.re, value.im + 2.0 * PI * m)
}

/// −Tr[Q(k)Q₀′(k)], the logarithmic derivative via the resolvent identity
/// (exposed for direct use; the evaluator's `log_derivative` is the
/// correction-consistent variant).
pub fn log_derivative_resolvent(
    grid: &QuadratureGrid,
    potential: &Potential,
    k: Complex64,
) -> Result<Complex64> {
    if potential.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let q = discretize::assemble_q(grid, potential, k)?;
    let qp = discretize::assemble_q0_prime(grid, potential, k);
    let n = q.size();
    let mut tr = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            tr += q.entries[(i, j)] * qp.entries[(j, i)];
        }
    }
    Ok(-tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{assemble_q0, build_radial_grid};
    use approx::assert_relative_eq;

    fn matrix_from_diag(k: Complex64, diag: &[Complex64]) -> OperatorMatrix {
        let n = diag.len();
        OperatorMatrix {
            k,
            kind: MatrixKind::Q0,
            entries: Mat::from_fn(n, n, |i, j| {
                if i == j { diag[i] } else { Complex64::new(0.0, 0.0) }
            }),
            condition_estimate: 1.0,
        }
    }

    #[test]
    fn det2_trivial_values() {
        let z = matrix_from_diag(Complex64::new(1.0, 0.0), &[Complex64::new(0.0, 0.0); 4]);
        let dv = det2(&z).unwrap();
        assert_eq!(dv.d, Complex64::new(1.0, 0.0));
        assert_eq!(dv.log_d, Complex64::new(0.0, 0.0));

        let single = matrix_from_diag(Complex64::new(1.0, 0.0), &[Complex64::new(0.5, 0.0)]);
        let dv = det2(&single).unwrap();
        assert_relative_eq!(dv.d.re, 1.5 * (-0.5f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(dv.d.re, 0.909796, max_relative = 1e-6);

        let zero = matrix_from_diag(
            Complex64::new(1.0, 0.0),
            &[Complex64::new(-1.0, 0.0), Complex64::new(0.3, 0.0)],
        );
        let dv = det2(&zero).unwrap();
        assert_eq!(dv.d, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn det_value_invariants() {
        let p = Potential::polynomial_bump(3.0, 1.0);
        let g = build_radial_grid(&p, 10, 6, 10).unwrap();
        let m = assemble_q0(&g, &p, Complex64::new(0.8, 0.3));
        let dv = det2(&m).unwrap();
        // exp(log D) = D and D = Π(1+μ)e^{−μ} over the stored spectrum
        assert!((dv.log_d.exp() - dv.d).norm() <= 1e-9 * dv.d.norm());
        let prod = dv
            .eigenvalues
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, mu| acc * (1.0 + mu) * (-mu).exp());
        assert!((prod - dv.d).norm() <= 1e-9 * dv.d.norm());
        assert_relative_eq!(dv.rho(), dv.d.norm().ln(), max_relative = 1e-12);
    }

    #[test]
    fn lu_and_eigen_routes_agree() {
        let p = Potential::gaussian_well(2.0, 0.75);
        let g = build_radial_grid(&p, 10, 6, 10).unwrap();
        let mut ev = DetEvaluator::new(&p, g.clone());
        ev.opts.trace_correction = false;
        for &k in &[Complex64::new(0.9, 0.4), Complex64::new(0.0, 1.3), Complex64::new(1.4, -0.2)] {
            let m = assemble_q0(&g, &p, k);
            let eigen = det2(&m).unwrap();
            let lu = ev.matrix_log_d(k).unwrap();
            let d_lu = lu.exp();
            assert!(
                (d_lu - eigen.d).norm() <= 1e-9 * eigen.d.norm().max(1e-12),
                "k={k}: lu={d_lu} eigen={}",
                eigen.d
            );
        }
    }

    #[test]
    fn blaschke_values() {
        assert_eq!(blaschke(&[], Complex64::new(0.3, 0.8)).unwrap(), Complex64::new(1.0, 0.0));
        let b = blaschke(&[1.0], Complex64::new(0.0, 2.0)).unwrap();
        assert!((b - Complex64::new(1.0 / 3.0, 0.0)).norm() < 1e-15);
        // i log B(0) = πN
        let lb = log_blaschke(&[1.0], Complex64::new(0.0, 0.0));
        assert_relative_eq!((Complex64::i() * lb).re, PI, max_relative = 1e-12);
        let b0 = blaschke(&[1.0], Complex64::new(0.0, 0.0)).unwrap();
        assert!((b0 - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        assert!(matches!(
            blaschke(&[1.0], Complex64::new(0.0, -1.0)),
            Err(Error::PoleHit { .. })
        ));
        // |B| = 1 on the real axis
        for t in [-3.0, -0.4, 0.7, 5.0] {
            let b = blaschke(&[1.0, 0.35], Complex64::new(t, 0.0)).unwrap();
            assert_relative_eq!(b.norm(), 1.0, max_relative = 1e-13);
        }
        // branch expansion at large |k|: i log B ≈ β₀/k
        let big = Complex64::new(40.0, 3.0);
        let lb = log_blaschke(&[1.0, 0.35], big);
        let beta0 = 2.0 * (1.0 + 0.35);
        assert!(((Complex64::i() * lb) - beta0 / big).norm() < 1e-3 / big.norm());
    }

    #[test]
    fn beta_gamma_formulas() {
        let m = Moments {
            alpha_m1: -0.7,
            alpha_0: 0.9,
            alpha_1: Some(0.2),
            error_estimates: [0.0; 3],
        };
        let d = beta_gamma(&[1.0], &m);
        assert_relative_eq!(d.beta[0], 2.0, max_relative = 1e-15);
        assert_relative_eq!(d.beta[2], 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(d.gamma_0, 0.9 - 2.0, max_relative = 1e-15);
        assert_relative_eq!(d.gamma_1.unwrap(), 0.2 + 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(d.gamma_m1, -0.7 + 2.0, max_relative = 1e-15);
        let empty = beta_gamma(&[], &m);
        assert_eq!(empty.gamma_0, m.alpha_0);
        assert_eq!(empty.gamma_m1, m.alpha_m1);
        assert_eq!(empty.gamma_1, m.alpha_1);
    }

    #[test]
    fn db_quotient_trivial_and_modulus() {
        let m = Moments {
            alpha_m1: 0.0,
            alpha_0: 0.5,
            alpha_1: None,
            error_estimates: [0.0; 3],
        };
        let dv = DetValue {
            k: Complex64::new(1.2, 0.0),
            d: Complex64::new(0.4, -0.3),
            log_d: Complex64::new(0.4f64.hypot(0.3).ln(), (-0.3f64).atan2(0.4)),
            eigenvalues: Vec::new(),
            branch_path_id: 0,
        };
        let none = beta_gamma(&[], &m);
        let out = db_quotient(&dv, &none).unwrap();
        assert_eq!(out.d, dv.d);
        let one = beta_gamma(&[0.8], &m);
        let out = db_quotient(&dv, &one).unwrap();
        // |D_B| = |D| on the real axis
        assert_relative_eq!(out.d.norm(), dv.d.norm(), max_relative = 1e-13);
        assert!(matches!(
            db_quotient(
                &DetValue {
                    k: Complex64::new(0.0, 0.8),
                    ..dv.clone()
                },
                &one
            ),
            Err(Error::PoleHit { .. })
        ));
    }

    #[test]
    fn zero_potential_continuation_is_zero() {
        let z = Potential::zero();
        let g = build_radial_grid(&z, 4, 4, 6).unwrap();
        let ev = DetEvaluator::new(&z, g);
        let path: Vec<Complex64> = (0..20)
            .map(|i| Complex64::new(0.3 * i as f64, 5.0 - 0.2 * i as f64))
            .collect();
        let vals = continue_log(&ev, &path, 7).unwrap();
        for v in vals {
            assert_eq!(v.log_d, Complex64::new(0.0, 0.0));
            assert_eq!(v.d, Complex64::new(1.0, 0.0));
            assert_eq!(v.branch_path_id, 7);
        }
    }

    #[test]
    fn seed_matches_det2_principal_value() {
        // at ‖Q₀‖ < 1/2 the per-eigenvalue principal sum is the true branch
        let p = Potential::gaussian_well(1.0, 0.75);
        let g = build_radial_grid(&p, 20, 6, 10).unwrap();
        let mut ev = DetEvaluator::new(&p, g.clone());
        ev.opts.trace_correction = false;
        let k = Complex64::new(0.0, 2.4);
        let m = assemble_q0(&g, &p, k);
        assert!(m.spectral_norm_estimate() < 0.5);
        let seed = ev.seed_log_d(k).unwrap();
        let eigen = det2(&m).unwrap();
        assert!(
            (seed - eigen.log_d).norm() < 1e-9 * eigen.log_d.norm().max(1e-9),
            "seed {seed} vs eigen {}",
            eigen.log_d
        );
    }

    #[test]
    fn log_derivative_matches_finite_differences() {
        let p = Potential::polynomial_bump(3.0, 1.0);
        let g = build_radial_grid(&p, 12, 6, 10).unwrap();
        let ev = DetEvaluator::new(&p, g);
        let k = Complex64::new(2.0, 2.0);
        let exact = ev.log_derivative(k).unwrap();
        let mut errs = Vec::new();
        for h in [1e-2, 1e-3] {
            let hp = Complex64::new(h, 0.0);
            let fd = (ev.matrix_log_d(k + hp).unwrap() - ev.matrix_log_d(k - hp).unwrap())
                / (2.0 * h);
            errs.push((fd - exact).norm());
        }
        // O(h²) until the FD noise floor
        assert!(errs[1] < errs[0], "errors {errs:?}");
        assert!(errs[1] < 1e-8, "errors {errs:?}");
    }

    #[test]
    fn conjugation_symmetry_through_evaluator() {
        let p = Potential::gaussian_well(2.0, 0.75);
        let g = build_radial_grid(&p, 20, 6, 10).unwrap();
        let ev = DetEvaluator::new(&p, g);
        for t in [0.4, 1.1, 2.0] {
            let a = ev.eval_principal(Complex64::new(t, 0.0)).unwrap();
            let b = ev.eval_principal(Complex64::new(-t, 0.0)).unwrap();
            assert!(
                (b.d - a.d.conj()).norm() <= 1e-9 * a.d.norm(),
                "t={t}: D(−t)={} vs conj D(t)={}",
                b.d,
                a.d.conj()
            );
        }
    }
}
