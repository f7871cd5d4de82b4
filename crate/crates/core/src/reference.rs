//! Independent oracles used to gate the Nyström engine:
//!
//! - Tr Q₀²(k) in its reduced autocorrelation form (the f(k) = (i/2)∫ e^{2ikt} g(t) dt
//!   identity), evaluated with Filon quadrature — valid at any k where the
//!   integral converges, far beyond what a fixed grid can resolve;
//! - radial Schrödinger shooting for bound states, per angular momentum;
//! - s-wave square-well resonances from the Jost condition κ·cot(κa) = ik;
//! - a crude periodic-lattice check of Krein's trace formula (experimental).

use crate::error::{Error, Result};
use crate::discretize::QuadratureGrid;
use crate::potential::{Potential, PotentialModel};
use crate::quadrature::{filon_adaptive, gauss_legendre_on, pairwise_sum};
use num_complex::Complex64;
use std::f64::consts::PI;

// ---------------------------------------------------------------------------
// autocorrelation g(t) and the direct Tr Q₀²
// ---------------------------------------------------------------------------

/// g(t) = (1/(4π)²) ∫_{S²} dω ∫ V(x+tω) V(x) dx, the sphere-averaged
/// autocorrelation entering f(k) = (i/2)∫₀^∞ e^{2ikt} g(t) dt.
///
/// Radial models use closed or semi-closed forms; gridded potentials fall
/// back to direct (3D × S²) quadrature.
pub fn autocorrelation_g(potential: &Potential, t: f64) -> f64 {
    let t = t.abs();
    match potential.model() {
        PotentialModel::GaussianWell { depth, sigma } => {
            // ∫V(x+a)V(x)dx = V₀² (πσ²/2)^{3/2} e^{−|a|²/(2σ²)}
            let c = depth * depth * (PI * sigma * sigma / 2.0).powf(1.5);
            c * (-(t * t) / (2.0 * sigma * sigma)).exp() / (4.0 * PI)
        }
        PotentialModel::SquareWell { depth, radius } => {
            // lens (ball-overlap) volume: π(2a−t)²(4a+t)/12 for t ≤ 2a
            if t >= 2.0 * radius {
                0.0
            } else {
                let lens = PI * (2.0 * radius - t).powi(2) * (4.0 * radius + t) / 12.0;
                depth * depth * lens / (4.0 * PI)
            }
        }
        PotentialModel::PolynomialBump { .. } => radial_autocorrelation(potential, t) / (4.0 * PI),
        PotentialModel::GridSampled(_) => grid_autocorrelation_g(potential, t),
    }
}

/// C(t) = ∫ V(x+t ẑ)V(x) dx for a radial profile via the shell reduction
/// C(t) = (2π/t) ∫ r v(r) [W(r+t) − W(|r−t|)] dr, W(y) = ∫₀^y s v(s) ds.
fn radial_autocorrelation(potential: &Potential, t: f64) -> f64 {
    let r_max = potential.r_eff();
    if t >= 2.0 * r_max {
        return 0.0;
    }
    if t < 1e-9 {
        // C(0) = ∫V²
        return integral_v2(potential);
    }
    let w_cum = |y: f64| -> f64 {
        // ∫₀^y s v(s) ds, exact for the bump profile
        match potential.model() {
            PotentialModel::PolynomialBump { depth, radius } => {
                let y = y.min(*radius);
                let u = 1.0 - (y * y) / (radius * radius);
                -depth * radius * radius / 8.0 * (1.0 - u * u * u * u)
            }
            _ => {
                let (xs, ws) = gauss_legendre_on(48, 0.0, y.min(r_max));
                pairwise_sum(
                    &xs.iter()
                        .zip(&ws)
                        .map(|(&s, &w)| w * s * potential.radial_profile(s).unwrap())
                        .collect::<Vec<_>>(),
                )
            }
        }
    };
    // split the r-integral at the kinks of |r−t| and of the support edge
    let mut cuts = vec![0.0, r_max];
    for c in [t, r_max - t, t - r_max] {
        if c > 1e-12 && c < r_max - 1e-12 {
            cuts.push(c);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut acc = 0.0;
    for seg in cuts.windows(2) {
        let (xs, ws) = gauss_legendre_on(48, seg[0], seg[1]);
        acc += pairwise_sum(
            &xs.iter()
                .zip(&ws)
                .map(|(&r, &w)| {
                    let v = potential.radial_profile(r).unwrap();
                    w * r * v * (w_cum(r + t) - w_cum((r - t).abs()))
                })
                .collect::<Vec<_>>(),
        );
    }
    2.0 * PI / t * acc
}

fn integral_v2(potential: &Potential) -> f64 {
    let (xs, ws) = gauss_legendre_on(128, 0.0, potential.r_eff());
    pairwise_sum(
        &xs.iter()
            .zip(&ws)
            .map(|(&r, &w)| {
                let v = potential.radial_profile(r).unwrap_or(0.0);
                4.0 * PI * r * r * w * v * v
            })
            .collect::<Vec<_>>(),
    )
}

/// Direct (3D × S²) quadrature of g for gridded potentials.
fn grid_autocorrelation_g(potential: &Potential, t: f64) -> f64 {
    let r = potential.r_eff();
    let c = potential.center();
    let n = 24;
    let (xs, wx) = gauss_legendre_on(n, -r, r);
    let (cts, wct) = gauss_legendre_on(8, -1.0, 1.0);
    let nphi = 16;
    let wphi = 2.0 * PI / nphi as f64;
    let mut acc = 0.0;
    for (ict, &ct) in cts.iter().enumerate() {
        let st = (1.0 - ct * ct).sqrt();
        for ip in 0..nphi {
            let phi = wphi * (ip as f64 + 0.5);
            let omega = [st * phi.cos(), st * phi.sin(), ct];
            let mut inner = 0.0;
            for (i, &x0) in xs.iter().enumerate() {
                for (j, &y0) in xs.iter().enumerate() {
                    for (l, &z0) in xs.iter().enumerate() {
                        let p = [c[0] + x0, c[1] + y0, c[2] + z0];
                        let v = potential.evaluate(p);
                        if v == 0.0 {
                            continue;
                        }
                        let q = [p[0] + t * omega[0], p[1] + t * omega[1], p[2] + t * omega[2]];
                        inner += wx[i] * wx[j] * wx[l] * v * potential.evaluate(q);
                    }
                }
            }
            acc += wct[ict] * wphi * inner;
        }
    }
    acc / (16.0 * PI * PI)
}

/// Upper integration limit where e^{2ikt} g(t) is negligible.
fn g_support(potential: &Potential, k: Complex64) -> f64 {
    let kappa = (-k.im).max(0.0); // growth rate in the lower half-plane
    match potential.model() {
        PotentialModel::GaussianWell { sigma, .. } => {
            // t²/(2σ²) − 2κt = 37 → t = 2κσ² + √(4κ²σ⁴ + 74σ²)
            2.0 * kappa * sigma * sigma
                + (4.0 * kappa * kappa * sigma.powi(4) + 74.0 * sigma * sigma).sqrt()
        }
        _ => 2.0 * potential.r_eff(),
    }
}

/// Tr Q₀²(k) = ∫₀^∞ e^{2ikt} g(t) dt in the reduced 1D form (Lemma-4.1
/// style), via adaptive Filon quadrature. Valid on C̄₊ for any short-range V
/// and on all of C for the compactly supported / superexponential models.
pub fn trq0_squared_direct(potential: &Potential, k: Complex64) -> Result<Complex64> {
    if potential.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let t_max = g_support(potential, k);
    let g = |t: f64| autocorrelation_g(potential, t);
    let is_grid = matches!(potential.model(), PotentialModel::GridSampled(_));
    let tol = if is_grid { 1e-7 } else { 1e-12 };
    let (val, err) = if is_grid {
        // gridded g is expensive; fixed Filon on a moderate panel count
        let v = crate::quadrature::filon_fixed(g, 0.0, t_max, 2.0 * k, 96);
        (v, f64::NAN)
    } else {
        filon_adaptive(g, 0.0, t_max, 2.0 * k, tol)
    };
    if err.is_finite() && err > 1e-6 * val.norm().max(1e-12) {
        return Err(Error::QuadratureNotConverged { delta: err, tol });
    }
    Ok(val)
}

/// d/dk Tr Q₀²(k) = ∫₀^∞ 2it e^{2ikt} g(t) dt.
pub fn trq0_squared_direct_deriv(potential: &Potential, k: Complex64) -> Result<Complex64> {
    if potential.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let t_max = g_support(potential, k);
    // absorb the 2it factor into a complex pair of real Filon integrals
    let g_t = |t: f64| t * autocorrelation_g(potential, t);
    let (val, _err) = filon_adaptive(g_t, 0.0, t_max, 2.0 * k, 1e-12);
    Ok(2.0 * Complex64::i() * val)
}

// ---------------------------------------------------------------------------
// radial bound-state oracle
// ---------------------------------------------------------------------------

/// Radial problem u″ = [ℓ(ℓ+1)/r² + v(r) + λ] u with decaying exterior match.
#[derive(Clone)]
pub struct RadialProblem {
    pub potential: Potential,
    pub ell: u32,
    pub r_max: f64,
    pub ode_step: f64,
}

impl RadialProblem {
    pub fn new(potential: &Potential, ell: u32) -> Self {
        let r_max = potential.r_eff();
        RadialProblem {
            potential: potential.clone(),
            ell,
            r_max,
            ode_step: potential.characteristic_length() / 2000.0,
        }
    }
}

/// One bound state found by the shooting oracle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialBoundState {
    /// λ > 0 with energy E = −λ.
    pub lambda: f64,
    pub ell: u32,
    /// 2ℓ+1.
    pub multiplicity: u32,
    /// |λ(h) − λ(h/2)| Richardson step check.
    pub step_error: f64,
}

/// Integrate u out to r_max, returning (u, u′, node count).
fn shoot(problem: &RadialProblem, lambda: f64, step: f64) -> (f64, f64, usize) {
    let ell = problem.ell as f64;
    let v = |r: f64| problem.potential.radial_profile(r).unwrap_or(0.0);
    let rhs = |r: f64, u: f64| (ell * (ell + 1.0) / (r * r) + v(r) + lambda) * u;
    let mut r = step;
    let mut u = r.powi(problem.ell as i32 + 1);
    let mut du = (ell + 1.0) * r.powi(problem.ell as i32);
    let mut nodes = 0;
    let n_steps = ((problem.r_max - r) / step).ceil() as usize;
    let h = (problem.r_max - r) / n_steps as f64;
    for _ in 0..n_steps {
        // classic RK4 on (u, u′)
        let k1u = du;
        let k1d = rhs(r, u);
        let k2u = du + 0.5 * h * k1d;
        let k2d = rhs(r + 0.5 * h, u + 0.5 * h * k1u);
        let k3u = du + 0.5 * h * k2d;
        let k3d = rhs(r + 0.5 * h, u + 0.5 * h * k2u);
        let k4u = du + h * k3d;
        let k4d = rhs(r + h, u + h * k3u);
        let u_new = u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        let du_new = du + h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        if u_new * u != 0.0 && u_new.signum() != u.signum() {
            nodes += 1;
        }
        u = u_new;
        du = du_new;
        r += h;
        // renormalize to dodge overflow in classically forbidden regions
        let scale = u.abs().max(du.abs());
        if scale > 1e200 {
            u /= scale;
            du /= scale;
        }
    }
    (u, du, nodes)
}

/// Unnormalized modified spherical Bessel K_ℓ(z) = e^{−z} P_ℓ(1/z) and its
/// derivative; only ratios are used.
fn spherical_k_logderiv(ell: u32, z: f64) -> f64 {
    // P_ℓ(1/z) = Σ_m (ℓ+m)!/(m!(ℓ−m)! 2^m) z^{−m−1}
    let mut p = 0.0;
    let mut dp = 0.0;
    for m in 0..=ell {
        let mut c = 1.0;
        for i in 0..m {
            c *= (ell + 1 + i) as f64 * (ell - i) as f64 / (2.0 * (i + 1) as f64);
        }
        let pow = z.powi(-(m as i32) - 1);
        p += c * pow;
        dp += c * (-(m as f64) - 1.0) * pow / z;
    }
    // K = e^{−z} P ⇒ K′/K = −1 + P′/P
    -1.0 + dp / p
}

/// Mismatch of interior and decaying-exterior logarithmic derivatives at r_max.
fn match_miss(problem: &RadialProblem, lambda: f64, step: f64) -> (f64, f64) {
    let (u, du, _) = shoot(problem, lambda, step);
    let kappa = lambda.sqrt();
    let z = kappa * problem.r_max;
    let l_out = 1.0 / problem.r_max + kappa * spherical_k_logderiv(problem.ell, z);
    (du / u - l_out, u.abs())
}

/// Bound states of −Δ + V in the ℓ-th partial wave with energies inside
/// `energy_range` = (−λ_hi, −λ_lo) ⊂ (−∞, 0).
pub fn radial_bound_states(problem: &RadialProblem, energy_range: (f64, f64)) -> Vec<RadialBoundState> {
    assert!(energy_range.0 < energy_range.1 && energy_range.1 <= 0.0);
    let lam_hi = -energy_range.0;
    let lam_lo = (-energy_range.1).max(1e-9);
    let mut out = Vec::new();
    let n_scan = 400;
    let step = problem.ode_step;
    let mut prev = match_miss(problem, lam_lo, step);
    let mut prev_l = lam_lo;
    for i in 1..=n_scan {
        let lam = lam_lo + (lam_hi - lam_lo) * i as f64 / n_scan as f64;
        let cur = match_miss(problem, lam, step);
        if prev.0.is_finite() && cur.0.is_finite() && prev.0 * cur.0 < 0.0 {
            // bisect, then decide root vs pole of the log-derivative
            let (mut a, mut b) = (prev_l, lam);
            let mut fa = prev.0;
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                let fm = match_miss(problem, m, step).0;
                if fa * fm <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            let lam_root = 0.5 * (a + b);
            let (miss, u_mag) = match_miss(problem, lam_root, step);
            if miss.abs() < 1e-3 && u_mag > 1e-140 {
                let fine = {
                    let (mut a, mut b) = (prev_l, lam);
                    let mut fa = match_miss(problem, a, step / 2.0).0;
                    for _ in 0..80 {
                        let m = 0.5 * (a + b);
                        let fm = match_miss(problem, m, step / 2.0).0;
                        if fa * fm <= 0.0 {
                            b = m;
                        } else {
                            a = m;
                            fa = fm;
                        }
                    }
                    0.5 * (a + b)
                };
                out.push(RadialBoundState {
                    lambda: fine,
                    ell: problem.ell,
                    multiplicity: 2 * problem.ell + 1,
                    step_error: (fine - lam_root).abs(),
                });
            }
        }
        prev = cur;
        prev_l = lam;
    }
    out.sort_by(|a, b| b.lambda.total_cmp(&a.lambda));
    out
}

/// Union of radial bound states over ℓ ≤ ell_max, sorted by depth.
pub fn all_bound_states(potential: &Potential, ell_max: u32) -> Vec<RadialBoundState> {
    if potential.is_zero() {
        return Vec::new();
    }
    let depth = potential.max_abs();
    let mut out = Vec::new();
    for ell in 0..=ell_max {
        let p = RadialProblem::new(potential, ell);
        out.extend(radial_bound_states(&p, (-depth, 0.0)));
    }
    out.sort_by(|a, b| b.lambda.total_cmp(&a.lambda));
    out
}

// ---------------------------------------------------------------------------
// s-wave square-well resonance oracle
// ---------------------------------------------------------------------------

/// Jost condition for the s-wave square well: F(k) = κ cot(κa) − ik with
/// κ = √(k²+V₀). Even in κ, so the square-root branch is immaterial.
fn jost_f(k: Complex64, v0: f64, a: f64) -> Complex64 {
    let kappa = (k * k + v0).sqrt();
    let z = kappa * a;
    kappa * z.cos() / z.sin() - Complex64::i() * k
}

fn jost_f_deriv(k: Complex64, v0: f64, a: f64) -> Complex64 {
    let kappa = (k * k + v0).sqrt();
    let z = kappa * a;
    let cot = z.cos() / z.sin();
    let dkappa = k / kappa;
    dkappa * (cot - z * (1.0 + cot * cot)) - Complex64::i()
}

/// Complex-Newton roots of the s-wave Jost condition inside a rectangle.
///
/// Seeds a lattice over the region, polishes with Newton, and deduplicates.
pub fn square_well_resonances(
    v0: f64,
    a: f64,
    re_range: (f64, f64),
    im_range: (f64, f64),
) -> Vec<Complex64> {
    let mut roots: Vec<Complex64> = Vec::new();
    let dn = 0.35;
    let nr = (((re_range.1 - re_range.0) / dn).ceil() as usize).max(2);
    let ni = (((im_range.1 - im_range.0) / dn).ceil() as usize).max(2);
    for i in 0..=nr {
        for j in 0..=ni {
            let mut k = Complex64::new(
                re_range.0 + (re_range.1 - re_range.0) * i as f64 / nr as f64,
                im_range.0 + (im_range.1 - im_range.0) * j as f64 / ni as f64,
            );
            let mut ok = false;
            for _ in 0..60 {
                let f = jost_f(k, v0, a);
                let df = jost_f_deriv(k, v0, a);
                if df.norm() == 0.0 {
                    break;
                }
                let dk = f / df;
                k -= dk;
                if dk.norm() < 1e-13 {
                    ok = jost_f(k, v0, a).norm() < 1e-8;
                    break;
                }
            }
            if !ok {
                continue;
            }
            if k.re < re_range.0 - 1e-9
                || k.re > re_range.1 + 1e-9
                || k.im < im_range.0 - 1e-9
                || k.im > im_range.1 + 1e-9
            {
                continue;
            }
            if !roots.iter().any(|r| (r - k).norm() < 1e-6) {
                roots.push(k);
            }
        }
    }
    roots.sort_by(|x, y| x.norm().total_cmp(&y.norm()).then(x.re.total_cmp(&y.re)));
    roots
}

// ---------------------------------------------------------------------------
// Lemma 4.1 / 4.2 expansion check
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct ExpansionReport {
    /// fitted coefficient of 1/k in f(k) = (i/2)Tr Q₀², against −(1/16π)∫V².
    pub c1_fit: f64,
    pub c1_expected: f64,
    /// fitted coefficient of 1/k³, against −(1/192π)∫|∇V|².
    pub c3_fit: f64,
    pub c3_expected: f64,
    /// log-log slope of |Tr Q₀⁴(iτ)| over the ray (order claim: ≤ −3.5).
    pub tr4_slope: f64,
    /// log-log slope of |Tr Q₀⁵(iτ)|.
    pub tr5_slope: f64,
}

/// Fit c₁/k + c₃/k³ to the reduced f(k) on the positive imaginary ray and
/// verify the O(k⁻⁴) order of the n = 4, 5 matrix traces.
pub fn lemma41_expansion_check(
    potential: &Potential,
    grid: &QuadratureGrid,
    taus: &[f64],
) -> Result<ExpansionReport> {
    if !potential.is_smooth() {
        return Err(Error::NotDifferentiable);
    }
    if potential.is_zero() {
        return Ok(ExpansionReport {
            c1_fit: 0.0,
            c1_expected: 0.0,
            c3_fit: 0.0,
            c3_expected: 0.0,
            tr4_slope: f64::NEG_INFINITY,
            tr5_slope: f64::NEG_INFINITY,
        });
    }
    // least squares of Im f(iτ) = −c₁/τ + c₃/τ³ … on the ray f is purely
    // imaginary: f(iτ) = −c₁/(iτ) − c₃/(iτ)³ + O(τ⁻⁵) = i(c₁/τ − c₃/τ³)
    let mut s11 = 0.0;
    let mut s13 = 0.0;
    let mut s33 = 0.0;
    let mut b1 = 0.0;
    let mut b3 = 0.0;
    for &tau in taus {
        let k = Complex64::new(0.0, tau);
        let f = Complex64::i() * trq0_squared_direct(potential, k)? / 2.0;
        let y = f.im;
        let (x1, x3) = (1.0 / tau, -1.0 / (tau * tau * tau));
        s11 += x1 * x1;
        s13 += x1 * x3;
        s33 += x3 * x3;
        b1 += x1 * y;
        b3 += x3 * y;
    }
    let det = s11 * s33 - s13 * s13;
    if det.abs() < 1e-30 {
        return Err(Error::FitUnstable("normal equations singular".into()));
    }
    let c1 = (b1 * s33 - b3 * s13) / det;
    let c3 = (s11 * b3 - s13 * b1) / det;
    let m = potential.moments(crate::potential::MomentRequest::All)?;
    let int_v2 = 16.0 * PI * m.alpha_0;
    let int_grad2 = 192.0 * PI * m.alpha_1.unwrap() - 2.0 * potential.v_cubed_integral();
    // slopes of the discretized traces on the ray
    let slope = |vals: &[(f64, f64)]| -> f64 {
        let n = vals.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for &(t, v) in vals {
            let (x, y) = (t.ln(), v.max(1e-300).ln());
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    };
    let mut t4 = Vec::new();
    let mut t5 = Vec::new();
    for &tau in taus {
        let m0 = crate::discretize::assemble_q0(grid, potential, Complex64::new(0.0, tau));
        let m2 = &m0.entries * &m0.entries;
        let m4 = &m2 * &m2;
        let n = m0.size();
        let mut tr4 = Complex64::new(0.0, 0.0);
        let mut tr5 = Complex64::new(0.0, 0.0);
        for i in 0..n {
            tr4 += m4[(i, i)];
        }
        let m5 = &m4 * &m0.entries;
        for i in 0..n {
            tr5 += m5[(i, i)];
        }
        t4.push((tau, tr4.norm()));
        t5.push((tau, tr5.norm()));
    }
    Ok(ExpansionReport {
        c1_fit: c1,
        c1_expected: -int_v2 / (16.0 * PI),
        c3_fit: c3,
        c3_expected: -int_grad2 / (192.0 * PI),
        tr4_slope: slope(&t4),
        tr5_slope: slope(&t5),
    })
}

// ---------------------------------------------------------------------------
// lattice trace oracle (experimental)
// ---------------------------------------------------------------------------

/// Tr(f(H) − f(H₀)) on a periodic finite-difference box. Desk-scale accuracy
/// is only O(10%); used as a loose third route for Krein's formula.
pub fn lattice_trace(
    potential: &Potential,
    f: impl Fn(f64) -> f64,
    box_size: f64,
    spacing: f64,
) -> Result<f64> {
    let n = (box_size / spacing).round() as usize;
    if n < 4 {
        return Err(Error::BoxTooSmall(format!("{n} sites per side")));
    }
    let n3 = n * n * n;
    if n3 > 4096 {
        return Err(Error::BoxTooSmall(format!(
            "{n3} sites exceed the dense-eigensolve budget"
        )));
    }
    if box_size < 2.0 * potential.characteristic_length() * 3.0 {
        return Err(Error::BoxTooSmall(
            "box does not contain the potential support with margin".into(),
        ));
    }
    let h2 = spacing * spacing;
    // H = −Δ_FD + V, periodic; H₀ spectrum is the FD symbol
    let idx = |ix: usize, iy: usize, iz: usize| ix + n * (iy + n * iz);
    let mut hmat = faer::Mat::<f64>::zeros(n3, n3);
    let c = potential.center();
    let half = 0.5 * (n as f64 - 1.0) * spacing;
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                let i = idx(ix, iy, iz);
                let x = [
                    c[0] - half + ix as f64 * spacing,
                    c[1] - half + iy as f64 * spacing,
                    c[2] - half + iz as f64 * spacing,
                ];
                hmat[(i, i)] = 6.0 / h2 + potential.evaluate(x);
                for (dx, dy, dz) in [(1usize, 0usize, 0usize), (0, 1, 0), (0, 0, 1)] {
                    let j = idx((ix + dx) % n, (iy + dy) % n, (iz + dz) % n);
                    hmat[(i, j)] = -1.0 / h2;
                    hmat[(j, i)] = -1.0 / h2;
                }
            }
        }
    }
    let eigs = hmat
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|_| Error::EigenSolveFailed)?;
    let tr_h: f64 = eigs.iter().map(|&e| f(e)).sum();
    // free FD eigenvalues: Σ_d 2(1 − cos(2π m_d / n))/h²
    let mut tr_h0 = 0.0;
    for mz in 0..n {
        for my in 0..n {
            for mx in 0..n {
                let e = 2.0
                    * (3.0
                        - (2.0 * PI * mx as f64 / n as f64).cos()
                        - (2.0 * PI * my as f64 / n as f64).cos()
                        - (2.0 * PI * mz as f64 / n as f64).cos())
                    / h2;
                tr_h0 += f(e);
            }
        }
    }
    Ok(tr_h - tr_h0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::MomentRequest;
    use approx::assert_relative_eq;

    #[test]
    fn g_at_zero_is_v2_integral_over_4pi() {
        // g(0) = (1/4π)∫V², closed forms for well and gaussian
        let sw = Potential::square_well(4.0, 1.0);
        let int_v2_well = 16.0 * 4.0 * PI / 3.0;
        assert_relative_eq!(
            autocorrelation_g(&sw, 0.0),
            int_v2_well / (4.0 * PI),
            max_relative = 1e-12
        );
        let gw = Potential::gaussian_well(2.0, 1.0);
        let int_v2_gauss = 4.0 * (PI / 2.0).powf(1.5);
        assert_relative_eq!(
            autocorrelation_g(&gw, 0.0),
            int_v2_gauss / (4.0 * PI),
            max_relative = 1e-12
        );
        // and in moment units, g(0) = 4 α₀
        for p in [sw, gw, Potential::polynomial_bump(3.0, 0.9)] {
            let a0 = p.moments(MomentRequest::UpToAlpha0).unwrap().alpha_0;
            assert_relative_eq!(autocorrelation_g(&p, 0.0), 4.0 * a0, max_relative = 1e-8);
        }
    }

    #[test]
    fn bump_autocorrelation_matches_grid_quadrature() {
        // semi-closed radial reduction vs the direct 3D×S² route on sampled data
        let bump = Potential::polynomial_bump(2.0, 1.0);
        let grid = Potential::grid_sampled(bump.sample_to_grid(41)).unwrap();
        let g0 = autocorrelation_g(&bump, 0.0);
        for t in [0.3, 0.9, 1.6] {
            let a = autocorrelation_g(&bump, t);
            let b = autocorrelation_g(&grid, t);
            assert!((a - b).abs() < 5e-3 * g0, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn trq0sq_zero_potential() {
        let z = Potential::zero();
        assert_eq!(
            trq0_squared_direct(&z, Complex64::new(1.0, 1.0)).unwrap(),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn trq0sq_imaginary_axis_asymptotics() {
        // Tr Q₀²(iτ) → g(0)/(2τ) at large τ (= 2π α₀·4/(2τ)·…)
        let p = Potential::gaussian_well(2.0, 0.75);
        let g0 = autocorrelation_g(&p, 0.0);
        let tau = 200.0;
        let tr = trq0_squared_direct(&p, Complex64::new(0.0, tau)).unwrap();
        assert!(tr.im.abs() < 1e-12);
        assert_relative_eq!(tr.re, g0 / (2.0 * tau), max_relative = 2e-3);
    }

    #[test]
    fn radial_oracle_square_well_threshold() {
        // V₀=4, a=1: exactly one s-wave state (π²/4 < 4 < π²), none for ℓ=1
        let p = Potential::square_well(4.0, 1.0);
        let s = radial_bound_states(&RadialProblem::new(&p, 0), (-4.0, 0.0));
        assert_eq!(s.len(), 1);
        // independent transcendental root: √(4−λ)·cot(√(4−λ)) = −√λ
        let f = |lam: f64| {
            let kap = (4.0 - lam).sqrt();
            kap * (kap.cos() / kap.sin()) + lam.sqrt()
        };
        let (mut a, mut b) = (1e-6, 3.9);
        assert!(f(a) * f(b) < 0.0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if f(a) * f(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        let lam_exact = 0.5 * (a + b);
        assert_relative_eq!(s[0].lambda, lam_exact, max_relative = 1e-6);
        assert!(s[0].step_error < 1e-8);

        let p1 = radial_bound_states(&RadialProblem::new(&p, 1), (-4.0, 0.0));
        assert!(p1.is_empty());
        let shallow = Potential::square_well(1.0, 1.0);
        assert!(radial_bound_states(&RadialProblem::new(&shallow, 0), (-1.0, 0.0)).is_empty());
        assert!(all_bound_states(&Potential::zero(), 2).is_empty());
    }

    #[test]
    fn jost_oracle_structure() {
        // lowest s-wave pair for V₀ = 4, a = 1 sits at ±3.9278 − 1.6475i
        let roots = square_well_resonances(4.0, 1.0, (-6.0, 6.0), (-1.8, -1e-3));
        assert_eq!(roots.len(), 2);
        let target = Complex64::new(3.927779, -1.647523);
        assert!(roots.iter().any(|r| (r - target).norm() < 1e-4));
        // mirror pairs −conj(k)
        for r in &roots {
            assert!(
                roots.iter().any(|s| (s + r.conj()).norm() < 1e-6),
                "no mirror for {r}"
            );
            assert!(jost_f(*r, 4.0, 1.0).norm() < 1e-8);
        }
        // V₀ = 16 brings the lowest pair inside Im ≥ −1.2
        let deep = square_well_resonances(16.0, 1.0, (-6.0, 6.0), (-1.2, -1e-3));
        assert_eq!(deep.len(), 2);
        assert!(deep
            .iter()
            .any(|r| (r - Complex64::new(2.2149, -1.0964)).norm() < 1e-3));
        // upper half-plane (avoiding the bound state point) has none
        let upper = square_well_resonances(4.0, 1.0, (0.5, 6.0), (0.1, 2.0));
        assert!(upper.is_empty());
        // shallower wells push the poles deeper: the same window empties out
        let weak = square_well_resonances(0.05, 1.0, (-4.0, 4.0), (-0.8, -1e-3));
        assert!(weak.is_empty());
    }

    #[test]
    fn lattice_zero_potential_is_zero() {
        let z = Potential::zero();
        let f = |e: f64| (-(e - 1.0) * (e - 1.0)).exp();
        let v = lattice_trace(&z, f, 8.0, 1.0).unwrap();
        assert!(v.abs() < 1e-9);
    }
}
