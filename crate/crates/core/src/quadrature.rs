//! Shared quadrature machinery: Gauss–Legendre rules, deterministic pairwise
//! summation, and a Filon-type rule for oscillatory integrals ∫ e^{ict} g(t) dt
//! with complex frequency c.

use num_complex::Complex64;

/// Gauss–Legendre nodes and weights on [-1, 1].
///
/// Newton iteration on P_n with the three-term recurrence; accurate to
/// machine precision for n up to a few hundred.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_pd(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pd(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_pd(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

/// P_n(x) and P_n'(x) by upward recurrence.
fn legendre_pd(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    (
        x.iter().map(|&t| c + h * t).collect(),
        w.iter().map(|&t| h * t).collect(),
    )
}

/// ∫_a^b f dx by an n-point Gauss–Legendre rule.
pub fn integrate_gl(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre_on(n, a, b);
    pairwise_sum(&x.iter().zip(&w).map(|(&xi, &wi)| wi * f(xi)).collect::<Vec<_>>())
}

/// Deterministic pairwise summation (order-independent reductions).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise summation for complex slices.
pub fn pairwise_sum_c(xs: &[Complex64]) -> Complex64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum_c(&xs[..mid]) + pairwise_sum_c(&xs[mid..])
}

/// Moments ∫_{-h}^{h} τ^m e^{icτ} dτ for m = 0, 1, 2.
///
/// Switches to a Taylor expansion for |c h| < 0.5 where the closed forms
/// cancel catastrophically.
fn filon_moments(c: Complex64, h: f64) -> [Complex64; 3] {
    let z = c * h;
    if z.norm() < 0.5 {
        // series in (ch); terms through (ch)^8 reach machine precision
        let z2 = z * z;
        let m0 = 2.0 * h
            * (1.0 - z2 / 6.0 + z2 * z2 / 120.0 - z2 * z2 * z2 / 5040.0
                + z2 * z2 * z2 * z2 / 362880.0);
        let m1 = Complex64::i() * (2.0 * h * h / 3.0)
            * (z - z * z2 / 10.0 + z * z2 * z2 / 280.0 - z * z2 * z2 * z2 / 15120.0);
        let m2 = (2.0 * h * h * h / 3.0)
            * (1.0 - 0.3 * z2 + z2 * z2 / 28.0 - z2 * z2 * z2 / 432.0);
        [m0, m1, m2]
    } else {
        let eich = (Complex64::i() * z).exp();
        let emich = (-Complex64::i() * z).exp();
        let ic = Complex64::i() * c;
        let sin_ch = (eich - emich) / (2.0 * Complex64::i());
        let cos_ch = (eich + emich) / 2.0;
        let m0 = 2.0 * sin_ch / c;
        let m1 = (2.0 * h * cos_ch - m0) / ic;
        let m2 = 2.0 * h * h * sin_ch / c - 2.0 * m1 / ic;
        [m0, m1, m2]
    }
}

/// Filon–Simpson evaluation of ∫_a^b e^{ict} g(t) dt over `panels` panels.
///
/// Exact in the oscillatory factor; the only error is the quadratic
/// interpolation of g per panel, so the panel count follows the smoothness of
/// g rather than |c|.
pub fn filon_fixed(g: impl Fn(f64) -> f64, a: f64, b: f64, c: Complex64, panels: usize) -> Complex64 {
    let n = panels.max(1);
    let h = (b - a) / (2.0 * n as f64);
    let mut contribs = Vec::with_capacity(n);
    for p in 0..n {
        let t0 = a + (2 * p) as f64 * h;
        let t1 = t0 + h;
        let t2 = t1 + h;
        let (g0, g1, g2) = (g(t0), g(t1), g(t2));
        let b1 = (g2 - g0) / (2.0 * h);
        let b2 = (g0 - 2.0 * g1 + g2) / (2.0 * h * h);
        let [m0, m1, m2] = filon_moments(c, h);
        let phase = (Complex64::i() * c * t1).exp();
        contribs.push(phase * (g1 * m0 + b1 * m1 + b2 * m2));
    }
    pairwise_sum_c(&contribs)
}

/// Adaptive Filon: doubles the panel count until the value settles to `tol`
/// (relative, with an absolute floor) or the panel budget is hit.
pub fn filon_adaptive(
    g: impl Fn(f64) -> f64 + Copy,
    a: f64,
    b: f64,
    c: Complex64,
    tol: f64,
) -> (Complex64, f64) {
    let mut n = 64usize;
    let mut prev = filon_fixed(g, a, b, c, n);
    loop {
        n *= 2;
        let next = filon_fixed(g, a, b, c, n);
        let err = (next - prev).norm();
        if err <= tol * next.norm().max(1e-300) + 1e-300 || n >= 16384 {
            return (next, err);
        }
        prev = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        // GL-n is exact through degree 2n-1
        let v = integrate_gl(|x| x.powi(7) - 3.0 * x.powi(4) + 2.0, -1.0, 2.0, 5);
        let exact = |x: f64| x.powi(8) / 8.0 - 0.6 * x.powi(5) + 2.0 * x;
        assert_relative_eq!(v, exact(2.0) - exact(-1.0), max_relative = 1e-14);
    }

    #[test]
    fn gl_weights_sum_to_length() {
        for n in [2usize, 7, 16, 64, 129] {
            let (_, w) = gauss_legendre_on(n, -2.5, 4.0);
            assert_relative_eq!(pairwise_sum(&w), 6.5, max_relative = 1e-13);
            assert!(w.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn filon_matches_closed_form_gaussian() {
        // ∫_0^∞ e^{ict} e^{-t²/2} dt has the closed form
        // sqrt(π/2) e^{-c²/2} (1 + erf(ic/√2)) / 1 … compare against a dense
        // rectangle-rule oracle instead of special functions.
        for &c in &[
            Complex64::new(3.0, 0.0),
            Complex64::new(20.0, 0.0),
            Complex64::new(8.0, 5.0),
            Complex64::new(6.0, -1.5),
            Complex64::new(0.05, 0.0),
        ] {
            let g = |t: f64| (-0.5 * t * t).exp();
            let upper = 14.0;
            let (v, _) = filon_adaptive(g, 0.0, upper, c, 1e-13);
            // brute-force oracle: fine Simpson with 2^20 intervals
            let n = 1 << 20;
            let h = upper / n as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..=n {
                let t = i as f64 * h;
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += w * (Complex64::i() * c * t).exp() * g(t);
            }
            acc *= h / 3.0;
            assert!((v - acc).norm() <= 1e-9 * acc.norm().max(1e-3), "c={c} v={v} oracle={acc}");
        }
    }
}
