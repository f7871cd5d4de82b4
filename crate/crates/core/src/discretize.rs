//! Quadrature grids on the potential support and dense Nyström matrices for
//! the Birman–Schwinger family Q₀(k), Q₀′(k) and Q(k) = I − (I+Q₀)^{−1}.
//!
//! The Q₀ kernel |V(x)|^{1/2} e^{ik|x−y|}/(4π|x−y|) Ṽ^{1/2}(y) is weakly
//! singular on the diagonal; diagonal entries use the exact average of the
//! kernel over the node's quadrature cell, with the cell modelled as the
//! volume-equivalent ball (frozen against the Tr Q₀² oracle, see
//! [`tr_q0_squared_nystrom`]). Assembly is valid for any complex k; accuracy
//! in the lower half-plane is gated by [`kappa_max`] since the kernel grows
//! like e^{|Im k|·diam}.

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::quadrature::{gauss_legendre_on, pairwise_sum, pairwise_sum_c};
use crate::{vec3_dist, Vec3};
use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Default memory budget: grids beyond ~6000 nodes are out of scope.
pub const DEFAULT_NODE_BUDGET: usize = 6000;

/// Conditioning threshold used by the κ_max gate: assembly depth κ solves
/// e^{2κ·R_eff}·ε_machine = 1e−6.
pub fn kappa_max(r_eff: f64) -> f64 {
    (1e-6 / f64::EPSILON).ln() / (2.0 * r_eff)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum GridScheme {
    /// Tensor-product Gauss–Legendre nodes over the cube [−R_eff, R_eff]³.
    TensorGaussLegendre,
    /// Radial Gauss–Legendre × (Gauss in cos θ × uniform in φ) product over
    /// the ball |x| ≤ R_eff; the quadrature domain matches the support of the
    /// compactly supported models exactly.
    RadialAngularProduct,
}

/// Nodes and positive weights covering the effective support of a potential.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub scheme: GridScheme,
    /// Largest node-to-neighbour spacing scale, 2·max ball radius.
    pub cell_diameter: f64,
    /// Volume of the covered region (cube or ball).
    pub domain_volume: f64,
    /// Support radius the grid was built for.
    pub radius: f64,
    /// Volume-equivalent ball radius per node, R_i = (3 w_i / 4π)^{1/3}.
    pub cell_radius: Vec<f64>,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Σ weights, for the volume invariant.
    pub fn weight_sum(&self) -> f64 {
        pairwise_sum(&self.weights)
    }
}

/// Tensor-product Gauss–Legendre grid over [−R_eff, R_eff]³ (the default
/// scheme), `resolution` nodes per axis.
pub fn build_grid(potential: &Potential, resolution: usize) -> Result<QuadratureGrid> {
    build_grid_with_budget(potential, resolution, DEFAULT_NODE_BUDGET)
}

pub fn build_grid_with_budget(
    potential: &Potential,
    resolution: usize,
    budget: usize,
) -> Result<QuadratureGrid> {
    assert!(resolution >= 2, "resolution must be at least 2");
    let n = resolution * resolution * resolution;
    if n > budget {
        return Err(Error::ResolutionTooLarge { requested: n, budget });
    }
    let r = potential.r_eff();
    let c = potential.center();
    let (x1, w1) = gauss_legendre_on(resolution, -r, r);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for iz in 0..resolution {
        for iy in 0..resolution {
            for ix in 0..resolution {
                nodes.push([c[0] + x1[ix], c[1] + x1[iy], c[2] + x1[iz]]);
                weights.push(w1[ix] * w1[iy] * w1[iz]);
            }
        }
    }
    Ok(finish_grid(
        nodes,
        weights,
        GridScheme::TensorGaussLegendre,
        8.0 * r * r * r,
        r,
    ))
}

/// Radial × angular product grid over the ball |x − c| ≤ R_eff.
pub fn build_radial_grid(
    potential: &Potential,
    n_r: usize,
    n_theta: usize,
    n_phi: usize,
) -> Result<QuadratureGrid> {
    build_radial_grid_with_budget(potential, n_r, n_theta, n_phi, DEFAULT_NODE_BUDGET)
}

pub fn build_radial_grid_with_budget(
    potential: &Potential,
    n_r: usize,
    n_theta: usize,
    n_phi: usize,
    budget: usize,
) -> Result<QuadratureGrid> {
    assert!(n_r >= 2 && n_theta >= 2 && n_phi >= 3);
    let n = n_r * n_theta * n_phi;
    if n > budget {
        return Err(Error::ResolutionTooLarge { requested: n, budget });
    }
    let r_eff = potential.r_eff();
    let c = potential.center();
    let (rs, wr) = gauss_legendre_on(n_r, 0.0, r_eff);
    let (cts, wct) = gauss_legendre_on(n_theta, -1.0, 1.0);
    let wphi = 2.0 * PI / n_phi as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (&r, &wri) in rs.iter().zip(&wr) {
        for (&ct, &wcti) in cts.iter().zip(&wct) {
            let st = (1.0 - ct * ct).sqrt();
            for ip in 0..n_phi {
                // half-step offset keeps the φ family free of axis-aligned ties
                let phi = wphi * (ip as f64 + 0.5);
                nodes.push([
                    c[0] + r * st * phi.cos(),
                    c[1] + r * st * phi.sin(),
                    c[2] + r * ct,
                ]);
                weights.push(wri * wcti * wphi * r * r);
            }
        }
    }
    Ok(finish_grid(
        nodes,
        weights,
        GridScheme::RadialAngularProduct,
        4.0 / 3.0 * PI * r_eff * r_eff * r_eff,
        r_eff,
    ))
}

fn finish_grid(
    nodes: Vec<Vec3>,
    weights: Vec<f64>,
    scheme: GridScheme,
    domain_volume: f64,
    radius: f64,
) -> QuadratureGrid {
    let cell_radius: Vec<f64> = weights
        .iter()
        .map(|&w| (3.0 * w / (4.0 * PI)).cbrt())
        .collect();
    let cell_diameter = 2.0 * cell_radius.iter().fold(0.0f64, |m, &r| m.max(r));
    QuadratureGrid {
        nodes,
        weights,
        scheme,
        cell_diameter,
        domain_volume,
        radius,
        cell_radius,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixKind {
    Q0,
    Q0Prime,
    Q,
}

/// Dense discretization of Q₀(k), Q₀′(k) or Q(k) on a grid.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub k: Complex64,
    pub kind: MatrixKind,
    pub entries: Mat<Complex64>,
    pub condition_estimate: f64,
}

impl OperatorMatrix {
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    /// Σ_i M_ii.
    pub fn trace(&self) -> Complex64 {
        let d: Vec<Complex64> = (0..self.size()).map(|i| self.entries[(i, i)]).collect();
        pairwise_sum_c(&d)
    }

    /// Σ_{ij} M_ij M_ji (the matrix's own second-order trace content).
    pub fn trace_squared(&self) -> Complex64 {
        let n = self.size();
        let mut acc = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Complex64::new(0.0, 0.0);
            for j in 0..n {
                row += self.entries[(i, j)] * self.entries[(j, i)];
            }
            acc.push(row);
        }
        pairwise_sum_c(&acc)
    }

    /// Σ_{ijl} M_ij M_jl M_li via one matrix product.
    pub fn trace_cubed(&self) -> Complex64 {
        let m2 = &self.entries * &self.entries;
        let n = self.size();
        let mut acc = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Complex64::new(0.0, 0.0);
            for j in 0..n {
                row += m2[(i, j)] * self.entries[(j, i)];
            }
            acc.push(row);
        }
        pairwise_sum_c(&acc)
    }

    /// Frobenius norm (discrete Hilbert–Schmidt norm).
    pub fn frobenius_norm(&self) -> f64 {
        let n = self.size();
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                acc += self.entries[(i, j)].norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Largest singular value by power iteration on MᴴM.
    pub fn spectral_norm_estimate(&self) -> f64 {
        let n = self.size();
        if n == 0 {
            return 0.0;
        }
        let mut v = Mat::<Complex64>::from_fn(n, 1, |i, _| {
            Complex64::new(1.0 + (i as f64 * 0.7).sin(), (i as f64 * 1.3).cos())
        });
        let mut norm = 0.0;
        for _ in 0..30 {
            let w = &self.entries * &v;
            let u = self.entries.adjoint() * &w;
            let nn = u.norm_l2();
            if nn == 0.0 {
                return 0.0;
            }
            v = Mat::from_fn(n, 1, |i, _| u[(i, 0)] / nn);
            let new = nn.sqrt();
            if (new - norm).abs() <= 1e-10 * new.max(1e-300) {
                return new;
            }
            norm = new;
        }
        norm
    }
}

/// ∫₀^R r e^{ikr} dr (the radial core of the ball-averaged kernel).
fn ball_kernel_moment(k: Complex64, r: f64) -> Complex64 {
    let z = Complex64::i() * k * r;
    if z.norm() < 0.2 {
        // r² Σ zⁿ/(n!(n+2)) — avoids cancellation at small |k|R
        let mut term = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.5, 0.0);
        for n in 1..12 {
            term *= z / n as f64;
            acc += term / (n as f64 + 2.0);
        }
        acc * r * r
    } else {
        // (1 + e^{z}(z − 1)) / (ik)² with z = ikR
        (Complex64::new(1.0, 0.0) + z.exp() * (z - 1.0)) / (Complex64::i() * k).powi(2)
    }
}

/// Cell-averaged diagonal kernel value: (1/w)∫_ball e^{ikr}/(4πr) dV.
fn diagonal_kernel_average(k: Complex64, cell_radius: f64, weight: f64) -> Complex64 {
    ball_kernel_moment(k, cell_radius) / weight
}

/// Free-resolvent kernel e^{ik|x−y|}/(4π|x−y|).
#[inline]
fn free_kernel(k: Complex64, r: f64) -> Complex64 {
    (Complex64::i() * k * r).exp() / (4.0 * PI * r)
}

/// Assemble M_ij = w_j |V(x_i)|^{1/2} K(x_i,x_j;k) Ṽ^{1/2}(x_j) with the
/// ball-averaged diagonal correction.
pub fn assemble_q0(grid: &QuadratureGrid, potential: &Potential, k: Complex64) -> OperatorMatrix {
    let n = grid.len();
    let mut s = vec![0.0; n];
    let mut st = vec![0.0; n];
    for i in 0..n {
        let (a, b) = potential.split_weights(grid.nodes[i]);
        s[i] = a;
        st[i] = b;
    }
    // row-major buffer assembled in parallel over rows
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![Complex64::new(0.0, 0.0); n];
            if s[i] == 0.0 {
                return row;
            }
            let xi = grid.nodes[i];
            for (j, rj) in row.iter_mut().enumerate() {
                if st[j] == 0.0 {
                    continue;
                }
                let kernel = if i == j {
                    diagonal_kernel_average(k, grid.cell_radius[i], grid.weights[i])
                } else {
                    free_kernel(k, vec3_dist(xi, grid.nodes[j]))
                };
                *rj = grid.weights[j] * s[i] * st[j] * kernel;
            }
            row
        })
        .collect();
    let entries = Mat::from_fn(n, n, |i, j| rows[i][j]);
    let max_entry = rows
        .iter()
        .flatten()
        .fold(0.0f64, |m, z| m.max(z.norm()));
    OperatorMatrix {
        k,
        kind: MatrixKind::Q0,
        entries,
        condition_estimate: max_entry * n as f64,
    }
}

/// Assemble the k-derivative matrix with bounded kernel i·e^{ik|x−y|}/(4π).
pub fn assemble_q0_prime(
    grid: &QuadratureGrid,
    potential: &Potential,
    k: Complex64,
) -> OperatorMatrix {
    let n = grid.len();
    let mut s = vec![0.0; n];
    let mut st = vec![0.0; n];
    for i in 0..n {
        let (a, b) = potential.split_weights(grid.nodes[i]);
        s[i] = a;
        st[i] = b;
    }
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![Complex64::new(0.0, 0.0); n];
            if s[i] == 0.0 {
                return row;
            }
            let xi = grid.nodes[i];
            for (j, rj) in row.iter_mut().enumerate() {
                if st[j] == 0.0 {
                    continue;
                }
                let r = if i == j { 0.0 } else { vec3_dist(xi, grid.nodes[j]) };
                let kernel = Complex64::i() * (Complex64::i() * k * r).exp() / (4.0 * PI);
                *rj = grid.weights[j] * s[i] * st[j] * kernel;
            }
            row
        })
        .collect();
    let entries = Mat::from_fn(n, n, |i, j| rows[i][j]);
    let max_entry = rows.iter().flatten().fold(0.0f64, |m, z| m.max(z.norm()));
    OperatorMatrix {
        k,
        kind: MatrixKind::Q0Prime,
        entries,
        condition_estimate: max_entry * n as f64,
    }
}

/// Symmetrized form diag(u) E diag(u), u_i = √(w_i V_i) (complex square
/// root); similar to Q₀, so it shares the spectrum, and is complex symmetric,
/// real symmetric on the positive imaginary axis for sign-definite V.
pub fn assemble_q0_symmetrized(
    grid: &QuadratureGrid,
    potential: &Potential,
    k: Complex64,
) -> OperatorMatrix {
    let n = grid.len();
    let u: Vec<Complex64> = (0..n)
        .map(|i| {
            let v = potential.evaluate(grid.nodes[i]);
            Complex64::new(grid.weights[i] * v, 0.0).sqrt()
        })
        .collect();
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![Complex64::new(0.0, 0.0); n];
            if u[i].norm() == 0.0 {
                return row;
            }
            let xi = grid.nodes[i];
            for (j, rj) in row.iter_mut().enumerate() {
                if u[j].norm() == 0.0 {
                    continue;
                }
                let kernel = if i == j {
                    diagonal_kernel_average(k, grid.cell_radius[i], grid.weights[i])
                } else {
                    free_kernel(k, vec3_dist(xi, grid.nodes[j]))
                };
                *rj = u[i] * u[j] * kernel;
            }
            row
        })
        .collect();
    let entries = Mat::from_fn(n, n, |i, j| rows[i][j]);
    let max_entry = rows.iter().flatten().fold(0.0f64, |m, z| m.max(z.norm()));
    OperatorMatrix {
        k,
        kind: MatrixKind::Q0,
        entries,
        condition_estimate: max_entry * n as f64,
    }
}

/// Q(k) = I − (I+Q₀(k))^{−1}, the sandwiched full resolvent.
///
/// Fails with `SingularAtEigenvalue` when I + Q₀(k) is numerically singular,
/// which signals a bound state or resonance at k.
pub fn assemble_q(grid: &QuadratureGrid, potential: &Potential, k: Complex64) -> Result<OperatorMatrix> {
    let q0 = assemble_q0(grid, potential, k);
    let n = q0.size();
    let a = Mat::from_fn(n, n, |i, j| {
        let id = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
        id + q0.entries[(i, j)]
    });
    let lu = a.partial_piv_lu();
    let inv = lu.solve(&Mat::<Complex64>::identity(n, n));
    let mut max_inv = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            max_inv = max_inv.max(inv[(i, j)].norm());
        }
    }
    if !max_inv.is_finite() || max_inv > 1e13 {
        return Err(Error::SingularAtEigenvalue { k });
    }
    let entries = Mat::from_fn(n, n, |i, j| {
        let id = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
        id - inv[(i, j)]
    });
    Ok(OperatorMatrix {
        k,
        kind: MatrixKind::Q,
        entries,
        condition_estimate: max_inv * n as f64,
    })
}

/// Condition (C) spectral report: distance of σ(Q₀(0)) from −1.
#[derive(Clone, Debug)]
pub struct ConditionCReport {
    pub min_distance_to_minus_one: f64,
    pub pass: bool,
    pub spectral_radius: f64,
}

/// Assembles Q₀(0) and reports min_j |1 + μ_j|, pass/fail at 1e−6.
pub fn check_condition_c(grid: &QuadratureGrid, potential: &Potential) -> Result<ConditionCReport> {
    if potential.is_zero() {
        return Ok(ConditionCReport {
            min_distance_to_minus_one: 1.0,
            pass: true,
            spectral_radius: 0.0,
        });
    }
    let m = assemble_q0_symmetrized(grid, potential, Complex64::new(0.0, 0.0));
    let eigs: Vec<Complex64> = m
        .entries
        .eigenvalues()
        .map_err(|_| Error::EigenSolveFailed)?;
    let mut min_d = f64::INFINITY;
    let mut rad = 0.0f64;
    for mu in &eigs {
        min_d = min_d.min((mu + 1.0).norm());
        rad = rad.max(mu.norm());
    }
    Ok(ConditionCReport {
        min_distance_to_minus_one: min_d,
        pass: min_d > 1e-6,
        spectral_radius: rad,
    })
}

/// Average of E(|x−y|) = e^{2ik|x−y|}/(16π²|x−y|²) over the ball (c, R) as
/// seen from a point at distance d from c.
fn squared_kernel_ball_average(k: Complex64, d: f64, radius: f64, weight: f64) -> Complex64 {
    let two_ik = 2.0 * Complex64::i() * k;
    let e = |s: f64| (two_ik * s).exp() / (16.0 * PI * PI * s * s);
    let mut acc = Complex64::new(0.0, 0.0);
    if d < radius {
        // inner full-sphere part |x−y| ≤ R−d
        let s0 = radius - d;
        let exp_int = if (two_ik * s0).norm() < 1e-8 {
            Complex64::new(s0, 0.0)
        } else {
            ((two_ik * s0).exp() - 1.0) / two_ik
        };
        acc += exp_int / (4.0 * PI);
        let (xs, ws) = gauss_legendre_on(24, s0, radius + d);
        for (&sq, &wq) in xs.iter().zip(&ws) {
            let shell = PI * sq / d * (radius * radius - (d - sq) * (d - sq));
            acc += wq * shell * e(sq);
        }
    } else {
        let (xs, ws) = gauss_legendre_on(24, d - radius, d + radius);
        for (&sq, &wq) in xs.iter().zip(&ws) {
            let shell = PI * sq / d * (radius * radius - (d - sq) * (d - sq));
            acc += wq * shell * e(sq);
        }
    }
    acc / weight
}

/// Self-cell average of E over the node's own ball.
fn squared_kernel_self_average(k: Complex64, radius: f64, weight: f64) -> Complex64 {
    let two_ik = 2.0 * Complex64::i() * k;
    let exp_int = if (two_ik * radius).norm() < 1e-8 {
        Complex64::new(radius, 0.0)
    } else {
        ((two_ik * radius).exp() - 1.0) / two_ik
    };
    exp_int / (4.0 * PI * weight)
}

/// Grid-side evaluation of Tr Q₀²(k) = ∬ V(x)V(y) e^{2ik|x−y|}/(4π|x−y|)²:
/// pointwise product quadrature far from the diagonal, cell-averaged kernel
/// for near pairs (within `near_factor`·(R_i+R_j)) and the exact ball
/// self-term on the diagonal. This is the quantity gated against the
/// independent autocorrelation oracle, which freezes the singularity
/// correction.
pub fn tr_q0_squared_nystrom(
    grid: &QuadratureGrid,
    potential: &Potential,
    k: Complex64,
) -> Complex64 {
    let n = grid.len();
    let v: Vec<f64> = (0..n).map(|i| potential.evaluate(grid.nodes[i])).collect();
    let near_factor = 3.0;
    let rows: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|i| {
            if v[i] == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let xi = grid.nodes[i];
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if v[j] == 0.0 {
                    continue;
                }
                let wij = grid.weights[i] * grid.weights[j] * v[i] * v[j];
                if i == j {
                    acc += wij * squared_kernel_self_average(k, grid.cell_radius[i], grid.weights[i]);
                    continue;
                }
                let d = vec3_dist(xi, grid.nodes[j]);
                let cutoff = near_factor * (grid.cell_radius[i] + grid.cell_radius[j]);
                if d < cutoff {
                    // symmetrized single-ball smearing
                    let a = squared_kernel_ball_average(k, d, grid.cell_radius[j], grid.weights[j]);
                    let b = squared_kernel_ball_average(k, d, grid.cell_radius[i], grid.weights[i]);
                    acc += wij * 0.5 * (a + b);
                } else {
                    acc += wij * (2.0 * Complex64::i() * k * d).exp() / (16.0 * PI * PI * d * d);
                }
            }
            acc
        })
        .collect();
    pairwise_sum_c(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bump() -> Potential {
        Potential::polynomial_bump(3.0, 1.0)
    }

    #[test]
    fn grid_counts_and_weight_sums() {
        let g = build_grid(&bump(), 2).unwrap();
        assert_eq!(g.len(), 8);
        assert_relative_eq!(g.weight_sum(), 8.0, max_relative = 1e-12);
        let g4 = build_grid(&bump(), 4).unwrap();
        assert_eq!(g4.len(), 64);
        assert_relative_eq!(g4.weight_sum(), 8.0, max_relative = 1e-12);
        assert!(g4.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn grid_budget_guard() {
        assert!(matches!(
            build_grid(&bump(), 32),
            Err(Error::ResolutionTooLarge { .. })
        ));
    }

    #[test]
    fn radial_grid_volume() {
        let g = build_radial_grid(&bump(), 8, 6, 10).unwrap();
        assert_eq!(g.len(), 480);
        assert_relative_eq!(g.weight_sum(), 4.0 / 3.0 * PI, max_relative = 1e-12);
        let r_max = g.nodes.iter().map(|&p| crate::vec3_norm(p)).fold(0.0f64, f64::max);
        assert!(r_max <= g.radius + 1e-12);
    }

    #[test]
    fn zero_potential_assembles_zero_matrix() {
        let z = Potential::zero();
        let g = build_grid(&z, 3).unwrap();
        let m = assemble_q0(&g, &z, Complex64::new(1.0, 0.5));
        assert_eq!(m.size(), 27);
        assert_eq!(m.frobenius_norm(), 0.0);
    }

    #[test]
    fn conjugation_symmetry_of_assembly() {
        // kernel identity conj(e^{ikr}) = e^{i(−conj k)r} for real V, checked
        // entrywise on a hand-built 2-node grid
        let p = bump();
        let g = QuadratureGrid {
            nodes: vec![[0.1, 0.0, 0.2], [-0.3, 0.25, 0.0]],
            weights: vec![0.4, 0.6],
            scheme: GridScheme::TensorGaussLegendre,
            cell_diameter: 0.8,
            domain_volume: 1.0,
            radius: 1.0,
            cell_radius: vec![0.3, 0.35],
        };
        let k = Complex64::new(1.3, 0.7);
        let a = assemble_q0(&g, &p, k);
        let b = assemble_q0(&g, &p, -k.conj());
        for i in 0..2 {
            for j in 0..2 {
                let d = (b.entries[(i, j)] - a.entries[(i, j)].conj()).norm();
                assert!(d < 1e-15, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn q0_prime_diagonal_and_trace() {
        let p = Potential::gaussian_well(2.0, 0.8);
        let g = build_radial_grid(&p, 20, 6, 10).unwrap();
        let k = Complex64::new(0.7, 1.1);
        let m = assemble_q0_prime(&g, &p, k);
        // diagonal entries are w_i V(x_i) i / 4π independent of k
        for i in [0usize, 17, 300] {
            let expect = Complex64::i() * g.weights[i] * p.evaluate(g.nodes[i]) / (4.0 * PI);
            assert!((m.entries[(i, i)] - expect).norm() < 1e-15);
        }
        // trace ≈ i α₋₁ (grid quadrature of ∫V/4π)
        let alpha_m1 = p
            .moments(crate::potential::MomentRequest::UpToAlpha0)
            .unwrap()
            .alpha_m1;
        let tr = m.trace();
        assert!(
            (tr - Complex64::i() * alpha_m1).norm() < 1e-6 * alpha_m1.abs(),
            "trace {tr} vs iα₋₁ = {}i",
            alpha_m1
        );
        // and exactly the same trace at a different k
        let m2 = assemble_q0_prime(&g, &p, Complex64::new(5.0, 0.0));
        assert!((m2.trace() - tr).norm() < 1e-14);
    }

    #[test]
    fn q_satisfies_resolvent_identity() {
        // (I+Q₀)(I−Q) = I
        let p = bump();
        let g = build_radial_grid(&p, 6, 4, 6).unwrap();
        let k = Complex64::new(0.9, 0.4);
        let q0 = assemble_q0(&g, &p, k);
        let q = assemble_q(&g, &p, k).unwrap();
        let n = g.len();
        let prod = {
            let a = Mat::from_fn(n, n, |i, j| {
                (if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
                    + q0.entries[(i, j)]
            });
            let b = Mat::from_fn(n, n, |i, j| {
                (if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
                    - q.entries[(i, j)]
            });
            a * b
        };
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn symmetrized_real_spectrum_on_imaginary_axis() {
        let p = Potential::gaussian_well(2.0, 0.8);
        let g = build_grid(&p, 7).unwrap();
        let m = assemble_q0_symmetrized(&g, &p, Complex64::new(0.0, 1.5));
        let eigs: Vec<Complex64> = m.entries.eigenvalues().unwrap();
        let max_imag = eigs.iter().fold(0.0f64, |a, e| a.max(e.im.abs()));
        assert!(max_imag < 1e-8, "max imaginary part {max_imag}");
    }

    #[test]
    fn hs_norm_bounded_and_decaying_on_imaginary_axis() {
        let p = Potential::gaussian_well(2.0, 0.8);
        let g = build_grid(&p, 8).unwrap();
        let taus = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 40.0];
        let norms: Vec<f64> = taus
            .iter()
            .map(|&t| assemble_q0(&g, &p, Complex64::new(0.0, t)).frobenius_norm())
            .collect();
        for w in norms.windows(2) {
            assert!(w[1] < w[0] * 1.01, "HS norm should decay: {norms:?}");
        }
        // |k|·‖Q₀(k)‖ stays bounded along the ray (within 3× between 10 and 40)
        let op10 = assemble_q0(&g, &p, Complex64::new(0.0, 10.0)).spectral_norm_estimate();
        let op40 = assemble_q0(&g, &p, Complex64::new(0.0, 40.0)).spectral_norm_estimate();
        assert!(40.0 * op40 <= 3.0 * 10.0 * op10 + 1e-12);
    }

    #[test]
    fn eigenvalue_stability_under_refinement() {
        // at a resolution that resolves the e^{−2·2·r} kernel scale, the top
        // eigenvalue of Q₀(2i) settles to < 1% between res and res+2
        let p = Potential::gaussian_well(2.0, 0.5);
        let k = Complex64::new(0.0, 2.0);
        let top = |res: usize| {
            let g = build_grid(&p, res).unwrap();
            let m = assemble_q0_symmetrized(&g, &p, k);
            // dominant eigenvalue by power iteration (spectrum is real here)
            let n = m.size();
            let mut v = Mat::<Complex64>::from_fn(n, 1, |i, _| {
                Complex64::new(1.0 + (i as f64).sin(), 0.0)
            });
            let mut lam = 0.0;
            for _ in 0..200 {
                let w = &m.entries * &v;
                let nn = w.norm_l2();
                v = Mat::from_fn(n, 1, |i, _| w[(i, 0)] / nn);
                let rayleigh = {
                    let mv = &m.entries * &v;
                    let mut num = Complex64::new(0.0, 0.0);
                    for i in 0..n {
                        num += v[(i, 0)].conj() * mv[(i, 0)];
                    }
                    num
                };
                if (rayleigh.norm() - lam).abs() < 1e-12 * rayleigh.norm().max(1e-300) {
                    return rayleigh.norm();
                }
                lam = rayleigh.norm();
            }
            lam
        };
        let a = top(10);
        let b = top(12);
        assert!((a - b).abs() < 0.01 * b.abs(), "top eigenvalue {a} vs {b}");
    }

    #[test]
    fn condition_c_pass_for_shallow_well() {
        let p = Potential::gaussian_well(0.1, 1.0);
        let g = build_grid(&p, 7).unwrap();
        let rep = check_condition_c(&g, &p).unwrap();
        assert!(rep.pass);
        assert!(rep.spectral_radius < 1.0);
        let z = Potential::zero();
        let gz = build_grid(&z, 3).unwrap();
        let rz = check_condition_c(&gz, &z).unwrap();
        assert!(rz.pass && (rz.min_distance_to_minus_one - 1.0).abs() < 1e-12);
    }
}
