//! Potential models, their gradients and effective supports, and the moment
//! integrals feeding the high-energy expansion of log D:
//!
//!     α₋₁ = (1/4π) ∫ V,
//!     α₀  = (1/16π) ∫ V²,
//!     α₁  = (1/192π) ∫ (|∇V|² + 2V³).
//!
//! All built-in models are radial wells; `GridSampled` ingests arbitrary
//! tabulated data (trilinear interpolation inside the box, zero outside).

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre_on, pairwise_sum};
use crate::{vec3_dist, Vec3};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Relative support cutoff defining R_eff: sup_{|x|>R_eff} |V| ≤ ε_supp·max|V|.
pub const SUPPORT_CUTOFF: f64 = 1e-10;

/// Analytic shape of a potential (plus parameters).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialModel {
    /// V(x) = −V₀ exp(−|x−c|²/σ²); superexponential decay, D(k) entire.
    GaussianWell { depth: f64, sigma: f64 },
    /// V(x) = −V₀ (1 − |x−c|²/a²)³ on |x−c| ≤ a, zero outside; C² with
    /// compact support.
    PolynomialBump { depth: f64, radius: f64 },
    /// V(x) = −V₀ on |x−c| ≤ a, zero outside. Not C²: gradient and α₁
    /// requests are rejected.
    SquareWell { depth: f64, radius: f64 },
    /// Tabulated values on a regular box grid.
    GridSampled(GridData),
}

/// Regular grid of samples, x-fastest storage order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridData {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub origin: Vec3,
    pub spacing: Vec3,
    pub values: Vec<f64>,
}

/// A real short-range potential with its smoothness class and effective
/// support radius.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Potential {
    model: PotentialModel,
    center: Vec3,
    smooth: bool,
    r_eff: f64,
}

/// Moment integrals with one-refinement error estimates.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Moments {
    pub alpha_m1: f64,
    pub alpha_0: f64,
    /// Only present when the potential is C² and α₁ was requested.
    pub alpha_1: Option<f64>,
    /// |change under one quadrature refinement| for (α₋₁, α₀, α₁).
    pub error_estimates: [f64; 3],
}

/// Which moments to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MomentRequest {
    /// α₋₁ and α₀ only (valid for any potential).
    UpToAlpha0,
    /// All three; fails with `NotDifferentiable` on non-C² potentials.
    All,
}

impl Potential {
    pub fn gaussian_well(depth: f64, sigma: f64) -> Self {
        assert!(sigma > 0.0, "gaussian width must be positive");
        let r_eff = if depth == 0.0 {
            sigma
        } else {
            sigma * (1.0 / SUPPORT_CUTOFF).ln().sqrt()
        };
        Potential {
            model: PotentialModel::GaussianWell { depth, sigma },
            center: [0.0; 3],
            smooth: true,
            r_eff,
        }
    }

    pub fn polynomial_bump(depth: f64, radius: f64) -> Self {
        assert!(radius > 0.0);
        Potential {
            model: PotentialModel::PolynomialBump { depth, radius },
            center: [0.0; 3],
            smooth: true,
            r_eff: radius,
        }
    }

    pub fn square_well(depth: f64, radius: f64) -> Self {
        assert!(radius > 0.0);
        Potential {
            model: PotentialModel::SquareWell { depth, radius },
            center: [0.0; 3],
            smooth: false,
            r_eff: radius,
        }
    }

    /// V ≡ 0 (represented as a zero-depth gaussian).
    pub fn zero() -> Self {
        Potential::gaussian_well(0.0, 1.0)
    }

    pub fn grid_sampled(data: GridData) -> Result<Self> {
        if data.values.len() != data.nx * data.ny * data.nz {
            return Err(Error::GridFile(format!(
                "value count {} does not match {}x{}x{}",
                data.values.len(),
                data.nx,
                data.ny,
                data.nz
            )));
        }
        if !data.values.iter().all(|v| v.is_finite()) {
            return Err(Error::GridFile("non-finite sample".into()));
        }
        let vmax = data.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // center of the box; support radius from the farthest sample above cutoff
        let ext = [
            data.origin[0] + data.spacing[0] * (data.nx.saturating_sub(1)) as f64,
            data.origin[1] + data.spacing[1] * (data.ny.saturating_sub(1)) as f64,
            data.origin[2] + data.spacing[2] * (data.nz.saturating_sub(1)) as f64,
        ];
        let center = [
            0.5 * (data.origin[0] + ext[0]),
            0.5 * (data.origin[1] + ext[1]),
            0.5 * (data.origin[2] + ext[2]),
        ];
        let mut r_eff = 0.0f64;
        for iz in 0..data.nz {
            for iy in 0..data.ny {
                for ix in 0..data.nx {
                    let v = data.values[ix + data.nx * (iy + data.ny * iz)];
                    if v.abs() > SUPPORT_CUTOFF * vmax {
                        let p = [
                            data.origin[0] + ix as f64 * data.spacing[0],
                            data.origin[1] + iy as f64 * data.spacing[1],
                            data.origin[2] + iz as f64 * data.spacing[2],
                        ];
                        r_eff = r_eff.max(vec3_dist(p, center));
                    }
                }
            }
        }
        if r_eff == 0.0 {
            r_eff = data.spacing[0].max(data.spacing[1]).max(data.spacing[2]).max(1e-3);
        }
        // one grid cell of margin so interpolation tails are covered
        let cell = data.spacing[0].max(data.spacing[1]).max(data.spacing[2]);
        Ok(Potential {
            model: PotentialModel::GridSampled(data),
            center,
            smooth: true,
            r_eff: r_eff + cell,
        })
    }

    pub fn with_center(mut self, center: Vec3) -> Self {
        if let PotentialModel::GridSampled(_) = self.model {
            // grid center is fixed by the box; ignore
            return self;
        }
        self.center = center;
        self
    }

    pub fn model(&self) -> &PotentialModel {
        &self.model
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    /// C² smoothness class.
    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    /// Effective support radius (about the center).
    pub fn r_eff(&self) -> f64 {
        self.r_eff
    }

    pub fn is_zero(&self) -> bool {
        match &self.model {
            PotentialModel::GaussianWell { depth, .. }
            | PotentialModel::PolynomialBump { depth, .. }
            | PotentialModel::SquareWell { depth, .. } => *depth == 0.0,
            PotentialModel::GridSampled(g) => g.values.iter().all(|&v| v == 0.0),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match &self.model {
            PotentialModel::GaussianWell { depth, .. }
            | PotentialModel::PolynomialBump { depth, .. }
            | PotentialModel::SquareWell { depth, .. } => depth.abs(),
            PotentialModel::GridSampled(g) => g.values.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        }
    }

    /// Characteristic length of the well (σ or a); grid: half the support.
    pub fn characteristic_length(&self) -> f64 {
        match &self.model {
            PotentialModel::GaussianWell { sigma, .. } => *sigma,
            PotentialModel::PolynomialBump { radius, .. }
            | PotentialModel::SquareWell { radius, .. } => *radius,
            PotentialModel::GridSampled(_) => 0.5 * self.r_eff,
        }
    }

    /// Radial profile v(r) about the center, for the radial models.
    pub fn radial_profile(&self, r: f64) -> Option<f64> {
        match &self.model {
            PotentialModel::GaussianWell { depth, sigma } => {
                Some(-depth * (-(r * r) / (sigma * sigma)).exp())
            }
            PotentialModel::PolynomialBump { depth, radius } => {
                if r <= *radius {
                    let u = 1.0 - (r * r) / (radius * radius);
                    Some(-depth * u * u * u)
                } else {
                    Some(0.0)
                }
            }
            PotentialModel::SquareWell { depth, radius } => {
                Some(if r <= *radius { -depth } else { 0.0 })
            }
            PotentialModel::GridSampled(_) => None,
        }
    }

    /// V(x); trilinear interpolation for grids, zero outside the box.
    pub fn evaluate(&self, x: Vec3) -> f64 {
        match &self.model {
            PotentialModel::GridSampled(g) => g.trilinear(x),
            _ => {
                let r = vec3_dist(x, self.center);
                self.radial_profile(r).unwrap()
            }
        }
    }

    /// ∇V(x); closed form for the analytic models, central differences with
    /// step h_grad = cell/2 for grids.
    pub fn gradient(&self, x: Vec3) -> Result<Vec3> {
        if !self.smooth {
            return Err(Error::NotDifferentiable);
        }
        match &self.model {
            PotentialModel::GaussianWell { sigma, .. } => {
                let v = self.evaluate(x);
                let s2 = sigma * sigma;
                Ok([
                    -2.0 * (x[0] - self.center[0]) * v / s2,
                    -2.0 * (x[1] - self.center[1]) * v / s2,
                    -2.0 * (x[2] - self.center[2]) * v / s2,
                ])
            }
            PotentialModel::PolynomialBump { depth, radius } => {
                let d = crate::vec3_sub(x, self.center);
                let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                let a2 = radius * radius;
                if r2 >= a2 {
                    return Ok([0.0; 3]);
                }
                let u = 1.0 - r2 / a2;
                let c = 6.0 * depth * u * u / a2;
                Ok([c * d[0], c * d[1], c * d[2]])
            }
            PotentialModel::SquareWell { .. } => Err(Error::NotDifferentiable),
            PotentialModel::GridSampled(g) => {
                let h = [
                    0.5 * g.spacing[0],
                    0.5 * g.spacing[1],
                    0.5 * g.spacing[2],
                ];
                let mut grad = [0.0; 3];
                for d in 0..3 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[d] += h[d];
                    xm[d] -= h[d];
                    grad[d] = (g.trilinear(xp) - g.trilinear(xm)) / (2.0 * h[d]);
                }
                Ok(grad)
            }
        }
    }

    /// (|V(x)|^{1/2}, Ṽ^{1/2}(x)); both zero where V vanishes, product = V.
    pub fn split_weights(&self, x: Vec3) -> (f64, f64) {
        split_value(self.evaluate(x))
    }

    /// Moment integrals by radial(-angular) quadrature over |x| ≤ R_eff with a
    /// one-step refinement error estimate.
    pub fn moments(&self, request: MomentRequest) -> Result<Moments> {
        if request == MomentRequest::All && !self.smooth {
            return Err(Error::NotDifferentiable);
        }
        if self.is_zero() {
            return Ok(Moments {
                alpha_m1: 0.0,
                alpha_0: 0.0,
                alpha_1: if request == MomentRequest::All { Some(0.0) } else { None },
                error_estimates: [0.0; 3],
            });
        }
        let with_a1 = request == MomentRequest::All;
        let (coarse, fine) = match &self.model {
            PotentialModel::GridSampled(_) => {
                (self.moment_integrals_3d(48, 24, with_a1), self.moment_integrals_3d(64, 32, with_a1))
            }
            _ => (self.moment_integrals_radial(96, with_a1), self.moment_integrals_radial(144, with_a1)),
        };
        let err = [
            (fine[0] - coarse[0]).abs(),
            (fine[1] - coarse[1]).abs(),
            (fine[2] - coarse[2]).abs(),
        ];
        let scale = fine[0].abs().max(fine[1].abs()).max(1e-300);
        // trilinear interpolants are only C⁰, so gridded data converges slowly
        let rel = if matches!(self.model, PotentialModel::GridSampled(_)) { 1e-2 } else { 1e-6 };
        let tol = rel * scale;
        if err[0].max(err[1]) > tol {
            return Err(Error::QuadratureNotConverged { delta: err[0].max(err[1]), tol });
        }
        Ok(Moments {
            alpha_m1: fine[0],
            alpha_0: fine[1],
            alpha_1: if with_a1 { Some(fine[2]) } else { None },
            error_estimates: err,
        })
    }

    /// ∫ V³ dx (drives the 1/k³ term of Tr Q₀³; α₁⁰ = ∫V³ / 96π).
    pub fn v_cubed_integral(&self) -> f64 {
        match &self.model {
            PotentialModel::GridSampled(_) => self.integral_3d(64, 32, |v, _| v * v * v),
            _ => self.integral_radial(144, |r| {
                let v = self.radial_profile(r).unwrap();
                v * v * v
            }),
        }
    }

    fn integral_radial(&self, n: usize, f: impl Fn(f64) -> f64) -> f64 {
        let (r, w) = gauss_legendre_on(n, 0.0, self.r_eff);
        let terms: Vec<f64> = r
            .iter()
            .zip(&w)
            .map(|(&ri, &wi)| 4.0 * std::f64::consts::PI * ri * ri * wi * f(ri))
            .collect();
        pairwise_sum(&terms)
    }

    /// [∫V, ∫V², ∫(|∇V|²+2V³)] → [α₋₁, α₀, α₁] for radial closed-form models.
    fn moment_integrals_radial(&self, n: usize, with_a1: bool) -> [f64; 3] {
        use std::f64::consts::PI;
        let i_v = self.integral_radial(n, |r| self.radial_profile(r).unwrap());
        let i_v2 = self.integral_radial(n, |r| {
            let v = self.radial_profile(r).unwrap();
            v * v
        });
        let i_a1 = if with_a1 {
            self.integral_radial(n, |r| {
                let v = self.radial_profile(r).unwrap();
                let dv = self.radial_derivative(r);
                dv * dv + 2.0 * v * v * v
            })
        } else {
            0.0
        };
        [i_v / (4.0 * PI), i_v2 / (16.0 * PI), i_a1 / (192.0 * PI)]
    }

    fn radial_derivative(&self, r: f64) -> f64 {
        match &self.model {
            PotentialModel::GaussianWell { depth, sigma } => {
                let s2 = sigma * sigma;
                2.0 * r / s2 * depth * (-(r * r) / s2).exp()
            }
            PotentialModel::PolynomialBump { depth, radius } => {
                let a2 = radius * radius;
                if r >= *radius {
                    0.0
                } else {
                    let u = 1.0 - r * r / a2;
                    6.0 * depth * r * u * u / a2
                }
            }
            _ => 0.0,
        }
    }

    /// Radial × angular product quadrature for gridded (possibly non-radial)
    /// potentials.
    fn moment_integrals_3d(&self, nr: usize, nang: usize, with_a1: bool) -> [f64; 3] {
        use std::f64::consts::PI;
        let mut iv = Vec::new();
        let mut iv2 = Vec::new();
        let mut ia1 = Vec::new();
        let (rs, wr) = gauss_legendre_on(nr, 0.0, self.r_eff);
        let (cts, wct) = gauss_legendre_on(nang, -1.0, 1.0);
        let nphi = 2 * nang;
        let wphi = 2.0 * PI / nphi as f64;
        for (&r, &wri) in rs.iter().zip(&wr) {
            for (&ct, &wcti) in cts.iter().zip(&wct) {
                let st = (1.0 - ct * ct).sqrt();
                for ip in 0..nphi {
                    let phi = wphi * ip as f64;
                    let x = [
                        self.center[0] + r * st * phi.cos(),
                        self.center[1] + r * st * phi.sin(),
                        self.center[2] + r * ct,
                    ];
                    let w = wri * wcti * wphi * r * r;
                    let v = self.evaluate(x);
                    iv.push(w * v);
                    iv2.push(w * v * v);
                    if with_a1 {
                        let g = self.gradient(x).unwrap_or([0.0; 3]);
                        let g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
                        ia1.push(w * (g2 + 2.0 * v * v * v));
                    }
                }
            }
        }
        [
            pairwise_sum(&iv) / (4.0 * PI),
            pairwise_sum(&iv2) / (16.0 * PI),
            if with_a1 { pairwise_sum(&ia1) / (192.0 * PI) } else { 0.0 },
        ]
    }

    fn integral_3d(&self, nr: usize, nang: usize, f: impl Fn(f64, Vec3) -> f64) -> f64 {
        use std::f64::consts::PI;
        let mut acc = Vec::new();
        let (rs, wr) = gauss_legendre_on(nr, 0.0, self.r_eff);
        let (cts, wct) = gauss_legendre_on(nang, -1.0, 1.0);
        let nphi = 2 * nang;
        let wphi = 2.0 * PI / nphi as f64;
        for (&r, &wri) in rs.iter().zip(&wr) {
            for (&ct, &wcti) in cts.iter().zip(&wct) {
                let st = (1.0 - ct * ct).sqrt();
                for ip in 0..nphi {
                    let phi = wphi * ip as f64;
                    let x = [
                        self.center[0] + r * st * phi.cos(),
                        self.center[1] + r * st * phi.sin(),
                        self.center[2] + r * ct,
                    ];
                    acc.push(wri * wcti * wphi * r * r * f(self.evaluate(x), x));
                }
            }
        }
        pairwise_sum(&acc)
    }

    /// Sample an analytic potential onto a regular grid (for round-trip tests
    /// and file export).
    pub fn sample_to_grid(&self, n: usize) -> GridData {
        let r = self.r_eff;
        let spacing = 2.0 * r / (n - 1) as f64;
        let origin = [
            self.center[0] - r,
            self.center[1] - r,
            self.center[2] - r,
        ];
        let mut values = Vec::with_capacity(n * n * n);
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    let x = [
                        origin[0] + ix as f64 * spacing,
                        origin[1] + iy as f64 * spacing,
                        origin[2] + iz as f64 * spacing,
                    ];
                    values.push(self.evaluate(x));
                }
            }
        }
        GridData {
            nx: n,
            ny: n,
            nz: n,
            origin,
            spacing: [spacing; 3],
            values,
        }
    }
}

/// Sign/magnitude split of a single value: (|v|^{1/2}, v/|v|^{1/2}).
pub fn split_value(v: f64) -> (f64, f64) {
    if v == 0.0 {
        (0.0, 0.0)
    } else {
        let s = v.abs().sqrt();
        (s, if v > 0.0 { s } else { -s })
    }
}

impl GridData {
    /// Trilinear interpolation; zero outside the sampled box.
    pub fn trilinear(&self, x: Vec3) -> f64 {
        let fx = (x[0] - self.origin[0]) / self.spacing[0];
        let fy = (x[1] - self.origin[1]) / self.spacing[1];
        let fz = (x[2] - self.origin[2]) / self.spacing[2];
        if fx < 0.0 || fy < 0.0 || fz < 0.0 {
            return 0.0;
        }
        let (ix, iy, iz) = (fx.floor() as usize, fy.floor() as usize, fz.floor() as usize);
        if ix + 1 >= self.nx || iy + 1 >= self.ny || iz + 1 >= self.nz {
            // on the far faces fall back to the exact boundary sample
            if fx <= (self.nx - 1) as f64 + 1e-12
                && fy <= (self.ny - 1) as f64 + 1e-12
                && fz <= (self.nz - 1) as f64 + 1e-12
            {
                let cx = (fx.round() as usize).min(self.nx - 1);
                let cy = (fy.round() as usize).min(self.ny - 1);
                let cz = (fz.round() as usize).min(self.nz - 1);
                if (fx - cx as f64).abs() < 1e-12
                    && (fy - cy as f64).abs() < 1e-12
                    && (fz - cz as f64).abs() < 1e-12
                {
                    return self.values[cx + self.nx * (cy + self.ny * cz)];
                }
            }
            if fx > (self.nx - 1) as f64 || fy > (self.ny - 1) as f64 || fz > (self.nz - 1) as f64 {
                return 0.0;
            }
            // interior-adjacent boundary cell: clamp the upper corner
            let ix = ix.min(self.nx - 2);
            let iy = iy.min(self.ny - 2);
            let iz = iz.min(self.nz - 2);
            return self.cell_interp(ix, iy, iz, fx, fy, fz);
        }
        self.cell_interp(ix, iy, iz, fx, fy, fz)
    }

    fn cell_interp(&self, ix: usize, iy: usize, iz: usize, fx: f64, fy: f64, fz: f64) -> f64 {
        let (tx, ty, tz) = (fx - ix as f64, fy - iy as f64, fz - iz as f64);
        let at = |i: usize, j: usize, k: usize| self.values[i + self.nx * (j + self.ny * k)];
        let mut acc = 0.0;
        for dz in 0..2 {
            for dy in 0..2 {
                for dx in 0..2 {
                    let w = (if dx == 1 { tx } else { 1.0 - tx })
                        * (if dy == 1 { ty } else { 1.0 - ty })
                        * (if dz == 1 { tz } else { 1.0 - tz });
                    acc += w * at(ix + dx, iy + dy, iz + dz);
                }
            }
        }
        acc
    }
}

const GRID_MAGIC: &[u8; 4] = b"DSCP";
const GRID_VERSION: u32 = 1;

/// Write a grid-sampled potential file: magic "DSCP", version u32,
/// nx ny nz u32, origin 3×f64, spacing 3×f64, then nx·ny·nz little-endian f64
/// in x-fastest order.
pub fn write_grid_file(path: &Path, g: &GridData) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(GRID_MAGIC)?;
    f.write_all(&GRID_VERSION.to_le_bytes())?;
    for n in [g.nx, g.ny, g.nz] {
        f.write_all(&(n as u32).to_le_bytes())?;
    }
    for v in g.origin.iter().chain(g.spacing.iter()) {
        f.write_all(&v.to_le_bytes())?;
    }
    for v in &g.values {
        f.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Read a DSCP grid file written by [`write_grid_file`].
pub fn read_grid_file(path: &Path) -> Result<GridData> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != GRID_MAGIC {
        return Err(Error::GridFile("bad magic".into()));
    }
    let mut u = [0u8; 4];
    f.read_exact(&mut u)?;
    let version = u32::from_le_bytes(u);
    if version != GRID_VERSION {
        return Err(Error::GridFile(format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        f.read_exact(&mut u)?;
        *d = u32::from_le_bytes(u) as usize;
    }
    let mut b = [0u8; 8];
    let mut origin = [0.0; 3];
    let mut spacing = [0.0; 3];
    for v in origin.iter_mut().chain(spacing.iter_mut()) {
        f.read_exact(&mut b)?;
        *v = f64::from_le_bytes(b);
    }
    let count = dims[0]
        .checked_mul(dims[1])
        .and_then(|c| c.checked_mul(dims[2]))
        .ok_or_else(|| Error::GridFile("dimension overflow".into()))?;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        f.read_exact(&mut b)?;
        values.push(f64::from_le_bytes(b));
    }
    Ok(GridData {
        nx: dims[0],
        ny: dims[1],
        nz: dims[2],
        origin,
        spacing,
        values,
    })
}
