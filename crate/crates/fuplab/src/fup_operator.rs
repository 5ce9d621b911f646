//! The discrete localization operator f̂ ↦ 1_X ℱ⁻¹(1_Y f̂) and its norm
//! across scales.
//!
//! Physical grid per axis: n = 2N·ov cell centres x_a = −1 + (a + ½)(2/n)
//! on [−1, 1]. Frequency grid: M = n·s points ξ_b = (b − M/2 + ½)/(2s), so
//! s = 1 is the dual grid and s > 1 refines frequencies. Entries are
//! e^{2πi x·ξ} (ΔxΔξ)^{d/2}; the full transform is a co-isometry for every
//! s, hence all restricted norms lie in [0, 1].

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::localization::SampledFunction;
use crate::quad::gauss_legendre;
use crate::regular_sets::{build_cantor, check_porosity, CantorSpec, GridSet};
use crate::spectral;

/// Largest matrix side handled by dense decompositions.
pub const DENSE_CAP: usize = 8192;
/// Largest entry count assembled densely in automatic mode.
pub const DENSE_ENTRY_CAP: usize = 1 << 21;
pub const POWER_TOL: f64 = 1e-8;
pub const POWER_MAX_ITER: usize = 10_000;

// ---------------------------------------------------------------------------
// Instances

/// Frequency-side set: a grid set, or a grid set rotated about the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FrequencySet {
    Grid(GridSet),
    /// {R_θ η : η ∈ set}, θ in radians.
    Rotated { set: GridSet, angle: f64 },
}

impl FrequencySet {
    pub fn dimension(&self) -> usize {
        match self {
            FrequencySet::Grid(s) | FrequencySet::Rotated { set: s, .. } => s.dimension(),
        }
    }

    pub fn contains(&self, xi: &[f64]) -> bool {
        match self {
            FrequencySet::Grid(s) => s.contains_point(xi),
            FrequencySet::Rotated { set, angle } => {
                let (c, s) = (angle.cos(), angle.sin());
                let eta = [c * xi[0] + s * xi[1], -s * xi[0] + c * xi[1]];
                set.contains_point(&eta)
            }
        }
    }

    fn base(&self) -> &GridSet {
        match self {
            FrequencySet::Grid(s) | FrequencySet::Rotated { set: s, .. } => s,
        }
    }

    /// Largest coordinate magnitude over the set's bounding box.
    fn reach(&self) -> f64 {
        let s = self.base();
        match self {
            FrequencySet::Grid(_) => s
                .extent()
                .iter()
                .map(|[a, b]| a.abs().max(b.abs()))
                .fold(0.0, f64::max),
            FrequencySet::Rotated { angle, .. } => {
                let e = s.extent();
                let (c, sn) = (angle.cos(), angle.sin());
                let mut r = 0.0f64;
                for x in [e[0][0], e[0][1]] {
                    for y in [e[1][0], e[1][1]] {
                        r = r.max((c * x - sn * y).abs()).max((sn * x + c * y).abs());
                    }
                }
                r
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub oversampling: usize,
    pub freq_refine: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            oversampling: 4,
            freq_refine: 1,
        }
    }
}

/// Closed-form base maps Ψ₀ on [−1, 1]^d.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DiffeoKind {
    Identity,
    /// d = 1: η + aη²/2. d = 2: (η₁ + aη₂, η₂).
    Shear { a: f64 },
    /// η(1 + a·b(|η|/r₀)) with b(s) = exp(1 − 1/(1 − s²)) for s < 1.
    RadialBump { a: f64, r0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffeoSpec {
    pub dimension: usize,
    pub kind: DiffeoKind,
}

fn bump(s: f64) -> (f64, f64) {
    if s >= 1.0 {
        return (0.0, 0.0);
    }
    let q = 1.0 - s * s;
    let b = (1.0 - 1.0 / q).exp();
    (b, -2.0 * s / (q * q) * b)
}

/// Lattice measurements of a base map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffeoBounds {
    pub sup_d: f64,
    pub sup_d_inverse: f64,
    pub sup_d2: f64,
    pub min_det: f64,
    /// max(‖DΨ₀‖, ‖DΨ₀⁻¹‖) + ‖D²Ψ₀‖, equal to 1 for the identity.
    pub d0: f64,
}

impl DiffeoSpec {
    pub fn new(dimension: usize, kind: DiffeoKind) -> Result<Self> {
        if !(1..=2).contains(&dimension) {
            return invalid("diffeomorphisms are available in d = 1, 2");
        }
        let spec = Self { dimension, kind };
        let b = spec.bounds();
        if !(b.min_det > 0.0 && b.min_det >= 1.0 / b.d0) {
            return invalid(format!(
                "Jacobian determinant {:.4} not bounded below by 1/D0 = {:.4}",
                b.min_det,
                1.0 / b.d0
            ));
        }
        Ok(spec)
    }

    pub fn map(&self, eta: &[f64]) -> Vec<f64> {
        match (self.kind, self.dimension) {
            (DiffeoKind::Identity, _) => eta.to_vec(),
            (DiffeoKind::Shear { a }, 1) => vec![eta[0] + 0.5 * a * eta[0] * eta[0]],
            (DiffeoKind::Shear { a }, _) => vec![eta[0] + a * eta[1], eta[1]],
            (DiffeoKind::RadialBump { a, r0 }, _) => {
                let r = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
                let f = 1.0 + a * bump(r / r0).0;
                eta.iter().map(|v| v * f).collect()
            }
        }
    }

    /// DΨ₀(η), row-major d×d.
    pub fn jacobian(&self, eta: &[f64]) -> Vec<f64> {
        match (self.kind, self.dimension) {
            (DiffeoKind::Identity, 1) => vec![1.0],
            (DiffeoKind::Identity, _) => vec![1.0, 0.0, 0.0, 1.0],
            (DiffeoKind::Shear { a }, 1) => vec![1.0 + a * eta[0]],
            (DiffeoKind::Shear { a }, _) => vec![1.0, a, 0.0, 1.0],
            (DiffeoKind::RadialBump { a, r0 }, d) => {
                let r = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
                let (b, db) = bump(r / r0);
                let f = 1.0 + a * b;
                let mut j = vec![0.0; d * d];
                for i in 0..d {
                    j[i * d + i] = f;
                    if r > 0.0 {
                        for k in 0..d {
                            j[i * d + k] += a * db / r0 * eta[i] * eta[k] / r;
                        }
                    }
                }
                j
            }
        }
    }

    pub fn det(&self, eta: &[f64]) -> f64 {
        let j = self.jacobian(eta);
        if self.dimension == 1 {
            j[0]
        } else {
            j[0] * j[3] - j[1] * j[2]
        }
    }

    /// Norms on a lattice of [−1, 1]^d; second derivatives by differences.
    pub fn bounds(&self) -> DiffeoBounds {
        let d = self.dimension;
        let m = if d == 1 { 2001 } else { 101 };
        let h = 2.0 / (m - 1) as f64;
        let eps = 1e-4;
        let op_norm = |j: &[f64]| -> f64 {
            if d == 1 {
                j[0].abs()
            } else {
                let (a, b, c, e) = (j[0], j[1], j[2], j[3]);
                let s = a * a + b * b + c * c + e * e;
                let det = a * e - b * c;
                (0.5 * (s + (s * s - 4.0 * det * det).max(0.0).sqrt())).sqrt()
            }
        };
        let inv_norm = |j: &[f64]| -> f64 {
            if d == 1 {
                1.0 / j[0].abs()
            } else {
                let det = j[0] * j[3] - j[1] * j[2];
                op_norm(&[j[3] / det, -j[1] / det, -j[2] / det, j[0] / det])
            }
        };
        let (mut sd, mut sdi, mut sd2, mut md) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
        let points: Vec<Vec<f64>> = if d == 1 {
            (0..m).map(|i| vec![-1.0 + i as f64 * h]).collect()
        } else {
            (0..m * m)
                .map(|k| vec![-1.0 + (k / m) as f64 * h, -1.0 + (k % m) as f64 * h])
                .collect()
        };
        for p in &points {
            let j = self.jacobian(p);
            sd = sd.max(op_norm(&j));
            sdi = sdi.max(inv_norm(&j));
            md = md.min(self.det(p));
            for axis in 0..d {
                let (mut a, mut b) = (p.clone(), p.clone());
                a[axis] += eps;
                b[axis] -= eps;
                let (ja, jb) = (self.jacobian(&a), self.jacobian(&b));
                let diff: Vec<f64> = ja.iter().zip(&jb).map(|(x, y)| (x - y) / (2.0 * eps)).collect();
                sd2 = sd2.max(diff.iter().map(|v| v.abs()).fold(0.0, f64::max));
            }
        }
        DiffeoBounds {
            sup_d: sd,
            sup_d_inverse: sdi,
            sup_d2: sd2,
            min_det: md,
            d0: sd.max(sdi) + sd2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FupInstance {
    pub n_scale: f64,
    pub x: GridSet,
    pub y: FrequencySet,
    pub discretization: Discretization,
    pub distortion: Option<DiffeoSpec>,
}

impl FupInstance {
    pub fn new(n_scale: f64, x: GridSet, y: FrequencySet, discretization: Discretization) -> Result<Self> {
        let inst = Self {
            n_scale,
            x,
            y,
            discretization,
            distortion: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_distortion(mut self, diffeo: DiffeoSpec) -> Result<Self> {
        if diffeo.dimension != self.dimension() {
            return invalid("distortion dimension does not match the instance");
        }
        self.distortion = Some(diffeo);
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.x.dimension()
    }

    pub fn n_phys(&self) -> usize {
        (2.0 * self.n_scale * self.discretization.oversampling as f64).round() as usize
    }

    pub fn n_freq(&self) -> usize {
        self.n_phys() * self.discretization.freq_refine
    }

    pub fn dx(&self) -> f64 {
        2.0 / self.n_phys() as f64
    }

    pub fn dxi(&self) -> f64 {
        0.5 / self.discretization.freq_refine as f64
    }

    pub fn x_at(&self, a: usize) -> f64 {
        -1.0 + (a as f64 + 0.5) * self.dx()
    }

    pub fn xi_at(&self, b: usize) -> f64 {
        (b as f64 - (self.n_freq() / 2) as f64 + 0.5) * self.dxi()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension();
        if !(1..=2).contains(&d) || self.y.dimension() != d {
            return invalid("instances are one- or two-dimensional with matching X and Y");
        }
        if !(self.n_scale >= 1.0) {
            return invalid(format!("N must be at least 1, got {}", self.n_scale));
        }
        let Discretization {
            oversampling,
            freq_refine,
        } = self.discretization;
        if oversampling < 2 || freq_refine < 1 {
            return invalid("oversampling must be at least 2 and frequency refinement at least 1");
        }
        let n_exact = 2.0 * self.n_scale * oversampling as f64;
        if (n_exact - n_exact.round()).abs() > 1e-9 || self.n_phys() % 2 != 0 {
            return invalid("2N·ov must be an even integer");
        }
        let tol = 1e-9;
        if self.x.extent().iter().any(|[a, b]| *a < -1.0 - tol || *b > 1.0 + tol) {
            return invalid("X must lie in [-1, 1]^d");
        }
        if self.y.reach() > self.n_scale * (1.0 + tol) {
            return invalid("Y must lie in [-N, N]^d");
        }
        if self.x.resolution() < 2.0 * self.dx() * (1.0 - tol) {
            return invalid("physical grid does not resolve the cubes of X");
        }
        if self.y.base().resolution() < 2.0 * self.dxi() * (1.0 - tol) {
            return invalid("frequency grid does not resolve the cubes of Y");
        }
        Ok(())
    }

    fn row_indices(&self) -> Vec<usize> {
        let n = self.n_phys();
        let d = self.dimension();
        (0..n.pow(d as u32))
            .filter(|&i| {
                let p: Vec<f64> = (0..d).map(|k| self.x_at(unflatten(i, n, d, k))).collect();
                self.x.contains_point(&p)
            })
            .collect()
    }

    fn col_indices(&self) -> Vec<usize> {
        let m = self.n_freq();
        let d = self.dimension();
        (0..m.pow(d as u32))
            .filter(|&i| {
                let p: Vec<f64> = (0..d).map(|k| self.xi_at(unflatten(i, m, d, k))).collect();
                self.y.contains(&p)
            })
            .collect()
    }
}

fn unflatten(i: usize, n: usize, d: usize, axis: usize) -> usize {
    (i / n.pow((d - 1 - axis) as u32)) % n
}

// ---------------------------------------------------------------------------
// Operators

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssembleMode {
    Auto,
    Dense,
    MatrixFree,
}

/// Restricted transform with fast apply routines and an optional dense
/// matrix.
#[derive(Clone)]
pub struct FupOperator {
    pub dimension: usize,
    pub n_phys: usize,
    pub n_freq: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub dense: Option<DMatrix<Complex64>>,
    row_phase: Vec<Complex64>,
    col_phase: Vec<Complex64>,
    scale: f64,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FupOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FupOperator")
            .field("dimension", &self.dimension)
            .field("rows", &self.rows.len())
            .field("cols", &self.cols.len())
            .field("dense", &self.dense.is_some())
            .finish()
    }
}

impl FupOperator {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    fn transform(&self, data: &mut [Complex64], len: usize, inverse: bool) {
        let d = self.dimension;
        let fft = if inverse { &self.fft_inv } else { &self.fft_fwd };
        let mut line = vec![Complex64::new(0.0, 0.0); len];
        let lines = data.len() / len;
        for axis in 0..d {
            let stride = len.pow((d - 1 - axis) as u32);
            for l in 0..lines {
                let base = (l / stride) * stride * len + l % stride;
                for j in 0..len {
                    line[j] = data[base + j * stride];
                }
                fft.process(&mut line);
                for j in 0..len {
                    data[base + j * stride] = line[j];
                }
            }
        }
    }

    fn phase_product(phase: &[Complex64], idx: usize, n: usize, d: usize) -> Complex64 {
        (0..d).map(|k| phase[unflatten(idx, n, d, k)]).product()
    }

    /// Frequency coefficients on Y ↦ physical values on X.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        if let Some(m) = &self.dense {
            return (m * DVector::from_column_slice(v)).as_slice().to_vec();
        }
        let (n, m, d) = (self.n_phys, self.n_freq, self.dimension);
        let mut buf = vec![Complex64::new(0.0, 0.0); m.pow(d as u32)];
        for (c, val) in self.cols.iter().zip(v) {
            buf[*c] = val * Self::phase_product(&self.col_phase, *c, m, d);
        }
        self.transform(&mut buf, m, true);
        self.rows
            .iter()
            .map(|&r| {
                let idx: usize = (0..d).fold(0, |acc, k| acc * m + unflatten(r, n, d, k));
                buf[idx] * Self::phase_product(&self.row_phase, r, n, d) * self.scale
            })
            .collect()
    }

    pub fn adjoint(&self, w: &[Complex64]) -> Vec<Complex64> {
        if let Some(m) = &self.dense {
            return (m.adjoint() * DVector::from_column_slice(w)).as_slice().to_vec();
        }
        let (n, m, d) = (self.n_phys, self.n_freq, self.dimension);
        let mut buf = vec![Complex64::new(0.0, 0.0); m.pow(d as u32)];
        for (r, val) in self.rows.iter().zip(w) {
            let idx: usize = (0..d).fold(0, |acc, k| acc * m + unflatten(*r, n, d, k));
            buf[idx] = val * Self::phase_product(&self.row_phase, *r, n, d).conj();
        }
        self.transform(&mut buf, m, false);
        self.cols
            .iter()
            .map(|&c| buf[c] * Self::phase_product(&self.col_phase, c, m, d).conj() * self.scale)
            .collect()
    }
}

fn dense_entries(inst: &FupInstance, rows: &[usize], cols: &[usize]) -> DMatrix<Complex64> {
    let (n, m, d) = (inst.n_phys(), inst.n_freq(), inst.dimension());
    let scale = (inst.dx() * inst.dxi()).powf(d as f64 / 2.0);
    let xs: Vec<Vec<f64>> = rows
        .iter()
        .map(|&r| (0..d).map(|k| inst.x_at(unflatten(r, n, d, k))).collect())
        .collect();
    let xis: Vec<Vec<f64>> = cols
        .iter()
        .map(|&c| (0..d).map(|k| inst.xi_at(unflatten(c, m, d, k))).collect())
        .collect();
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        let ph: f64 = xs[i].iter().zip(&xis[j]).map(|(a, b)| a * b).sum();
        Complex64::from_polar(scale, 2.0 * PI * ph)
    })
}

/// Discretizes f̂ ↦ 1_X ℱ⁻¹(1_Y f̂).
pub fn assemble_operator(inst: &FupInstance, mode: AssembleMode) -> Result<FupOperator> {
    inst.validate()?;
    let (n, m, d) = (inst.n_phys(), inst.n_freq(), inst.dimension());
    let rows = inst.row_indices();
    let cols = inst.col_indices();
    let fits = rows.len().max(cols.len()) <= DENSE_CAP;
    let dense = match mode {
        AssembleMode::Dense if !fits => {
            return Err(Error::TooLarge(format!(
                "{}×{} exceeds the dense cap {DENSE_CAP}",
                rows.len(),
                cols.len()
            )))
        }
        AssembleMode::Dense => true,
        AssembleMode::Auto => fits && rows.len() * cols.len() <= DENSE_ENTRY_CAP,
        AssembleMode::MatrixFree => false,
    };
    // x_a ξ_b = ab/M + a(1/(2M) − 1/2) + u_b(1/(2M) − 1/(2s)), u_b = b − M/2 + ½.
    let mf = m as f64;
    let s = inst.discretization.freq_refine as f64;
    let row_phase = (0..n)
        .map(|a| Complex64::from_polar(1.0, 2.0 * PI * a as f64 * (0.5 / mf - 0.5)))
        .collect();
    let col_phase = (0..m)
        .map(|b| {
            let u = b as f64 - (m / 2) as f64 + 0.5;
            Complex64::from_polar(1.0, 2.0 * PI * u * (0.5 / mf - 0.5 / s))
        })
        .collect();
    let mut planner = FftPlanner::new();
    let matrix = dense.then(|| dense_entries(inst, &rows, &cols));
    Ok(FupOperator {
        dimension: d,
        n_phys: n,
        n_freq: m,
        rows,
        cols,
        dense: matrix,
        row_phase,
        col_phase,
        scale: (inst.dx() * inst.dxi()).powf(d as f64 / 2.0),
        fft_fwd: planner.plan_fft_forward(m),
        fft_inv: planner.plan_fft_inverse(m),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormMethod {
    Svd,
    Power,
}

impl NormMethod {
    pub fn label(&self) -> &'static str {
        match self {
            NormMethod::Svd => "svd",
            NormMethod::Power => "power",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormResult {
    pub norm: f64,
    pub residual: f64,
    pub iterations: usize,
    pub method: NormMethod,
}

fn svd_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |a, b| a.max(*b))
}

fn vnorm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn vdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Ritz vector for the top eigenvalue of A*A from a Krylov space built on
/// `v`, used as the power-iteration start. Returns the vector and the number
/// of A*A products spent.
fn lanczos_start(op: &FupOperator, v: Vec<Complex64>) -> (Vec<Complex64>, usize) {
    const STEPS: usize = 400;
    let k = v.len();
    let mut basis: Vec<Vec<Complex64>> = vec![v];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut best: Option<DVector<f64>> = None;
    for j in 0..STEPS.min(k) {
        let mut w = op.adjoint(&op.apply(&basis[j]));
        let a = vdot(&basis[j], &w).re;
        alpha.push(a);
        // Full reorthogonalization, twice.
        for _ in 0..2 {
            for q in &basis {
                let c = vdot(q, &w);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = vnorm(&w);
        let m = alpha.len();
        let tri = DMatrix::from_fn(m, m, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = tri.symmetric_eigen();
        let top = eig.eigenvalues.imax();
        let s = eig.eigenvectors.column(top).into_owned();
        let lam = eig.eigenvalues[top];
        best = Some(s.clone());
        if b * s[m - 1].abs() <= 1e-12 * lam.abs() || b <= 1e-14 * lam.abs() || j + 1 == k {
            break;
        }
        beta.push(b);
        basis.push(w.into_iter().map(|z| z / b).collect());
    }
    let s = best.expect("at least one Lanczos step");
    let mut out = vec![Complex64::new(0.0, 0.0); k];
    for (c, q) in s.iter().zip(&basis) {
        out.iter_mut().zip(q).for_each(|(x, y)| *x += y * *c);
    }
    let n = vnorm(&out);
    out.iter_mut().for_each(|z| *z /= n);
    (out, alpha.len())
}

fn power_norm(op: &FupOperator) -> Result<NormResult> {
    let k = op.cols.len();
    if k == 0 || op.rows.is_empty() {
        return Ok(NormResult {
            norm: 0.0,
            residual: 0.0,
            iterations: 0,
            method: NormMethod::Power,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<Complex64> = (0..k)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    let nv = vnorm(&v);
    v.iter_mut().for_each(|z| *z /= nv);
    let (mut v, spent) = lanczos_start(op, v);
    let mut residual = f64::INFINITY;
    for it in spent + 1..=POWER_MAX_ITER {
        let w = op.adjoint(&op.apply(&v));
        let lambda: f64 = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum();
        if lambda <= 0.0 {
            return Ok(NormResult {
                norm: 0.0,
                residual: 0.0,
                iterations: it,
                method: NormMethod::Power,
            });
        }
        residual = v
            .iter()
            .zip(&w)
            .map(|(a, b)| (b - a * lambda).norm_sqr())
            .sum::<f64>()
            .sqrt()
            / lambda;
        if residual <= POWER_TOL {
            return Ok(NormResult {
                norm: lambda.sqrt(),
                residual,
                iterations: it,
                method: NormMethod::Power,
            });
        }
        let nw = vnorm(&w);
        v = w.into_iter().map(|z| z / nw).collect();
    }
    Err(Error::NoConvergence {
        iterations: POWER_MAX_ITER,
        residual,
    })
}

/// Largest singular value.
pub fn operator_norm(op: &FupOperator, method: NormMethod) -> Result<NormResult> {
    match method {
        NormMethod::Svd => {
            let m = op
                .dense
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("SVD needs a dense operator".into()))?;
            Ok(NormResult {
                norm: svd_norm(m),
                residual: 0.0,
                iterations: 0,
                method,
            })
        }
        NormMethod::Power => power_norm(op),
    }
}

/// The M^k-point transform e^{−2πijl/M^k}/√(M^k) restricted to indices whose
/// base-M digits lie in the alphabet.
pub fn discrete_cantor_matrix(base: u32, alphabet: &[u32], depth: u32) -> Result<DMatrix<Complex64>> {
    if base < 2 || alphabet.iter().any(|a| *a >= base) {
        return invalid("alphabet digits must be below the base");
    }
    let size = (base as usize).pow(depth);
    let idx: Vec<usize> = (0..size)
        .filter(|&i| {
            let mut r = i;
            (0..depth).all(|_| {
                let ok = alphabet.contains(&((r % base as usize) as u32));
                r /= base as usize;
                ok
            })
        })
        .collect();
    let s = (size as f64).sqrt();
    Ok(DMatrix::from_fn(idx.len(), idx.len(), |a, b| {
        let ph = -2.0 * PI * ((idx[a] * idx[b]) % size) as f64 / size as f64;
        Complex64::from_polar(1.0 / s, ph)
    }))
}

pub fn matrix_norm(m: &DMatrix<Complex64>) -> f64 {
    svd_norm(m)
}

// ---------------------------------------------------------------------------
// Decay curves

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CurveSpec {
    /// X and Y: the depth-k Cantor iterate on [−1, 1] and [−N, N].
    Cantor1D { base: u32, alphabet: Vec<u32> },
    /// X: product Cantor on [−1, 1]²; Y: product Cantor on
    /// [−N/√2, N/√2]² rotated by `angle_deg`.
    RotatedProduct {
        base: u32,
        alphabet: Vec<u32>,
        angle_deg: f64,
    },
    /// Full masks X = [−1, 1]^d and Y = [−N, N]^d with N = base^k.
    Full { base: u32, dimension: usize },
}

impl CurveSpec {
    fn base(&self) -> u32 {
        match self {
            CurveSpec::Cantor1D { base, .. }
            | CurveSpec::RotatedProduct { base, .. }
            | CurveSpec::Full { base, .. } => *base,
        }
    }

    pub fn instance(&self, k: u32, disc: Discretization) -> Result<FupInstance> {
        let n = (self.base() as f64).powi(k as i32);
        let (x, y) = match self {
            CurveSpec::Cantor1D { base, alphabet } => (
                build_cantor(&CantorSpec::new_1d(*base, alphabet, k, [-1.0, 1.0]))?,
                FrequencySet::Grid(build_cantor(&CantorSpec::new_1d(*base, alphabet, k, [-n, n]))?),
            ),
            CurveSpec::RotatedProduct {
                base,
                alphabet,
                angle_deg,
            } => {
                let r = n / 2f64.sqrt();
                (
                    build_cantor(&CantorSpec::product_2d(*base, alphabet, k, [-1.0, 1.0]))?,
                    FrequencySet::Rotated {
                        set: build_cantor(&CantorSpec::product_2d(*base, alphabet, k, [-r, r]))?,
                        angle: angle_deg.to_radians(),
                    },
                )
            }
            CurveSpec::Full { dimension, .. } => {
                let d = *dimension;
                (
                    GridSet::full(vec![[-1.0, 1.0]; d], 2.0 / n)?,
                    FrequencySet::Grid(GridSet::full(vec![[-n, n]; d], 2.0)?),
                )
            }
        };
        FupInstance::new(n, x, y, disc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub k: u32,
    pub n_scale: f64,
    pub dimension: usize,
    pub rows: usize,
    pub cols: usize,
    pub norm: f64,
    pub method: NormMethod,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormCurve {
    pub rows: Vec<CurveRow>,
    pub beta_hat: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residual_max: f64,
    pub excluded_first: bool,
}

impl NormCurve {
    pub fn nonincreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].norm <= w[0].norm * (1.0 + 1e-12))
    }
}

/// Least squares of −log‖A‖ on log N; k = 1 is dropped when ≥ 4 points.
pub fn fit_beta(rows: &[CurveRow]) -> Result<(f64, f64, f64, f64, bool)> {
    if rows.len() < 3 {
        return invalid("need at least 3 points to fit β̂");
    }
    let excluded = rows.len() >= 4 && rows.iter().any(|r| r.k == 1);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| !(excluded && r.k == 1))
        .map(|r| (r.n_scale.ln(), -r.norm.ln()))
        .collect();
    if pts.iter().any(|(_, y)| !y.is_finite()) {
        return Err(Error::Contract("zero norm in decay curve".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let res: Vec<f64> = pts.iter().map(|p| p.1 - icpt - slope * p.0).collect();
    let ss_res: f64 = res.iter().map(|r| r * r).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let rmax = res.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    Ok((slope, icpt, r2, rmax, excluded))
}

/// Norms of the depth-k instances; SVD when the operator is dense,
/// power iteration otherwise.
pub fn fup_decay_curve(spec: &CurveSpec, ks: &[u32], disc: Discretization) -> Result<NormCurve> {
    if ks.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("k values must be strictly increasing");
    }
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let inst = spec.instance(k, disc)?;
        let op = assemble_operator(&inst, AssembleMode::Auto)?;
        let method = if op.dense.is_some() {
            NormMethod::Svd
        } else {
            NormMethod::Power
        };
        let r = operator_norm(&op, method)?;
        rows.push(CurveRow {
            k,
            n_scale: inst.n_scale,
            dimension: inst.dimension(),
            rows: op.rows.len(),
            cols: op.cols.len(),
            norm: r.norm,
            method,
            iterations: r.iterations,
            residual: r.residual,
        });
    }
    let (beta_hat, intercept, r_squared, residual_max, excluded_first) = fit_beta(&rows)?;
    Ok(NormCurve {
        rows,
        beta_hat,
        intercept,
        r_squared,
        residual_max,
        excluded_first,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubmultiplicativityRow {
    pub k1: u32,
    pub k2: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// r_{k₁+k₂} versus r_{k₁}·r_{k₂}(1 + 10⁻⁶) over all pairs present.
pub fn submultiplicativity(curve: &NormCurve) -> Vec<SubmultiplicativityRow> {
    let get = |k: u32| curve.rows.iter().find(|r| r.k == k).map(|r| r.norm);
    let mut out = Vec::new();
    for a in &curve.rows {
        for b in &curve.rows {
            if b.k < a.k {
                continue;
            }
            if let Some(lhs) = get(a.k + b.k) {
                let rhs = a.norm * b.norm * (1.0 + 1e-6);
                out.push(SubmultiplicativityRow {
                    k1: a.k,
                    k2: b.k,
                    lhs,
                    rhs,
                    holds: lhs <= rhs,
                });
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Distortion

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistortedNorm {
    pub norm: f64,
    pub bounds: DiffeoBounds,
    pub rows: usize,
    pub cols: usize,
    /// Largest phase increment 2π√d‖DΦ_N‖Δη per frequency cell.
    pub phase_step: f64,
}

/// Norm of ĝ ↦ 1_X ∫_Y e^{2πi x·Φ_N(η)} ĝ(η) |det DΦ_N(η)| dη with
/// Φ_N(η) = NΨ₀(η/N), by dense quadrature on the instance grids.
pub fn distorted_fup_norm(inst: &FupInstance) -> Result<DistortedNorm> {
    let diffeo = inst
        .distortion
        .ok_or_else(|| Error::InvalidInput("instance has no distortion".into()))?;
    inst.validate()?;
    let (n, m, d) = (inst.n_phys(), inst.n_freq(), inst.dimension());
    let bounds = diffeo.bounds();
    let phase_step = 2.0 * PI * (d as f64).sqrt() * bounds.sup_d * inst.dxi();
    if phase_step > PI / 4.0 * (1.0 + 1e-12) {
        return invalid(format!(
            "frequency grid too coarse: phase step {phase_step:.4} > π/4; raise the frequency refinement"
        ));
    }
    let rows = inst.row_indices();
    let cols = inst.col_indices();
    if rows.len().max(cols.len()) > DENSE_CAP {
        return Err(Error::TooLarge("distorted operator exceeds the dense cap".into()));
    }
    let big_n = inst.n_scale;
    let scale = (inst.dx() * inst.dxi()).powf(d as f64 / 2.0);
    let xs: Vec<Vec<f64>> = rows
        .iter()
        .map(|&r| (0..d).map(|k| inst.x_at(unflatten(r, n, d, k))).collect())
        .collect();
    let phis: Vec<(Vec<f64>, f64)> = cols
        .iter()
        .map(|&c| {
            let eta: Vec<f64> = (0..d).map(|k| inst.xi_at(unflatten(c, m, d, k)) / big_n).collect();
            let phi: Vec<f64> = diffeo.map(&eta).into_iter().map(|v| v * big_n).collect();
            (phi, diffeo.det(&eta).abs())
        })
        .collect();
    let mat = DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        let ph: f64 = xs[i].iter().zip(&phis[j].0).map(|(a, b)| a * b).sum();
        Complex64::from_polar(scale * phis[j].1, 2.0 * PI * ph)
    });
    Ok(DistortedNorm {
        norm: svd_norm(&mat),
        bounds,
        rows: rows.len(),
        cols: cols.len(),
        phase_step,
    })
}

// ---------------------------------------------------------------------------
// Induction on scales

/// φ̂ = (g ∗ g)/‖g‖² with g = cos²(πξ) on [−½, ½], so φ = |ǧ|²/‖g‖² ≥ 0,
/// ∫φ = 1 and supp φ̂ ⊂ [−1, 1].
pub fn mollifier_hat(xi: f64) -> f64 {
    if xi.abs() >= 1.0 {
        return 0.0;
    }
    let (lo, hi) = ((xi - 0.5).max(-0.5), (xi + 0.5).min(0.5));
    let (nodes, weights) = gauss_legendre(24);
    let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    let g = |t: f64| (PI * t).cos().powi(2);
    let s: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(u, w)| {
            let t = c + r * u;
            w * g(t) * g(xi - t)
        })
        .sum();
    s * r / 0.375
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoReport {
    pub scale_l: u32,
    pub t: u32,
    /// ‖f_m‖_{L²([−1,1])} for m = 0..=steps.
    pub norms: Vec<f64>,
    pub ratios: Vec<f64>,
    /// max over n and x ∈ X of (1 − Ψ_n(x))·L^{T−1}.
    pub c_phi_measured: f64,
    pub psi_max: f64,
    /// Π_{n<m} Ψ_{nT} ≥ (1 − C_φ/L^{T−1})^m on X at every step.
    pub product_bound_holds: bool,
    /// Spectral half-width of f_m against the grid's Nyquist frequency.
    pub band_needed: f64,
}

fn set_intervals(x: &GridSet) -> Vec<[f64; 2]> {
    let h = x.resolution();
    x.cubes()
        .iter()
        .map(|c| {
            let a = x.cube_corner(c)[0];
            [a, a + h]
        })
        .collect()
}

/// f_{m+1} = Ψ_{mT} f_m with Ψ_n = ψ_{n+T} ∗ 1_{S*_{n+1}}, in one dimension.
/// 𝒞_n partitions the extent of X into L^n congruent intervals and S_n
/// collects those meeting X.
pub fn iterate_damping_demo(f: &SampledFunction, x: &GridSet, l: u32, t: u32, steps: usize) -> Result<DemoReport> {
    if f.dimension != 1 || x.dimension() != 1 {
        return invalid("the iteration demo is one-dimensional");
    }
    if l < 3 || t < 1 {
        return invalid("need L ≥ 3 and T ≥ 1");
    }
    let depths: Vec<u32> = (0..steps as u32).map(|m| m * t).collect();
    let por = check_porosity(x, l as usize, &depths)?;
    if !por.porous() {
        return invalid(format!("X is not porous at scale {l} on depths {depths:?}"));
    }
    let lf = l as f64;
    let spec = f.spectrum();
    let g = f.grid.uniform();
    let band0 = spec
        .iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > 0.0)
        .map(|(k, _)| g.xi(k).abs())
        .fold(0.0, f64::max);
    let ell: f64 = (0..steps).map(|n| lf.powi(((n + 1) as u32 * t) as i32)).sum();
    let band_needed = band0 + ell;
    if band_needed >= f.grid.nyquist() {
        return Err(Error::Contract(format!(
            "spectrum of f_m reaches {band_needed}, beyond the grid's Nyquist frequency {}",
            f.grid.nyquist()
        )));
    }
    let iv = set_intervals(x);
    let ext = x.extent()[0];
    if ext[0] < -1.0 - 1e-12 || ext[1] > 1.0 + 1e-12 {
        return invalid("X must lie in [-1, 1]");
    }
    let xs: Vec<f64> = (0..g.n).map(|j| g.x(j)).collect();
    let in_x: Vec<bool> = xs.iter().map(|p| x.contains_point(&[*p])).collect();
    let local_norm = |v: &[Complex64]| -> f64 {
        v.iter()
            .zip(&xs)
            .filter(|(_, p)| p.abs() <= 1.0)
            .map(|(z, _)| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
            * g.dx.sqrt()
    };
    let mut cur = f.samples.clone();
    let mut norms = vec![local_norm(&cur)];
    let mut product = vec![1.0f64; g.n];
    let (mut c_phi, mut psi_max) = (0.0f64, 0.0f64);
    let mut holds = true;
    for m in 0..steps {
        let n = m as u32 * t;
        // S*_{n+1}: cubes of 𝒞_{n+1} meeting X, fattened by a tenth of a side.
        let cells = (l as i64).pow(n + 1);
        let side = (ext[1] - ext[0]) / cells as f64;
        let mut s_star: Vec<[f64; 2]> = Vec::new();
        for q in 0..cells {
            let (a, b) = (ext[0] + q as f64 * side, ext[0] + (q + 1) as f64 * side);
            if iv.iter().any(|c| c[0] <= b && c[1] >= a) {
                s_star.push([a - side / 10.0, b + side / 10.0]);
            }
        }
        let ind: Vec<Complex64> = xs
            .iter()
            .map(|p| {
                let inside = s_star.iter().any(|c| *p >= c[0] && *p <= c[1]);
                Complex64::new(if inside { 1.0 } else { 0.0 }, 0.0)
            })
            .collect();
        let width = lf.powi((n + t) as i32);
        let mut hat = spectral::forward(&ind, &g, 1);
        for (k, z) in hat.iter_mut().enumerate() {
            *z *= mollifier_hat(g.xi(k) / width);
        }
        let psi: Vec<f64> = spectral::inverse(&hat, &g, 1).iter().map(|z| z.re).collect();
        for (j, p) in psi.iter().enumerate() {
            psi_max = psi_max.max(*p);
            if in_x[j] {
                c_phi = c_phi.max((1.0 - p) * lf.powi(t as i32 - 1));
            }
            product[j] *= p;
        }
        for (z, p) in cur.iter_mut().zip(&psi) {
            *z *= p;
        }
        norms.push(local_norm(&cur));
        let floor = (1.0 - c_phi / lf.powi(t as i32 - 1)).max(0.0).powi(m as i32 + 1);
        holds &= product
            .iter()
            .zip(&in_x)
            .all(|(p, inside)| !inside || *p >= floor * (1.0 - 1e-12));
    }
    let ratios = norms
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    Ok(DemoReport {
        scale_l: l,
        t,
        norms,
        ratios,
        c_phi_measured: c_phi,
        psi_max,
        product_bound_holds: holds,
        band_needed,
    })
}

/// f̂ = Σ over the cubes of Y of seeded complex amplitudes times a cos²
/// bump filling the cube, normalized to unit L² norm.
pub fn spectrum_in_set(
    seed: u64,
    y: &GridSet,
    grid: crate::localization::LocalizationGrid,
) -> Result<SampledFunction> {
    if y.dimension() != 1 {
        return invalid("spectrum_in_set is one-dimensional");
    }
    let g = grid.uniform();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = vec![Complex64::new(0.0, 0.0); g.n];
    for [a, b] in set_intervals(y) {
        let amp = Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        for (k, z) in spec.iter_mut().enumerate() {
            let xi = g.xi(k);
            if xi > a && xi < b {
                let s = (xi - a) / (b - a);
                *z += amp * (PI * (s - 0.5)).cos().powi(2);
            }
        }
    }
    let norm: f64 = (spec.iter().map(|z| z.norm_sqr()).sum::<f64>() * g.dxi()).sqrt();
    if norm == 0.0 {
        return invalid("Y has no frequency samples on this grid");
    }
    spec.iter_mut().for_each(|z| *z /= norm);
    SampledFunction::from_spectrum(1, grid, spec)
}
