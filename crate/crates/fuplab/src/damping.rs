//! Damping functions: compactly supported ψ with controlled decay of ψ̂.
//!
//! The pipeline is
//! 1. [`hilbert_modified`], the Hilbert transform with kernel
//!    1/(x−t) + t/(t²+1), evaluated on a symmetric grid with a fitted
//!    tail model beyond the grid;
//! 2. [`build_multiplier`], which turns a weight ω = e^{−Ω} into ψ with
//!    supp ψ ⊂ [0, σ] and |ψ̂| comparable to ω/(ξ²+T²)⁵;
//! 3. [`build_regular_damping`] for one-dimensional regular sets and
//!    [`product_damping`] for two-dimensional admissible sets;
//! 4. [`verify_damping`], which measures the four damping bullets on grids.
//!
//! The multiplier is assembled from the zeros x_j of its staircase:
//! |ψ̂(ξ)| = ⅓ e^{πσ − c(Ω₀)} Π_j |ξ − x_j| / √(1 + x_j²), which is the
//! product expansion of ⅓ e^{−𝓗(s)} ω₀ for the sawtooth s.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::constants::{damping_params, product_damping_params, DampingParams};
use crate::error::{invalid, Error, Result};
use crate::quad::{gauss_legendre, trapezoid};
use crate::regular_sets::GridSet;
use crate::spectral::{self, UniformGrid};

/// Default ι.
pub const DEFAULT_IOTA: f64 = 1e-2;
/// Default tolerance on relative support leakage.
pub const DEFAULT_LEAKAGE_TOL: f64 = 1e-6;
const TAIL_FRACTION: f64 = 0.1;
const MAX_TAIL_EXPONENT: f64 = 0.99;
const SERIES_CAP: usize = 20_000;

fn japanese(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

fn theta(r: f64, alpha: f64) -> f64 {
    (2.0 + r).ln().powf(-alpha)
}

// ---------------------------------------------------------------------------
// Modified Hilbert transform

/// Model of a function beyond the grid edge on one side, in t = |x|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailModel {
    /// a·t^β.
    Power { a: f64, beta: f64 },
    /// a + b·ln t.
    Log { a: f64, b: f64 },
}

impl TailModel {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TailModel::Power { a, beta } => a * t.powf(beta),
            TailModel::Log { a, b } => a + b * t.ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HilbertTail {
    pub edge: f64,
    pub left: TailModel,
    pub right: TailModel,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

fn max_residual(model: &TailModel, xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (model.eval(*x) - y).abs())
        .fold(0.0, f64::max)
}

/// Picks whichever of a·t^β (β ≤ 0.99) and a + b·ln t fits the samples
/// better in the maximum norm.
fn fit_side(xs: &[f64], ys: &[f64]) -> TailModel {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let (a, b) = least_squares(&lx, ys);
    let log = TailModel::Log { a, b };
    let all_pos = ys.iter().all(|&y| y > 0.0);
    let all_neg = ys.iter().all(|&y| y < 0.0);
    if !(all_pos || all_neg) {
        return log;
    }
    let sign = if all_pos { 1.0 } else { -1.0 };
    let ly: Vec<f64> = ys.iter().map(|y| (sign * y).ln()).collect();
    let (mut la, mut beta) = least_squares(&lx, &ly);
    if beta > MAX_TAIL_EXPONENT {
        beta = MAX_TAIL_EXPONENT;
        la = lx.iter().zip(&ly).map(|(x, y)| y - beta * x).sum::<f64>() / lx.len() as f64;
    }
    let power = TailModel::Power {
        a: sign * la.exp(),
        beta,
    };
    if max_residual(&power, xs, ys) < max_residual(&log, xs, ys) {
        power
    } else {
        log
    }
}

/// Fits the tail models on the outer tenth of each side of a symmetric grid.
pub fn fit_tail(samples: &[f64], h: f64) -> Result<HilbertTail> {
    let n = samples.len();
    if n < 21 || n % 2 == 0 {
        return invalid("symmetric grid needs an odd number of at least 21 samples");
    }
    let k = n / 2;
    let edge = k as f64 * h;
    if edge <= 2.0 {
        return invalid(format!("grid half-extent {edge} must exceed 2"));
    }
    let m = ((k as f64 * TAIL_FRACTION).ceil() as usize).max(2);
    let xs: Vec<f64> = (k + 1 - m..=k).map(|i| i as f64 * h).collect();
    let right: Vec<f64> = (n - m..n).map(|i| samples[i]).collect();
    let left: Vec<f64> = (0..m).rev().map(|i| samples[i]).collect();
    Ok(HilbertTail {
        edge,
        left: fit_side(&xs, &left),
        right: fit_side(&xs, &right),
    })
}

/// Σ_{m≥1} c_m r^m, stopped once terms are negligible.
fn power_series(r: f64, coeffs: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut p = 1.0;
    for c in coeffs {
        p *= r;
        let t = p * c;
        acc += t;
        if t.abs() < 1e-17 * (1.0 + acc.abs()) {
            break;
        }
    }
    acc
}

/// Σ_{n≥1} (−1)^n X^{−2n} / (2n − β) and Σ_{n≥1} (−1)^n X^{−2n} / (4n²).
fn tail_constants(edge: f64, beta: f64) -> (f64, f64) {
    let q = edge.powi(-2);
    let (mut c, mut d) = (0.0, 0.0);
    let mut p = 1.0;
    for n in 1..200 {
        let nf = n as f64;
        p *= -q;
        c += p / (2.0 * nf - beta);
        d += p / (4.0 * nf * nf);
        if p.abs() < 1e-18 {
            break;
        }
    }
    (c, d)
}

/// Coefficient tables for one side: 1/(m(m−β)) for the power model and
/// 1/m² for the logarithmic one.
fn series_coeffs(model: &TailModel) -> Vec<f64> {
    let beta = match *model {
        TailModel::Power { beta, .. } => beta,
        TailModel::Log { .. } => 0.0,
    };
    (1..=SERIES_CAP)
        .map(|m| {
            let m = m as f64;
            1.0 / (m * (m - beta))
        })
        .collect()
}

/// (1/π)∫_X^∞ g(t) (1/(x−t) + t/(t²+1)) dt for the model g, r = x/X < 1.
fn right_tail(model: &TailModel, edge: f64, r: f64, coeffs: &[f64]) -> f64 {
    let r = r.min(1.0 - 1e-15);
    match *model {
        TailModel::Power { a, beta } => {
            if a == 0.0 {
                return 0.0;
            }
            let (c, _) = tail_constants(edge, beta);
            let s = -(1.0 - r).ln() + if beta != 0.0 { beta * power_series(r, coeffs) } else { 0.0 };
            a * edge.powf(beta) / PI * (-s + c)
        }
        TailModel::Log { a, b } => {
            let (c0, d) = tail_constants(edge, 0.0);
            let base = (1.0 - r).ln() + c0;
            let log_part = if b != 0.0 {
                b * (edge.ln() * base - power_series(r, coeffs) + d)
            } else {
                0.0
            };
            (a * base + log_part) / PI
        }
    }
}

fn tail_contribution(tail: &HilbertTail, edge: f64, x: f64, coeff_r: &[f64], coeff_l: &[f64]) -> f64 {
    right_tail(&tail.right, edge, x / edge, coeff_r) - right_tail(&tail.left, edge, -x / edge, coeff_l)
}

/// Principal value Σ over odd offsets: (2/π) Σ_{i−j odd} f_j / (i − j).
fn odd_offset_convolution(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let len = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut kern = vec![Complex64::new(0.0, 0.0); len];
    for m in (1..n).step_by(2) {
        let v = 2.0 / (PI * m as f64);
        kern[m] = Complex64::new(v, 0.0);
        kern[len - m] = Complex64::new(-v, 0.0);
    }
    let mut data: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    data.resize(len, Complex64::new(0.0, 0.0));
    fwd.process(&mut kern);
    fwd.process(&mut data);
    for (a, b) in data.iter_mut().zip(&kern) {
        *a *= b;
    }
    inv.process(&mut data);
    data[..n].iter().map(|z| z.re / len as f64).collect()
}

/// 𝓗f(x) = (1/π) p.v.∫ f(t) (1/(x−t) + t/(t²+1)) dt on the symmetric grid
/// x_i = (i − K)h, i = 0..=2K. The two endpoint values are extrapolated.
pub fn hilbert_modified(samples: &[f64], h: f64) -> Result<Vec<f64>> {
    Ok(hilbert_modified_with_tail(samples, h)?.0)
}

/// [`hilbert_modified`] together with the fitted tail model.
pub fn hilbert_modified_with_tail(samples: &[f64], h: f64) -> Result<(Vec<f64>, HilbertTail)> {
    if !(h > 0.0 && h.is_finite()) {
        return invalid("grid spacing must be positive");
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return invalid("non-finite sample");
    }
    let tail = fit_tail(samples, h)?;
    let k = samples.len() / 2;
    let x = |i: usize| (i as f64 - k as f64) * h;
    let weighted: Vec<f64> = samples
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let t = x(i);
            f * t / (t * t + 1.0)
        })
        .collect();
    let constant = trapezoid(&weighted, h) / PI;
    let mut out = odd_offset_convolution(samples);
    let (cr, cl) = (series_coeffs(&tail.right), series_coeffs(&tail.left));
    // The odd-offset rule at an odd index reaches one cell further out on
    // both sides, so the tails start at (K+1)h there.
    let big_x = tail.edge;
    let extra_cell = h / PI * (samples[2 * k] - samples[0]) * big_x / (big_x * big_x + 1.0);
    for (i, v) in out.iter_mut().enumerate() {
        let (edge, extra) = if i % 2 == 1 { (big_x + h, extra_cell) } else { (big_x, 0.0) };
        *v += constant + extra + tail_contribution(&tail, edge, x(i), &cr, &cl);
    }
    // At ±Kh the tail correction sits on its logarithmic singularity.
    let n = out.len();
    out[0] = 2.0 * out[1] - out[2];
    out[n - 1] = 2.0 * out[n - 2] - out[n - 3];
    Ok((out, tail))
}

// ---------------------------------------------------------------------------
// Weights

/// ω = e^{−Ω} sampled on a symmetric grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub h: f64,
    /// Ω on x_i = (i − K)h.
    pub big_omega: Vec<f64>,
    pub alpha: f64,
    pub label: String,
}

impl Weight {
    pub fn from_samples(h: f64, big_omega: Vec<f64>, alpha: f64, label: impl Into<String>) -> Result<Self> {
        if big_omega.len() % 2 == 0 || big_omega.len() < 21 {
            return invalid("weight grid must be symmetric with at least 21 points");
        }
        if big_omega.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return invalid("Ω must be finite and nonnegative (0 < ω ≤ 1)");
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
        }
        Ok(Self {
            h,
            big_omega,
            alpha,
            label: label.into(),
        })
    }

    pub fn from_fn(
        big_omega: impl Fn(f64) -> f64,
        half_extent: f64,
        h: f64,
        alpha: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        if !(h > 0.0 && half_extent > 10.0 * h) {
            return invalid("weight grid too coarse");
        }
        let k = (half_extent / h).round() as i64;
        let samples = (-k..=k).map(|i| big_omega(i as f64 * h)).collect();
        Self::from_samples(h, samples, alpha, label)
    }

    pub fn half_extent(&self) -> f64 {
        (self.big_omega.len() / 2) as f64 * self.h
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - (self.big_omega.len() / 2) as f64) * self.h
    }

    /// Ω at `x` by linear interpolation, held constant beyond the grid.
    pub fn big_omega_at(&self, x: f64) -> f64 {
        let k = self.big_omega.len() / 2;
        let u = x / self.h + k as f64;
        if u <= 0.0 {
            return self.big_omega[0];
        }
        if u >= (2 * k) as f64 {
            return self.big_omega[2 * k];
        }
        let i = u.floor() as usize;
        let t = u - i as f64;
        self.big_omega[i] * (1.0 - t) + self.big_omega[i + 1] * t
    }

    pub fn omega_at(&self, x: f64) -> f64 {
        (-self.big_omega_at(x)).exp()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            h: self.h,
            big_omega: self.big_omega.iter().map(|v| v * c).collect(),
            alpha: self.alpha,
            label: format!("{} ^ {c}", self.label),
        }
    }
}

// ---------------------------------------------------------------------------
// Damping functions

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub alpha: f64,
}

/// One cover of a product damping: ψ̂_j(ξ) = f₁((B⁻¹ξ)₁) f₂((B⁻¹ξ)₂) with
/// B = [e₁ e₂].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductFactor {
    pub basis: [[f64; 2]; 2],
    pub basis_inverse: [[f64; 2]; 2],
    pub first: DampingFunction,
    pub second: DampingFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DampingShape {
    /// ψ̂ sampled at `grid.xi(k)` and ψ at `grid.x(j)`.
    Sampled {
        grid: UniformGrid,
        psi_hat: Vec<Complex64>,
        psi: Vec<Complex64>,
    },
    Product {
        factors: Vec<ProductFactor>,
        scale: f64,
        /// Minkowski sum of the factor support boxes.
        support_box: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DampingFunction {
    pub dimension: usize,
    pub constants: DampingConstants,
    /// Target support box, one interval per axis.
    pub support: Vec<[f64; 2]>,
    /// Relative L² mass of ψ outside `support` (a bound for products).
    pub leakage: f64,
    pub shape: DampingShape,
}

fn interp_cubic(v: &[Complex64], u: f64) -> Complex64 {
    let n = v.len();
    if n < 4 || u < 0.0 || u > (n - 1) as f64 {
        return Complex64::new(0.0, 0.0);
    }
    let i = (u.floor() as usize).clamp(1, n - 3);
    let t = u - i as f64;
    let (a, b, c, d) = (v[i - 1], v[i], v[i + 1], v[i + 2]);
    // Lagrange weights at offsets −1, 0, 1, 2.
    let wa = -t * (t - 1.0) * (t - 2.0) / 6.0;
    let wb = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    let wc = -(t + 1.0) * t * (t - 2.0) / 2.0;
    let wd = (t + 1.0) * t * (t - 1.0) / 6.0;
    a * wa + b * wb + c * wc + d * wd
}

fn apply(m: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn relative_leakage(grid: &UniformGrid, psi: &[Complex64], support: [f64; 2]) -> f64 {
    let (mut total, mut out) = (0.0, 0.0);
    for (j, z) in psi.iter().enumerate() {
        let x = grid.x(j);
        let m = z.norm_sqr();
        total += m;
        if x < support[0] - grid.dx || x > support[1] + grid.dx {
            out += m;
        }
    }
    if total > 0.0 {
        out / total
    } else {
        0.0
    }
}

impl DampingFunction {
    /// One-dimensional damping from spectral samples at `grid.xi(k)`.
    pub fn from_spectrum(
        grid: UniformGrid,
        psi_hat: Vec<Complex64>,
        constants: DampingConstants,
        support: [f64; 2],
    ) -> Result<Self> {
        if psi_hat.len() != grid.n {
            return invalid("spectrum length does not match the grid");
        }
        let psi = spectral::inverse(&psi_hat, &grid, 1);
        let leakage = relative_leakage(&grid, &psi, support);
        Ok(Self {
            dimension: 1,
            constants,
            support: vec![support],
            leakage,
            shape: DampingShape::Sampled { grid, psi_hat, psi },
        })
    }

    /// ψ̂ at an arbitrary frequency; zero beyond the sampled range.
    pub fn eval_hat(&self, xi: &[f64]) -> Complex64 {
        match &self.shape {
            DampingShape::Sampled { grid, psi_hat, .. } => {
                let u = xi[0] / grid.dxi() + (grid.n / 2) as f64;
                interp_cubic(psi_hat, u)
            }
            DampingShape::Product { factors, scale, .. } => {
                let mut acc = Complex64::new(*scale, 0.0);
                for f in factors {
                    let eta = apply(&f.basis_inverse, [xi[0], xi[1]]);
                    acc *= f.first.eval_hat(&eta[..1]) * f.second.eval_hat(&eta[1..]);
                    if acc.norm() == 0.0 {
                        break;
                    }
                }
                acc
            }
        }
    }

    /// Largest |ξ| covered by the samples (per axis of each factor).
    pub fn spectral_extent(&self) -> f64 {
        match &self.shape {
            DampingShape::Sampled { grid, .. } => (grid.n / 2 - 1) as f64 * grid.dxi(),
            DampingShape::Product { factors, .. } => factors
                .iter()
                .map(|f| {
                    let e = f.first.spectral_extent().min(f.second.spectral_extent());
                    let b = &f.basis_inverse;
                    let norm = (b[0][0].abs() + b[0][1].abs()).max(b[1][0].abs() + b[1][1].abs());
                    e / norm
                })
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Physical samples as (x, Re ψ, Im ψ) rows (one-dimensional only).
    pub fn physical_rows(&self) -> Vec<(f64, f64, f64)> {
        match &self.shape {
            DampingShape::Sampled { grid, psi, .. } => {
                psi.iter().enumerate().map(|(j, z)| (grid.x(j), z.re, z.im)).collect()
            }
            DampingShape::Product { .. } => Vec::new(),
        }
    }

    /// Spectral samples as (ξ, Re ψ̂, Im ψ̂) rows (one-dimensional only).
    pub fn spectral_rows(&self) -> Vec<(f64, f64, f64)> {
        match &self.shape {
            DampingShape::Sampled { grid, psi_hat, .. } => psi_hat
                .iter()
                .enumerate()
                .map(|(k, z)| (grid.xi(k), z.re, z.im))
                .collect(),
            DampingShape::Product { .. } => Vec::new(),
        }
    }
}

// ---------------------------------------------------------------------------
// Effective multiplier

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierConfig {
    /// Lower bound on the spectral half-extent Ξ.
    pub min_extent: f64,
    pub dxi: f64,
    pub leakage_tol: f64,
}

impl Default for MultiplierConfig {
    fn default() -> Self {
        Self {
            min_extent: 512.0,
            dxi: 0.25,
            leakage_tol: DEFAULT_LEAKAGE_TOL,
        }
    }
}

impl MultiplierConfig {
    /// Spectral half-extent Ξ = max(10T, min_extent) for a given σ.
    pub fn spectral_extent(&self, sigma: f64) -> f64 {
        (10.0 * multiplier_t(sigma)).max(self.min_extent)
    }

    /// Recommended weight half-extent 4Ξ.
    pub fn weight_extent(&self, sigma: f64) -> f64 {
        4.0 * self.spectral_extent(sigma)
    }
}

/// T = 20/(πσ).
pub fn multiplier_t(sigma: f64) -> f64 {
    20.0 / (PI * sigma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierDiagnostics {
    pub sigma: f64,
    pub t_param: f64,
    pub xi_extent: f64,
    /// Whether the staircase uses ⌊s₀/π − ½⌋ instead of ⌊s₀/π⌋.
    pub half_shift: bool,
    pub s0_at_zero: f64,
    pub zeros: Vec<f64>,
    pub hypothesis_sup: f64,
    pub hypothesis_bound: f64,
    pub c_omega: f64,
    pub c_omega0: f64,
    pub leakage: f64,
    /// min over grid points in [−3/4, 3/4] of |ψ̂| / (σ¹⁰ ω / (4·10¹¹)).
    pub lower_bound_ratio: f64,
    pub psi_hat_at_zero: f64,
    pub omega_at_zero: f64,
    pub hilbert_h: f64,
    /// s₀ on the weight grid.
    pub s0: Vec<f64>,
}

impl MultiplierDiagnostics {
    /// k(x) on the weight grid.
    pub fn staircase(&self) -> Vec<i64> {
        let shift = if self.half_shift { 0.5 } else { 0.0 };
        self.s0.iter().map(|s| (s / PI - shift).floor() as i64).collect()
    }

    pub fn grid_x(&self, i: usize) -> f64 {
        (i as f64 - (self.s0.len() / 2) as f64) * self.hilbert_h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    pub psi: DampingFunction,
    pub diagnostics: MultiplierDiagnostics,
}

fn central_derivative_sup(v: &[f64], h: f64, fraction: f64) -> f64 {
    let k = v.len() / 2;
    let lim = ((k as f64) * fraction) as usize;
    let mut sup = 0.0f64;
    for i in k - lim + 1..k + lim {
        sup = sup.max(((v[i + 1] - v[i - 1]) / (2.0 * h)).abs());
    }
    sup
}

/// c(g) from 𝓗(𝓗g) = −g + c(g): c = g(0) + 𝓗(𝓗g)(0), using
/// 𝓗u(0) = −(1/π)∫₀^∞ (u(t) − u(−t)) / (t(1+t²)) dt.
fn hilbert_inversion_constant(g0: f64, hg: &[f64], h: f64) -> f64 {
    let k = hg.len() / 2;
    let mut vals = Vec::with_capacity(k + 1);
    vals.push((hg[k + 1] - hg[k - 1]) / h);
    for j in 1..=k {
        let t = j as f64 * h;
        vals.push((hg[k + j] - hg[k - j]) / (t * (1.0 + t * t)));
    }
    g0 - trapezoid(&vals, h) / PI
}

/// Zero density of the staircase beyond the grid, symmetric in t.
fn zero_density(t: f64, sigma: f64, tt: f64) -> f64 {
    (sigma - 10.0 / PI * tt / (t * t + tt * tt)).max(0.0)
}

/// Σ over the continuum of zeros beyond the grid of
/// log|ξ − t| − ½ log(1 + t²), weighted by the zero density.
struct Continuum {
    right: f64,
    left: f64,
    sigma: f64,
    tt: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Continuum {
    fn gl(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + r * x))
            .sum::<f64>()
            * r
    }

    fn eval(&self, xi: f64) -> f64 {
        let rho = |t: f64| zero_density(t, self.sigma, self.tt);
        let a = self.right.max(self.left);
        // Symmetric part on [a, ∞) via t = a/u.
        let sym = self.gl(0.0, 1.0, |u| {
            if u <= 0.0 {
                return 0.0;
            }
            let t = a / u;
            (((t * t - xi * xi).abs()).ln() - (1.0 + t * t).ln()) * rho(t) * a / (u * u)
        });
        let one_side = |lo: f64, s: f64| {
            if lo >= a {
                0.0
            } else {
                self.gl(lo, a, |t| ((s * t - xi).abs().ln() - 0.5 * (1.0 + t * t).ln()) * rho(t))
            }
        };
        sym + one_side(self.right, 1.0) + one_side(self.left, -1.0)
    }
}

/// Builds ψ with supp ψ ⊂ [0, σ] and |ψ̂| = ⅓ e^{−𝓗(s)} ω/(ξ²+T²)⁵.
pub fn build_multiplier(omega: &Weight, sigma: f64, cfg: &MultiplierConfig) -> Result<Multiplier> {
    if !(sigma > 0.0 && sigma < 0.1) {
        return invalid(format!("sigma must lie in (0, 1/10), got {sigma}"));
    }
    let tt = multiplier_t(sigma);
    let xi_ext = cfg.spectral_extent(sigma);
    if omega.half_extent() < 2.0 * xi_ext {
        return invalid(format!(
            "weight half-extent {} is below 2Ξ = {}",
            omega.half_extent(),
            2.0 * xi_ext
        ));
    }
    let h = omega.h;
    let k = omega.big_omega.len() / 2;
    let h_omega = hilbert_modified(&omega.big_omega, h)?;
    let hypothesis_sup = central_derivative_sup(&h_omega, h, 0.9);
    let hypothesis_bound = 0.5 * PI * sigma;
    if hypothesis_sup > hypothesis_bound {
        return Err(Error::Contract(format!(
            "weight hypothesis fails: sup |𝓗(Ω)'| = {hypothesis_sup:.6e} > (π/2)σ = {hypothesis_bound:.6e}"
        )));
    }
    let s0: Vec<f64> = (0..omega.big_omega.len())
        .map(|i| {
            let x = omega.x(i);
            PI * sigma * x + h_omega[i] - 10.0 * (x / tt).atan()
        })
        .collect();
    let s0_at_zero = s0[k];
    let frac = (s0_at_zero / PI).rem_euclid(1.0);
    let half_shift = !(0.25..=0.75).contains(&frac);
    let shift = if half_shift { 0.5 } else { 0.0 };
    // Near the grid edge 𝓗(Ω) inherits the logarithmic singularity of the
    // tail correction; zeros there are replaced by the continuum.
    let inner = ((k as f64) * 0.9) as usize;
    let mut zeros = Vec::new();
    for i in k - inner..k + inner {
        let (a, b) = (s0[i] / PI - shift, s0[i + 1] / PI - shift);
        let (fa, fb) = (a.floor(), b.floor());
        if fb > fa {
            let mut level = fa + 1.0;
            while level <= fb {
                let t = (level - a) / (b - a);
                zeros.push(omega.x(i) + t * h);
                level += 1.0;
            }
        } else if fb < fa {
            return Err(Error::Contract("staircase is not monotone".into()));
        }
    }
    let c_omega = hilbert_inversion_constant(omega.big_omega[k], &h_omega, h);
    let c_omega0 = c_omega + 10.0 * (tt + 1.0).ln();

    let edge_gap = |x: f64| 0.5 / zero_density(x, sigma, tt).max(1e-12);
    let (right, left) = match (zeros.first(), zeros.last()) {
        (Some(&lo), Some(&hi)) => (hi + edge_gap(hi), -(lo - edge_gap(lo))),
        _ => (omega.half_extent(), omega.half_extent()),
    };
    let (nodes, weights) = gauss_legendre(64);
    let continuum = Continuum {
        right,
        left,
        sigma,
        tt,
        nodes,
        weights,
    };

    let n = 2 * (xi_ext / cfg.dxi).ceil() as usize;
    let grid = UniformGrid {
        n,
        dx: 1.0 / (n as f64 * cfg.dxi),
        x0: -0.5 / cfg.dxi,
    };
    let log_norms: Vec<f64> = zeros.iter().map(|z| 0.5 * (1.0 + z * z).ln()).collect();
    let log_const = (1.0f64 / 3.0).ln() + PI * sigma - c_omega0;
    let mut psi_hat = Vec::with_capacity(n);
    for kk in 0..n {
        let xi = grid.xi(kk);
        let mut log_mod = log_const + continuum.eval(xi);
        let mut crossings = 0usize;
        for (z, ln) in zeros.iter().zip(&log_norms) {
            log_mod += (xi - z).abs().ln() - ln;
            if (*z > 0.0 && *z < xi) || (*z < 0.0 && *z > xi) {
                crossings += 1;
            }
        }
        let sign = if crossings % 2 == 0 { 1.0 } else { -1.0 };
        psi_hat.push(Complex64::from_polar(sign * log_mod.exp(), -PI * sigma * xi));
    }
    let constants = DampingConstants {
        c1: 5.0 * sigma,
        c2: sigma.powi(10) / 4e11,
        c3: 1.0,
        alpha: omega.alpha,
    };
    let psi = DampingFunction::from_spectrum(grid, psi_hat, constants, [0.0, sigma])?;
    if psi.leakage > cfg.leakage_tol {
        return Err(Error::Contract(format!(
            "multiplier support leakage {:.3e} above tolerance {:.1e}",
            psi.leakage, cfg.leakage_tol
        )));
    }
    let DampingShape::Sampled { psi_hat, .. } = &psi.shape else {
        unreachable!()
    };
    let mut lower_bound_ratio = f64::INFINITY;
    for (kk, z) in psi_hat.iter().enumerate() {
        let xi = grid.xi(kk);
        if xi.abs() <= 0.75 {
            let bound = sigma.powi(10) / 4e11 * omega.omega_at(xi);
            lower_bound_ratio = lower_bound_ratio.min(z.norm() / bound);
        }
    }
    if !(lower_bound_ratio >= 1.0) {
        return Err(Error::Contract(format!(
            "multiplier lower bound fails on [-3/4, 3/4]: ratio {lower_bound_ratio:.3e}"
        )));
    }
    let diagnostics = MultiplierDiagnostics {
        sigma,
        t_param: tt,
        xi_extent: xi_ext,
        half_shift,
        s0_at_zero,
        zeros,
        hypothesis_sup,
        hypothesis_bound,
        c_omega,
        c_omega0,
        leakage: psi.leakage,
        lower_bound_ratio,
        psi_hat_at_zero: psi_hat[n / 2].norm(),
        omega_at_zero: omega.omega_at(0.0),
        hilbert_h: h,
        s0,
    };
    Ok(Multiplier { psi, diagnostics })
}

// ---------------------------------------------------------------------------
// Regular-set damping

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularDampingConfig {
    pub delta1: f64,
    pub c_r: f64,
    pub iota: f64,
    pub q_star: f64,
    pub hilbert_h: f64,
    pub leakage_tol: f64,
}

impl RegularDampingConfig {
    pub fn new(delta1: f64, c_r: f64) -> Self {
        Self {
            delta1,
            c_r,
            iota: DEFAULT_IOTA,
            q_star: 1.0,
            hilbert_h: 1.0 / 32.0,
            leakage_tol: DEFAULT_LEAKAGE_TOL,
        }
    }

    pub fn alpha(&self) -> f64 {
        0.5 * (1.0 + self.delta1)
    }
}

/// Smooth step: 1 for s ≤ 0, 0 for s ≥ 1.
fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        return 1.0;
    }
    if s >= 1.0 {
        return 0.0;
    }
    let e = |u: f64| if u > 0.0 { (-1.0 / u).exp() } else { 0.0 };
    e(1.0 - s) / (e(1.0 - s) + e(s))
}

/// Disjoint closed intervals of a one-dimensional grid set, sorted.
fn intervals(y: &GridSet) -> Vec<[f64; 2]> {
    let h = y.resolution();
    let mut out: Vec<[f64; 2]> = Vec::new();
    for c in y.cubes() {
        let a = y.cube_corner(c)[0];
        match out.last_mut() {
            Some(last) if a <= last[1] + 1e-9 * h => last[1] = last[1].max(a + h),
            _ => out.push([a, a + h]),
        }
    }
    out
}

fn distance_to(iv: &[[f64; 2]], x: f64) -> f64 {
    if iv.is_empty() {
        return f64::INFINITY;
    }
    let i = iv.partition_point(|v| v[1] < x);
    let mut d = f64::INFINITY;
    if i < iv.len() {
        d = d.min((iv[i][0] - x).max(0.0));
    }
    if i > 0 {
        d = d.min(x - iv[i - 1][1]);
    }
    d.max(0.0)
}

/// Ω_Y = ⟨ξ⟩^{1/2}, blended into Θ(|ξ|)|ξ| on the 1-neighbourhood of
/// Y ∩ {|ξ| ≥ 9} with transition width 1.
pub fn regular_set_weight(y: &GridSet, alpha: f64, half_extent: f64, h: f64) -> Result<Weight> {
    if y.dimension() != 1 {
        return invalid("regular-set weight needs a one-dimensional set");
    }
    let far: Vec<[f64; 2]> = intervals(y)
        .into_iter()
        .filter_map(|[a, b]| {
            if b <= -9.0 {
                Some([a, b])
            } else if a >= 9.0 {
                Some([a, b])
            } else if a < -9.0 {
                Some([a, -9.0])
            } else if b > 9.0 {
                Some([9.0, b])
            } else {
                None
            }
        })
        .collect();
    Weight::from_fn(
        |x| {
            let chi = smooth_step(distance_to(&far, x) - 1.0);
            let base = japanese(x).sqrt();
            if chi == 0.0 {
                base
            } else {
                (1.0 - chi) * base + chi * theta(x.abs(), alpha) * x.abs()
            }
        },
        half_extent,
        h,
        alpha,
        "regular-set weight",
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularDamping {
    pub psi: DampingFunction,
    pub params: DampingParams,
    pub sigma: f64,
    pub sigma_clamped: bool,
    /// Factor applied to the raw multiplier.
    pub normalization: f64,
    pub multiplier: MultiplierDiagnostics,
    pub report: DampingReport,
}

fn set_extent(y: &GridSet) -> f64 {
    y.extent()
        .iter()
        .map(|[a, b]| a.abs().max(b.abs()))
        .fold(0.0, f64::max)
}

/// Damping for a one-dimensional regular set, with supp ψ ⊂ [−c₁/10, c₁/10].
pub fn build_regular_damping(y: &GridSet, c1: f64, cfg: &RegularDampingConfig) -> Result<RegularDamping> {
    if y.dimension() != 1 {
        return invalid("regular damping needs a one-dimensional set");
    }
    if !(c1 > 0.0 && c1 < 1.0) {
        return invalid(format!("c1 must lie in (0, 1), got {c1}"));
    }
    let params = damping_params(c1, cfg.c_r, cfg.delta1, 1, 1, cfg.iota, cfg.q_star)?;
    let (c2, c3) = (params.c2(), params.c3());
    let alpha = cfg.alpha();
    let sigma_max = 0.1 - 1e-6;
    let sigma_clamped = c1 / 5.0 > sigma_max;
    let sigma = (c1 / 5.0).min(sigma_max);
    let big_n = set_extent(y);
    let mcfg = MultiplierConfig {
        min_extent: (4.0 * big_n).max(512.0),
        leakage_tol: cfg.leakage_tol,
        ..MultiplierConfig::default()
    };
    let weight = regular_set_weight(y, alpha, mcfg.weight_extent(sigma), cfg.hilbert_h)?;
    let raw = build_multiplier(&weight.scaled(c3), sigma, &mcfg)?;
    let DampingShape::Sampled { grid, psi_hat, .. } = &raw.psi.shape else {
        unreachable!()
    };
    let grid = *grid;
    let shift = 0.5 * sigma;
    let mut ratio = f64::INFINITY;
    for (k, z) in psi_hat.iter().enumerate() {
        let xi = grid.xi(k);
        let bound = (-c3 * weight.big_omega_at(xi)).exp().min(1.0 / japanese(xi));
        if z.norm() > 0.0 {
            ratio = ratio.min(bound / z.norm());
        }
    }
    let normalization = 0.5 * ratio;
    let hat: Vec<Complex64> = psi_hat
        .iter()
        .enumerate()
        .map(|(k, z)| z * normalization * Complex64::from_polar(1.0, 2.0 * PI * shift * grid.xi(k)))
        .collect();
    let constants = DampingConstants { c1, c2, c3, alpha };
    let psi = DampingFunction::from_spectrum(grid, hat, constants, [-c1 / 10.0, c1 / 10.0])?;
    let report = verify_damping(
        &psi,
        y,
        &VerifyParams {
            constants,
            mode: BulletMode::RegularSet,
            leakage_tol: cfg.leakage_tol,
        },
    );
    Ok(RegularDamping {
        psi,
        params,
        sigma,
        sigma_clamped,
        normalization,
        multiplier: raw.diagnostics,
        report,
    })
}

/// ψ̂(ξ) = 0.9 exp(−π(c₁ξ/4)²): a Gaussian concentrated in the support
/// box but without the prescribed decay on spread-out sets.
pub fn gaussian_control(c1: f64, c3: f64, alpha: f64, xi_extent: f64) -> Result<DampingFunction> {
    let dxi = 0.25;
    let n = 2 * (xi_extent / dxi).ceil() as usize;
    let grid = UniformGrid {
        n,
        dx: 1.0 / (n as f64 * dxi),
        x0: -0.5 / dxi,
    };
    let hat = (0..n)
        .map(|k| Complex64::new(0.9 * (-PI * (c1 * grid.xi(k) / 4.0).powi(2)).exp(), 0.0))
        .collect();
    let constants = DampingConstants {
        c1,
        c2: DEFAULT_IOTA * c1.powi(10),
        c3,
        alpha,
    };
    DampingFunction::from_spectrum(grid, hat, constants, [-c1 / 10.0, c1 / 10.0])
}

// ---------------------------------------------------------------------------
// Product damping

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleCover {
    pub e1: [f64; 2],
    pub e2: [f64; 2],
    pub y1: GridSet,
    pub y2: GridSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleSpec {
    pub covers: Vec<AdmissibleCover>,
    pub eps0: f64,
}

impl AdmissibleSpec {
    /// Points B_j η for η sampled on the cubes of Y_{j,1} × Y_{j,2}.
    pub fn sample_points(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for c in &self.covers {
            let (a, b) = (y_sample_points_1d(&c.y1), y_sample_points_1d(&c.y2));
            for u in a.iter().step_by(4) {
                for v in b.iter().step_by(4) {
                    out.push(vec![u * c.e1[0] + v * c.e2[0], u * c.e1[1] + v * c.e2[1]]);
                }
            }
        }
        out
    }

    /// Y = ∪_j {ξ : (ξ·e_{j,1}, ξ·e_{j,2})-coordinates in Y_{j,1} × Y_{j,2}},
    /// tested through the dual basis.
    pub fn contains(&self, xi: [f64; 2]) -> bool {
        self.covers.iter().any(|c| {
            let Some(inv) = invert([[c.e1[0], c.e2[0]], [c.e1[1], c.e2[1]]]) else {
                return false;
            };
            let eta = apply(&inv, xi);
            c.y1.contains_point(&eta[..1]) && c.y2.contains_point(&eta[1..])
        })
    }
}

fn invert(m: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < 1e-14 {
        return None;
    }
    Some([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductDamping {
    pub psi: DampingFunction,
    pub params: DampingParams,
    pub nu: f64,
    pub eps1: f64,
    pub factor_c1: f64,
    pub factor_reports: Vec<DampingReport>,
}

/// ψ̂(ξ) = (1/5)(c₁ν)⁴ Π_j ψ̂_{j,1}(ξ_{j,1}) ψ̂_{j,2}(ξ_{j,2}) with ξ_{j,i} the
/// coordinates of ξ in the frame (e_{j,1}, e_{j,2}).
pub fn product_damping(spec: &AdmissibleSpec, c1: f64, cfg: &RegularDampingConfig) -> Result<ProductDamping> {
    let m = spec.covers.len();
    if m == 0 {
        return invalid("admissible spec needs at least one cover");
    }
    if !(c1 > 0.0 && c1 < 1.0) {
        return invalid(format!("c1 must lie in (0, 1), got {c1}"));
    }
    let mut frames = Vec::with_capacity(m);
    for (j, c) in spec.covers.iter().enumerate() {
        let (n1, n2) = (c.e1[0].hypot(c.e1[1]), c.e2[0].hypot(c.e2[1]));
        if (n1 - 1.0).abs() > 1e-9 || (n2 - 1.0).abs() > 1e-9 {
            return invalid(format!("cover {j}: frame vectors must be unit vectors"));
        }
        let dot = c.e1[0] * c.e2[0] + c.e1[1] * c.e2[1];
        if dot.abs() >= 1.0 - spec.eps0 {
            return Err(Error::InvalidInput(format!(
                "cover {j}: degenerate frame, |e1·e2| = {:.6} ≥ 1 − ε0",
                dot.abs()
            )));
        }
        let basis = [[c.e1[0], c.e2[0]], [c.e1[1], c.e2[1]]];
        let inv = invert(basis).ok_or_else(|| Error::InvalidInput("singular frame".into()))?;
        frames.push((basis, inv));
    }
    // supp ψ_j ⊂ B_j^{−T}[−c̃/10, c̃/10]²; its box has half-width (c̃/10)‖B_j^{−T}‖_∞.
    let inv_t_norm = |inv: &[[f64; 2]; 2]| {
        (inv[0][0].abs() + inv[1][0].abs()).max(inv[0][1].abs() + inv[1][1].abs())
    };
    let eps1 = frames
        .iter()
        .map(|(_, inv)| (10.0 / inv_t_norm(inv)).min(1.0))
        .fold(1.0, f64::min);
    let factor_c1 = eps1 * c1 / m as f64;
    let params = product_damping_params(c1, cfg.c_r, cfg.delta1, m as u32, cfg.iota, cfg.q_star)?;
    let nu = cfg.iota / (cfg.c_r * cfg.c_r) * cfg.delta1 * (1.0 - cfg.delta1);
    let scale = 0.2 * (c1 * nu).powi(4);
    let mut factors = Vec::with_capacity(m);
    let mut factor_reports = Vec::new();
    let mut support_box = vec![[0.0, 0.0]; 2];
    let mut keep = 1.0;
    for (c, (basis, inv)) in spec.covers.iter().zip(&frames) {
        let f1 = build_regular_damping(&c.y1, factor_c1, cfg)?;
        let f2 = build_regular_damping(&c.y2, factor_c1, cfg)?;
        keep *= (1.0 - f1.psi.leakage) * (1.0 - f2.psi.leakage);
        let half = factor_c1 / 10.0;
        for (axis, b) in support_box.iter_mut().enumerate() {
            let w = half * (inv[0][axis].abs() + inv[1][axis].abs());
            b[0] -= w;
            b[1] += w;
        }
        factor_reports.push(f1.report);
        factor_reports.push(f2.report);
        factors.push(ProductFactor {
            basis: *basis,
            basis_inverse: *inv,
            first: f1.psi,
            second: f2.psi,
        });
    }
    let constants = DampingConstants {
        c1,
        c2: params.c2(),
        c3: params.c3(),
        alpha: cfg.alpha(),
    };
    let psi = DampingFunction {
        dimension: 2,
        constants,
        support: vec![[-c1, c1]; 2],
        leakage: 1.0 - keep,
        shape: DampingShape::Product {
            factors,
            scale,
            support_box,
        },
    };
    Ok(ProductDamping {
        psi,
        params,
        nu,
        eps1,
        factor_c1,
        factor_reports,
    })
}

// ---------------------------------------------------------------------------
// Verification

/// Which bullet set to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BulletMode {
    /// Support in the target box, |ψ̂| ≥ c₂ on [−3/4, 3/4],
    /// |ψ̂| ≤ exp(−c₃⟨ξ⟩^{1/2}), and |ψ̂| ≤ exp(−c₃Θ(|ξ|)|ξ|) on Y ∩ {|ξ| ≥ 10}.
    RegularSet,
    /// Support in [−c₁, c₁]^d, ‖ψ̂‖_{L²([−1,1]^d)} ≥ c₂, |ψ̂| ≤ ⟨ξ⟩^{−d},
    /// and |ψ̂| ≤ exp(−c₃Θ(|ξ|₁)|ξ|₁) on Y.
    Definition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyParams {
    pub constants: DampingConstants,
    pub mode: BulletMode,
    pub leakage_tol: f64,
}

impl VerifyParams {
    pub fn of(psi: &DampingFunction, mode: BulletMode) -> Self {
        Self {
            constants: psi.constants,
            mode,
            leakage_tol: DEFAULT_LEAKAGE_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DampingReport {
    pub mode: BulletMode,
    pub dimension: usize,
    pub support_leakage: f64,
    pub support_inside: bool,
    pub lower_bound_measured: f64,
    pub lower_bound_required: f64,
    pub global_decay_margin: f64,
    /// None when no grid point of Y is constrained.
    pub y_decay_margin: Option<f64>,
    pub y_points: usize,
    pub bullets: [bool; 4],
    pub pass: bool,
}

fn y_sample_points_1d(y: &GridSet) -> Vec<f64> {
    let h = y.resolution();
    let mut out = Vec::new();
    for c in y.cubes() {
        let a = y.cube_corner(c)[0];
        for i in 0..=8 {
            out.push(a + h * i as f64 / 8.0);
        }
    }
    out
}

fn y_sample_points_2d(y: &GridSet) -> Vec<[f64; 2]> {
    let h = y.resolution();
    let mut out = Vec::new();
    for c in y.cubes() {
        let a = y.cube_corner(c);
        for i in 0..=2 {
            for j in 0..=2 {
                out.push([a[0] + h * i as f64 / 2.0, a[1] + h * j as f64 / 2.0]);
            }
        }
    }
    out
}

/// Evaluates the four bullets on grids and on sample points of Y.
pub fn verify_damping(psi: &DampingFunction, y: &GridSet, params: &VerifyParams) -> DampingReport {
    let points: Vec<Vec<f64>> = if y.dimension() != psi.dimension || y.is_empty() {
        Vec::new()
    } else if y.dimension() == 1 {
        y_sample_points_1d(y).into_iter().map(|x| vec![x]).collect()
    } else {
        y_sample_points_2d(y).into_iter().map(|x| x.to_vec()).collect()
    };
    verify_damping_at(psi, &points, params)
}

/// [`verify_damping`] with the on-Y bullet evaluated at explicit points.
pub fn verify_damping_at(psi: &DampingFunction, y_points: &[Vec<f64>], params: &VerifyParams) -> DampingReport {
    let DampingConstants { c1, c2, c3, alpha } = params.constants;
    let d = psi.dimension;
    let (target, support_box) = match (&psi.shape, params.mode) {
        (DampingShape::Sampled { .. }, BulletMode::RegularSet) => (vec![[-c1 / 10.0, c1 / 10.0]], None),
        (DampingShape::Sampled { .. }, BulletMode::Definition) => (vec![[-c1, c1]], None),
        (DampingShape::Product { support_box, .. }, _) => (vec![[-c1, c1]; d], Some(support_box.clone())),
    };
    let (support_leakage, support_inside) = match (&psi.shape, support_box) {
        (DampingShape::Sampled { grid, psi, .. }, _) => {
            let l = relative_leakage(grid, psi, target[0]);
            (l, l <= params.leakage_tol)
        }
        (_, Some(bx)) => {
            let slack = 1e-12;
            let inside = bx
                .iter()
                .zip(&target)
                .all(|(b, t)| b[0] >= t[0] - slack && b[1] <= t[1] + slack);
            (psi.leakage, inside && psi.leakage <= params.leakage_tol)
        }
        _ => unreachable!(),
    };

    let global_bound = |xi: &[f64]| -> f64 {
        let r2: f64 = xi.iter().map(|v| v * v).sum();
        match params.mode {
            BulletMode::RegularSet => (-c3 * (1.0 + r2).sqrt().sqrt()).exp(),
            BulletMode::Definition => (1.0 + r2).powf(-(d as f64) / 2.0),
        }
    };
    let mut global_margin = f64::INFINITY;
    let lower_bound_measured;
    match &psi.shape {
        DampingShape::Sampled { grid, psi_hat, .. } => {
            let mut lo = f64::INFINITY;
            let mut l2 = Vec::new();
            for (k, z) in psi_hat.iter().enumerate() {
                let xi = grid.xi(k);
                global_margin = global_margin.min(global_bound(&[xi]) - z.norm());
                if xi.abs() <= 0.75 {
                    lo = lo.min(z.norm());
                }
                if xi.abs() <= 1.0 {
                    l2.push(z.norm_sqr());
                }
            }
            lower_bound_measured = match params.mode {
                BulletMode::RegularSet => lo,
                BulletMode::Definition => trapezoid(&l2, grid.dxi()).sqrt(),
            };
        }
        DampingShape::Product { .. } => {
            let ext = psi.spectral_extent();
            let step = (2.0 * ext / 1000.0).max(0.5);
            let m = (ext / step).floor() as i64;
            for i in -m..=m {
                for j in -m..=m {
                    let xi = [i as f64 * step, j as f64 * step];
                    global_margin = global_margin.min(global_bound(&xi) - psi.eval_hat(&xi).norm());
                }
            }
            let q = 200;
            let hq = 2.0 / q as f64;
            let mut rows = Vec::with_capacity(q + 1);
            for i in 0..=q {
                let row: Vec<f64> = (0..=q)
                    .map(|j| psi.eval_hat(&[-1.0 + i as f64 * hq, -1.0 + j as f64 * hq]).norm_sqr())
                    .collect();
                rows.push(trapezoid(&row, hq));
            }
            lower_bound_measured = trapezoid(&rows, hq).sqrt();
        }
    }

    let y_bound = |r: f64| (-c3 * theta(r, alpha) * r).exp();
    let mut y_margin: Option<f64> = None;
    let mut checked = 0usize;
    for xi in y_points {
        let r: f64 = xi.iter().map(|v| v.abs()).sum();
        if params.mode == BulletMode::RegularSet && r < 10.0 {
            continue;
        }
        let m = y_bound(r) - psi.eval_hat(xi).norm();
        checked += 1;
        y_margin = Some(y_margin.map_or(m, |v| v.min(m)));
    }
    let bullets = [
        support_inside,
        lower_bound_measured >= c2,
        global_margin >= 0.0,
        y_margin.is_none_or(|m| m >= 0.0),
    ];
    DampingReport {
        mode: params.mode,
        dimension: d,
        support_leakage,
        support_inside,
        lower_bound_measured,
        lower_bound_required: c2,
        global_decay_margin: global_margin,
        y_decay_margin: y_margin,
        y_points: checked,
        bullets,
        pass: bullets.iter().all(|b| *b),
    }
}
