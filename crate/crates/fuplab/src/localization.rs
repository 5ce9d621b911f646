//! L² localization of band-limited functions: the three norms of the
//! inequality ‖f‖² ≤ K (Σ_n ‖f‖²_{L²(I_n)})^κ ‖e^{2πq|ξ|₁} f̂‖^{2(1−κ)} and
//! the empirical constant K.
//!
//! Functions live on the torus [−W, W)^d sampled at `points_per_unit`
//! points per unit length. Test functions are kept well inside the central
//! window so the torus stands in for ℝ^d; [`SampledFunction::central_mass`]
//! measures how well.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constants::theta_weight;
use crate::error::{invalid, Result};
use crate::spectral::{forward, inverse, UniformGrid};

/// Interval endpoints and offsets are multiples of this length.
pub const PLACEMENT_QUANTUM: f64 = 0.125;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalizationGrid {
    pub half_width: usize,
    pub points_per_unit: usize,
}

impl LocalizationGrid {
    pub fn new(half_width: usize, points_per_unit: usize) -> Result<Self> {
        if half_width == 0 {
            return invalid("half width must be positive");
        }
        if points_per_unit == 0 || points_per_unit % 8 != 0 {
            return invalid("points per unit must be a positive multiple of 8");
        }
        Ok(Self {
            half_width,
            points_per_unit,
        })
    }

    pub fn n(&self) -> usize {
        2 * self.half_width * self.points_per_unit
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.points_per_unit as f64
    }

    pub fn uniform(&self) -> UniformGrid {
        UniformGrid {
            n: self.n(),
            dx: self.dx(),
            x0: -(self.half_width as f64),
        }
    }

    pub fn nyquist(&self) -> f64 {
        0.5 * self.points_per_unit as f64
    }

    /// Same torus, twice the sampling rate.
    pub fn refined(&self) -> Self {
        Self {
            half_width: self.half_width,
            points_per_unit: 2 * self.points_per_unit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub dimension: usize,
    pub grid: LocalizationGrid,
    /// Row-major samples.
    pub samples: Vec<Complex64>,
    /// Centered spectral samples, same layout.
    pub spectral: Option<Vec<Complex64>>,
}

fn check_dim(d: usize) -> Result<()> {
    if d == 1 || d == 2 {
        Ok(())
    } else {
        invalid(format!("dimension must be 1 or 2, got {d}"))
    }
}

impl SampledFunction {
    pub fn from_samples(d: usize, grid: LocalizationGrid, samples: Vec<Complex64>) -> Result<Self> {
        check_dim(d)?;
        if samples.len() != grid.n().pow(d as u32) {
            return invalid("sample count does not match the grid");
        }
        let spectral = forward(&samples, &grid.uniform(), d);
        Ok(Self {
            dimension: d,
            grid,
            samples,
            spectral: Some(spectral),
        })
    }

    pub fn from_spectrum(d: usize, grid: LocalizationGrid, spectral: Vec<Complex64>) -> Result<Self> {
        check_dim(d)?;
        if spectral.len() != grid.n().pow(d as u32) {
            return invalid("spectral sample count does not match the grid");
        }
        let samples = inverse(&spectral, &grid.uniform(), d);
        Ok(Self {
            dimension: d,
            grid,
            samples,
            spectral: Some(spectral),
        })
    }

    fn cell(&self) -> f64 {
        self.grid.dx().powi(self.dimension as i32)
    }

    fn spectral_cell(&self) -> f64 {
        self.grid.uniform().dxi().powi(self.dimension as i32)
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        match &self.spectral {
            Some(s) => s.clone(),
            None => forward(&self.samples, &self.grid.uniform(), self.dimension),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.cell()
    }

    pub fn spectral_norm_sq(&self) -> f64 {
        self.spectrum().iter().map(|z| z.norm_sqr()).sum::<f64>() * self.spectral_cell()
    }

    /// Relative Parseval defect |‖f‖² − ‖f̂‖²| / ‖f‖².
    pub fn parseval_defect(&self) -> f64 {
        let a = self.norm_sq();
        let b = self.spectral_norm_sq();
        if a == 0.0 {
            b
        } else {
            (a - b).abs() / a
        }
    }

    /// Frequencies (ξ₁, …, ξ_d) of a flat index.
    fn frequency(&self, idx: usize) -> [f64; 2] {
        let g = self.grid.uniform();
        let n = g.n;
        if self.dimension == 1 {
            [g.xi(idx), 0.0]
        } else {
            [g.xi(idx / n), g.xi(idx % n)]
        }
    }

    fn position(&self, idx: usize) -> [f64; 2] {
        let g = self.grid.uniform();
        let n = g.n;
        if self.dimension == 1 {
            [g.x(idx), 0.0]
        } else {
            [g.x(idx / n), g.x(idx % n)]
        }
    }

    /// ∫ w(ξ)|f̂(ξ)|² dξ.
    pub fn weighted_spectral_norm_sq<W: Fn([f64; 2]) -> f64>(&self, w: W) -> f64 {
        self.spectrum()
            .iter()
            .enumerate()
            .map(|(i, z)| w(self.frequency(i)) * z.norm_sqr())
            .sum::<f64>()
            * self.spectral_cell()
    }

    /// Fraction of ‖f‖² inside [−W/2, W/2]^d.
    pub fn central_mass(&self) -> f64 {
        let total = self.norm_sq();
        if total == 0.0 {
            return 1.0;
        }
        let h = 0.5 * self.grid.half_width as f64;
        let inside: f64 = self
            .samples
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let p = self.position(*i);
                p[0].abs() <= h && p[1].abs() <= h
            })
            .map(|(_, z)| z.norm_sqr())
            .sum();
        inside * self.cell() / total
    }

    /// Translation by a lattice vector (periodically).
    pub fn shift(&self, by: &[i64]) -> Result<Self> {
        if by.len() != self.dimension {
            return invalid("shift dimension mismatch");
        }
        let n = self.grid.n() as i64;
        let ppu = self.grid.points_per_unit as i64;
        let s: Vec<i64> = by.iter().map(|b| (b * ppu).rem_euclid(n)).collect();
        let nu = n as usize;
        let mut out = vec![Complex64::new(0.0, 0.0); self.samples.len()];
        if self.dimension == 1 {
            for j in 0..nu {
                out[(j + s[0] as usize) % nu] = self.samples[j];
            }
        } else {
            for i in 0..nu {
                for j in 0..nu {
                    let ti = (i + s[0] as usize) % nu;
                    let tj = (j + s[1] as usize) % nu;
                    out[ti * nu + tj] = self.samples[i * nu + j];
                }
            }
        }
        Self::from_samples(self.dimension, self.grid, out)
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

const BUMP_COUNT: usize = 6;
const BUMP_POWER: i32 = 8;

/// Random band-limited function of unit norm: f̂(ξ) = b(ξ)·Σ a_k e^{2πi ξ·t_k}
/// with complex Gaussian a_k, shifts t_k uniform in [−W/8, W/8]^d and the
/// bump b(ξ) = (1 − |ξ|²/ρ²)₊⁸, ρ = R in 1D and R/√2 in 2D so the support
/// lies in the ℓ¹ ball of radius R.
pub fn band_limited_sample(seed: u64, band: f64, d: usize, grid: LocalizationGrid) -> Result<SampledFunction> {
    check_dim(d)?;
    if !(band > 0.0) {
        return invalid("band must be positive");
    }
    if band > grid.nyquist() {
        return invalid(format!("band {band} exceeds the Nyquist frequency {}", grid.nyquist()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = grid.half_width as f64 / 8.0;
    let terms: Vec<(Complex64, [f64; 2])> = (0..BUMP_COUNT)
        .map(|_| {
            let a = gaussian(&mut rng);
            let t1 = rng.gen_range(-s..=s);
            let t2 = if d == 2 { rng.gen_range(-s..=s) } else { 0.0 };
            (a, [t1, t2])
        })
        .collect();
    let rho = if d == 1 { band } else { band / 2f64.sqrt() };
    let shell = spectral_shell(d, grid, |xi| {
        let r2 = (xi[0] * xi[0] + xi[1] * xi[1]) / (rho * rho);
        if r2 >= 1.0 {
            return Complex64::new(0.0, 0.0);
        }
        let b = (1.0 - r2).powi(BUMP_POWER);
        terms
            .iter()
            .map(|(a, t)| a * Complex64::from_polar(b, 2.0 * PI * (xi[0] * t[0] + xi[1] * t[1])))
            .sum()
    });
    normalized(d, grid, shell)
}

fn spectral_shell<F: Fn([f64; 2]) -> Complex64>(d: usize, grid: LocalizationGrid, f: F) -> Vec<Complex64> {
    let g = grid.uniform();
    let n = g.n;
    if d == 1 {
        (0..n).map(|k| f([g.xi(k), 0.0])).collect()
    } else {
        (0..n * n).map(|i| f([g.xi(i / n), g.xi(i % n)])).collect()
    }
}

fn normalized(d: usize, grid: LocalizationGrid, mut spec: Vec<Complex64>) -> Result<SampledFunction> {
    let cell = grid.uniform().dxi().powi(d as i32);
    let norm = (spec.iter().map(|z| z.norm_sqr()).sum::<f64>() * cell).sqrt();
    if norm > 0.0 {
        for z in spec.iter_mut() {
            *z /= norm;
        }
    }
    SampledFunction::from_spectrum(d, grid, spec)
}

/// Unit-norm function with f̂(ξ) = exp(−2Θ(s⟨ξ⟩)·s⟨ξ⟩)·Σ a_k e^{2πi ξ·t_k},
/// ⟨ξ⟩ = (1 + |ξ|²)^{1/2}; `scale` s > 1 concentrates the spectrum near 0.
pub fn theta_damped_sample(
    seed: u64,
    alpha: f64,
    scale: f64,
    d: usize,
    grid: LocalizationGrid,
) -> Result<SampledFunction> {
    check_dim(d)?;
    theta_weight(1.0, alpha)?;
    if !(scale > 0.0) {
        return invalid("scale must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = grid.half_width as f64 / 8.0;
    let terms: Vec<(Complex64, [f64; 2])> = (0..BUMP_COUNT)
        .map(|_| {
            let a = gaussian(&mut rng);
            let t1 = rng.gen_range(-s..=s);
            let t2 = if d == 2 { rng.gen_range(-s..=s) } else { 0.0 };
            (a, [t1, t2])
        })
        .collect();
    let shell = spectral_shell(d, grid, |xi| {
        let r = scale * (1.0 + xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
        let env = (-2.0 * theta_weight(r, alpha).unwrap_or(0.0) * r).exp();
        terms
            .iter()
            .map(|(a, t)| a * Complex64::from_polar(env, 2.0 * PI * (xi[0] * t[0] + xi[1] * t[1])))
            .sum()
    });
    normalized(d, grid, shell)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Placement {
    /// I_n = n + offset + [0, side]^d.
    Fixed { offset: f64 },
    /// Per-cell offsets drawn from a seeded stream keyed by the cell.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalFamily {
    pub lambda: f64,
    pub placement: Placement,
    /// Lattice translation applied to the whole family.
    pub shift: Vec<i64>,
}

impl IntervalFamily {
    pub fn new(lambda: f64, placement: Placement, d: usize) -> Result<Self> {
        check_dim(d)?;
        if !(lambda > 0.0 && lambda <= 0.5) {
            return invalid(format!("lambda must lie in (0, 1/2], got {lambda}"));
        }
        if let Placement::Fixed { offset } = placement {
            if !(0.0..1.0).contains(&offset) {
                return invalid("offset must lie in [0, 1)");
            }
        }
        Ok(Self {
            lambda,
            placement,
            shift: vec![0; d],
        })
    }

    pub fn shifted(&self, by: &[i64]) -> Self {
        let mut out = self.clone();
        for (s, b) in out.shift.iter_mut().zip(by) {
            *s += b;
        }
        out
    }

    /// Side length of each I_n after quantization.
    pub fn side(&self) -> f64 {
        let d = self.shift.len() as i32;
        let s = (self.lambda.powf(1.0 / d as f64) / PLACEMENT_QUANTUM).round() * PLACEMENT_QUANTUM;
        s.max(PLACEMENT_QUANTUM)
    }

    pub fn lambda_quantized(&self) -> f64 {
        self.side().powi(self.shift.len() as i32)
    }

    /// Offsets of I_n inside the cell n (per axis), multiples of the quantum.
    pub fn offsets(&self, cell: &[i64], half_width: usize) -> Vec<f64> {
        let side = self.side();
        let slots = ((1.0 - side) / PLACEMENT_QUANTUM).round() as u64;
        let period = 2 * half_width as i64;
        let key: Vec<i64> = cell
            .iter()
            .zip(&self.shift)
            .map(|(c, s)| (c - s + half_width as i64).rem_euclid(period) - half_width as i64)
            .collect();
        match self.placement {
            Placement::Fixed { offset } => {
                let o = ((offset / PLACEMENT_QUANTUM).round() as u64).min(slots);
                vec![o as f64 * PLACEMENT_QUANTUM; cell.len()]
            }
            Placement::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let k0 = (key[0] + (1 << 31)) as u64;
                let k1 = key.get(1).map_or(0, |k| (k + (1 << 31)) as u64);
                rng.set_stream((k0 << 32) | k1);
                key.iter()
                    .map(|_| rng.gen_range(0..=slots) as f64 * PLACEMENT_QUANTUM)
                    .collect()
            }
        }
    }
}

fn trapezoid_weights(start: usize, len: usize) -> impl Iterator<Item = (usize, f64)> {
    (0..=len).map(move |i| (start + i, if i == 0 || i == len { 0.5 } else { 1.0 }))
}

/// Σ_n ‖f‖²_{L²(I_n)} by the trapezoid rule on grid-aligned boxes.
pub fn local_mass(f: &SampledFunction, family: &IntervalFamily) -> Result<f64> {
    let d = f.dimension;
    if family.shift.len() != d {
        return invalid("family dimension mismatch");
    }
    let w = f.grid.half_width as i64;
    let ppu = f.grid.points_per_unit;
    let n = f.grid.n();
    let len = (family.side() * ppu as f64).round() as usize;
    let dx = f.grid.dx();
    let start = |cell: i64, off: f64| ((cell + w) as usize) * ppu + (off * ppu as f64).round() as usize;
    let mut total = 0.0;
    if d == 1 {
        for c in -w..w {
            let o = family.offsets(&[c], f.grid.half_width);
            total += trapezoid_weights(start(c, o[0]), len)
                .map(|(j, wt)| wt * f.samples[j % n].norm_sqr())
                .sum::<f64>();
        }
        Ok(total * dx)
    } else {
        for c1 in -w..w {
            for c2 in -w..w {
                let o = family.offsets(&[c1, c2], f.grid.half_width);
                for (i, wi) in trapezoid_weights(start(c1, o[0]), len) {
                    for (j, wj) in trapezoid_weights(start(c2, o[1]), len) {
                        total += wi * wj * f.samples[(i % n) * n + j % n].norm_sqr();
                    }
                }
            }
        }
        Ok(total * dx * dx)
    }
}

/// κ = e^{−C̃/q} (−log λ)^{−d}.
pub fn default_kappa(q: f64, lambda: f64, d: usize, c_tilde: f64) -> f64 {
    (-c_tilde / q).exp() * (-lambda.ln()).powi(-(d as i32))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub dimension: usize,
    pub q: f64,
    pub lambda: f64,
    pub lambda_quantized: f64,
    pub kappa_used: f64,
    pub lhs: f64,
    pub sum_local: f64,
    pub weight_norm: f64,
    pub empirical_constant: f64,
    pub paper_constant_form: String,
    pub degenerate: bool,
    pub finite: bool,
}

/// Norms of the localization inequality and the empirical constant.
/// `kappa = None` uses [`default_kappa`] with C̃ = 1.
pub fn localization_check(
    f: &SampledFunction,
    family: &IntervalFamily,
    q: f64,
    kappa: Option<f64>,
) -> Result<LocalizationReport> {
    if !(q > 0.0 && q.is_finite()) {
        return invalid("q must be positive");
    }
    let d = f.dimension;
    let kappa = kappa.unwrap_or_else(|| default_kappa(q, family.lambda, d, 1.0));
    if !(kappa > 0.0 && kappa < 1.0) {
        return invalid(format!("kappa must lie in (0, 1), got {kappa}"));
    }
    let lhs = f.norm_sq();
    let sum_local = local_mass(f, family)?;
    let weight_norm = f.weighted_spectral_norm_sq(|xi| (4.0 * PI * q * (xi[0].abs() + xi[1].abs())).exp());
    let form = if d == 1 {
        "12*exp(10*C1/q)".to_string()
    } else {
        "exp(2*C/q)".to_string()
    };
    let degenerate = lhs == 0.0;
    let empirical = if degenerate {
        0.0
    } else {
        lhs / (sum_local.powf(kappa) * weight_norm.powf(1.0 - kappa))
    };
    Ok(LocalizationReport {
        dimension: d,
        q,
        lambda: family.lambda,
        lambda_quantized: family.lambda_quantized(),
        kappa_used: kappa,
        lhs,
        sum_local,
        weight_norm,
        empirical_constant: empirical,
        paper_constant_form: form,
        degenerate,
        finite: empirical.is_finite(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpThetaReport {
    pub alpha: f64,
    /// ‖e^{Θ(ξ)|ξ|₁} f̂‖ / ‖f‖.
    pub a_measured: f64,
    pub a_bound: f64,
    /// ‖f‖₂ / ‖f‖_{L²(𝒮)} with 𝒮 = ∪ I_n.
    pub ratio: f64,
    pub degenerate: bool,
}

/// Uncertainty ratio under the Θ-decay hypothesis ‖e^{Θ|ξ|₁} f̂‖ ≤ A‖f‖.
pub fn up_theta_check(f: &SampledFunction, alpha: f64, a_bound: f64, family: &IntervalFamily) -> Result<UpThetaReport> {
    theta_weight(1.0, alpha)?;
    let norm = f.norm_sq();
    if norm == 0.0 {
        return Ok(UpThetaReport {
            alpha,
            a_measured: 0.0,
            a_bound,
            ratio: 0.0,
            degenerate: true,
        });
    }
    let weighted = f.weighted_spectral_norm_sq(|xi| {
        let l1 = xi[0].abs() + xi[1].abs();
        (2.0 * theta_weight(l1, alpha).unwrap_or(0.0) * l1).exp()
    });
    let a = (weighted / norm).sqrt();
    if a > a_bound {
        return invalid(format!("decay hypothesis fails: measured A = {a} exceeds {a_bound}"));
    }
    let s = local_mass(f, family)?;
    Ok(UpThetaReport {
        alpha,
        a_measured: a,
        a_bound,
        ratio: (norm / s).sqrt(),
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub dimension: usize,
    pub band: f64,
    pub lambda: f64,
    pub grid: LocalizationGrid,
    pub placement_seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            dimension: 1,
            band: 1.0,
            lambda: 0.25,
            grid: LocalizationGrid {
                half_width: 32,
                points_per_unit: 8,
            },
            placement_seed: 0,
        }
    }
}

/// Reports for every (seed, q) pair, seeds outer.
pub fn localization_suite(cfg: &SuiteConfig, seeds: &[u64], qs: &[f64]) -> Result<Vec<LocalizationReport>> {
    let family = IntervalFamily::new(
        cfg.lambda,
        Placement::Random {
            seed: cfg.placement_seed,
        },
        cfg.dimension,
    )?;
    let mut out = Vec::new();
    for &s in seeds {
        let f = band_limited_sample(s, cfg.band, cfg.dimension, cfg.grid)?;
        for &q in qs {
            out.push(localization_check(&f, &family, q, None)?);
        }
    }
    Ok(out)
}

/// Per-q envelope K(q) = max over reports of the empirical constant.
pub fn envelope(reports: &[LocalizationReport], qs: &[f64]) -> Vec<(f64, f64)> {
    qs.iter()
        .map(|&q| {
            let k = reports
                .iter()
                .filter(|r| r.q == q)
                .map(|r| r.empirical_constant)
                .fold(f64::NEG_INFINITY, f64::max);
            (q, k)
        })
        .collect()
}

/// True when log K grows at most linearly in 1/q: the slopes of log K
/// against 1/q between consecutive points do not increase.
pub fn at_most_linear_in_inverse_q(env: &[(f64, f64)]) -> bool {
    let mut pts: Vec<(f64, f64)> = env.iter().map(|(q, k)| (1.0 / q, k.ln())).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.iter().any(|p| !p.1.is_finite()) {
        return false;
    }
    let slopes: Vec<f64> = pts.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    slopes
        .windows(2)
        .all(|s| s[1] <= s[0].max(0.0) + 1e-9 * (1.0 + s[0].abs()))
}
