//! Cartan estimates for logarithmic potentials of point masses, Riesz-mass
//! bounds for log-moduli of explicit analytic functions, and Cartan-2 sets
//! with their real traces.
//!
//! The Cartan cover is built by a Vitali selection. Write n for the total
//! mass. A point z with μ(D(z,t)) ≤ n·t/H for every t > 0 satisfies
//! Σ w_j log|z − z_j| ≥ n log(H/e) (integrate log t against t ↦ μ(D(z,t))).
//! Every point violating that condition lies in D(p, τ_p/2) for a mass point
//! p, where τ_p is the largest radius with μ(D(p,τ)) ≥ n·τ/(2H). Choosing the
//! disks D(p, τ_p) greedily by decreasing radius and pairwise disjoint, the
//! enlarged disks D(p, 5τ_p/2) cover every violator and their radii sum to
//! at most 5H.

use std::f64::consts::{E, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMasses {
    pub points: Vec<Complex64>,
    pub weights: Vec<f64>,
}

impl PointMasses {
    pub fn new(points: Vec<Complex64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return invalid("points and weights must have equal length");
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return invalid("weights must be finite and nonnegative");
        }
        Ok(Self { points, weights })
    }

    pub fn unit(points: Vec<Complex64>) -> Self {
        let weights = vec![1.0; points.len()];
        Self { points, weights }
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Σ w_j log|z − z_j|; −∞ exactly at charged points.
pub fn log_potential(z: Complex64, masses: &PointMasses) -> f64 {
    let mut s = 0.0;
    for (p, &w) in masses.points.iter().zip(&masses.weights) {
        if w == 0.0 {
            continue;
        }
        let d = (z - p).norm();
        if d == 0.0 {
            return f64::NEG_INFINITY;
        }
        s += w * d.ln();
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Complex64,
    pub radius: f64,
}

impl Disk {
    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() <= self.radius
    }

    /// The interval D ∩ ℝ, if nonempty.
    pub fn real_trace(&self) -> Option<(f64, f64)> {
        let y = self.center.im.abs();
        if y > self.radius {
            return None;
        }
        let half = (self.radius * self.radius - y * y).sqrt();
        Some((self.center.re - half, self.center.re + half))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskCover {
    pub disks: Vec<Disk>,
    /// The parameter H; the radii sum to at most 5H.
    pub budget: f64,
}

impl DiskCover {
    pub fn empty(budget: f64) -> Self {
        Self {
            disks: Vec::new(),
            budget,
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.disks.iter().any(|d| d.contains(z))
    }

    pub fn radius_sum(&self) -> f64 {
        self.disks.iter().map(|d| d.radius).sum()
    }

    /// Measure of (∪ D_j) ∩ ℝ ∩ [lo, hi].
    pub fn real_trace_measure(&self, lo: f64, hi: f64) -> f64 {
        let mut iv: Vec<(f64, f64)> = self
            .disks
            .iter()
            .filter_map(Disk::real_trace)
            .map(|(a, b)| (a.max(lo), b.min(hi)))
            .filter(|(a, b)| b > a)
            .collect();
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut total = 0.0;
        let mut cur: Option<(f64, f64)> = None;
        for (a, b) in iv {
            match cur {
                Some((ca, cb)) if a <= cb => cur = Some((ca, cb.max(b))),
                Some((ca, cb)) => {
                    total += cb - ca;
                    cur = Some((a, b));
                }
                None => cur = Some((a, b)),
            }
        }
        if let Some((a, b)) = cur {
            total += b - a;
        }
        total
    }
}

/// Largest τ with μ(D̄(p, τ)) ≥ n·τ/(2H).
fn heavy_radius(p: Complex64, masses: &PointMasses, n: f64, h: f64) -> f64 {
    let mut by_dist: Vec<(f64, f64)> = masses
        .points
        .iter()
        .zip(&masses.weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(q, &w)| ((q - p).norm(), w))
        .collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = 0.0f64;
    let mut cum = 0.0;
    let mut i = 0;
    while i < by_dist.len() {
        let d = by_dist[i].0;
        while i < by_dist.len() && by_dist[i].0 == d {
            cum += by_dist[i].1;
            i += 1;
        }
        let reach = 2.0 * h * cum / n;
        if reach >= d {
            let next = by_dist.get(i).map_or(f64::INFINITY, |x| x.0);
            best = best.max(reach.min(next));
        }
    }
    best
}

/// Cartan cover: Σ radii ≤ 5H and, outside the closed disks,
/// log_potential(z) ≥ μ_total·log(H/e).
pub fn cartan_disks(masses: &PointMasses, h: f64) -> Result<DiskCover> {
    if !(h > 0.0) || !h.is_finite() {
        return invalid(format!("H must be positive, got {h}"));
    }
    let n = masses.total();
    if n == 0.0 {
        return Ok(DiskCover::empty(h));
    }
    let mut cands: Vec<(f64, Complex64)> = masses
        .points
        .iter()
        .zip(&masses.weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&p, _)| (heavy_radius(p, masses, n, h), p))
        .collect();
    // Largest radii first; ties broken by position for determinism.
    cands.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(a.1.re.total_cmp(&b.1.re))
            .then(a.1.im.total_cmp(&b.1.im))
    });
    let mut chosen: Vec<(f64, Complex64)> = Vec::new();
    for (tau, p) in cands {
        if chosen.iter().all(|(t, q)| (p - q).norm() > tau + t) {
            chosen.push((tau, p));
        }
    }
    Ok(DiskCover {
        disks: chosen
            .into_iter()
            .map(|(tau, p)| Disk {
                center: p,
                radius: 2.5 * tau,
            })
            .collect(),
        budget: h,
    })
}

/// F(z) = scale · Π (z − a_j).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroSetFunction {
    pub scale: Complex64,
    pub zeros: Vec<Complex64>,
}

impl ZeroSetFunction {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.zeros.iter().fold(self.scale, |acc, a| acc * (z - a))
    }

    /// log|F(z)|.
    pub fn log_abs(&self, z: Complex64) -> f64 {
        let mut s = self.scale.norm().ln();
        for a in &self.zeros {
            s += (z - a).norm().ln();
        }
        s
    }

    pub fn mass_in(&self, r: f64) -> usize {
        self.zeros.iter().filter(|a| a.norm() < r).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub boundary_angles: usize,
    pub polar_angles: usize,
    pub polar_radii: usize,
    /// Slack added to the sampled boundary maximum M.
    pub slack: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            boundary_angles: 8192,
            polar_angles: 512,
            polar_radii: 256,
            slack: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RieszBoundsReport {
    pub big_m: f64,
    pub m: f64,
    pub rho: f64,
    pub r: f64,
    pub r1: f64,
    pub mass_measured: f64,
    pub mass_bound: f64,
    pub deviation_measured: f64,
    pub deviation_bound: f64,
    pub c_measured: f64,
    pub c_bound: f64,
}

impl RieszBoundsReport {
    pub fn mass_ok(&self) -> bool {
        self.mass_measured <= self.mass_bound
    }
    pub fn deviation_ok(&self) -> bool {
        self.deviation_measured <= self.deviation_bound
    }
    pub fn c_ok(&self) -> bool {
        self.c_measured >= self.c_bound
    }
    pub fn all_ok(&self) -> bool {
        self.mass_ok() && self.deviation_ok() && self.c_ok()
    }
}

fn max_on_circle<F: Fn(Complex64) -> f64>(f: F, radius: f64, n: usize) -> f64 {
    (0..n)
        .map(|j| f(Complex64::from_polar(radius, 2.0 * PI * j as f64 / n as f64)))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// M bounds v on the closed disk (boundary maximum plus slack) and m is
/// the maximum of v over ρ𝔻 from a polar grid.
pub fn riesz_inputs(f: &ZeroSetFunction, rho: f64, cfg: &SamplingConfig) -> (f64, f64) {
    let big_m = max_on_circle(|z| f.log_abs(z), 1.0, cfg.boundary_angles) + cfg.slack;
    let mut m = f64::NEG_INFINITY;
    for i in 1..=cfg.polar_radii {
        let rad = rho * i as f64 / cfg.polar_radii as f64;
        m = m.max(max_on_circle(|z| f.log_abs(z), rad, cfg.polar_angles));
    }
    m = m.max(f.log_abs(Complex64::new(0.0, 0.0)));
    (big_m, m)
}

/// Checks the Riesz mass bound, the harmonic-part deviation bound and the
/// lower bound on the optimal constant for v = log|F|.
pub fn verify_riesz_bounds(
    f: &ZeroSetFunction,
    rho: f64,
    r: f64,
    r1: f64,
    cfg: &SamplingConfig,
) -> Result<RieszBoundsReport> {
    if f.scale.norm() == 0.0 {
        return invalid("F vanishes identically");
    }
    if !(0.0 < rho && rho < r1 && r1 < r && r < 1.0) {
        return invalid("need 0 < rho < r1 < r < 1");
    }
    let (big_m, m) = riesz_inputs(f, rho, cfg);
    let mass = f.mass_in(r) as f64;
    let lg = ((1.0 + rho * r) / (rho + r)).ln();
    let mass_bound = (big_m - m) / lg;
    let eps = 0.5 * (big_m - m) * (r + r1) / (r - r1) * ((1.0 + rho * r) / (1.0 - r * r)).ln() / lg;
    // h = v − Σ_{|a|<r} log|w − a| is harmonic on r𝔻; its extremes over
    // r₁𝔻 sit on the circle |w| = r₁.
    let inner: Vec<Complex64> = f.zeros.iter().copied().filter(|a| a.norm() < r).collect();
    let harmonic = |w: Complex64| f.log_abs(w) - inner.iter().map(|a| (w - a).norm().ln()).sum::<f64>();
    let n = cfg.boundary_angles;
    let mut hmax = f64::NEG_INFINITY;
    let mut hmin = f64::INFINITY;
    for j in 0..n {
        let w = Complex64::from_polar(r1, 2.0 * PI * j as f64 / n as f64);
        let v = harmonic(w);
        hmax = hmax.max(v);
        hmin = hmin.min(v);
    }
    let deviation = 0.5 * (hmax - hmin);
    let c = 0.5 * (hmax + hmin);
    let c_bound = m - eps - (r + rho).ln() * mass;
    Ok(RieszBoundsReport {
        big_m,
        m,
        rho,
        r,
        r1,
        mass_measured: mass,
        mass_bound,
        deviation_measured: deviation,
        deviation_bound: eps,
        c_measured: c,
        c_bound,
    })
}

/// 2δ⁻³ log(2/δ) + δ⁻² log(2e/H).
pub fn cartan_l(delta: f64, h: f64) -> f64 {
    2.0 * delta.powi(-3) * (2.0 / delta).ln() + delta.powi(-2) * (2.0 * E / h).ln()
}

/// Lower bound m − (M−m)·L(δ, H) valid on r₁𝔻 = (1−2δ)𝔻 outside the Cartan
/// cover of the Riesz measure.
pub fn one_variable_lower_bound(big_m: f64, m: f64, delta: f64, h: f64) -> f64 {
    m - (big_m - m) * cartan_l(delta, h)
}

/// Cartan cover of the zeros of F inside r𝔻 (the Riesz measure of log|F|
/// restricted to r𝔻).
pub fn riesz_cartan_cover(f: &ZeroSetFunction, r: f64, h: f64) -> Result<DiskCover> {
    let pts: Vec<Complex64> = f.zeros.iter().copied().filter(|a| a.norm() < r).collect();
    cartan_disks(&PointMasses::unit(pts), h)
}

/// F(z₁, z₂) = Σ c_{ij} z₁^i z₂^j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly2 {
    pub coeffs: Vec<Vec<Complex64>>,
}

impl Poly2 {
    pub fn constant(c: Complex64) -> Self {
        Self {
            coeffs: vec![vec![c]],
        }
    }

    /// (z₁ − a)(z₂ − b).
    pub fn linear_product(a: Complex64, b: Complex64) -> Self {
        let one = Complex64::new(1.0, 0.0);
        Self {
            coeffs: vec![vec![a * b, -a], vec![-b, one]],
        }
    }

    pub fn mul(&self, other: &Poly2) -> Poly2 {
        let n1 = self.coeffs.len() + other.coeffs.len() - 1;
        let d1 = self.coeffs.iter().map(Vec::len).max().unwrap_or(1);
        let d2 = other.coeffs.iter().map(Vec::len).max().unwrap_or(1);
        let mut out = vec![vec![Complex64::new(0.0, 0.0); d1 + d2 - 1]; n1];
        for (i, row) in self.coeffs.iter().enumerate() {
            for (j, a) in row.iter().enumerate() {
                for (k, orow) in other.coeffs.iter().enumerate() {
                    for (l, b) in orow.iter().enumerate() {
                        out[i + k][j + l] += a * b;
                    }
                }
            }
        }
        Poly2 { coeffs: out }
    }

    pub fn eval(&self, z1: Complex64, z2: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for row in self.coeffs.iter().rev() {
            let inner = row.iter().rev().fold(Complex64::new(0.0, 0.0), |s, c| s * z2 + c);
            acc = acc * z1 + inner;
        }
        acc
    }

    pub fn log_abs(&self, z1: Complex64, z2: Complex64) -> f64 {
        self.eval(z1, z2).norm().ln()
    }

    /// Coefficients of z₂ ↦ F(z₁, z₂), lowest degree first.
    pub fn slice(&self, z1: Complex64) -> Vec<Complex64> {
        let deg = self.coeffs.iter().map(Vec::len).max().unwrap_or(0);
        let mut out = vec![Complex64::new(0.0, 0.0); deg];
        let mut p = Complex64::new(1.0, 0.0);
        for row in &self.coeffs {
            for (j, c) in row.iter().enumerate() {
                out[j] += c * p;
            }
            p *= z1;
        }
        out
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().enumerate().all(|(j, c)| (i == 0 && j == 0) || c.norm() == 0.0))
    }
}

/// Roots of Σ c_j z^j (lowest degree first) as eigenvalues of the
/// companion matrix. Trailing zero coefficients are dropped.
pub fn poly_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut deg = coeffs.len();
    while deg > 0 && coeffs[deg - 1].norm() <= 1e-14 * scale {
        deg -= 1;
    }
    if deg <= 1 {
        return Vec::new();
    }
    let n = deg - 1;
    let lead = coeffs[n];
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..n {
        m[(i, n - 1)] = -coeffs[i] / lead;
    }
    m.schur().eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_default()
}

/// Recursive Cartan set: a cover in the first variable plus, for sampled
/// good values of the first variable, a Cartan set in the rest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CartanSet {
    pub dimension: usize,
    pub h: f64,
    pub first: DiskCover,
    pub slices: Vec<CartanSlice>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CartanSlice {
    pub z1: Complex64,
    pub inner: CartanSet,
}

impl CartanSet {
    pub fn empty(dimension: usize, h: f64) -> Self {
        Self {
            dimension,
            h,
            first: DiskCover::empty(h),
            slices: Vec::new(),
        }
    }

    /// Membership of a point whose first coordinate is a sampled slice (or
    /// in the first-level cover).
    pub fn contains(&self, z: &[Complex64]) -> Option<bool> {
        if self.first.contains(z[0]) {
            return Some(true);
        }
        if self.dimension == 1 {
            return Some(false);
        }
        let s = self.slices.iter().find(|s| s.z1 == z[0])?;
        s.inner.contains(&z[1..])
    }

    /// Every level's radii sum stays within 5H.
    pub fn budget_ok(&self) -> bool {
        self.first.radius_sum() <= 5.0 * self.h * (1.0 + 1e-12)
            && self.slices.iter().all(|s| s.inner.budget_ok())
    }
}

/// Lebesgue measure of B ∩ ℝ² inside [−1, 1]², by Fubini over the real
/// slices. Real first coordinates in the first-level cover contribute the
/// full width 2; elsewhere the slice traces are integrated with the
/// midpoint weights of the sampled real slices.
pub fn trace_measure(set: &CartanSet) -> Result<f64> {
    if set.dimension != 2 {
        return invalid("trace measure is implemented for d = 2");
    }
    let first = set.first.real_trace_measure(-1.0, 1.0);
    let mut xs: Vec<(f64, &CartanSet)> = set
        .slices
        .iter()
        .filter(|s| s.z1.im == 0.0 && s.z1.re.abs() <= 1.0)
        .map(|s| (s.z1.re, &s.inner))
        .collect();
    xs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut second = 0.0;
    for (i, (x, inner)) in xs.iter().enumerate() {
        if set.first.contains(Complex64::new(*x, 0.0)) {
            continue;
        }
        let left = if i == 0 { -1.0 } else { 0.5 * (xs[i - 1].0 + x) };
        let right = if i + 1 == xs.len() { 1.0 } else { 0.5 * (xs[i + 1].0 + x) };
        second += (right - left) * inner.first.real_trace_measure(-1.0, 1.0);
    }
    Ok(2.0 * first + second)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cartan2Config {
    /// Grid nodes per axis for the Riesz measure of ṽ on [−r, r]².
    pub grid: usize,
    /// Angles used for maxima over circles.
    pub angles: usize,
    pub slack: f64,
}

impl Default for Cartan2Config {
    fn default() -> Self {
        Self {
            grid: 64,
            angles: 256,
            slack: 1e-3,
        }
    }
}

/// Output of [`build_cartan2`]: the set with the quantities of its bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cartan2Build {
    pub set: CartanSet,
    pub big_m: f64,
    pub m: f64,
    pub delta: f64,
    pub r1: f64,
    /// m − (M − m)(L + 1)².
    pub lower_bound: f64,
}

/// Builds a Cartan-2 set with parameter rH for v = log|F|. The first level
/// covers the discrete Riesz measure of ṽ(z₁) = max_{|z₂|=ρ} v(z₁, z₂)
/// (maximum principle) obtained from the five-point Laplacian on a grid
/// over [−r, r]²; the second level at each sampled z₁ covers the zeros of
/// F(z₁, ·) inside r𝔻.
pub fn build_cartan2(
    f: &Poly2,
    h: f64,
    rho: f64,
    r: f64,
    z1_samples: &[Complex64],
    cfg: &Cartan2Config,
) -> Result<Cartan2Build> {
    if !(0.0 < rho && rho < r && r <= 1.0) {
        return invalid("need 0 < rho < r <= 1");
    }
    if !(h > 0.0 && h <= 1.0) {
        return invalid("need 0 < H <= 1");
    }
    let delta = (1.0 - rho / r) / 3.0;
    let r1 = r * (1.0 - 2.0 * delta);
    let hr = r * h;
    if f.coeffs.iter().flatten().all(|c| c.norm() == 0.0) {
        return invalid("F vanishes identically");
    }
    let na = cfg.angles;
    let circle = |rad: f64| -> Vec<Complex64> {
        (0..na)
            .map(|j| Complex64::from_polar(rad, 2.0 * PI * j as f64 / na as f64))
            .collect()
    };
    let (cr, cp) = (circle(r), circle(rho));
    let mut big_m = f64::NEG_INFINITY;
    let mut m = f64::NEG_INFINITY;
    for a in &cr {
        for b in &cr {
            big_m = big_m.max(f.log_abs(*a, *b));
        }
    }
    for a in &cp {
        for b in &cp {
            m = m.max(f.log_abs(*a, *b));
        }
    }
    big_m += cfg.slack;
    if f.is_constant() {
        return Ok(Cartan2Build {
            set: CartanSet::empty(2, hr),
            big_m,
            m,
            delta,
            r1,
            lower_bound: m,
        });
    }
    if !(big_m > m) {
        return Err(Error::Contract("degenerate bounds: M = m".into()));
    }
    let l = cartan_l(delta, h);
    let lower_bound = m - (big_m - m) * (l + 1.0).powi(2);

    // Discrete Riesz measure of ṽ.
    let n = cfg.grid.max(8);
    let g = 2.0 * r / (n - 1) as f64;
    let node = |i: usize, j: usize| Complex64::new(-r + g * i as f64, -r + g * j as f64);
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let z1 = node(i, j);
            vt[i * n + j] = cp.iter().map(|b| f.log_abs(z1, *b)).fold(f64::NEG_INFINITY, f64::max);
        }
    }
    let floor = vt.iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min) - 5.0;
    for v in vt.iter_mut() {
        if !v.is_finite() {
            *v = floor;
        }
    }
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let z = node(i, j);
            if z.norm() >= r {
                continue;
            }
            let lap = vt[(i + 1) * n + j] + vt[(i - 1) * n + j] + vt[i * n + j + 1]
                + vt[i * n + j - 1]
                - 4.0 * vt[i * n + j];
            let w = lap / (2.0 * PI);
            if w > 1e-9 {
                pts.push(z);
                wts.push(w);
            }
        }
    }
    let first = cartan_disks(&PointMasses::new(pts, wts)?, hr)?;
    let mut slices = Vec::new();
    for &z1 in z1_samples {
        if first.contains(z1) {
            continue;
        }
        let roots: Vec<Complex64> = poly_roots(&f.slice(z1))
            .into_iter()
            .filter(|a| a.norm() < r)
            .collect();
        let inner_cover = cartan_disks(&PointMasses::unit(roots), hr)?;
        slices.push(CartanSlice {
            z1,
            inner: CartanSet {
                dimension: 1,
                h: hr,
                first: inner_cover,
                slices: Vec::new(),
            },
        });
    }
    Ok(Cartan2Build {
        set: CartanSet {
            dimension: 2,
            h: hr,
            first,
            slices,
        },
        big_m,
        m,
        delta,
        r1,
        lower_bound,
    })
}

/// `n` unit masses drawn uniformly from the unit disk.
pub fn random_point_masses(seed: u64, n: usize) -> PointMasses {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointMasses::unit((0..n).map(|_| random_in_disk(&mut rng, 1.0)).collect())
}

pub(crate) fn random_in_disk<R: Rng>(rng: &mut R, radius: f64) -> Complex64 {
    let rad = radius * rng.gen::<f64>().sqrt();
    Complex64::from_polar(rad, 2.0 * PI * rng.gen::<f64>())
}

/// Probes of an `n × n` grid over [−1, 1]² lying outside the cover, and the
/// number of them violating log_potential ≥ μ_total·log(H/e).
pub fn cartan_grid_violations(masses: &PointMasses, cover: &DiskCover, n: usize) -> (usize, usize) {
    let bound = masses.total() * (cover.budget / E).ln();
    let mut probes = 0;
    let mut bad = 0;
    for i in 0..n {
        for j in 0..n {
            let z = Complex64::new(
                -1.0 + 2.0 * (i as f64 + 0.5) / n as f64,
                -1.0 + 2.0 * (j as f64 + 0.5) / n as f64,
            );
            if cover.contains(z) {
                continue;
            }
            probes += 1;
            if !(log_potential(z, masses) >= bound) {
                bad += 1;
            }
        }
    }
    (probes, bad)
}

/// A Cartan-2 set from random data: the first level covers `n` random unit
/// masses, and each of `slices` equispaced real first coordinates outside it
/// carries the cover of `n` fresh random masses.
pub fn random_cartan2(seed: u64, h: f64, n: usize, slices: usize) -> Result<CartanSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| PointMasses::unit((0..n).map(|_| random_in_disk(rng, 1.0)).collect());
    let first = cartan_disks(&draw(&mut rng), h)?;
    let mut out = Vec::new();
    for i in 0..slices {
        let z1 = Complex64::new(-1.0 + 2.0 * (i as f64 + 0.5) / slices as f64, 0.0);
        let masses = draw(&mut rng);
        if first.contains(z1) {
            continue;
        }
        out.push(CartanSlice {
            z1,
            inner: CartanSet {
                dimension: 1,
                h,
                first: cartan_disks(&masses, h)?,
                slices: Vec::new(),
            },
        });
    }
    Ok(CartanSet {
        dimension: 2,
        h,
        first,
        slices: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_of_single_mass() {
        let m = PointMasses::unit(vec![Complex64::new(0.0, 0.0)]);
        assert!((log_potential(Complex64::new(E, 0.0), &m) - 1.0).abs() < 1e-15);
        assert_eq!(log_potential(Complex64::new(0.0, 0.0), &m), f64::NEG_INFINITY);
    }

    #[test]
    fn single_mass_cover() {
        let m = PointMasses::unit(vec![Complex64::new(0.0, 0.0)]);
        let c = cartan_disks(&m, 0.1).unwrap();
        assert_eq!(c.disks.len(), 1);
        assert!(c.disks[0].radius <= 0.5);
        assert!(c.radius_sum() <= 0.5);
    }

    #[test]
    fn roots_of_cubic() {
        let one = Complex64::new(1.0, 0.0);
        let r = poly_roots(&[-0.5 * one, 0.0 * one, 0.0 * one, one]);
        assert_eq!(r.len(), 3);
        for z in r {
            assert!((z * z * z - 0.5).norm() < 1e-12);
        }
    }

    #[test]
    fn trace_of_disk() {
        let c = DiskCover {
            disks: vec![Disk {
                center: Complex64::new(0.0, 0.0),
                radius: 0.1,
            }],
            budget: 0.02,
        };
        assert!((c.real_trace_measure(-1.0, 1.0) - 0.2).abs() < 1e-15);
    }
}
