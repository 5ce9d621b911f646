//! Cantor-type grid sets, δ-regularity and porosity checks, and the set
//! operations used to move between scales (scaling, thickening, empty
//! subcubes).
//!
//! A [`GridSet`] is a finite union of closed axis-aligned cubes of side `h`,
//! addressed by integer indices relative to an origin: index `a` stands for
//! the cube `origin + h·[a, a+1]` (per axis). Only d ∈ {1, 2} is supported.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default cap on the number of cubes [`build_cantor`] will enumerate.
pub const DEFAULT_CUBE_LIMIT: usize = 1 << 22;

/// Cap on the number of raster cells used by the measure sweeps.
const RASTER_LIMIT: usize = 1 << 25;

/// Relative tolerance used when snapping coordinates onto the grid.
const SNAP: f64 = 1e-9;

/// Self-similar Cantor construction: base M, one alphabet per axis (all
/// axes share the base), depth k, and an extent interval per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CantorSpec {
    pub base: u32,
    pub alphabets: Vec<Vec<u32>>,
    pub depth: u32,
    pub extent: Vec<[f64; 2]>,
}

impl CantorSpec {
    pub fn new_1d(base: u32, alphabet: &[u32], depth: u32, extent: [f64; 2]) -> Self {
        Self {
            base,
            alphabets: vec![alphabet.to_vec()],
            depth,
            extent: vec![extent],
        }
    }

    /// Product set with the same alphabet on both axes.
    pub fn product_2d(base: u32, alphabet: &[u32], depth: u32, extent: [f64; 2]) -> Self {
        Self {
            base,
            alphabets: vec![alphabet.to_vec(), alphabet.to_vec()],
            depth,
            extent: vec![extent, extent],
        }
    }

    /// The mid-third Cantor iterate on [0, 1].
    pub fn middle_third(depth: u32) -> Self {
        Self::new_1d(3, &[0, 2], depth, [0.0, 1.0])
    }

    pub fn dimension(&self) -> usize {
        self.alphabets.len()
    }

    /// Σ log|A_i| / log M, the exponent achieved by the natural measure.
    pub fn delta(&self) -> f64 {
        let lm = (self.base as f64).ln();
        self.alphabets.iter().map(|a| (a.len() as f64).ln() / lm).sum()
    }

    /// Number of cubes at the given depth.
    pub fn cube_count(&self) -> f64 {
        self.alphabets
            .iter()
            .map(|a| (a.len() as f64).powi(self.depth as i32))
            .product()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension();
        if !(1..=2).contains(&d) {
            return invalid(format!("dimension must be 1 or 2, got {d}"));
        }
        if self.extent.len() != d {
            return invalid("one extent interval per axis is required");
        }
        if self.base < 2 {
            return invalid(format!("base must be at least 2, got {}", self.base));
        }
        for a in &self.alphabets {
            if a.is_empty() {
                return invalid("alphabet must be nonempty");
            }
            if a.iter().any(|&x| x >= self.base) {
                return invalid("alphabet digits must lie in 0..base");
            }
            let uniq: BTreeSet<_> = a.iter().collect();
            if uniq.len() != a.len() {
                return invalid("alphabet digits must be distinct");
            }
        }
        let w0 = self.extent[0][1] - self.extent[0][0];
        for e in &self.extent {
            let w = e[1] - e[0];
            if !(w > 0.0) || !w.is_finite() {
                return invalid("extent intervals must have positive finite width");
            }
            if ((w - w0) / w0).abs() > 1e-12 {
                return invalid("extent intervals must have equal widths (cubes are equilateral)");
            }
        }
        Ok(())
    }
}

/// A finite union of closed grid cubes, stored canonically (sorted,
/// duplicate-free).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGridSet")]
pub struct GridSet {
    dimension: usize,
    resolution: f64,
    origin: Vec<f64>,
    extent: Vec<[f64; 2]>,
    cubes: Vec<Vec<i64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGridSet {
    dimension: usize,
    resolution: f64,
    origin: Vec<f64>,
    extent: Vec<[f64; 2]>,
    cubes: Vec<Vec<i64>>,
}

impl TryFrom<RawGridSet> for GridSet {
    type Error = Error;
    fn try_from(r: RawGridSet) -> Result<Self> {
        GridSet::new(r.dimension, r.resolution, r.origin, r.extent, r.cubes)
    }
}

impl GridSet {
    /// Builds a set, sorting and deduplicating the cube list and checking
    /// that every cube lies in the bounding box.
    pub fn new(
        dimension: usize,
        resolution: f64,
        origin: Vec<f64>,
        extent: Vec<[f64; 2]>,
        cubes: Vec<Vec<i64>>,
    ) -> Result<Self> {
        if !(1..=2).contains(&dimension) {
            return invalid(format!("dimension must be 1 or 2, got {dimension}"));
        }
        if !(resolution > 0.0) || !resolution.is_finite() {
            return invalid(format!("resolution must be positive, got {resolution}"));
        }
        if origin.len() != dimension || extent.len() != dimension {
            return invalid("origin and extent must have one entry per axis");
        }
        let mut cubes = cubes;
        cubes.sort();
        cubes.dedup();
        for c in &cubes {
            if c.len() != dimension {
                return invalid("cube index has wrong dimension");
            }
            for ax in 0..dimension {
                let lo = origin[ax] + resolution * c[ax] as f64;
                let hi = lo + resolution;
                let tol = SNAP * resolution;
                if lo < extent[ax][0] - tol || hi > extent[ax][1] + tol {
                    return invalid(format!("cube {c:?} lies outside the bounding box"));
                }
            }
        }
        Ok(Self {
            dimension,
            resolution,
            origin,
            extent,
            cubes,
        })
    }

    /// The whole extent box tiled by cubes of side `h` (the extent widths
    /// must be multiples of `h`).
    pub fn full(extent: Vec<[f64; 2]>, h: f64) -> Result<Self> {
        let d = extent.len();
        let mut counts = Vec::with_capacity(d);
        for e in &extent {
            let n = (e[1] - e[0]) / h;
            let nr = n.round();
            if (n - nr).abs() > SNAP * n.max(1.0) || nr < 1.0 {
                return invalid("extent width must be a positive multiple of the resolution");
            }
            counts.push(nr as i64);
        }
        let origin: Vec<f64> = extent.iter().map(|e| e[0]).collect();
        let cubes = match d {
            1 => (0..counts[0]).map(|i| vec![i]).collect(),
            2 => (0..counts[0])
                .flat_map(|i| (0..counts[1]).map(move |j| vec![i, j]))
                .collect(),
            _ => return invalid(format!("dimension must be 1 or 2, got {d}")),
        };
        Self::new(d, h, origin, extent, cubes)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
    pub fn resolution(&self) -> f64 {
        self.resolution
    }
    pub fn origin(&self) -> &[f64] {
        &self.origin
    }
    pub fn extent(&self) -> &[[f64; 2]] {
        &self.extent
    }
    pub fn cubes(&self) -> &[Vec<i64>] {
        &self.cubes
    }
    pub fn len(&self) -> usize {
        self.cubes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// Lebesgue measure of the set.
    pub fn volume(&self) -> f64 {
        self.cubes.len() as f64 * self.resolution.powi(self.dimension as i32)
    }

    /// Lower corner of a cube.
    pub fn cube_corner(&self, idx: &[i64]) -> Vec<f64> {
        idx.iter()
            .zip(&self.origin)
            .map(|(&a, o)| o + self.resolution * a as f64)
            .collect()
    }

    pub fn cube_center(&self, idx: &[i64]) -> Vec<f64> {
        self.cube_corner(idx)
            .into_iter()
            .map(|c| c + 0.5 * self.resolution)
            .collect()
    }

    pub fn contains_index(&self, idx: &[i64]) -> bool {
        self.cubes
            .binary_search_by(|c| c.as_slice().cmp(idx))
            .is_ok()
    }

    /// Membership of a point in the closed union of cubes.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        let h = self.resolution;
        let mut cands: Vec<Vec<i64>> = vec![Vec::new()];
        for ax in 0..self.dimension {
            let u = (x[ax] - self.origin[ax]) / h;
            let f = u.floor();
            let mut opts = vec![f as i64];
            if u - f < SNAP {
                opts.push(f as i64 - 1);
            }
            cands = cands
                .into_iter()
                .flat_map(|c| {
                    opts.iter().map(move |&o| {
                        let mut c = c.clone();
                        c.push(o);
                        c
                    })
                })
                .collect();
        }
        cands.iter().any(|c| self.contains_index(c))
    }

    /// Same cubes, origin and resolution up to a relative tolerance.
    pub fn same_set(&self, other: &GridSet, tol: f64) -> bool {
        let scale = self.resolution.max(other.resolution);
        self.dimension == other.dimension
            && (self.resolution - other.resolution).abs() <= tol * scale
            && self
                .origin
                .iter()
                .zip(&other.origin)
                .all(|(a, b)| (a - b).abs() <= tol * scale)
            && self.cubes == other.cubes
    }

    fn index_box(&self) -> Option<(Vec<i64>, Vec<i64>)> {
        let first = self.cubes.first()?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for c in &self.cubes {
            for ax in 0..self.dimension {
                lo[ax] = lo[ax].min(c[ax]);
                hi[ax] = hi[ax].max(c[ax]);
            }
        }
        Some((lo, hi))
    }
}

/// Depth-k Cantor iterate with the default cube limit.
pub fn build_cantor(spec: &CantorSpec) -> Result<GridSet> {
    build_cantor_with_limit(spec, DEFAULT_CUBE_LIMIT)
}

pub fn build_cantor_with_limit(spec: &CantorSpec, limit: usize) -> Result<GridSet> {
    spec.validate()?;
    let count = spec.cube_count();
    if count > limit as f64 {
        return Err(Error::TooLarge(format!(
            "{count} cubes exceed the limit of {limit}"
        )));
    }
    let m = spec.base as i64;
    let nk = (spec.base as f64).powi(spec.depth as i32);
    if nk > 1e15 {
        return Err(Error::TooLarge("grid index overflow".into()));
    }
    let width = spec.extent[0][1] - spec.extent[0][0];
    let h = width / nk;
    let per_axis: Vec<Vec<i64>> = spec
        .alphabets
        .iter()
        .map(|alpha| {
            let mut idx = vec![0i64];
            for _ in 0..spec.depth {
                idx = idx
                    .iter()
                    .flat_map(|&p| alpha.iter().map(move |&a| p * m + a as i64))
                    .collect();
            }
            idx
        })
        .collect();
    let cubes: Vec<Vec<i64>> = match per_axis.len() {
        1 => per_axis[0].iter().map(|&i| vec![i]).collect(),
        _ => per_axis[0]
            .iter()
            .flat_map(|&i| per_axis[1].iter().map(move |&j| vec![i, j]))
            .collect(),
    };
    let origin = spec.extent.iter().map(|e| e[0]).collect();
    GridSet::new(spec.dimension(), h, origin, spec.extent.clone(), cubes)
}

/// A finite measure with uniform density on each of a list of grid cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure {
    pub dimension: usize,
    pub resolution: f64,
    pub origin: Vec<f64>,
    pub cells: Vec<Vec<i64>>,
    pub masses: Vec<f64>,
}

impl GridMeasure {
    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Mass of the closed box `[lo, hi]`, cells counted by overlap fraction.
    pub fn mass_of_box(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let h = self.resolution;
        let mut total = 0.0;
        for (c, &m) in self.cells.iter().zip(&self.masses) {
            let mut frac = 1.0;
            for ax in 0..self.dimension {
                let a = self.origin[ax] + h * c[ax] as f64;
                let ov = (hi[ax].min(a + h) - lo[ax].max(a)).max(0.0) / h;
                frac *= ov.min(1.0);
            }
            total += frac * m;
        }
        total
    }

    /// Push-forward under x ↦ y + λx, with masses multiplied by λ^δ so that
    /// the regularity constants carry over.
    pub fn scale_shift(&self, lambda: f64, y: &[f64], delta: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return invalid(format!("lambda must be positive, got {lambda}"));
        }
        let f = lambda.powf(delta);
        Ok(Self {
            dimension: self.dimension,
            resolution: self.resolution * lambda,
            origin: self.origin.iter().zip(y).map(|(o, y)| y + lambda * o).collect(),
            cells: self.cells.clone(),
            masses: self.masses.iter().map(|m| m * f).collect(),
        })
    }
}

/// The self-similar measure: mass |A|^{-k} per depth-k cube (product over
/// axes in d = 2), supported on the Cantor iterate.
pub fn natural_measure(spec: &CantorSpec) -> Result<GridMeasure> {
    let set = build_cantor(spec)?;
    let each = 1.0 / set.len() as f64;
    Ok(GridMeasure {
        dimension: set.dimension,
        resolution: set.resolution,
        origin: set.origin.clone(),
        masses: vec![each; set.len()],
        cells: set.cubes,
    })
}

/// Uniform measure of total mass 1 on an arbitrary grid set.
pub fn uniform_measure(set: &GridSet) -> Result<GridMeasure> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let each = 1.0 / set.len() as f64;
    Ok(GridMeasure {
        dimension: set.dimension,
        resolution: set.resolution,
        origin: set.origin.clone(),
        masses: vec![each; set.len()],
        cells: set.cubes.clone(),
    })
}

/// Cumulative tables over an index box, evaluated at fractional grid
/// coordinates by bilinear interpolation. Exact for per-cell uniform
/// densities.
struct Raster {
    d: usize,
    lo: Vec<i64>,
    n: [usize; 2],
    origin: Vec<f64>,
    h: f64,
    prefix: Vec<f64>,
}

impl Raster {
    fn new(
        d: usize,
        h: f64,
        origin: &[f64],
        lo: Vec<i64>,
        hi: Vec<i64>,
        cells: impl Iterator<Item = (Vec<i64>, f64)>,
    ) -> Result<Self> {
        let mut n = [1usize; 2];
        for ax in 0..d {
            n[ax] = (hi[ax] - lo[ax] + 1) as usize;
        }
        let total = (n[0] + 1) * (n[1] + 1);
        if total > RASTER_LIMIT {
            return Err(Error::TooLarge(format!("raster of {total} cells")));
        }
        let w = n[1] + 1;
        let mut prefix = vec![0.0; total];
        for (c, m) in cells {
            let i = (c[0] - lo[0]) as usize;
            let j = if d == 2 { (c[1] - lo[1]) as usize } else { 0 };
            prefix[(i + 1) * w + j + 1] += m;
        }
        for i in 1..=n[0] {
            for j in 1..=n[1] {
                let v = prefix[i * w + j] + prefix[(i - 1) * w + j] + prefix[i * w + j - 1]
                    - prefix[(i - 1) * w + j - 1];
                prefix[i * w + j] = v;
            }
        }
        Ok(Self {
            d,
            lo,
            n,
            origin: origin.to_vec(),
            h,
            prefix,
        })
    }

    fn coord(&self, ax: usize, x: f64) -> f64 {
        let u = (x - self.origin[ax]) / self.h - self.lo[ax] as f64;
        u.clamp(0.0, self.n[ax] as f64)
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.prefix[i * (self.n[1] + 1) + j]
    }

    fn cumulative(&self, u: f64, v: f64) -> f64 {
        let i0 = (u.floor() as usize).min(self.n[0].saturating_sub(1));
        let j0 = (v.floor() as usize).min(self.n[1].saturating_sub(1));
        let (fu, fv) = (u - i0 as f64, v - j0 as f64);
        let a = self.at(i0, j0);
        let b = self.at(i0 + 1, j0);
        let c = self.at(i0, j0 + 1);
        let e = self.at(i0 + 1, j0 + 1);
        a * (1.0 - fu) * (1.0 - fv) + b * fu * (1.0 - fv) + c * (1.0 - fu) * fv + e * fu * fv
    }

    /// Mass (or count) in the box [lo, hi].
    fn mass(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let u0 = self.coord(0, lo[0]);
        let u1 = self.coord(0, hi[0]);
        if self.d == 1 {
            return (self.cumulative(u1, 1.0) - self.cumulative(u0, 1.0)).max(0.0);
        }
        let v0 = self.coord(1, lo[1]);
        let v1 = self.coord(1, hi[1]);
        (self.cumulative(u1, v1) - self.cumulative(u0, v1) - self.cumulative(u1, v0)
            + self.cumulative(u0, v0))
        .max(0.0)
    }
}

/// Occupancy counts for emptiness queries on open boxes.
struct Occupancy {
    raster: Raster,
}

impl Occupancy {
    fn new(set: &GridSet) -> Result<Option<Self>> {
        let Some((lo, hi)) = set.index_box() else {
            return Ok(None);
        };
        let raster = Raster::new(
            set.dimension,
            set.resolution,
            &set.origin,
            lo,
            hi,
            set.cubes.iter().map(|c| (c.clone(), 1.0)),
        )?;
        Ok(Some(Self { raster }))
    }

    /// Whether any cube meets the interior of the box [lo, hi].
    fn meets_interior(&self, lo: &[f64], hi: &[f64]) -> bool {
        let r = &self.raster;
        let mut clo = [0.0; 2];
        let mut chi = [1.0; 2];
        for ax in 0..r.d {
            // Whole cells touched by the open box.
            let a = (r.coord(ax, lo[ax]) + SNAP).floor();
            let b = (r.coord(ax, hi[ax]) - SNAP).ceil();
            if b <= a {
                return false;
            }
            clo[ax] = a;
            chi[ax] = b;
        }
        let c = if r.d == 1 {
            r.cumulative(chi[0], 1.0) - r.cumulative(clo[0], 1.0)
        } else {
            r.cumulative(chi[0], chi[1]) - r.cumulative(clo[0], chi[1])
                - r.cumulative(chi[0], clo[1])
                + r.cumulative(clo[0], clo[1])
        };
        c > 0.5
    }
}

/// Scale window and budget for [`check_regularity`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityQuery {
    pub delta: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub sample_budget: usize,
    /// Constant at which `pass` is decided.
    pub c_r: f64,
}

impl RegularityQuery {
    pub fn new(delta: f64, alpha0: f64, alpha1: f64, c_r: f64) -> Self {
        Self {
            delta,
            alpha0,
            alpha1,
            sample_budget: 1_000_000,
            c_r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub delta: f64,
    /// Smallest C with μ(I) ≤ C r^δ on every tested cube.
    pub constant_upper: f64,
    /// Smallest C with μ(I) ≥ C^{-1} r^δ on every tested centered cube.
    pub constant_lower: f64,
    pub scales_tested: (f64, f64),
    pub side_lengths: Vec<f64>,
    pub cubes_tested: usize,
    pub stride: usize,
    pub resolution: f64,
    pub requested_c_r: f64,
    pub pass: bool,
}

impl RegularityReport {
    pub fn constant(&self) -> f64 {
        self.constant_upper.max(self.constant_lower)
    }
}

fn side_lengths(alpha0: f64, alpha1: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = alpha1;
    while r >= alpha0 * (1.0 - 1e-12) {
        out.push(r);
        r *= 0.5;
    }
    if out.last().is_none_or(|&l| l > alpha0 * (1.0 + 1e-12)) {
        out.push(alpha0);
    }
    out
}

/// Sweeps grid-aligned cubes of dyadic side lengths between α₀ and α₁ for
/// the upper bound, and cubes centered at every set cube for the lower
/// bound. Beyond the sample budget positions are taken with a fixed stride.
pub fn check_regularity(
    set: &GridSet,
    measure: &GridMeasure,
    query: &RegularityQuery,
) -> Result<RegularityReport> {
    if set.is_empty() || measure.cells.is_empty() {
        return Err(Error::EmptySet);
    }
    let d = set.dimension;
    let h = set.resolution;
    let RegularityQuery {
        delta,
        alpha0,
        alpha1,
        sample_budget,
        c_r,
    } = *query;
    if !(delta > 0.0 && delta <= d as f64) {
        return invalid(format!("delta must lie in (0, {d}], got {delta}"));
    }
    let width = set
        .extent
        .iter()
        .map(|e| e[1] - e[0])
        .fold(0.0, f64::max);
    let tol = 1e-9;
    if !(alpha0 <= alpha1) || alpha0 < h * (1.0 - tol) || alpha1 > width * (1.0 + tol) {
        return invalid(format!(
            "scales must satisfy h <= alpha0 <= alpha1 <= extent (h = {h}, extent = {width})"
        ));
    }
    if measure.dimension != d
        || ((measure.resolution - h) / h).abs() > SNAP
        || measure
            .origin
            .iter()
            .zip(&set.origin)
            .any(|(a, b)| (a - b).abs() > SNAP * h)
    {
        return invalid("measure must live on the grid of the set");
    }
    if let Some(c) = measure.cells.iter().find(|c| !set.contains_index(c)) {
        return invalid(format!("measure charges cell {c:?} outside the set"));
    }
    let (mut lo, mut hi) = set.index_box().expect("nonempty");
    for c in &measure.cells {
        for ax in 0..d {
            lo[ax] = lo[ax].min(c[ax]);
            hi[ax] = hi[ax].max(c[ax]);
        }
    }
    let raster = Raster::new(
        d,
        h,
        &set.origin,
        lo.clone(),
        hi.clone(),
        measure.cells.iter().cloned().zip(measure.masses.iter().copied()),
    )?;
    let sides = side_lengths(alpha0, alpha1);
    let per_scale = (sample_budget / (2 * sides.len())).max(1);

    let mut upper: f64 = 0.0;
    let mut lower: f64 = 0.0;
    let mut tested = 0usize;
    let mut max_stride = 1usize;

    for &r in &sides {
        let rd = r.powf(delta);
        let k = (r / h - SNAP).ceil() as i64;
        let starts: Vec<Vec<i64>> = (0..d).map(|ax| ((lo[ax] - k + 1)..=hi[ax]).collect()).collect();
        let total: usize = starts.iter().map(|s| s.len()).product();
        let stride = if total > per_scale {
            ((total as f64 / per_scale as f64).powf(1.0 / d as f64)).ceil() as usize
        } else {
            1
        };
        max_stride = max_stride.max(stride);
        let mut eval = |corner: &[f64]| {
            let top: Vec<f64> = corner.iter().map(|c| c + r).collect();
            let m = raster.mass(corner, &top);
            upper = upper.max(m / rd);
            tested += 1;
        };
        if d == 1 {
            for &i in starts[0].iter().step_by(stride) {
                eval(&[set.origin[0] + h * i as f64]);
            }
        } else {
            for &i in starts[0].iter().step_by(stride) {
                for &j in starts[1].iter().step_by(stride) {
                    eval(&[set.origin[0] + h * i as f64, set.origin[1] + h * j as f64]);
                }
            }
        }
        let cstride = set.len().div_ceil(per_scale).max(1);
        max_stride = max_stride.max(cstride);
        for c in set.cubes.iter().step_by(cstride) {
            let center = set.cube_center(c);
            let a: Vec<f64> = center.iter().map(|x| x - r / 2.0).collect();
            let b: Vec<f64> = center.iter().map(|x| x + r / 2.0).collect();
            let m = raster.mass(&a, &b);
            lower = if m > 0.0 { lower.max(rd / m) } else { f64::INFINITY };
            tested += 1;
        }
    }
    let constant = upper.max(lower);
    Ok(RegularityReport {
        delta,
        constant_upper: upper,
        constant_lower: lower,
        scales_tested: (alpha0, alpha1),
        side_lengths: sides,
        cubes_tested: tested,
        stride: max_stride,
        resolution: h,
        requested_c_r: c_r,
        pass: constant <= c_r,
    })
}

/// y + λ·set. The cube indices are kept and the grid is rescaled, so the
/// operation is exact.
pub fn scale_shift(set: &GridSet, lambda: f64, y: &[f64]) -> Result<GridSet> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    if y.len() != set.dimension {
        return invalid("shift vector has wrong dimension");
    }
    let origin = set.origin.iter().zip(y).map(|(o, y)| y + lambda * o).collect();
    let extent = set
        .extent
        .iter()
        .zip(y)
        .map(|(e, y)| [y + lambda * e[0], y + lambda * e[1]])
        .collect();
    GridSet::new(
        set.dimension,
        set.resolution * lambda,
        origin,
        extent,
        set.cubes.clone(),
    )
}

/// Outward rasterized Minkowski sum with [−radius, radius]^d. Radii below
/// the resolution are raised to it.
pub fn thicken(set: &GridSet, radius: f64) -> GridSet {
    let h = set.resolution;
    let t = ((radius.max(h) / h) - SNAP).ceil().max(1.0) as i64;
    let pad = t as f64 * h;
    let mut out: BTreeSet<Vec<i64>> = BTreeSet::new();
    for c in &set.cubes {
        if set.dimension == 1 {
            for a in -t..=t {
                out.insert(vec![c[0] + a]);
            }
        } else {
            for a in -t..=t {
                for b in -t..=t {
                    out.insert(vec![c[0] + a, c[1] + b]);
                }
            }
        }
    }
    let extent = set.extent.iter().map(|e| [e[0] - pad, e[1] + pad]).collect();
    GridSet {
        dimension: set.dimension,
        resolution: h,
        origin: set.origin.clone(),
        extent,
        cubes: out.into_iter().collect(),
    }
}

/// An axis-aligned cube given by its lower corner and side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub corner: Vec<f64>,
    pub side: f64,
}

/// A child of a cube in its L^d partition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subcube {
    /// Position inside the parent, each entry in 0..L.
    pub offset: Vec<usize>,
    pub cube: Cube,
}

fn children(cube: &Cube, l: usize, d: usize) -> Vec<Subcube> {
    let s = cube.side / l as f64;
    let mut offs: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..d {
        offs = offs
            .into_iter()
            .flat_map(|o| {
                (0..l).map(move |i| {
                    let mut o = o.clone();
                    o.push(i);
                    o
                })
            })
            .collect();
    }
    offs.into_iter()
        .map(|offset| {
            let corner = cube
                .corner
                .iter()
                .zip(&offset)
                .map(|(c, &i)| c + s * i as f64)
                .collect();
            Subcube {
                offset,
                cube: Cube { corner, side: s },
            }
        })
        .collect()
}

fn first_empty(occ: Option<&Occupancy>, cube: &Cube, l: usize, d: usize) -> Option<Subcube> {
    children(cube, l, d).into_iter().find(|ch| {
        let Some(occ) = occ else { return true };
        let hi: Vec<f64> = ch.cube.corner.iter().map(|c| c + ch.cube.side).collect();
        !occ.meets_interior(&ch.cube.corner, &hi)
    })
}

/// First child (lexicographic in the offset) of `cube` in its L^d partition
/// whose interior misses the set, or `None`.
pub fn find_empty_subcube(set: &GridSet, cube: &Cube, l: usize) -> Result<Option<Subcube>> {
    let h = set.resolution;
    if l < 2 {
        return invalid(format!("L must be at least 2, got {l}"));
    }
    if cube.corner.len() != set.dimension {
        return invalid("cube has wrong dimension");
    }
    if cube.side < l as f64 * h * (1.0 - SNAP) {
        return invalid(format!("cube side {} is below L·h = {}", cube.side, l as f64 * h));
    }
    let aligned = |v: f64| (v - v.round()).abs() < 1e-6;
    let on_grid = cube
        .corner
        .iter()
        .zip(&set.origin)
        .all(|(c, o)| aligned((c - o) / h))
        && aligned(cube.side / h);
    if !on_grid {
        return invalid("cube not aligned to grid");
    }
    let occ = Occupancy::new(set)?;
    Ok(first_empty(occ.as_ref(), cube, l, set.dimension))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PorosityFailure {
    pub depth: u32,
    pub cube: Cube,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PorosityReport {
    pub scale: usize,
    pub depths_checked: Vec<u32>,
    /// Number of cubes of 𝒞_n meeting the set, per checked depth.
    pub cubes_scanned: Vec<usize>,
    pub failures: Vec<PorosityFailure>,
}

impl PorosityReport {
    pub fn porous_at(&self, n: u32) -> bool {
        self.depths_checked.contains(&n) && !self.failures.iter().any(|f| f.depth == n)
    }
    pub fn porous(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Largest n with L^{n+1}·h ≤ extent width.
pub fn max_porosity_depth(set: &GridSet, l: usize) -> Option<u32> {
    let w = set.extent[0][1] - set.extent[0][0];
    let mut n = 0u32;
    let mut side = w / l as f64;
    if side < set.resolution * (1.0 - SNAP) {
        return None;
    }
    while side / (l as f64) >= set.resolution * (1.0 - SNAP) {
        side /= l as f64;
        n += 1;
    }
    Some(n)
}

/// Scans every cube of 𝒞_n (the partition of the extent cube into L^{nd}
/// congruent cubes) meeting the set for an empty child in 𝒞_{n+1}.
pub fn check_porosity(set: &GridSet, l: usize, depths: &[u32]) -> Result<PorosityReport> {
    if l < 3 {
        return invalid(format!("L must be at least 3, got {l}"));
    }
    let d = set.dimension;
    let w = set.extent[0][1] - set.extent[0][0];
    if set.extent.iter().any(|e| ((e[1] - e[0] - w) / w).abs() > 1e-12) {
        return invalid("porosity needs a cubical extent");
    }
    let occ = Occupancy::new(set)?;
    let mut failures = Vec::new();
    let mut scanned = Vec::new();
    for &n in depths {
        let per_axis = (l as f64).powi(n as i32);
        let side = w / per_axis;
        if side / (l as f64) < set.resolution * (1.0 - SNAP) {
            return invalid(format!("depth {n} is out of range: L^(n+1)·h exceeds the extent"));
        }
        let count = per_axis as usize;
        if count.pow(d as u32) > 1 << 26 {
            return Err(Error::TooLarge(format!("𝒞_{n} has too many cubes")));
        }
        let Some(occ) = occ.as_ref() else {
            scanned.push(0);
            continue;
        };
        let mut meeting = 0usize;
        let mut visit = |corner: Vec<f64>| {
            let hi: Vec<f64> = corner.iter().map(|c| c + side).collect();
            if !occ.meets_interior(&corner, &hi) {
                return;
            }
            meeting += 1;
            let cube = Cube { corner, side };
            if first_empty(Some(occ), &cube, l, d).is_none() {
                failures.push(PorosityFailure { depth: n, cube });
            }
        };
        let e = &set.extent;
        if d == 1 {
            for i in 0..count {
                visit(vec![e[0][0] + side * i as f64]);
            }
        } else {
            for i in 0..count {
                for j in 0..count {
                    visit(vec![e[0][0] + side * i as f64, e[1][0] + side * j as f64]);
                }
            }
        }
        scanned.push(meeting);
    }
    Ok(PorosityReport {
        scale: l,
        depths_checked: depths.to_vec(),
        cubes_scanned: scanned,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_triadic() {
        let s = build_cantor(&CantorSpec::middle_third(1)).unwrap();
        assert_eq!(s.cubes(), &[vec![0], vec![2]]);
        assert!((s.resolution() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn full_alphabet_is_interval() {
        let s = build_cantor(&CantorSpec::new_1d(2, &[0, 1], 3, [0.0, 1.0])).unwrap();
        assert_eq!(s.len(), 8);
        assert!((s.volume() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_alphabet_rejected() {
        let spec = CantorSpec::new_1d(3, &[], 2, [0.0, 1.0]);
        assert!(build_cantor(&spec).is_err());
    }

    #[test]
    fn cube_limit_enforced() {
        let spec = CantorSpec::new_1d(3, &[0, 2], 10, [0.0, 1.0]);
        assert!(matches!(
            build_cantor_with_limit(&spec, 100),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn measure_of_box() {
        let mu = natural_measure(&CantorSpec::middle_third(2)).unwrap();
        assert!((mu.mass_of_box(&[0.0], &[1.0 / 9.0]) - 0.25).abs() < 1e-15);
        assert!((mu.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn contains_point_closed() {
        let s = build_cantor(&CantorSpec::middle_third(1)).unwrap();
        assert!(s.contains_point(&[1.0 / 3.0]));
        assert!(s.contains_point(&[0.0]));
        assert!(!s.contains_point(&[0.5]));
        assert!(s.contains_point(&[1.0]));
    }

    #[test]
    fn thicken_single_cube() {
        let s = GridSet::new(1, 0.25, vec![0.0], vec![[0.0, 0.25]], vec![vec![0]]).unwrap();
        let t = thicken(&s, 0.25);
        assert_eq!(t.cubes(), &[vec![-1], vec![0], vec![1]]);
        assert_eq!(t.extent()[0], [-0.25, 0.5]);
    }

    #[test]
    fn middle_child_is_empty() {
        let s = build_cantor(&CantorSpec::middle_third(3)).unwrap();
        let c = Cube {
            corner: vec![0.0],
            side: 1.0,
        };
        let e = find_empty_subcube(&s, &c, 3).unwrap().unwrap();
        assert_eq!(e.offset, vec![1]);
    }

    #[test]
    fn misaligned_cube_rejected() {
        let s = build_cantor(&CantorSpec::middle_third(3)).unwrap();
        let c = Cube {
            corner: vec![0.01],
            side: 0.5,
        };
        assert!(find_empty_subcube(&s, &c, 3).is_err());
    }

    #[test]
    fn empty_set_has_no_regularity() {
        let s = GridSet::new(1, 0.1, vec![0.0], vec![[0.0, 1.0]], vec![]).unwrap();
        let mu = GridMeasure {
            dimension: 1,
            resolution: 0.1,
            origin: vec![0.0],
            cells: vec![],
            masses: vec![],
        };
        let q = RegularityQuery::new(0.5, 0.1, 1.0, 2.0);
        assert_eq!(check_regularity(&s, &mu, &q), Err(Error::EmptySet));
    }

    #[test]
    fn side_lengths_cover_window() {
        let s = side_lengths(1.0 / 729.0, 1.0);
        assert_eq!(s[0], 1.0);
        assert!((s.last().unwrap() - 1.0 / 729.0).abs() < 1e-15);
    }
}
