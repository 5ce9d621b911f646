//! The conformal map Φ_q from the unit disk onto the thin rectangle ℛ(q)
//! with vertices ±iq, 1 ± iq, built as F_q ∘ φ with φ(w) = i(1+w)/(1−w) and
//! F_q(z) = −(i/H(k)) arcsn(z, k).
//!
//! Complete integrals come from the arithmetic-geometric mean; the
//! incomplete integral arcsn is evaluated through Carlson's symmetric form
//! arcsn(z, k) = z·R_F(1 − z², 1 − k²z², 1), which is analytic in the upper
//! half-plane and agrees with the path integral from 0 to z there.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};

fn agm(a: f64, b: f64) -> f64 {
    let (mut a, mut b) = (a, b);
    for _ in 0..64 {
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
    }
    0.5 * (a + b)
}

/// L(k) = ∫₀¹ dt/√((1−t²)(1−k²t²)), the complete integral K(k).
pub fn elliptic_l(k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return invalid(format!("modulus must satisfy 0 <= k < 1, got {k}"));
    }
    let kp = ((1.0 - k) * (1.0 + k)).sqrt();
    Ok(PI / (2.0 * agm(1.0, kp)))
}

/// H(k) = ∫₀^∞ ds/√((1+s²)(1+k²s²)), the complementary integral K(√(1−k²)).
pub fn elliptic_h(k: f64) -> Result<f64> {
    if !(k > 0.0 && k < 1.0) {
        return invalid(format!("modulus must satisfy 0 < k < 1, got {k}"));
    }
    Ok(PI / (2.0 * agm(1.0, k)))
}

/// Carlson's R_F for complex arguments off the negative real axis.
pub fn carlson_rf(x: Complex64, y: Complex64, z: Complex64) -> Complex64 {
    let (mut x, mut y, mut z) = (x, y, z);
    for _ in 0..100 {
        let a = (x + y + z) / 3.0;
        let dev = [(a - x).norm(), (a - y).norm(), (a - z).norm()]
            .into_iter()
            .fold(0.0, f64::max);
        if dev <= 2.5e-3 * a.norm() {
            let xx = 1.0 - x / a;
            let yy = 1.0 - y / a;
            let zz = -xx - yy;
            let e2 = xx * yy - zz * zz;
            let e3 = xx * yy * zz;
            let series = 1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - e2 * e3 * (3.0 / 44.0);
            return series / a.sqrt();
        }
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lam = sx * sy + sx * sz + sy * sz;
        x = (x + lam) * 0.25;
        y = (y + lam) * 0.25;
        z = (z + lam) * 0.25;
    }
    Complex64::new(f64::NAN, f64::NAN)
}

/// arcsn(z, k) = ∫₀^z dt/√((1−t²)(1−k²t²)) on the closed upper half-plane.
/// On the real cuts |x| > 1 the boundary value from above is returned; the
/// branch points ±1, ±1/k take their continuous limits.
pub fn arcsn(z: Complex64, k: f64) -> Result<Complex64> {
    if !(0.0..1.0).contains(&k) {
        return invalid(format!("modulus must satisfy 0 <= k < 1, got {k}"));
    }
    if !z.re.is_finite() || !z.im.is_finite() {
        return invalid("arcsn needs a finite argument");
    }
    if z.im < 0.0 {
        return invalid(format!("arcsn is defined on Im z >= 0, got {z}"));
    }
    if z.norm() == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let z2 = z * z;
    let mut u = 1.0 - z2;
    let mut v = 1.0 - k * k * z2;
    if z.im == 0.0 {
        if u.re == 0.0 || v.re == 0.0 {
            return Ok(arcsn_branch_point(z.re, k));
        }
        // Limit from Im z > 0: lift the point by a tiny imaginary part so
        // both arguments sit on the correct side of their cuts.
        let x = z.re;
        let lift = 1e-300 * x.abs().max(1.0);
        u = Complex64::new(u.re, -2.0 * x * lift);
        v = Complex64::new(v.re, -2.0 * k * k * x * lift);
    }
    Ok(z * carlson_rf(u, v, Complex64::new(1.0, 0.0)))
}

fn arcsn_branch_point(x: f64, k: f64) -> Complex64 {
    let l = elliptic_l(k).expect("k validated");
    if x.abs() <= 1.0 {
        return Complex64::new(x.signum() * l, 0.0);
    }
    let h = if k > 0.0 { elliptic_h(k).expect("k validated") } else { f64::INFINITY };
    Complex64::new(x.signum() * l, h)
}

/// Smallest q for which a full map is built.
pub const Q_MIN: f64 = 0.01;

/// Solves L(k)/H(k) = q by bisection in log k, seeded at 4·exp(−π/(2q)).
pub fn solve_k_for_q(q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return invalid(format!("q must lie in (0, 1], got {q}"));
    }
    let ratio = |k: f64| elliptic_l(k).unwrap() / elliptic_h(k).unwrap();
    let kmax = 1.0 - 1e-16;
    if q >= ratio(kmax) {
        return Ok(kmax);
    }
    let seed = 4.0 * (-PI / (2.0 * q)).exp();
    if seed < 1e-300 {
        return Err(Error::TooLarge(format!("k(q) underflows for q = {q}")));
    }
    let mut lo = (seed / 16.0).ln();
    let mut hi = (seed * 16.0).min(kmax).ln();
    while ratio(lo.exp()) > q {
        lo -= 2.0;
    }
    while ratio(hi.exp()) < q {
        hi = (0.5 * (hi.exp() + 1.0)).min(kmax).ln();
    }
    for it in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = ratio(mid.exp());
        if (r - q).abs() <= 1e-12 * q {
            return Ok(mid.exp());
        }
        if r < q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            let k = (0.5 * (lo + hi)).exp();
            if (ratio(k) - q).abs() <= 1e-10 * q {
                return Ok(k);
            }
            return Err(Error::NoConvergence {
                iterations: it + 1,
                residual: (ratio(k) - q).abs() / q,
            });
        }
    }
    let k = (0.5 * (lo + hi)).exp();
    Err(Error::NoConvergence {
        iterations: 200,
        residual: (ratio(k) - q).abs() / q,
    })
}

/// Data of Φ_q. The rectangle ℛ(q) has vertices ±iq, 1 ± iq.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConformalRectangleMap {
    pub q: f64,
    pub k: f64,
    pub l_k: f64,
    pub h_k: f64,
}

impl ConformalRectangleMap {
    pub fn new(q: f64) -> Result<Self> {
        if !(q >= Q_MIN && q <= 1.0) {
            return invalid(format!("q must lie in [{Q_MIN}, 1], got {q}"));
        }
        let k = solve_k_for_q(q)?;
        Ok(Self {
            q,
            k,
            l_k: elliptic_l(k)?,
            h_k: elliptic_h(k)?,
        })
    }

    /// F_q(z) = −(i/H) arcsn(z, k) for Im z ≥ 0.
    pub fn f_q(&self, z: Complex64) -> Result<Complex64> {
        Ok(-Complex64::i() * arcsn(z, self.k)? / self.h_k)
    }

    /// Φ_q(w) for |w| ≤ 1.
    pub fn phi_q(&self, w: Complex64) -> Result<Complex64> {
        let r = w.norm();
        if !(r <= 1.0 + 1e-12) {
            return invalid(format!("w = {w} lies outside the closed disk"));
        }
        let den = 1.0 - w;
        if den.norm() < 1e-300 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let mut z = Complex64::i() * (1.0 + w) / den;
        if r >= 1.0 - 1e-15 {
            // Boundary points land on the real axis.
            z = Complex64::new(z.re, 0.0);
        }
        z.im = z.im.max(0.0);
        self.f_q(z)
    }

    /// Φ_q on the boundary point e^{it}, written through the real image
    /// φ(e^{it}) = −cot(t/2).
    pub fn phi_q_boundary(&self, t: f64) -> Result<Complex64> {
        let half = 0.5 * t.rem_euclid(2.0 * PI);
        if half == 0.0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let x = -half.cos() / half.sin();
        self.f_q(Complex64::new(x, 0.0))
    }

    /// Φ_q(1 − δ) on the real diameter, accurate for tiny δ.
    pub fn phi_q_real_near_one(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0 && delta <= 2.0) {
            return invalid(format!("delta must lie in (0, 2], got {delta}"));
        }
        let s = (2.0 - delta) / delta;
        Ok(self.f_q(Complex64::new(0.0, s))?.re)
    }

    /// (F_q ∘ φ)'(w) in closed form.
    pub fn phi_q_derivative(&self, w: Complex64) -> Result<Complex64> {
        if !(w.norm() < 1.0) {
            return invalid("derivative is evaluated in the open disk");
        }
        let z = Complex64::i() * (1.0 + w) / (1.0 - w);
        let dz = 2.0 * Complex64::i() / ((1.0 - w) * (1.0 - w));
        let k2 = self.k * self.k;
        let df = -Complex64::i() / (self.h_k * ((1.0 - z * z) * (1.0 - k2 * z * z)).sqrt());
        Ok(df * dz)
    }

    /// Distance from a point to the boundary of ℛ(q).
    pub fn distance_to_boundary(&self, p: Complex64) -> f64 {
        let q = self.q;
        let cx = p.re.clamp(0.0, 1.0);
        let cy = p.im.clamp(-q, q);
        let outside = ((p.re - cx).powi(2) + (p.im - cy).powi(2)).sqrt();
        if outside > 0.0 {
            return outside;
        }
        [p.re, 1.0 - p.re, q - p.im, p.im + q]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether p lies in the closed rectangle up to `tol`.
    pub fn in_rectangle(&self, p: Complex64, tol: f64) -> bool {
        p.re >= -tol && p.re <= 1.0 + tol && p.im.abs() <= self.q + tol
    }

    /// θ(q): the boundary angle with Φ_q(e^{iθ}) = 1 + iq, located by
    /// bisection in log t on the sign change between the right and top
    /// edges.
    pub fn theta_numeric(&self) -> Result<f64> {
        let g = |t: f64| -> Result<f64> {
            let p = self.phi_q_boundary(t)?;
            Ok((self.q - p.im) - (1.0 - p.re))
        };
        // Below 1e-150 the image −cot(t/2) squares past f64 range.
        let mut lo = (self.k * 1e-3).max(1e-150).ln();
        let mut hi = (PI / 2.0).ln();
        if g(lo.exp())? <= 0.0 || g(hi.exp())? >= 0.0 {
            return Err(Error::Contract("corner bracket failed".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid.exp())? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        Ok((0.5 * (lo + hi)).exp())
    }

    /// δ with Φ_q(1 − δ) = target, by bisection in log δ.
    pub fn delta_for(&self, target: f64) -> Result<f64> {
        if !(target > 0.0 && target < 1.0) {
            return invalid("target must lie in (0, 1)");
        }
        let mut lo = 1e-150f64.ln();
        let mut hi = 0.0f64;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            // Φ_q(1 − δ) decreases as δ grows.
            if self.phi_q_real_near_one(mid.exp())? > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        Ok((0.5 * (lo + hi)).exp())
    }
}

/// Numerically extracted θ, δ₁, δ₂ against their leading asymptotics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsReport {
    pub q: f64,
    pub k: f64,
    pub l_k: f64,
    pub h_k: f64,
    pub theta_num: f64,
    pub theta_asym: f64,
    /// 2k(q), the angle predicted by tan(θ/2) = k.
    pub theta_from_k: f64,
    pub delta1_num: f64,
    pub delta1_asym: f64,
    pub delta2_num: f64,
    pub delta2_asym: f64,
    pub rel_dev_theta: f64,
    pub rel_dev_delta1: f64,
    pub rel_dev_delta2: f64,
    /// max relative deviation / q.
    pub c_fit: f64,
}

impl AsymptoticsReport {
    pub fn max_rel_dev(&self) -> f64 {
        self.rel_dev_theta.max(self.rel_dev_delta1).max(self.rel_dev_delta2)
    }
}

pub fn asymptotics_report(q: f64) -> Result<AsymptoticsReport> {
    if !(q > 0.0 && q <= 0.3) {
        return invalid(format!("asymptotic reports need 0 < q <= 0.3, got {q}"));
    }
    let map = ConformalRectangleMap::new(q)?;
    let theta_num = map.theta_numeric()?;
    let delta1_num = map.delta_for(0.25)?;
    let delta2_num = map.delta_for(0.75)?;
    let theta_asym = 8.0 * (-PI / (2.0 * q)).exp();
    let delta1_asym = 4.0 * (-PI / (8.0 * q)).exp();
    let delta2_asym = 4.0 * (-3.0 * PI / (8.0 * q)).exp();
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    let rel_dev_theta = rel(theta_num, theta_asym);
    let rel_dev_delta1 = rel(delta1_num, delta1_asym);
    let rel_dev_delta2 = rel(delta2_num, delta2_asym);
    let c_fit = rel_dev_theta.max(rel_dev_delta1).max(rel_dev_delta2) / q;
    Ok(AsymptoticsReport {
        q,
        k: map.k,
        l_k: map.l_k,
        h_k: map.h_k,
        theta_num,
        theta_asym,
        theta_from_k: 2.0 * map.k,
        delta1_num,
        delta1_asym,
        delta2_num,
        delta2_asym,
        rel_dev_theta,
        rel_dev_delta1,
        rel_dev_delta2,
        c_fit,
    })
}
