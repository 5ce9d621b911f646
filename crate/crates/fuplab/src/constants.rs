//! Explicit constant chain for the uncertainty exponent β, evaluated in
//! log-space so that double-exponentially small quantities stay finite.
//!
//! Every β-class quantity is carried through one or two logarithms:
//! `ln R₁`, `ln ln C*`, `ln(−ln γ₀)`, `ln(−ln β)`. The core evaluation is
//! generic over [`num_traits::Float`] and runs once in `f64` and once in
//! double-double ([`twofloat::TwoFloat`]) for a consistency audit.

use num_traits::{Float, FloatConst};
use serde::Serialize;
use twofloat::TwoFloat;

use crate::error::{invalid, Error, Result};
use crate::quad;

/// Tag for the reference mollifier φ(x) = (3/4)·sinc(x/2)⁴ per axis.
pub const MOLLIFIER_VERSION: &str = "sinc4-v1";

/// Mollifier constants for the reference φ.
///
/// `c_phi` bounds the mass of φ outside the cube `[-u/10, u/10]^d` by
/// `c_phi / u` for all u ≥ 1; `big_c_phi` bounds `1 − Ψ_n` on X by the same
/// tail, so the two coincide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MollifierConstants {
    pub version: &'static str,
    pub d: u32,
    pub c_phi: f64,
    pub big_c_phi: f64,
    /// The u at which `u · tail(u/10)` is maximal.
    pub argmax: f64,
}

pub const MOLLIFIER_TABLE: [MollifierConstants; 2] = [
    MollifierConstants {
        version: MOLLIFIER_VERSION,
        d: 1,
        c_phi: 1.796_644_023_956_662,
        big_c_phi: 1.796_644_023_956_662,
        argmax: 3.938_329_073_98,
    },
    MollifierConstants {
        version: MOLLIFIER_VERSION,
        d: 2,
        c_phi: 2.849_805_123_849_502,
        big_c_phi: 2.849_805_123_849_502,
        argmax: 4.682_461_557_6,
    },
];

pub fn mollifier(d: u32) -> Result<MollifierConstants> {
    MOLLIFIER_TABLE
        .iter()
        .find(|m| m.d == d)
        .copied()
        .ok_or_else(|| Error::InvalidInput(format!("no mollifier constants for d = {d}")))
}

/// One-dimensional reference mollifier profile. Nonnegative, unit mass,
/// Fourier transform supported in [-1, 1].
pub fn mollifier_profile(x: f64) -> f64 {
    let t = 0.5 * std::f64::consts::PI * x;
    if t.abs() < 1e-8 {
        return 0.75;
    }
    let s = t.sin() / t;
    0.75 * s.powi(4)
}

/// Mass of the 1D mollifier outside [-s, s].
pub fn mollifier_tail(s: f64) -> f64 {
    if s <= 0.0 {
        return 1.0;
    }
    let mut inner = 0.0;
    let mut a = 0.0;
    while a < s {
        let b = (a + 2.0).min(s);
        inner += quad::adaptive(mollifier_profile, a, b, 1e-15).0;
        a = b;
    }
    (1.0 - 2.0 * inner).max(0.0)
}

/// Mass of the d-dimensional tensor mollifier outside the cube [-s, s]^d.
pub fn mollifier_tail_cube(s: f64, d: u32) -> f64 {
    1.0 - (1.0 - mollifier_tail(s)).powi(d as i32)
}

/// Recomputes `sup_{u ≥ 1} u · tail(u / 10)` by quadrature. Returns
/// (supremum, argmax).
pub fn recompute_mollifier_constant(d: u32) -> (f64, f64) {
    let f = |u: f64| u * mollifier_tail_cube(u / 10.0, d);
    let mut best = (f(1.0), 1.0);
    let mut u = 1.0;
    while u < 60.0 {
        let v = f(u);
        if v > best.0 {
            best = (v, u);
        }
        u += 0.02;
    }
    let (mut a, mut b) = ((best.1 - 0.02).max(1.0), best.1 + 0.02);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let m1 = b - g * (b - a);
        let m2 = a + g * (b - a);
        if f(m1) < f(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    let u = 0.5 * (a + b);
    (f(u), u)
}

/// Θ(ξ) = (log(2 + ξ))^{-α}.
pub fn theta_weight(xi_l1: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    if !(xi_l1 >= 0.0) {
        return invalid(format!("xi must be nonnegative, got {xi_l1}"));
    }
    Ok((2.0 + xi_l1).ln().powf(-alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LChoice {
    pub value: u64,
    pub raw: f64,
    pub clamped: bool,
}

/// L = ⌈(2^{d/2} √(2d+1) C_R)^{2/(d−δ)}⌉, clamped up to 4.
pub fn choose_l(d: u32, delta: f64, c_r: f64) -> Result<LChoice> {
    let df = d as f64;
    if !(delta > 0.0 && delta < df) {
        return invalid(format!("need 0 < delta < d, got delta = {delta}, d = {d}"));
    }
    if !(c_r >= 1.0) {
        return invalid(format!("C_R must be at least 1, got {c_r}"));
    }
    let base = 2f64.powf(df / 2.0) * (2.0 * df + 1.0).sqrt() * c_r;
    let raw = base.powf(2.0 / (df - delta));
    if !raw.is_finite() || raw > 1e15 {
        return Err(Error::TooLarge(format!("L = {raw:e} is not representable")));
    }
    // Rounding noise in the power must not push an exact integer up a step.
    let ceil = (raw * (1.0 - 1e-12)).ceil() as u64;
    Ok(LChoice {
        value: ceil.max(4),
        raw,
        clamped: ceil < 4,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DampingParams {
    pub ln_c2: f64,
    pub ln_c3: f64,
    pub ln_c3_unclamped: f64,
    pub c3_star: f64,
    pub clamped: bool,
}

impl DampingParams {
    pub fn c2(&self) -> f64 {
        self.ln_c2.exp()
    }
    pub fn c3(&self) -> f64 {
        self.ln_c3.exp()
    }
}

fn check_damping_inputs(c1: f64, c_r: f64, delta1: f64, iota: f64) -> Result<()> {
    if !(c1 > 0.0 && c1 < 1.0) {
        return invalid(format!("c1 must lie in (0, 1), got {c1}"));
    }
    if !(c_r > 0.0) || !(iota > 0.0) {
        return invalid("C_R and iota must be positive");
    }
    if !(delta1 > 0.0 && delta1 < 1.0) {
        return invalid(format!("delta1 must lie in (0, 1), got {delta1}"));
    }
    Ok(())
}

fn clamp_c3(ln_c3: f64, q_star: f64) -> (f64, f64, bool) {
    let c3_star = 2.0 * std::f64::consts::PI * q_star;
    if ln_c3 >= c3_star.ln() {
        (c3_star.ln() + (1.0 - 1e-6f64).ln(), c3_star, true)
    } else {
        (ln_c3, c3_star, false)
    }
}

/// Damping parameters (c₂, c₃) for regular sets in d = 1 and for m-fold
/// covered admissible sets in d ≥ 2, with c₃ clamped below c₃* = 2πq*.
pub fn damping_params(
    c1: f64,
    c_r: f64,
    delta1: f64,
    m: u32,
    d: u32,
    iota: f64,
    q_star: f64,
) -> Result<DampingParams> {
    check_damping_inputs(c1, c_r, delta1, iota)?;
    if m == 0 || d == 0 {
        return invalid("m and d must be at least 1");
    }
    let ld = (delta1 * (1.0 - delta1)).ln();
    let (ln_c2, ln_c3) = if d == 1 {
        if m != 1 {
            return invalid("one-dimensional regular sets use a single cover");
        }
        (
            iota.ln() + 10.0 * c1.ln(),
            iota.ln() + c1.ln() - 2.0 * c_r.ln() + ld,
        )
    } else {
        let (mf, df) = (m as f64, d as f64);
        (
            mf * iota.ln() + (10.0 * mf + 2.0) * df * c1.ln() - 10.0 * mf * df * mf.ln()
                - 4.0 * df * c_r.ln()
                + 2.0 * df * ld,
            iota.ln() + c1.ln() - mf.ln() - 2.0 * c_r.ln() + ld,
        )
    };
    let (c3, c3_star, clamped) = clamp_c3(ln_c3, q_star);
    Ok(DampingParams {
        ln_c2,
        ln_c3: c3,
        ln_c3_unclamped: ln_c3,
        c3_star,
        clamped,
    })
}

/// Parameters of the two-dimensional product damping over m rotated covers.
pub fn product_damping_params(
    c1: f64,
    c_r: f64,
    delta1: f64,
    m: u32,
    iota: f64,
    q_star: f64,
) -> Result<DampingParams> {
    check_damping_inputs(c1, c_r, delta1, iota)?;
    if m == 0 {
        return invalid("m must be at least 1");
    }
    let mf = m as f64;
    let ld = (delta1 * (1.0 - delta1)).ln();
    let ln_c2 = (2.0 * mf + 4.0) * iota.ln() + (20.0 * mf + 4.0) * c1.ln()
        - 20.0 * mf * mf.ln()
        - 8.0 * c_r.ln()
        + 4.0 * ld;
    let ln_c3 = iota.ln() + c1.ln() - mf.ln() - 2.0 * c_r.ln() + ld;
    let (c3, c3_star, clamped) = clamp_c3(ln_c3, q_star);
    Ok(DampingParams {
        ln_c2,
        ln_c3: c3,
        ln_c3_unclamped: ln_c3,
        c3_star,
        clamped,
    })
}

/// Inputs of the constant chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainInputs {
    pub d: u32,
    /// Regularity exponent of X.
    pub delta: f64,
    /// Regularity exponent of the one-dimensional factors of Y.
    pub delta1: f64,
    pub c_r: f64,
    pub eps0: f64,
    pub iota: f64,
    pub m: u32,
    /// Overrides c₁ = 1/(2L).
    pub c1: Option<f64>,
    /// Overrides α = (1 + δ₁)/2.
    pub alpha: Option<f64>,
    pub q_star: f64,
    /// Absolute constant C(d) of the localization step.
    pub cartan_c: f64,
}

impl Default for ChainInputs {
    fn default() -> Self {
        ChainInputs {
            d: 2,
            delta: 1.0,
            delta1: 0.5,
            c_r: 1.0,
            eps0: 0.1,
            iota: 1e-2,
            m: 1,
            c1: None,
            alpha: None,
            q_star: 0.05,
            cartan_c: 1.0 / (16.0 * std::f64::consts::PI),
        }
    }
}

/// A value stored as sign and log-magnitude, with an optional second
/// logarithm for quantities whose log-magnitude itself overflows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogValue {
    pub sign: i8,
    pub ln_abs: f64,
    pub ln_ln_abs: Option<f64>,
    pub decimal: String,
}

impl LogValue {
    pub fn from_ln(sign: i8, ln_abs: f64) -> Self {
        let ln_ln_abs = if ln_abs > 0.0 && ln_abs.is_finite() {
            Some(ln_abs.ln())
        } else {
            None
        };
        LogValue {
            sign,
            ln_abs,
            ln_ln_abs,
            decimal: render(sign, ln_abs, ln_ln_abs),
        }
    }

    /// A positive value x with ln ln x given (x > 1).
    pub fn from_ln_ln(ln_ln_abs: f64) -> Self {
        let ln_abs = ln_ln_abs.exp();
        LogValue {
            sign: 1,
            ln_abs,
            ln_ln_abs: Some(ln_ln_abs),
            decimal: render(1, ln_abs, Some(ln_ln_abs)),
        }
    }

    /// A value x in (0, 1) with ln(−ln x) given.
    pub fn from_ln_neg_ln(ln_neg_ln: f64) -> Self {
        let ln_abs = -ln_neg_ln.exp();
        let decimal = if ln_abs.is_finite() && ln_abs > -700.0 {
            format!("{:.6e}", ln_abs.exp())
        } else {
            format!("exp(-exp({ln_neg_ln:.9e}))")
        };
        LogValue {
            sign: 1,
            ln_abs,
            ln_ln_abs: None,
            decimal,
        }
    }
}

fn render(sign: i8, ln_abs: f64, ln_ln: Option<f64>) -> String {
    let s = if sign < 0 { "-" } else { "" };
    if ln_abs.is_finite() && ln_abs.abs() < 700.0 {
        format!("{s}{:.6e}", ln_abs.exp())
    } else if ln_abs.is_finite() {
        format!("{s}exp({ln_abs:.9e})")
    } else if let Some(ll) = ln_ln {
        format!("{s}exp(exp({ll:.9e}))")
    } else {
        format!("{s}exp({ln_abs})")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrailEntry {
    pub name: String,
    pub value: LogValue,
    pub note: String,
}

/// Which precision produced a set of levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Precision {
    Double,
    Extended,
}

/// Raw log-levels of the chain, produced by the generic core.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainLevels {
    pub ln_c1: f64,
    pub ln_c2: f64,
    pub ln_c3: f64,
    pub c3_clamped: bool,
    pub alpha: f64,
    /// ln R for the five cases (i)-(v).
    pub ln_r0_cases: [f64; 5],
    /// ln (2d/c₃)².
    pub ln_r_lemma: f64,
    pub ln_r1: f64,
    pub ln_theta_r1: f64,
    pub lnln_cstar: f64,
    /// ln of the unrounded T₀.
    pub ln_t0_real: f64,
    /// T₀ when small enough to round exactly.
    pub t0_exact: Option<u64>,
    pub ln_t: f64,
    /// ln(−ln γ₀).
    pub ln_neg_ln_gamma0: f64,
    /// ln(−ln β).
    pub ln_neg_ln_beta: f64,
    /// ln ln C̃ = ln β + ln ln L.
    pub lnln_ctilde: f64,
    pub beta_two_sided_ok: bool,
    /// ln X where the headline bound is β ≥ exp(−exp X).
    pub ln_headline_x: f64,
}

/// Floating-point types the chain can run in. For double-double the
/// elementary functions are routed through the positive-argument
/// exponential, which is the accurate one, and logarithms are refined by a
/// Newton step.
pub trait ChainFloat: Float + FloatConst {
    fn exp_acc(self) -> Self {
        self.exp()
    }
    fn ln_acc(self) -> Self {
        self.ln()
    }
    fn ln_1p_acc(self) -> Self {
        self.ln_1p()
    }
    fn is_neg_inf(self) -> bool {
        self.to_f64().map_or(true, |v| v == f64::NEG_INFINITY)
    }
}

impl ChainFloat for f64 {}

fn tf(v: f64) -> TwoFloat {
    TwoFloat::from(v)
}

fn tf_expm1(y: TwoFloat) -> TwoFloat {
    if y.hi() >= 0.0 {
        y.exp_m1()
    } else {
        let z = -y;
        -z.exp_m1() / z.exp()
    }
}

impl ChainFloat for TwoFloat {
    fn exp_acc(self) -> Self {
        if self.hi() == f64::NEG_INFINITY || self.hi() < -745.0 {
            return tf(0.0);
        }
        if self.hi() < 0.0 {
            tf(1.0) / (-self).exp()
        } else {
            self.exp()
        }
    }
    fn ln_acc(self) -> Self {
        let h = self.hi();
        if !(h > 0.0) || !h.is_finite() {
            return tf(h.ln());
        }
        let y0 = tf(h.ln());
        y0 + self / y0.exp_acc() - tf(1.0)
    }
    fn ln_1p_acc(self) -> Self {
        let h = self.hi();
        if !h.is_finite() || !(h > -1.0) {
            return tf(h.ln_1p());
        }
        if h.abs() > 0.5 {
            return (tf(1.0) + self).ln_acc();
        }
        if h == 0.0 {
            return tf(0.0);
        }
        let y0 = tf(h.ln_1p());
        y0 - (tf_expm1(y0) - self) / y0.exp_acc()
    }
}

fn lse<F: ChainFloat>(xs: &[F]) -> F {
    let finite: Vec<F> = xs.iter().copied().filter(|x| !x.is_neg_inf()).collect();
    if finite.is_empty() {
        return F::neg_infinity();
    }
    let m = finite.iter().copied().fold(finite[0], F::max);
    let s = finite.iter().fold(F::zero(), |acc, &x| acc + (x - m).exp_acc());
    m + s.ln_acc()
}

pub fn chain_core<F: ChainFloat>(
    inp: &ChainInputs,
    l: u64,
    moll: &MollifierConstants,
) -> Result<ChainLevels> {
    let c = |v: f64| F::from(v).unwrap();
    let d = c(inp.d as f64);
    let two = c(2.0);
    let ln2 = two.ln_acc();
    let lf = c(l as f64);
    let ln_l = lf.ln_acc();
    let lnln_l = ln_l.ln_acc();

    let ln_c1 = match inp.c1 {
        Some(v) => c(v).ln_acc(),
        None => -(two * lf).ln_acc(),
    };
    let delta1 = c(inp.delta1);
    let ld = delta1.ln_acc() + (F::one() - delta1).ln_acc();
    let ln_iota = c(inp.iota).ln_acc();
    let ln_cr = c(inp.c_r).ln_acc();
    let mf = c(inp.m as f64);
    let alpha = match inp.alpha {
        Some(a) => c(a),
        None => (F::one() + delta1) / two,
    };

    let (ln_c2, ln_c3_raw) = if inp.d == 1 {
        (
            ln_iota + c(10.0) * ln_c1,
            ln_iota + ln_c1 - two * ln_cr + ld,
        )
    } else {
        (
            mf * ln_iota + (c(10.0) * mf + two) * d * ln_c1 - c(10.0) * mf * d * mf.ln_acc()
                - c(4.0) * d * ln_cr
                + two * d * ld,
            ln_iota + ln_c1 - mf.ln_acc() - two * ln_cr + ld,
        )
    };
    let ln_c3_star = (two * F::PI() * c(inp.q_star)).ln_acc();
    let (ln_c3, c3_clamped) = if ln_c3_raw >= ln_c3_star {
        (ln_c3_star + c(1.0 - 1e-6).ln_acc(), true)
    } else {
        (ln_c3_raw, false)
    };

    let ln_cd = c(inp.cartan_c).ln_acc();
    let inv = F::one() / (F::one() - alpha);
    let case_i = (inv * (c(16.0) * F::PI()).ln_acc() + inv * (ln_cd - ln_c3)).exp_acc();
    let case_ii = (inv * c(4.0).ln_acc()).exp_acc();
    let case_iii = c(8.0) * (d * (-d * ln_c1).ln_acc() - ln_c3);
    let inner_iv = c(4.0) * (ln2 + ln_cd - two * ln_c2);
    let case_iv = two * inner_iv.abs().ln_acc();
    let case_v = c(4.0) * (c(8.0) * d).ln_acc();
    let lemma = two * ((two * d).ln_acc() - ln_c3);
    let cases = [case_i, case_ii, case_iii, case_iv, case_v];
    let ln_r1 = cases.iter().copied().fold(lemma, F::max);

    let ln_r1p2 = ln_r1 + (two * (-ln_r1).exp_acc()).ln_1p_acc();
    let ln_theta = -alpha * ln_r1p2.ln_acc();
    let lnln_cstar = ln_c3 + ln_theta + ln_r1p2 - ln2;

    let ln_cphi = c(moll.c_phi).ln_acc();
    let ln_big_cphi = c(moll.big_c_phi).ln_acc();
    let ln_nn = if lnln_cstar < c(50.0) {
        let ln_cstar = lnln_cstar.exp_acc();
        let ln_eps = two * ln_cphi - c(4.0).ln_acc() - two * ln_big_cphi - c(4.0) * ln_cstar;
        let a = ln2 + ln_big_cphi + (F::one() + (F::one() + ln_eps.exp_acc()).sqrt()).ln_acc();
        (two * ln_cstar + a).ln_acc()
    } else {
        let a = ln2 + ln_big_cphi + ln2;
        ln2 + lnln_cstar + (a * (-(ln2 + lnln_cstar)).exp_acc()).ln_1p_acc()
    };
    let ln_t0_real = ln_nn - lnln_l;
    let (t0_exact, ln_t) = if ln_t0_real < c(40.0) {
        let v = ln_t0_real.exp_acc().to_f64().unwrap();
        let t = ((v * (1.0 - 1e-12)).ceil() as u64).max(1);
        (Some(t), c(t as f64).ln_acc())
    } else {
        (None, ln_t0_real)
    };

    let u = if ln_t < c(700.0) {
        let ln_u = two * ln_cphi - two * (ln_t.exp_acc() - F::one()) * ln_l;
        ln_u.exp_acc()
    } else {
        F::zero()
    };
    if u >= F::one() {
        return Err(Error::Contract(format!(
            "gamma0 numerator nonpositive at T = {:?}",
            t0_exact
        )));
    }
    let term3 = if u > F::zero() {
        (-(-u).ln_1p_acc()).ln_acc()
    } else {
        F::neg_infinity()
    };
    let nlg = lse(&[ln2.ln_acc(), ln2 + lnln_cstar, term3]);

    let (nlb, two_sided) = if nlg < c(700f64.ln_acc()) {
        let ln_g0 = -nlg.exp_acc();
        let x = ln_g0.exp_acc() / two;
        let ln_beta = (-(-x).ln_1p_acc()).ln_acc() - ln_t - lnln_l;
        let lower = ln_g0 - c(4.0).ln_acc() - ln_t - lnln_l;
        let upper = ln_g0 - ln2 - ln_t - lnln_l + c(1e-6).ln_1p_acc();
        ((-ln_beta).ln_acc(), lower <= ln_beta && ln_beta <= upper)
    } else {
        let rest = ln2 + ln_t + lnln_l;
        let nlb = lse(&[nlg, rest.ln_acc()]);
        // −ln β = A exactly here, with A = −ln γ₀ + ln 2 + ln T + ln ln L.
        let a_hi = lse(&[nlg, (rest + ln2).ln_acc()]);
        let a_lo = lse(&[nlg, (rest - c(1e-6)).ln_acc()]);
        (nlb, a_lo <= nlb && nlb <= a_hi)
    };

    let delta = c(inp.delta);
    let base = c(inp.c_r).powi(2) / (c(inp.iota) * delta1 * (F::one() - delta1));
    let expo = (c(6.0) - two * delta) / ((F::one() - delta1) * (two - delta));
    let ln_headline_x = expo * base.ln_acc();

    let f = |x: F| x.to_f64().unwrap();
    Ok(ChainLevels {
        ln_c1: f(ln_c1),
        ln_c2: f(ln_c2),
        ln_c3: f(ln_c3),
        c3_clamped,
        alpha: f(alpha),
        ln_r0_cases: cases.map(f),
        ln_r_lemma: f(lemma),
        ln_r1: f(ln_r1),
        ln_theta_r1: f(ln_theta),
        lnln_cstar: f(lnln_cstar),
        ln_t0_real: f(ln_t0_real),
        t0_exact,
        ln_t: f(ln_t),
        ln_neg_ln_gamma0: f(nlg),
        ln_neg_ln_beta: f(nlb),
        lnln_ctilde: -f(nlb).exp_acc() + f(lnln_l),
        beta_two_sided_ok: two_sided,
        ln_headline_x: f(ln_headline_x),
    })
}

/// Full audit trail of the constant chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantChain {
    pub inputs: ChainInputs,
    pub mollifier: MollifierConstants,
    pub l: LChoice,
    pub c1: LogValue,
    pub c2: LogValue,
    pub c3: LogValue,
    pub alpha: f64,
    pub q_star: f64,
    pub r0_cases: Vec<TrailEntry>,
    pub dominant_case: String,
    pub r1: LogValue,
    pub c_star: LogValue,
    pub t0: LogValue,
    pub t0_rounded: bool,
    pub gamma0: LogValue,
    pub beta: LogValue,
    /// ln(−ln β).
    pub beta_ln_neg_ln: f64,
    pub c_tilde: LogValue,
    /// ln(−ln β_headline) = X.
    pub headline_ln_neg_ln: f64,
    pub headline_beta: LogValue,
    pub chain_dominates_headline: bool,
    pub beta_two_sided_ok: bool,
    pub clamps: Vec<String>,
    pub double: ChainLevels,
    pub extended: ChainLevels,
    pub precision_max_rel_dev: f64,
}

fn rel_dev(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

impl ChainLevels {
    fn key_levels(&self) -> [f64; 7] {
        [
            self.ln_c2,
            self.ln_c3,
            self.ln_r1,
            self.lnln_cstar,
            self.ln_t,
            self.ln_neg_ln_gamma0,
            self.ln_neg_ln_beta,
        ]
    }
}

/// Evaluates the whole chain in double and extended precision and checks
/// its range invariants.
pub fn beta_chain(inp: &ChainInputs) -> Result<ConstantChain> {
    if inp.d == 0 || inp.d > 3 {
        return invalid(format!("d = {} not supported", inp.d));
    }
    if inp.m == 0 {
        return invalid("m must be at least 1");
    }
    if !(inp.delta1 > 0.0 && inp.delta1 < 1.0) {
        return invalid("delta1 must lie in (0, 1)");
    }
    if !(inp.iota > 0.0 && inp.cartan_c > 0.0 && inp.q_star > 0.0) {
        return invalid("iota, C(d) and q* must be positive");
    }
    if let Some(a) = inp.alpha {
        if !(a > 0.0 && a < 1.0) {
            return invalid("alpha must lie in (0, 1)");
        }
    }
    if let Some(c1) = inp.c1 {
        if !(c1 > 0.0 && c1 < 1.0) {
            return invalid("c1 must lie in (0, 1)");
        }
    }
    let l = choose_l(inp.d, inp.delta, inp.c_r)?;
    let moll = mollifier(inp.d.min(2))?;
    let dbl = chain_core::<f64>(inp, l.value, &moll)?;
    let ext = chain_core::<TwoFloat>(inp, l.value, &moll)?;
    let precision_max_rel_dev = dbl
        .key_levels()
        .iter()
        .zip(ext.key_levels().iter())
        .map(|(a, b)| rel_dev(*a, *b))
        .fold(0.0, f64::max);

    let lv = &ext;
    let bad = |x: f64| !x.is_finite();
    if bad(lv.ln_r1) || bad(lv.lnln_cstar) || bad(lv.ln_neg_ln_gamma0) || bad(lv.ln_neg_ln_beta)
    {
        return Err(Error::Contract("non-finite level in the chain".into()));
    }
    let lemma_floor = lv.ln_r_lemma;
    if lv.ln_r1 < lemma_floor {
        return Err(Error::Contract("R1 below (2d/c3)^2".into()));
    }

    let mut clamps = Vec::new();
    if l.clamped {
        clamps.push(format!("L raised from {:.6} to 4", l.raw));
    }
    if lv.c3_clamped {
        clamps.push(format!(
            "c3 clamped below c3* = 2*pi*q* = {:.6}",
            2.0 * std::f64::consts::PI * inp.q_star
        ));
    }

    let names = ["(i)", "(ii)", "(iii)", "(iv)", "(v)"];
    let mut r0_cases: Vec<TrailEntry> = names
        .iter()
        .zip(lv.ln_r0_cases.iter())
        .map(|(n, v)| TrailEntry {
            name: format!("R0 case {n}"),
            value: LogValue::from_ln(1, *v),
            note: String::new(),
        })
        .collect();
    r0_cases.push(TrailEntry {
        name: "(2d/c3)^2".into(),
        value: LogValue::from_ln(1, lv.ln_r_lemma),
        note: "floor from the localization lemma".into(),
    });
    let dominant = r0_cases
        .iter()
        .max_by(|a, b| a.value.ln_abs.total_cmp(&b.value.ln_abs))
        .map(|e| e.name.clone())
        .unwrap_or_default();

    let t0 = match lv.t0_exact {
        Some(t) => LogValue::from_ln(1, (t as f64).ln()),
        None => LogValue::from_ln(1, lv.ln_t0_real),
    };
    let ln_ln_headline = lv.ln_headline_x;
    let x_headline = ln_ln_headline.exp();
    let nlb = lv.ln_neg_ln_beta;
    let dominates = if nlb <= 0.0 {
        nlb <= x_headline
    } else {
        nlb.ln() <= ln_ln_headline
    };

    Ok(ConstantChain {
        inputs: *inp,
        mollifier: moll,
        l,
        c1: LogValue::from_ln(1, lv.ln_c1),
        c2: LogValue::from_ln(1, lv.ln_c2),
        c3: LogValue::from_ln(1, lv.ln_c3),
        alpha: lv.alpha,
        q_star: inp.q_star,
        r0_cases,
        dominant_case: dominant,
        r1: LogValue::from_ln(1, lv.ln_r1),
        c_star: LogValue::from_ln_ln(lv.lnln_cstar),
        t0,
        t0_rounded: lv.t0_exact.is_some(),
        gamma0: LogValue::from_ln_neg_ln(lv.ln_neg_ln_gamma0),
        beta: LogValue::from_ln_neg_ln(nlb),
        beta_ln_neg_ln: nlb,
        c_tilde: LogValue::from_ln_ln(lv.lnln_ctilde),
        headline_ln_neg_ln: x_headline,
        headline_beta: LogValue::from_ln_neg_ln(x_headline),
        chain_dominates_headline: dominates,
        beta_two_sided_ok: lv.beta_two_sided_ok,
        clamps,
        double: dbl,
        extended: ext,
        precision_max_rel_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_examples() {
        let v = theta_weight(0.0, 0.5).unwrap();
        assert!((v - 2f64.ln().powf(-0.5)).abs() < 1e-15);
        assert!(theta_weight(10.0, 0.5).unwrap() < v);
        assert!(theta_weight(std::f64::consts::E.powi(2) - 2.0, 1.0).is_err());
    }

    #[test]
    fn l_examples() {
        assert_eq!(choose_l(2, 1.0, 1.0).unwrap().value, 20);
        assert_eq!(choose_l(1, 0.5, 1.0).unwrap().value, 36);
        assert!(choose_l(2, 2.0, 1.0).is_err());
        let big = choose_l(2, 1.0, 2.0).unwrap();
        assert_eq!(big.value, 80);
    }

    #[test]
    fn c2_one_dimensional() {
        let p = damping_params(0.2, 1.0, 0.5, 1, 1, 1e-2, 0.05).unwrap();
        assert!((p.c2() / (1e-2 * 0.2f64.powi(10)) - 1.0).abs() < 1e-12);
        assert!(!p.clamped);
    }

    #[test]
    fn c2_ratio_between_covers() {
        let p1 = damping_params(0.1, 1.5, 0.4, 1, 2, 1e-2, 0.05).unwrap();
        let p2 = damping_params(0.1, 1.5, 0.4, 2, 2, 1e-2, 0.05).unwrap();
        // ratio = ι c1^{20} 2^{-40}
        let expected = 1e-2f64.ln() + 20.0 * 0.1f64.ln() - 40.0 * 2f64.ln();
        assert!((p2.ln_c2 - p1.ln_c2 - expected).abs() < 1e-10);
    }

    #[test]
    fn c3_clamp_recorded() {
        let p = damping_params(0.9, 1.0, 0.5, 1, 1, 50.0, 0.05).unwrap();
        assert!(p.clamped);
        assert!(p.c3() < p.c3_star);
    }

    #[test]
    fn benchmark_chain() {
        let ch = beta_chain(&ChainInputs::default()).unwrap();
        assert_eq!(ch.l.value, 20);
        assert!(ch.chain_dominates_headline);
        assert!(ch.beta_two_sided_ok);
        assert!(ch.precision_max_rel_dev < 1e-6);
        assert_eq!(ch.dominant_case, "R0 case (i)");
    }

    #[test]
    fn small_chain_rounds_t0() {
        let inp = ChainInputs {
            d: 1,
            delta: 0.5,
            delta1: 0.5,
            iota: 1.0,
            c1: Some(0.45),
            c_r: 1.0,
            cartan_c: 1e-3,
            ..ChainInputs::default()
        };
        let ch = beta_chain(&inp).unwrap();
        assert!(ch.beta_two_sided_ok);
        assert!(ch.beta.ln_abs < 0.0);
    }
}
