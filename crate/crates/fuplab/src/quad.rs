//! Quadrature helpers shared by the numerical modules.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over [a, b] to absolute
/// tolerance `tol`. Returns (value, error estimate).
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let mut stack = vec![(a, b, gk15(&f, a, b))];
    let mut total = 0.0;
    let mut err = 0.0;
    let mut budget = 20_000usize;
    while let Some((lo, hi, (v, e))) = stack.pop() {
        let width_ok = (hi - lo).abs() > 1e-14 * (1.0 + lo.abs());
        if e <= tol * (hi - lo).abs() / (b - a).abs().max(1e-300) || budget == 0 || !width_ok {
            total += v;
            err += e;
            continue;
        }
        budget -= 1;
        let mid = 0.5 * (lo + hi);
        stack.push((lo, mid, gk15(&f, lo, mid)));
        stack.push((mid, hi, gk15(&f, mid, hi)));
    }
    (total, err)
}

/// Tanh-sinh quadrature on [a, b]; tolerant of endpoint singularities.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, levels: usize) -> f64 {
    let c = 0.5 * (a + b);
    let h0 = 0.5 * (b - a);
    let mut h = 1.0;
    let mut sum = PI / 2.0 * f(c);
    let mut est = sum * h;
    for level in 0..levels {
        let step = if level == 0 { 1 } else { 2 };
        let mut k = 1usize;
        let mut add = 0.0;
        loop {
            let t = k as f64 * h;
            let u = PI / 2.0 * t.sinh();
            let ch = u.cosh();
            let wk = PI / 2.0 * t.cosh() / (ch * ch);
            if wk < 1e-300 {
                break;
            }
            // Distance to the endpoints computed without cancellation.
            let d = h0 / (u.exp() * ch);
            let s = f(b - d) + f(a + d);
            add += wk * s;
            k += step;
        }
        sum += add;
        let new_est = sum * h;
        if level > 3 && (new_est - est).abs() < 1e-15 * new_est.abs() {
            return new_est * h0;
        }
        est = new_est;
        h *= 0.5;
    }
    est * h0
}

/// Composite trapezoid rule on uniform samples with spacing `dx`.
pub fn trapezoid(y: &[f64], dx: f64) -> f64 {
    if y.len() < 2 {
        return 0.0;
    }
    let inner: f64 = y[1..y.len() - 1].iter().sum();
    dx * (inner + 0.5 * (y[0] + y[y.len() - 1]))
}

/// Uniformly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let h = (b - a) / (n - 1) as f64;
    (0..n).map(|i| a + h * i as f64).collect()
}

/// Two-dimensional Sobol points (direction numbers for the first two
/// dimensions), skipping the origin.
pub fn sobol2(n: usize) -> Vec<[f64; 2]> {
    let bits = 32;
    let v1: Vec<u32> = (0..bits).map(|i| 1u32 << (31 - i)).collect();
    let mut v2 = vec![0u32; bits];
    v2[0] = 1 << 31;
    for i in 1..bits {
        v2[i] = v2[i - 1] ^ (v2[i - 1] >> 1);
    }
    let mut out = Vec::with_capacity(n);
    let (mut x, mut y) = (0u32, 0u32);
    for i in 1..=n as u64 {
        let c = (i - 1).trailing_ones() as usize;
        x ^= v1[c];
        y ^= v2[c];
        out.push([x as f64 / 4_294_967_296.0, y as f64 / 4_294_967_296.0]);
    }
    out
}
