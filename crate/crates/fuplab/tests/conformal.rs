use std::f64::consts::PI;

use fuplab::conformal::*;
use fuplab::quad;
use num_complex::Complex64;
use proptest::prelude::*;

fn l_oracle(k: f64) -> f64 {
    // t = sin u removes the endpoint singularity.
    quad::adaptive(|u: f64| 1.0 / (1.0 - k * k * u.sin().powi(2)).sqrt(), 0.0, PI / 2.0, 1e-15).0
}

fn h_oracle(k: f64) -> f64 {
    // s = e^v turns ∫₀^∞ ds/√((1+s²)(1+k²s²)) into a smooth integrand with
    // exponential decay at both ends.
    let f = |v: f64| {
        let s = v.exp();
        s / ((1.0 + s * s) * (1.0 + k * k * s * s)).sqrt()
    };
    let hi = (1.0 / k).ln() + 40.0;
    let mut acc = 0.0;
    let mut a = -40.0;
    while a < hi {
        let b = (a + 2.0).min(hi);
        acc += quad::adaptive(f, a, b, 1e-16).0;
        a = b;
    }
    acc
}

/// Straight-segment quadrature of the arcsn integrand with principal square
/// roots of each factor.
fn arcsn_oracle(z: Complex64, k: f64) -> Complex64 {
    let (x, w) = quad::gauss_legendre(64);
    let panels = 400;
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let a = p as f64 / panels as f64;
        let b = (p + 1) as f64 / panels as f64;
        for (xi, wi) in x.iter().zip(&w) {
            let s = 0.5 * (a + b) + 0.5 * (b - a) * xi;
            let t = z * s;
            let f = 1.0 / ((1.0 - t * t).sqrt() * (1.0 - k * k * t * t).sqrt());
            acc += f * z * (wi * 0.5 * (b - a));
        }
    }
    acc
}

#[test]
fn l_small_modulus() {
    assert!((elliptic_l(1e-3).unwrap() - PI / 2.0).abs() < 1e-5);
}

#[test]
fn l_and_h_against_quadrature() {
    for k in [0.5, 0.1, 0.9] {
        assert!((elliptic_l(k).unwrap() - l_oracle(k)).abs() < 1e-12, "L({k})");
        assert!((elliptic_h(k).unwrap() - h_oracle(k)).abs() < 1e-11, "H({k})");
    }
    assert!(elliptic_h(0.0).is_err());
    assert!(elliptic_h(1.0).is_err());
}

#[test]
fn h_expansion() {
    let h = elliptic_h(0.01).unwrap();
    assert!((h - 400f64.ln()).abs() < 0.05);
    assert!((h - (4f64.ln() - 0.01f64.ln())).abs() <= 5.0 * 0.01);
}

#[test]
fn k_for_q_seed() {
    let k = solve_k_for_q(0.2).unwrap();
    let seed = 4.0 * (-PI / 0.4).exp();
    assert!((k - seed).abs() / seed <= 3.0 * 0.2);
    let r = elliptic_l(k).unwrap() / elliptic_h(k).unwrap();
    assert!((r - 0.2).abs() <= 1e-10 * 0.2);
}

#[test]
fn k_for_q_oracle() {
    // Dense tabulation of L/H from quadrature, then bisection.
    let ratio = |k: f64| l_oracle(k) / h_oracle(k);
    let grid: Vec<f64> = (0..=400).map(|i| -20.0 + 0.05 * i as f64).collect();
    let j = grid.windows(2).position(|w| ratio(w[1].exp()) >= 0.1).unwrap();
    let (mut lo, mut hi) = (grid[j], grid[j + 1]);
    for _ in 0..60 {
        let m = 0.5 * (lo + hi);
        if ratio(m.exp()) < 0.1 {
            lo = m;
        } else {
            hi = m;
        }
    }
    let oracle = (0.5 * (lo + hi)).exp();
    let k = solve_k_for_q(0.1).unwrap();
    assert!((k - oracle).abs() / oracle < 1e-8, "{k} vs {oracle}");
}

#[test]
fn k_decreasing_in_inverse_q() {
    let ks: Vec<f64> = [0.3, 0.2, 0.15, 0.1, 0.05]
        .iter()
        .map(|&q| solve_k_for_q(q).unwrap())
        .collect();
    assert!(ks.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn arcsn_at_one_is_l() {
    let a = arcsn(Complex64::new(1.0, 0.0), 0.5).unwrap();
    assert!((a.re - elliptic_l(0.5).unwrap()).abs() < 1e-13);
    assert!(a.im.abs() < 1e-13);
}

#[test]
fn arcsn_vertical_path() {
    let k = 0.3;
    let v = arcsn(Complex64::new(0.0, 1.0), k).unwrap();
    let oracle = quad::adaptive(
        |s: f64| 1.0 / ((1.0 + s * s) * (1.0 + k * k * s * s)).sqrt(),
        0.0,
        1.0,
        1e-15,
    )
    .0;
    assert!(v.re.abs() < 1e-14);
    assert!((v.im - oracle).abs() < 1e-13);
}

#[test]
fn arcsn_segments_in_upper_half_plane() {
    let k = 0.4;
    for z in [
        Complex64::new(0.5, 0.5),
        Complex64::new(2.0, 0.5),
        Complex64::new(-3.0, 0.2),
        Complex64::new(0.1, 4.0),
    ] {
        let a = arcsn(z, k).unwrap();
        let o = arcsn_oracle(z, k);
        assert!((a - o).norm() < 1e-10, "{z}: {a} vs {o}");
    }
}

#[test]
fn normalization_points() {
    for q in [0.3, 0.1] {
        let m = ConformalRectangleMap::new(q).unwrap();
        let at = |re: f64, im: f64| m.phi_q(Complex64::new(re, im)).unwrap();
        assert!(at(-1.0, 0.0).norm() < 1e-12);
        assert!((at(1.0, 0.0) - 1.0).norm() < 1e-12);
        assert!((at(0.0, 1.0) - Complex64::new(0.0, q)).norm() < 1e-10);
        assert!((at(0.0, -1.0) - Complex64::new(0.0, -q)).norm() < 1e-10);
        assert!(m.in_rectangle(at(0.0, 0.0), 1e-8));
        assert!(m.phi_q(Complex64::new(1.1, 0.0)).is_err());
    }
}

#[test]
fn first_quarter_point() {
    let q = 0.2;
    let m = ConformalRectangleMap::new(q).unwrap();
    let d1 = 4.0 * (-PI / (8.0 * q)).exp();
    let a1 = Complex64::new(1.0 - d1, 0.0);
    let v = m.phi_q(a1).unwrap();
    assert!((v.re - 0.25).abs() <= q, "{v}");
    let exact = m.delta_for(0.25).unwrap();
    assert!((m.phi_q_real_near_one(exact).unwrap() - 0.25).abs() < 1e-10);
}

#[test]
fn asymptotics_within_three_q() {
    let mut prev = [f64::INFINITY; 3];
    for q in [0.3, 0.2, 0.1] {
        let r = asymptotics_report(q).unwrap();
        let devs = [r.rel_dev_theta, r.rel_dev_delta1, r.rel_dev_delta2];
        for (i, d) in devs.iter().enumerate() {
            assert!(*d <= 3.0 * q, "q = {q}: {r:?}");
            assert!(*d < prev[i], "q = {q}: deviation {i} did not shrink");
        }
        prev = devs;
    }
    let r = asymptotics_report(0.2).unwrap();
    assert!(r.rel_dev_theta <= 0.6);
    let r = asymptotics_report(0.1).unwrap();
    assert!(r.rel_dev_delta1 <= 0.3);
    assert!(asymptotics_report(0.4).is_err());
}

#[test]
fn cauchy_riemann() {
    let h = 1e-4;
    for q in [0.3, 0.2, 0.1] {
        let m = ConformalRectangleMap::new(q).unwrap();
        for p in quad::sobol2(100) {
            let w = Complex64::from_polar(0.9 * p[0].sqrt(), 2.0 * PI * p[1]);
            let f = |d: Complex64| m.phi_q(w + d).unwrap();
            let fx = (f(Complex64::new(h, 0.0)) - f(Complex64::new(-h, 0.0))) / (2.0 * h);
            let fy = (f(Complex64::new(0.0, h)) - f(Complex64::new(0.0, -h))) / (2.0 * h);
            let res = (fy - Complex64::i() * fx).norm();
            assert!(res <= 1e-6, "q = {q}, w = {w}: {res:e}");
        }
    }
}

#[test]
fn boundary_correspondence() {
    for q in [0.3, 0.2, 0.1] {
        let m = ConformalRectangleMap::new(q).unwrap();
        for j in 0..256 {
            let t = 2.0 * PI * j as f64 / 256.0;
            let p = m.phi_q(Complex64::from_polar(1.0, t)).unwrap();
            assert!(m.distance_to_boundary(p) <= 1e-6, "q = {q}, t = {t}: {p}");
        }
    }
}

#[test]
fn derivative_bound_on_radius() {
    for q in [0.3, 0.2, 0.1] {
        let m = ConformalRectangleMap::new(q).unwrap();
        for i in 1..1000 {
            let w = i as f64 / 1000.0;
            let d = m.phi_q_derivative(Complex64::new(w, 0.0)).unwrap();
            assert!(d.norm() * (1.0 - w).powi(2) <= 2.0 + 1e-6);
        }
    }
}

#[test]
fn measure_distortion() {
    for q in [0.2, 0.1] {
        let m = ConformalRectangleMap::new(q).unwrap();
        let d1 = m.delta_for(0.25).unwrap();
        let d2 = m.delta_for(0.75).unwrap();
        let bound = 2.0 / (d2 * d2);
        // Subintervals of [1 − δ₁, 1 − δ₂], parametrized by δ.
        for i in 0..50 {
            let a = d2 + (d1 - d2) * (i as f64 / 50.0).powi(3);
            let b = d2 + (d1 - d2) * ((i + 1) as f64 / 50.0).powi(3);
            let image = m.phi_q_real_near_one(a).unwrap() - m.phi_q_real_near_one(b).unwrap();
            assert!(image.abs() <= bound * (b - a), "q = {q}");
        }
    }
}

#[test]
fn theta_also_matches_two_k() {
    let r = asymptotics_report(0.1).unwrap();
    assert!((r.theta_num - r.theta_from_k).abs() / r.theta_from_k < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interior_points_land_inside(r in 0.0f64..0.999, t in 0.0f64..(2.0 * PI), q in 0.05f64..1.0) {
        let m = ConformalRectangleMap::new(q).unwrap();
        let p = m.phi_q(Complex64::from_polar(r, t)).unwrap();
        prop_assert!(m.in_rectangle(p, 1e-8));
    }

    #[test]
    fn real_diameter_maps_to_unit_interval(w in -0.999f64..0.999, q in 0.05f64..0.3) {
        let m = ConformalRectangleMap::new(q).unwrap();
        let p = m.phi_q(Complex64::new(w, 0.0)).unwrap();
        prop_assert!(p.im.abs() < 1e-12);
        prop_assert!(p.re >= 0.0 && p.re <= 1.0);
    }
}
