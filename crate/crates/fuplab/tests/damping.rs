use std::f64::consts::PI;

use fuplab::damping::*;
use fuplab::quad::gauss_legendre;
use fuplab::regular_sets::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn grid(half: f64, h: f64, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let k = (half / h).round() as i64;
    (-k..=k).map(|i| f(i as f64 * h)).collect()
}

fn cantor_set(depth: u32, n: f64) -> GridSet {
    build_cantor(&CantorSpec::new_1d(3, &[0, 2], depth, [-n, n])).unwrap()
}

fn cantor_c_r() -> f64 {
    let spec = CantorSpec::middle_third(6);
    let s = build_cantor(&spec).unwrap();
    let mu = natural_measure(&spec).unwrap();
    check_regularity(&s, &mu, &RegularityQuery::new(spec.delta(), 3f64.powi(-6), 1.0, 8.0))
        .unwrap()
        .constant()
}

fn cantor_config() -> RegularDampingConfig {
    RegularDampingConfig::new(CantorSpec::middle_third(1).delta(), cantor_c_r())
}

#[test]
fn zero_maps_to_zero() {
    let out = hilbert_modified(&vec![0.0; 2049], 1.0 / 16.0).unwrap();
    assert!(out.iter().all(|v| *v == 0.0));
}

#[test]
fn rejects_bad_samples() {
    let mut v = vec![1.0; 2049];
    v[7] = f64::NAN;
    assert!(hilbert_modified(&v, 1.0 / 16.0).is_err());
    assert!(hilbert_modified(&[1.0; 2048], 1.0 / 16.0).is_err());
}

#[test]
fn log_derivative_identity() {
    let h = 1.0 / 1024.0;
    let f = grid(256.0, h, |x| (x * x + 1.0).ln());
    let hf = hilbert_modified(&f, h).unwrap();
    let k = f.len() / 2;
    let mut err = 0.0f64;
    for i in k - 10 * 1024..=k + 10 * 1024 {
        let x = (i as f64 - k as f64) * h;
        let d = (hf[i + 1] - hf[i - 1]) / (2.0 * h);
        err = err.max((d + 2.0 / (x * x + 1.0)).abs());
    }
    assert!(err <= 1e-3, "{err}");
}

/// (1/π) p.v.∫ f(t)(1/(x−t) + t/(t²+1)) dt by singularity subtraction on
/// [−X, X] plus Gauss–Legendre tails in t = X/u.
fn direct_hilbert(f: &dyn Fn(f64) -> f64, x: f64, big_x: f64, n: usize) -> f64 {
    let h = 2.0 * big_x / n as f64;
    let fx = f(x);
    let mut acc = 0.0;
    for j in 0..=n {
        let t = -big_x + j as f64 * h;
        let w = if j == 0 || j == n { 0.5 * h } else { h };
        let sing = if (t - x).abs() < 1e-12 {
            0.0
        } else {
            (f(t) - fx) / (x - t)
        };
        acc += w * (sing + f(t) * t / (t * t + 1.0));
    }
    acc += fx * ((x + big_x) / (big_x - x)).ln();
    let (nodes, weights) = gauss_legendre(200);
    for (u, w) in nodes.iter().zip(&weights) {
        let u = 0.5 * (u + 1.0);
        let t = big_x / u;
        let jac = 0.5 * w * big_x / (u * u);
        for s in [t, -t] {
            acc += jac * f(s) * (1.0 / (x - s) + s / (s * s + 1.0));
        }
    }
    acc / PI
}

#[test]
fn odd_input_against_direct_quadrature() {
    let f = |t: f64| t / (1.0 + t * t);
    let h = 1.0 / 32.0;
    let samples = grid(64.0, h, f);
    let hf = hilbert_modified(&samples, h).unwrap();
    let k = samples.len() / 2;
    for x in [0.0, 0.5, 1.0, 3.0, 10.0] {
        let i = k + (x / h) as usize;
        let j = k - (x / h) as usize;
        let want = direct_hilbert(&f, x, 64.0, 1 << 16);
        assert!((hf[i] - want).abs() < 1e-3, "x = {x}: {} vs {want}", hf[i]);
        // Odd input gives an even output.
        assert!((hf[i] - hf[j]).abs() < 1e-9);
    }
}

#[test]
fn inversion_up_to_constant() {
    let h = 1.0 / 64.0;
    let f = grid(64.0, h, |x| (1.0 + x) * (-x * x).exp());
    let hf = hilbert_modified(&f, h).unwrap();
    let hhf = hilbert_modified(&hf, h).unwrap();
    let k = f.len() / 2;
    let q = k / 2;
    let sums: Vec<f64> = (k - q..=k + q).map(|i| hhf[i] + f[i]).collect();
    let (lo, hi) = sums
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!(hi - lo < 1e-3, "spread {}", hi - lo);
}

#[test]
fn log_family_is_odd() {
    let h = 1.0 / 32.0;
    for t in [1.0, 5.0, 20.0] {
        let f = grid(2048.0, h, |x| (x * x + t * t).ln());
        let hf = hilbert_modified(&f, h).unwrap();
        let k = f.len() / 2;
        assert!(hf[k].abs() < 1e-9);
        for x in [0.5f64, 2.0, 10.0, 50.0] {
            let i = (x / h) as usize;
            assert!((hf[k + i] + hf[k - i]).abs() < 1e-9);
            assert!((hf[k + i] + 2.0 * (x / t).atan()).abs() < 1e-3, "T = {t}, x = {x}");
        }
    }
}

fn test_multiplier(sigma: f64) -> (Weight, Multiplier) {
    let cfg = MultiplierConfig::default();
    let w = Weight::from_fn(
        |x| 0.01 * (1.0 + x * x).sqrt().sqrt(),
        cfg.weight_extent(sigma),
        1.0 / 32.0,
        0.75,
        "exp(-c<x>^(1/2))",
    )
    .unwrap();
    let m = build_multiplier(&w, sigma, &cfg).unwrap();
    (w, m)
}

#[test]
fn multiplier_support_and_lower_bound() {
    let sigma = 0.05;
    let (w, m) = test_multiplier(sigma);
    assert!(m.psi.leakage <= 1e-6, "{}", m.psi.leakage);
    let bound = sigma.powi(10) / 4e11 * w.omega_at(0.0);
    assert!(m.psi.eval_hat(&[0.0]).norm() >= bound);
    assert!(m.diagnostics.lower_bound_ratio >= 1.0);
    assert!(m.diagnostics.hypothesis_sup <= m.diagnostics.hypothesis_bound);
}

#[test]
fn staircase_is_monotone_and_flat_near_origin() {
    let (_, m) = test_multiplier(0.05);
    let d = &m.diagnostics;
    let k = d.staircase();
    assert!(k.windows(2).all(|w| w[0] <= w[1]));
    let near: Vec<i64> = (0..k.len())
        .filter(|&i| d.grid_x(i).abs() <= 1.25)
        .map(|i| k[i])
        .collect();
    assert!(near.iter().all(|v| *v == near[0]));
}

#[test]
fn product_form_matches_sawtooth_formula() {
    let (w, m) = test_multiplier(0.05);
    let d = &m.diagnostics;
    let shift = if d.half_shift { 0.5 } else { 0.0 };
    let s: Vec<f64> = d
        .s0
        .iter()
        .zip(d.staircase())
        .map(|(s0, k)| s0 - PI * (k as f64 + shift) - PI / 2.0)
        .collect();
    assert!(s.iter().all(|v| (-PI / 2.0 - 1e-9..PI / 2.0).contains(v)));
    let big_m = hilbert_modified(&s, d.hilbert_h).unwrap();
    let k = s.len() / 2;
    for xi in [0.0, 0.5, 3.0, 10.0, 100.0, 400.0] {
        let i = k + (xi / d.hilbert_h) as usize;
        let omega0 = w.big_omega_at(xi) + 5.0 * (xi * xi + d.t_param.powi(2)).ln();
        let direct = (1.0f64 / 3.0).ln() - big_m[i] - omega0;
        let ours = m.psi.eval_hat(&[xi]).norm().ln();
        assert!((direct - ours).abs() < 5e-3, "xi = {xi}: {direct} vs {ours}");
    }
}

#[test]
fn halving_sigma_doubles_t() {
    for sigma in [0.08, 0.05, 0.02] {
        assert!((multiplier_t(sigma / 2.0) - 2.0 * multiplier_t(sigma)).abs() < 1e-12 * multiplier_t(sigma));
    }
    let (_, m) = test_multiplier(0.05);
    assert!((m.diagnostics.t_param - 20.0 / (PI * 0.05)).abs() < 1e-12);
}

#[test]
fn multiplier_rejects_bad_inputs() {
    let cfg = MultiplierConfig::default();
    let w = Weight::from_fn(|_| 0.0, 4096.0, 1.0 / 8.0, 0.75, "flat").unwrap();
    assert!(build_multiplier(&w, 0.1, &cfg).is_err());
    assert!(build_multiplier(&w, 0.0, &cfg).is_err());
    // A weight with steep logarithm violates ‖𝓗(Ω)'‖ ≤ (π/2)σ.
    let steep = Weight::from_fn(|x| (1.0 + x * x).sqrt(), cfg.weight_extent(0.05), 1.0 / 32.0, 0.75, "steep").unwrap();
    assert!(matches!(build_multiplier(&steep, 0.05, &cfg), Err(fuplab::Error::Contract(_))));
    assert!(Weight::from_fn(|_| -1.0, 100.0, 1.0, 0.75, "neg").is_err());
}

#[test]
fn cantor_damping_passes_all_bullets() {
    let y = cantor_set(6, 729.0);
    let r = build_regular_damping(&y, 0.2, &cantor_config()).unwrap();
    assert!(r.report.pass, "{:?}", r.report);
    assert!(r.report.y_points > 0);
    assert!(!r.sigma_clamped);
    assert!((r.psi.support[0][1] - 0.02).abs() < 1e-15);
    let again = verify_damping(&r.psi, &y, &VerifyParams::of(&r.psi, BulletMode::RegularSet));
    assert_eq!(again, r.report);
}

#[test]
fn vacuous_y_clause() {
    let y = GridSet::full(vec![[-1.0, 1.0]], 2.0).unwrap();
    let r = build_regular_damping(&y, 0.2, &cantor_config()).unwrap();
    assert_eq!(r.report.y_points, 0);
    assert!(r.report.y_decay_margin.is_none());
    assert!(r.report.bullets[2] && r.report.pass);
}

#[test]
fn c2_formula() {
    let y = cantor_set(3, 27.0);
    let cfg = cantor_config();
    let r = build_regular_damping(&y, 0.2, &cfg).unwrap();
    let want = cfg.iota * 0.2f64.powi(10);
    assert!((r.psi.constants.c2 - want).abs() < 1e-12 * want);
    let d = cfg.delta1;
    let c3 = cfg.iota * 0.2 * cfg.c_r.powi(-2) * d * (1.0 - d);
    assert!((r.psi.constants.c3 - c3).abs() < 1e-12 * c3);
}

#[test]
fn gaussian_control_fails_on_spread_out_set() {
    let y = cantor_set(6, 729.0);
    let g = gaussian_control(0.02, 0.1, 0.815, 3000.0).unwrap();
    let rep = verify_damping(&g, &y, &VerifyParams::of(&g, BulletMode::RegularSet));
    assert!(!rep.bullets[3], "{rep:?}");
    assert!(rep.y_decay_margin.unwrap() < 0.0);
}

#[test]
fn zero_function_fails_lower_bound() {
    let y = cantor_set(3, 27.0);
    let g = gaussian_control(0.2, 0.1, 0.815, 600.0).unwrap();
    let DampingShape::Sampled { grid, .. } = g.shape else {
        unreachable!()
    };
    let zero = DampingFunction::from_spectrum(grid, vec![Complex64::new(0.0, 0.0); grid.n], g.constants, g.support[0]).unwrap();
    for mode in [BulletMode::RegularSet, BulletMode::Definition] {
        let rep = verify_damping(&zero, &y, &VerifyParams::of(&zero, mode));
        assert!(!rep.bullets[1] && !rep.pass);
        assert!(rep.support_leakage.is_finite() && rep.global_decay_margin.is_finite());
    }
}

fn product_spec(angle: f64) -> AdmissibleSpec {
    let y = cantor_set(3, 27.0);
    let (c, s) = (angle.cos(), angle.sin());
    AdmissibleSpec {
        covers: vec![AdmissibleCover {
            e1: [c, s],
            e2: [-s, c],
            y1: y.clone(),
            y2: y,
        }],
        eps0: 0.1,
    }
}

#[test]
fn product_damping_standard_basis() {
    let spec = product_spec(0.0);
    let cfg = cantor_config();
    let p = product_damping(&spec, 0.5, &cfg).unwrap();
    let y2 = build_cantor(&CantorSpec::product_2d(3, &[0, 2], 3, [-27.0, 27.0])).unwrap();
    let rep = verify_damping(&p.psi, &y2, &VerifyParams::of(&p.psi, BulletMode::Definition));
    assert!(rep.pass, "{rep:?}");
    assert!(rep.y_points > 0);
    let DampingShape::Product { support_box, .. } = &p.psi.shape else {
        unreachable!()
    };
    for b in support_box {
        assert!(b[0] >= -0.5 && b[1] <= 0.5);
    }
}

#[test]
fn product_damping_rotated_frame() {
    let spec = product_spec(PI / 6.0);
    let p = product_damping(&spec, 0.5, &cantor_config()).unwrap();
    let rep = verify_damping_at(&p.psi, &spec.sample_points(), &VerifyParams::of(&p.psi, BulletMode::Definition));
    assert!(rep.pass, "{rep:?}");
    // The product factorizes along the rotated coordinates.
    let f = &match &p.psi.shape {
        DampingShape::Product { factors, scale, .. } => (factors[0].clone(), *scale),
        _ => unreachable!(),
    };
    let (e1, e2) = (spec.covers[0].e1, spec.covers[0].e2);
    for (u, v) in [(0.3, -0.7), (5.0, 2.0), (-12.0, 30.0)] {
        let xi = [u * e1[0] + v * e2[0], u * e1[1] + v * e2[1]];
        let want = f.1 * f.0.first.eval_hat(&[u]) * f.0.second.eval_hat(&[v]);
        assert!((p.psi.eval_hat(&xi) - want).norm() <= 1e-9 * want.norm().max(1e-300));
    }
}

#[test]
fn product_support_is_minkowski_sum() {
    let y = cantor_set(2, 9.0);
    let a = 0.4f64;
    let spec = AdmissibleSpec {
        covers: vec![
            AdmissibleCover {
                e1: [1.0, 0.0],
                e2: [0.0, 1.0],
                y1: y.clone(),
                y2: y.clone(),
            },
            AdmissibleCover {
                e1: [a.cos(), a.sin()],
                e2: [-a.sin(), a.cos()],
                y1: y.clone(),
                y2: y,
            },
        ],
        eps0: 0.1,
    };
    let c1 = 0.4;
    let p = product_damping(&spec, c1, &cantor_config()).unwrap();
    let DampingShape::Product { factors, support_box, .. } = &p.psi.shape else {
        unreachable!()
    };
    let half = p.factor_c1 / 10.0;
    let mut want = [0.0, 0.0];
    for f in factors {
        let b = f.basis_inverse;
        for (axis, w) in want.iter_mut().enumerate() {
            *w += half * (b[0][axis].abs() + b[1][axis].abs());
        }
    }
    for axis in 0..2 {
        assert!((support_box[axis][1] - want[axis]).abs() < 1e-12);
        assert!(support_box[axis][1] <= c1 / 2.0);
    }
    assert!(p.psi.leakage <= 1e-6);
}

#[test]
fn degenerate_frame_rejected() {
    let y = cantor_set(2, 9.0);
    let spec = AdmissibleSpec {
        covers: vec![AdmissibleCover {
            e1: [1.0, 0.0],
            e2: [0.999f64.sqrt(), 0.001f64.sqrt()],
            y1: y.clone(),
            y2: y,
        }],
        eps0: 0.05,
    };
    assert!(product_damping(&spec, 0.5, &cantor_config()).is_err());
}

#[test]
fn damping_function_serializes() {
    let g = gaussian_control(0.2, 0.1, 0.815, 64.0).unwrap();
    let s = serde_json::to_string(&g).unwrap();
    let back: DampingFunction = serde_json::from_str(&s).unwrap();
    assert_eq!(back, g);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn even_inputs_give_odd_outputs(width in 0.3f64..4.0, amp in -3.0f64..3.0) {
        let h = 1.0 / 16.0;
        let f = grid(128.0, h, |x| amp * (-(x / width).powi(2)).exp());
        let hf = hilbert_modified(&f, h).unwrap();
        let k = f.len() / 2;
        for i in (0..k).step_by(97) {
            prop_assert!((hf[k + i] + hf[k - i]).abs() < 1e-9 * (1.0 + amp.abs()));
        }
    }

    #[test]
    fn constants_are_annihilated(c in -50.0f64..50.0) {
        let hf = hilbert_modified(&vec![c; 4097], 1.0 / 8.0).unwrap();
        // Central half of the grid.
        let worst = hf[1024..=3072].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(worst < 1e-6 * (1.0 + c.abs()), "{worst}");
    }
}
