use fuplab::fup_operator::*;
use fuplab::localization::{LocalizationGrid, SampledFunction};
use fuplab::regular_sets::{build_cantor, CantorSpec, GridSet};
use fuplab::Error;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn cantor(depth: u32, extent: f64) -> GridSet {
    build_cantor(&CantorSpec::new_1d(3, &[0, 2], depth, [-extent, extent])).unwrap()
}

fn cantor_1d() -> CurveSpec {
    CurveSpec::Cantor1D {
        base: 3,
        alphabet: vec![0, 2],
    }
}

fn rotated() -> CurveSpec {
    CurveSpec::RotatedProduct {
        base: 3,
        alphabet: vec![0, 2],
        angle_deg: 30.0,
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm_of(inst: &FupInstance) -> f64 {
    let op = assemble_operator(inst, AssembleMode::Dense).unwrap();
    operator_norm(&op, NormMethod::Svd).unwrap().norm
}

#[test]
fn full_masks_have_norm_one() {
    for d in [1, 2] {
        let curve =
            fup_decay_curve(&CurveSpec::Full { base: 3, dimension: d }, &[1, 2, 3], Discretization::default()).unwrap();
        for r in &curve.rows {
            assert!((r.norm - 1.0).abs() < 1e-10, "d={d} k={} norm {}", r.k, r.norm);
        }
        assert!(curve.beta_hat.abs() < 1e-9);
    }
}

#[test]
fn z3_depth_one_closed_form() {
    let m = discrete_cantor_matrix(3, &[0, 2], 1).unwrap();
    assert_eq!(m.shape(), (2, 2));
    let idx = [0.0, 2.0];
    for a in 0..2 {
        for b in 0..2 {
            let want = Complex64::from_polar(1.0 / 3f64.sqrt(), -2.0 * PI * idx[a] * idx[b] / 3.0);
            assert!((m[(a, b)] - want).norm() < 1e-15);
        }
    }
    // [[1, 1], [1, ω]]/√3 with |1 + ω| = 1: top eigenvalue of A*A is (2 + 1)/3.
    assert!((matrix_norm(&m) - 1.0).abs() < 1e-12);
}

#[test]
fn adjoint_consistency_both_modes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases = [
        (cantor_1d(), 3, Discretization::default()),
        (cantor_1d(), 2, Discretization { oversampling: 4, freq_refine: 3 }),
        (rotated(), 2, Discretization::default()),
        (rotated(), 1, Discretization { oversampling: 2, freq_refine: 2 }),
    ];
    for (spec, k, disc) in cases {
        let inst = spec.instance(k, disc).unwrap();
        let dense = assemble_operator(&inst, AssembleMode::Dense).unwrap();
        let free = assemble_operator(&inst, AssembleMode::MatrixFree).unwrap();
        let (r, c) = free.shape();
        let v = random_vec(&mut rng, c);
        let w = random_vec(&mut rng, r);
        let av = free.apply(&v);
        let aw = free.adjoint(&w);
        let lhs = dot(&w, &av);
        let rhs = dot(&aw, &v);
        assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()), "{lhs} vs {rhs}");
        // Fast transforms reproduce the explicit matrix.
        let dv = dense.apply(&v);
        let err = av.iter().zip(&dv).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "apply mismatch {err}");
        let dw = dense.adjoint(&w);
        let err = aw.iter().zip(&dw).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "adjoint mismatch {err}");
    }
}

#[test]
fn empty_rows_give_zero() {
    let x = GridSet::new(1, 0.5, vec![-1.0], vec![[-1.0, 1.0]], vec![]).unwrap();
    let y = FrequencySet::Grid(cantor(1, 3.0));
    let inst = FupInstance::new(3.0, x, y, Discretization::default()).unwrap();
    for mode in [AssembleMode::Dense, AssembleMode::MatrixFree] {
        let op = assemble_operator(&inst, mode).unwrap();
        assert_eq!(op.shape().0, 0);
        let r = operator_norm(&op, NormMethod::Power).unwrap();
        assert_eq!(r.norm, 0.0);
    }
}

#[test]
fn dense_and_power_agree() {
    for (spec, ks) in [(cantor_1d(), vec![1u32, 2, 3, 4, 5, 6]), (rotated(), vec![1, 2])] {
        for k in ks {
            let inst = spec.instance(k, Discretization::default()).unwrap();
            let dense = assemble_operator(&inst, AssembleMode::Dense).unwrap();
            let free = assemble_operator(&inst, AssembleMode::MatrixFree).unwrap();
            let a = operator_norm(&dense, NormMethod::Svd).unwrap();
            let b = operator_norm(&free, NormMethod::Power).unwrap();
            assert!(b.residual <= POWER_TOL);
            assert!((a.norm - b.norm).abs() < 1e-7, "k={k}: {} vs {}", a.norm, b.norm);
        }
    }
}

#[test]
fn svd_needs_dense() {
    let inst = cantor_1d().instance(2, Discretization::default()).unwrap();
    let free = assemble_operator(&inst, AssembleMode::MatrixFree).unwrap();
    assert!(matches!(operator_norm(&free, NormMethod::Svd), Err(Error::InvalidInput(_))));
}

#[test]
fn dense_cap_enforced() {
    let inst = rotated().instance(4, Discretization::default()).unwrap();
    assert!(matches!(assemble_operator(&inst, AssembleMode::Dense), Err(Error::TooLarge(_))));
    let auto = assemble_operator(&inst, AssembleMode::Auto).unwrap();
    assert!(auto.dense.is_none());
}

#[test]
fn swapping_roles_preserves_norm() {
    // ov = 2 makes the physical grid and the rescaled frequency grid coincide.
    let disc = Discretization {
        oversampling: 2,
        freq_refine: 1,
    };
    let n = 27.0;
    let x = cantor(3, 1.0);
    let y_unit = build_cantor(&CantorSpec::new_1d(3, &[0, 1], 3, [-1.0, 1.0])).unwrap();
    let y = build_cantor(&CantorSpec::new_1d(3, &[0, 1], 3, [-n, n])).unwrap();
    let x_big = cantor(3, n);
    let a = FupInstance::new(n, x, FrequencySet::Grid(y), disc).unwrap();
    let b = FupInstance::new(n, y_unit, FrequencySet::Grid(x_big), disc).unwrap();
    let (na, nb) = (norm_of(&a), norm_of(&b));
    assert!(na < 1.0 - 1e-3);
    assert!((na - nb).abs() < 1e-10, "{na} vs {nb}");
}

#[test]
fn enlarging_masks_never_decreases_norm() {
    let disc = Discretization::default();
    let n = 27.0;
    let inst = |dx: u32, dy: u32| {
        FupInstance::new(n, cantor(dx, 1.0), FrequencySet::Grid(cantor(dy, n)), disc).unwrap()
    };
    // Lower depth is a superset.
    let base = norm_of(&inst(3, 3));
    let bigger_x = norm_of(&inst(2, 3));
    let bigger_y = norm_of(&inst(3, 1));
    let bigger_both = norm_of(&inst(1, 1));
    assert!(bigger_x >= base - 1e-12);
    assert!(bigger_y >= base - 1e-12);
    assert!(bigger_both >= bigger_x.max(bigger_y) - 1e-12);
}

#[test]
fn cantor_curve_decays() {
    let curve = fup_decay_curve(&cantor_1d(), &[1, 2, 3, 4, 5, 6], Discretization::default()).unwrap();
    assert!(curve.excluded_first);
    assert!(curve.nonincreasing());
    assert!(curve.rows.iter().skip(1).all(|r| r.norm < 1.0));
    assert!(curve.beta_hat > 0.05, "β̂ = {}", curve.beta_hat);
    assert!(curve.r_squared > 0.9);
    // Frozen from the first dense run.
    assert!((curve.rows[5].norm - 0.575_329_630_457_191).abs() < 1e-9);
    let report = submultiplicativity(&curve);
    assert_eq!(report.len(), 9);
    for r in &report {
        println!("r_{} vs r_{}·r_{}: {:.6} <= {:.6} {}", r.k1 + r.k2, r.k1, r.k2, r.lhs, r.rhs, r.holds);
    }
}

#[test]
fn rotated_curve_decays() {
    let curve = fup_decay_curve(&rotated(), &[1, 2, 3], Discretization::default()).unwrap();
    assert!(curve.beta_hat > 0.0);
    assert!(curve.nonincreasing());
    assert_eq!(curve.rows[2].method, NormMethod::Power);
}

#[test]
fn fit_needs_three_points() {
    assert!(matches!(
        fup_decay_curve(&cantor_1d(), &[1, 2], Discretization::default()),
        Err(Error::InvalidInput(_))
    ));
    assert!(fup_decay_curve(&cantor_1d(), &[2, 1, 3], Discretization::default()).is_err());
}

#[test]
fn instance_validation() {
    let disc = Discretization::default();
    // Y outside [−N, N].
    assert!(FupInstance::new(3.0, cantor(1, 1.0), FrequencySet::Grid(cantor(1, 9.0)), disc).is_err());
    // X cubes finer than two physical cells.
    assert!(FupInstance::new(3.0, cantor(4, 1.0), FrequencySet::Grid(cantor(1, 3.0)), disc).is_err());
    // Oversampling below 2.
    let bad = Discretization {
        oversampling: 1,
        freq_refine: 1,
    };
    assert!(FupInstance::new(3.0, cantor(1, 1.0), FrequencySet::Grid(cantor(1, 3.0)), bad).is_err());
}

#[test]
fn identity_distortion_matches_straight() {
    for (spec, k, s) in [(cantor_1d(), 3, 4), (rotated(), 1, 6)] {
        let disc = Discretization {
            oversampling: 4,
            freq_refine: s,
        };
        let d = spec.instance(1, disc).unwrap().dimension();
        let inst = spec
            .instance(k, disc)
            .unwrap()
            .with_distortion(DiffeoSpec::new(d, DiffeoKind::Identity).unwrap())
            .unwrap();
        let dist = distorted_fup_norm(&inst).unwrap();
        assert_eq!(dist.bounds.d0, 1.0);
        let straight = norm_of(&inst);
        assert!((dist.norm - straight).abs() < 1e-6, "{} vs {straight}", dist.norm);
    }
}

#[test]
fn small_shear_within_factor_two() {
    let ds = DiffeoSpec::new(1, DiffeoKind::Shear { a: 0.08 }).unwrap();
    let b = ds.bounds();
    assert!(b.d0 <= 1.2 && b.d0 > 1.1);
    let disc = Discretization {
        oversampling: 4,
        freq_refine: 5,
    };
    let inst = cantor_1d().instance(3, disc).unwrap().with_distortion(ds).unwrap();
    let dist = distorted_fup_norm(&inst).unwrap().norm;
    let straight = norm_of(&inst);
    assert!(dist <= 2.0 * straight && straight <= 2.0 * dist, "{dist} vs {straight}");
}

#[test]
fn radial_bump_norm_below_one() {
    let ds = DiffeoSpec::new(1, DiffeoKind::RadialBump { a: 0.05, r0: 1.0 }).unwrap();
    assert!((ds.bounds().d0 - 2.0).abs() < 0.1);
    let disc = Discretization {
        oversampling: 4,
        freq_refine: 5,
    };
    let inst = cantor_1d().instance(2, disc).unwrap().with_distortion(ds).unwrap();
    let r = distorted_fup_norm(&inst).unwrap();
    assert!(r.norm > 0.0 && r.norm < 1.0, "{}", r.norm);
}

#[test]
fn coarse_frequency_grid_rejected() {
    let ds = DiffeoSpec::new(1, DiffeoKind::Shear { a: 0.08 }).unwrap();
    let inst = cantor_1d()
        .instance(2, Discretization::default())
        .unwrap()
        .with_distortion(ds)
        .unwrap();
    assert!(matches!(distorted_fup_norm(&inst), Err(Error::InvalidInput(_))));
}

#[test]
fn shear_2d_bounds() {
    let ds = DiffeoSpec::new(2, DiffeoKind::Shear { a: 0.1 }).unwrap();
    let b = ds.bounds();
    // Singular values of [[1, a], [0, 1]]: (√(a² + 4) ± a)/2.
    let want = ((0.01f64 + 4.0).sqrt() + 0.1) / 2.0;
    assert!((b.sup_d - want).abs() < 1e-12);
    assert!((b.sup_d_inverse - want).abs() < 1e-12);
    assert!(b.sup_d2 < 1e-9);
    assert!((b.min_det - 1.0).abs() < 1e-12);
}

#[test]
fn mollifier_is_normalized() {
    // φ̂(0) = ∫φ = 1, support in [−1, 1], and φ̂(±1/2) from the closed form
    // of ∫ cos²(πt)cos²(π(½ − t)) over [0, ½], which is 1/16.
    assert!((mollifier_hat(0.0) - 1.0).abs() < 1e-12);
    assert_eq!(mollifier_hat(1.0), 0.0);
    assert!((mollifier_hat(0.5) - (1.0 / 16.0) / 0.375).abs() < 1e-12);
    assert!((mollifier_hat(0.3) - mollifier_hat(-0.3)).abs() < 1e-14);
}

fn demo_inputs(seed: u64) -> (SampledFunction, GridSet) {
    let x = cantor(4, 1.0);
    let y = cantor(3, 27.0);
    let grid = LocalizationGrid::new(8, 256).unwrap();
    (spectrum_in_set(seed, &y, grid).unwrap(), x)
}

#[test]
fn demo_zero_function() {
    let (f, x) = demo_inputs(0);
    let zero = SampledFunction::from_samples(1, f.grid, vec![Complex64::new(0.0, 0.0); f.samples.len()]).unwrap();
    let r = iterate_damping_demo(&zero, &x, 3, 1, 3).unwrap();
    assert!(r.norms.iter().all(|v| *v == 0.0));
}

#[test]
fn demo_contracts_on_cantor() {
    for seed in 0..3 {
        let (f, x) = demo_inputs(seed);
        let r = iterate_damping_demo(&f, &x, 3, 1, 3).unwrap();
        assert_eq!(r.norms.len(), 4);
        assert!(r.ratios.iter().all(|q| *q < 1.0), "{:?}", r.ratios);
        assert!(r.psi_max <= 1.0 + 1e-12);
        assert!(r.product_bound_holds);
        assert!(r.c_phi_measured > 0.0 && r.c_phi_measured < 1.0);
    }
}

#[test]
fn demo_rejects_nonporous_set_and_aliasing() {
    let (f, _) = demo_inputs(0);
    let full = GridSet::full(vec![[-1.0, 1.0]], 2.0 / 81.0).unwrap();
    assert!(iterate_damping_demo(&f, &full, 3, 1, 3).is_err());
    let x = cantor(4, 1.0);
    let y = cantor(3, 27.0);
    let coarse = spectrum_in_set(0, &y, LocalizationGrid::new(8, 64).unwrap()).unwrap();
    assert!(matches!(iterate_damping_demo(&coarse, &x, 3, 1, 3), Err(Error::Contract(_))));
}

#[test]
fn curve_serializes() {
    let curve = fup_decay_curve(&cantor_1d(), &[1, 2, 3], Discretization::default()).unwrap();
    let json = serde_json::to_string(&curve).unwrap();
    assert!(json.contains("\"beta_hat\""));
    let inst = rotated().instance(2, Discretization::default()).unwrap();
    let back: FupInstance = serde_json::from_str(&serde_json::to_string(&inst).unwrap()).unwrap();
    assert_eq!(back, inst);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_masks_have_norm_at_most_one(
        xbits in proptest::collection::vec(any::<bool>(), 9),
        ybits in proptest::collection::vec(any::<bool>(), 9),
        s in 1usize..3,
    ) {
        let pick = |bits: &[bool]| -> Vec<Vec<i64>> {
            bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| vec![i as i64]).collect()
        };
        let n = 9.0;
        let x = GridSet::new(1, 2.0 / 9.0, vec![-1.0], vec![[-1.0, 1.0]], pick(&xbits)).unwrap();
        let y = GridSet::new(1, 2.0, vec![-n], vec![[-n, n]], pick(&ybits)).unwrap();
        let disc = Discretization { oversampling: 4, freq_refine: s };
        let inst = FupInstance::new(n, x, FrequencySet::Grid(y), disc).unwrap();
        let op = assemble_operator(&inst, AssembleMode::Dense).unwrap();
        let r = operator_norm(&op, NormMethod::Svd).unwrap().norm;
        prop_assert!((0.0..=1.0 + 1e-12).contains(&r));
        let m: &DMatrix<Complex64> = op.dense.as_ref().unwrap();
        prop_assert_eq!(m.shape(), op.shape());
    }

    #[test]
    fn adjoint_identity_random(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = rotated().instance(1, Discretization { oversampling: 2, freq_refine: 1 }).unwrap();
        let op = assemble_operator(&inst, AssembleMode::MatrixFree).unwrap();
        let (r, c) = op.shape();
        let v = random_vec(&mut rng, c);
        let w = random_vec(&mut rng, r);
        let lhs = dot(&w, &op.apply(&v));
        let rhs = dot(&op.adjoint(&w), &v);
        prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()));
    }
}
