use fuplab::regular_sets::*;
use fuplab::Error;
use proptest::prelude::*;

fn cantor_delta() -> f64 {
    2f64.ln() / 3f64.ln()
}

fn cantor(k: u32) -> (GridSet, GridMeasure) {
    let spec = CantorSpec::middle_third(k);
    (build_cantor(&spec).unwrap(), natural_measure(&spec).unwrap())
}

/// L from the empty-subcube lemma: (2^{d/2} √(2d+1) C_R)^{2/(d−δ)}.
fn lemma_l(d: f64, delta: f64, c_r: f64) -> usize {
    (2f64.powf(d / 2.0) * (2.0 * d + 1.0).sqrt() * c_r)
        .powf(2.0 / (d - delta))
        .ceil() as usize
}

#[test]
fn depth_four_has_sixteen_cubes() {
    let (s, _) = cantor(4);
    assert_eq!(s.len(), 16);
    assert!((s.resolution() - 3f64.powi(-4)).abs() < 1e-15);
}

#[test]
fn ancestor_masses() {
    let spec = CantorSpec::middle_third(4);
    let mu = natural_measure(&spec).unwrap();
    assert!((mu.total() - 1.0).abs() < 1e-14);
    assert!((mu.mass_of_box(&[0.0], &[1.0 / 3.0]) - 0.5).abs() < 1e-14);
    assert!((mu.mass_of_box(&[2.0 / 3.0], &[7.0 / 9.0]) - 0.25).abs() < 1e-14);
}

#[test]
fn middle_third_is_regular() {
    let (s, mu) = cantor(6);
    let q = RegularityQuery::new(cantor_delta(), 3f64.powi(-6), 1.0, 8.0);
    let r = check_regularity(&s, &mu, &q).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(r.constant() <= 8.0);
}

#[test]
fn interval_is_one_regular() {
    let full = GridSet::full(vec![[0.0, 1.0]], 1.0 / 64.0).unwrap();
    let mu = uniform_measure(&full).unwrap();
    let q = RegularityQuery::new(1.0, 1.0 / 64.0, 1.0, 2.0);
    let r = check_regularity(&full, &mu, &q).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn wrong_exponent_constant_grows() {
    let c = |k: u32| {
        let (s, mu) = cantor(k);
        let q = RegularityQuery::new(0.9, s.resolution(), 1.0, 8.0);
        check_regularity(&s, &mu, &q).unwrap().constant()
    };
    let (c4, c6) = (c(4), c(6));
    let predicted = 3f64.powf(2.0 * (0.9 - cantor_delta()));
    assert!(c6 / c4 >= predicted * (1.0 - 1e-9), "{c4} {c6} {predicted}");
    let (s, mu) = cantor(8);
    let q = RegularityQuery::new(0.9, s.resolution(), 1.0, 8.0);
    assert!(!check_regularity(&s, &mu, &q).unwrap().pass);
}

#[test]
fn scale_by_third() {
    let (s, _) = cantor(1);
    let t = scale_shift(&s, 1.0 / 3.0, &[0.0]).unwrap();
    let direct = GridSet::new(1, 1.0 / 9.0, vec![0.0], vec![[0.0, 1.0 / 3.0]], vec![vec![0], vec![2]])
        .unwrap();
    assert!(t.same_set(&direct, 1e-12));
}

#[test]
fn scale_identity() {
    let (s, _) = cantor(3);
    assert_eq!(scale_shift(&s, 1.0, &[0.0]).unwrap(), s);
    assert!(scale_shift(&s, 0.0, &[0.0]).is_err());
}

#[test]
fn scaled_by_three_matches_direct_build() {
    let (s, _) = cantor(4);
    let t = scale_shift(&s, 3.0, &[0.0]).unwrap();
    let direct = build_cantor(&CantorSpec::new_1d(3, &[0, 2], 4, [0.0, 3.0])).unwrap();
    assert!(t.same_set(&direct, 1e-12));
}

#[test]
fn thicken_small_radius_is_superset() {
    let (s, _) = cantor(3);
    let t = thicken(&s, 0.0);
    assert!(s.cubes().iter().all(|c| t.contains_index(c)));
}

#[test]
fn thickened_cantor_stays_regular() {
    let (s, mu) = cantor(3);
    let h = s.resolution();
    let base = check_regularity(&s, &mu, &RegularityQuery::new(cantor_delta(), h, 1.0, 8.0))
        .unwrap()
        .constant();
    let t = thicken(&s, h);
    let q = RegularityQuery::new(cantor_delta(), 2.0 * h, 1.0, 4.0 * base);
    let r = check_regularity(&t, &mu, &q).unwrap();
    assert!(r.pass, "{r:?} vs base {base}");
}

#[test]
fn full_interval_has_no_gap() {
    let full = GridSet::full(vec![[0.0, 1.0]], 1.0 / 27.0).unwrap();
    let c = Cube {
        corner: vec![0.0],
        side: 1.0,
    };
    assert_eq!(find_empty_subcube(&full, &c, 3).unwrap(), None);
}

#[test]
fn product_cantor_first_empty_child() {
    let s = build_cantor(&CantorSpec::product_2d(3, &[0, 2], 3, [0.0, 1.0])).unwrap();
    let c = Cube {
        corner: vec![0.0, 0.0],
        side: 1.0,
    };
    let e = find_empty_subcube(&s, &c, 3).unwrap().unwrap();
    assert_eq!(e.offset, vec![0, 1]);
    // Enumerating all nine children: exactly five miss the set.
    let empty = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .filter(|&(i, j)| {
            !s.cubes().iter().any(|c| {
                let m = s.cube_center(c);
                (m[0] * 3.0).floor() as i32 == i && (m[1] * 3.0).floor() as i32 == j
            })
        })
        .count();
    assert_eq!(empty, 5);
}

#[test]
fn cantor_is_porous() {
    let (s, _) = cantor(6);
    let r = check_porosity(&s, 3, &[0, 1, 2, 3, 4]).unwrap();
    assert!(r.porous(), "{:?}", r.failures);
    assert!((0..5).all(|n| r.porous_at(n)));
}

#[test]
fn full_square_not_porous() {
    let full = GridSet::full(vec![[-1.0, 1.0], [-1.0, 1.0]], 2.0 / 27.0).unwrap();
    let r = check_porosity(&full, 3, &[0]).unwrap();
    assert!(!r.porous_at(0));
    assert_eq!(r.failures.len(), 1);
}

#[test]
fn product_cantor_porous() {
    let s = build_cantor(&CantorSpec::product_2d(3, &[0, 2], 4, [0.0, 1.0])).unwrap();
    let r = check_porosity(&s, 3, &[0, 1, 2]).unwrap();
    assert!(r.porous());
}

#[test]
fn porosity_depth_out_of_range() {
    let (s, _) = cantor(2);
    assert!(check_porosity(&s, 3, &[2]).is_err());
    assert_eq!(max_porosity_depth(&s, 3), Some(1));
}

#[test]
fn scaling_preserves_constants() {
    let delta = cantor_delta();
    let (s, mu) = cantor(5);
    let h = s.resolution();
    let base = check_regularity(&s, &mu, &RegularityQuery::new(delta, h, 1.0, 8.0)).unwrap();
    for lambda in [1.0 / 3.0, 3.0] {
        let y = [0.7];
        let t = scale_shift(&s, lambda, &y).unwrap();
        let nu = mu.scale_shift(lambda, &y, delta).unwrap();
        let q = RegularityQuery::new(delta, lambda * h, lambda, 8.0);
        let r = check_regularity(&t, &nu, &q).unwrap();
        let ratio = r.constant() / base.constant();
        assert!((0.5..=2.0).contains(&ratio), "lambda {lambda}: ratio {ratio}");
    }
}

#[test]
fn scale_extension_bound() {
    let delta = cantor_delta();
    let (s, mu) = cantor(6);
    let h = s.resolution();
    let a1 = 0.25;
    let base = check_regularity(&s, &mu, &RegularityQuery::new(delta, h, a1, 8.0)).unwrap();
    for t in [2.0, 4.0] {
        let r = check_regularity(&s, &mu, &RegularityQuery::new(delta, h, t * a1, 8.0)).unwrap();
        assert!(r.constant_upper <= 2.0 * t * base.constant_upper);
        assert!(r.constant_lower <= 2.0 * t * base.constant_lower);
    }
}

#[test]
fn empty_subcube_guarantee() {
    let delta = cantor_delta();
    let (s, mu) = cantor(10);
    let h = s.resolution();
    let c_r = check_regularity(&s, &mu, &RegularityQuery::new(delta, h, 1.0, 8.0))
        .unwrap()
        .constant();
    for l in [36, lemma_l(1.0, delta, c_r).max(36)] {
        let mut checked = 0;
        for n in 0..10 {
            let side = 3f64.powi(-n);
            if side < l as f64 * h {
                break;
            }
            for i in 0..3i64.pow(n as u32) {
                let corner = i as f64 * side;
                if !s.contains_point(&[corner + 0.5 * side]) && !s.contains_point(&[corner]) {
                    continue;
                }
                let c = Cube {
                    corner: vec![corner],
                    side,
                };
                assert!(find_empty_subcube(&s, &c, l).unwrap().is_some(), "L={l} n={n} i={i}");
                checked += 1;
            }
        }
        assert!(checked > 0);
    }
}

#[test]
fn porosity_from_regularity() {
    let delta = cantor_delta();
    let (s, mu) = cantor(10);
    let h = s.resolution();
    let r = check_regularity(&s, &mu, &RegularityQuery::new(delta, h, 1.0, 8.0)).unwrap();
    assert!(r.pass);
    let l = lemma_l(1.0, delta, r.constant());
    let depths: Vec<u32> = (0..6)
        .filter(|&n| (l as f64).powi(-(n as i32) - 1) >= h)
        .collect();
    assert!(!depths.is_empty());
    let p = check_porosity(&s, l, &depths).unwrap();
    assert!(p.porous(), "L = {l}: {:?}", p.failures);
}

#[test]
fn json_round_trip_and_canonical_order() {
    let s = GridSet::new(
        1,
        0.5,
        vec![0.0],
        vec![[0.0, 2.0]],
        vec![vec![3], vec![0], vec![3]],
    )
    .unwrap();
    assert_eq!(s.cubes(), &[vec![0], vec![3]]);
    let js = serde_json::to_string(&s).unwrap();
    let back: GridSet = serde_json::from_str(&js).unwrap();
    assert_eq!(back, s);
    let bad = js.replace("[[0],[3]]", "[[0],[9]]");
    assert!(serde_json::from_str::<GridSet>(&bad).is_err());
}

#[test]
fn empty_set_error_message() {
    assert_eq!(Error::EmptySet.to_string(), "empty set has no regularity");
}

fn spec_strategy() -> impl Strategy<Value = CantorSpec> {
    (2u32..6, 0u32..4, 1usize..3).prop_flat_map(|(m, k, d)| {
        let alphabet = proptest::sample::subsequence((0..m).collect::<Vec<_>>(), 1..=m as usize);
        proptest::collection::vec(alphabet, d).prop_map(move |alphabets| CantorSpec {
            base: m,
            extent: vec![[0.0, 1.0]; alphabets.len()],
            alphabets,
            depth: k,
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cube_count_and_mass(spec in spec_strategy()) {
        let s = build_cantor(&spec).unwrap();
        prop_assert_eq!(s.len() as f64, spec.cube_count());
        let mu = natural_measure(&spec).unwrap();
        prop_assert!((mu.total() - 1.0).abs() < 1e-12);
        let again = build_cantor(&spec).unwrap();
        prop_assert_eq!(again.cubes(), s.cubes());
    }

    #[test]
    fn first_level_ancestor_mass(k in 1u32..5, m in 2u32..5) {
        let spec = CantorSpec::new_1d(m, &(0..m).step_by(2).collect::<Vec<_>>(), k, [0.0, 1.0]);
        let mu = natural_measure(&spec).unwrap();
        let a = spec.alphabets[0].len() as f64;
        let w = 1.0 / m as f64;
        prop_assert!((mu.mass_of_box(&[0.0], &[w]) - 1.0 / a).abs() < 1e-12);
    }

    #[test]
    fn scale_shift_round_trip(lambda in 0.1f64..10.0, y in -5.0f64..5.0) {
        let (s, _) = cantor(3);
        let t = scale_shift(&s, lambda, &[y]).unwrap();
        let back = scale_shift(&t, 1.0 / lambda, &[-y / lambda]).unwrap();
        prop_assert!(back.same_set(&s, 1e-9));
    }

    #[test]
    fn thicken_contains_neighbourhood(r in 0.0f64..0.2, x in 0.0f64..1.0) {
        let (s, _) = cantor(3);
        let t = thicken(&s, r);
        if s.contains_point(&[x]) {
            prop_assert!(t.contains_point(&[x + r.max(s.resolution()) * 0.999]));
            prop_assert!(t.contains_point(&[x - r.max(s.resolution()) * 0.999]));
        }
    }
}
