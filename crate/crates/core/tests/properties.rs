use kmax_core::embedding::{
    psi, rademacher_average, sphere_points, EmbeddingSpec, distortion_report, exhaustive_spec, psi_norm,
    reference_norm, ReferenceMode, select_sign_vectors,
};
use kmax_core::family::{affine_family, symmetric_group};
use kmax_core::field::{make_field, prime_power};
use kmax_core::order_stats::{decreasing_rearrangement, level_set};
use kmax_core::orlicz::{conjugate, luxemburg_norm, OrliczFunction};
use kmax_core::{BivariateFunction, WeightedSpace};
use proptest::prelude::*;

fn prime_powers_up_to(limit: u64) -> Vec<u64> {
    (2..=limit).filter(|&n| prime_power(n).is_some()).collect()
}

fn matrix_with_weights() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..5, 1usize..5).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(prop::collection::vec(-5i32..6, m), n)
                .prop_map(|rows| rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect()),
            prop::collection::vec(1u32..5, m).prop_map(|w| {
                let total: u32 = w.iter().sum();
                w.into_iter().map(|v| v as f64 / total as f64).collect()
            }),
        )
    })
}

fn vector(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_axioms(idx in 0usize..32, a in 0u32..64, b in 0u32..64, c in 0u32..64) {
        let orders = prime_powers_up_to(64);
        let f = make_field(orders[idx % orders.len()]).unwrap();
        let q = f.order();
        let (a, b, c) = (a % q, b % q, c % q);
        prop_assert_eq!(f.add(a, b), f.add(b, a));
        prop_assert_eq!(f.mul(a, b), f.mul(b, a));
        prop_assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
        prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
        prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
        prop_assert_eq!(f.add(a, f.neg(a)), 0);
        prop_assert_eq!(f.sub(f.add(a, b), b), a);
        prop_assert_eq!(f.mul(a, 1), a);
        if a != 0 {
            prop_assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
        }
    }

    #[test]
    fn rearrangement_is_equimeasurable((rows, weights) in matrix_with_weights(), s in -1.0f64..6.0) {
        let a = BivariateFunction::new(WeightedSpace::new(weights.clone()).unwrap(), rows.clone()).unwrap();
        let star = decreasing_rearrangement(&a);
        let direct: f64 = rows
            .iter()
            .flat_map(|r| r.iter().zip(&weights).filter(|(v, _)| v.abs() > s).map(|(_, w)| *w))
            .sum();
        prop_assert!((star.length_above(s) - direct).abs() < 1e-12);
        prop_assert!((star.total_length() - rows.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn level_set_mass_overshoots_minimally((rows, weights) in matrix_with_weights(), frac in 0.0f64..1.0) {
        let a = BivariateFunction::new(WeightedSpace::new(weights.clone()).unwrap(), rows.clone()).unwrap();
        let t = frac * rows.len() as f64;
        let set = level_set(&a, t).unwrap();
        prop_assert!(set.mass >= t - 1e-12);
        if let Some(last) = set.boundary {
            let w = weights[last % weights.len()];
            prop_assert!(set.mass - w < t + 1e-12);
        }
    }

    #[test]
    fn luxemburg_is_a_norm(x in vector(1..8), y in vector(1..8), lambda in 0.01f64..100.0, p in 1.0f64..4.0) {
        let len = x.len().min(y.len());
        let (x, y) = (&x[..len], &y[..len]);
        let m = OrliczFunction::power(p, 1.0).unwrap();
        let nx = luxemburg_norm(&m, x);
        let ny = luxemburg_norm(&m, y);
        let sum: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
        let scaled: Vec<f64> = x.iter().map(|v| v * lambda).collect();
        prop_assert!(luxemburg_norm(&m, &sum) <= (nx + ny) * (1.0 + 1e-9) + 1e-12);
        prop_assert!((luxemburg_norm(&m, &scaled) - lambda * nx).abs() <= 1e-9 * lambda * nx.max(1e-300));
    }

    #[test]
    fn larger_function_gives_larger_norm(x in vector(1..8), p in 1.0f64..3.0, k in 1.0f64..5.0) {
        let small = OrliczFunction::power(p, 1.0).unwrap();
        let large = OrliczFunction::power(p, k).unwrap();
        prop_assert!(luxemburg_norm(&small, &x) <= luxemburg_norm(&large, &x) * (1.0 + 1e-12));
    }

    #[test]
    fn conjugation_reverses_order(p in 1.2f64..3.0, k in 1.0f64..4.0, s in 0.0f64..2.0) {
        let small = conjugate(&OrliczFunction::power(p, 1.0).unwrap());
        let large = conjugate(&OrliczFunction::power(p, k).unwrap());
        prop_assert!(large.eval(s) <= small.eval(s) + 1e-9);
    }

    #[test]
    fn psi_is_linear(x in vector(5..6), y in vector(5..6), lambda in -5.0f64..5.0) {
        let (spec, _) = EmbeddingSpec::affine(vec![1.0, 0.5, 2.0, 1.5, 0.25], 0.25, &sphere_points(5, 4, 1), 1).unwrap();
        let px = psi(&spec, &x).unwrap();
        let py = psi(&spec, &y).unwrap();
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + lambda * b).collect();
        for ((s, a), b) in psi(&spec, &sum).unwrap().iter().zip(&px).zip(&py) {
            prop_assert!((s - (a + lambda * b)).abs() <= 1e-12 * (1.0 + a.abs() + (lambda * b).abs()));
        }
    }

    #[test]
    fn khintchine_bracketing(u in vector(1..17)) {
        let l2 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let avg = rademacher_average(&u).unwrap();
        prop_assert!(avg <= l2 * (1.0 + 1e-12));
        prop_assert!(avg >= l2 * std::f64::consts::FRAC_1_SQRT_2 * (1.0 - 1e-12));
    }
}

/// `(1/n!) sum_pi ave_{+-} |sum_i eps_i a_{pi(i)} x_i|`, by direct enumeration.
fn permutation_rademacher(a: &[f64], x: &[f64]) -> f64 {
    let group = symmetric_group(a.len()).unwrap();
    let maps: Vec<Vec<u16>> = group.maps().unwrap().map(|(m, _)| m.to_vec()).collect();
    let total: f64 = maps
        .iter()
        .map(|pi| {
            let v: Vec<f64> = pi.iter().zip(x).map(|(&p, &xi)| a[p as usize] * xi).collect();
            rademacher_average(&v).unwrap()
        })
        .sum();
    total / maps.len() as f64
}

#[test]
fn exhaustive_psi_matches_permutation_oracle() {
    let a = vec![0.5, 1.0, 2.0, 1.5];
    let spec = exhaustive_spec(a.clone()).unwrap();
    for x in sphere_points(4, 10, 2) {
        let got = psi_norm(&spec, &x).unwrap();
        let want = permutation_rademacher(&a, &x);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn distortion_ignores_coordinate_order_for_constant_weights() {
    let spec = exhaustive_spec(vec![1.0; 4]).unwrap();
    let x = [0.1, -0.7, 0.5, 0.3];
    let mut y = x;
    y.reverse();
    let rx = psi_norm(&spec, &x).unwrap() / reference_norm(spec.weights(), &x, ReferenceMode::Exact).unwrap();
    let ry = psi_norm(&spec, &y).unwrap() / reference_norm(spec.weights(), &y, ReferenceMode::Exact).unwrap();
    assert!((rx - ry).abs() < 1e-12);
}

/// Nested sign sets do not make the measured distortion monotone in `N`:
/// the prefix sequence below is recorded rather than asserted monotone.
#[test]
fn distortion_along_nested_sign_sets() {
    let n = 5;
    let weights = vec![1.0; n];
    let probes = sphere_points(n, 20, 7);
    let full = select_sign_vectors(n, 0.25, &probes, 3).unwrap();
    let family = affine_family(&make_field(n as u64).unwrap());
    let mut seen = Vec::new();
    for count in [4, 8, 16, 32, 64, full.signs.len()] {
        let count = count.min(full.signs.len());
        let spec = EmbeddingSpec::new(weights.clone(), full.signs[..count].to_vec(), family.clone()).unwrap();
        seen.push(distortion_report(&spec, 50, 11).unwrap().distortion);
    }
    assert!(seen.iter().all(|&d| d >= 1.0 && d.is_finite()));
    // Against the exhaustive average the last value is within the delta sandwich.
    assert!(*seen.last().unwrap() <= seen[0].max(2.0 * 1.25 / 0.75));
}
