use momentum_core::linalg::dot;
use momentum_core::problems::{
    estimate_lipschitz, synthetic, Fixture, LinearNetwork, LipschitzMode, LipschitzOptions,
    MatrixFactorization, MatrixSensing, Problem,
};
use momentum_core::sampling::{gaussian_vec, seeded_rng};
use proptest::prelude::*;

fn family(which: u8, seed: u64) -> Box<dyn Problem<f64>> {
    match which % 4 {
        0 => Box::new(MatrixFactorization::random(4, 3, 2, seed).unwrap()),
        1 => Box::new(MatrixSensing::random(3, 4, 2, 7, seed).unwrap()),
        2 => Box::new(LinearNetwork::random(vec![3, 4, 2, 2], 5, seed).unwrap()),
        _ => Box::new(synthetic::<f64>(Fixture::Quartic { dim: 3 }).unwrap()),
    }
}

/// Fourth-order central difference of `f` along coordinate `i`.
fn fd_partial(p: &dyn Problem<f64>, x: &[f64], i: usize) -> f64 {
    let h = 1e-4 * (1.0 + x[i].abs());
    let at = |s: f64| {
        let mut y = x.to_vec();
        y[i] += s * h;
        p.value(&y)
    };
    (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * h)
}

fn point(p: &dyn Problem<f64>, seed: u64, scale: f64) -> Vec<f64> {
    gaussian_vec::<f64, _>(&mut seeded_rng(seed, 7), p.dim())
        .into_iter()
        .map(|v| scale * v)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradient_matches_finite_differences(which in 0u8..4, seed in 0u64..1000, scale in 0.1f64..1.5) {
        let p = family(which, seed);
        let x = point(p.as_ref(), seed, scale);
        let g = p.gradient(&x);
        let gnorm = dot(&g, &g).sqrt();
        for (i, gi) in g.iter().enumerate() {
            let fd = fd_partial(p.as_ref(), &x, i);
            prop_assert!((gi - fd).abs() <= 1e-6 * (1.0 + gnorm), "{}: coord {i}: {gi} vs {fd}", p.name());
        }
    }

    #[test]
    fn hessian_vector_products_are_symmetric(which in 0u8..4, seed in 0u64..1000) {
        let p = family(which, seed);
        let x = point(p.as_ref(), seed, 1.0);
        let u = point(p.as_ref(), seed + 1, 1.0);
        let v = point(p.as_ref(), seed + 2, 1.0);
        let hu = p.hessian_vec(&x, &u).expect("benchmarks provide Hessian products");
        let hv = p.hessian_vec(&x, &v).unwrap();
        let (a, b) = (dot(&v, &hu), dot(&u, &hv));
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn hessian_vector_product_matches_gradient_difference(which in 0u8..4, seed in 0u64..1000) {
        let p = family(which, seed);
        let x = point(p.as_ref(), seed, 1.0);
        let v = point(p.as_ref(), seed + 3, 1.0);
        let hv = p.hessian_vec(&x, &v).unwrap();
        let h = 1e-5;
        let shifted = |s: f64| -> Vec<f64> {
            let y: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + s * h * b).collect();
            p.gradient(&y)
        };
        let (gp, gm) = (shifted(1.0), shifted(-1.0));
        let scale = 1.0 + dot(&hv, &hv).sqrt();
        for i in 0..p.dim() {
            let fd = (gp[i] - gm[i]) / (2.0 * h);
            prop_assert!((hv[i] - fd).abs() <= 1e-5 * scale, "coord {i}: {} vs {fd}", hv[i]);
        }
    }

    #[test]
    fn sampled_estimate_is_monotone_in_radius(which in 0u8..4, seed in 0u64..200, r1 in 0.1f64..1.0, grow in 1.0f64..4.0) {
        let p = family(which, seed);
        let x0 = point(p.as_ref(), seed, 0.5);
        let opts = LipschitzOptions { pairs: 50, seed, ..LipschitzOptions::default() };
        let mut est = estimate_lipschitz(p.as_ref(), &x0, r1, LipschitzMode::Sampled, &opts).unwrap();
        let (l1, m1) = (est.grad_bound, est.grad_lipschitz);
        est.extend(p.as_ref(), r1 * grow, seed + 1).unwrap();
        prop_assert!(est.grad_bound >= l1 && est.grad_lipschitz >= m1);
        prop_assert_eq!(est.radius, r1 * grow);
    }
}

#[test]
fn analytic_bounds_dominate_sampled_maxima() {
    let sensing = family(1, 5);
    let x0 = point(sensing.as_ref(), 5, 0.5);
    let err = estimate_lipschitz(sensing.as_ref(), &x0, 1.0, LipschitzMode::Analytic, &LipschitzOptions::default());
    assert!(err.is_err());
    for which in [0u8, 3] {
        let p = family(which, 5);
        let x0 = point(p.as_ref(), 5, 0.5);
        let opts = LipschitzOptions { pairs: 400, safety_factor: 1.0, ..LipschitzOptions::default() };
        let sampled = estimate_lipschitz(p.as_ref(), &x0, 1.0, LipschitzMode::Sampled, &opts).unwrap();
        let analytic = estimate_lipschitz(p.as_ref(), &x0, 1.0, LipschitzMode::Analytic, &opts).unwrap();
        assert!(analytic.grad_bound >= sampled.sampled_grad_max, "{}", p.name());
        assert!(analytic.grad_lipschitz >= sampled.sampled_quotient_max, "{}", p.name());
    }
}

#[test]
fn quadratic_fixture_has_unit_curvature() {
    let p = synthetic::<f64>(Fixture::Quadratic { dim: 3 }).unwrap();
    let x = [0.3, -1.0, 2.0];
    assert_eq!(p.gradient(&x), x.to_vec());
    assert_eq!(p.value(&x), 0.5 * dot(&x, &x));
}
