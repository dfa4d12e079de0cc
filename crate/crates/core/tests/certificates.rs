use momentum_core::certificates::{
    check_descent, check_gradient_bound, check_step_bound, lyapunov_interval, Certificate,
};
use momentum_core::linalg::dot;
use momentum_core::optimizer::{run, safe_alpha, MomentumParams, StopRule};
use momentum_core::problems::Problem;
use proptest::prelude::*;

/// `½ Σ dᵢxᵢ²` with `0 ≤ dᵢ ≤ M`: the exact gradient Lipschitz constant is
/// `max dᵢ`.
struct Diagonal(Vec<f64>);

impl Problem<f64> for Diagonal {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn name(&self) -> &str {
        "diagonal"
    }
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().zip(&self.0).map(|(v, d)| d * v * v).sum::<f64>()
    }
    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, v), d) in out.iter_mut().zip(x).zip(&self.0) {
            *o = d * v;
        }
    }
    fn suggested_radius(&self) -> f64 {
        1.0
    }
}

fn valid_params() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (0.1f64..10.0, -0.95f64..0.95, -3.0f64..3.0, 0.01f64..1.0).prop_map(|(m, beta, gamma, frac)| {
        let bound = momentum_core::optimizer::safe_alpha_for(m, beta, gamma).unwrap();
        (m, beta, gamma, frac * bound)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn midpoint_identity((m, beta, gamma, alpha) in valid_params()) {
        let params = MomentumParams::generic(alpha, beta, gamma).unwrap();
        let iv = lyapunov_interval(m, &params).unwrap();
        let want = (beta * beta + 1.0 + m * beta * beta * alpha) / (4.0 * alpha);
        let got = 0.5 * (iv.lambda_minus + iv.lambda_plus);
        prop_assert!((got - want).abs() <= 1e-12 * want.abs(), "{got} vs {want}");
        prop_assert!((iv.lambda_mid - want).abs() <= 1e-12 * want.abs());
    }

    #[test]
    fn admissible_step_gives_positive_margin((m, beta, gamma, alpha) in valid_params()) {
        let params = MomentumParams::generic(alpha, beta, gamma).unwrap();
        let iv = lyapunov_interval(m, &params).unwrap();
        prop_assert!(iv.c1 > 0.0, "c1 = {}", iv.c1);
        prop_assert!(iv.lambda_minus < iv.lambda_mid && iv.lambda_mid < iv.lambda_plus);
    }

    #[test]
    fn exact_constants_certify_diagonal_quadratics(
        curv in prop::collection::vec(0.0f64..4.0, 1..6),
        x0 in prop::collection::vec(-2.0f64..2.0, 6),
        beta in -0.9f64..0.9,
        gamma in -2.0f64..2.0,
        frac in 0.05f64..1.0,
    ) {
        let n = curv.len();
        let m = curv.iter().copied().fold(1e-3, f64::max);
        let p = Diagonal(curv);
        let x0 = &x0[..n];
        let probe = MomentumParams::generic(1.0, beta, gamma).unwrap();
        let alpha = frac * safe_alpha(m, &probe).unwrap();
        let params = MomentumParams::generic(alpha, beta, gamma).unwrap();
        let trace = run(&p, x0, x0, &params, &StopRule::iterations(200)).unwrap();
        // L bounds ‖∇f‖ on the sublevel set, which contains every iterate.
        let l = m * dot(x0, x0).sqrt() * 4.0 / (1.0 - beta.abs()).sqrt() + 1.0;
        let cert = Certificate::new(m, l, params, 1).unwrap();
        let d = check_descent(&trace, &cert);
        prop_assert_eq!(d.summary.failed, 0, "first failure at {:?}", d.summary.first_failure);
        let g = check_gradient_bound(&p, &trace, &cert);
        prop_assert_eq!(g.grad_summary.failed, 0);
        prop_assert_eq!(g.lyapunov_summary.failed, 0);
    }
}

#[test]
fn step_bound_holds_on_a_bounded_gradient_field() {
    // f(x) = √(1 + ‖x‖²) has ‖∇f‖ < 1 everywhere.
    struct Soft;
    impl Problem<f64> for Soft {
        fn dim(&self) -> usize {
            2
        }
        fn name(&self) -> &str {
            "soft"
        }
        fn value(&self, x: &[f64]) -> f64 {
            (1.0 + dot(x, x)).sqrt()
        }
        fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
            let s = (1.0 + dot(x, x)).sqrt();
            out[0] = x[0] / s;
            out[1] = x[1] / s;
        }
        fn suggested_radius(&self) -> f64 {
            1.0
        }
    }
    let params = MomentumParams::heavy_ball(0.2, 0.7).unwrap().with_delta(3.0).unwrap();
    let x0 = [4.0, -3.0];
    let x_minus1 = [4.0 + 0.6 * 0.6, -3.0 - 0.6 * 0.8];
    let trace = run(&Soft, &x_minus1, &x0, &params, &StopRule::iterations(400)).unwrap();
    assert!(trace.initial_velocity_ok());
    let cert = Certificate::new(1.0, 1.0, params, 1).unwrap();
    let rep = check_step_bound(&trace, &cert);
    assert_eq!(rep.summary.failed, 0);
    approx::assert_relative_eq!(rep.delta1, 3.0 + 1.0 / 0.3, max_relative = 1e-15);
}
