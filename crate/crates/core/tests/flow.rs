use momentum_core::gradient_flow::{integrate_flow, trajectory_length, FlowTermination};
use momentum_core::problems::{synthetic, Fixture, MatrixFactorization, Problem};

#[test]
fn quadratic_flow_matches_exponential_decay() {
    let p = synthetic::<f64>(Fixture::Quadratic { dim: 2 }).unwrap();
    let beta = 0.5;
    let traj = integrate_flow(&p, &[1.0, -2.0], beta, 3.0, 0.0).unwrap();
    assert_eq!(traj.terminated, FlowTermination::Horizon);
    for t in [0.1, 0.77, 1.5, 3.0] {
        let x = traj.state_at(t);
        let decay = (-t / (1.0 - beta)).exp();
        assert!((x[0] - decay).abs() < 1e-8, "t={t}");
        assert!((x[1] + 2.0 * decay).abs() < 1e-8, "t={t}");
    }
    // Straight-line path: arc length is the displacement.
    let moved = 5f64.sqrt() * (1.0 - (-3.0f64 / (1.0 - beta)).exp());
    assert!((traj.total_length() - moved).abs() < 1e-8);
}

#[test]
fn energy_identity_on_factorization() {
    let p = MatrixFactorization::random(3, 3, 2, 8).unwrap();
    let x0: Vec<f64> = (0..p.dim()).map(|i| 0.3 * ((i as f64) * 1.7).sin()).collect();
    for beta in [0.0, 0.6] {
        let traj = integrate_flow(&p, &x0, beta, 2.0, 0.0).unwrap();
        let drop = p.value(&x0) - p.value(traj.final_state());
        let energy = traj.dissipated_energy(&p);
        assert!((drop - energy).abs() <= 1e-6 * (1.0 + drop.abs()), "beta {beta}: {drop} vs {energy}");
    }
}

#[test]
fn trajectory_length_flags_unfinished_flows() {
    let p = synthetic::<f64>(Fixture::Quartic { dim: 1 }).unwrap();
    let est = trajectory_length(&p, &[vec![1.0], vec![-0.5]], 0.0, 1e-3, 1e4).unwrap();
    assert!(!est.lower_bound_only);
    assert!((est.sigma - est.per_sample[0]).abs() < 1e-15);
    assert!(est.sigma < 1.0 && est.sigma > 0.9);
    let short = trajectory_length(&p, &[vec![1.0]], 0.0, 1e-12, 1.0).unwrap();
    assert!(short.lower_bound_only);
}
