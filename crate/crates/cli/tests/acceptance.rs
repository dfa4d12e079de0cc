//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Oracles are computed here independently of the library where a
//! closed form exists.

use std::f64::consts::SQRT_2;
use std::process::{Command, ExitCode};

use momentum_core::analysis::{check_rate, fit_trace, measure_length, Desingularizer, FitOptions};
use momentum_core::certificates::{
    certify_run, check_descent, check_gradient_bound, check_length_formula, length_constants,
    lyapunov_interval, CertifiedRun, CertifyOptions, InitialPair, StepRule,
};
use momentum_core::gradient_flow::tracking_error;
use momentum_core::linalg::{determinant, Mat};
use momentum_core::optimizer::{run, safe_alpha, safe_alpha_for, MomentumParams, StopRule};
use momentum_core::problems::{
    dense_hessian, estimate_lipschitz, synthetic, Fixture, LinearNetwork, LipschitzMode,
    LipschitzOptions, MatrixFactorization, MatrixSensing, Problem,
};
use momentum_core::saddle::{
    analyze_critical_point, characteristic_poly, characteristic_roots, classify_run,
    escape_experiment, momentum_jacobian, saddle_safe_alpha, Classification, CriticalTolerances,
    EscapeOptions, TrialOutcome,
};
use momentum_core::sampling::{gaussian_vec, seeded_rng};
use num_complex::Complex;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn central_difference(p: &dyn Problem<f64>, x: &[f64]) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 1e-6 * (1.0 + x[i].abs());
            xp[i] = x[i] + h;
            let fp = p.value(&xp);
            xp[i] = x[i] - h;
            let fm = p.value(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn families() -> Vec<Box<dyn Problem<f64>>> {
    vec![
        Box::new(MatrixFactorization::random(4, 3, 2, 11).unwrap()),
        Box::new(MatrixSensing::random(3, 3, 1, 6, 12).unwrap()),
        Box::new(LinearNetwork::random(vec![3, 4, 3, 2], 5, 13).unwrap()),
    ]
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    for (i, p) in families().iter().enumerate() {
        let mut rng = seeded_rng(100 + i as u64, 0);
        for _ in 0..100 {
            let x: Vec<f64> = (0..p.dim()).map(|_| rng.random_range(-1.5..1.5)).collect();
            let g = p.gradient(&x);
            let fd = central_difference(p.as_ref(), &x);
            let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
            let rel = norm(&diff) / norm(&fd).max(1e-8);
            worst = worst.max(rel);
        }
    }
    ensure(worst < 1e-6, format!("max relative error {worst:.3e}"))?;
    Ok(format!("3 families x 100 points, max relative error {worst:.2e}"))
}

struct Scenario {
    label: &'static str,
    problem: Box<dyn Problem<f64>>,
    x0: Vec<f64>,
    params: MomentumParams<f64>,
    radius: f64,
}

fn scenarios() -> Vec<Scenario> {
    let hb = MomentumParams::heavy_ball(1.0, 0.5).unwrap();
    let nag = MomentumParams::nesterov(1.0, 0.5).unwrap();
    let mut out = Vec::new();
    let random_start = |dim: usize, seed: u64, scale: f64| -> Vec<f64> {
        let mut rng = seeded_rng(seed, 7);
        gaussian_vec::<f64, _>(&mut rng, dim).into_iter().map(|v| scale * v).collect()
    };
    for (params, tag) in [(hb, "heavy_ball"), (nag, "nesterov")] {
        out.push(Scenario {
            label: if tag == "heavy_ball" { "quadratic/heavy_ball" } else { "quadratic/nesterov" },
            problem: Box::new(synthetic::<f64>(Fixture::Quadratic { dim: 2 }).unwrap()),
            x0: vec![1.0, 0.0],
            params,
            radius: 2.0,
        });
        out.push(Scenario {
            label: if tag == "heavy_ball" { "quartic/heavy_ball" } else { "quartic/nesterov" },
            problem: Box::new(synthetic::<f64>(Fixture::Quartic { dim: 2 }).unwrap()),
            x0: vec![0.8, -0.5],
            params,
            radius: 1.0,
        });
        let mf = MatrixFactorization::random(4, 4, 2, 21).unwrap();
        let dim = mf.dim();
        out.push(Scenario {
            label: if tag == "heavy_ball" { "factorization/heavy_ball" } else { "factorization/nesterov" },
            problem: Box::new(mf),
            x0: random_start(dim, 21, 0.5),
            params,
            radius: 2.0,
        });
        let ms = MatrixSensing::random(3, 3, 1, 6, 22).unwrap();
        let dim = ms.dim();
        out.push(Scenario {
            label: if tag == "heavy_ball" { "sensing/heavy_ball" } else { "sensing/nesterov" },
            problem: Box::new(ms),
            x0: random_start(dim, 22, 0.5),
            params,
            radius: 2.0,
        });
        let net = LinearNetwork::random(vec![3, 3, 3, 2], 6, 23).unwrap();
        let dim = net.dim();
        out.push(Scenario {
            label: if tag == "heavy_ball" { "network/heavy_ball" } else { "network/nesterov" },
            problem: Box::new(net),
            x0: random_start(dim, 23, 0.5),
            params,
            radius: 2.0,
        });
    }
    out
}

struct Certified {
    label: &'static str,
    problem: Box<dyn Problem<f64>>,
    run: CertifiedRun<f64>,
}

fn certified_runs() -> Vec<Certified> {
    scenarios()
        .into_iter()
        .map(|s| {
            let opts = CertifyOptions {
                mode: LipschitzMode::Sampled,
                lipschitz: LipschitzOptions {
                    seed: 5,
                    ..LipschitzOptions::default()
                },
                radius: s.radius,
                max_enlargements: 6,
                critical_values: 1,
            };
            let run = certify_run(
                s.problem.as_ref(),
                &InitialPair::at_rest(s.x0.clone()),
                &s.params,
                StepRule::Auto { fraction: 0.9 },
                &StopRule::iterations(1000),
                &opts,
            )
            .unwrap_or_else(|e| panic!("{}: {e}", s.label));
            Certified {
                label: s.label,
                problem: s.problem,
                run,
            }
        })
        .collect()
}

fn criterion_2(runs: &[Certified]) -> Outcome {
    let mut steps = 0;
    let mut min_slack = f64::INFINITY;
    for c in runs {
        let t = &c.run.trace;
        ensure(c.run.contained, format!("{}: iterates left the certified ball", c.label))?;
        ensure(t.iterations() >= 1000, format!("{}: only {} iterations", c.label, t.iterations()))?;
        let rep = check_descent(t, &c.run.certificate);
        ensure(
            rep.summary.failed == 0 && rep.summary.uncertified == 0,
            format!("{}: {} failed, first at {:?}", c.label, rep.summary.failed, rep.summary.first_failure),
        )?;
        steps += rep.summary.passed;
        min_slack = min_slack.min(rep.summary.min_slack.unwrap_or(0.0));
    }
    Ok(format!("{} runs, {steps} steps all pass, min slack {min_slack:.2e}", runs.len()))
}

fn criterion_3(runs: &[Certified]) -> Outcome {
    let mut steps = 0;
    for c in runs {
        let rep = check_gradient_bound(c.problem.as_ref(), &c.run.trace, &c.run.certificate);
        ensure(
            rep.grad_summary.failed == 0 && rep.lyapunov_summary.failed == 0,
            format!(
                "{}: b_alpha failures {}, c2 failures {}",
                c.label, rep.grad_summary.failed, rep.lyapunov_summary.failed
            ),
        )?;
        ensure(rep.grad_summary.uncertified == 0, format!("{}: uncertified steps", c.label))?;
        steps += rep.steps.len();
    }
    Ok(format!("{steps} steps pass both gradient bounds"))
}

fn criterion_4() -> Outcome {
    let p = MomentumParams::<f64>::nesterov(0.5, 0.5).unwrap();
    let iv = lyapunov_interval(2.0, &p).map_err(|e| e.to_string())?;
    // Hand substitution: λ⁻ = (1 + 1)/4, λ⁺ = 1, λ = (λ⁻ + λ⁺)/2.
    let got = [iv.lambda_minus, iv.lambda_plus, iv.lambda_mid, iv.c1];
    let want = [0.5, 1.0, 0.75, 0.25];
    for (g, w) in got.iter().zip(want) {
        ensure((g - w).abs() <= 1e-15, format!("interval {got:?} != {want:?}"))?;
    }
    let sa = safe_alpha_for(1.0f64, 0.5, 0.0).map_err(|e| e.to_string())?;
    ensure((sa - 0.3).abs() <= 1e-15, format!("safe_alpha {sa}"))?;
    let lc = length_constants(1.0, 1.0, &p, 1).map_err(|e| e.to_string())?;
    let c3 = 8.0 * SQRT_2 * 4.0 / 0.75;
    ensure(((lc.c3 - c3) / c3).abs() <= 1e-12, format!("c3 {} vs {c3}", lc.c3))?;
    let mut rng = seeded_rng(44, 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let beta: f64 = rng.random_range(-0.95..0.95);
        let gamma: f64 = rng.random_range(-2.0..2.0);
        let m: f64 = rng.random_range(0.1..50.0);
        let bound = safe_alpha_for(m, beta, gamma).unwrap();
        let alpha = bound * rng.random_range(0.01..1.0);
        let params = MomentumParams::generic(alpha, beta, gamma).unwrap();
        let iv = lyapunov_interval(m, &params).map_err(|e| e.to_string())?;
        let mid = (beta * beta + 1.0 + m * beta * beta * alpha) / (4.0 * alpha);
        let rel = (((iv.lambda_minus + iv.lambda_plus) / 2.0 - mid) / mid).abs();
        worst = worst.max(rel);
        ensure(iv.c1 > 0.0, "c1 not positive inside the admissible range")?;
    }
    ensure(worst <= 1e-12, format!("midpoint identity error {worst:.2e}"))?;
    Ok(format!("golden values exact; midpoint identity max rel err {worst:.1e}"))
}

fn criterion_5(runs: &[Certified]) -> Outcome {
    let mut worst = 0.0f64;
    for c in runs {
        let length = measure_length(&c.run.trace).total;
        let rep = check_rate(&c.run.trace, &c.run.certificate, length);
        ensure(
            rep.pass && rep.telescoping_ok,
            format!("{}: sup {} > c_alpha {}", c.label, rep.sup, rep.c_alpha),
        )?;
        worst = worst.max(rep.sup / rep.c_alpha);
    }
    Ok(format!("{} runs, max sup/c_alpha {worst:.3e}", runs.len()))
}

fn criterion_6() -> Outcome {
    let p = synthetic::<f64>(Fixture::Quadratic { dim: 2 }).unwrap();
    let x0 = [1.0, 0.0];
    let base = MomentumParams::heavy_ball(1.0, 0.5).unwrap();
    let est = estimate_lipschitz(
        &p,
        &x0,
        2.0,
        LipschitzMode::Sampled,
        &LipschitzOptions { seed: 6, spread: 0.5, ..LipschitzOptions::default() },
    )
    .map_err(|e| e.to_string())?;
    let alpha_bar = safe_alpha(est.grad_lipschitz, &base).unwrap();
    let psi = Desingularizer::power(2.0, 0.5).unwrap();
    let mut ratios = Vec::new();
    for alpha in [alpha_bar, alpha_bar / 2.0, alpha_bar / 4.0] {
        let params = base.with_alpha(alpha).unwrap();
        let trace = run(&p, &x0, &x0, &params, &StopRule::iterations(2000)).unwrap();
        let cert = momentum_core::certificates::Certificate::from_estimate(&est, params, 1).unwrap();
        let rep = check_length_formula(&trace, &cert, &psi).map_err(|e| e.to_string())?;
        ensure(rep.certified, format!("alpha {alpha}: run not certified"))?;
        ensure(
            rep.length <= rep.unscaled_bound && rep.pass,
            format!("alpha {alpha}: length {} vs bound {}", rep.length, rep.unscaled_bound),
        )?;
        ratios.push(rep.length / rep.unscaled_bound);
    }
    Ok(format!("length/bound ratios {ratios:.3?} over the alpha ladder"))
}

fn criterion_7() -> Outcome {
    let quad = synthetic::<f64>(Fixture::Quadratic { dim: 2 }).unwrap();
    let gd = MomentumParams::heavy_ball(0.05, 0.5).unwrap();
    let t = run(&quad, &[1.0, 0.5], &[1.0, 0.5], &gd, &StopRule::iterations(300)).unwrap();
    let fit_q = fit_trace(&t, Some(0.0), &FitOptions::default()).map_err(|e| e.to_string())?;
    let quart = synthetic::<f64>(Fixture::Quartic { dim: 1 }).unwrap();
    let t = run(&quart, &[1.0], &[1.0], &MomentumParams::heavy_ball(0.01, 0.5).unwrap(), &StopRule::iterations(3000))
        .unwrap();
    let fit_4 = fit_trace(&t, Some(0.0), &FitOptions::default()).map_err(|e| e.to_string())?;
    ensure((fit_q.theta - 0.5).abs() <= 0.02, format!("quadratic theta {}", fit_q.theta))?;
    ensure((fit_4.theta - 0.25).abs() <= 0.02, format!("quartic theta {}", fit_4.theta))?;
    Ok(format!("theta quadratic {:.4}, quartic {:.4}", fit_q.theta, fit_4.theta))
}

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn criterion_8() -> Outcome {
    let p = synthetic::<f64>(Fixture::Quadratic { dim: 2 }).unwrap();
    let x0 = [1.0, 0.0];
    let ladder = [0.1, 0.05, 0.025];
    let mut slopes = Vec::new();
    let mut rest_slopes = Vec::new();
    for beta in [0.0, 0.5] {
        let mut maxes = Vec::new();
        let mut rest_maxes = Vec::new();
        for alpha in ladder {
            let params = MomentumParams::heavy_ball(alpha, beta).unwrap();
            // x_{-1} chosen so the first displacement matches the flow velocity.
            let s = alpha / (1.0 - beta);
            let x_minus1 = [x0[0] + s * x0[0], x0[1] + s * x0[1]];
            let trace = run(&p, &x_minus1, &x0, &params, &StopRule::iterations(100)).unwrap();
            let rep = tracking_error(&p, &trace, 1.0).map_err(|e| e.to_string())?;
            if beta == 0.0 && alpha == 0.1 {
                ensure(rep.errors.len() == 11, "expected k = 0..10")?;
                for (k, e) in rep.errors.iter().enumerate() {
                    let exact = (0.9f64.powi(k as i32) - (-0.1 * k as f64).exp()).abs();
                    ensure((e - exact).abs() <= 1e-6, format!("k={k}: {e} vs {exact}"))?;
                }
            }
            maxes.push(rep.max_error);
            let rest = run(&p, &x0, &x0, &params, &StopRule::iterations(100)).unwrap();
            rest_maxes.push(tracking_error(&p, &rest, 1.0).map_err(|e| e.to_string())?.max_error);
        }
        ensure(maxes.windows(2).all(|w| w[1] < w[0]), format!("beta {beta}: not decreasing {maxes:?}"))?;
        let slope = log_slope(&ladder, &maxes);
        ensure(slope >= 0.9, format!("beta {beta}: slope {slope:.3} from {maxes:?}"))?;
        slopes.push(slope);
        rest_slopes.push(log_slope(&ladder, &rest_maxes));
    }
    Ok(format!(
        "log-log slopes {slopes:.3?} (start at rest: {rest_slopes:.3?}); closed form matched at beta=0, alpha=0.1"
    ))
}

fn criterion_9() -> Outcome {
    let hb = MomentumParams::<f64>::heavy_ball(0.1, 0.5).unwrap();
    let (r1, _) = characteristic_roots(-1.0, &hb);
    ensure((r1.re - 1.1742).abs() <= 1e-4 && r1.im == 0.0, format!("max root {r1}"))?;

    let mf = MatrixFactorization::random(3, 3, 2, 31).unwrap();
    let mut rng = seeded_rng(32, 0);
    let x: Vec<f64> = gaussian_vec(&mut rng, mf.dim());
    let h = dense_hessian(&mf, &x);
    let eigs = momentum_core::linalg::symmetric_eigenvalues(&h);
    let params = MomentumParams::generic(0.05, 0.6, 0.3).unwrap();
    let jac = momentum_jacobian(&h, &params);
    let n2 = jac.rows();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let lambda: f64 = rng.random_range(-2.0..2.0);
        let shifted = Mat::from_fn(n2, n2, |i, j| if i == j { lambda } else { 0.0 } - jac[(i, j)]);
        let det = determinant(&shifted);
        let prod: f64 = eigs
            .iter()
            .map(|&d| characteristic_poly(d, &params, Complex::new(lambda, 0.0)).re)
            .product();
        worst = worst.max((det - prod).abs() / prod.abs());
    }
    ensure(worst < 1e-8, format!("product identity rel err {worst:.2e}"))?;

    let mut tested = 0;
    for &beta in &[-0.7, -0.2, 0.3, 0.9] {
        for &gamma in &[0.0, 0.5, 1.5] {
            for &alpha in &[0.01, 0.1, 0.5] {
                let params = MomentumParams::generic(alpha, beta, gamma).unwrap();
                for &d in &[-10.0, -1.0, -1e-3] {
                    let (r, _) = characteristic_roots(d, &params);
                    let max_real = [characteristic_roots(d, &params).0, characteristic_roots(d, &params).1]
                        .iter()
                        .filter(|z| z.im == 0.0)
                        .map(|z| z.re)
                        .fold(f64::NEG_INFINITY, f64::max);
                    ensure(max_real > 1.0, format!("d={d}: roots {r}"))?;
                    tested += 1;
                }
            }
        }
    }
    Ok(format!("max root {:.5}; product identity rel err {worst:.1e} (dim {}); {tested} negative curvatures unstable", r1.re, mf.dim()))
}

fn escape_case(
    label: &str,
    p: &dyn Problem<f64>,
    saddle: &[f64],
    escape_radius: Option<f64>,
) -> Result<String, String> {
    let probe = MomentumParams::heavy_ball(1.0, 0.5).unwrap();
    let analysis = analyze_critical_point(p, saddle, &probe, &CriticalTolerances::default())
        .map_err(|e| e.to_string())?;
    ensure(
        analysis.classification == Classification::StrictSaddle,
        format!("{label}: classified {}", analysis.classification),
    )?;
    let est = estimate_lipschitz(
        p,
        saddle,
        p.suggested_radius(),
        LipschitzMode::Sampled,
        &LipschitzOptions { seed: 9, spread: 0.5, ..LipschitzOptions::default() },
    )
    .map_err(|e| e.to_string())?;
    let bound = safe_alpha(est.grad_lipschitz, &probe)
        .unwrap()
        .min(saddle_safe_alpha(analysis.curvature_bound(), &probe).unwrap());
    let params = probe.with_alpha(0.9 * bound).unwrap();
    let opts = EscapeOptions { escape_radius, ..EscapeOptions::default() };
    let exp = escape_experiment(p, saddle, &params, 1e-3, 100, 2024, &opts).map_err(|e| e.to_string())?;
    ensure(
        exp.escape_fraction == 1.0 && exp.at_saddle == 0,
        format!(
            "{label}: escape fraction {}, {} at saddle, {} inconclusive",
            exp.escape_fraction, exp.at_saddle, exp.inconclusive
        ),
    )?;
    Ok(format!("{label} escape 100/100 (alpha {:.4})", params.alpha()))
}

fn criterion_10() -> Outcome {
    let quad = synthetic::<f64>(Fixture::IndefiniteQuadratic).unwrap();
    let a = escape_case("indefinite quadratic", &quad, &[0.0, 0.0], Some(1.0))?;
    let mf = MatrixFactorization::random(3, 3, 1, 41).unwrap();
    let origin = vec![0.0; mf.dim()];
    let b = escape_case("factorization origin", &mf, &origin, None)?;
    let hb = MomentumParams::heavy_ball(0.1, 0.5).unwrap();
    let axis = classify_run(&quad, &[0.0, 0.0], &[0.3, 0.0], &[0.3, 0.0], &hb, 1e-3, 0, &EscapeOptions::default())
        .map_err(|e| e.to_string())?;
    ensure(axis.outcome == TrialOutcome::AtSaddle, format!("stable axis ended {:?}", axis.outcome))?;
    Ok(format!("{a}; {b}; stable-axis start converges to the saddle"))
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("exp.toml");
    std::fs::write(
        &config,
        r#"
[problem]
kind = "matrix_factorization"
m = 3
n = 3
r = 1
seed = 5

[params]
preset = "nesterov"
alpha = "auto"
beta = 0.5

[init]
mode = "random"
scale = 0.5

[stop]
max_iters = 300
"#,
    )
    .map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_momentum");
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("out{i}"));
        let status = Command::new(bin)
            .args(["run", "--quiet", "--seed", "77", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.code() == Some(0), format!("run {i} exited with {status}"))?;
        outputs.push(std::fs::read(out.join("trace.csv")).map_err(|e| e.to_string())?);
    }
    ensure(outputs[0] == outputs[1], "trace.csv differs between invocations")?;
    Ok(format!("two invocations wrote identical trace.csv ({} bytes)", outputs[0].len()))
}

fn main() -> ExitCode {
    let runs = certified_runs();
    let results: Vec<(usize, Outcome)> = vec![
        (1, criterion_1()),
        (2, criterion_2(&runs)),
        (3, criterion_3(&runs)),
        (4, criterion_4()),
        (5, criterion_5(&runs)),
        (6, criterion_6()),
        (7, criterion_7()),
        (8, criterion_8()),
        (9, criterion_9()),
        (10, criterion_10()),
        (11, criterion_11()),
    ];
    let mut failed = 0;
    for (n, r) in &results {
        match r {
            Ok(detail) => println!("criterion {n:>2}: PASS  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2}: FAIL  {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
