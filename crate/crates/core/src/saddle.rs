//! Linear stability of the momentum map at critical points.
//!
//! At a fixed point `(x, x)` with Hessian eigenvalues `d_i`, the Jacobian of
//! `F(x_k, x_{k−1}) = (x_{k+1}, x_k)` has characteristic polynomial
//! `∏ᵢ φ_i(λ)` with `φ_i(λ) = λ² + [α(1+γ)d_i − (1+β)]λ + β − αγd_i`.
//! Since `φ_i(1) = αd_i`, every negative curvature direction yields a real
//! root above one.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist, lanczos_extremes, norm, symmetric_eigenvalues, Mat};
use crate::optimizer::{run, MomentumParams, StopReason, StopRule};
use crate::problems::{dense_hessian, Problem};
use crate::sampling::{gaussian_vec, seeded_rng, uniform_in_ball};
use crate::scalar::Real;

/// Roots of `φ(λ)` for curvature `d`, larger modulus first.
///
/// Real roots use `q = −(b + sign(b)√disc)/2`, `r₁ = q`, `r₂ = c/q`, which
/// avoids cancellation.
pub fn characteristic_roots<T: Real>(d: T, params: &MomentumParams<T>) -> (Complex<T>, Complex<T>) {
    let (alpha, beta, gamma) = (params.alpha(), params.beta(), params.gamma());
    let b = alpha * (T::one() + gamma) * d - (T::one() + beta);
    let c = beta - alpha * gamma * d;
    let half = T::lit(0.5);
    let disc = b * b - T::lit(4.0) * c;
    let (r1, r2) = if disc >= T::zero() {
        let sq = disc.sqrt();
        let q = -(b + if b >= T::zero() { sq } else { -sq }) * half;
        if q == T::zero() {
            (Complex::new(T::zero(), T::zero()), Complex::new(T::zero(), T::zero()))
        } else {
            (Complex::new(q, T::zero()), Complex::new(c / q, T::zero()))
        }
    } else {
        let im = (-disc).sqrt() * half;
        (Complex::new(-b * half, im), Complex::new(-b * half, -im))
    };
    if r1.norm() >= r2.norm() {
        (r1, r2)
    } else {
        (r2, r1)
    }
}

/// `φ(λ)` for curvature `d`, evaluated at a complex point.
pub fn characteristic_poly<T: Real>(d: T, params: &MomentumParams<T>, lambda: Complex<T>) -> Complex<T> {
    let (alpha, beta, gamma) = (params.alpha(), params.beta(), params.gamma());
    let b = alpha * (T::one() + gamma) * d - (T::one() + beta);
    let c = beta - alpha * gamma * d;
    lambda * lambda + lambda * b + c
}

/// Jacobian of the momentum map at `(x, x)` given `H = ∇²f(x)`:
/// `[[(1+β)I − α(1+γ)H, −βI + αγH], [I, 0]]`.
pub fn momentum_jacobian<T: Real>(hessian: &Mat<T>, params: &MomentumParams<T>) -> Mat<T> {
    let n = hessian.rows();
    let (alpha, beta, gamma) = (params.alpha(), params.beta(), params.gamma());
    Mat::from_fn(2 * n, 2 * n, |i, j| {
        let id = |a: usize, b: usize| if a == b { T::one() } else { T::zero() };
        match (i < n, j < n) {
            (true, true) => (T::one() + beta) * id(i, j) - alpha * (T::one() + gamma) * hessian[(i, j)],
            (true, false) => -beta * id(i, j - n) + alpha * gamma * hessian[(i, j - n)],
            (false, true) => id(i - n, j),
            (false, false) => T::zero(),
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    LocalMinCandidate,
    StrictSaddle,
    Degenerate,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::LocalMinCandidate => "local_min_candidate",
            Classification::StrictSaddle => "strict_saddle",
            Classification::Degenerate => "degenerate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    Dense,
    /// Extreme eigenvalues only.
    Lanczos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalTolerances {
    pub grad_tol: f64,
    /// Largest dimension assembled densely.
    pub dense_limit: usize,
    pub lanczos_steps: usize,
}

impl Default for CriticalTolerances {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            dense_limit: 400,
            lanczos_steps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CurvatureRoots<T> {
    pub d: T,
    pub roots: (Complex<T>, Complex<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CriticalPointAnalysis<T> {
    pub point: Vec<T>,
    pub grad_norm: T,
    /// Ascending; only the extremes when `method` is Lanczos.
    pub hessian_eigs: Vec<T>,
    pub method: EigenMethod,
    /// `1e-8(1 + ‖H‖)` with `‖H‖` the largest eigenvalue magnitude.
    pub tol_eig: T,
    pub classification: Classification,
    pub roots: Vec<CurvatureRoots<T>>,
    pub map_spectral_radius: T,
    /// `(i, root)` for real roots above one.
    pub unstable_roots: Vec<(usize, T)>,
}

impl<T: Real> CriticalPointAnalysis<T> {
    /// Largest curvature magnitude `max|d_i|`.
    pub fn curvature_bound(&self) -> T {
        self.hessian_eigs.iter().fold(T::zero(), |m, d| m.max(d.abs()))
    }
}

/// Hessian spectrum, characteristic roots and classification at `x`.
pub fn analyze_critical_point<T: Real, P: Problem<T> + ?Sized>(
    p: &P,
    x: &[T],
    params: &MomentumParams<T>,
    tols: &CriticalTolerances,
) -> Result<CriticalPointAnalysis<T>> {
    crate::error::check_len("critical point", p.dim(), x.len())?;
    let grad_norm = norm(&p.gradient(x));
    let grad_tol = T::lit(tols.grad_tol);
    if !(grad_norm <= grad_tol) {
        return Err(Error::NotCritical {
            grad_norm: grad_norm.to_f64_lossy(),
            tol: tols.grad_tol,
        });
    }
    let n = p.dim();
    let (hessian_eigs, method) = if n <= tols.dense_limit {
        (symmetric_eigenvalues(&dense_hessian(p, x)), EigenMethod::Dense)
    } else {
        let mut rng = seeded_rng(0, 0);
        let start: Vec<T> = gaussian_vec(&mut rng, n);
        let apply = |v: &[T]| {
            p.hessian_vec(x, v)
                .unwrap_or_else(|| crate::problems::finite_difference_hessian_vec(p, x, v))
        };
        let (lo, hi) = lanczos_extremes(apply, n, tols.lanczos_steps, &start);
        (vec![lo, hi], EigenMethod::Lanczos)
    };
    let h_norm = hessian_eigs.iter().fold(T::zero(), |m, d| m.max(d.abs()));
    let tol_eig = T::lit(1e-8) * (T::one() + h_norm);
    let d_min = hessian_eigs[0];
    let classification = if d_min < -tol_eig {
        Classification::StrictSaddle
    } else if d_min > tol_eig {
        Classification::LocalMinCandidate
    } else {
        Classification::Degenerate
    };
    let mut roots = Vec::with_capacity(hessian_eigs.len());
    let mut unstable_roots = Vec::new();
    let mut rho = T::zero();
    for (i, &d) in hessian_eigs.iter().enumerate() {
        let r = characteristic_roots(d, params);
        rho = rho.max(r.0.norm()).max(r.1.norm());
        for root in [r.0, r.1] {
            if root.im == T::zero() && root.re > T::one() {
                unstable_roots.push((i, root.re));
            }
        }
        roots.push(CurvatureRoots { d, roots: r });
    }
    Ok(CriticalPointAnalysis {
        point: x.to_vec(),
        grad_norm,
        hessian_eigs,
        method,
        tol_eig,
        classification,
        roots,
        map_spectral_radius: rho,
        unstable_roots,
    })
}

/// `|β|/(1 + |γ|M̃)`, where `M̃` bounds the Hessian spectral radius.
pub fn saddle_safe_alpha<T: Real>(m_tilde: T, params: &MomentumParams<T>) -> Result<T> {
    if params.beta() == T::zero() {
        return Err(Error::ZeroMomentum);
    }
    if !(m_tilde >= T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "curvature bound must be nonnegative, got {m_tilde}"
        )));
    }
    Ok(params.beta().abs() / (T::one() + params.gamma().abs() * m_tilde))
}

/// `|β| > α|γ|M̃`, which keeps `βI − αγ∇²f` invertible.
pub fn rank_condition<T: Real>(m_tilde: T, params: &MomentumParams<T>) -> bool {
    params.beta().abs() > params.alpha() * params.gamma().abs() * m_tilde
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Trials leaving this ball around the saddle count as escaped.
    pub escape_radius: Option<f64>,
}

impl Default for EscapeOptions {
    fn default() -> Self {
        Self {
            max_iters: 100_000,
            grad_tol: 1e-8,
            escape_radius: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialOutcome {
    Escaped,
    AtSaddle,
    /// Neither converged nor left the escape ball.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrialRecord<T> {
    pub trial: usize,
    pub outcome: TrialOutcome,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub final_distance: T,
    pub final_grad_norm: T,
    pub final_value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EscapeExperiment<T> {
    pub saddle: Vec<T>,
    pub params: MomentumParams<T>,
    pub radius: T,
    pub seed: u64,
    pub trials: usize,
    /// "At saddle" means within `10·radius·1e-3` with a converged gradient.
    pub at_saddle_radius: T,
    pub options: EscapeOptions,
    pub outcomes: Vec<TrialRecord<T>>,
    pub escape_fraction: T,
    pub at_saddle: usize,
    pub inconclusive: usize,
}

impl<T: Real> EscapeExperiment<T> {
    /// Aggregates trial records produced by [`escape_trial`].
    #[allow(clippy::too_many_arguments)]
    pub fn from_trials(
        saddle: &[T],
        params: MomentumParams<T>,
        radius: T,
        seed: u64,
        options: EscapeOptions,
        mut outcomes: Vec<TrialRecord<T>>,
    ) -> Self {
        outcomes.sort_by_key(|r| r.trial);
        let trials = outcomes.len();
        let escaped = outcomes.iter().filter(|r| r.outcome == TrialOutcome::Escaped).count();
        let at_saddle = outcomes.iter().filter(|r| r.outcome == TrialOutcome::AtSaddle).count();
        Self {
            saddle: saddle.to_vec(),
            params,
            radius,
            seed,
            trials,
            at_saddle_radius: at_saddle_radius(radius),
            options,
            escape_fraction: T::from_usize_lossy(escaped) / T::from_usize_lossy(trials.max(1)),
            at_saddle,
            inconclusive: trials - escaped - at_saddle,
            outcomes,
        }
    }
}

fn at_saddle_radius<T: Real>(radius: T) -> T {
    T::lit(10.0) * radius * T::lit(1e-3)
}

/// One seeded trial: `x_0` uniform in `B(saddle, radius)`, `x_{−1}` uniform
/// in `B(x_0, δα)`. Each trial draws from its own stream `(seed, trial)`.
pub fn escape_trial<T: Real, P: Problem<T> + ?Sized>(
    p: &P,
    saddle: &[T],
    params: &MomentumParams<T>,
    radius: T,
    seed: u64,
    trial: usize,
    opts: &EscapeOptions,
) -> Result<TrialRecord<T>> {
    let mut rng = seeded_rng(seed, trial as u64);
    let x0 = uniform_in_ball(&mut rng, saddle, radius);
    let x_minus1 = uniform_in_ball(&mut rng, &x0, params.delta() * params.alpha());
    classify_run(p, saddle, &x_minus1, &x0, params, radius, trial, opts)
}

/// Runs from a given initialization and classifies the limit.
#[allow(clippy::too_many_arguments)]
pub fn classify_run<T: Real, P: Problem<T> + ?Sized>(
    p: &P,
    saddle: &[T],
    x_minus1: &[T],
    x0: &[T],
    params: &MomentumParams<T>,
    radius: T,
    trial: usize,
    opts: &EscapeOptions,
) -> Result<TrialRecord<T>> {
    let mut stop = StopRule::iterations(opts.max_iters).with_grad_tol(T::lit(opts.grad_tol));
    if let Some(r) = opts.escape_radius {
        stop = stop.with_box(T::lit(r) + dist(x0, saddle));
    }
    let trace = run(p, x_minus1, x0, params, &stop)?;
    let last = trace.last_point();
    let rec = trace.records().last().expect("trace has x_0");
    let final_distance = dist(last, saddle);
    let converged = trace.stop_reason() == StopReason::GradTol;
    let outcome = match trace.stop_reason() {
        StopReason::LeftBox | StopReason::Diverged => TrialOutcome::Escaped,
        StopReason::GradTol if final_distance <= at_saddle_radius(radius) => TrialOutcome::AtSaddle,
        StopReason::GradTol => TrialOutcome::Escaped,
        StopReason::MaxIters => TrialOutcome::Inconclusive,
    };
    debug_assert!(converged || outcome != TrialOutcome::AtSaddle);
    Ok(TrialRecord {
        trial,
        outcome,
        stop_reason: trace.stop_reason(),
        iterations: trace.iterations(),
        final_distance,
        final_grad_norm: rec.grad_norm,
        final_value: rec.value,
    })
}

/// Runs `trials` seeded perturbations of a strict saddle sequentially.
pub fn escape_experiment<T: Real, P: Problem<T> + ?Sized>(
    p: &P,
    saddle: &[T],
    params: &MomentumParams<T>,
    radius: T,
    trials: usize,
    seed: u64,
    opts: &EscapeOptions,
) -> Result<EscapeExperiment<T>> {
    validate_escape(p, saddle, params, radius, trials)?;
    let outcomes = (0..trials)
        .map(|i| escape_trial(p, saddle, params, radius, seed, i, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(EscapeExperiment::from_trials(saddle, *params, radius, seed, *opts, outcomes))
}

/// Preconditions shared by sequential and parallel escape experiments.
pub fn validate_escape<T: Real, P: Problem<T> + ?Sized>(
    p: &P,
    saddle: &[T],
    params: &MomentumParams<T>,
    radius: T,
    trials: usize,
) -> Result<()> {
    crate::error::check_len("saddle", p.dim(), saddle.len())?;
    if params.beta() == T::zero() {
        return Err(Error::ZeroMomentum);
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trial count must be at least 1".into()));
    }
    if !(radius > T::zero()) {
        return Err(Error::InvalidParameter("perturbation radius must be positive".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::determinant;
    use crate::problems::{synthetic, Fixture};

    fn hb() -> MomentumParams<f64> {
        MomentumParams::heavy_ball(0.1, 0.5).unwrap()
    }

    #[test]
    fn negative_curvature_root() {
        let (r1, r2) = characteristic_roots(-1.0, &hb());
        assert_eq!(r1.im, 0.0);
        let exact = (1.6 + (1.6f64 * 1.6 - 2.0).sqrt()) / 2.0;
        assert!((r1.re - exact).abs() < 1e-14);
        assert!((r1.re * r2.re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn positive_curvature_pair() {
        let (r1, r2) = characteristic_roots(1.0, &hb());
        assert!(r1.im != 0.0 && r1 == r2.conj());
        assert!((r1.norm() - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn jacobian_determinant_matches_product() {
        let params = MomentumParams::generic(0.2, 0.3, 0.7).unwrap();
        let h = Mat::from_rows(&[[2.0, 0.5], [0.5, -1.0]]).unwrap();
        let jac = momentum_jacobian(&h, &params);
        let eigs = symmetric_eigenvalues(&h);
        for lambda in [-1.3f64, 0.2, 0.9, 2.5] {
            let shifted = Mat::from_fn(4, 4, |i, j| {
                (if i == j { lambda } else { 0.0 }) - jac[(i, j)]
            });
            let prod: f64 = eigs
                .iter()
                .map(|&d| characteristic_poly(d, &params, Complex::new(lambda, 0.0)).re)
                .product();
            assert!((determinant(&shifted) - prod).abs() < 1e-12 * (1.0 + prod.abs()));
        }
    }

    #[test]
    fn saddle_classification() {
        let p = synthetic::<f64>(Fixture::IndefiniteQuadratic).unwrap();
        let a = analyze_critical_point(&p, &[0.0, 0.0], &hb(), &CriticalTolerances::default())
            .unwrap();
        assert_eq!(a.classification, Classification::StrictSaddle);
        assert!(a.map_spectral_radius > 1.0);
        assert_eq!(a.unstable_roots.len(), 1);
        assert!(matches!(
            analyze_critical_point(&p, &[1.0, 0.0], &hb(), &CriticalTolerances::default()),
            Err(Error::NotCritical { .. })
        ));
    }

    #[test]
    fn safe_alpha_examples() {
        assert_eq!(saddle_safe_alpha(123.0, &hb()).unwrap(), 0.5);
        let g = MomentumParams::<f64>::generic(0.01, 0.5, 1.0).unwrap();
        assert!((saddle_safe_alpha(4.0, &g).unwrap() - 0.1).abs() < 1e-15);
        let gd = MomentumParams::generic(0.1, 0.0, 0.0).unwrap();
        assert_eq!(saddle_safe_alpha(1.0, &gd), Err(Error::ZeroMomentum));
        assert!(rank_condition(1e6, &hb()));
    }

    #[test]
    fn stable_axis_converges_to_saddle() {
        let p = synthetic::<f64>(Fixture::IndefiniteQuadratic).unwrap();
        let rec = classify_run(
            &p,
            &[0.0, 0.0],
            &[1e-3, 0.0],
            &[1e-3, 0.0],
            &hb(),
            1e-3,
            0,
            &EscapeOptions::default(),
        )
        .unwrap();
        assert_eq!(rec.outcome, TrialOutcome::AtSaddle);
    }
}
