//! Closed-form constants of the Lyapunov analysis and per-iterate checks of
//! the inequalities they certify.
//!
//! The Lyapunov function is `H_λ(x, y) = f(x) + λ‖x − y‖²`, evaluated along
//! `z_k = (x_k, x_{k−1})`. With `M` a Lipschitz constant of `∇f` on the
//! region visited by the iterates and their extrapolations:
//!
//! * descent: `H_λ(z_{k+1}) ≤ H_λ(z_k) − c₁(‖x_{k+1} − x_k‖² + ‖x_k − x_{k−1}‖²)`
//! * gradient bounds: `‖∇f(x_k)‖ ≤ b_α‖z_{k+1} − z_k‖` and
//!   `max{‖∇H_λ(z_k)‖, ‖∇H_λ(z_{k+1})‖} ≤ c₂‖z_{k+1} − z_k‖`
//! * step bound: `‖x_k − x_{k−1}‖ ≤ δ₁α`
//! * length formula: `Σ‖x_{k+1} − x_k‖ ≤ ψ(f(x_0) − f(x_K) + ηα) + κα`

use serde::{Deserialize, Serialize};

use crate::analysis::{measure_length, Desingularizer};
use crate::error::{Error, Result};
use crate::linalg::{dist, dist_sq, norm, norm_sq};
use crate::optimizer::{run, safe_alpha, MomentumParams, StopRule, Trace};
use crate::problems::{estimate_lipschitz, LipschitzEstimate, LipschitzMode, LipschitzOptions, Problem};
use crate::scalar::Real;

/// Relative slack tolerance: a check passes iff `slack ≥ −SLACK_TOL·(1 + |scale|)`.
pub const SLACK_TOL: f64 = 1e-9;

/// `H_λ(x, y) = f(x) + λ‖x − y‖²`.
pub fn lyapunov<T: Real, P: Problem<T> + ?Sized>(p: &P, x: &[T], y: &[T], lambda: T) -> T {
    p.value(x) + lambda * dist_sq(x, y)
}

/// Admissible Lyapunov weights for a given step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovInterval<T> {
    /// `λ⁻ = (1/(2α) + M/2)β² + |β − γ|M/2`
    pub lambda_minus: T,
    /// `λ⁺ = 1/(2α) − |β − γ|M/2`
    pub lambda_plus: T,
    /// Midpoint `(β² + 1 + Mβ²α)/(4α)`.
    pub lambda_mid: T,
    /// `c₁ = min{λ − λ⁻, λ⁺ − λ}` at the midpoint.
    pub c1: T,
}

/// Computes `λ⁻`, `λ⁺`, the midpoint weight and `c₁`.
///
/// Fails if `α` exceeds the descent step-size bound, naming the violated term.
pub fn lyapunov_interval<T: Real>(m: T, params: &MomentumParams<T>) -> Result<LyapunovInterval<T>> {
    let bound = safe_alpha(m, params)?;
    let alpha = params.alpha();
    if alpha > bound {
        let which = if alpha > T::one() / m {
            "alpha <= 1/M"
        } else {
            "alpha <= (1 - beta^2) / (2 (beta^2 + 2|beta - gamma|) M)"
        };
        return Err(Error::StepSizeTooLarge {
            alpha: alpha.to_f64_lossy(),
            bound: bound.to_f64_lossy(),
            which,
        });
    }
    Ok(interval_unchecked(m, params))
}

fn interval_unchecked<T: Real>(m: T, params: &MomentumParams<T>) -> LyapunovInterval<T> {
    let (alpha, beta, gamma) = (params.alpha(), params.beta(), params.gamma());
    let half = T::lit(0.5);
    let inv2a = half / alpha;
    let b2 = beta * beta;
    let skew = (beta - gamma).abs() * m * half;
    let lambda_minus = (inv2a + m * half) * b2 + skew;
    let lambda_plus = inv2a - skew;
    let lambda_mid = (b2 + T::one() + m * b2 * alpha) / (T::lit(4.0) * alpha);
    let c1 = (lambda_mid - lambda_minus).min(lambda_plus - lambda_mid);
    LyapunovInterval {
        lambda_minus,
        lambda_plus,
        lambda_mid,
        c1,
    }
}

/// `b_α = √2 max{1/α, |β|/α + M|γ|}`.
pub fn gradient_bound_constant<T: Real>(m: T, params: &MomentumParams<T>) -> T {
    let (alpha, beta, gamma) = (params.alpha(), params.beta(), params.gamma());
    T::SQRT_2() * (T::one() / alpha).max(beta.abs() / alpha + m * gamma.abs())
}

/// `c₂ = √2 max{1/α, |β|/α + M(|γ| + 1) + 4λ}`.
pub fn lyapunov_gradient_constant<T: Real>(m: T, lambda: T, params: &MomentumParams<T>) -> T {
    let (alpha, beta, gamma) = (params.alpha(), params.beta(), params.gamma());
    T::SQRT_2()
        * (T::one() / alpha)
            .max(beta.abs() / alpha + m * (gamma.abs() + T::one()) + T::lit(4.0) * lambda)
}

/// `δ₁ = δ₀ + L/(1 − β)`, where `L` bounds `‖∇f‖` so that `L/(1 − β)` is a
/// Lipschitz constant of `f/(1 − β)`.
pub fn step_bound_delta1<T: Real>(grad_bound: T, params: &MomentumParams<T>) -> T {
    params.delta() + grad_bound / (T::one() - params.beta())
}

/// Constants of the length formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthConstants<T> {
    /// `c₃ = 8√2(2 + |γ| + 3|β|)/(1 − β²)`
    pub c3: T,
    /// `ζ = 2√2(δ + L̄)`
    pub zeta: T,
    /// `η = 2mδ²(β² + 1 + Mβ²)/4`
    pub eta: T,
    /// `κ = 2mζ`
    pub kappa: T,
}

/// `scaled_lipschitz` is `L̄ = L/(1 − β)`, the Lipschitz constant of
/// `f/(1 − β)`; `critical_values` bounds the number of critical values met.
pub fn length_constants<T: Real>(
    m: T,
    scaled_lipschitz: T,
    params: &MomentumParams<T>,
    critical_values: usize,
) -> Result<LengthConstants<T>> {
    if critical_values == 0 {
        return Err(Error::InvalidParameter(
            "critical-value count bound m must be at least 1".into(),
        ));
    }
    let (beta, gamma, delta) = (params.beta(), params.gamma(), params.delta());
    let b2 = beta * beta;
    let two_sqrt2 = T::lit(2.0) * T::SQRT_2();
    let c3 = T::lit(4.0) * two_sqrt2 * (T::lit(2.0) + gamma.abs() + T::lit(3.0) * beta.abs())
        / (T::one() - b2);
    let zeta = two_sqrt2 * (delta + scaled_lipschitz);
    let two_m = T::lit(2.0) * T::from_usize_lossy(critical_values);
    let eta = two_m * delta * delta * (b2 + T::one() + m * b2) / T::lit(4.0);
    let kappa = two_m * zeta;
    Ok(LengthConstants {
        c3,
        zeta,
        eta,
        kappa,
    })
}

/// Ball on which the Lipschitz inputs are valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Region<T> {
    pub center: Vec<T>,
    pub radius: T,
}

impl<T: Real> Region<T> {
    pub fn contains(&self, x: &[T]) -> bool {
        dist(x, &self.center) <= self.radius
    }
}

/// Every constant of the analysis for one `(M, L, α, β, γ, δ, m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Certificate<T> {
    /// Lipschitz constant of `∇f`.
    pub m: T,
    /// Bound on `‖∇f‖`.
    pub l: T,
    pub params: MomentumParams<T>,
    pub critical_values: usize,
    pub alpha_bar: T,
    /// Whether `α ≤ ᾱ`; the descent and length guarantees need it.
    pub step_size_ok: bool,
    pub lambda_minus: T,
    pub lambda_plus: T,
    pub lambda: T,
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub zeta: T,
    pub eta: T,
    pub kappa: T,
    pub b_alpha: T,
    pub delta1: T,
    pub region: Option<Region<T>>,
}

impl<T: Real> Certificate<T> {
    /// Computes every constant. A step size above `ᾱ` is allowed so that
    /// violations can be observed; `step_size_ok` records it.
    pub fn new(m: T, l: T, params: MomentumParams<T>, critical_values: usize) -> Result<Self> {
        let alpha_bar = safe_alpha(m, &params)?;
        let iv = interval_unchecked(m, &params);
        let scaled = l / (T::one() - params.beta());
        let lc = length_constants(m, scaled, &params, critical_values)?;
        Ok(Self {
            m,
            l,
            params,
            critical_values,
            alpha_bar,
            step_size_ok: params.alpha() <= alpha_bar,
            lambda_minus: iv.lambda_minus,
            lambda_plus: iv.lambda_plus,
            lambda: iv.lambda_mid,
            c1: iv.c1,
            c2: lyapunov_gradient_constant(m, iv.lambda_mid, &params),
            c3: lc.c3,
            zeta: lc.zeta,
            eta: lc.eta,
            kappa: lc.kappa,
            b_alpha: gradient_bound_constant(m, &params),
            delta1: step_bound_delta1(l, &params),
            region: None,
        })
    }

    /// Certificate whose region is the ball of a Lipschitz estimate.
    pub fn from_estimate(
        est: &LipschitzEstimate<T>,
        params: MomentumParams<T>,
        critical_values: usize,
    ) -> Result<Self> {
        let mut cert = Self::new(est.grad_lipschitz, est.grad_bound, params, critical_values)?;
        cert.region = Some(Region {
            center: est.center.clone(),
            radius: est.radius,
        });
        Ok(cert)
    }

    pub fn with_region(mut self, region: Region<T>) -> Self {
        self.region = Some(region);
        self
    }

    fn in_region(&self, x: &[T]) -> bool {
        self.region.as_ref().is_none_or(|r| r.contains(x))
    }

    /// Index of the first stored point (0 = `x_{−1}`) outside the region.
    fn first_exit(&self, trace: &Trace<T>) -> Option<usize> {
        trace.points().iter().position(|x| !self.in_region(x))
    }

    /// `c₁` used in checks: the decrease rate is never taken negative.
    fn effective_c1(&self) -> T {
        self.c1.max(T::zero())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Iterates left the certified region; the inequality is not claimed.
    Uncertified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CheckSummary<T> {
    pub checked: usize,
    pub passed: usize,
    pub failed: usize,
    pub uncertified: usize,
    pub min_slack: Option<T>,
    pub first_failure: Option<usize>,
}

impl<T: Real> CheckSummary<T> {
    fn from_steps<'a>(steps: impl Iterator<Item = (usize, CheckStatus, T)> + 'a) -> Self {
        let mut s = Self {
            checked: 0,
            passed: 0,
            failed: 0,
            uncertified: 0,
            min_slack: None,
            first_failure: None,
        };
        for (k, status, slack) in steps {
            s.checked += 1;
            match status {
                CheckStatus::Pass => s.passed += 1,
                CheckStatus::Fail => {
                    s.failed += 1;
                    s.first_failure.get_or_insert(k);
                }
                CheckStatus::Uncertified => {
                    s.uncertified += 1;
                    continue;
                }
            }
            s.min_slack = Some(s.min_slack.map_or(slack, |m: T| m.min(slack)));
        }
        s
    }

    /// No failures among certified steps.
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

fn classify<T: Real>(slack: T, scale: T, certified: bool) -> CheckStatus {
    if !certified {
        CheckStatus::Uncertified
    } else if slack >= -T::lit(SLACK_TOL) * (T::one() + scale.abs()) {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DescentStep<T> {
    pub k: usize,
    pub h_before: T,
    pub h_after: T,
    pub slack: T,
    pub status: CheckStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DescentReport<T> {
    pub steps: Vec<DescentStep<T>>,
    pub summary: CheckSummary<T>,
}

/// Checks the Lyapunov decrease at every step `k = 0 … K−1`.
///
/// Slack `s_k = H_λ(z_k) − H_λ(z_{k+1}) − c₁(‖x_{k+1} − x_k‖² + ‖x_k − x_{k−1}‖²)`.
/// Once an iterate leaves the certified region, that step and all later ones
/// are marked uncertified.
pub fn check_descent<T: Real>(trace: &Trace<T>, cert: &Certificate<T>) -> DescentReport<T> {
    let lambda = cert.lambda;
    let c1 = cert.effective_c1();
    let exit = cert.first_exit(trace);
    let recs = trace.records();
    let mut steps = Vec::with_capacity(trace.iterations());
    for k in 0..trace.iterations() {
        let ki = k as isize;
        let d_prev = dist_sq(trace.point(ki), trace.point(ki - 1));
        let d_next = dist_sq(trace.point(ki + 1), trace.point(ki));
        let h_before = recs[k].value + lambda * d_prev;
        let h_after = recs[k + 1].value + lambda * d_next;
        let slack = h_before - h_after - c1 * (d_next + d_prev);
        // Points x_{k-1}, x_k, x_{k+1} sit at storage indices k, k+1, k+2.
        let certified = exit.is_none_or(|e| e > k + 2);
        steps.push(DescentStep {
            k,
            h_before,
            h_after,
            slack,
            status: classify(slack, h_before, certified),
        });
    }
    let summary = CheckSummary::from_steps(steps.iter().map(|s| (s.k, s.status, s.slack)));
    DescentReport { steps, summary }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GradientBoundStep<T> {
    pub k: usize,
    pub z_step: T,
    pub grad_norm: T,
    /// `b_α‖z_{k+1} − z_k‖ − ‖∇f(x_k)‖`
    pub grad_slack: T,
    pub grad_status: CheckStatus,
    pub lyapunov_grad_norm: T,
    /// `c₂‖z_{k+1} − z_k‖ − max{‖∇H_λ(z_k)‖, ‖∇H_λ(z_{k+1})‖}`
    pub lyapunov_slack: T,
    pub lyapunov_status: CheckStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GradientBoundReport<T> {
    pub steps: Vec<GradientBoundStep<T>>,
    pub grad_summary: CheckSummary<T>,
    pub lyapunov_summary: CheckSummary<T>,
}

impl<T: Real> GradientBoundReport<T> {
    pub fn all_passed(&self) -> bool {
        self.grad_summary.all_passed() && self.lyapunov_summary.all_passed()
    }
}

/// `‖∇H_λ(x, y)‖` with `∇H_λ(x, y) = (∇f(x) + 2λ(x − y), 2λ(y − x))`.
fn lyapunov_grad_norm<T: Real>(grad_x: &[T], x: &[T], y: &[T], lambda: T) -> T {
    let two_l = T::lit(2.0) * lambda;
    let mut first = T::zero();
    let mut second = T::zero();
    for i in 0..x.len() {
        let d = x[i] - y[i];
        let a = grad_x[i] + two_l * d;
        first += a * a;
        second += two_l * two_l * d * d;
    }
    (first + second).sqrt()
}

/// Checks both gradient upper bounds at `k = 0 … K−1`.
pub fn check_gradient_bound<T: Real, P: Problem<T> + ?Sized>(
    p: &P,
    trace: &Trace<T>,
    cert: &Certificate<T>,
) -> GradientBoundReport<T> {
    let exit = cert.first_exit(trace);
    let lambda = cert.lambda;
    let k_max = trace.iterations();
    let grads: Vec<Vec<T>> = (0..=k_max).map(|k| p.gradient(trace.point(k as isize))).collect();
    let mut steps = Vec::with_capacity(k_max);
    for k in 0..k_max {
        let ki = k as isize;
        let (xm, x, xn) = (trace.point(ki - 1), trace.point(ki), trace.point(ki + 1));
        let z_step = (dist_sq(xn, x) + dist_sq(x, xm)).sqrt();
        let grad_norm = norm(&grads[k]);
        let grad_slack = cert.b_alpha * z_step - grad_norm;
        let h_now = lyapunov_grad_norm(&grads[k], x, xm, lambda);
        let h_next = lyapunov_grad_norm(&grads[k + 1], xn, x, lambda);
        let lyapunov_grad_norm = h_now.max(h_next);
        let lyapunov_slack = cert.c2 * z_step - lyapunov_grad_norm;
        let certified = exit.is_none_or(|e| e > k + 2);
        steps.push(GradientBoundStep {
            k,
            z_step,
            grad_norm,
            grad_slack,
            grad_status: classify(grad_slack, grad_norm, certified),
            lyapunov_grad_norm,
            lyapunov_slack,
            lyapunov_status: classify(lyapunov_slack, lyapunov_grad_norm, certified),
        });
    }
    let grad_summary =
        CheckSummary::from_steps(steps.iter().map(|s| (s.k, s.grad_status, s.grad_slack)));
    let lyapunov_summary = CheckSummary::from_steps(
        steps.iter().map(|s| (s.k, s.lyapunov_status, s.lyapunov_slack)),
    );
    GradientBoundReport {
        steps,
        grad_summary,
        lyapunov_summary,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct StepBoundStep<T> {
    pub k: usize,
    /// `‖x_k − x_{k−1}‖`
    pub step_norm: T,
    /// `δ₁α − ‖x_k − x_{k−1}‖`
    pub delta1_slack: T,
    /// `√2δ₁α − ‖z_k − z_{k−1}‖` (absent at `k = 0`)
    pub z_slack: Option<T>,
    /// `(δ₀|β|^k + L̄)α − ‖x_k − x_{k−1}‖`
    pub geometric_slack: T,
    pub status: CheckStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct StepBoundReport<T> {
    pub delta1: T,
    pub steps: Vec<StepBoundStep<T>>,
    pub summary: CheckSummary<T>,
}

/// Checks `‖x_k − x_{k−1}‖ ≤ δ₁α`, `‖z_k − z_{k−1}‖ ≤ √2δ₁α` and the
/// geometric-sum refinement `‖x_k − x_{k−1}‖ ≤ (δ₀|β|^k + L̄)α` for
/// `k = 0 … K`. Requires `‖x_0 − x_{−1}‖ ≤ δ₀α`; otherwise every step is
/// uncertified. The bound at `x_k` needs `x_{−1} … x_{k−1}` in the region.
pub fn check_step_bound<T: Real>(trace: &Trace<T>, cert: &Certificate<T>) -> StepBoundReport<T> {
    let params = &cert.params;
    let alpha = params.alpha();
    let beta_abs = params.beta().abs();
    let scaled = cert.l / (T::one() - params.beta());
    let exit = cert.first_exit(trace);
    let mut steps = Vec::new();
    let mut beta_pow = T::one();
    for k in 0..=trace.iterations() {
        let ki = k as isize;
        let step_norm = dist(trace.point(ki), trace.point(ki - 1));
        let delta1_slack = cert.delta1 * alpha - step_norm;
        let z_slack = (k > 0).then(|| {
            let z = (step_norm * step_norm
                + dist_sq(trace.point(ki - 1), trace.point(ki - 2)))
            .sqrt();
            T::SQRT_2() * cert.delta1 * alpha - z
        });
        let geometric_slack = (params.delta() * beta_pow + scaled) * alpha - step_norm;
        beta_pow *= beta_abs;
        let slack = delta1_slack.min(geometric_slack).min(z_slack.unwrap_or(delta1_slack));
        // x_{-1} … x_{k-1} live at storage indices 0 … k.
        let certified = trace.initial_velocity_ok() && exit.is_none_or(|e| e > k);
        steps.push(StepBoundStep {
            k,
            step_norm,
            delta1_slack,
            z_slack,
            geometric_slack,
            status: classify(slack, step_norm, certified),
        });
    }
    let summary = CheckSummary::from_steps(steps.iter().map(|s| {
        let slack = s
            .delta1_slack
            .min(s.geometric_slack)
            .min(s.z_slack.unwrap_or(s.delta1_slack));
        (s.k, s.status, slack)
    }));
    StepBoundReport {
        delta1: cert.delta1,
        steps,
        summary,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LengthFormulaReport<T> {
    /// `Σ_{k=0}^{K} ‖x_{k+1} − x_k‖` over the whole trace.
    pub length: T,
    /// Argument `f(x_0) − f(x_K) + ηα` of the desingularizer.
    pub argument: T,
    /// `2c₃m·ψ(t/(2m)) + κα`, the bound with the rescaled desingularizer.
    pub bound: T,
    /// `ψ(t) + κα` without the rescaling, for reference.
    pub unscaled_bound: T,
    pub ratio: T,
    pub certified: bool,
    pub pass: bool,
    pub empirical_desingularizer: bool,
}

/// Compares the trace length with the length-formula bound.
///
/// The desingularizer of `f` is lifted to the Lyapunov family by
/// `t ↦ 2c₃m·ψ(t/(2m))` before evaluation.
pub fn check_length_formula<T: Real>(
    trace: &Trace<T>,
    cert: &Certificate<T>,
    psi: &Desingularizer<T>,
) -> Result<LengthFormulaReport<T>> {
    psi.validate()?;
    let length = measure_length(trace).total;
    let recs = trace.records();
    let alpha = cert.params.alpha();
    let k_last = recs.len().saturating_sub(2);
    let f0 = recs.first().map_or(T::zero(), |r| r.value);
    let fk = recs.get(k_last).map_or(f0, |r| r.value);
    let argument = (f0 - fk + cert.eta * alpha).max(T::zero());
    let two_m = T::lit(2.0) * T::from_usize_lossy(cert.critical_values);
    let bound = two_m * cert.c3 * psi.eval(argument / two_m) + cert.kappa * alpha;
    let unscaled_bound = psi.eval(argument) + cert.kappa * alpha;
    let certified = cert.step_size_ok
        && trace.initial_velocity_ok()
        && cert.first_exit(trace).is_none_or(|e| e > k_last + 1);
    let ratio = if bound > T::zero() { length / bound } else { T::infinity() };
    Ok(LengthFormulaReport {
        length,
        argument,
        bound,
        unscaled_bound,
        ratio,
        certified,
        pass: length <= bound * (T::one() + T::lit(SLACK_TOL)),
        empirical_desingularizer: psi.is_empirical(),
    })
}

/// `H_λ(z_k)` for `k = 0 … K` along a trace.
pub fn lyapunov_values<T: Real>(trace: &Trace<T>, lambda: T) -> Vec<T> {
    trace
        .records()
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let ki = k as isize;
            r.value + lambda * norm_sq(&crate::linalg::sub(trace.point(ki), trace.point(ki - 1)))
        })
        .collect()
}

/// How the step size of a certified run is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `α = fraction · ᾱ` from the current Lipschitz estimate.
    Auto { fraction: f64 },
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub mode: LipschitzMode,
    pub lipschitz: LipschitzOptions,
    /// Initial certified radius around `x_0`.
    pub radius: f64,
    /// How many times the radius may double when iterates leave the ball.
    pub max_enlargements: usize,
    pub critical_values: usize,
}

/// Initialization of a certified run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", rename_all = "snake_case")]
pub enum InitialPair<T> {
    /// Fixed `(x_{−1}, x_0)`.
    Points { x_minus1: Vec<T>, x0: Vec<T> },
    /// `x_{−1} = x_0 + δα·u` with `‖u‖ ≤ 1`, so the velocity bound holds for
    /// whichever `α` is chosen.
    Velocity { x0: Vec<T>, direction: Vec<T> },
}

impl<T: Real> InitialPair<T> {
    /// `x_{−1} = x_0`.
    pub fn at_rest(x0: Vec<T>) -> Self {
        let direction = vec![T::zero(); x0.len()];
        InitialPair::Velocity { x0, direction }
    }

    pub fn x0(&self) -> &[T] {
        match self {
            InitialPair::Points { x0, .. } | InitialPair::Velocity { x0, .. } => x0,
        }
    }

    pub fn x_minus1(&self, params: &MomentumParams<T>) -> Vec<T> {
        match self {
            InitialPair::Points { x_minus1, .. } => x_minus1.clone(),
            InitialPair::Velocity { x0, direction } => {
                let s = params.delta() * params.alpha();
                x0.iter().zip(direction).map(|(&x, &u)| x + s * u).collect()
            }
        }
    }
}

/// A trace together with the estimate and certificate that cover it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CertifiedRun<T> {
    pub estimate: LipschitzEstimate<T>,
    pub certificate: Certificate<T>,
    pub trace: Trace<T>,
    pub enlargements: usize,
    /// All iterates lie in the certified ball.
    pub contained: bool,
}

/// Runs the method with constants estimated on `B(x_0, R)`, doubling `R`
/// (and re-estimating, which can only shrink an automatic `α`) until the
/// iterates stay in the ball or the enlargement budget is spent.
pub fn certify_run<T: Real, P: Problem<T> + ?Sized>(
    p: &P,
    start: &InitialPair<T>,
    params: &MomentumParams<T>,
    rule: StepRule,
    stop: &StopRule<T>,
    opts: &CertifyOptions,
) -> Result<CertifiedRun<T>> {
    let mut lip = opts.lipschitz;
    lip.spread = params.spread().to_f64_lossy();
    let mut radius = T::lit(opts.radius);
    let x0 = start.x0();
    let mut est = estimate_lipschitz(p, x0, radius, opts.mode, &lip)?;
    let mut enlargements = 0;
    loop {
        let alpha = match rule {
            StepRule::Auto { fraction } => T::lit(fraction) * safe_alpha(est.grad_lipschitz, params)?,
            StepRule::Fixed(a) => T::lit(a),
        };
        let run_params = params.with_alpha(alpha)?;
        let x_minus1 = start.x_minus1(&run_params);
        let trace = run(p, &x_minus1, x0, &run_params, stop)?;
        let contained = trace.points().iter().all(|x| est.contains(x));
        if contained || enlargements >= opts.max_enlargements {
            let certificate = Certificate::from_estimate(&est, run_params, opts.critical_values)?;
            return Ok(CertifiedRun {
                estimate: est,
                certificate,
                trace,
                enlargements,
                contained,
            });
        }
        enlargements += 1;
        radius = radius + radius;
        log::info!("iterates left the certified ball; enlarging radius to {radius}");
        match opts.mode {
            LipschitzMode::Sampled => est.extend(p, radius, lip.seed + enlargements as u64)?,
            LipschitzMode::Analytic => est = estimate_lipschitz(p, x0, radius, opts.mode, &lip)?,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{synthetic, Fixture};

    #[test]
    fn interval_rejects_large_step() {
        let params = MomentumParams::heavy_ball(0.5, 0.5).unwrap();
        let err = lyapunov_interval(1.0, &params).unwrap_err();
        assert!(matches!(err, Error::StepSizeTooLarge { .. }));
    }

    #[test]
    fn zero_momentum_interval() {
        let params = MomentumParams::generic(0.25, 0.0, 0.0).unwrap();
        let iv = lyapunov_interval(2.0, &params).unwrap();
        assert_eq!(iv.lambda_minus, 0.0);
        assert_eq!(iv.lambda_plus, 2.0);
        assert_eq!(iv.lambda_mid, 1.0);
        assert_eq!(iv.c1, 1.0);
    }

    #[test]
    fn stationary_trace_has_zero_slacks() {
        let p = synthetic::<f64>(Fixture::Quadratic { dim: 2 }).unwrap();
        let params = MomentumParams::heavy_ball(0.1, 0.5).unwrap();
        let t = run(&p, &[0.0, 0.0], &[0.0, 0.0], &params, &StopRule::iterations(5)).unwrap();
        let cert = Certificate::new(1.0, 1.0, params, 1).unwrap();
        let d = check_descent(&t, &cert);
        assert_eq!(d.steps.len(), 5);
        assert!(d.steps.iter().all(|s| s.slack == 0.0 && s.status == CheckStatus::Pass));
        let g = check_gradient_bound(&p, &t, &cert);
        assert!(g.steps.iter().all(|s| s.grad_slack == 0.0 && s.grad_status == CheckStatus::Pass));
    }

    #[test]
    fn exit_from_region_marks_uncertified() {
        let p = synthetic::<f64>(Fixture::IndefiniteQuadratic).unwrap();
        let params = MomentumParams::heavy_ball(0.1, 0.5).unwrap();
        let t = run(&p, &[0.0, 0.1], &[0.0, 0.1], &params, &StopRule::iterations(60)).unwrap();
        let cert = Certificate::new(1.0, 2.0, params, 1)
            .unwrap()
            .with_region(Region { center: vec![0.0, 0.0], radius: 1.0 });
        let d = check_descent(&t, &cert);
        let first_unc = d
            .steps
            .iter()
            .position(|s| s.status == CheckStatus::Uncertified)
            .expect("leaves the unit ball");
        assert!(d.steps[first_unc..].iter().all(|s| s.status == CheckStatus::Uncertified));
        assert!(d.summary.uncertified > 0);
    }

    #[test]
    fn delta1_examples() {
        let gd = MomentumParams::generic(0.1, 0.0, 0.0).unwrap();
        assert_eq!(step_bound_delta1(1.0, &gd), 1.0);
        let hb = MomentumParams::heavy_ball(0.1, 0.5).unwrap().with_delta(2.0).unwrap();
        assert_eq!(step_bound_delta1(3.0, &hb), 8.0);
    }

    #[test]
    fn zero_velocity_means_zero_eta() {
        let params = MomentumParams::nesterov(0.1, 0.5).unwrap();
        let lc = length_constants(3.0, 1.0, &params, 2).unwrap();
        assert_eq!(lc.eta, 0.0);
        assert!(length_constants(3.0, 1.0, &params, 0).is_err());
    }
}
