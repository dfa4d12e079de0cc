//! The constant-parameter momentum method
//!
//! ```text
//! x_{k+1} = x_k + β(x_k − x_{k−1}) − α ∇f(x_k + γ(x_k − x_{k−1}))
//! ```
//!
//! evaluated in three stages: the gradient extrapolation `y^γ`, the momentum
//! extrapolation `y^β`, then the gradient step `x_{k+1} = y^β − α∇f(y^γ)`.
//! Heavy ball is `γ = 0`, Nesterov is `γ = β`.

mod params;
mod trace;

pub use params::{MomentumParams, Preset};
pub use trace::{IterateRecord, StopReason, Trace};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{all_finite, dist, norm};
use crate::problems::Problem;
use crate::scalar::Real;

/// One application of the momentum map.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput<T> {
    pub x_next: Vec<T>,
    pub y_beta: Vec<T>,
    pub y_gamma: Vec<T>,
}

/// Computes `(x_{k+1}, y^β_k, y^γ_k)` from `(x_{k−1}, x_k)`.
///
/// Returns [`Error::Diverged`] if the gradient at `y^γ` is not finite.
pub fn step<T: Real, P: Problem<T> + ?Sized>(
    p: &P,
    x_prev: &[T],
    x_curr: &[T],
    params: &MomentumParams<T>,
) -> Result<StepOutput<T>> {
    check_len("previous iterate", p.dim(), x_prev.len())?;
    check_len("current iterate", p.dim(), x_curr.len())?;
    let (y_beta, y_gamma) = extrapolate(x_prev, x_curr, params);
    let g = p.gradient(&y_gamma);
    if !all_finite(&g) {
        return Err(Error::Diverged { iteration: 0 });
    }
    let x_next = descend(&y_beta, &g, params.alpha());
    Ok(StepOutput {
        x_next,
        y_beta,
        y_gamma,
    })
}

fn extrapolate<T: Real>(x_prev: &[T], x_curr: &[T], params: &MomentumParams<T>) -> (Vec<T>, Vec<T>) {
    let (beta, gamma) = (params.beta(), params.gamma());
    let mut y_beta = Vec::with_capacity(x_curr.len());
    let mut y_gamma = Vec::with_capacity(x_curr.len());
    for (&xc, &xp) in x_curr.iter().zip(x_prev) {
        let d = xc - xp;
        y_beta.push(xc + beta * d);
        y_gamma.push(xc + gamma * d);
    }
    (y_beta, y_gamma)
}

fn descend<T: Real>(y_beta: &[T], g: &[T], alpha: T) -> Vec<T> {
    y_beta.iter().zip(g).map(|(&y, &gi)| y - alpha * gi).collect()
}

/// Stopping rules for [`run`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule<T> {
    pub max_iters: usize,
    /// Stop once `‖∇f(x_k)‖ < grad_tol`; zero disables the test.
    pub grad_tol: T,
    /// Stop once an iterate leaves `B(x_0, box_radius)`.
    pub box_radius: Option<T>,
}

impl<T: Real> StopRule<T> {
    pub fn iterations(max_iters: usize) -> Self {
        Self {
            max_iters,
            grad_tol: T::zero(),
            box_radius: None,
        }
    }

    pub fn with_grad_tol(mut self, tol: T) -> Self {
        self.grad_tol = tol;
        self
    }

    pub fn with_box(mut self, radius: T) -> Self {
        self.box_radius = Some(radius);
        self
    }
}

/// Iterates the momentum method from `(x_{−1}, x_0)` until a stop rule fires.
///
/// An initial velocity `‖x_0 − x_{−1}‖ > δα` is reported as a warning and
/// recorded in the trace; it does not abort the run.
pub fn run<T: Real, P: Problem<T> + ?Sized>(
    p: &P,
    x_minus1: &[T],
    x0: &[T],
    params: &MomentumParams<T>,
    stop: &StopRule<T>,
) -> Result<Trace<T>> {
    check_len("x_{-1}", p.dim(), x_minus1.len())?;
    check_len("x_0", p.dim(), x0.len())?;
    if !(stop.grad_tol >= T::zero()) {
        return Err(Error::InvalidParameter("grad_tol must be nonnegative".into()));
    }
    let init_velocity = dist(x0, x_minus1);
    let velocity_bound = params.delta() * params.alpha();
    let velocity_ok = init_velocity <= velocity_bound * (T::one() + T::lit(1e-12));
    if !velocity_ok {
        log::warn!(
            "initial velocity ‖x0 − x_-1‖ = {init_velocity} exceeds δα = {velocity_bound}"
        );
    }

    let mut trace = Trace::start(p.name(), *params, x_minus1.to_vec(), x0.to_vec(), velocity_ok);
    let mut grad = p.gradient(x0);
    let value = p.value(x0);
    if !(value.is_finite() && all_finite(&grad) && all_finite(x0) && all_finite(x_minus1)) {
        trace.finish(StopReason::Diverged);
        return Ok(trace);
    }
    trace.push_record(value, norm(&grad));

    let mut k = 0usize;
    let reason = loop {
        let grad_norm = trace.records().last().expect("record pushed").grad_norm;
        if grad_norm < stop.grad_tol {
            break StopReason::GradTol;
        }
        if k >= stop.max_iters {
            break StopReason::MaxIters;
        }
        let (x_prev, x_curr) = trace.last_pair();
        let (y_beta, y_gamma) = extrapolate(x_prev, x_curr, params);
        let g_extra = if params.gamma() == T::zero() {
            std::mem::take(&mut grad)
        } else {
            p.gradient(&y_gamma)
        };
        if !all_finite(&g_extra) {
            break StopReason::Diverged;
        }
        let x_next = descend(&y_beta, &g_extra, params.alpha());
        let next_grad = p.gradient(&x_next);
        let next_value = p.value(&x_next);
        if !(all_finite(&x_next) && all_finite(&next_grad) && next_value.is_finite()) {
            break StopReason::Diverged;
        }
        let left_box = stop
            .box_radius
            .is_some_and(|r| dist(&x_next, x0) > r);
        trace.push_step(x_next, y_beta, y_gamma);
        trace.push_record(next_value, norm(&next_grad));
        grad = next_grad;
        k += 1;
        if left_box {
            break StopReason::LeftBox;
        }
    };
    trace.finish(reason);
    Ok(trace)
}

/// Largest step size for which the Lyapunov descent holds:
/// `min{1/M, (1 − β²) / (2(β² + 2|β − γ|)M)}`.
///
/// When `β = γ = 0` the second bound is vacuous and `1/M` is returned.
pub fn safe_alpha<T: Real>(lipschitz_grad: T, params: &MomentumParams<T>) -> Result<T> {
    safe_alpha_for(lipschitz_grad, params.beta(), params.gamma())
}

/// [`safe_alpha`] for bare `(β, γ)`, before a step size has been chosen.
pub fn safe_alpha_for<T: Real>(lipschitz_grad: T, beta: T, gamma: T) -> Result<T> {
    let m = lipschitz_grad;
    if !(m > T::zero()) || !m.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gradient Lipschitz constant must be positive and finite, got {m}"
        )));
    }
    let first = T::one() / m;
    let denom = beta * beta + T::lit(2.0) * (beta - gamma).abs();
    if denom == T::zero() {
        return Ok(first);
    }
    let second = (T::one() - beta * beta) / (T::lit(2.0) * denom * m);
    Ok(first.min(second))
}
