//! The rescaled gradient flow `x′ = −(1 − β)⁻¹∇f(x)` that the momentum
//! iterates follow for small step sizes.
//!
//! Integration uses the Dormand–Prince 5(4) pair with step-size control and
//! cubic Hermite dense output.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, dist, norm, singular_values_2x2};
use crate::optimizer::{MomentumParams, Trace};
use crate::problems::Problem;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowTermination {
    GradTol,
    Horizon,
    /// The step budget ran out first; lengths are lower bounds only.
    StepLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-14,
            max_steps: 1_000_000,
            initial_step: None,
        }
    }
}

/// Accepted steps of an integrated flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FlowTrajectory<T> {
    pub beta: T,
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    /// `x′(tᵢ)`, used for dense output.
    pub velocities: Vec<Vec<T>>,
    pub values: Vec<T>,
    pub grad_norms: Vec<T>,
    /// Running sum of chord lengths `‖x(tᵢ) − x(tᵢ₋₁)‖`.
    pub arc_length: Vec<T>,
    pub terminated: FlowTermination,
}

impl<T: Real> FlowTrajectory<T> {
    pub fn final_time(&self) -> T {
        *self.times.last().expect("trajectory holds x(0)")
    }

    pub fn final_state(&self) -> &[T] {
        self.states.last().expect("trajectory holds x(0)")
    }

    pub fn total_length(&self) -> T {
        *self.arc_length.last().expect("trajectory holds x(0)")
    }

    /// `x(t)` by cubic Hermite interpolation between accepted steps; exact at
    /// grid times. Past the final time the final state is returned.
    pub fn state_at(&self, t: T) -> Vec<T> {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.states[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.states[n - 1].clone();
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        if t == t0 {
            return self.states[i].clone();
        }
        let h = t1 - t0;
        let s = (t - t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h00 = two * s3 - three * s2 + T::one();
        let h10 = s3 - two * s2 + s;
        let h01 = three * s2 - two * s3;
        let h11 = s3 - s2;
        let (y0, y1) = (&self.states[i], &self.states[i + 1]);
        let (v0, v1) = (&self.velocities[i], &self.velocities[i + 1]);
        (0..y0.len())
            .map(|j| h00 * y0[j] + h10 * h * v0[j] + h01 * y1[j] + h11 * h * v1[j])
            .collect()
    }

    /// `(1 − β)∫‖x′‖²dt` by Simpson's rule on each step, with the midpoint
    /// velocity evaluated at the interpolated state. Equals `f(x(0)) − f(x(T))`.
    pub fn dissipated_energy<P: Problem<T> + ?Sized>(&self, p: &P) -> T {
        let scale = T::one() - self.beta;
        let mut total = T::zero();
        for i in 1..self.times.len() {
            let (t0, t1) = (self.times[i - 1], self.times[i]);
            let tm = (t0 + t1) * T::lit(0.5);
            let vm = velocity(p, &self.state_at(tm), self.beta);
            let a = crate::linalg::norm_sq(&self.velocities[i - 1]);
            let m = crate::linalg::norm_sq(&vm);
            let b = crate::linalg::norm_sq(&self.velocities[i]);
            total += (t1 - t0) / T::lit(6.0) * (a + T::lit(4.0) * m + b);
        }
        scale * total
    }

    /// CSV with columns `t,f,grad_norm,arc_length`, optionally followed by
    /// the coordinates `x0,x1,…`.
    pub fn write_csv<W: Write>(&self, mut w: W, coordinates: bool) -> io::Result<()> {
        write!(w, "t,f,grad_norm,arc_length")?;
        if coordinates {
            for j in 0..self.states[0].len() {
                write!(w, ",x{j}")?;
            }
        }
        writeln!(w)?;
        for i in 0..self.times.len() {
            write!(
                w,
                "{},{},{},{}",
                self.times[i], self.values[i], self.grad_norms[i], self.arc_length[i]
            )?;
            if coordinates {
                for v in &self.states[i] {
                    write!(w, ",{v}")?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn velocity<T: Real, P: Problem<T> + ?Sized>(p: &P, x: &[T], beta: T) -> Vec<T> {
    let s = -T::one() / (T::one() - beta);
    p.gradient(x).into_iter().map(|g| s * g).collect()
}

// Dormand–Prince 5(4) tableau; the flow is autonomous so the nodes are unused.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `x′ = −(1 − β)⁻¹∇f(x)` from `x0` until `t = horizon` or
/// `‖∇f‖ < grad_tol`. Pass `horizon = ∞` to rely on `grad_tol` alone.
pub fn integrate_flow<T: Real, P: Problem<T> + ?Sized>(
    p: &P,
    x0: &[T],
    beta: T,
    horizon: T,
    grad_tol: T,
) -> Result<FlowTrajectory<T>> {
    integrate_flow_with(p, x0, beta, horizon, grad_tol, &[], &FlowOptions::default())
}

/// [`integrate_flow`] that also lands exactly on every time in `checkpoints`.
pub fn integrate_flow_with<T: Real, P: Problem<T> + ?Sized>(
    p: &P,
    x0: &[T],
    beta: T,
    horizon: T,
    grad_tol: T,
    checkpoints: &[T],
    opts: &FlowOptions,
) -> Result<FlowTrajectory<T>> {
    crate::error::check_len("x(0)", p.dim(), x0.len())?;
    if !(beta.abs() < T::one()) {
        return Err(Error::InvalidParameter(format!("beta must lie in (-1, 1), got {beta}")));
    }
    let finite_horizon = horizon.is_finite() && horizon > T::zero();
    if !finite_horizon && !(grad_tol > T::zero()) {
        return Err(Error::InvalidParameter(
            "flow needs a positive finite horizon or a positive grad_tol".into(),
        ));
    }
    if !all_finite(x0) {
        return Err(Error::Integration("initial state is not finite".into()));
    }
    let mut stops: Vec<T> = checkpoints
        .iter()
        .copied()
        .filter(|&t| t > T::zero() && t < horizon)
        .collect();
    stops.sort_by(|a, b| a.partial_cmp(b).expect("finite checkpoints"));
    stops.dedup();
    if finite_horizon {
        stops.push(horizon);
    }
    let mut next_stop = 0usize;

    let rtol = T::lit(opts.rtol);
    let atol = T::lit(opts.atol);
    let grad0 = p.gradient(x0);
    let mut traj = FlowTrajectory {
        beta,
        times: vec![T::zero()],
        states: vec![x0.to_vec()],
        velocities: vec![scaled(&grad0, beta)],
        values: vec![p.value(x0)],
        grad_norms: vec![norm(&grad0)],
        arc_length: vec![T::zero()],
        terminated: FlowTermination::Horizon,
    };
    if traj.grad_norms[0] < grad_tol {
        traj.terminated = FlowTermination::GradTol;
        return Ok(traj);
    }

    let mut t = T::zero();
    let mut y = x0.to_vec();
    let mut k1 = traj.velocities[0].clone();
    let mut h = match opts.initial_step {
        Some(h) => T::lit(h),
        None => {
            let vn = norm(&k1);
            let yn = norm(&y).max(T::one());
            if vn > T::zero() {
                (T::lit(1e-3) * yn / vn).min(T::lit(0.1))
            } else {
                T::lit(0.1)
            }
        }
    };
    let n = y.len();
    let mut stages: Vec<Vec<T>> = vec![vec![T::zero(); n]; 7];
    let mut steps = 0usize;
    loop {
        if next_stop < stops.len() && t >= stops[next_stop] {
            next_stop += 1;
            if next_stop == stops.len() && finite_horizon {
                traj.terminated = FlowTermination::Horizon;
                break;
            }
            continue;
        }
        if steps >= opts.max_steps {
            traj.terminated = FlowTermination::StepLimit;
            break;
        }
        steps += 1;
        let target = stops.get(next_stop).copied();
        let mut hit = false;
        if let Some(ts) = target {
            if t + h >= ts {
                h = ts - t;
                hit = true;
            }
        }
        stages[0].clone_from(&k1);
        let mut tmp = vec![T::zero(); n];
        for s in 1..7 {
            for j in 0..n {
                let mut acc = T::zero();
                for (r, stage) in stages.iter().enumerate().take(s) {
                    acc += T::lit(A[s][r]) * stage[j];
                }
                tmp[j] = y[j] + h * acc;
            }
            stages[s] = velocity(p, &tmp, beta);
        }
        // Stage 7 is evaluated at the 5th-order solution (FSAL), held in `tmp`.
        let y_new = tmp;
        let mut err = T::zero();
        for j in 0..n {
            let mut e = T::zero();
            for (s, stage) in stages.iter().enumerate() {
                e += T::lit(E[s]) * stage[j];
            }
            let sc = atol + rtol * y[j].abs().max(y_new[j].abs());
            let r = h * e / sc;
            err = err.max(r.abs());
        }
        if !err.is_finite() || !all_finite(&y_new) {
            if h < T::lit(1e-300) {
                return Err(Error::Integration(format!("non-finite state near t = {t}")));
            }
            h *= T::lit(0.1);
            continue;
        }
        if err <= T::one() {
            t = if hit { target.expect("hit implies target") } else { t + h };
            let g_new: Vec<T> = stages[6].iter().map(|&v| -(T::one() - beta) * v).collect();
            let arc = *traj.arc_length.last().expect("non-empty") + dist(&y_new, &y);
            traj.times.push(t);
            traj.values.push(p.value(&y_new));
            traj.grad_norms.push(norm(&g_new));
            traj.arc_length.push(arc);
            traj.velocities.push(stages[6].clone());
            traj.states.push(y_new.clone());
            k1 = stages[6].clone();
            y = y_new;
            if *traj.grad_norms.last().expect("non-empty") < grad_tol {
                traj.terminated = FlowTermination::GradTol;
                break;
            }
        }
        let factor = if err == T::zero() {
            T::lit(5.0)
        } else {
            (T::lit(0.9) * err.powf(T::lit(-0.2))).max(T::lit(0.2)).min(T::lit(5.0))
        };
        h *= factor;
    }
    Ok(traj)
}

fn scaled<T: Real>(grad: &[T], beta: T) -> Vec<T> {
    let s = -T::one() / (T::one() - beta);
    grad.iter().map(|&g| s * g).collect()
}

/// Arc-length estimate `σ̂` over a set of starting points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LengthEstimate<T> {
    pub sigma: T,
    pub per_sample: Vec<T>,
    pub horizons: Vec<T>,
    /// True if some flow stopped before reaching `grad_tol`.
    pub lower_bound_only: bool,
}

/// Largest flow arc length over `samples`, each integrated until
/// `‖∇f‖ < grad_tol` (or `horizon`, which flags the estimate).
pub fn trajectory_length<T: Real, P: Problem<T> + ?Sized>(
    p: &P,
    samples: &[Vec<T>],
    beta: T,
    grad_tol: T,
    horizon: T,
) -> Result<LengthEstimate<T>> {
    if !(grad_tol > T::zero()) {
        return Err(Error::InvalidParameter("grad_tol must be positive".into()));
    }
    let mut per_sample = Vec::with_capacity(samples.len());
    let mut horizons = Vec::with_capacity(samples.len());
    let mut lower_bound_only = false;
    for x0 in samples {
        let traj = integrate_flow(p, x0, beta, horizon, grad_tol)?;
        if traj.terminated != FlowTermination::GradTol {
            lower_bound_only = true;
        }
        per_sample.push(traj.total_length());
        horizons.push(traj.final_time());
    }
    let sigma = per_sample.iter().copied().fold(T::zero(), T::max);
    Ok(LengthEstimate {
        sigma,
        per_sample,
        horizons,
        lower_bound_only,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrackingReport<T> {
    pub horizon: T,
    /// `e_k = ‖x_k − x(kα)‖` for `k = 0 … min(⌊T/α⌋, K)`.
    pub errors: Vec<T>,
    pub max_error: T,
    pub argmax: usize,
    pub flow: FlowTrajectory<T>,
}

/// Distance between momentum iterates and the flow from `x_0` sampled at `kα`.
pub fn tracking_error<T: Real, P: Problem<T> + ?Sized>(
    p: &P,
    trace: &Trace<T>,
    horizon: T,
) -> Result<TrackingReport<T>> {
    if !(horizon > T::zero()) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "tracking horizon must be positive and finite, got {horizon}"
        )));
    }
    let params = trace.params();
    let alpha = params.alpha();
    let steps = (horizon / alpha + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    let k_max = steps.min(trace.iterations());
    let times: Vec<T> = (1..=k_max).map(|k| T::from_usize_lossy(k) * alpha).collect();
    let end = times.last().copied().unwrap_or(alpha).max(alpha);
    let flow = integrate_flow_with(
        p,
        trace.point(0),
        params.beta(),
        end,
        T::zero(),
        &times,
        &FlowOptions::default(),
    )?;
    let mut errors = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let xt = flow.state_at(T::from_usize_lossy(k) * alpha);
        errors.push(dist(trace.point(k as isize), &xt));
    }
    let (argmax, max_error) = errors
        .iter()
        .copied()
        .enumerate()
        .fold((0, T::zero()), |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) });
    Ok(TrackingReport {
        horizon,
        errors,
        max_error,
        argmax,
        flow,
    })
}

/// Constants of the tracking bound.
///
/// `P` diagonalizes the companion block `A = [[1+β, −β], [1, 0]]`
/// (eigenvalues `1` and `β`) with unit eigenvector columns, and
/// `‖v‖_P = ‖P⁻¹v‖`. The norm-equivalence constants are
/// `p₁‖v‖ ≤ ‖v‖_P ≤ p₂‖v‖` and `‖X‖_P ≤ p₃‖X‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingConstants<T> {
    pub eigenvalues: (T, T),
    pub p1: T,
    pub p2: T,
    pub p3: T,
    /// `c₄ = ML(1/2 + |β|/2 + |γ| − β|γ|)`
    pub c4: T,
    /// `c₅ = p₃·M·√(1 + 2γ + 2γ²)`
    pub c5: T,
    /// `min{1, ε(p₁/p₂)[e^{c₅T}(|β|δ + 2L − Lβ + c₄/c₅) − c₄/c₅]⁻¹}`
    pub alpha_bar: T,
}

/// `m` and `l` are Lipschitz constants of `∇f/(1 − β)` and `f/(1 − β)`.
pub fn tracking_constants<T: Real>(
    m: T,
    l: T,
    params: &MomentumParams<T>,
    horizon: T,
    delta: T,
    epsilon: T,
) -> Result<TrackingConstants<T>> {
    if !(m > T::zero() && l > T::zero()) {
        return Err(Error::InvalidParameter("M and L must be positive".into()));
    }
    if !(horizon > T::zero()) || !(epsilon > T::zero()) {
        return Err(Error::InvalidParameter("horizon and epsilon must be positive".into()));
    }
    let (beta, gamma) = (params.beta(), params.gamma());
    // Columns (1, 1)/√2 and (β, 1)/√(1+β²).
    let s1 = T::SQRT_2();
    let s2 = (T::one() + beta * beta).sqrt();
    let (smax, smin) = singular_values_2x2(T::one() / s1, beta / s2, T::one() / s1, T::one() / s2);
    assert!(smin > T::zero(), "companion block diagonalizes for |beta| < 1");
    let p1 = T::one() / smax;
    let p2 = T::one() / smin;
    let p3 = smax / smin;
    let half = T::lit(0.5);
    let c4 = m * l * (half + beta.abs() * half + gamma.abs() - beta * gamma.abs());
    let c5 = p3 * m * (T::one() + T::lit(2.0) * gamma + T::lit(2.0) * gamma * gamma).sqrt();
    let ratio = c4 / c5;
    let bracket = (c5 * horizon).exp() * (beta.abs() * delta + T::lit(2.0) * l - l * beta + ratio)
        - ratio;
    let alpha_bar = T::one().min(epsilon * p1 / p2 / bracket);
    Ok(TrackingConstants {
        eigenvalues: (T::one(), beta),
        p1,
        p2,
        p3,
        c4,
        c5,
        alpha_bar,
    })
}
