//! Post-hoc analytics on traces: empirical Łojasiewicz fits, the `O(1/k)`
//! rate on the best gradient norm, and path length.

use serde::{Deserialize, Serialize};

use crate::certificates::{Certificate, SLACK_TOL};
use crate::error::{Error, Result};
use crate::linalg::dist;
use crate::optimizer::Trace;
use crate::scalar::Real;

/// Power-law desingularizer `ψ(t) = inflation · c · t^θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Desingularizer<T> {
    pub c: T,
    pub theta: T,
    /// Multiplier `≥ 1` making `ψ′(f − f*)‖∇f‖ ≥ 1` on every fitted sample.
    pub inflation: T,
    /// Present for fitted desingularizers; absent for analytic ones.
    pub diagnostics: Option<FitDiagnostics<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FitDiagnostics<T> {
    pub samples: usize,
    pub r_squared: T,
    pub f_star: T,
    pub gap_min: T,
    pub gap_max: T,
    /// Raw slope `1 − θ` before clamping `θ` into `(0, 1]`.
    pub slope: T,
    pub theta_clamped: bool,
}

impl<T: Real> Desingularizer<T> {
    /// Analytic `ψ(t) = c·t^θ`.
    pub fn power(c: T, theta: T) -> Result<Self> {
        let d = Self {
            c,
            theta,
            inflation: T::one(),
            diagnostics: None,
        };
        d.validate()?;
        Ok(d)
    }

    /// Rejects parameters for which `ψ` is not increasing and concave with `ψ(0) = 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.c > T::zero()) || !self.c.is_finite() {
            return Err(Error::InvalidDesingularizer(format!(
                "scale c must be positive and finite, got {}",
                self.c
            )));
        }
        if !(self.theta > T::zero() && self.theta <= T::one()) {
            return Err(Error::InvalidDesingularizer(format!(
                "exponent theta must lie in (0, 1], got {}",
                self.theta
            )));
        }
        if !(self.inflation >= T::one()) || !self.inflation.is_finite() {
            return Err(Error::InvalidDesingularizer(format!(
                "inflation must be at least 1, got {}",
                self.inflation
            )));
        }
        Ok(())
    }

    pub fn is_empirical(&self) -> bool {
        self.diagnostics.is_some()
    }

    /// `ψ(t)`; zero for `t ≤ 0`.
    pub fn eval(&self, t: T) -> T {
        if t <= T::zero() {
            T::zero()
        } else {
            self.inflation * self.c * t.powf(self.theta)
        }
    }

    /// `ψ′(t)` for `t > 0`.
    pub fn derivative(&self, t: T) -> T {
        self.inflation * self.c * self.theta * t.powf(self.theta - T::one())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub min_samples: usize,
    /// Upper end of the gap window `f − f*`; `None` keeps every sample.
    pub gap_window: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            min_samples: 20,
            gap_window: None,
        }
    }
}

/// `f*` when no optimum is known: the minimum of the last ten values.
pub fn tail_minimum<T: Real>(values: &[T]) -> Option<T> {
    let start = values.len().saturating_sub(10);
    values[start..].iter().copied().reduce(T::min)
}

/// Fits `‖∇f‖ ≈ (cθ)⁻¹(f − f*)^{1−θ}` by least squares in log–log form.
///
/// Samples are kept when `f − f*` exceeds the round-off floor
/// `max(1e-13, 100ε·max(1, max|f|))`, lies inside the gap window, and the
/// gradient norm is positive.
pub fn fit_desingularizer<T: Real>(
    values: &[T],
    grad_norms: &[T],
    f_star: Option<T>,
    opts: &FitOptions,
) -> Result<Desingularizer<T>> {
    if values.len() != grad_norms.len() {
        return Err(Error::DimensionMismatch {
            what: "gradient norms".into(),
            expected: values.len(),
            found: grad_norms.len(),
        });
    }
    let f_star = match f_star.or_else(|| tail_minimum(values)) {
        Some(f) => f,
        None => return Err(Error::FitRefused("no samples".into())),
    };
    let scale = values.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let floor = T::lit(1e-13).max(T::lit(100.0) * T::epsilon() * scale);
    let window = opts.gap_window.map(T::lit).unwrap_or(T::infinity());
    let pts: Vec<(T, T, T, T)> = values
        .iter()
        .zip(grad_norms)
        .filter_map(|(&f, &g)| {
            let gap = f - f_star;
            (gap > floor && gap <= window && g > T::zero() && g.is_finite())
                .then(|| (gap, g, gap.ln(), g.ln()))
        })
        .collect();
    if pts.len() < opts.min_samples.max(2) {
        return Err(Error::FitRefused(format!(
            "{} usable samples above the noise floor {} (need {})",
            pts.len(),
            floor,
            opts.min_samples.max(2)
        )));
    }
    let n = T::from_usize_lossy(pts.len());
    let mean_x = pts.iter().map(|p| p.2).sum::<T>() / n;
    let mean_y = pts.iter().map(|p| p.3).sum::<T>() / n;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for p in &pts {
        let dx = p.2 - mean_x;
        let dy = p.3 - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if !(sxx > T::zero()) {
        return Err(Error::FitRefused("all samples share one gap value".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r_squared = if syy > T::zero() { sxy * sxy / (sxx * syy) } else { T::one() };
    let raw_theta = T::one() - slope;
    let theta_min = T::lit(1e-3);
    let theta = raw_theta.max(theta_min).min(T::one());
    // With θ clamped, refit the intercept so that the line passes through the means.
    let intercept = if theta == raw_theta {
        intercept
    } else {
        mean_y - (T::one() - theta) * mean_x
    };
    let c = (-intercept).exp() / theta;
    let inflation = pts.iter().fold(T::one(), |acc, &(gap, g, _, _)| {
        let kl = c * theta * gap.powf(theta - T::one()) * g;
        acc.max(T::one() / kl)
    });
    let gap_min = pts.iter().map(|p| p.0).fold(T::infinity(), T::min);
    let gap_max = pts.iter().map(|p| p.0).fold(T::zero(), T::max);
    let d = Desingularizer {
        c,
        theta,
        inflation,
        diagnostics: Some(FitDiagnostics {
            samples: pts.len(),
            r_squared,
            f_star,
            gap_min,
            gap_max,
            slope,
            theta_clamped: theta != raw_theta,
        }),
    };
    d.validate()?;
    Ok(d)
}

/// [`fit_desingularizer`] on the values and gradient norms of a trace.
pub fn fit_trace<T: Real>(
    trace: &Trace<T>,
    f_star: Option<T>,
    opts: &FitOptions,
) -> Result<Desingularizer<T>> {
    fit_desingularizer(&trace.values(), &trace.grad_norms(), f_star, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LengthMeasure<T> {
    pub total: T,
    /// `partial[k] = Σ_{i=0}^{k} ‖x_{i+1} − x_i‖`.
    pub partial: Vec<T>,
}

/// Path length `Σ‖x_{k+1} − x_k‖` over `x_0 … x_K`.
pub fn measure_length<T: Real>(trace: &Trace<T>) -> LengthMeasure<T> {
    let pts = &trace.points()[1..];
    let mut total = T::zero();
    let partial = pts
        .windows(2)
        .map(|w| {
            total += dist(&w[1], &w[0]);
            total
        })
        .collect();
    LengthMeasure { total, partial }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RateReport<T> {
    /// `min_{i≤k}‖∇f(x_i)‖`.
    pub running_min: Vec<T>,
    /// `(k + 1)·min_{i≤k}‖∇f(x_i)‖`.
    pub products: Vec<T>,
    pub length_bound: T,
    /// `c_α = b_α(δ₀α + 2c)`.
    pub c_alpha: T,
    /// Supremum of `products` over the steps the bound covers.
    pub sup: T,
    /// `(k + 1)·min ≤ Σ_{i≤k}‖∇f(x_i)‖` at every `k`.
    pub telescoping_ok: bool,
    pub pass: bool,
}

/// Checks `min_{i≤k}‖∇f(x_i)‖ ≤ c_α/(k + 1)`.
///
/// The bound at index `k` uses `‖z_{k+1} − z_k‖`, so it is checked for
/// `k = 0 … K−1`; the products are reported for every `k`.
pub fn check_rate<T: Real>(trace: &Trace<T>, cert: &Certificate<T>, length_bound: T) -> RateReport<T> {
    let params = &cert.params;
    let c_alpha = cert.b_alpha * (params.delta() * params.alpha() + T::lit(2.0) * length_bound);
    let mut running_min = Vec::with_capacity(trace.records().len());
    let mut products = Vec::with_capacity(trace.records().len());
    let mut best = T::infinity();
    let mut sum = T::zero();
    let mut telescoping_ok = true;
    for (k, r) in trace.records().iter().enumerate() {
        best = best.min(r.grad_norm);
        sum += r.grad_norm;
        let prod = T::from_usize_lossy(k + 1) * best;
        if prod > sum * (T::one() + T::lit(SLACK_TOL)) {
            telescoping_ok = false;
        }
        running_min.push(best);
        products.push(prod);
    }
    let covered = trace.iterations().max(1).min(products.len());
    let sup = products[..covered].iter().copied().fold(T::zero(), T::max);
    RateReport {
        running_min,
        products,
        length_bound,
        c_alpha,
        sup,
        telescoping_ok,
        pass: sup <= c_alpha * (T::one() + T::lit(SLACK_TOL)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_is_recovered_exactly() {
        let gaps: Vec<f64> = (1..=40).map(|i| 0.9f64.powi(i)).collect();
        let grads: Vec<f64> = gaps.iter().map(|g| 3.0 * g.powf(0.6)).collect();
        let d = fit_desingularizer(&gaps, &grads, Some(0.0), &FitOptions::default()).unwrap();
        assert!((d.theta - 0.4).abs() < 1e-10);
        assert!((d.c - 1.0 / (3.0 * 0.4)).abs() < 1e-9);
        assert!(d.inflation < 1.0 + 1e-9);
    }

    #[test]
    fn too_few_samples_refused() {
        let v = vec![1.0, 0.5, 0.25];
        let g = vec![1.0, 0.7, 0.5];
        assert!(matches!(
            fit_desingularizer(&v, &g, Some(0.0), &FitOptions::default()),
            Err(Error::FitRefused(_))
        ));
    }

    #[test]
    fn invalid_exponent_rejected() {
        assert!(Desingularizer::power(1.0, 1.5).is_err());
        assert!(Desingularizer::power(1.0, 0.0).is_err());
        assert!(Desingularizer::power(-1.0, 0.5).is_err());
        let psi = Desingularizer::power(2.0, 0.5).unwrap();
        assert_eq!(psi.eval(4.0), 4.0);
        assert_eq!(psi.eval(0.0), 0.0);
    }

    #[test]
    fn tail_minimum_uses_last_ten() {
        let v: Vec<f64> = (0..30).map(|i| if i == 0 { -5.0 } else { 1.0 / i as f64 }).collect();
        assert_eq!(tail_minimum(&v), Some(1.0 / 29.0));
    }
}
