use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dist, norm};
use crate::problems::Problem;
use crate::sampling::{seeded_rng, uniform_in_ball};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzMode {
    Sampled,
    Analytic,
}

impl std::str::FromStr for LipschitzMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sampled" => Ok(Self::Sampled),
            "analytic" => Ok(Self::Analytic),
            other => Err(Error::InvalidParameter(format!("unknown Lipschitz mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzOptions {
    /// Number of sampled point pairs.
    pub pairs: usize,
    /// Multiplier applied to the empirical maxima.
    pub safety_factor: f64,
    pub seed: u64,
    /// `max{|β|, |γ|}`; the estimation ball is enlarged to radius
    /// `(1 + 2·spread)·R` to contain every extrapolated point.
    pub spread: f64,
}

impl Default for LipschitzOptions {
    fn default() -> Self {
        Self {
            pairs: 1000,
            safety_factor: 2.0,
            seed: 0,
            spread: 0.0,
        }
    }
}

/// Bounds `L ≥ sup‖∇f‖` and `M ≥ Lip(∇f)` on an enlarged ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate<T> {
    /// `L`: bound on the gradient norm, hence a Lipschitz constant of `f`.
    pub grad_bound: T,
    /// `M`: Lipschitz constant of the gradient.
    pub grad_lipschitz: T,
    pub center: Vec<T>,
    /// Certified radius `R`: iterates must stay in `B(center, R)`.
    pub radius: T,
    /// Radius `R' = (1 + 2·spread)·R` actually sampled.
    pub effective_radius: T,
    pub mode: LipschitzMode,
    pub pairs: usize,
    pub safety_factor: T,
    pub sampled_grad_max: T,
    pub sampled_quotient_max: T,
    pub seeds: Vec<u64>,
    spread: T,
}

/// Estimates `(L, M)` on `B(center, (1 + 2·spread)·radius)`.
///
/// Sampled mode inflates the empirical maxima of `‖∇f‖` and of the difference
/// quotients `‖∇f(x) − ∇f(y)‖ / ‖x − y‖` by `safety_factor`. Half the pairs
/// are drawn independently across the ball and half as close neighbours, so
/// both global and local curvature are probed.
pub fn estimate_lipschitz<T: Real, P: Problem<T> + ?Sized>(
    p: &P,
    center: &[T],
    radius: T,
    mode: LipschitzMode,
    opts: &LipschitzOptions,
) -> Result<LipschitzEstimate<T>> {
    check_len("Lipschitz center", p.dim(), center.len())?;
    if !(radius > T::zero()) {
        return Err(Error::InvalidParameter("estimation radius must be positive".into()));
    }
    let spread = T::lit(opts.spread.abs());
    let effective = (T::one() + spread + spread) * radius;
    match mode {
        LipschitzMode::Analytic => {
            let (l, m) = p
                .analytic_lipschitz(center, effective)
                .ok_or_else(|| Error::UnsupportedMode("analytic", p.name().to_string()))?;
            Ok(LipschitzEstimate {
                grad_bound: l,
                grad_lipschitz: m,
                center: center.to_vec(),
                radius,
                effective_radius: effective,
                mode,
                pairs: 0,
                safety_factor: T::one(),
                sampled_grad_max: l,
                sampled_quotient_max: m,
                seeds: Vec::new(),
                spread,
            })
        }
        LipschitzMode::Sampled => {
            if opts.pairs == 0 {
                return Err(Error::InvalidParameter("sampled mode needs at least one pair".into()));
            }
            let (gmax, qmax) = sample_maxima(p, center, effective, opts.pairs, opts.seed);
            let gmax = gmax.max(norm(&p.gradient(center)));
            let safety = T::lit(opts.safety_factor);
            let mut est = LipschitzEstimate {
                grad_bound: T::zero(),
                grad_lipschitz: T::zero(),
                center: center.to_vec(),
                radius,
                effective_radius: effective,
                mode,
                pairs: opts.pairs,
                safety_factor: safety,
                sampled_grad_max: gmax,
                sampled_quotient_max: qmax,
                seeds: vec![opts.seed],
                spread,
            };
            est.refresh_bounds();
            Ok(est)
        }
    }
}

impl<T: Real> LipschitzEstimate<T> {
    /// Extends a sampled estimate to a (possibly larger) radius with a fresh
    /// batch drawn from `seed`. The retained samples keep the result
    /// monotone: the returned constants never decrease.
    pub fn extend<P: Problem<T> + ?Sized>(&mut self, p: &P, radius: T, seed: u64) -> Result<()> {
        if self.mode != LipschitzMode::Sampled {
            return Err(Error::InvalidParameter("only sampled estimates can be extended".into()));
        }
        let radius = radius.max(self.radius);
        let effective = (T::one() + self.spread + self.spread) * radius;
        let (gmax, qmax) = sample_maxima(p, &self.center, effective, self.pairs, seed);
        self.sampled_grad_max = self.sampled_grad_max.max(gmax);
        self.sampled_quotient_max = self.sampled_quotient_max.max(qmax);
        self.radius = radius;
        self.effective_radius = effective;
        self.seeds.push(seed);
        self.refresh_bounds();
        Ok(())
    }

    /// Whether `x` lies in the certified ball `B(center, radius)`.
    pub fn contains(&self, x: &[T]) -> bool {
        dist(x, &self.center) <= self.radius
    }

    fn refresh_bounds(&mut self) {
        // A vanishing gradient field still needs a positive modulus downstream.
        let floor = T::epsilon();
        self.grad_bound = (self.safety_factor * self.sampled_grad_max).max(floor);
        self.grad_lipschitz = (self.safety_factor * self.sampled_quotient_max).max(floor);
    }
}

fn sample_maxima<T: Real, P: Problem<T> + ?Sized>(
    p: &P,
    center: &[T],
    effective: T,
    pairs: usize,
    seed: u64,
) -> (T, T) {
    let mut rng = seeded_rng(seed, 0x11b5);
    let local = T::lit(1e-2) * effective;
    let mut gmax = T::zero();
    let mut qmax = T::zero();
    for i in 0..pairs {
        let x = uniform_in_ball(&mut rng, center, effective);
        let mut y = if i % 2 == 0 {
            uniform_in_ball(&mut rng, center, effective)
        } else {
            uniform_in_ball(&mut rng, &x, local)
        };
        let dy = dist(&y, center);
        if dy > effective {
            let s = effective / dy;
            for (yi, &ci) in y.iter_mut().zip(center) {
                *yi = ci + (*yi - ci) * s;
            }
        }
        let gx = p.gradient(&x);
        let gy = p.gradient(&y);
        gmax = gmax.max(norm(&gx)).max(norm(&gy));
        let d = dist(&x, &y);
        if d > T::zero() {
            qmax = qmax.max(dist(&gx, &gy) / d);
        }
    }
    (gmax, qmax)
}
