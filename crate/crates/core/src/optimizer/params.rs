use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Generic,
    HeavyBall,
    Nesterov,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic" => Ok(Preset::Generic),
            "heavy_ball" => Ok(Preset::HeavyBall),
            "nesterov" => Ok(Preset::Nesterov),
            other => Err(Error::InvalidParameter(format!("unknown preset `{other}`"))),
        }
    }
}

/// Step size `α > 0`, momentum `β ∈ (−1, 1)`, gradient extrapolation `γ`,
/// and initial-velocity bound `δ ≥ 0` (`‖x_0 − x_{−1}‖ ≤ δα`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams<T>", into = "RawParams<T>")]
#[serde(bound = "T: Real")]
pub struct MomentumParams<T> {
    alpha: T,
    beta: T,
    gamma: T,
    delta: T,
    preset: Preset,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct RawParams<T> {
    alpha: T,
    beta: T,
    gamma: T,
    #[serde(default)]
    delta: T,
    preset: Preset,
}

impl<T: Real> TryFrom<RawParams<T>> for MomentumParams<T> {
    type Error = Error;
    fn try_from(raw: RawParams<T>) -> Result<Self> {
        let p = Self {
            alpha: raw.alpha,
            beta: raw.beta,
            gamma: raw.gamma,
            delta: raw.delta,
            preset: raw.preset,
        };
        p.validate()?;
        Ok(p)
    }
}

impl<T: Real> From<MomentumParams<T>> for RawParams<T> {
    fn from(p: MomentumParams<T>) -> Self {
        Self {
            alpha: p.alpha,
            beta: p.beta,
            gamma: p.gamma,
            delta: p.delta,
            preset: p.preset,
        }
    }
}

impl<T: Real> MomentumParams<T> {
    pub fn generic(alpha: T, beta: T, gamma: T) -> Result<Self> {
        Self::build(alpha, beta, gamma, Preset::Generic)
    }

    /// Polyak's heavy ball, `γ = 0`.
    pub fn heavy_ball(alpha: T, beta: T) -> Result<Self> {
        Self::build(alpha, beta, T::zero(), Preset::HeavyBall)
    }

    /// Nesterov's extrapolated gradient, `γ = β`.
    pub fn nesterov(alpha: T, beta: T) -> Result<Self> {
        Self::build(alpha, beta, beta, Preset::Nesterov)
    }

    /// Builds from a preset; `gamma` is ignored unless the preset is generic.
    pub fn from_preset(preset: Preset, alpha: T, beta: T, gamma: T) -> Result<Self> {
        match preset {
            Preset::Generic => Self::generic(alpha, beta, gamma),
            Preset::HeavyBall => Self::heavy_ball(alpha, beta),
            Preset::Nesterov => Self::nesterov(alpha, beta),
        }
    }

    fn build(alpha: T, beta: T, gamma: T, preset: Preset) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            gamma,
            delta: T::zero(),
            preset,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero()) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "step size alpha must be positive and finite, got {}",
                self.alpha
            )));
        }
        if !(self.beta.abs() < T::one()) {
            return Err(Error::InvalidParameter(format!(
                "momentum beta must lie in (-1, 1), got {}",
                self.beta
            )));
        }
        if !self.gamma.is_finite() {
            return Err(Error::InvalidParameter("gamma must be finite".into()));
        }
        if !(self.delta >= T::zero()) || !self.delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "initial-velocity bound delta must be nonnegative, got {}",
                self.delta
            )));
        }
        match self.preset {
            Preset::HeavyBall if self.gamma != T::zero() => Err(Error::InvalidParameter(
                "heavy ball requires gamma = 0".into(),
            )),
            Preset::Nesterov if self.gamma != self.beta => Err(Error::InvalidParameter(
                "Nesterov requires gamma = beta".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn with_alpha(mut self, alpha: T) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn with_delta(mut self, delta: T) -> Result<Self> {
        self.delta = delta;
        self.validate()?;
        Ok(self)
    }

    #[inline]
    pub fn alpha(&self) -> T {
        self.alpha
    }

    #[inline]
    pub fn beta(&self) -> T {
        self.beta
    }

    #[inline]
    pub fn gamma(&self) -> T {
        self.gamma
    }

    #[inline]
    pub fn delta(&self) -> T {
        self.delta
    }

    #[inline]
    pub fn preset(&self) -> Preset {
        self.preset
    }

    /// `max{|β|, |γ|}`, the extrapolation reach used to size Lipschitz balls.
    pub fn spread(&self) -> T {
        self.beta.abs().max(self.gamma.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_pin_gamma() {
        let hb = MomentumParams::heavy_ball(0.1, 0.4).unwrap();
        assert_eq!(hb.gamma(), 0.0);
        let nag = MomentumParams::nesterov(0.1, 0.4).unwrap();
        assert_eq!(nag.gamma(), nag.beta());
        let hb2 = MomentumParams::from_preset(Preset::HeavyBall, 0.1, 0.4, 3.0).unwrap();
        assert_eq!(hb2, hb);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(MomentumParams::heavy_ball(0.0, 0.5).is_err());
        assert!(MomentumParams::heavy_ball(0.1, 1.0).is_err());
        assert!(MomentumParams::heavy_ball(0.1, -1.0).is_err());
        assert!(MomentumParams::generic(0.1, 0.5, f64::NAN).is_err());
        assert!(MomentumParams::heavy_ball(0.1, 0.5).unwrap().with_delta(-1.0).is_err());
    }

    #[test]
    fn deserialization_validates_preset() {
        let bad = r#"{"alpha":0.1,"beta":0.5,"gamma":0.3,"delta":0.0,"preset":"nesterov"}"#;
        assert!(serde_json::from_str::<MomentumParams<f64>>(bad).is_err());
        let good = r#"{"alpha":0.1,"beta":0.5,"gamma":0.5,"preset":"nesterov"}"#;
        let p: MomentumParams<f64> = serde_json::from_str(good).unwrap();
        assert_eq!(p.delta(), 0.0);
    }
}
