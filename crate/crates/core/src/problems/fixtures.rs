use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::problems::Problem;
use crate::scalar::Real;

/// Analytic test functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixture {
    /// `½‖x‖²`.
    Quadratic { dim: usize },
    /// `½(x₁² − x₂²)`, a strict saddle at the origin.
    IndefiniteQuadratic,
    /// `Σ xᵢ⁴`, Łojasiewicz exponent 1/4 at the origin.
    Quartic { dim: usize },
}

impl Fixture {
    pub fn dim(&self) -> usize {
        match *self {
            Fixture::Quadratic { dim } | Fixture::Quartic { dim } => dim,
            Fixture::IndefiniteQuadratic => 2,
        }
    }

    pub fn with_dim(self, dim: usize) -> Self {
        match self {
            Fixture::Quadratic { .. } => Fixture::Quadratic { dim },
            Fixture::Quartic { .. } => Fixture::Quartic { dim },
            other => other,
        }
    }
}

impl FromStr for Fixture {
    type Err = Error;

    /// Parses `quadratic`, `indefinite_quadratic` or `quartic` with default
    /// dimensions 2, 2 and 1.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(Fixture::Quadratic { dim: 2 }),
            "indefinite_quadratic" => Ok(Fixture::IndefiniteQuadratic),
            "quartic" => Ok(Fixture::Quartic { dim: 1 }),
            other => Err(Error::UnknownFixture(other.to_string())),
        }
    }
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fixture::Quadratic { dim } => write!(f, "quadratic(dim={dim})"),
            Fixture::IndefiniteQuadratic => write!(f, "indefinite_quadratic"),
            Fixture::Quartic { dim } => write!(f, "quartic(dim={dim})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixtureProblem<T> {
    fixture: Fixture,
    name: String,
    _scalar: std::marker::PhantomData<T>,
}

pub fn synthetic<T: Real>(fixture: Fixture) -> Result<FixtureProblem<T>> {
    if fixture.dim() == 0 {
        return Err(Error::InvalidParameter("fixture dimension must be at least 1".into()));
    }
    Ok(FixtureProblem {
        fixture,
        name: fixture.to_string(),
        _scalar: std::marker::PhantomData,
    })
}

impl<T: Real> FixtureProblem<T> {
    pub fn fixture(&self) -> Fixture {
        self.fixture
    }

    /// Diagonal of the (always diagonal) Hessian at `x`.
    pub fn hessian_diagonal(&self, x: &[T]) -> Vec<T> {
        match self.fixture {
            Fixture::Quadratic { dim } => vec![T::one(); dim],
            Fixture::IndefiniteQuadratic => vec![T::one(), -T::one()],
            Fixture::Quartic { .. } => x.iter().map(|&v| T::lit(12.0) * v * v).collect(),
        }
    }
}

impl<T: Real> Problem<T> for FixtureProblem<T> {
    fn dim(&self) -> usize {
        self.fixture.dim()
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, x: &[T]) -> T {
        let half = T::lit(0.5);
        match self.fixture {
            Fixture::Quadratic { .. } => half * x.iter().map(|&v| v * v).sum::<T>(),
            Fixture::IndefiniteQuadratic => half * (x[0] * x[0] - x[1] * x[1]),
            Fixture::Quartic { .. } => x.iter().map(|&v| (v * v) * (v * v)).sum(),
        }
    }

    fn gradient_into(&self, x: &[T], out: &mut [T]) {
        match self.fixture {
            Fixture::Quadratic { .. } => out.copy_from_slice(x),
            Fixture::IndefiniteQuadratic => {
                out[0] = x[0];
                out[1] = -x[1];
            }
            Fixture::Quartic { .. } => {
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = T::lit(4.0) * v * v * v;
                }
            }
        }
    }

    fn hessian_vec(&self, x: &[T], v: &[T]) -> Option<Vec<T>> {
        Some(
            self.hessian_diagonal(x)
                .into_iter()
                .zip(v)
                .map(|(d, &vi)| d * vi)
                .collect(),
        )
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn suggested_radius(&self) -> T {
        T::lit(2.0)
    }

    fn known_minimum(&self) -> Option<T> {
        match self.fixture {
            Fixture::IndefiniteQuadratic => None,
            _ => Some(T::zero()),
        }
    }

    fn analytic_lipschitz(&self, center: &[T], radius: T) -> Option<(T, T)> {
        let rho = norm(center) + radius;
        Some(match self.fixture {
            Fixture::Quadratic { .. } | Fixture::IndefiniteQuadratic => (rho, T::one()),
            // |12 xᵢ²| ≤ 12ρ² and ‖(4xᵢ³)‖ ≤ 4ρ³ on the ball.
            Fixture::Quartic { .. } => (T::lit(4.0) * rho * rho * rho, T::lit(12.0) * rho * rho),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_evaluation() {
        let p = synthetic::<f64>(Fixture::Quadratic { dim: 2 }).unwrap();
        assert_eq!(p.value(&[3.0, 4.0]), 12.5);
        assert_eq!(p.gradient(&[3.0, 4.0]), vec![3.0, 4.0]);
    }

    #[test]
    fn indefinite_hessian_eigenvalues() {
        let p = synthetic::<f64>(Fixture::IndefiniteQuadratic).unwrap();
        assert_eq!(p.hessian_diagonal(&[0.3, -2.0]), vec![1.0, -1.0]);
    }

    #[test]
    fn quartic_gradient_is_power_of_value() {
        let p = synthetic::<f64>(Fixture::Quartic { dim: 1 }).unwrap();
        for &x in &[0.1, 0.5, -0.7, 1.3] {
            let g = p.gradient(&[x])[0].abs();
            let f = p.value(&[x]);
            assert!((g - 4.0 * f.powf(0.75)).abs() < 1e-12 * (1.0 + g));
        }
    }

    #[test]
    fn unknown_fixture_name() {
        assert_eq!(
            "rosenbrock".parse::<Fixture>(),
            Err(Error::UnknownFixture("rosenbrock".into()))
        );
        assert_eq!("quartic".parse::<Fixture>(), Ok(Fixture::Quartic { dim: 1 }));
    }
}
