//! Differentiable objectives: the matrix benchmarks (factorization, sensing,
//! deep linear networks) and small analytic fixtures.
//!
//! Every problem exposes a flat variable vector. Matrix problems document
//! their block layout; each block is stored column-major.

mod fixtures;
mod lipschitz;
mod matrix;
mod network;

use serde::{Deserialize, Serialize};

pub use fixtures::{synthetic, Fixture, FixtureProblem};
pub use lipschitz::{estimate_lipschitz, LipschitzEstimate, LipschitzMode, LipschitzOptions};
pub use matrix::{matrix_factorization, matrix_sensing, MatrixFactorization, MatrixSensing};
pub use network::{linear_network, LinearNetwork};

use crate::linalg::{norm, Mat};
use crate::scalar::Real;

/// A smooth objective `f: R^dim -> R` with closed-form gradient.
pub trait Problem<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    fn name(&self) -> &str;

    fn value(&self, x: &[T]) -> T;

    fn gradient_into(&self, x: &[T], out: &mut [T]);

    fn gradient(&self, x: &[T]) -> Vec<T> {
        let mut g = vec![T::zero(); self.dim()];
        self.gradient_into(x, &mut g);
        g
    }

    /// Hessian-vector product `∇²f(x) v`, when the problem provides one.
    fn hessian_vec(&self, _x: &[T], _v: &[T]) -> Option<Vec<T>> {
        None
    }

    fn has_hessian(&self) -> bool {
        false
    }

    /// Radius of the ball around [`Problem::reference_point`] on which
    /// Lipschitz constants are estimated by default.
    fn suggested_radius(&self) -> T;

    fn reference_point(&self) -> Vec<T> {
        vec![T::zero(); self.dim()]
    }

    /// Global minimum value, if known in closed form.
    fn known_minimum(&self) -> Option<T> {
        None
    }

    /// Seed used to draw a random instance.
    fn seed(&self) -> Option<u64> {
        None
    }

    /// Closed-form `(L, M)` bounds on `B(center, radius)`:
    /// `L >= sup ‖∇f‖` and `M >=` Lipschitz modulus of `∇f`.
    fn analytic_lipschitz(&self, _center: &[T], _radius: T) -> Option<(T, T)> {
        None
    }
}

impl<T: Real, P: Problem<T> + ?Sized> Problem<T> for Box<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
    fn value(&self, x: &[T]) -> T {
        (**self).value(x)
    }
    fn gradient_into(&self, x: &[T], out: &mut [T]) {
        (**self).gradient_into(x, out)
    }
    fn gradient(&self, x: &[T]) -> Vec<T> {
        (**self).gradient(x)
    }
    fn hessian_vec(&self, x: &[T], v: &[T]) -> Option<Vec<T>> {
        (**self).hessian_vec(x, v)
    }
    fn has_hessian(&self) -> bool {
        (**self).has_hessian()
    }
    fn suggested_radius(&self) -> T {
        (**self).suggested_radius()
    }
    fn reference_point(&self) -> Vec<T> {
        (**self).reference_point()
    }
    fn known_minimum(&self) -> Option<T> {
        (**self).known_minimum()
    }
    fn seed(&self) -> Option<u64> {
        (**self).seed()
    }
    fn analytic_lipschitz(&self, center: &[T], radius: T) -> Option<(T, T)> {
        (**self).analytic_lipschitz(center, radius)
    }
}

/// Factor shapes of the matrix problems: `X` is `m×r`, `Y` is `n×r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixShape {
    pub m: usize,
    pub n: usize,
    pub r: usize,
}

impl MatrixShape {
    pub fn dim(&self) -> usize {
        (self.m + self.n) * self.r
    }

    /// Splits a flat vector into `(X, Y)`, X block first.
    pub fn unpack<T: Real>(&self, x: &[T]) -> (Mat<T>, Mat<T>) {
        let split = self.m * self.r;
        let xm = Mat::from_col_major(self.m, self.r, x[..split].to_vec())
            .expect("block length matches shape");
        let ym = Mat::from_col_major(self.n, self.r, x[split..].to_vec())
            .expect("block length matches shape");
        (xm, ym)
    }

    pub fn pack_into<T: Real>(&self, xm: &Mat<T>, ym: &Mat<T>, out: &mut [T]) {
        let split = self.m * self.r;
        out[..split].copy_from_slice(xm.as_slice());
        out[split..].copy_from_slice(ym.as_slice());
    }
}

/// Central finite-difference gradient with step `h = 1e-5 (1 + ‖x‖)`.
pub fn finite_difference_gradient<T: Real, P: Problem<T> + ?Sized>(p: &P, x: &[T]) -> Vec<T> {
    let h = T::lit(1e-5) * (T::one() + norm(x));
    let two_h = h + h;
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let xi = xp[i];
            xp[i] = xi + h;
            let fp = p.value(&xp);
            xp[i] = xi - h;
            let fm = p.value(&xp);
            xp[i] = xi;
            (fp - fm) / two_h
        })
        .collect()
}

/// Central finite-difference Hessian-vector product (difference of gradients
/// along `v`).
pub fn finite_difference_hessian_vec<T: Real, P: Problem<T> + ?Sized>(
    p: &P,
    x: &[T],
    v: &[T],
) -> Vec<T> {
    let vn = norm(v);
    if vn == T::zero() {
        return vec![T::zero(); x.len()];
    }
    let h = T::lit(1e-5) * (T::one() + norm(x)) / vn;
    let xp: Vec<T> = x.iter().zip(v).map(|(&a, &b)| a + h * b).collect();
    let xm: Vec<T> = x.iter().zip(v).map(|(&a, &b)| a - h * b).collect();
    let gp = p.gradient(&xp);
    let gm = p.gradient(&xm);
    gp.iter().zip(&gm).map(|(&a, &b)| (a - b) / (h + h)).collect()
}

/// Relative discrepancy `‖a − b‖ / max(‖a‖, ‖b‖, floor)`.
pub fn relative_error<T: Real>(a: &[T], b: &[T], floor: T) -> T {
    let num = crate::linalg::dist(a, b);
    num / norm(a).max(norm(b)).max(floor)
}

/// Dense Hessian assembled column by column from Hessian-vector products
/// (falling back to finite differences of the gradient), then symmetrized.
pub fn dense_hessian<T: Real, P: Problem<T> + ?Sized>(p: &P, x: &[T]) -> Mat<T> {
    let n = p.dim();
    let mut h = Mat::zeros(n, n);
    let mut e = vec![T::zero(); n];
    for j in 0..n {
        e[j] = T::one();
        let col = p
            .hessian_vec(x, &e)
            .unwrap_or_else(|| finite_difference_hessian_vec(p, x, &e));
        for (i, &v) in col.iter().enumerate() {
            h[(i, j)] = v;
        }
        e[j] = T::zero();
    }
    let half = T::lit(0.5);
    Mat::from_fn(n, n, |i, j| (h[(i, j)] + h[(j, i)]) * half)
}
