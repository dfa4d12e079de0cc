use crate::error::{check_len, Error, Result};
use crate::linalg::{norm, symmetric_eigenvalues, Mat};
use crate::problems::{MatrixShape, Problem};
use crate::sampling::{gaussian_vec, seeded_rng};
use crate::scalar::Real;

/// `f(X, Y) = ‖X Yᵀ − M‖_F²`.
///
/// Layout: `x = [vec(X); vec(Y)]` with `X` of size `m×r` and `Y` of size
/// `n×r`, both column-major.
#[derive(Debug, Clone)]
pub struct MatrixFactorization<T> {
    target: Mat<T>,
    shape: MatrixShape,
    optimum: T,
    seed: Option<u64>,
    name: String,
}

/// Builds the factorization objective for `target` with inner rank `r`.
pub fn matrix_factorization<T: Real>(target: Mat<T>, r: usize) -> Result<MatrixFactorization<T>> {
    MatrixFactorization::new(target, r)
}

impl<T: Real> MatrixFactorization<T> {
    pub fn new(target: Mat<T>, r: usize) -> Result<Self> {
        let (m, n) = (target.rows(), target.cols());
        if r == 0 {
            return Err(Error::InvalidParameter("rank r must be at least 1".into()));
        }
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter("target matrix must be non-empty".into()));
        }
        if !target.is_finite() {
            return Err(Error::InvalidParameter("target matrix has non-finite entries".into()));
        }
        // Eckart–Young: the optimum is the energy outside the top-r singular values.
        let gram = if m >= n { target.tr_matmul(&target) } else { target.matmul_tr(&target) };
        let eigs = symmetric_eigenvalues(&gram);
        let keep = eigs.len().saturating_sub(r);
        let optimum = eigs[..keep].iter().map(|&e| e.max(T::zero())).sum();
        Ok(Self {
            target,
            shape: MatrixShape { m, n, r },
            optimum,
            seed: None,
            name: format!("matrix_factorization({m}x{n}, r={r})"),
        })
    }

    /// Random Gaussian target with i.i.d. standard normal entries.
    pub fn random(m: usize, n: usize, r: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded_rng(seed, 0);
        let data = gaussian_vec(&mut rng, m * n);
        let mut p = Self::new(Mat::from_col_major(m, n, data)?, r)?;
        p.seed = Some(seed);
        Ok(p)
    }

    pub fn shape(&self) -> MatrixShape {
        self.shape
    }

    pub fn target(&self) -> &Mat<T> {
        &self.target
    }

    fn residual(&self, xm: &Mat<T>, ym: &Mat<T>) -> Mat<T> {
        xm.matmul_tr(ym).minus(&self.target)
    }
}

impl<T: Real> Problem<T> for MatrixFactorization<T> {
    fn dim(&self) -> usize {
        self.shape.dim()
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, x: &[T]) -> T {
        let (xm, ym) = self.shape.unpack(x);
        self.residual(&xm, &ym).frobenius_sq()
    }

    fn gradient_into(&self, x: &[T], out: &mut [T]) {
        let (xm, ym) = self.shape.unpack(x);
        let res = self.residual(&xm, &ym);
        let two = T::lit(2.0);
        let gx = res.matmul(&ym).scale(two);
        let gy = res.tr_matmul(&xm).scale(two);
        self.shape.pack_into(&gx, &gy, out);
    }

    fn hessian_vec(&self, x: &[T], v: &[T]) -> Option<Vec<T>> {
        let (xm, ym) = self.shape.unpack(x);
        let (um, vm) = self.shape.unpack(v);
        let res = self.residual(&xm, &ym);
        let dres = um.matmul_tr(&ym).plus(&xm.matmul_tr(&vm));
        let two = T::lit(2.0);
        let hx = dres.matmul(&ym).plus(&res.matmul(&vm)).scale(two);
        let hy = dres.tr_matmul(&xm).plus(&res.tr_matmul(&um)).scale(two);
        let mut out = vec![T::zero(); self.dim()];
        self.shape.pack_into(&hx, &hy, &mut out);
        Some(out)
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn suggested_radius(&self) -> T {
        let r = T::from_usize_lossy(self.shape.r);
        (T::lit(2.0) * r.sqrt() * self.target.frobenius()).sqrt() + T::one()
    }

    fn known_minimum(&self) -> Option<T> {
        Some(self.optimum)
    }

    fn seed(&self) -> Option<u64> {
        self.seed
    }

    fn analytic_lipschitz(&self, center: &[T], radius: T) -> Option<(T, T)> {
        // With ρ ≥ ‖(X, Y)‖: ‖R‖ ≤ ρ²/2 + ‖M‖, ‖∇f‖ ≤ 2‖R‖ρ, ‖∇²f‖ ≤ 4ρ² + 2‖R‖.
        let rho = norm(center) + radius;
        let mnorm = self.target.frobenius();
        let res = rho * rho * T::lit(0.5) + mnorm;
        let l = T::lit(2.0) * res * rho;
        let m = T::lit(4.0) * rho * rho + T::lit(2.0) * res;
        Some((l, m))
    }
}

/// `f(X, Y) = Σᵢ (⟨Aᵢ, X Yᵀ⟩_F − bᵢ)²`, same layout as
/// [`MatrixFactorization`].
#[derive(Debug, Clone)]
pub struct MatrixSensing<T> {
    sensing: Vec<Mat<T>>,
    measurements: Vec<T>,
    shape: MatrixShape,
    planted: bool,
    seed: Option<u64>,
    name: String,
}

pub fn matrix_sensing<T: Real>(
    sensing: Vec<Mat<T>>,
    measurements: Vec<T>,
    r: usize,
) -> Result<MatrixSensing<T>> {
    MatrixSensing::new(sensing, measurements, r)
}

impl<T: Real> MatrixSensing<T> {
    pub fn new(sensing: Vec<Mat<T>>, measurements: Vec<T>, r: usize) -> Result<Self> {
        if sensing.is_empty() {
            return Err(Error::InvalidParameter("at least one sensing matrix is required".into()));
        }
        if r == 0 {
            return Err(Error::InvalidParameter("rank r must be at least 1".into()));
        }
        check_len("measurement vector", sensing.len(), measurements.len())?;
        let (m, n) = (sensing[0].rows(), sensing[0].cols());
        for a in &sensing[1..] {
            check_len("sensing matrix rows", m, a.rows())?;
            check_len("sensing matrix cols", n, a.cols())?;
        }
        let p = sensing.len();
        Ok(Self {
            sensing,
            measurements,
            shape: MatrixShape { m, n, r },
            planted: false,
            seed: None,
            name: format!("matrix_sensing({m}x{n}, r={r}, p={p})"),
        })
    }

    /// Gaussian sensing matrices scaled by `1/√p` and measurements of a planted
    /// rank-`r` matrix, so the optimum value is 0.
    pub fn random(m: usize, n: usize, r: usize, p: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded_rng(seed, 0);
        let scale = T::one() / T::from_usize_lossy(p.max(1)).sqrt();
        let sensing: Vec<Mat<T>> = (0..p)
            .map(|_| {
                Mat::from_col_major(m, n, gaussian_vec(&mut rng, m * n))
                    .map(|a| a.scale(scale))
            })
            .collect::<Result<_>>()?;
        let xs = Mat::from_col_major(m, r, gaussian_vec(&mut rng, m * r))?;
        let ys = Mat::from_col_major(n, r, gaussian_vec(&mut rng, n * r))?;
        let planted = xs.matmul_tr(&ys);
        let b = sensing.iter().map(|a| a.inner(&planted)).collect();
        let mut s = Self::new(sensing, b, r)?;
        s.planted = true;
        s.seed = Some(seed);
        Ok(s)
    }

    pub fn shape(&self) -> MatrixShape {
        self.shape
    }

    pub fn measurement_count(&self) -> usize {
        self.sensing.len()
    }

    fn residuals(&self, product: &Mat<T>) -> Vec<T> {
        self.sensing
            .iter()
            .zip(&self.measurements)
            .map(|(a, &b)| a.inner(product) - b)
            .collect()
    }

    fn combine(&self, weights: &[T]) -> Mat<T> {
        let mut g = Mat::zeros(self.shape.m, self.shape.n);
        for (a, &w) in self.sensing.iter().zip(weights) {
            g = g.plus(&a.clone().scale(w));
        }
        g
    }
}

impl<T: Real> Problem<T> for MatrixSensing<T> {
    fn dim(&self) -> usize {
        self.shape.dim()
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, x: &[T]) -> T {
        let (xm, ym) = self.shape.unpack(x);
        let res = self.residuals(&xm.matmul_tr(&ym));
        res.iter().map(|&r| r * r).sum()
    }

    fn gradient_into(&self, x: &[T], out: &mut [T]) {
        let (xm, ym) = self.shape.unpack(x);
        let res = self.residuals(&xm.matmul_tr(&ym));
        let g = self.combine(&res);
        let two = T::lit(2.0);
        let gx = g.matmul(&ym).scale(two);
        let gy = g.tr_matmul(&xm).scale(two);
        self.shape.pack_into(&gx, &gy, out);
    }

    fn hessian_vec(&self, x: &[T], v: &[T]) -> Option<Vec<T>> {
        let (xm, ym) = self.shape.unpack(x);
        let (um, vm) = self.shape.unpack(v);
        let res = self.residuals(&xm.matmul_tr(&ym));
        let dprod = um.matmul_tr(&ym).plus(&xm.matmul_tr(&vm));
        let dres: Vec<T> = self.sensing.iter().map(|a| a.inner(&dprod)).collect();
        let g = self.combine(&res);
        let dg = self.combine(&dres);
        let two = T::lit(2.0);
        let hx = dg.matmul(&ym).plus(&g.matmul(&vm)).scale(two);
        let hy = dg.tr_matmul(&xm).plus(&g.tr_matmul(&um)).scale(two);
        let mut out = vec![T::zero(); self.dim()];
        self.shape.pack_into(&hx, &hy, &mut out);
        Some(out)
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn suggested_radius(&self) -> T {
        let r = T::from_usize_lossy(self.shape.r);
        (T::lit(2.0) * r.sqrt() * norm(&self.measurements)).sqrt() + T::one()
    }

    fn known_minimum(&self) -> Option<T> {
        self.planted.then(T::zero)
    }

    fn seed(&self) -> Option<u64> {
        self.seed
    }
}
