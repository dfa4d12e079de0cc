use crate::error::{check_len, Error, Result};
use crate::linalg::Mat;
use crate::problems::Problem;
use crate::sampling::{gaussian_vec, seeded_rng};
use crate::scalar::Real;

/// Deep linear network loss `‖W_l ⋯ W_1 X̄ − Ȳ‖_F²`.
///
/// `W_j` has shape `n_j × n_{j-1}`. Layout: `[vec(W_1); …; vec(W_l)]`, each
/// column-major.
#[derive(Debug, Clone)]
pub struct LinearNetwork<T> {
    inputs: Mat<T>,
    targets: Mat<T>,
    widths: Vec<usize>,
    offsets: Vec<usize>,
    seed: Option<u64>,
    name: String,
}

pub fn linear_network<T: Real>(
    inputs: Mat<T>,
    targets: Mat<T>,
    widths: Vec<usize>,
) -> Result<LinearNetwork<T>> {
    LinearNetwork::new(inputs, targets, widths)
}

impl<T: Real> LinearNetwork<T> {
    pub fn new(inputs: Mat<T>, targets: Mat<T>, widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidParameter(
                "a linear network needs at least one layer (two widths)".into(),
            ));
        }
        if widths.contains(&0) {
            return Err(Error::InvalidParameter("layer widths must be at least 1".into()));
        }
        let layers = widths.len() - 1;
        check_len("input rows (n_0)", widths[0], inputs.rows())?;
        check_len("target rows (n_l)", widths[layers], targets.rows())?;
        check_len("sample count", inputs.cols(), targets.cols())?;
        let mut offsets = Vec::with_capacity(widths.len());
        offsets.push(0);
        for j in 1..=layers {
            let prev = offsets[j - 1];
            offsets.push(prev + widths[j] * widths[j - 1]);
        }
        let name = format!(
            "linear_network(widths={:?}, samples={})",
            widths,
            inputs.cols()
        );
        Ok(Self {
            inputs,
            targets,
            widths,
            offsets,
            seed: None,
            name,
        })
    }

    /// Gaussian inputs and targets.
    pub fn random(widths: Vec<usize>, samples: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded_rng(seed, 0);
        let n0 = *widths.first().unwrap_or(&0);
        let nl = *widths.last().unwrap_or(&0);
        let inputs = Mat::from_col_major(n0, samples, gaussian_vec(&mut rng, n0 * samples))?;
        let targets = Mat::from_col_major(nl, samples, gaussian_vec(&mut rng, nl * samples))?;
        let mut net = Self::new(inputs, targets, widths)?;
        net.seed = Some(seed);
        Ok(net)
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// `W_j` for `j` in `1..=layers`.
    fn weight(&self, x: &[T], j: usize) -> Mat<T> {
        let slice = &x[self.offsets[j - 1]..self.offsets[j]];
        Mat::from_col_major(self.widths[j], self.widths[j - 1], slice.to_vec())
            .expect("offsets match widths")
    }

    fn forward(&self, weights: &[Mat<T>]) -> Vec<Mat<T>> {
        let mut acts = Vec::with_capacity(weights.len() + 1);
        acts.push(self.inputs.clone());
        for w in weights {
            let next = w.matmul(acts.last().expect("non-empty"));
            acts.push(next);
        }
        acts
    }

    fn weights(&self, x: &[T]) -> Vec<Mat<T>> {
        (1..=self.layers()).map(|j| self.weight(x, j)).collect()
    }

    fn write_block(&self, j: usize, block: &Mat<T>, out: &mut [T]) {
        out[self.offsets[j - 1]..self.offsets[j]].copy_from_slice(block.as_slice());
    }
}

impl<T: Real> Problem<T> for LinearNetwork<T> {
    fn dim(&self) -> usize {
        *self.offsets.last().expect("non-empty")
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, x: &[T]) -> T {
        let acts = self.forward(&self.weights(x));
        acts.last().expect("non-empty").clone().minus(&self.targets).frobenius_sq()
    }

    fn gradient_into(&self, x: &[T], out: &mut [T]) {
        let ws = self.weights(x);
        let acts = self.forward(&ws);
        let l = ws.len();
        let two = T::lit(2.0);
        let mut back = acts[l].clone().minus(&self.targets);
        for j in (1..=l).rev() {
            let g = back.matmul_tr(&acts[j - 1]).scale(two);
            self.write_block(j, &g, out);
            if j > 1 {
                back = ws[j - 1].tr_matmul(&back);
            }
        }
    }

    fn hessian_vec(&self, x: &[T], v: &[T]) -> Option<Vec<T>> {
        let ws = self.weights(x);
        let dws = self.weights(v);
        let acts = self.forward(&ws);
        let l = ws.len();
        // Directional derivative of the activations.
        let mut dacts = Vec::with_capacity(l + 1);
        dacts.push(Mat::zeros(self.inputs.rows(), self.inputs.cols()));
        for j in 1..=l {
            let d = dws[j - 1]
                .matmul(&acts[j - 1])
                .plus(&ws[j - 1].matmul(&dacts[j - 1]));
            dacts.push(d);
        }
        let two = T::lit(2.0);
        let mut out = vec![T::zero(); self.dim()];
        let mut back = acts[l].clone().minus(&self.targets);
        let mut dback = dacts[l].clone();
        for j in (1..=l).rev() {
            let dg = dback
                .matmul_tr(&acts[j - 1])
                .plus(&back.matmul_tr(&dacts[j - 1]))
                .scale(two);
            self.write_block(j, &dg, &mut out);
            if j > 1 {
                let next_dback = dws[j - 1].tr_matmul(&back).plus(&ws[j - 1].tr_matmul(&dback));
                back = ws[j - 1].tr_matmul(&back);
                dback = next_dback;
            }
        }
        Some(out)
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn suggested_radius(&self) -> T {
        let l = T::from_usize_lossy(self.layers());
        T::lit(2.0) * l.sqrt() + T::one()
    }

    fn seed(&self) -> Option<u64> {
        self.seed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_layer_is_least_squares() {
        let xbar = Mat::<f64>::from_rows(&[[1.0, 2.0, 0.0], [0.0, 1.0, -1.0]]).unwrap();
        let ybar = Mat::from_rows(&[[1.0, 0.0, 2.0]]).unwrap();
        let net = linear_network(xbar.clone(), ybar.clone(), vec![2, 1]).unwrap();
        let w = [0.5, -1.5];
        let wm = Mat::from_col_major(1, 2, w.to_vec()).unwrap();
        let resid = wm.matmul(&xbar).minus(&ybar);
        let expected = resid.matmul_tr(&xbar).scale(2.0);
        assert_eq!(net.gradient(&w), expected.into_vec());
        assert!((net.value(&w) - resid.frobenius_sq()).abs() < 1e-14);
    }

    #[test]
    fn two_layers_origin_is_critical() {
        let xbar = Mat::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let ybar = Mat::from_rows(&[[3.0, -1.0]]).unwrap();
        let net = linear_network(xbar, ybar, vec![2, 2, 1]).unwrap();
        let g = net.gradient(&vec![0.0; net.dim()]);
        assert!(g.iter().all(|&v| v == 0.0));
        assert!(net.value(&vec![0.0; net.dim()]) > 0.0);
    }

    #[test]
    fn width_chain_mismatch_rejected() {
        let xbar = Mat::<f64>::zeros(3, 4);
        let ybar = Mat::<f64>::zeros(1, 4);
        assert!(matches!(
            linear_network(xbar, ybar, vec![2, 2, 1]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            linear_network(Mat::<f64>::zeros(2, 4), Mat::<f64>::zeros(1, 4), vec![2]),
            Err(Error::InvalidParameter(_))
        ));
    }
}
