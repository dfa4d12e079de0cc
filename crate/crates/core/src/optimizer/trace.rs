use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::linalg::{dist, norm};
use crate::optimizer::MomentumParams;
use crate::problems::Problem;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    GradTol,
    LeftBox,
    Diverged,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StopReason::MaxIters => "max_iters",
            StopReason::GradTol => "grad_tol",
            StopReason::LeftBox => "left_box",
            StopReason::Diverged => "diverged",
        };
        f.write_str(s)
    }
}

/// Diagnostics at iterate `x_k`. The step fields describe the move to
/// `x_{k+1}` and are absent for the final iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct IterateRecord<T> {
    pub k: usize,
    pub value: T,
    pub grad_norm: T,
    pub step_norm: Option<T>,
    pub y_beta: Option<Vec<T>>,
    pub y_gamma: Option<Vec<T>>,
}

/// Iterate history `x_{−1}, x_0, …, x_K` of one momentum run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Trace<T> {
    problem: String,
    params: MomentumParams<T>,
    points: Vec<Vec<T>>,
    records: Vec<IterateRecord<T>>,
    stop_reason: StopReason,
    initial_velocity_ok: bool,
}

impl<T: Real> Trace<T> {
    pub(crate) fn start(
        problem: &str,
        params: MomentumParams<T>,
        x_minus1: Vec<T>,
        x0: Vec<T>,
        initial_velocity_ok: bool,
    ) -> Self {
        Self {
            problem: problem.to_string(),
            params,
            points: vec![x_minus1, x0],
            records: Vec::new(),
            stop_reason: StopReason::MaxIters,
            initial_velocity_ok,
        }
    }

    pub(crate) fn push_record(&mut self, value: T, grad_norm: T) {
        let k = self.records.len();
        self.records.push(IterateRecord {
            k,
            value,
            grad_norm,
            step_norm: None,
            y_beta: None,
            y_gamma: None,
        });
    }

    pub(crate) fn push_step(&mut self, x_next: Vec<T>, y_beta: Vec<T>, y_gamma: Vec<T>) {
        let step_norm = dist(&x_next, self.last_point());
        let rec = self.records.last_mut().expect("record for current iterate");
        rec.step_norm = Some(step_norm);
        rec.y_beta = Some(y_beta);
        rec.y_gamma = Some(y_gamma);
        self.points.push(x_next);
    }

    pub(crate) fn finish(&mut self, reason: StopReason) {
        self.stop_reason = reason;
    }

    pub(crate) fn last_pair(&self) -> (&[T], &[T]) {
        let n = self.points.len();
        (&self.points[n - 2], &self.points[n - 1])
    }

    /// Builds a trace from raw iterates by evaluating `p`; used to certify
    /// externally produced sequences.
    pub fn from_points<P: Problem<T> + ?Sized>(
        p: &P,
        params: MomentumParams<T>,
        points: Vec<Vec<T>>,
    ) -> Self {
        assert!(points.len() >= 2, "a trace needs x_-1 and x_0");
        let velocity_ok = dist(&points[1], &points[0])
            <= params.delta() * params.alpha() * (T::one() + T::lit(1e-12));
        let mut t = Self::start(
            p.name(),
            params,
            points[0].clone(),
            points[1].clone(),
            velocity_ok,
        );
        for (i, x) in points.iter().enumerate().skip(1) {
            t.push_record(p.value(x), norm(&p.gradient(x)));
            if let Some(next) = points.get(i + 1) {
                let prev = &points[i - 1];
                let y_beta = x
                    .iter()
                    .zip(prev)
                    .map(|(&a, &b)| a + params.beta() * (a - b))
                    .collect();
                let y_gamma = x
                    .iter()
                    .zip(prev)
                    .map(|(&a, &b)| a + params.gamma() * (a - b))
                    .collect();
                t.push_step(next.clone(), y_beta, y_gamma);
            }
        }
        t
    }

    pub fn problem_name(&self) -> &str {
        &self.problem
    }

    pub fn params(&self) -> &MomentumParams<T> {
        &self.params
    }

    /// All stored points, starting with `x_{−1}`.
    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    /// `x_k` for `k ≥ −1`.
    pub fn point(&self, k: isize) -> &[T] {
        &self.points[(k + 1) as usize]
    }

    pub fn last_point(&self) -> &[T] {
        self.points.last().expect("trace holds at least x_-1")
    }

    pub fn records(&self) -> &[IterateRecord<T>] {
        &self.records
    }

    /// Number of completed steps `K` (iterates `x_0 … x_K`).
    pub fn iterations(&self) -> usize {
        self.points.len().saturating_sub(2)
    }

    pub fn stop_reason(&self) -> StopReason {
        self.stop_reason
    }

    pub fn initial_velocity_ok(&self) -> bool {
        self.initial_velocity_ok
    }

    pub fn values(&self) -> Vec<T> {
        self.records.iter().map(|r| r.value).collect()
    }

    pub fn grad_norms(&self) -> Vec<T> {
        self.records.iter().map(|r| r.grad_norm).collect()
    }

    /// `‖x_{k+1} − x_k‖` for `k = 0 … K−1`.
    pub fn step_norms(&self) -> Vec<T> {
        self.records.iter().filter_map(|r| r.step_norm).collect()
    }

    /// Largest relative residual of the update rule over all stored steps:
    /// `‖x_{k+1} − x_k − β(x_k − x_{k−1}) + α∇f(y^γ_k)‖`, normalized by the
    /// magnitude of the terms.
    pub fn replay_residual<P: Problem<T> + ?Sized>(&self, p: &P) -> T {
        let (alpha, beta, gamma) = (self.params.alpha(), self.params.beta(), self.params.gamma());
        let mut worst = T::zero();
        for w in self.points.windows(3) {
            let (xp, xc, xn) = (&w[0], &w[1], &w[2]);
            let y: Vec<T> = xc.iter().zip(xp).map(|(&a, &b)| a + gamma * (a - b)).collect();
            let g = p.gradient(&y);
            let mut res_sq = T::zero();
            let mut scale = T::zero();
            for i in 0..xc.len() {
                let mom = beta * (xc[i] - xp[i]);
                let grad = alpha * g[i];
                let r = xn[i] - xc[i] - mom + grad;
                res_sq += r * r;
                scale = scale.max(xn[i].abs() + xc[i].abs() + mom.abs() + grad.abs());
            }
            let rel = res_sq.sqrt() / scale.max(T::min_positive_value());
            worst = worst.max(rel);
        }
        worst
    }

    /// CSV with columns `k,f,grad_norm,step_norm`; the final row has an empty
    /// `step_norm`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "k,f,grad_norm,step_norm")?;
        for r in &self.records {
            match r.step_norm {
                Some(s) => writeln!(w, "{},{},{},{}", r.k, r.value, r.grad_norm, s)?,
                None => writeln!(w, "{},{},{},", r.k, r.value, r.grad_norm)?,
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}
