//! Builds library objects from a validated config.

use std::path::Path;

use anyhow::{bail, Context, Result};
use momentum_core::certificates::{CertifyOptions, InitialPair, StepRule};
use momentum_core::linalg::{dist, Mat};
use momentum_core::optimizer::{MomentumParams, StopRule};
use momentum_core::problems::{
    synthetic, Fixture, LinearNetwork, LipschitzOptions, MatrixFactorization, MatrixSensing,
    Problem,
};
use momentum_core::sampling::{seeded_rng, uniform_in_ball};
use rand::Rng;
use serde::Deserialize;

use crate::config::{Alpha, Config, InitMode, ProblemKind};

/// RNG stream reserved for initial points.
const INIT_STREAM: u64 = 1 << 32;

pub type DynProblem = Box<dyn Problem<f64>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorizationData {
    target: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SensingData {
    sensing: Vec<Vec<Vec<f64>>>,
    measurements: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkData {
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

fn read_data<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("problem file {} cannot be read", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("problem file {} is malformed", path.display()))
}

fn rows(what: &str, data: &[Vec<f64>]) -> Result<Mat<f64>> {
    Mat::from_rows(data).with_context(|| format!("{what}: rows must be non-empty and of equal length"))
}

/// Problem instance described by `[problem]`; data paths resolve against `dir`.
pub fn build_problem(cfg: &Config, dir: &Path) -> Result<DynProblem> {
    let spec = &cfg.problem;
    let seed = spec.seed.unwrap_or(cfg.seed);
    let data_path = spec.path.as_ref().map(|p| dir.join(p));
    let problem: DynProblem = match spec.kind {
        ProblemKind::Quadratic => Box::new(synthetic(Fixture::Quadratic { dim: spec.dim.unwrap_or(2) })?),
        ProblemKind::Quartic => Box::new(synthetic(Fixture::Quartic { dim: spec.dim.unwrap_or(1) })?),
        ProblemKind::IndefiniteQuadratic => Box::new(synthetic(Fixture::IndefiniteQuadratic)?),
        ProblemKind::MatrixFactorization => {
            let r = spec.r.expect("validated");
            match data_path {
                Some(path) => {
                    let d: FactorizationData = read_data(&path)?;
                    Box::new(MatrixFactorization::new(rows("target", &d.target)?, r)?)
                }
                None => Box::new(MatrixFactorization::random(
                    spec.m.expect("validated"),
                    spec.n.expect("validated"),
                    r,
                    seed,
                )?),
            }
        }
        ProblemKind::MatrixSensing => {
            let r = spec.r.expect("validated");
            match data_path {
                Some(path) => {
                    let d: SensingData = read_data(&path)?;
                    let sensing = d
                        .sensing
                        .iter()
                        .enumerate()
                        .map(|(i, a)| rows(&format!("sensing[{i}]"), a))
                        .collect::<Result<Vec<_>>>()?;
                    Box::new(MatrixSensing::new(sensing, d.measurements, r)?)
                }
                None => Box::new(MatrixSensing::random(
                    spec.m.expect("validated"),
                    spec.n.expect("validated"),
                    r,
                    spec.p.expect("validated"),
                    seed,
                )?),
            }
        }
        ProblemKind::LinearNetwork => {
            let widths = spec.widths.clone().expect("validated");
            match data_path {
                Some(path) => {
                    let d: NetworkData = read_data(&path)?;
                    // Rows of the data files are samples.
                    let inputs = rows("inputs", &d.inputs)?.transpose();
                    let targets = rows("targets", &d.targets)?.transpose();
                    Box::new(LinearNetwork::new(inputs, targets, widths)?)
                }
                None => Box::new(LinearNetwork::random(widths, spec.samples.expect("validated"), seed)?),
            }
        }
    };
    Ok(problem)
}

/// `(α rule, params)`; the params carry a placeholder `α` under the auto rule.
pub fn build_params(cfg: &Config, alpha_override: Option<f64>, beta: f64, gamma: f64) -> Result<(StepRule, MomentumParams<f64>)> {
    let ps = &cfg.params;
    let rule = match alpha_override.map(Alpha::Fixed).unwrap_or(ps.alpha()?) {
        Alpha::Auto => StepRule::Auto { fraction: ps.auto_fraction },
        Alpha::Fixed(a) => {
            if !(a > 0.0) || !a.is_finite() {
                bail!("--alpha: must be positive and finite, got {a}");
            }
            StepRule::Fixed(a)
        }
    };
    let placeholder = match rule {
        StepRule::Fixed(a) => a,
        StepRule::Auto { .. } => 1.0,
    };
    let preset = ps.preset.parse()?;
    let params = MomentumParams::from_preset(preset, placeholder, beta, gamma)
        .and_then(|p| p.with_delta(ps.delta))
        .context("params")?;
    Ok((rule, params))
}

/// Initial pair for a given seed. Random starts draw `x_0` from the box
/// `reference ± scale` and a velocity direction from the unit ball.
pub fn build_init(cfg: &Config, p: &dyn Problem<f64>, seed: u64) -> Result<InitialPair<f64>> {
    let n = p.dim();
    let init = &cfg.init;
    let reference = p.reference_point();
    let zero = vec![0.0; n];
    Ok(match init.mode {
        InitMode::Reference => InitialPair::at_rest(reference),
        InitMode::Random => {
            let mut rng = seeded_rng(seed, INIT_STREAM);
            let x0: Vec<f64> = reference
                .iter()
                .map(|&c| c + init.scale * (2.0 * rng.random::<f64>() - 1.0))
                .collect();
            let direction = if cfg.params.delta > 0.0 {
                uniform_in_ball(&mut rng, &zero, 1.0)
            } else {
                zero
            };
            InitialPair::Velocity { x0, direction }
        }
        InitMode::Explicit => {
            let x0 = init.x0.clone().expect("validated");
            if x0.len() != n {
                bail!("init.x0: expected {n} entries for {}, got {}", p.name(), x0.len());
            }
            match &init.x_minus1 {
                Some(xm) if xm.len() != n => {
                    bail!("init.x_minus1: expected {n} entries for {}, got {}", p.name(), xm.len())
                }
                Some(xm) => InitialPair::Points {
                    x_minus1: xm.clone(),
                    x0,
                },
                None => InitialPair::at_rest(x0),
            }
        }
    })
}

pub fn stop_rule(cfg: &Config) -> StopRule<f64> {
    let mut stop = StopRule::iterations(cfg.stop.max_iters).with_grad_tol(cfg.stop.grad_tol);
    if let Some(r) = cfg.stop.box_radius {
        stop = stop.with_box(r);
    }
    stop
}

pub fn critical_values(cfg: &Config) -> usize {
    cfg.checks.critical_values.unwrap_or(match cfg.problem.kind {
        ProblemKind::Quadratic | ProblemKind::Quartic | ProblemKind::IndefiniteQuadratic => 1,
        _ => 4,
    })
}

/// Certified-run options; Lipschitz sampling uses the given seed.
pub fn certify_options(cfg: &Config, p: &dyn Problem<f64>, x0: &[f64], seed: u64) -> CertifyOptions {
    let l = &cfg.lipschitz;
    let radius = l
        .radius
        .unwrap_or_else(|| p.suggested_radius().max(2.0 * dist(x0, &p.reference_point())));
    CertifyOptions {
        mode: cfg.lipschitz_mode(),
        lipschitz: LipschitzOptions {
            pairs: l.pairs,
            safety_factor: l.safety_factor,
            seed,
            spread: 0.0,
        },
        radius,
        max_enlargements: l.max_enlargements,
        critical_values: critical_values(cfg),
    }
}
