//! Experiment configuration (TOML). Unknown keys are rejected; semantic
//! checks report the offending field path.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Largest `|γ|` accepted; keeps the Lipschitz estimation ball bounded.
pub const GAMMA_CAP: f64 = 10.0;
/// Largest sweep grid.
pub const MAX_CELLS: usize = 10_000;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Master seed for initialization, Lipschitz sampling and escape trials.
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub params: ParamsSpec,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub stop: StopSpec,
    #[serde(default)]
    pub lipschitz: LipschitzSpec,
    #[serde(default)]
    pub checks: ChecksSpec,
    pub track: Option<TrackSpec>,
    pub saddle: Option<SaddleSpec>,
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub dim: Option<usize>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub r: Option<usize>,
    /// Number of sensing measurements.
    pub p: Option<usize>,
    pub widths: Option<Vec<usize>>,
    pub samples: Option<usize>,
    /// Seed of a random instance; defaults to the master seed.
    pub seed: Option<u64>,
    /// JSON data file for matrix problems, relative to the config file.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Quadratic,
    IndefiniteQuadratic,
    Quartic,
    MatrixFactorization,
    MatrixSensing,
    LinearNetwork,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Value(f64),
    Word(String),
}

impl Default for AlphaSpec {
    fn default() -> Self {
        AlphaSpec::Word("auto".into())
    }
}

/// Resolved step-size rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    #[serde(default = "default_preset")]
    pub preset: String,
    #[serde(default)]
    pub alpha: AlphaSpec,
    /// `α = auto_fraction · ᾱ` when `alpha = "auto"`.
    #[serde(default = "default_fraction")]
    pub auto_fraction: f64,
    #[serde(default)]
    pub beta: f64,
    pub gamma: Option<f64>,
    #[serde(default)]
    pub delta: f64,
}

impl Default for ParamsSpec {
    fn default() -> Self {
        Self {
            preset: default_preset(),
            alpha: AlphaSpec::default(),
            auto_fraction: default_fraction(),
            beta: 0.0,
            gamma: None,
            delta: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// `x_0` drawn uniformly from the box `reference ± scale`.
    Random,
    /// `x_0` is the problem's reference point.
    Reference,
    Explicit,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    #[serde(default = "default_init_mode")]
    pub mode: InitMode,
    #[serde(default = "one")]
    pub scale: f64,
    pub x0: Option<Vec<f64>>,
    pub x_minus1: Option<Vec<f64>>,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            mode: default_init_mode(),
            scale: 1.0,
            x0: None,
            x_minus1: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StopSpec {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub grad_tol: f64,
    pub box_radius: Option<f64>,
}

impl Default for StopSpec {
    fn default() -> Self {
        Self {
            max_iters: default_max_iters(),
            grad_tol: 0.0,
            box_radius: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzSpec {
    #[serde(default = "default_mode")]
    pub mode: String,
    /// Initial certified radius; defaults to the problem's suggested radius
    /// or twice the distance from the reference point, whichever is larger.
    pub radius: Option<f64>,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_safety")]
    pub safety_factor: f64,
    #[serde(default = "default_enlargements")]
    pub max_enlargements: usize,
}

impl Default for LipschitzSpec {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            radius: None,
            pairs: default_pairs(),
            safety_factor: default_safety(),
            max_enlargements: default_enlargements(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSpec {
    #[serde(default = "yes")]
    pub descent: bool,
    #[serde(default = "yes")]
    pub gradient_bound: bool,
    #[serde(default = "yes")]
    pub step_bound: bool,
    #[serde(default = "yes")]
    pub length_formula: bool,
    #[serde(default = "yes")]
    pub rate: bool,
    /// Number of critical values `m` in the certified region.
    pub critical_values: Option<usize>,
    /// Known `f*`; otherwise the known minimum or the tail minimum.
    pub f_star: Option<f64>,
    /// Analytic desingularizer `c·t^θ`; fitted from the trace when absent.
    pub desingularizer: Option<PowerLaw>,
}

impl Default for ChecksSpec {
    fn default() -> Self {
        Self {
            descent: true,
            gradient_bound: true,
            step_bound: true,
            length_formula: true,
            rate: true,
            critical_values: None,
            f_star: None,
            desingularizer: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLaw {
    pub c: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TrackSpec {
    pub alphas: Vec<f64>,
    #[serde(default = "one")]
    pub horizon: f64,
    /// Target accuracy used for the admissible step of the tracking bound.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Fail (exit 2) when the fitted slope falls below this value.
    pub min_slope: Option<f64>,
    #[serde(default = "default_track_start")]
    pub start: TrackStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStart {
    /// `x_{−1} = x_0 + α(1 − β)⁻¹∇f(x_0)`: the first displacement matches
    /// the flow velocity.
    Flow,
    /// `x_{−1}` from `[init]`.
    Init,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum PointSpec {
    Vector(Vec<f64>),
    Word(String),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SaddleSpec {
    #[serde(default = "default_point")]
    pub point: PointSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_saddle_radius")]
    pub radius: f64,
    #[serde(default = "default_saddle_iters")]
    pub max_iters: usize,
    #[serde(default = "default_saddle_tol")]
    pub grad_tol: f64,
    #[serde(default = "one")]
    pub escape_radius: f64,
    /// Fail (exit 2) when the escape fraction falls below this value.
    pub min_escape_fraction: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Absolute step sizes; exclusive with `alpha_fractions`.
    pub alphas: Option<Vec<f64>>,
    /// Multiples of the admissible step `ᾱ`.
    pub alpha_fractions: Option<Vec<f64>>,
    pub betas: Option<Vec<f64>>,
    pub gammas: Option<Vec<f64>>,
    pub seeds: Option<Vec<u64>>,
    /// Final gradient norm counted as converged.
    #[serde(default = "default_converge_tol")]
    pub converge_tol: f64,
}

fn default_preset() -> String {
    "generic".into()
}
fn default_fraction() -> f64 {
    0.9
}
fn default_init_mode() -> InitMode {
    InitMode::Random
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_max_iters() -> usize {
    1000
}
fn default_mode() -> String {
    "sampled".into()
}
fn default_pairs() -> usize {
    1000
}
fn default_safety() -> f64 {
    2.0
}
fn default_enlargements() -> usize {
    6
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_track_start() -> TrackStart {
    TrackStart::Flow
}
fn default_point() -> PointSpec {
    PointSpec::Word("origin".into())
}
fn default_trials() -> usize {
    100
}
fn default_saddle_radius() -> f64 {
    1e-3
}
fn default_saddle_iters() -> usize {
    100_000
}
fn default_saddle_tol() -> f64 {
    1e-8
}
fn default_converge_tol() -> f64 {
    1e-6
}

/// A parsed config together with its provenance.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: Config,
    pub sha256: String,
    pub dir: PathBuf,
}

pub fn load(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let config = parse(&text).with_context(|| format!("invalid config {}", path.display()))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded {
        config,
        sha256: hex::encode(Sha256::digest(text.as_bytes())),
        dir,
    })
}

pub fn parse(text: &str) -> Result<Config> {
    let config: Config = toml::from_str(text)?;
    config.validate()?;
    Ok(config)
}

fn finite(field: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        bail!("{field}: must be finite, got {v}");
    }
    Ok(())
}

fn positive(field: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        bail!("{field}: must be positive and finite, got {v}");
    }
    Ok(())
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.params.validate()?;
        self.init.validate()?;
        let s = &self.stop;
        if s.max_iters == 0 {
            bail!("stop.max_iters: must be at least 1");
        }
        if !(s.grad_tol >= 0.0) || !s.grad_tol.is_finite() {
            bail!("stop.grad_tol: must be nonnegative, got {}", s.grad_tol);
        }
        if let Some(r) = s.box_radius {
            positive("stop.box_radius", r)?;
        }
        let l = &self.lipschitz;
        if l.mode.parse::<momentum_core::problems::LipschitzMode>().is_err() {
            bail!("lipschitz.mode: expected \"sampled\" or \"analytic\", got {:?}", l.mode);
        }
        if let Some(r) = l.radius {
            positive("lipschitz.radius", r)?;
        }
        if l.pairs == 0 {
            bail!("lipschitz.pairs: must be at least 1");
        }
        if !(l.safety_factor >= 1.0) || !l.safety_factor.is_finite() {
            bail!("lipschitz.safety_factor: must be at least 1, got {}", l.safety_factor);
        }
        if self.checks.critical_values == Some(0) {
            bail!("checks.critical_values: must be at least 1");
        }
        if let Some(f) = self.checks.f_star {
            finite("checks.f_star", f)?;
        }
        if let Some(d) = self.checks.desingularizer {
            positive("checks.desingularizer.c", d.c)?;
            if !(d.theta > 0.0 && d.theta <= 1.0) {
                bail!("checks.desingularizer.theta: must lie in (0, 1], got {}", d.theta);
            }
        }
        if let Some(t) = &self.track {
            for (i, &a) in t.alphas.iter().enumerate() {
                positive(&format!("track.alphas[{i}]"), a)?;
            }
            positive("track.horizon", t.horizon)?;
            positive("track.epsilon", t.epsilon)?;
        }
        if let Some(sd) = &self.saddle {
            if let PointSpec::Word(w) = &sd.point {
                if w != "origin" && w != "reference" {
                    bail!("saddle.point: expected a vector, \"origin\" or \"reference\", got {w:?}");
                }
            }
            if sd.trials == 0 {
                bail!("saddle.trials: must be at least 1");
            }
            positive("saddle.radius", sd.radius)?;
            positive("saddle.grad_tol", sd.grad_tol)?;
            positive("saddle.escape_radius", sd.escape_radius)?;
            if sd.max_iters == 0 {
                bail!("saddle.max_iters: must be at least 1");
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.alphas.is_some() && sw.alpha_fractions.is_some() {
                bail!("sweep: give either alphas or alpha_fractions, not both");
            }
            for (name, axis) in [
                ("sweep.alphas", &sw.alphas),
                ("sweep.alpha_fractions", &sw.alpha_fractions),
                ("sweep.betas", &sw.betas),
                ("sweep.gammas", &sw.gammas),
            ] {
                for (i, &v) in axis.iter().flatten().enumerate() {
                    finite(&format!("{name}[{i}]"), v)?;
                }
            }
            for (i, &g) in sw.gammas.iter().flatten().enumerate() {
                if g.abs() > GAMMA_CAP {
                    bail!("sweep.gammas[{i}]: |gamma| must not exceed {GAMMA_CAP}, got {g}");
                }
            }
            positive("sweep.converge_tol", sw.converge_tol)?;
        }
        Ok(())
    }

    pub fn lipschitz_mode(&self) -> momentum_core::problems::LipschitzMode {
        self.lipschitz.mode.parse().expect("validated")
    }
}

impl ProblemSpec {
    fn validate(&self) -> Result<()> {
        let need = |field: &str, v: Option<usize>| -> Result<usize> {
            match v {
                Some(0) => bail!("problem.{field}: must be at least 1"),
                Some(x) => Ok(x),
                None => bail!("problem.{field}: required for kind = {:?}", self.kind),
            }
        };
        match self.kind {
            ProblemKind::Quadratic | ProblemKind::Quartic => {
                if self.dim == Some(0) {
                    bail!("problem.dim: must be at least 1");
                }
            }
            ProblemKind::IndefiniteQuadratic => {
                if self.dim.is_some_and(|d| d != 2) {
                    bail!("problem.dim: the indefinite quadratic is two-dimensional");
                }
            }
            ProblemKind::MatrixFactorization => {
                need("r", self.r)?;
                if self.path.is_none() {
                    need("m", self.m)?;
                    need("n", self.n)?;
                }
            }
            ProblemKind::MatrixSensing => {
                need("r", self.r)?;
                if self.path.is_none() {
                    need("m", self.m)?;
                    need("n", self.n)?;
                    need("p", self.p)?;
                }
            }
            ProblemKind::LinearNetwork => {
                let w = self
                    .widths
                    .as_ref()
                    .ok_or_else(|| anyhow::anyhow!("problem.widths: required for kind = LinearNetwork"))?;
                if w.len() < 2 || w.contains(&0) {
                    bail!("problem.widths: need at least two positive widths, got {w:?}");
                }
                if self.path.is_none() {
                    need("samples", self.samples)?;
                }
            }
        }
        Ok(())
    }
}

impl ParamsSpec {
    fn validate(&self) -> Result<()> {
        match self.preset.as_str() {
            "generic" | "heavy_ball" | "nesterov" => {}
            other => bail!(
                "params.preset: expected \"generic\", \"heavy_ball\" or \"nesterov\", got {other:?}"
            ),
        }
        self.alpha()?;
        if !(self.auto_fraction > 0.0 && self.auto_fraction <= 1.0) {
            bail!("params.auto_fraction: must lie in (0, 1], got {}", self.auto_fraction);
        }
        if !(self.beta.abs() < 1.0) {
            bail!("params.beta: must lie in (-1, 1), got {}", self.beta);
        }
        if let Some(g) = self.gamma {
            finite("params.gamma", g)?;
            if g.abs() > GAMMA_CAP {
                bail!("params.gamma: |gamma| must not exceed {GAMMA_CAP}, got {g}");
            }
            match self.preset.as_str() {
                "heavy_ball" if g != 0.0 => bail!("params.gamma: heavy ball requires gamma = 0"),
                "nesterov" if g != self.beta => bail!("params.gamma: Nesterov requires gamma = beta"),
                _ => {}
            }
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            bail!("params.delta: must be nonnegative, got {}", self.delta);
        }
        Ok(())
    }

    pub fn alpha(&self) -> Result<Alpha> {
        match &self.alpha {
            AlphaSpec::Value(a) => {
                positive("params.alpha", *a)?;
                Ok(Alpha::Fixed(*a))
            }
            AlphaSpec::Word(w) if w == "auto" => Ok(Alpha::Auto),
            AlphaSpec::Word(w) => bail!("params.alpha: expected a number or \"auto\", got {w:?}"),
        }
    }

    /// `γ` implied by the preset for a given `β`.
    pub fn gamma_for(&self, beta: f64) -> f64 {
        match self.preset.as_str() {
            "heavy_ball" => 0.0,
            "nesterov" => beta,
            _ => self.gamma.unwrap_or(0.0),
        }
    }
}

impl InitSpec {
    fn validate(&self) -> Result<()> {
        positive("init.scale", self.scale)?;
        match self.mode {
            InitMode::Explicit if self.x0.is_none() => bail!("init.x0: required for mode = \"explicit\""),
            InitMode::Explicit => {}
            _ if self.x0.is_some() || self.x_minus1.is_some() => {
                bail!("init.x0 / init.x_minus1: only allowed with mode = \"explicit\"")
            }
            _ => {}
        }
        for (i, v) in self.x0.iter().flatten().chain(self.x_minus1.iter().flatten()).enumerate() {
            finite(&format!("init vector entry {i}"), *v)?;
        }
        Ok(())
    }
}
