//! `saddle`: critical-point classification and a seeded escape experiment.

use anyhow::{bail, Result};
use momentum_core::linalg::norm;
use momentum_core::optimizer::safe_alpha;
use momentum_core::certificates::StepRule;
use momentum_core::problems::estimate_lipschitz;
use momentum_core::saddle::{
    analyze_critical_point, escape_trial, rank_condition, saddle_safe_alpha, validate_escape,
    Classification, CriticalTolerances, EscapeExperiment, EscapeOptions,
};
use momentum_core::Error;
use rayon::prelude::*;
use serde_json::json;

use crate::config::PointSpec;
use crate::output::Metadata;
use crate::setup;
use crate::Context;

pub fn cmd_saddle(ctx: &Context) -> Result<bool> {
    let cfg = &ctx.loaded.config;
    let Some(spec) = &cfg.saddle else {
        bail!("saddle: the config has no [saddle] section");
    };
    let beta = cfg.params.beta;
    if beta == 0.0 {
        return Err(Error::ZeroMomentum.into());
    }
    let p = setup::build_problem(cfg, &ctx.loaded.dir)?;
    let point = match &spec.point {
        PointSpec::Vector(v) => {
            if v.len() != p.dim() {
                bail!("saddle.point: expected {} entries for {}, got {}", p.dim(), p.name(), v.len());
            }
            v.clone()
        }
        PointSpec::Word(w) if w == "origin" => vec![0.0; p.dim()],
        PointSpec::Word(_) => p.reference_point(),
    };
    let (rule, params) = setup::build_params(cfg, ctx.alpha, beta, cfg.params.gamma_for(beta))?;

    // Curvature and gradient bounds on the ball the trials may explore.
    let opts = setup::certify_options(cfg, p.as_ref(), &point, ctx.seed);
    let mut lip = opts.lipschitz;
    lip.spread = params.spread();
    let region = spec.escape_radius + spec.radius;
    let est = estimate_lipschitz(p.as_ref(), &point, region, opts.mode, &lip)?;
    let m_tilde = est.grad_lipschitz;
    let alpha_bound = safe_alpha(m_tilde, &params)?.min(saddle_safe_alpha(m_tilde, &params)?);
    let alpha = match rule {
        StepRule::Auto { fraction } => fraction * alpha_bound,
        StepRule::Fixed(a) => a,
    };
    let params = params.with_alpha(alpha)?;

    let tols = CriticalTolerances {
        grad_tol: spec.grad_tol,
        ..CriticalTolerances::default()
    };
    let analysis = analyze_critical_point(p.as_ref(), &point, &params, &tols)?;
    let escape_opts = EscapeOptions {
        max_iters: spec.max_iters,
        grad_tol: spec.grad_tol,
        escape_radius: Some(spec.escape_radius),
    };
    let experiment = if analysis.classification == Classification::StrictSaddle {
        validate_escape(p.as_ref(), &point, &params, spec.radius, spec.trials)?;
        let records = (0..spec.trials)
            .into_par_iter()
            .map(|i| escape_trial(p.as_ref(), &point, &params, spec.radius, ctx.seed, i, &escape_opts))
            .collect::<momentum_core::Result<Vec<_>>>()?;
        Some(EscapeExperiment::from_trials(
            &point,
            params,
            spec.radius,
            ctx.seed,
            escape_opts,
            records,
        ))
    } else {
        None
    };
    let pass = match (spec.min_escape_fraction, &experiment) {
        (Some(min), Some(e)) => e.escape_fraction >= min,
        _ => true,
    };

    let prov = ctx.provenance(p.as_ref());
    ctx.out.json(
        "saddle_report.json",
        &json!({
            "provenance": prov,
            "metadata": Metadata::now("saddle"),
            "problem": { "name": p.name(), "dim": p.dim(), "seed": p.seed() },
            "params": params,
            "alpha_bound": alpha_bound,
            "curvature_bound": m_tilde,
            "rank_condition": rank_condition(m_tilde, &params),
            "point_norm": norm(&point),
            "classification": analysis.classification,
            "analysis": analysis,
            "escape_fraction": experiment.as_ref().map(|e| e.escape_fraction),
            "experiment": experiment,
            "pass": pass,
        }),
    )?;
    if !ctx.quiet {
        println!(
            "{}: {} (gradient norm {:.3e}, map spectral radius {:.6})",
            p.name(),
            analysis.classification,
            analysis.grad_norm,
            analysis.map_spectral_radius
        );
        match &experiment {
            Some(e) => println!(
                "escape fraction {} over {} trials ({} at saddle, {} inconclusive)",
                e.escape_fraction, e.trials, e.at_saddle, e.inconclusive
            ),
            None => println!("not a strict saddle; escape experiment skipped"),
        }
    }
    Ok(pass)
}
