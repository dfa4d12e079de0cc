//! `track`: distance to the rescaled gradient flow over a ladder of step sizes.

use anyhow::{bail, Result};
use momentum_core::gradient_flow::{tracking_constants, tracking_error};
use momentum_core::linalg::norm;
use momentum_core::optimizer::{run, StopRule};
use momentum_core::problems::estimate_lipschitz;
use rayon::prelude::*;
use serde_json::json;

use crate::config::TrackStart;
use crate::output::{real, Metadata};
use crate::setup;
use crate::Context;

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn cmd_track(ctx: &Context) -> Result<bool> {
    let cfg = &ctx.loaded.config;
    let Some(spec) = &cfg.track else {
        bail!("track: the config has no [track] section");
    };
    let mut alphas = spec.alphas.clone();
    alphas.sort_by(|a, b| b.total_cmp(a));
    alphas.dedup();
    if alphas.len() < 2 {
        bail!("track.alphas: need at least two distinct step sizes to fit a slope, got {}", alphas.len());
    }
    let p = setup::build_problem(cfg, &ctx.loaded.dir)?;
    let beta = cfg.params.beta;
    let gamma = cfg.params.gamma_for(beta);
    let (_, params) = setup::build_params(cfg, Some(alphas[0]), beta, gamma)?;
    let start = setup::build_init(cfg, p.as_ref(), ctx.seed)?;
    let horizon = spec.horizon;
    let g0 = p.gradient(start.x0());
    // The flow start moves by α‖∇f(x_0)‖/(1 − β); δ must cover it.
    let params = match spec.start {
        TrackStart::Flow => params.with_delta(params.delta().max(norm(&g0) / (1.0 - beta)))?,
        TrackStart::Init => params,
    };

    let rows = alphas
        .par_iter()
        .map(|&alpha| -> Result<(f64, f64, usize)> {
            let params = params.with_alpha(alpha)?;
            let steps = (horizon / alpha + 1e-9).ceil() as usize;
            let x_minus1 = match spec.start {
                TrackStart::Init => start.x_minus1(&params),
                TrackStart::Flow => {
                    let s = alpha / (1.0 - beta);
                    start.x0().iter().zip(&g0).map(|(&x, &g)| x + s * g).collect()
                }
            };
            let trace = run(p.as_ref(), &x_minus1, start.x0(), &params, &StopRule::iterations(steps.max(1)))?;
            let rep = tracking_error(p.as_ref(), &trace, horizon)?;
            Ok((alpha, rep.max_error, rep.argmax))
        })
        .collect::<Result<Vec<_>>>()?;

    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let slope = log_log_slope(&xs, &ys);
    let monotone = ys.windows(2).all(|w| w[1] <= w[0]);

    let opts = setup::certify_options(cfg, p.as_ref(), start.x0(), ctx.seed);
    let mut lip = opts.lipschitz;
    lip.spread = params.spread();
    let est = estimate_lipschitz(p.as_ref(), start.x0(), opts.radius, opts.mode, &lip)?;
    let scale = 1.0 / (1.0 - beta);
    let constants = tracking_constants(
        scale * est.grad_lipschitz,
        scale * est.grad_bound,
        &params,
        horizon,
        params.delta(),
        spec.epsilon,
    )?;

    let prov = ctx.provenance(p.as_ref());
    let mut w = ctx.out.csv("tracking.csv", &prov)?;
    w.write_record(["alpha", "max_error"])?;
    for (a, e, _) in &rows {
        w.write_record([real(*a), real(*e)])?;
    }
    w.flush()?;

    let pass = match (spec.min_slope, slope) {
        (Some(min), Some(s)) => s >= min,
        (Some(_), None) => false,
        (None, _) => true,
    };
    ctx.out.json(
        "tracking_report.json",
        &json!({
            "provenance": prov,
            "metadata": Metadata::now("track"),
            "problem": { "name": p.name(), "dim": p.dim(), "seed": p.seed() },
            "beta": beta,
            "gamma": gamma,
            "horizon": horizon,
            "start": spec.start,
            "rows": rows.iter().map(|(a, e, k)| json!({"alpha": a, "max_error": e, "argmax_k": k})).collect::<Vec<_>>(),
            "slope": slope,
            "min_slope": spec.min_slope,
            "monotone_decreasing": monotone,
            "lipschitz": est,
            "flow_scaling": scale,
            "constants": constants,
            "epsilon": spec.epsilon,
            "pass": pass,
        }),
    )?;
    if !ctx.quiet {
        for (a, e, _) in &rows {
            println!("alpha={a}: max_error={e}");
        }
        match slope {
            Some(s) => println!("log-log slope {s:.4}"),
            None => println!("log-log slope undefined (errors vanish)"),
        }
    }
    Ok(pass)
}
