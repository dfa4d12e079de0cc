//! `sweep`: Cartesian grid over step size, momentum, extrapolation and seed.

use anyhow::{bail, Result};
use momentum_core::certificates::StepRule;
use momentum_core::linalg::norm;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Config, MAX_CELLS};
use crate::output::{num, real, Metadata};
use crate::run::evaluate;
use crate::setup;
use crate::Context;

#[derive(Debug, Clone, Copy)]
struct Cell {
    step: StepRule,
    beta: f64,
    gamma: f64,
    seed: u64,
}

struct Row {
    cell: Cell,
    alpha: f64,
    alpha_bar: f64,
    converged: bool,
    stop_reason: String,
    iterations: usize,
    length: f64,
    min_slack: Option<f64>,
    descent_failed: usize,
    rate_sup: Option<f64>,
    c_alpha: Option<f64>,
    pass: bool,
}

fn axis<T: Clone>(name: &str, given: &Option<Vec<T>>, default: T) -> Result<Vec<T>> {
    match given {
        Some(v) if v.is_empty() => bail!("{name}: empty axis makes an empty grid"),
        Some(v) => Ok(v.clone()),
        None => Ok(vec![default]),
    }
}

fn grid(cfg: &Config, seed: u64, alpha_override: Option<f64>) -> Result<Vec<Cell>> {
    let Some(sw) = &cfg.sweep else {
        bail!("sweep: the config has no [sweep] section");
    };
    let base = setup::build_params(cfg, alpha_override, cfg.params.beta, cfg.params.gamma_for(cfg.params.beta))?.0;
    let steps: Vec<StepRule> = match (&sw.alphas, &sw.alpha_fractions) {
        (Some(a), _) => axis("sweep.alphas", &Some(a.clone()), 0.0)?.into_iter().map(StepRule::Fixed).collect(),
        (_, Some(f)) => axis("sweep.alpha_fractions", &Some(f.clone()), 0.0)?
            .into_iter()
            .map(|fraction| StepRule::Auto { fraction })
            .collect(),
        (None, None) => vec![base],
    };
    for (i, s) in steps.iter().enumerate() {
        match *s {
            StepRule::Fixed(a) if !(a > 0.0) => bail!("sweep.alphas[{i}]: must be positive, got {a}"),
            StepRule::Auto { fraction } if !(fraction > 0.0) => {
                bail!("sweep.alpha_fractions[{i}]: must be positive, got {fraction}")
            }
            _ => {}
        }
    }
    let betas = axis("sweep.betas", &sw.betas, cfg.params.beta)?;
    let gammas = axis("sweep.gammas", &sw.gammas, f64::NAN)?;
    let seeds = axis("sweep.seeds", &sw.seeds, seed)?;
    let total = steps.len() * betas.len() * gammas.len() * seeds.len();
    if total > MAX_CELLS {
        bail!("sweep: grid has {total} cells, more than the limit of {MAX_CELLS}");
    }
    let mut cells = Vec::with_capacity(total);
    for &step in &steps {
        for &beta in &betas {
            if !(beta.abs() < 1.0) {
                bail!("sweep.betas: momentum must lie in (-1, 1), got {beta}");
            }
            for &g in &gammas {
                let gamma = if g.is_nan() || cfg.params.preset != "generic" {
                    cfg.params.gamma_for(beta)
                } else {
                    g
                };
                for &seed in &seeds {
                    cells.push(Cell { step, beta, gamma, seed });
                }
            }
        }
    }
    Ok(cells)
}

fn run_cell(ctx: &Context, cell: Cell) -> Result<Row> {
    let cfg = &ctx.loaded.config;
    let sw = cfg.sweep.as_ref().expect("checked in grid");
    let p = setup::build_problem(cfg, &ctx.loaded.dir)?;
    let (_, params) = setup::build_params(cfg, None, cell.beta, cell.gamma)?;
    let start = setup::build_init(cfg, p.as_ref(), cell.seed)?;
    let opts = setup::certify_options(cfg, p.as_ref(), start.x0(), cell.seed);
    let ev = evaluate(p.as_ref(), &start, &params, cell.step, &setup::stop_rule(cfg), &opts, &cfg.checks)?;
    let trace = &ev.run.trace;
    let last = trace.records().last().expect("trace has x_0");
    let final_grad = norm(&p.gradient(trace.last_point()));
    Ok(Row {
        cell,
        alpha: trace.params().alpha(),
        alpha_bar: ev.run.certificate.alpha_bar,
        converged: final_grad <= sw.converge_tol && last.value.is_finite(),
        stop_reason: trace.stop_reason().to_string(),
        iterations: trace.iterations(),
        length: momentum_core::analysis::measure_length(trace).total,
        min_slack: ev.descent.summary.min_slack,
        descent_failed: ev.descent.summary.failed,
        rate_sup: ev.rate.as_ref().map(|r| r.sup),
        c_alpha: ev.rate.as_ref().map(|r| r.c_alpha),
        pass: ev.pass() || !ev.run.certificate.step_size_ok,
    })
}

pub fn cmd_sweep(ctx: &Context) -> Result<bool> {
    let cfg = &ctx.loaded.config;
    let cells = grid(cfg, ctx.seed, ctx.alpha)?;
    let rows = cells
        .par_iter()
        .map(|&c| run_cell(ctx, c))
        .collect::<Result<Vec<_>>>()?;

    let p = setup::build_problem(cfg, &ctx.loaded.dir)?;
    let prov = ctx.provenance(p.as_ref());
    let mut w = ctx.out.csv("sweep.csv", &prov)?;
    w.write_record([
        "alpha", "alpha_rule", "beta", "gamma", "seed", "alpha_bar", "converged", "stop_reason",
        "iterations", "length", "min_slack", "descent_failed", "rate_sup", "c_alpha", "pass",
    ])?;
    for r in &rows {
        let rule = match r.cell.step {
            StepRule::Fixed(_) => "fixed".to_string(),
            StepRule::Auto { fraction } => format!("auto:{fraction}"),
        };
        w.write_record([
            real(r.alpha),
            rule,
            real(r.cell.beta),
            real(r.cell.gamma),
            r.cell.seed.to_string(),
            real(r.alpha_bar),
            r.converged.to_string(),
            r.stop_reason.clone(),
            r.iterations.to_string(),
            real(r.length),
            num(r.min_slack),
            r.descent_failed.to_string(),
            num(r.rate_sup),
            num(r.c_alpha),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;

    let pass = rows.iter().all(|r| r.pass);
    let converged = rows.iter().filter(|r| r.converged).count();
    ctx.out.json(
        "sweep_report.json",
        &json!({
            "provenance": prov,
            "metadata": Metadata::now("sweep"),
            "cells": rows.len(),
            "converged": converged,
            "passed": rows.iter().filter(|r| r.pass).count(),
            "pass": pass,
        }),
    )?;
    if !ctx.quiet {
        println!("{} cells, {converged} converged, all certified cells pass: {pass}", rows.len());
    }
    Ok(pass)
}
