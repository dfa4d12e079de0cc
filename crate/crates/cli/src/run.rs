//! `run`: one certified momentum run with every requested check.

use std::collections::BTreeMap;

use anyhow::Result;
use momentum_core::analysis::{check_rate, fit_trace, Desingularizer, FitOptions, RateReport};
use momentum_core::certificates::{
    certify_run, check_descent, check_gradient_bound, check_length_formula, check_step_bound,
    lyapunov_values, CertifiedRun, CertifyOptions, CheckSummary, DescentReport,
    GradientBoundReport, InitialPair, StepRule,
};
use momentum_core::optimizer::{MomentumParams, StopRule};
use momentum_core::problems::Problem;
use serde::Serialize;
use serde_json::json;

use crate::config::{ChecksSpec, ProblemKind};
use crate::output::{num, real, Metadata};
use crate::setup;
use crate::Context;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// The check's hypotheses were not certified; its verdict is reported
    /// but does not fail the run.
    Uncertified,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub requested: bool,
    pub status: Status,
    pub detail: serde_json::Value,
}

/// A certified run together with every check evaluated on it.
pub struct Evaluation {
    pub run: CertifiedRun<f64>,
    pub descent: DescentReport<f64>,
    pub gradient: GradientBoundReport<f64>,
    pub psi: std::result::Result<Desingularizer<f64>, String>,
    pub rate: Option<RateReport<f64>>,
    pub checks: BTreeMap<&'static str, CheckResult>,
}

impl Evaluation {
    pub fn pass(&self) -> bool {
        self.checks.values().all(|c| !c.requested || c.status != Status::Fail)
    }
}

fn summary_status(s: &CheckSummary<f64>) -> Status {
    if s.failed > 0 {
        Status::Fail
    } else if s.passed == 0 && s.uncertified > 0 {
        Status::Uncertified
    } else {
        Status::Pass
    }
}

fn verdict(pass: bool, certified: bool) -> Status {
    match (pass, certified) {
        (true, _) => Status::Pass,
        (false, true) => Status::Fail,
        (false, false) => Status::Uncertified,
    }
}

pub fn evaluate(
    p: &dyn Problem<f64>,
    start: &InitialPair<f64>,
    params: &MomentumParams<f64>,
    rule: StepRule,
    stop: &StopRule<f64>,
    opts: &CertifyOptions,
    checks: &ChecksSpec,
) -> Result<Evaluation> {
    let run = certify_run(p, start, params, rule, stop, opts)?;
    let trace = &run.trace;
    let cert = &run.certificate;
    let descent = check_descent(trace, cert);
    let gradient = check_gradient_bound(p, trace, cert);
    let step = check_step_bound(trace, cert);
    let psi = match checks.desingularizer {
        Some(d) => Desingularizer::power(d.c, d.theta).map_err(|e| e.to_string()),
        None => {
            let f_star = checks.f_star.or_else(|| p.known_minimum());
            fit_trace(trace, f_star, &FitOptions::default()).map_err(|e| e.to_string())
        }
    };
    let length = match &psi {
        Ok(psi) => Some(check_length_formula(trace, cert, psi)?),
        Err(_) => None,
    };
    let rate = length.as_ref().map(|l| check_rate(trace, cert, l.bound));

    let mut out = BTreeMap::new();
    out.insert(
        "descent",
        CheckResult {
            requested: checks.descent,
            status: summary_status(&descent.summary),
            detail: json!({
                "summary": descent.summary,
                "pass_rate": pass_rate(&descent.summary),
            }),
        },
    );
    let g_status = match (summary_status(&gradient.grad_summary), summary_status(&gradient.lyapunov_summary)) {
        (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
        (Status::Pass, Status::Pass) => Status::Pass,
        _ => Status::Uncertified,
    };
    out.insert(
        "gradient_bound",
        CheckResult {
            requested: checks.gradient_bound,
            status: g_status,
            detail: json!({
                "b_alpha": cert.b_alpha,
                "gradient": gradient.grad_summary,
                "lyapunov_gradient": gradient.lyapunov_summary,
            }),
        },
    );
    out.insert(
        "step_bound",
        CheckResult {
            requested: checks.step_bound,
            status: summary_status(&step.summary),
            detail: json!({ "delta1": step.delta1, "summary": step.summary }),
        },
    );
    let (length_result, rate_result) = match (&psi, &length, &rate) {
        (Ok(psi), Some(l), Some(r)) => {
            let certified = l.certified;
            (
                CheckResult {
                    requested: checks.length_formula,
                    status: verdict(l.pass, certified),
                    detail: json!({ "report": l, "desingularizer": psi }),
                },
                CheckResult {
                    requested: checks.rate,
                    status: verdict(r.pass, certified && l.pass),
                    detail: json!({
                        "c_alpha": r.c_alpha,
                        "sup": r.sup,
                        "length_bound": r.length_bound,
                        "telescoping_ok": r.telescoping_ok,
                    }),
                },
            )
        }
        _ => {
            let reason = psi.as_ref().err().cloned().unwrap_or_default();
            let skipped = |requested| CheckResult {
                requested,
                status: Status::Skipped,
                detail: json!({ "reason": format!("no desingularizer: {reason}") }),
            };
            (skipped(checks.length_formula), skipped(checks.rate))
        }
    };
    out.insert("length_formula", length_result);
    out.insert("rate", rate_result);
    Ok(Evaluation {
        run,
        descent,
        gradient,
        psi,
        rate,
        checks: out,
    })
}

fn pass_rate(s: &CheckSummary<f64>) -> f64 {
    if s.checked == 0 {
        1.0
    } else {
        s.passed as f64 / s.checked as f64
    }
}

pub fn notes(kind: ProblemKind, ev: &Evaluation, mode: &str) -> Vec<String> {
    let mut notes = Vec::new();
    if kind == ProblemKind::MatrixSensing {
        notes.push("matrix sensing: the restricted isometry property of the sensing operator is not checked".into());
    }
    if mode == "sampled" {
        notes.push("Lipschitz constants are sampled estimates inflated by the safety factor, not proven bounds".into());
    }
    if matches!(&ev.psi, Ok(d) if d.is_empirical()) {
        notes.push("the desingularizer was fitted to this trace; the length check is empirical".into());
    }
    if !ev.run.contained {
        notes.push("iterates left the certified ball after the enlargement budget; steps outside are uncertified".into());
    }
    if !ev.run.certificate.step_size_ok {
        notes.push("the step size exceeds the admissible bound; descent is not guaranteed".into());
    }
    if !ev.run.trace.initial_velocity_ok() {
        notes.push("initial velocity exceeds delta*alpha".into());
    }
    notes
}

pub fn cmd_run(ctx: &Context) -> Result<bool> {
    let cfg = &ctx.loaded.config;
    let p = setup::build_problem(cfg, &ctx.loaded.dir)?;
    let beta = cfg.params.beta;
    let (rule, params) = setup::build_params(cfg, ctx.alpha, beta, cfg.params.gamma_for(beta))?;
    let start = setup::build_init(cfg, p.as_ref(), ctx.seed)?;
    let opts = setup::certify_options(cfg, p.as_ref(), start.x0(), ctx.seed);
    let ev = evaluate(p.as_ref(), &start, &params, rule, &setup::stop_rule(cfg), &opts, &cfg.checks)?;
    let prov = ctx.provenance(p.as_ref());

    write_trace_csv(ctx, &prov, &ev)?;
    let run = &ev.run;
    ctx.out.json(
        "certificate.json",
        &json!({
            "provenance": prov,
            "certificate": run.certificate,
            "lipschitz": run.estimate,
            "enlargements": run.enlargements,
            "contained": run.contained,
        }),
    )?;
    let pass = ev.pass();
    let trace = &run.trace;
    ctx.out.json(
        "report.json",
        &json!({
            "provenance": prov,
            "metadata": Metadata::now("run"),
            "problem": { "name": p.name(), "dim": p.dim(), "seed": p.seed() },
            "params": trace.params(),
            "step_rule": rule,
            "stop_reason": trace.stop_reason(),
            "iterations": trace.iterations(),
            "final_value": trace.records().last().map(|r| r.value),
            "final_grad_norm": trace.records().last().map(|r| r.grad_norm),
            "checks": ev.checks,
            "notes": notes(cfg.problem.kind, &ev, &cfg.lipschitz.mode),
            "pass": pass,
        }),
    )?;
    if !ctx.quiet {
        println!(
            "{}: alpha={} (bound {}), {} iterations, stop={}",
            p.name(),
            trace.params().alpha(),
            run.certificate.alpha_bar,
            trace.iterations(),
            trace.stop_reason()
        );
        for (name, c) in &ev.checks {
            if c.requested {
                println!("  {name}: {:?}", c.status);
            }
        }
        println!("{}", if pass { "all requested checks pass" } else { "check failure" });
    }
    Ok(pass)
}

fn write_trace_csv(ctx: &Context, prov: &crate::output::Provenance, ev: &Evaluation) -> Result<()> {
    let trace = &ev.run.trace;
    let h = lyapunov_values(trace, ev.run.certificate.lambda);
    let mut descent = vec![None; h.len()];
    for s in &ev.descent.steps {
        descent[s.k] = Some(s.slack);
    }
    let mut grad = vec![None; h.len()];
    for s in &ev.gradient.steps {
        grad[s.k] = Some(s.grad_slack);
    }
    let mut w = ctx.out.csv("trace.csv", prov)?;
    w.write_record(["k", "f", "grad_norm", "step_norm", "H_lambda", "descent_slack", "gradbound_slack"])?;
    for (k, r) in trace.records().iter().enumerate() {
        w.write_record([
            k.to_string(),
            real(r.value),
            real(r.grad_norm),
            num(r.step_norm),
            real(h[k]),
            num(descent[k]),
            num(grad[k]),
        ])?;
    }
    w.flush()?;
    Ok(())
}
