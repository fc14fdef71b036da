//! Logistic comparison, Huber scale sweep and free-form comparisons.

use std::fmt::Write as _;

use super::config::{ExperimentConfig, MethodKind, MethodSpec, StepValue};
use super::{
    build_network, build_objective, describe_runs, header, hit_total, initial_point, objective_line, push_checks,
    run_artifacts, run_methods, Artifact, Check, ExperimentOutput,
};
use crate::error::Result;
use crate::solvers::{run_centralized, CentralStep};

const FIG1_ETA: f64 = 0.1;
/// Placement budget for sparse small graphs (30 nodes at density 0.10).
const FAST_RETRIES: usize = 5000;

fn fig1_left_methods(long: bool) -> Vec<MethodSpec> {
    let mut dsg = MethodSpec::new("dsg", MethodKind::Dsg).with_c(StepValue::Abs(1.0)).with_tau(0.5).with_k_max(30_000);
    if long {
        dsg.keep_every = 10;
    }
    vec![
        MethodSpec::new("dng", MethodKind::Dng).with_c(StepValue::Abs(1.0)).with_eta(FIG1_ETA).with_k_max(10_000),
        MethodSpec::new("dnc_half_over_L", MethodKind::Dnc).with_alpha(StepValue::OverL(0.5)).with_k_max(500),
        MethodSpec::new("dnc_1_over_L", MethodKind::Dnc).with_alpha(StepValue::OverL(1.0)).with_k_max(500),
        dsg,
    ]
}

/// Logistic loss over a sparse geometric network: D-NG on safeguarded
/// weights against D-NC at two step sizes and the subgradient baseline.
pub(crate) fn fig1_left(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut cfg = cfg.clone();
    cfg.objective.get_or_insert_with(|| "logistic".into());
    let n = *cfg.n.get_or_insert(if cfg.long { 100 } else { 30 });
    if cfg.retries.is_none() && n < 100 {
        cfg.retries = Some(FAST_RETRIES);
    }
    let methods = if cfg.methods.is_empty() { fig1_left_methods(cfg.long) } else { cfg.methods.clone() };
    let obj = build_objective(&cfg, "logistic", n)?;
    let net = build_network(&cfg, obj.n(), 0.10)?;
    let x0 = initial_point(&cfg, &obj)?;
    let runs = run_methods(&obj, &net, &methods, &x0, cfg.seed, cfg.k_max.unwrap_or(1000))?;

    let mut summary = header(&cfg);
    let _ = writeln!(summary, "{}", objective_line(&obj));
    let _ = writeln!(summary, "{}", net.describe());
    let hits_csv = describe_runs(&runs, &cfg.targets, &mut summary);

    let find = |label: &str| runs.iter().find(|r| r.spec.label == label);
    let mut checks = Vec::new();
    let start_ok = runs.iter().all(|r| (r.trace.avg_rel_err(r.trace.first()) - 1.0).abs() <= 1e-12);
    checks.push(Check::new("normalized start", start_ok, 1.0, 1.0, "avg_rel_err(0) = 1 for every method"));
    let pair = |a: &str, b: &str, name: &str| -> Option<Check> {
        let (ra, rb) = (find(a)?, find(b)?);
        let (ha, hb) = (hit_total(&ra.trace, 1e-2), hit_total(&rb.trace, 1e-2));
        let passed = matches!((ha, hb), (Some(x), Some(y)) if x < y) || (ha.is_some() && hb.is_none());
        Some(Check::new(
            name,
            passed,
            ha.map_or(f64::NAN, |v| v as f64),
            hb.map_or(f64::NAN, |v| v as f64),
            format!("comms to 1e-2: {a} {ha:?} vs {b} {hb:?}"),
        ))
    };
    checks.extend(pair("dng", "dsg", "D-NG ahead of baseline"));
    checks.extend(pair("dnc_1_over_L", "dnc_half_over_L", "D-NC larger step ahead"));
    if cfg.long {
        // Order-of-magnitude references for 100 nodes, within a factor of 3.
        for (label, reference) in [("dng", 1e4), ("dnc_1_over_L", 4.65e4), ("dnc_half_over_L", 1.1e5)] {
            if let Some(r) = find(label) {
                let hit = hit_total(&r.trace, 1e-2).map_or(f64::INFINITY, |v| v as f64);
                let ratio = hit / reference;
                checks.push(Check::new(
                    &format!("{label} reference comms"),
                    (1.0 / 3.0..=3.0).contains(&ratio),
                    hit,
                    reference,
                    format!("comms to 1e-2 {hit} vs reference {reference:e} (ratio {ratio:.2})"),
                ));
            }
        }
        if let Some(r) = find("dsg") {
            let hit = hit_total(&r.trace, 1e-2).map_or(f64::INFINITY, |v| v as f64);
            checks.push(Check::new(
                "dsg reference comms",
                hit >= 1.3e5 / 3.0,
                hit,
                1.3e5,
                format!("comms to 1e-2 {hit} vs reference >= 1.3e5"),
            ));
        }
    }
    push_checks(&mut summary, &checks);

    let mut artifacts = run_artifacts(&runs, "");
    artifacts.push(Artifact { name: "first_hits.csv".into(), contents: hits_csv });
    Ok(ExperimentOutput { experiment: cfg.experiment, artifacts, summary, checks, gating: false })
}

/// Twenty Huber losses in two groups at three scales `theta`.
pub(crate) fn fig1_right(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let thetas = if cfg.thetas.is_empty() { vec![0.01, 10.0, 1000.0] } else { cfg.thetas.clone() };
    let methods = if cfg.methods.is_empty() {
        vec![
            MethodSpec::new("dng", MethodKind::Dng).with_c(StepValue::Abs(1.0)).with_eta(FIG1_ETA).with_k_max(20_000),
            MethodSpec::new("dnc", MethodKind::Dnc).with_alpha(StepValue::OverL(1.0)).with_k_max(2_000),
        ]
    } else {
        cfg.methods.clone()
    };
    let mut summary = header(cfg);
    let mut artifacts = Vec::new();
    let mut per_theta = Vec::new();
    for &theta in &thetas {
        let mut c = cfg.clone();
        c.objective = Some("huber_two_group".into());
        c.theta = Some(theta);
        let obj = build_objective(&c, "huber_two_group", 20)?;
        let net = build_network(&c, obj.n(), 0.32)?;
        let x0 = initial_point(&c, &obj)?;
        let runs = run_methods(&obj, &net, &methods, &x0, cfg.seed, cfg.k_max.unwrap_or(1000))?;
        let prefix = format!("theta_{theta}_");
        let _ = writeln!(summary, "\n== theta {theta}");
        let _ = writeln!(summary, "{}", objective_line(&obj));
        let _ = writeln!(summary, "{}", net.describe());
        let hits = describe_runs(&runs, &cfg.targets, &mut summary);
        artifacts.extend(run_artifacts(&runs, &prefix));
        artifacts.push(Artifact { name: format!("{prefix}first_hits.csv"), contents: hits });
        per_theta.push((theta, runs));
    }

    let mut checks = Vec::new();
    let hit = |runs: &[super::MethodRun], label: &str, eps: f64| {
        runs.iter().find(|r| r.spec.label == label).and_then(|r| hit_total(&r.trace, eps))
    };
    let uses_defaults = cfg.methods.is_empty();
    if uses_defaults {
        let mut sorted: Vec<(f64, Option<u64>)> = per_theta.iter().map(|(t, r)| (*t, hit(r, "dnc", 1e-3))).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let monotone = sorted.windows(2).all(|w| match (w[0].1, w[1].1) {
            (Some(a), Some(b)) => a <= b,
            (Some(_), None) => true,
            _ => false,
        });
        checks.push(Check::new(
            "D-NC faster at smaller theta",
            monotone,
            f64::NAN,
            f64::NAN,
            format!("D-NC comms to 1e-3 by theta: {sorted:?}"),
        ));
        if let Some((_, runs)) = per_theta.iter().find(|(t, _)| *t == 1000.0) {
            let mut ok = true;
            let mut cells = Vec::new();
            for &eps in &cfg.targets {
                let (g, c) = (hit(runs, "dng", eps), hit(runs, "dnc", eps));
                ok &= match (g, c) {
                    (Some(a), Some(b)) => a <= b,
                    (Some(_), None) | (None, None) => true,
                    (None, Some(_)) => false,
                };
                cells.push(format!("{eps:e}: {g:?}/{c:?}"));
            }
            checks.push(Check::new(
                "D-NG ahead at theta 1000",
                ok,
                f64::NAN,
                f64::NAN,
                format!("dng/dnc comms {}", cells.join(", ")),
            ));
        }
        if let Some((_, runs)) = per_theta.iter().find(|(t, _)| *t == 0.01) {
            let order: Vec<Option<bool>> = cfg
                .targets
                .iter()
                .map(|&eps| match (hit(runs, "dng", eps), hit(runs, "dnc", eps)) {
                    (Some(a), Some(b)) => Some(a < b),
                    (None, Some(_)) => Some(false),
                    _ => None,
                })
                .collect();
            let known: Vec<bool> = order.iter().flatten().copied().collect();
            let crossing = known.windows(2).any(|w| w[0] != w[1]);
            checks.push(Check::new(
                "crossover at theta 0.01",
                crossing,
                f64::NAN,
                f64::NAN,
                format!("D-NG ahead per eps: {order:?}"),
            ));
        }
    }
    let _ = writeln!(summary);
    push_checks(&mut summary, &checks);
    Ok(ExperimentOutput { experiment: cfg.experiment, artifacts, summary, checks, gating: false })
}

/// Methods from the config on the configured objective and network. With a
/// single node, every D-NG method is also compared against centralized
/// Nesterov with the same step.
pub(crate) fn custom(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.methods.is_empty() {
        return Err(super::config_err("method", "custom experiments need at least one [method.X] section"));
    }
    let obj = build_objective(cfg, "logistic", cfg.n.unwrap_or(10))?;
    let net = build_network(cfg, obj.n(), 0.4)?;
    let x0 = initial_point(cfg, &obj)?;
    let k_max = cfg.k_max.unwrap_or(1000);
    let runs = run_methods(&obj, &net, &cfg.methods, &x0, cfg.seed, k_max)?;

    let mut summary = header(cfg);
    let _ = writeln!(summary, "{}", objective_line(&obj));
    let _ = writeln!(summary, "{}", net.describe());
    let hits = describe_runs(&runs, &cfg.targets, &mut summary);
    let mut checks = Vec::new();
    if obj.n() == 1 {
        for r in runs.iter().filter(|r| r.spec.kind == MethodKind::Dng) {
            let c = r.spec.c.as_ref().expect("validated").resolve(obj.lipschitz).expect("resolved before");
            let reference = run_centralized(&obj, CentralStep::Diminishing(c), r.trace.k_max, &x0)?;
            let mut worst = 0.0f64;
            for rec in &r.trace.records {
                if let Some(z) = reference.at(rec.k) {
                    for (a, b) in rec.x.iter().zip(&z.x).chain(rec.y.iter().zip(&z.y)) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
            checks.push(Check::new(
                &format!("{} matches centralized", r.spec.label),
                worst <= 1e-12,
                worst,
                1e-12,
                format!("max |D-NG - centralized| over {} records: {worst:.3e}", r.trace.records.len()),
            ));
        }
    }
    push_checks(&mut summary, &checks);
    let mut artifacts = run_artifacts(&runs, "");
    artifacts.push(Artifact { name: "first_hits.csv".into(), contents: hits });
    Ok(ExperimentOutput { experiment: cfg.experiment, artifacts, summary, checks, gating: false })
}
