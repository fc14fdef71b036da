//! Pass/fail suite over the library's invariants: objective certificates,
//! consensus, gap and communication bounds, the inexact oracle, the progress
//! inequality, the transition-matrix bound, the adversarial instances and the
//! single-node reduction.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind, Tamper};
use super::schema::VERIFY_HEADER;
use super::{header, Artifact, Check, ExperimentOutput};
use crate::bounds::{
    c_cons, dnc_comm_bound, dnc_consensus_bound, dnc_gap_bound, dng_consensus_bound, dng_gap_bound, phi_matrix,
    phi_norm_bound,
};
use crate::error::Result;
use crate::net::{
    generate_geometric, metropolis_weights, safeguard_weights, spectral, spectral_norm, WeightMatrix, WEIGHT_TOL,
};
use crate::objectives::{
    check_convexity, check_gradient_fd, check_lipschitz, check_optimality, make_cubic_pair, make_fair_loss,
    make_hard_nonsmooth_pair, make_hard_quadratic_pair, make_huber_pair, make_huber_two_group, make_logistic,
    random_anchors, ObjectiveSet,
};
use crate::oracle::{check_definition1, check_lemma2_progress, inexact_oracle_at, VIOLATION_TOL};
use crate::solvers::{
    alpha_dng, run_centralized, run_dnc, run_dng, tau_x, tau_y, CentralStep, DncConfig, DngConfig, Momentum,
};
use crate::stack::block_mean;

const ETA: f64 = 0.1;
const SLACK: f64 = 1e-9;

struct Instance {
    obj: ObjectiveSet,
    w: WeightMatrix,
    w_safe: WeightMatrix,
    mu: f64,
    mu_safe: f64,
}

fn instances(seed: u64) -> Result<Vec<Instance>> {
    (0..6u64)
        .map(|i| {
            let n = [5, 10, 20][i as usize % 3];
            let density = [0.6, 0.4, 0.3][i as usize % 3];
            let s = seed.wrapping_mul(97).wrapping_add(i);
            let w = metropolis_weights(&generate_geometric(n, density, s)?);
            let w_safe = safeguard_weights(&w, ETA)?;
            let (mu, mu_safe) = (spectral(&w).mu, spectral(&w_safe).mu);
            Ok(Instance { obj: make_logistic(n, s)?, w, w_safe, mu, mu_safe })
        })
        .collect()
}

fn families(seed: u64) -> Result<Vec<ObjectiveSet>> {
    Ok(vec![
        make_logistic(10, seed)?,
        make_huber_two_group(10.0, seed)?,
        make_huber_pair(),
        make_hard_nonsmooth_pair(0.5)?,
        make_hard_quadratic_pair(3.0)?,
        make_cubic_pair(),
        make_fair_loss(6, 1.5, &random_anchors(6, 4.0, seed))?,
    ])
}

/// `B(r)` by a plain grid, independent of the library's refined search.
fn big_b_grid(r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let z_max = 10f64.max(20.0 / -r.ln());
    let steps = ((z_max - 0.5) / 1e-4) as usize;
    (0..=steps)
        .map(|i| {
            let z = 0.5 + i as f64 * 1e-4;
            z * r.powf(z) * z.ln_1p()
        })
        .fold(0.0, f64::max)
}

fn gradients(seed: u64) -> Result<Check> {
    let worst = families(seed)?
        .iter()
        .enumerate()
        .map(|(i, s)| check_gradient_fd(s, 100, seed + i as u64))
        .fold(0.0, f64::max);
    Ok(Check::new("gradient finite differences", worst <= 1e-5, worst, 1e-5, format!("worst relative error {worst:.2e}")))
}

fn certificates(seed: u64) -> Result<Check> {
    let mut worst_ratio = 0.0f64;
    let mut worst_convexity = f64::NEG_INFINITY;
    let mut failed = Vec::new();
    for (i, s) in families(seed)?.iter().enumerate() {
        let rep = check_lipschitz(s, 200, seed + i as u64);
        worst_ratio = worst_ratio.max(rep.lipschitz_ratio.unwrap_or(0.0)).max(rep.grad_bound_ratio.unwrap_or(0.0));
        let cv = check_convexity(s, 200, seed + i as u64);
        worst_convexity = worst_convexity.max(cv);
        if !rep.passed() || cv > 1e-12 {
            failed.push(s.family.name().to_string());
        }
    }
    Ok(Check::new(
        "L, G and convexity certificates",
        failed.is_empty(),
        worst_ratio,
        1.0,
        format!("max sampled ratio {worst_ratio:.3}, worst midpoint excess {worst_convexity:.1e}, failing {failed:?}"),
    ))
}

fn optimality(seed: u64) -> Result<Check> {
    let mut worst = f64::INFINITY;
    for (i, s) in families(seed)?.iter().enumerate() {
        let scale = 1.0 + s.f_star().unwrap_or(0.0).abs();
        if let Some(v) = check_optimality(s, 500, seed + i as u64) {
            worst = worst.min(v / scale);
        }
    }
    Ok(Check::new("stored optima", worst >= -1e-10, worst, -1e-10, format!("min relative f(x*+d) - f* {worst:.2e}")))
}

fn dng_consensus(inst: &[Instance], tamper: Option<Tamper>) -> Result<Check> {
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    let mut worst_const = 0.0f64;
    for it in inst {
        let n = it.obj.n();
        let g = it.obj.grad_bound.expect("logistic declares G");
        let mut cc = c_cons(it.mu_safe, ETA)?;
        if tamper == Some(Tamper::HalveCCons) {
            cc *= 0.5;
        }
        let reference = 8.0 / (ETA * (1.0 - it.mu_safe)).sqrt()
            * (2.0 * big_b_grid(it.mu_safe.sqrt()) + 7.0 / (1.0 - it.mu_safe));
        worst_const = worst_const.max((cc - reference).abs() / reference);
        let tr = run_dng(&it.obj, &DngConfig::new(1.0, 1000, it.w_safe.clone()), &[0.0; 3])?;
        for r in tr.records.iter().filter(|r| r.k >= 1) {
            let (bx, by) = dng_consensus_bound(r.k, n, 1.0, g, cc);
            worst_ratio = worst_ratio.max(r.dis_x / bx).max(r.dis_y / by);
            if r.dis_x > bx + SLACK || r.dis_y > by + SLACK {
                violations += 1;
            }
        }
    }
    Ok(Check::new(
        "D-NG consensus dominance",
        violations == 0 && worst_const <= 1e-6,
        worst_ratio,
        1.0,
        format!(
            "{violations} violations over {} instances, max ratio {worst_ratio:.3e}; constant vs grid recomputation rel diff {worst_const:.1e} (tol 1e-6)",
            inst.len()
        ),
    ))
}

fn dnc_consensus(inst: &[Instance]) -> Result<Check> {
    let mut violations = 0;
    let mut worst = 0.0f64;
    for it in inst {
        let (n, l, g) = (it.obj.n(), it.obj.lipschitz.unwrap(), it.obj.grad_bound.unwrap());
        let alpha = 1.0 / (2.0 * l);
        let tr = run_dnc(&it.obj, &DncConfig::new(alpha, 150, it.w.clone(), it.mu), &[0.0; 3])?;
        for r in tr.records.iter().filter(|r| r.k >= 1) {
            let b = dnc_consensus_bound(r.k, n, alpha, g);
            worst = worst.max(r.dis_x / b).max(r.dis_y / b);
            if r.dis_x > b + SLACK || r.dis_y > b + SLACK {
                violations += 1;
            }
        }
    }
    Ok(Check::new("D-NC consensus dominance", violations == 0, worst, 1.0, format!("{violations} violations, max ratio {worst:.3}")))
}

fn gap_bounds(inst: &[Instance]) -> Result<Check> {
    let mut violations = 0;
    let (mut r_dng, mut r_dnc) = (0.0f64, 0.0f64);
    for it in inst {
        let n = it.obj.n() as f64;
        let (l, g) = (it.obj.lipschitz.unwrap(), it.obj.grad_bound.unwrap());
        let r = crate::stack::norm(it.obj.x_star().unwrap());
        let c = 1f64.min(1.0 / (2.0 * l));
        let cc = c_cons(it.mu_safe, ETA)?;
        let tr = run_dng(&it.obj, &DngConfig::new(c, 1000, it.w_safe.clone()), &[0.0; 3])?;
        for rec in tr.records.iter().filter(|r| r.k >= 1) {
            let b = dng_gap_bound(rec.k, c, l, g, r, cc)?;
            let gap = tr.max_gap(rec) / n;
            r_dng = r_dng.max(gap / b);
            violations += usize::from(gap > b + SLACK);
        }
        let alpha = 1.0 / (2.0 * l);
        let tr = run_dnc(&it.obj, &DncConfig::new(alpha, 150, it.w.clone(), it.mu), &[0.0; 3])?;
        for rec in tr.records.iter().filter(|r| r.k >= 1) {
            let b = dnc_gap_bound(rec.k, alpha, l, g, r)?;
            let gap = tr.max_gap(rec) / n;
            r_dnc = r_dnc.max(gap / b);
            violations += usize::from(gap > b + SLACK);
        }
    }
    Ok(Check::new(
        "optimality gap bounds",
        violations == 0,
        r_dng.max(r_dnc),
        1.0,
        format!("{violations} violations, max ratio D-NG {r_dng:.3e}, D-NC {r_dnc:.3e}"),
    ))
}

fn comm_bound() -> Result<Check> {
    let mut violations = 0;
    let mut mismatches = 0;
    for mu in [0.3, 0.75, 0.9] {
        let w = WeightMatrix::two_node((1.0 - mu) / 2.0)?;
        let tr = run_dnc(&make_hard_quadratic_pair(1.0)?, &DncConfig::new(0.5, 200, w, mu), &[0.0])?;
        let mut expected = 0u64;
        for rec in tr.records.iter().filter(|r| r.k >= 1) {
            expected += (tau_x(rec.k, mu)? + tau_y(rec.k, mu)?) as u64;
            mismatches += usize::from(rec.comms_per_node != expected);
            violations += usize::from(rec.comms_per_node as f64 > dnc_comm_bound(rec.k, mu)?);
        }
    }
    Ok(Check::new(
        "D-NC communication bound",
        violations == 0 && mismatches == 0,
        violations as f64,
        0.0,
        format!("{violations} violations, {mismatches} accounting mismatches"),
    ))
}

fn definition1(seed: u64) -> Result<Check> {
    let obj = make_logistic(10, seed)?;
    let w = metropolis_weights(&generate_geometric(10, 0.4, seed)?);
    let l = obj.lipschitz.unwrap();
    let mu = spectral(&w).mu;
    let dng = run_dng(&obj, &DngConfig::new(1.0, 100, safeguard_weights(&w, ETA)?), &[0.0; 3])?;
    let dnc = run_dnc(&obj, &DncConfig::new(1.0 / (2.0 * l), 100, w, mu), &[0.0; 3])?;
    let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for tr in [&dng, &dnc] {
        for rec in tr.records.iter().filter(|r| r.k % 10 == 0) {
            let s = inexact_oracle_at(&obj, &rec.y)?;
            let c = check_definition1(&s, &obj, 300, 5.0, seed + rec.k as u64);
            lower = lower.max(c.lower);
            upper = upper.max(c.upper);
        }
    }
    Ok(Check::new(
        "inexact oracle inequalities",
        lower <= VIOLATION_TOL && upper <= VIOLATION_TOL,
        lower.max(upper),
        VIOLATION_TOL,
        format!("worst lower {lower:.2e}, worst upper {upper:.2e}"),
    ))
}

fn progress(seed: u64) -> Result<Check> {
    let obj = make_logistic(10, seed)?;
    let w = metropolis_weights(&generate_geometric(10, 0.4, seed)?);
    let l = obj.lipschitz.unwrap();
    let c = 1.0 / (2.0 * l);
    let dng = run_dng(&obj, &DngConfig::new(c, 300, safeguard_weights(&w, ETA)?), &[0.0; 3])?;
    let mu = spectral(&w).mu;
    let dnc = run_dnc(&obj, &DncConfig::new(c, 300, w, mu), &[0.0; 3])?;
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for tr in [&dng, &dnc] {
        let rep = check_lemma2_progress(tr, &obj, None)?;
        violations += rep.violations(VIOLATION_TOL).len();
        if let Some(e) = rep.worst() {
            worst = worst.min(e.residual);
        }
    }
    Ok(Check::new(
        "per-iteration progress",
        violations == 0,
        worst,
        -VIOLATION_TOL,
        format!("{violations} in-regime violations, min residual {worst:.2e}"),
    ))
}

fn phi_bound(seed: u64) -> Result<Check> {
    let mut violations = 0;
    let mut worst = 0.0f64;
    for i in 0..4u64 {
        let n = [5, 10][i as usize % 2];
        let w = safeguard_weights(&metropolis_weights(&generate_geometric(n, 0.5, seed + i)?), ETA)?;
        let mu = spectral(&w).mu;
        for t in [0usize, 1, 3, 10] {
            for k in [t, t + 1, t + 5, t + 20, t + 40] {
                let s = spectral_norm(&phi_matrix(&w, k, t)?);
                let b = phi_norm_bound(mu, ETA, k - t);
                worst = worst.max(s / b);
                violations += usize::from(s > b * (1.0 + 1e-12));
            }
        }
    }
    Ok(Check::new("transition matrix norm bound", violations == 0, worst, 1.0, format!("{violations} violations, max ratio {worst:.3e}")))
}

fn safeguard_map(inst: &[Instance]) -> Result<Check> {
    let mut worst = 0.0f64;
    let mut structure_ok = true;
    for it in inst {
        let mut expect: Vec<f64> = spectral(&it.w).eigenvalues.iter().map(|l| 0.5 * (1.0 + ETA) + 0.5 * (1.0 - ETA) * l).collect();
        let mut got = spectral(&it.w_safe).eigenvalues;
        expect.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        worst = got.iter().zip(&expect).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
        let info = spectral(&it.w_safe);
        structure_ok &= info.assumption_1a() && info.assumption_1b(ETA);
        for w in [&it.w, &it.w_safe] {
            let n = w.n();
            for i in 0..n {
                let row: f64 = w.row(i).iter().sum();
                structure_ok &= (row - 1.0).abs() <= WEIGHT_TOL;
                for j in 0..n {
                    structure_ok &= (w.get(i, j) - w.get(j, i)).abs() <= WEIGHT_TOL && w.get(i, j) >= 0.0;
                }
            }
        }
    }
    Ok(Check::new(
        "weights and safeguard spectrum",
        worst <= 1e-10 && structure_ok,
        worst,
        1e-10,
        format!("symmetric doubly stochastic: {structure_ok}; eigenvalue map max error {worst:.1e}"),
    ))
}

fn average_preservation(inst: &[Instance]) -> Result<Check> {
    let mut worst = 0.0f64;
    for it in inst.iter().take(3) {
        let (n, d) = (it.obj.n(), it.obj.d());
        let tr = run_dng(&it.obj, &DngConfig::new(1.0, 200, it.w_safe.clone()), &[0.0; 3])?;
        let mut g = vec![0.0; n * d];
        for p in tr.records.windows(2) {
            let (prev, cur) = (&p[0], &p[1]);
            it.obj.stacked_gradient_into(&prev.y, &mut g);
            let a = alpha_dng(1.0, prev.k);
            let gbar = block_mean(&g, n, d);
            for l in 0..d {
                let expect = prev.ybar[l] - a * gbar[l];
                worst = worst.max((cur.xbar[l] - expect).abs() / (1.0 + expect.abs()));
            }
        }
    }
    Ok(Check::new(
        "network average preservation",
        worst <= 1e-12,
        worst,
        1e-12,
        format!("max |xbar(k) - (ybar(k-1) - alpha mean grad)| {worst:.1e}"),
    ))
}

fn single_node(tamper: Option<Tamper>) -> Result<Check> {
    let mut worst = 0.0f64;
    let quad = make_hard_quadratic_pair(2.0)?;
    let quad1 = ObjectiveSet::custom("quadratic", vec![quad.nodes[0].clone()], Some(1.0), None, None)?;
    let fair = make_fair_loss(1, 1.5, &[0.7])?;
    for (obj, c, x0) in [(&fair, 0.8, 3.0), (&quad1, 0.5, -4.0)] {
        let mut cfg = DngConfig::new(c, 1000, WeightMatrix::identity(1));
        if let Some(Tamper::FixedMomentum(b)) = tamper {
            cfg.momentum = Momentum::Fixed(b);
        }
        let d = run_dng(obj, &cfg, &[x0])?;
        let z = run_centralized(obj, CentralStep::Diminishing(c), 1000, &[x0])?;
        for (a, b) in d.records.iter().zip(&z.records) {
            worst = worst.max((a.x[0] - b.x[0]).abs()).max((a.y[0] - b.y[0]).abs());
        }
    }
    Ok(Check::new("single-node reduction", worst <= 1e-12, worst, 1e-12, format!("max |D-NG - centralized| {worst:.1e}")))
}

fn demo_checks(kind: ExperimentKind, seed: u64, k_max: Option<usize>) -> Result<Vec<Check>> {
    let mut cfg = ExperimentConfig::new(kind, seed);
    cfg.k_max = k_max;
    let out = super::run_experiment(&cfg)?;
    Ok(out
        .checks
        .into_iter()
        .map(|mut c| {
            c.name = format!("{}: {}", kind.name(), c.name);
            c
        })
        .collect())
}

type Job<'a> = Box<dyn Fn() -> Result<Vec<Check>> + Send + Sync + 'a>;

pub(crate) fn verify(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let seed = cfg.seed;
    let tamper = cfg.tamper;
    let inst = instances(seed)?;
    let nedic_k = if cfg.long { 2000 } else { 300 };
    let one = |c: Result<Check>| c.map(|c| vec![c]);
    let jobs: Vec<Job> = vec![
        Box::new(|| one(gradients(seed))),
        Box::new(|| one(certificates(seed))),
        Box::new(|| one(optimality(seed))),
        Box::new(|| one(safeguard_map(&inst))),
        Box::new(|| one(average_preservation(&inst))),
        Box::new(|| one(dng_consensus(&inst, tamper))),
        Box::new(|| one(dnc_consensus(&inst))),
        Box::new(|| one(gap_bounds(&inst))),
        Box::new(|| one(comm_bound())),
        Box::new(|| one(definition1(seed))),
        Box::new(|| one(progress(seed))),
        Box::new(|| one(phi_bound(seed))),
        Box::new(|| demo_checks(ExperimentKind::HardNedic, seed, Some(nedic_k))),
        Box::new(|| demo_checks(ExperimentKind::HardUnboundedDnc, seed, None)),
        Box::new(|| demo_checks(ExperimentKind::HardUnboundedDng, seed, None)),
        Box::new(|| one(single_node(tamper))),
    ];
    let results: Vec<Vec<Check>> = jobs.par_iter().map(|j| j()).collect::<Result<_>>()?;
    let checks: Vec<Check> = results.into_iter().flatten().collect();

    let mut summary = header(cfg);
    if let Some(t) = tamper {
        let _ = writeln!(summary, "tamper {t:?}");
    }
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut csv = format!("{VERIFY_HEADER}\n");
    for c in &checks {
        let _ = writeln!(summary, "{:<width$}  {}  {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
        let _ = writeln!(csv, "{},{},{:e},{:e}", c.name.replace(',', ";"), c.passed, c.value, c.threshold);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let _ = writeln!(summary, "{} checks, {} passed, {failed} failed", checks.len(), checks.len() - failed);
    Ok(ExperimentOutput {
        experiment: cfg.experiment,
        artifacts: vec![Artifact { name: "verify.csv".into(), contents: csv }],
        summary,
        checks,
        gating: true,
    })
}

