//! Adversarial instances and divergence demonstrations.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::schema::{DISAGREEMENT_HEADER, ENVELOPE_HEADER};
use super::{header, objective_line, push_checks, Artifact, Check, ExperimentOutput};
use crate::bounds::{hard_theta, nedic_envelope, theta_k, HardMethod};
use crate::error::Result;
use crate::net::WeightMatrix;
use crate::objectives::{
    make_cubic_pair, make_hard_nonsmooth_pair, make_hard_quadratic_pair, make_huber_pair, NodeFn, CHI_BAR,
};
use crate::solvers::{run_dnc, run_dng, run_dsg, trace_csv, DncConfig, DngConfig, DsgConfig, RunTrace};

fn in_quadratic_region(f: &NodeFn, x: &[f64]) -> bool {
    match *f {
        NodeFn::HardNonsmooth { theta, s } => theta * (x[0] + s).powi(2) + (x[1] + s).powi(2) <= CHI_BAR * CHI_BAR,
        _ => true,
    }
}

/// Whether every node block of `x` lies in its quadratic region.
fn stack_in_region(nodes: &[NodeFn], x: &[f64]) -> bool {
    nodes.iter().zip(x.chunks(2)).all(|(f, xi)| in_quadratic_region(f, xi))
}

/// Every `k <= 20`, then about 40 log-spaced values per decade.
fn report_ks(k_max: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = (1..=k_max.min(20)).collect();
    let mut t = 20.0f64;
    while (t as usize) < k_max {
        t *= 10f64.powf(1.0 / 40.0);
        let k = (t.round() as usize).min(k_max);
        if ks.last() != Some(&k) {
            ks.push(k);
        }
    }
    ks
}

/// Least-squares slope of `y` against `x`.
fn linear_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in points {
        num += (x - mx) * (y - my);
        den += (x - mx).powi(2);
    }
    num / den
}

/// Least-squares slope of `ln y` against `ln x`.
fn log_slope(points: &[(f64, f64)]) -> f64 {
    linear_slope(&points.iter().map(|(x, y)| (x.ln(), y.ln())).collect::<Vec<_>>())
}

struct TauResult {
    tau: f64,
    rows: Vec<String>,
    below: usize,
    outside: usize,
    min_margin: f64,
    slope: Option<f64>,
}

/// The subgradient baseline on the two-node nonsmooth instance, tuned
/// separately for every horizon `k`, against the lower envelope `e_k(tau)`.
pub(crate) fn hard_nedic(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let c = 1.0 / (2.0 * 2f64.sqrt());
    let w = WeightMatrix::two_node(1.0 / 8.0)?;
    let taus = if cfg.taus.is_empty() { vec![0.0, 1.0 / 3.0, 0.5, 0.75, 1.0] } else { cfg.taus.clone() };
    if let Some(t) = taus.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(super::config_err("taus", format!("{t} not in [0, 1]")));
    }
    let k_max = cfg.k_max.unwrap_or(if cfg.long { 10_000 } else { 2_000 });
    let ks = report_ks(k_max);
    let x0 = [1.0, 0.0];
    let results: Vec<TauResult> = taus
        .par_iter()
        .map(|&tau| -> Result<TauResult> {
            let mut out = TauResult { tau, rows: Vec::new(), below: 0, outside: 0, min_margin: f64::INFINITY, slope: None };
            let mut pts = Vec::new();
            let mut next_report = ks.iter().peekable();
            for k in 1..=k_max {
                let theta = theta_k(k, tau);
                let obj = make_hard_nonsmooth_pair(theta)?;
                let reported = next_report.peek() == Some(&&k);
                let mut run_cfg = DsgConfig::new(c, tau, k, w.clone());
                // Whole trajectories at reported horizons, final iterates elsewhere.
                run_cfg.keep_every = if reported { 1 } else { k };
                let tr = run_dsg(&obj, &run_cfg, &x0)?;
                let last = tr.last();
                let gap = tr.max_gap(last);
                let env = nedic_envelope(k, tau, c, c);
                out.min_margin = out.min_margin.min(gap - env);
                if gap < env - 1e-9 {
                    out.below += 1;
                }
                let inside = tr.records.iter().skip(1).all(|r| stack_in_region(&obj.nodes, &r.x));
                if !inside {
                    out.outside += 1;
                }
                if k >= 100 {
                    pts.push((k as f64, gap));
                }
                if reported {
                    next_report.next();
                    out.rows.push(format!("{tau:.6},{k},{theta:.16e},{gap:.16e},{env:.16e},{inside}"));
                }
            }
            if pts.len() >= 2 {
                out.slope = Some(log_slope(&pts));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    // Constant step 1/2 on the quadratic pair pins node 1 at 1/2.
    let quad = make_hard_quadratic_pair(1.0)?;
    let pin = run_dsg(&quad, &DsgConfig::new(0.5, 0.0, 50, WeightMatrix::two_node(0.25)?), &[0.0])?;
    let pin_dev = pin.records.iter().skip(1).map(|r| (r.x[0] - 0.5).abs()).fold(0.0, f64::max);

    let mut summary = header(cfg);
    let _ = writeln!(summary, "baseline c={c:.6} weights W12=1/8 x0=(1,0) horizons k=1..{k_max}");
    let mut csv = format!("{ENVELOPE_HEADER}\n");
    let mut checks = Vec::new();
    for r in &results {
        csv.extend(r.rows.iter().map(|l| format!("{l}\n")));
        let slope = r.slope.map(|s| format!("{s:.4}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            summary,
            "tau {:.4}: below envelope {}, left quadratic region {}, min gap - envelope {:.3e}, slope k>=100 {slope}",
            r.tau, r.below, r.outside, r.min_margin
        );
        checks.push(Check::new(
            &format!("envelope tau={:.4}", r.tau),
            r.below == 0 && r.outside == 0,
            r.min_margin,
            0.0,
            format!("{} horizons below e_k, {} outside the region", r.below, r.outside),
        ));
    }
    checks.push(Check::new(
        "constant-step pin",
        pin_dev <= 1e-15,
        pin_dev,
        1e-15,
        format!("tau=0, alpha=1/2, theta=1: max |x_1(k) - 1/2| over k<=50 = {pin_dev:.1e}"),
    ));
    push_checks(&mut summary, &checks);
    Ok(ExperimentOutput {
        experiment: cfg.experiment,
        artifacts: vec![Artifact { name: "nedic_envelope.csv".into(), contents: csv }],
        summary,
        checks,
        gating: false,
    })
}

fn disagreement_rows(trace: &RunTrace, from: usize, bound: impl Fn(usize) -> f64) -> (String, f64) {
    let mut csv = String::new();
    let mut worst = f64::INFINITY;
    for r in trace.records.iter().filter(|r| r.k >= from) {
        let lb = bound(r.k);
        worst = worst.min(r.dis_x / lb);
        let _ = writeln!(csv, "{},{},{:.16e},{lb:.16e}", trace.label, r.k, r.dis_x);
    }
    (csv, worst)
}

/// Quadratic pair scaled so D-NC's gap at outer iteration `k` is at least `M`.
pub(crate) fn hard_unbounded_dnc(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let k = cfg.k.unwrap_or(10);
    let m = cfg.m.unwrap_or(1.0);
    if k < 10 {
        return Err(super::config_err("k", "the D-NC instance needs k >= 10"));
    }
    let k_max = cfg.k_max.unwrap_or(k).max(k);
    let theta = hard_theta(k, m, HardMethod::Dnc);
    let obj = make_hard_quadratic_pair(theta)?;
    let alpha = 0.5;
    let tr = run_dnc(&obj, &DncConfig::new(alpha, k_max, WeightMatrix::two_node(1.0 / 8.0)?, 0.75), &[0.0])?
        .with_label("dnc")
        .with_seed(cfg.seed);
    let gap = tr.max_gap(tr.at(k).expect("every iterate is kept"));
    let (rows, worst) = disagreement_rows(&tr, 10, |t| alpha * theta * 2f64.sqrt() / (4.0 * (t * t) as f64));

    let mut summary = header(cfg);
    let _ = writeln!(summary, "{}", objective_line(&obj));
    let _ = writeln!(summary, "D-NC alpha={alpha} W12=1/8 x0=0 k={k} M={m} theta={theta:.6e}");
    let checks = vec![
        Check::new("gap at k >= M", gap >= m, gap, m, format!("max gap at k={k}: {gap:.6e} (M = {m})")),
        Check::new(
            "disagreement lower bound",
            worst >= 1.0,
            worst,
            1.0,
            format!("min ||x~(t)|| / (alpha theta sqrt2 / (4 t^2)) over t in [10, {k_max}]: {worst:.4}"),
        ),
    ];
    push_checks(&mut summary, &checks);
    Ok(ExperimentOutput {
        experiment: cfg.experiment,
        artifacts: vec![
            Artifact { name: "dnc.csv".into(), contents: trace_csv(&tr) },
            Artifact { name: "dnc_disagreement.csv".into(), contents: format!("{DISAGREEMENT_HEADER}\n{rows}") },
        ],
        summary,
        checks,
        gating: false,
    })
}

/// Quadratic pair scaled so D-NG's gap at iteration `k` is at least `M`.
pub(crate) fn hard_unbounded_dng(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let k = cfg.k.unwrap_or(5);
    let m = cfg.m.unwrap_or(1.0);
    if k < 5 {
        return Err(super::config_err("k", "the D-NG instance needs k >= 5"));
    }
    let k_max = cfg.k_max.unwrap_or(100).max(k);
    let theta = hard_theta(k, m, HardMethod::Dng);
    let obj = make_hard_quadratic_pair(theta)?;
    let c = 0.25e-6;
    let w = WeightMatrix::two_node((1.0 - 1e-6) / 2.0)?;
    let tr = run_dng(&obj, &DngConfig::new(c, k_max, w), &[0.0])?.with_label("dng").with_seed(cfg.seed);
    let gap = tr.max_gap(tr.at(k).expect("every iterate is kept"));
    let (rows, worst) = disagreement_rows(&tr, 5, |t| 2f64.sqrt() * c * theta / (2.0 * t as f64));

    let mut summary = header(cfg);
    let _ = writeln!(summary, "{}", objective_line(&obj));
    let _ = writeln!(summary, "D-NG c={c:e} W12=(1-1e-6)/2 x0=0 k={k} M={m} theta={theta:.6e}");
    let checks = vec![
        Check::new("gap at k >= M", gap >= m, gap, m, format!("max gap at k={k}: {gap:.6e} (M = {m})")),
        Check::new(
            "disagreement lower bound",
            worst >= 1.0,
            worst,
            1.0,
            format!("min ||x~(t)|| / (sqrt2 c theta / (2t)) over t in [5, {k_max}]: {worst:.4}"),
        ),
    ];
    push_checks(&mut summary, &checks);
    Ok(ExperimentOutput {
        experiment: cfg.experiment,
        artifacts: vec![
            Artifact { name: "dng.csv".into(), contents: trace_csv(&tr) },
            Artifact { name: "dng_disagreement.csv".into(), contents: format!("{DISAGREEMENT_HEADER}\n{rows}") },
        ],
        summary,
        checks,
        gating: false,
    })
}

/// D-NG with weights that have a negative eigenvalue: disagreement and the
/// smallest node gap keep growing.
pub(crate) fn diverge_1b(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let k_max = cfg.k_max.unwrap_or(200).max(200);
    let obj = make_huber_pair();
    let tr = run_dng(&obj, &DngConfig::new(1.0, k_max, WeightMatrix::two_node(0.9)?), &[0.0])?
        .with_label("dng")
        .with_seed(cfg.seed);
    let at = |k: usize| tr.at(k).expect("every iterate is kept");
    let (d20, d200) = (at(20).dis_x, at(200).dis_x);
    let (g20, g200) = (tr.min_gap(at(20)), tr.min_gap(at(200)));

    let mut summary = header(cfg);
    let _ = writeln!(summary, "{}", objective_line(&obj));
    let _ = writeln!(summary, "D-NG c=1 W12=9/10 (smallest eigenvalue -0.8) x0=0 k_max={k_max}");
    for k in [1, 5, 10, 20, 50, 100, 200] {
        let _ = writeln!(summary, "k {k:>4}: ||x~|| {:.6e}  min gap {:.6e}", at(k).dis_x, tr.min_gap(at(k)));
    }
    let checks = vec![
        Check::new("disagreement grows", d200 > d20, d200, d20, format!("||x~(200)|| {d200:.4e} vs ||x~(20)|| {d20:.4e}")),
        Check::new("min gap grows", g200 > g20, g200, g20, format!("min gap k=200 {g200:.4e} vs k=20 {g20:.4e}")),
    ];
    push_checks(&mut summary, &checks);
    Ok(ExperimentOutput {
        experiment: cfg.experiment,
        artifacts: vec![Artifact { name: "dng.csv".into(), contents: trace_csv(&tr) }],
        summary,
        checks,
        gating: false,
    })
}

/// The cubic pair, whose gradients are not Lipschitz: D-NG blows up, D-NC is
/// reported for comparison.
pub(crate) fn diverge_cubic(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let k_max = cfg.k_max.unwrap_or(1000);
    let obj = make_cubic_pair();
    let w = WeightMatrix::two_node(0.1)?;
    let x0 = cfg.x0.clone().unwrap_or_else(|| vec![-1.0, 1.0]);
    if x0.len() != 1 && x0.len() != 2 {
        return Err(super::config_err("x0", "expected 1 or 2 values"));
    }
    let dng = run_dng(&obj, &DngConfig::new(1.0, k_max, w.clone()), &x0)?.with_label("dng").with_seed(cfg.seed);
    let dnc = run_dnc(&obj, &DncConfig::new(0.1, k_max, w, 0.8), &x0)?.with_label("dnc").with_seed(cfg.seed);

    let mut checks = Vec::new();
    let mut summary = header(cfg);
    let _ = writeln!(summary, "{}", objective_line(&obj));
    let _ = writeln!(summary, "W11=9/10 x0={x0:?}; D-NG c=1; D-NC alpha=0.1 k_max={k_max}");
    match dng.diverged_at {
        Some(kd) => {
            // Gaps over the last decade of iterations before the guard.
            let from = (kd / 10).max(1);
            let window: Vec<(f64, f64)> = dng
                .records
                .iter()
                .filter(|r| r.k >= from && r.k < kd)
                .map(|r| (r.k as f64, dng.max_gap(r)))
                .collect();
            let gaps: Vec<f64> = window.iter().map(|p| p.1).collect();
            // Node gaps alternate near blow-up; judge the trend of ln gap in k.
            let trend = linear_slope(&window.iter().map(|&(k, g)| (k, g.ln())).collect::<Vec<_>>());
            let increasing = gaps.len() >= 2 && trend > 0.0 && gaps[gaps.len() - 1] > gaps[0];
            let shown: Vec<String> = gaps.iter().map(|g| format!("{g:.3e}")).collect();
            let _ = writeln!(summary, "D-NG guard tripped at k={kd}; max gap over k in [{from}, {kd}): {}", shown.join(" "));
            checks.push(Check::new(
                "D-NG gap increasing before blow-up",
                increasing,
                trend,
                0.0,
                format!("guard at k={kd}, slope of ln gap over {} iterations {trend:.3}", gaps.len()),
            ));
        }
        None => {
            let _ = writeln!(summary, "D-NG did not trip the guard within {k_max} iterations");
            checks.push(Check::new("D-NG gap increasing before blow-up", false, f64::NAN, f64::NAN, "no blow-up"));
        }
    }
    let (g0, gk) = (dnc.min_gap(dnc.first()), dnc.min_gap(dnc.last()));
    let _ = writeln!(
        summary,
        "D-NC diverged={} final k={} min gap {gk:.6e} (initial {g0:.6e}) ||x~|| {:.3e}",
        dnc.diverged,
        dnc.last().k,
        dnc.last().dis_x
    );
    checks.push(Check::new(
        "D-NC gap stays away from zero",
        !dnc.diverged && gk > 0.1 * g0,
        gk,
        0.1 * g0,
        format!("min gap at k={} {gk:.3e} vs 0.1 x initial {:.3e}", dnc.last().k, 0.1 * g0),
    ));
    push_checks(&mut summary, &checks);
    Ok(ExperimentOutput {
        experiment: cfg.experiment,
        artifacts: vec![
            Artifact { name: "dng.csv".into(), contents: trace_csv(&dng) },
            Artifact { name: "dnc.csv".into(), contents: trace_csv(&dnc) },
        ],
        summary,
        checks,
        gating: false,
    })
}
