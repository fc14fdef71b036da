//! Config-driven experiments: the figure reproductions, the adversarial and
//! divergence demos, the verification suite and free-form comparisons.
//!
//! Every runner is a pure function of its [`ExperimentConfig`]; outputs are
//! collected in memory as [`Artifact`]s, schema-checked and only then written.

pub mod config;
mod demos;
mod figures;
pub mod schema;
mod verify;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{ExperimentConfig, ExperimentKind, MethodKind, MethodSpec, NetworkSpec, StepValue, Tamper};
pub use schema::validate_artifact;

use crate::bounds::{BoundReport, ProblemConstants};
use crate::error::{LabError, Result};
use crate::net::{
    generate_geometric_with_retries, metropolis_weights, safeguard_weights, spectral, Graph, NetworkFile,
    WeightMatrix, GEOMETRIC_RETRIES,
};
use crate::objectives::{
    make_cubic_pair, make_fair_loss, make_hard_nonsmooth_pair, make_hard_quadratic_pair, make_huber_pair,
    make_huber_two_group, make_logistic, random_anchors, ObjectiveSet, HUBER_TWO_GROUP_N,
};
use crate::solvers::{
    first_hits, run_centralized, run_dnc, run_dng, run_dsg, trace_csv, CentralStep, DncConfig, DngConfig, DsgConfig,
    Metric, RunTrace,
};
use crate::stack::norm;

/// One output file, held in memory until validated.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// A named pass/fail line with the measured value and its threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), passed, value, threshold, detail: detail.into() }
    }

    fn line(&self) -> String {
        format!("[{}] {}: {}", if self.passed { " ok " } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub experiment: ExperimentKind,
    pub artifacts: Vec<Artifact>,
    pub summary: String,
    pub checks: Vec<Check>,
    /// Whether failed checks should fail the command (only `verify`).
    pub gating: bool,
}

impl ExperimentOutput {
    pub fn failed(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    /// Validates every artifact and `summary.txt`, then writes them to `dir`.
    /// Nothing is written if any file fails validation.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        validate_artifact("summary.txt", &self.summary)?;
        for a in &self.artifacts {
            validate_artifact(&a.name, &a.contents)?;
        }
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::with_capacity(self.artifacts.len() + 1);
        for a in &self.artifacts {
            let p = dir.join(&a.name);
            std::fs::write(&p, &a.contents)?;
            written.push(p);
        }
        let p = dir.join("summary.txt");
        std::fs::write(&p, &self.summary)?;
        written.push(p);
        Ok(written)
    }
}

/// Runs the experiment named in `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::Fig1Left => figures::fig1_left(cfg),
        ExperimentKind::Fig1Right => figures::fig1_right(cfg),
        ExperimentKind::Custom => figures::custom(cfg),
        ExperimentKind::HardNedic => demos::hard_nedic(cfg),
        ExperimentKind::HardUnboundedDnc => demos::hard_unbounded_dnc(cfg),
        ExperimentKind::HardUnboundedDng => demos::hard_unbounded_dng(cfg),
        ExperimentKind::Diverge1b => demos::diverge_1b(cfg),
        ExperimentKind::DivergeCubic => demos::diverge_cubic(cfg),
        ExperimentKind::Verify => verify::verify(cfg),
    }
}

pub(crate) fn config_err(key: &str, message: impl Into<String>) -> LabError {
    LabError::Config { key: key.to_string(), message: message.into() }
}

/// Network shared by the methods of one comparison.
#[derive(Debug, Clone)]
pub(crate) struct Network {
    pub graph: Graph,
    pub weights: WeightMatrix,
    pub mu: f64,
}

impl Network {
    pub fn from_weights(graph: Graph, weights: WeightMatrix) -> Self {
        let mu = spectral(&weights).mu;
        Self { graph, weights, mu }
    }

    pub fn describe(&self) -> String {
        format!(
            "network nodes={} edges={} density={:.4} mu={:.6}",
            self.graph.n(),
            self.graph.edge_count(),
            self.graph.relative_degree(),
            self.mu
        )
    }
}

pub(crate) fn build_network(cfg: &ExperimentConfig, n: usize, default_density: f64) -> Result<Network> {
    if n == 1 {
        return Ok(Network::from_weights(Graph::new(1, [])?, WeightMatrix::identity(1)));
    }
    let (graph, weights) = match &cfg.network {
        NetworkSpec::Geometric => {
            let density = cfg.density.unwrap_or(default_density);
            let g = generate_geometric_with_retries(n, density, cfg.seed, cfg.retries.unwrap_or(GEOMETRIC_RETRIES))?;
            let w = metropolis_weights(&g);
            (g, w)
        }
        NetworkSpec::Complete => {
            let g = Graph::complete(n);
            let w = metropolis_weights(&g);
            (g, w)
        }
        NetworkSpec::Path => {
            let g = Graph::path(n);
            let w = metropolis_weights(&g);
            (g, w)
        }
        NetworkSpec::File(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| config_err("network", format!("{}: {e}", p.display())))?;
            let f = NetworkFile::parse(&text)?;
            if f.graph.n() != n {
                return Err(config_err("network", format!("file has {} nodes, objective has {n}", f.graph.n())));
            }
            (f.graph, f.weights)
        }
    };
    Ok(Network::from_weights(graph, weights))
}

/// Builds the objective named by `cfg.objective` (or `default`).
pub(crate) fn build_objective(cfg: &ExperimentConfig, default: &str, default_n: usize) -> Result<ObjectiveSet> {
    let name = cfg.objective.as_deref().unwrap_or(default);
    let fixed_n = |n_fixed: usize| -> Result<()> {
        match cfg.n {
            Some(n) if n != n_fixed => Err(config_err("n", format!("objective `{name}` has exactly {n_fixed} nodes"))),
            _ => Ok(()),
        }
    };
    let theta = |dflt: f64| cfg.theta.unwrap_or(dflt);
    let obj = match name {
        "logistic" => make_logistic(cfg.n.unwrap_or(default_n), cfg.seed)?,
        "huber_two_group" => {
            fixed_n(HUBER_TWO_GROUP_N)?;
            make_huber_two_group(theta(10.0), cfg.seed)?
        }
        "huber_pair" => {
            fixed_n(2)?;
            make_huber_pair()
        }
        "hard_nonsmooth" => {
            fixed_n(2)?;
            make_hard_nonsmooth_pair(theta(1.0))?
        }
        "hard_quadratic" => {
            fixed_n(2)?;
            make_hard_quadratic_pair(theta(1.0))?
        }
        "cubic_pair" => {
            fixed_n(2)?;
            make_cubic_pair()
        }
        "fair" => {
            let n = cfg.n.unwrap_or(default_n);
            make_fair_loss(n, cfg.b0.unwrap_or(1.0), &random_anchors(n, 3.0, cfg.seed))?
        }
        other => {
            return Err(config_err(
                "objective",
                format!(
                    "unknown objective `{other}` (expected logistic, huber_two_group, huber_pair, hard_nonsmooth, hard_quadratic, cubic_pair or fair)"
                ),
            ))
        }
    };
    Ok(obj)
}

/// Common start (`d` values) or one start per node (`n d` values); zero by
/// default.
pub(crate) fn initial_point(cfg: &ExperimentConfig, obj: &ObjectiveSet) -> Result<Vec<f64>> {
    let (n, d) = (obj.n(), obj.d());
    match &cfg.x0 {
        None => Ok(vec![0.0; d]),
        Some(v) if v.len() == d || v.len() == n * d => Ok(v.clone()),
        Some(v) => Err(config_err("x0", format!("expected {d} or {} values, got {}", n * d, v.len()))),
    }
}

/// Result of one method of a comparison.
#[derive(Debug, Clone)]
pub(crate) struct MethodRun {
    pub spec: MethodSpec,
    pub trace: RunTrace,
    pub bounds: Option<BoundReport>,
    /// Resolved step parameter, for the summary.
    pub step: String,
}

/// Runs every method on the same objective and network, in parallel, keeping
/// the configured order.
pub(crate) fn run_methods(
    obj: &ObjectiveSet,
    net: &Network,
    methods: &[MethodSpec],
    x0: &[f64],
    seed: u64,
    default_k_max: usize,
) -> Result<Vec<MethodRun>> {
    methods
        .par_iter()
        .map(|spec| run_method(obj, net, spec, x0, seed, default_k_max))
        .collect()
}

fn run_method(
    obj: &ObjectiveSet,
    net: &Network,
    spec: &MethodSpec,
    x0: &[f64],
    seed: u64,
    default_k_max: usize,
) -> Result<MethodRun> {
    let key = |k: &str| format!("method.{}.{k}", spec.label);
    let resolve = |v: &StepValue, k: &str| v.resolve(obj.lipschitz).map_err(|m| config_err(&key(k), m));
    let k_max = spec.k_max.unwrap_or(default_k_max);
    let (weights, mu, eta) = match spec.eta {
        Some(eta) if obj.n() > 1 => {
            let w = safeguard_weights(&net.weights, eta)?;
            let mu = spectral(&w).mu;
            (w, mu, Some(eta))
        }
        _ => (net.weights.clone(), net.mu, None),
    };
    let constants = |eta: f64| -> Option<ProblemConstants> {
        let (l, g, xs) = (obj.lipschitz?, obj.grad_bound?, obj.x_star()?);
        let r = norm(&x0.iter().zip(xs).map(|(a, b)| a - b).collect::<Vec<_>>());
        Some(ProblemConstants { l, g, r, mu, eta })
    };
    let (trace, bounds, step) = match spec.kind {
        MethodKind::Dng => {
            let c = resolve(spec.c.as_ref().expect("validated"), "c")?;
            let mut cfg = DngConfig::new(c, k_max, weights);
            cfg.momentum = spec.momentum;
            cfg.keep_every = spec.keep_every;
            let tr = run_dng(obj, &cfg, x0)?;
            // The bounds need W >= eta I; use the safeguard level, else the spectrum.
            let eta = eta.unwrap_or_else(|| spectral(&cfg.weight).lambda_min);
            let bounds = match constants(eta) {
                Some(pc) if eta > 0.0 && obj.n() > 1 && mu < 1.0 => Some(BoundReport::dng(&tr, c, pc)?),
                _ => None,
            };
            (tr, bounds, format!("c={c:.6e}"))
        }
        MethodKind::Dnc => {
            let alpha = resolve(spec.alpha.as_ref().expect("validated"), "alpha")?;
            let mut cfg = DncConfig::new(alpha, k_max, weights, mu);
            cfg.momentum = spec.momentum;
            cfg.keep_every = spec.keep_every;
            let tr = run_dnc(obj, &cfg, x0)?;
            let bounds = match constants(1.0) {
                Some(pc) if mu < 1.0 => Some(BoundReport::dnc(&tr, alpha, pc)?),
                _ => None,
            };
            (tr, bounds, format!("alpha={alpha:.6e}"))
        }
        MethodKind::Dsg => {
            let c = resolve(spec.c.as_ref().expect("validated"), "c")?;
            let tau = spec.tau.expect("validated");
            let mut cfg = DsgConfig::new(c, tau, k_max, weights);
            cfg.keep_every = spec.keep_every;
            (run_dsg(obj, &cfg, x0)?, None, format!("c={c:.6e} tau={tau}"))
        }
        MethodKind::Centralized => {
            let step = match (&spec.alpha, &spec.c) {
                (Some(a), _) => CentralStep::Constant(resolve(a, "alpha")?),
                (None, Some(c)) => CentralStep::Diminishing(resolve(c, "c")?),
                (None, None) => unreachable!("validated"),
            };
            let desc = format!("{step:?}");
            (run_centralized(obj, step, k_max, x0)?, None, desc)
        }
    };
    Ok(MethodRun { spec: spec.clone(), trace: trace.with_label(&spec.label).with_seed(seed), bounds, step })
}

/// Trace (and bounds) CSVs for a set of runs, with an optional file prefix.
pub(crate) fn run_artifacts(runs: &[MethodRun], prefix: &str) -> Vec<Artifact> {
    let mut out = Vec::new();
    for r in runs {
        out.push(Artifact { name: format!("{prefix}{}.csv", r.spec.label), contents: trace_csv(&r.trace) });
        if let Some(b) = &r.bounds {
            out.push(Artifact { name: format!("{prefix}{}_bounds.csv", r.spec.label), contents: b.to_csv() });
        }
    }
    out
}

/// First total-communication count at which `avg_rel_err <= eps`.
pub(crate) fn hit_total(trace: &RunTrace, eps: f64) -> Option<u64> {
    first_hits(trace, &[eps], Metric::AvgRelErr)[0].total_comms
}

/// Summary block for a set of runs plus a first-hits CSV.
pub(crate) fn describe_runs(runs: &[MethodRun], targets: &[f64], summary: &mut String) -> String {
    let mut csv = format!("{}\n", schema::FIRST_HITS_HEADER);
    for r in runs {
        let last = r.trace.last();
        let _ = writeln!(
            summary,
            "method {} kind={} {} eta={} k_max={} diverged={} final_k={} final_avg_rel_err={:.6e} final_max_gap={:.6e}",
            r.spec.label,
            r.trace.method.tag(),
            r.step,
            r.spec.eta.map(|e| e.to_string()).unwrap_or_else(|| "-".into()),
            r.trace.k_max,
            r.trace.diverged,
            last.k,
            r.trace.avg_rel_err(last),
            r.trace.max_gap(last),
        );
    }
    let _ = writeln!(summary, "first hits of avg_rel_err <= eps (total communications; '-' = not reached)");
    let mut head = format!("{:>8}", "eps");
    for r in runs {
        let _ = write!(head, " {:>16}", r.spec.label);
    }
    let _ = writeln!(summary, "{head}");
    for &eps in targets {
        let mut row = format!("{eps:>8.0e}");
        for r in runs {
            let hit = first_hits(&r.trace, &[eps], Metric::AvgRelErr)[0];
            let cell = hit.total_comms.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
            let _ = write!(row, " {cell:>16}");
            let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(
                csv,
                "{},{eps:e},{},{},{}",
                r.spec.label,
                opt(hit.k.map(|k| k as u64)),
                opt(hit.comms_per_node),
                opt(hit.total_comms)
            );
        }
        let _ = writeln!(summary, "{row}");
    }
    csv
}

pub(crate) fn objective_line(obj: &ObjectiveSet) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into());
    format!(
        "objective {} n={} d={} L={} G={} f*={}",
        obj.family.name(),
        obj.n(),
        obj.d(),
        opt(obj.lipschitz),
        opt(obj.grad_bound),
        opt(obj.f_star())
    )
}

pub(crate) fn push_checks(summary: &mut String, checks: &[Check]) {
    if checks.is_empty() {
        return;
    }
    let _ = writeln!(summary, "checks");
    for c in checks {
        let _ = writeln!(summary, "  {}", c.line());
    }
}

pub(crate) fn header(cfg: &ExperimentConfig) -> String {
    format!("experiment {}\nseed {}\n", cfg.experiment.name(), cfg.seed)
}
