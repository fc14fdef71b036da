use super::{
    alpha_dng, alpha_dsg, tau_x, tau_y, CentralStep, DncConfig, DngConfig, DsgConfig, IterRecord,
    Method, Momentum, RunTrace, StepRule,
};
use crate::error::{invalid, LabError, Result};
use crate::net::{spectral, WeightMatrix};
use crate::objectives::ObjectiveSet;
use crate::stack::{block_mean, mix_into, mix_repeat, norm, uniform_stack};

/// State norm beyond which a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e150;

fn initial_stack(obj: &ObjectiveSet, x0: &[f64]) -> Result<Vec<f64>> {
    let (n, d) = (obj.n(), obj.d());
    if x0.len() == d {
        Ok(uniform_stack(x0, n))
    } else if x0.len() == n * d {
        Ok(x0.to_vec())
    } else {
        Err(invalid("x0", format!("expected length {d} or {}, got {}", n * d, x0.len())))
    }
}

fn check_weight(obj: &ObjectiveSet, w: &WeightMatrix) -> Result<()> {
    if w.n() != obj.n() {
        return Err(LabError::Precondition(format!(
            "weight matrix is {0}x{0} but the objective has {1} nodes",
            w.n(),
            obj.n()
        )));
    }
    Ok(())
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid(name, format!("{v} must be positive")));
    }
    Ok(())
}

fn blown_up(v: &[f64]) -> bool {
    let s = norm(v);
    !s.is_finite() || s > DIVERGENCE_LIMIT
}

fn regime(obj: &ObjectiveSet, step: f64) -> Option<bool> {
    obj.lipschitz.map(|l| step <= 1.0 / (2.0 * l))
}

fn make_record(obj: &ObjectiveSet, k: usize, comms: u64, x: &[f64], y: &[f64]) -> IterRecord {
    let d = obj.d();
    let n = x.len() / d;
    let xbar = block_mean(x, n, d);
    let ybar = block_mean(y, n, d);
    let dis = |s: &[f64], m: &[f64]| {
        let mut acc = 0.0;
        for i in 0..n {
            for l in 0..d {
                let v = s[i * d + l] - m[l];
                acc += v * v;
            }
        }
        acc.sqrt()
    };
    IterRecord {
        k,
        comms_per_node: comms,
        dis_x: dis(x, &xbar),
        dis_y: dis(y, &ybar),
        node_values: (0..n).map(|i| obj.value(&x[i * d..(i + 1) * d])).collect(),
        x: x.to_vec(),
        y: y.to_vec(),
        xbar,
        ybar,
    }
}

struct Recorder<'a> {
    obj: &'a ObjectiveSet,
    keep_every: usize,
    k_max: usize,
    records: Vec<IterRecord>,
}

impl<'a> Recorder<'a> {
    fn new(obj: &'a ObjectiveSet, keep_every: usize, k_max: usize) -> Self {
        Self { obj, keep_every: keep_every.max(1), k_max, records: Vec::new() }
    }

    fn push(&mut self, k: usize, comms: u64, x: &[f64], y: &[f64]) {
        if k == 0 || k == self.k_max || k.is_multiple_of(self.keep_every) {
            self.records.push(make_record(self.obj, k, comms, x, y));
        }
    }

    /// Keeps the last finite state when a run stops early.
    fn push_final(&mut self, k: usize, comms: u64, x: &[f64], y: &[f64]) {
        if self.records.last().is_none_or(|r| r.k != k) {
            self.records.push(make_record(self.obj, k, comms, x, y));
        }
    }
}

struct Outcome {
    records: Vec<IterRecord>,
    diverged_at: Option<usize>,
}

#[allow(clippy::too_many_arguments)]
fn trace(
    obj: &ObjectiveSet,
    method: Method,
    step: StepRule,
    k_max: usize,
    n: usize,
    analyzed_regime: Option<bool>,
    out: Outcome,
) -> RunTrace {
    RunTrace {
        method,
        label: method.tag().to_string(),
        seed: 0,
        step,
        k_max,
        objective: obj.family.clone(),
        n,
        d: obj.d(),
        f_star: obj.f_star(),
        lipschitz: obj.lipschitz,
        analyzed_regime,
        records: out.records,
        diverged: out.diverged_at.is_some(),
        diverged_at: out.diverged_at,
    }
}

/// Nesterov-type iteration shared by D-NG and centralized Nesterov:
/// `x(k) = mix(y(k-1)) - alpha_{k-1} grad(y(k-1))`,
/// `y(k) = x(k) + beta_{k-1} (x(k) - x(k-1))`.
fn nesterov_loop(
    obj: &ObjectiveSet,
    x0: Vec<f64>,
    k_max: usize,
    keep_every: usize,
    mut mix: impl FnMut(&[f64], &mut [f64]),
    mut grad: impl FnMut(&[f64], &mut [f64]),
    alpha: impl Fn(usize) -> f64,
    momentum: Momentum,
) -> Outcome {
    let len = x0.len();
    let mut rec = Recorder::new(obj, keep_every, k_max);
    let mut x_prev = x0.clone();
    let mut y = x0;
    let mut x = vec![0.0; len];
    let mut y_new = vec![0.0; len];
    let mut g = vec![0.0; len];
    rec.push(0, 0, &x_prev, &y);
    for k in 1..=k_max {
        let a = alpha(k);
        grad(&y, &mut g);
        mix(&y, &mut x);
        for (xv, gv) in x.iter_mut().zip(&g) {
            *xv -= a * gv;
        }
        let b = momentum.at(k);
        for ((yv, xv), pv) in y_new.iter_mut().zip(&x).zip(&x_prev) {
            *yv = xv + b * (xv - pv);
        }
        if blown_up(&x) || blown_up(&y_new) {
            rec.push_final(k - 1, (k - 1) as u64, &x_prev, &y);
            return Outcome { records: rec.records, diverged_at: Some(k) };
        }
        std::mem::swap(&mut x_prev, &mut x);
        std::mem::swap(&mut y, &mut y_new);
        rec.push(k, k as u64, &x_prev, &y);
    }
    Outcome { records: rec.records, diverged_at: None }
}

/// Distributed Nesterov gradient with `alpha_k = c/(k+1)`, one broadcast of
/// `y` per iteration. `x0` is either a common start (length `d`) or a full
/// stack (length `n d`).
pub fn run_dng(obj: &ObjectiveSet, cfg: &DngConfig, x0: &[f64]) -> Result<RunTrace> {
    check_positive("c", cfg.c)?;
    check_weight(obj, &cfg.weight)?;
    let d = obj.d();
    let start = initial_stack(obj, x0)?;
    let w = &cfg.weight;
    let c = cfg.c;
    let out = nesterov_loop(
        obj,
        start,
        cfg.k_max,
        cfg.keep_every,
        |y, out| mix_into(w, y, d, out),
        |y, g| obj.stacked_gradient_into(y, g),
        |k| alpha_dng(c, k - 1),
        cfg.momentum,
    );
    Ok(trace(
        obj,
        Method::Dng,
        StepRule::Dng { c, momentum: cfg.momentum },
        cfg.k_max,
        obj.n(),
        regime(obj, c),
        out,
    ))
}

/// Centralized Nesterov on `f = sum_i f_i` with the exact gradient. The trace
/// is a single-node stack.
pub fn run_centralized(obj: &ObjectiveSet, step: CentralStep, k_max: usize, x0: &[f64]) -> Result<RunTrace> {
    let d = obj.d();
    if x0.len() != d {
        return Err(invalid("x0", format!("expected length {d}, got {}", x0.len())));
    }
    let a = match step {
        CentralStep::Constant(a) | CentralStep::Diminishing(a) => a,
    };
    check_positive("alpha", a)?;
    let mut scratch = vec![0.0; d];
    let out = nesterov_loop(
        obj,
        x0.to_vec(),
        k_max,
        1,
        |y, out| {
            for (o, v) in out.iter_mut().zip(y) {
                *o = 0.0;
                *o += 1.0 * v;
            }
        },
        |y, g| obj.gradient_into(y, g, &mut scratch),
        |k| match step {
            CentralStep::Constant(a) => a,
            CentralStep::Diminishing(c) => alpha_dng(c, k - 1),
        },
        Momentum::Nesterov,
    );
    let in_regime = obj.lipschitz.map(|l| a <= 1.0 / (obj.n() as f64 * l));
    Ok(trace(obj, Method::Centralized, StepRule::Centralized(step), k_max, 1, in_regime, out))
}

/// D-NC: gradient step, `tau_x(k)` consensus rounds, momentum step,
/// `tau_y(k)` rounds. Rounds are repeated multiplications by `W`.
pub fn run_dnc(obj: &ObjectiveSet, cfg: &DncConfig, x0: &[f64]) -> Result<RunTrace> {
    check_positive("alpha", cfg.alpha)?;
    check_weight(obj, &cfg.weight)?;
    if !(0.0..1.0).contains(&cfg.mu) {
        return Err(invalid("mu", format!("{} not in [0, 1)", cfg.mu)));
    }
    let actual = spectral(&cfg.weight).mu;
    if (actual - cfg.mu).abs() > 1e-10 {
        return Err(LabError::Precondition(format!(
            "configured mu = {} but the weight matrix has mu = {actual}",
            cfg.mu
        )));
    }
    let d = obj.d();
    let w = &cfg.weight;
    let mut rec = Recorder::new(obj, cfg.keep_every, cfg.k_max);
    let mut x_prev = initial_stack(obj, x0)?;
    let mut y = x_prev.clone();
    let mut x = vec![0.0; x_prev.len()];
    let mut y_new = vec![0.0; x_prev.len()];
    let mut g = vec![0.0; x_prev.len()];
    let mut scratch = Vec::new();
    let mut comms = 0u64;
    let mut diverged_at = None;
    rec.push(0, 0, &x_prev, &y);
    for k in 1..=cfg.k_max {
        let (tx, ty) = (tau_x(k, cfg.mu)?, tau_y(k, cfg.mu)?);
        obj.stacked_gradient_into(&y, &mut g);
        for ((xv, yv), gv) in x.iter_mut().zip(&y).zip(&g) {
            *xv = yv - cfg.alpha * gv;
        }
        mix_repeat(w, &mut x, d, tx, &mut scratch);
        let b = cfg.momentum.at(k);
        for ((yv, xv), pv) in y_new.iter_mut().zip(&x).zip(&x_prev) {
            *yv = xv + b * (xv - pv);
        }
        mix_repeat(w, &mut y_new, d, ty, &mut scratch);
        if blown_up(&x) || blown_up(&y_new) {
            rec.push_final(k - 1, comms, &x_prev, &y);
            diverged_at = Some(k);
            break;
        }
        comms += (tx + ty) as u64;
        std::mem::swap(&mut x_prev, &mut x);
        std::mem::swap(&mut y, &mut y_new);
        rec.push(k, comms, &x_prev, &y);
    }
    let out = Outcome { records: rec.records, diverged_at };
    Ok(trace(
        obj,
        Method::Dnc,
        StepRule::Dnc { alpha: cfg.alpha, mu: cfg.mu, momentum: cfg.momentum },
        cfg.k_max,
        obj.n(),
        regime(obj, cfg.alpha),
        out,
    ))
}

/// Distributed (sub)gradient baseline:
/// `x(k) = W x(k-1) - alpha_{k-1} grad F(x(k-1))`, `alpha_{k-1} = c / k^tau`.
pub fn run_dsg(obj: &ObjectiveSet, cfg: &DsgConfig, x0: &[f64]) -> Result<RunTrace> {
    check_positive("c", cfg.c)?;
    if !(cfg.tau >= 0.0 && cfg.tau.is_finite()) {
        return Err(invalid("tau", format!("{} must be nonnegative", cfg.tau)));
    }
    check_weight(obj, &cfg.weight)?;
    let d = obj.d();
    let w = &cfg.weight;
    let mut rec = Recorder::new(obj, cfg.keep_every, cfg.k_max);
    let mut x_prev = initial_stack(obj, x0)?;
    let mut x = vec![0.0; x_prev.len()];
    let mut g = vec![0.0; x_prev.len()];
    let mut diverged_at = None;
    rec.push(0, 0, &x_prev, &x_prev);
    for k in 1..=cfg.k_max {
        let a = alpha_dsg(cfg.c, cfg.tau, k - 1);
        obj.stacked_gradient_into(&x_prev, &mut g);
        mix_into(w, &x_prev, d, &mut x);
        for (xv, gv) in x.iter_mut().zip(&g) {
            *xv -= a * gv;
        }
        if blown_up(&x) {
            rec.push_final(k - 1, (k - 1) as u64, &x_prev, &x_prev);
            diverged_at = Some(k);
            break;
        }
        std::mem::swap(&mut x_prev, &mut x);
        rec.push(k, k as u64, &x_prev, &x_prev);
    }
    let out = Outcome { records: rec.records, diverged_at };
    Ok(trace(
        obj,
        Method::Dsg,
        StepRule::Dsg { c: cfg.c, tau: cfg.tau },
        cfg.k_max,
        obj.n(),
        regime(obj, cfg.c),
        out,
    ))
}
