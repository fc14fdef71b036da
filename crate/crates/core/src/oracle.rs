//! Numeric checks of the inexact-oracle view of D-NG and D-NC: the two-sided
//! oracle inequality at the network average and the per-iteration progress
//! inequality of the inexact Nesterov method.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::objectives::{NodeObjective, ObjectiveSet};
use crate::solvers::{Method, RunTrace};
use crate::stack::{block_mean, dist_sq, dot};

/// Residuals below `-VIOLATION_TOL` count as violations.
pub const VIOLATION_TOL: f64 = 1e-8;

/// Oracle `(f_hat, g_hat)` of `f = sum_i f_i` at `ybar`, built from the local
/// iterates `y_i`, with constants `L_y = 2nL`, `delta = L ||y~||^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSample {
    pub y: Vec<f64>,
    pub ybar: Vec<f64>,
    pub f_hat: f64,
    pub g_hat: Vec<f64>,
    pub l_y: f64,
    pub delta: f64,
}

pub fn inexact_oracle_at(obj: &ObjectiveSet, y: &[f64]) -> Result<OracleSample> {
    let l = obj
        .lipschitz
        .ok_or_else(|| LabError::Precondition("oracle constants need a Lipschitz constant".into()))?;
    let (n, d) = (obj.n(), obj.d());
    if y.len() != n * d {
        return Err(LabError::Precondition(format!("stack length {} != n d = {}", y.len(), n * d)));
    }
    let ybar = block_mean(y, n, d);
    let mut f_hat = 0.0;
    let mut g_hat = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut dis = 0.0;
    for (i, f) in obj.nodes.iter().enumerate() {
        let yi = &y[i * d..(i + 1) * d];
        f.gradient_into(yi, &mut g);
        let shift: Vec<f64> = ybar.iter().zip(yi).map(|(a, b)| a - b).collect();
        f_hat += f.value(yi) + dot(&g, &shift);
        for (acc, gv) in g_hat.iter_mut().zip(&g) {
            *acc += gv;
        }
        dis += dist_sq(yi, &ybar);
    }
    Ok(OracleSample {
        y: y.to_vec(),
        ybar,
        f_hat,
        g_hat,
        l_y: 2.0 * n as f64 * l,
        delta: l * dis,
    })
}

/// Worst violations of the two oracle inequalities; both should be `<= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Definition1Check {
    /// `max f_hat + g_hat^T (x - ybar) - f(x)`.
    pub lower: f64,
    /// `max f(x) - [f_hat + g_hat^T (x - ybar) + L_y/2 ||x - ybar||^2 + delta]`.
    pub upper: f64,
}

impl Definition1Check {
    pub fn passed(&self, tol: f64) -> bool {
        self.lower <= tol && self.upper <= tol
    }
}

/// Evaluates both inequalities at `probes` uniform points of
/// `[-half_width, half_width]^d`, plus `ybar`, the stored optimum and every
/// `y_i`.
pub fn check_definition1(
    sample: &OracleSample,
    obj: &ObjectiveSet,
    probes: usize,
    half_width: f64,
    seed: u64,
) -> Definition1Check {
    let d = obj.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<Vec<f64>> = (0..probes)
        .map(|_| (0..d).map(|_| rng.gen_range(-half_width..=half_width)).collect())
        .collect();
    points.push(sample.ybar.clone());
    if let Some(xs) = obj.x_star() {
        points.push(xs.to_vec());
    }
    points.extend(sample.y.chunks(d).map(|c| c.to_vec()));

    let mut out = Definition1Check { lower: f64::NEG_INFINITY, upper: f64::NEG_INFINITY };
    for x in &points {
        let fx = obj.value(x);
        let diff: Vec<f64> = x.iter().zip(&sample.ybar).map(|(a, b)| a - b).collect();
        let linear = sample.f_hat + dot(&sample.g_hat, &diff);
        out.lower = out.lower.max(linear - fx);
        let quad = linear + 0.5 * sample.l_y * dot(&diff, &diff) + sample.delta;
        out.upper = out.upper.max(fx - quad);
    }
    out
}

/// `vbar(k) = (ybar(k) - (1 - gamma_k) xbar(k)) / gamma_k`, `gamma_k = 2/(k+2)`.
pub fn vbar(xbar: &[f64], ybar: &[f64], k: usize) -> Vec<f64> {
    let gamma = 2.0 / (k as f64 + 2.0);
    xbar.iter().zip(ybar).map(|(x, y)| (y - (1.0 - gamma) * x) / gamma).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgressEntry {
    pub k: usize,
    /// Right side minus left side of the progress inequality.
    pub residual: f64,
    /// Whether the inequality is guaranteed at this `k`.
    pub regime_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressReport {
    pub entries: Vec<ProgressEntry>,
}

impl ProgressReport {
    /// Entries in the guaranteed regime with residual below `-tol`.
    pub fn violations(&self, tol: f64) -> Vec<ProgressEntry> {
        self.entries
            .iter()
            .filter(|e| e.regime_ok && e.residual < -tol)
            .copied()
            .collect()
    }

    /// Smallest in-regime residual.
    pub fn worst(&self) -> Option<ProgressEntry> {
        self.entries
            .iter()
            .filter(|e| e.regime_ok)
            .min_by(|a, b| a.residual.total_cmp(&b.residual))
            .copied()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,residual,regime_ok\n");
        for e in &self.entries {
            let _ = writeln!(s, "{},{:.16e},{}", e.k, e.residual, e.regime_ok);
        }
        match self.worst() {
            Some(w) => {
                let _ = writeln!(s, "# worst in-regime residual {:.16e} at k={}", w.residual, w.k);
            }
            None => s.push_str("# no in-regime iterations\n"),
        }
        s
    }
}

/// Residuals of the progress inequality along a D-NG or D-NC trace:
///
/// `r_k = [(k^2-1)(f(xbar(k-1)) - f(x_ref)) + 2 L_{k-1} ||vbar(k-1) - x_ref||^2 + (k+1)^2 delta_{k-1}]
///      - [(k+1)^2 (f(xbar(k)) - f(x_ref)) + 2 L_{k-1} ||vbar(k) - x_ref||^2]`
///
/// with `L_{k-1} = n / alpha_{k-1}` and `delta_{k-1} = L ||y~(k-1)||^2`.
/// The inequality is guaranteed when `L_{k-1} >= 2nL`. Needs consecutive
/// records; `x_ref` defaults to the stored optimum.
pub fn check_lemma2_progress(trace: &RunTrace, obj: &ObjectiveSet, x_ref: Option<&[f64]>) -> Result<ProgressReport> {
    if !matches!(trace.method, Method::Dng | Method::Dnc) {
        return Err(LabError::Precondition("progress check applies to D-NG and D-NC traces".into()));
    }
    let l = obj
        .lipschitz
        .ok_or_else(|| LabError::Precondition("progress check needs a Lipschitz constant".into()))?;
    let x_ref = match x_ref {
        Some(x) => x.to_vec(),
        None => obj
            .x_star()
            .ok_or_else(|| LabError::Precondition("no reference point and no stored optimum".into()))?
            .to_vec(),
    };
    let n = obj.n() as f64;
    let f_ref = obj.value(&x_ref);
    let mut entries = Vec::new();
    for pair in trace.records.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        if cur.k != prev.k + 1 {
            return Err(LabError::Precondition("progress check needs every iterate recorded".into()));
        }
        let k = cur.k;
        let kf = k as f64;
        let alpha = trace.step.alpha_before(k);
        let lk = n / alpha;
        let delta = l * prev.dis_y * prev.dis_y;
        let v_prev = vbar(&prev.xbar, &prev.ybar, k - 1);
        let v_cur = vbar(&cur.xbar, &cur.ybar, k);
        let rhs = (kf * kf - 1.0) * (obj.value(&prev.xbar) - f_ref)
            + 2.0 * lk * dist_sq(&v_prev, &x_ref)
            + (kf + 1.0) * (kf + 1.0) * delta;
        let lhs = (kf + 1.0) * (kf + 1.0) * (obj.value(&cur.xbar) - f_ref) + 2.0 * lk * dist_sq(&v_cur, &x_ref);
        entries.push(ProgressEntry {
            k,
            residual: rhs - lhs,
            regime_ok: lk >= 2.0 * n * l * (1.0 - 1e-12),
        });
    }
    Ok(ProgressReport { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::make_hard_quadratic_pair;

    #[test]
    fn hard_quadratic_sample() {
        let obj = make_hard_quadratic_pair(1.0).unwrap();
        let s = inexact_oracle_at(&obj, &[1.0, -1.0]).unwrap();
        assert_eq!(s.f_hat, 0.0);
        assert_eq!(s.g_hat, vec![0.0]);
        assert_eq!(s.delta, 2.0);
        let c = check_definition1(&s, &obj, 0, 1.0, 0);
        assert!(c.lower <= -1.0 + 1e-15);
        assert!(c.upper <= 0.0);
    }

    #[test]
    fn vbar_examples() {
        assert_eq!(vbar(&[3.0], &[3.0], 0), vec![3.0]);
        assert_eq!(vbar(&[1.0], &[2.0], 2), vec![3.0]);
    }
}
