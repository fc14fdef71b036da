//! Closed-form constants and convergence bounds, the momentum-consensus
//! transition matrices `Phi(k, t)`, and the lower envelopes of the
//! adversarial instances.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::net::WeightMatrix;
use crate::solvers::{beta, RunTrace};

const B_GRID_STEP: f64 = 1e-3;

fn check_unit(name: &'static str, v: f64) -> Result<()> {
    if !(0.0..1.0).contains(&v) {
        return Err(invalid(name, format!("{v} not in [0, 1)")));
    }
    Ok(())
}

fn b_objective(z: f64, log_r: f64) -> f64 {
    z * (z * log_r).exp() * z.ln_1p()
}

/// `B(r) = sup_{z >= 1/2} z r^z log(1 + z)`, by a dense grid on
/// `[1/2, max(10, 20/(-log r))]` refined with golden-section search.
/// `B(0) = 0`.
pub fn big_b(r: f64) -> Result<f64> {
    check_unit("r", r)?;
    if r == 0.0 {
        return Ok(0.0);
    }
    let log_r = r.ln();
    let z_max = 10f64.max(20.0 / -log_r);
    let steps = ((z_max - 0.5) / B_GRID_STEP).ceil() as usize;
    let (mut best_z, mut best) = (0.5, b_objective(0.5, log_r));
    for i in 1..=steps {
        let z = 0.5 + i as f64 * B_GRID_STEP;
        let v = b_objective(z, log_r);
        if v > best {
            best = v;
            best_z = z;
        }
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = ((best_z - B_GRID_STEP).max(0.5), best_z + B_GRID_STEP);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (b_objective(c, log_r), b_objective(d, log_r));
    for _ in 0..100 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = b_objective(c, log_r);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = b_objective(d, log_r);
        }
    }
    Ok(best.max(fc).max(fd))
}

/// `C_cons = 8/sqrt(eta (1 - mu)) * (2 B(sqrt(mu)) + 7/(1 - mu))`.
pub fn c_cons(mu: f64, eta: f64) -> Result<f64> {
    check_unit("mu", mu)?;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(invalid("eta", format!("{eta} not in (0, 1]")));
    }
    let gap = 1.0 - mu;
    Ok(8.0 / (eta * gap).sqrt() * (2.0 * big_b(mu.sqrt())? + 7.0 / gap))
}

/// D-NG disagreement bounds `(||x~(k)||, ||y~(k)||)`.
pub fn dng_consensus_bound(k: usize, n: usize, c: f64, g: f64, c_cons: f64) -> (f64, f64) {
    let bx = (n as f64).sqrt() * c * g * c_cons / k as f64;
    (bx, 4.0 * bx)
}

/// `sum_{t=1}^k (t+2)^2 / ((t+1) t^2)`.
pub fn dng_rate_sum(k: usize) -> f64 {
    (1..=k)
        .map(|t| {
            let t = t as f64;
            (t + 2.0) * (t + 2.0) / ((t + 1.0) * t * t)
        })
        .sum()
}

/// Constant `2R^2/c + 16 c^2 L C_cons^2 G^2 + c G^2 C_cons` of the D-NG rate.
pub fn dng_gap_constant(c: f64, l: f64, g: f64, r: f64, c_cons: f64) -> f64 {
    2.0 * r * r / c + 16.0 * c * c * l * c_cons * c_cons * g * g + c * g * g * c_cons
}

/// Bound on `(f(x_i(k)) - f*)/n` for D-NG; needs `c <= 1/(2L)`.
pub fn dng_gap_bound(k: usize, c: f64, l: f64, g: f64, r: f64, c_cons: f64) -> Result<f64> {
    if c > 1.0 / (2.0 * l) {
        return Err(LabError::Precondition(format!(
            "gap bound needs c <= 1/(2L) = {}, got c = {c}",
            1.0 / (2.0 * l)
        )));
    }
    Ok(dng_gap_constant(c, l, g, r, c_cons) * dng_rate_sum(k) / k as f64)
}

/// Constant for D-NG with `c > 1/(2L)` (zero start), valid for `k > 2cL`
/// with the shifted sum `sum_{t=2}^k (t+2)^2/(t (t-1)^2)`. Grows like
/// `9^{2cL}`; a diagnostic only.
pub fn dng_gap_constant_large_c(c: f64, l: f64, g: f64, r: f64, c_cons: f64) -> f64 {
    let kp = 2.0 * c * l;
    let geo = (3f64.powf(kp) - 1.0) / 2.0;
    let m2 = geo * geo * 4.0 * c * c * g * g;
    kp * l * (m2 + r * r)
        + 2.0 / c * (2.0 * (2.0 * kp + 1.0).powi(2) * m2 + 2.0 * r * r)
        + 16.0 * c * c * l * c_cons * c_cons * g * g
        + c * c_cons * g * g
}

/// D-NC disagreement bound `2 alpha sqrt(n) G / k^2`.
pub fn dnc_consensus_bound(k: usize, n: usize, alpha: f64, g: f64) -> f64 {
    2.0 * alpha * (n as f64).sqrt() * g / (k as f64 * k as f64)
}

/// Bound on `(f(x_i(k)) - f*)/n` for D-NC; needs `alpha <= 1/(2L)`.
pub fn dnc_gap_bound(k: usize, alpha: f64, l: f64, g: f64, r: f64) -> Result<f64> {
    if alpha > 1.0 / (2.0 * l) {
        return Err(LabError::Precondition(format!(
            "gap bound needs alpha <= 1/(2L) = {}, got alpha = {alpha}",
            1.0 / (2.0 * l)
        )));
    }
    let kf = k as f64;
    Ok((2.0 * r * r / alpha + 11.0 * alpha * alpha * l * g * g + alpha * g * g) / (kf * kf))
}

/// Upper bound on `sum_{t<=k} (tau_x(t) + tau_y(t))`; `2k` when `mu = 0`.
pub fn dnc_comm_bound(k: usize, mu: f64) -> Result<f64> {
    check_unit("mu", mu)?;
    let kf = k as f64;
    if mu == 0.0 {
        return Ok(2.0 * kf);
    }
    Ok(2.0 / -mu.ln() * (kf * 3f64.ln() + 2.0 * (kf + 1.0) * (kf + 1.0).ln()))
}

/// `Phi(k, t) = M(k-2) M(k-3) ... M(t-1)` with
/// `M(j) = [[(1+beta_j) W~, -beta_j W~], [I, 0]]`, `W~ = W - J`;
/// `Phi(k, k) = I`. Built by repeated left multiplication.
pub fn phi_matrix(w: &WeightMatrix, k: usize, t: usize) -> Result<DMatrix<f64>> {
    if k < t {
        return Err(invalid("k", format!("need k >= t, got k = {k}, t = {t}")));
    }
    let n = w.n();
    let wt = w.centered();
    let mut phi = DMatrix::<f64>::identity(2 * n, 2 * n);
    for j in (t as i64 - 1)..=(k as i64 - 2) {
        let b = beta(j);
        let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&(&wt * (1.0 + b)));
        m.view_mut((0, n), (n, n)).copy_from(&(&wt * -b));
        m.view_mut((n, 0), (n, n)).fill_with_identity();
        phi = m * phi;
    }
    Ok(phi)
}

/// `8 / sqrt(eta (1 - mu)) * sqrt(mu)^(k - t)`.
pub fn phi_norm_bound(mu: f64, eta: f64, k_minus_t: usize) -> f64 {
    8.0 / (eta * (1.0 - mu)).sqrt() * mu.sqrt().powi(k_minus_t as i32)
}

/// `s_k(tau) = sum_{t=0}^{k-1} (t+1)^(-tau)`.
pub fn s_k(k: usize, tau: f64) -> f64 {
    (1..=k).map(|t| (t as f64).powf(-tau)).sum()
}

/// `theta_k = 1 / s_k(tau)`.
pub fn theta_k(k: usize, tau: f64) -> f64 {
    1.0 / s_k(k, tau)
}

/// `e_k(tau) = (1 - c_max)^2 / (2 s_k) + c_min^2 / (2 k^(2 tau))`, the lower
/// envelope on the baseline's worst-case gap.
pub fn nedic_envelope(k: usize, tau: f64, c_min: f64, c_max: f64) -> f64 {
    let kf = k as f64;
    (1.0 - c_max).powi(2) / (2.0 * s_k(k, tau)) + c_min * c_min / (2.0 * kf.powf(2.0 * tau))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HardMethod {
    Dnc,
    Dng,
}

/// Scale of the unbounded-gradient instance that forces a gap of at least
/// `m` at outer iteration `k`.
pub fn hard_theta(k: usize, m: f64, method: HardMethod) -> f64 {
    let kf = k as f64;
    match method {
        HardMethod::Dnc => 8.0 * m.sqrt() * kf * kf,
        HardMethod::Dng => 8e6 * kf * m.sqrt(),
    }
}

/// Scalar constants behind a [`BoundReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c_cons: Option<f64>,
    pub gap_constant: Option<f64>,
    pub b_sqrt_mu: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub k: usize,
    pub consensus: f64,
    /// Absent when the step is outside the analyzed regime.
    pub gap: Option<f64>,
    pub comms: f64,
}

/// Theoretical curves aligned with the records of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub constants: BoundConstants,
    pub rows: Vec<BoundRow>,
}

/// Problem constants needed to evaluate the bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    pub l: f64,
    pub g: f64,
    /// `||xbar(0) - x*||`.
    pub r: f64,
    pub mu: f64,
    /// Smallest eigenvalue bound of the (safeguarded) weights; D-NG only.
    pub eta: f64,
}

pub const BOUNDS_HEADER: &str = "k,bound_consensus,bound_gap,bound_comms";

impl BoundReport {
    /// D-NG curves for step constant `c`.
    pub fn dng(trace: &RunTrace, c: f64, pc: ProblemConstants) -> Result<Self> {
        let cc = c_cons(pc.mu, pc.eta)?;
        let in_regime = c <= 1.0 / (2.0 * pc.l);
        let rows = trace
            .records
            .iter()
            .filter(|r| r.k >= 1)
            .map(|r| BoundRow {
                k: r.k,
                consensus: dng_consensus_bound(r.k, trace.n, c, pc.g, cc).0,
                gap: in_regime.then(|| dng_gap_bound(r.k, c, pc.l, pc.g, pc.r, cc).ok()).flatten(),
                comms: r.k as f64,
            })
            .collect();
        Ok(Self {
            constants: BoundConstants {
                c_cons: Some(cc),
                gap_constant: in_regime.then(|| dng_gap_constant(c, pc.l, pc.g, pc.r, cc)),
                b_sqrt_mu: Some(big_b(pc.mu.sqrt())?),
            },
            rows,
        })
    }

    /// D-NC curves for constant step `alpha`.
    pub fn dnc(trace: &RunTrace, alpha: f64, pc: ProblemConstants) -> Result<Self> {
        let rows = trace
            .records
            .iter()
            .filter(|r| r.k >= 1)
            .map(|r| {
                Ok(BoundRow {
                    k: r.k,
                    consensus: dnc_consensus_bound(r.k, trace.n, alpha, pc.g),
                    gap: dnc_gap_bound(r.k, alpha, pc.l, pc.g, pc.r).ok(),
                    comms: dnc_comm_bound(r.k, pc.mu)?,
                })
            })
            .collect::<Result<_>>()?;
        let in_regime = alpha <= 1.0 / (2.0 * pc.l);
        Ok(Self {
            constants: BoundConstants {
                c_cons: None,
                gap_constant: in_regime.then(|| {
                    2.0 * pc.r * pc.r / alpha + 11.0 * alpha * alpha * pc.l * pc.g * pc.g + alpha * pc.g * pc.g
                }),
                b_sqrt_mu: None,
            },
            rows,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{BOUNDS_HEADER}");
        for r in &self.rows {
            let gap = r.gap.map(|v| format!("{v:.16e}")).unwrap_or_default();
            let _ = writeln!(s, "{},{:.16e},{},{:.16e}", r.k, r.consensus, gap, r.comms);
        }
        s
    }
}

/// Checks a bounds CSV: header, four columns, increasing `k`, positive finite
/// values (the gap column may be empty).
pub fn validate_bounds_csv(text: &str) -> Result<usize> {
    let mut lines = text.lines();
    if lines.next() != Some(BOUNDS_HEADER) {
        return Err(LabError::Schema("bounds: header mismatch".into()));
    }
    let mut last = None;
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let err = |m: &str| LabError::Schema(format!("bounds line {}: {m}", i + 2));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(err("expected 4 columns"));
        }
        let k: usize = cols[0].parse().map_err(|_| err("k not an integer"))?;
        if last.is_some_and(|p| k <= p) {
            return Err(err("k not increasing"));
        }
        for (j, c) in cols.iter().enumerate().skip(1) {
            if j == 2 && c.is_empty() {
                continue;
            }
            let v: f64 = c.parse().map_err(|_| err("not a float"))?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(err("value not finite and nonnegative"));
            }
        }
        last = Some(k);
        rows += 1;
    }
    Ok(rows)
}
