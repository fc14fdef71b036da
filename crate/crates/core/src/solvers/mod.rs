//! D-NG, D-NC, the distributed (sub)gradient baseline and centralized
//! Nesterov, with full per-iteration traces and communication accounting.
//!
//! Stacks are node-major: `(x_1^T, ..., x_n^T)^T`, and consensus multiplies
//! each coordinate by `W`.

mod csv;
mod metrics;
mod run;
mod schedules;

pub use csv::{trace_csv, validate_trace_csv, write_trace_csv, TRACE_HEADER};
pub use metrics::{first_hits, Metric, TargetHit, EPS_TARGETS};
pub use run::{run_centralized, run_dnc, run_dng, run_dsg, DIVERGENCE_LIMIT};
pub use schedules::{alpha_dng, alpha_dsg, beta, tau_x, tau_y};

use serde::{Deserialize, Serialize};

use crate::net::WeightMatrix;
use crate::objectives::Family;

/// Momentum rule used by D-NG and D-NC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Momentum {
    /// `beta_{k-1} = (k-1)/(k+2)`.
    Nesterov,
    /// Constant coefficient (diagnostic and mutation testing only).
    Fixed(f64),
}

impl Momentum {
    /// Coefficient applied at outer iteration `k`.
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            Momentum::Nesterov => beta(k as i64 - 1),
            Momentum::Fixed(b) => b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DngConfig {
    pub c: f64,
    pub k_max: usize,
    pub weight: WeightMatrix,
    pub momentum: Momentum,
    /// Keep every `keep_every`-th record (plus `k = 0` and the last one).
    pub keep_every: usize,
}

impl DngConfig {
    pub fn new(c: f64, k_max: usize, weight: WeightMatrix) -> Self {
        Self { c, k_max, weight, momentum: Momentum::Nesterov, keep_every: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DncConfig {
    pub alpha: f64,
    pub k_max: usize,
    pub weight: WeightMatrix,
    pub mu: f64,
    pub momentum: Momentum,
    pub keep_every: usize,
}

impl DncConfig {
    pub fn new(alpha: f64, k_max: usize, weight: WeightMatrix, mu: f64) -> Self {
        Self { alpha, k_max, weight, mu, momentum: Momentum::Nesterov, keep_every: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsgConfig {
    pub c: f64,
    pub tau: f64,
    pub k_max: usize,
    pub weight: WeightMatrix,
    pub keep_every: usize,
}

impl DsgConfig {
    pub fn new(c: f64, tau: f64, k_max: usize, weight: WeightMatrix) -> Self {
        Self { c, tau, k_max, weight, keep_every: 1 }
    }
}

/// Step rule used by centralized Nesterov.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CentralStep {
    Constant(f64),
    /// `alpha_{k-1} = c / k`.
    Diminishing(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Dng,
    Dnc,
    Dsg,
    Centralized,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Dng => "dng",
            Method::Dnc => "dnc",
            Method::Dsg => "dsg",
            Method::Centralized => "centralized",
        }
    }
}

/// Snapshot of the parameters a trace was produced with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepRule {
    Dng { c: f64, momentum: Momentum },
    Dnc { alpha: f64, mu: f64, momentum: Momentum },
    Dsg { c: f64, tau: f64 },
    Centralized(CentralStep),
}

impl StepRule {
    /// Step `alpha_{k-1}` used to produce iterate `k >= 1`.
    pub fn alpha_before(&self, k: usize) -> f64 {
        match *self {
            StepRule::Dng { c, .. } => alpha_dng(c, k - 1),
            StepRule::Dnc { alpha, .. } => alpha,
            StepRule::Dsg { c, tau } => alpha_dsg(c, tau, k - 1),
            StepRule::Centralized(CentralStep::Constant(a)) => a,
            StepRule::Centralized(CentralStep::Diminishing(c)) => alpha_dng(c, k - 1),
        }
    }
}

/// State after outer iteration `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub k: usize,
    /// Cumulative per-node broadcasts.
    pub comms_per_node: u64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub xbar: Vec<f64>,
    pub ybar: Vec<f64>,
    /// `||(I - J) x(k)||`.
    pub dis_x: f64,
    pub dis_y: f64,
    /// Global cost `f(x_i(k))` at every node's estimate.
    pub node_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub method: Method,
    /// Output label, e.g. `dnc_1_over_L`.
    pub label: String,
    pub seed: u64,
    pub step: StepRule,
    pub k_max: usize,
    pub objective: Family,
    pub n: usize,
    pub d: usize,
    pub f_star: Option<f64>,
    pub lipschitz: Option<f64>,
    /// Whether the step lies in the analyzed regime (`<= 1/(2L)`), if `L` is known.
    pub analyzed_regime: Option<bool>,
    pub records: Vec<IterRecord>,
    pub diverged: bool,
    /// First iteration whose state tripped the divergence guard.
    pub diverged_at: Option<usize>,
}

impl RunTrace {
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Re-applies a (refined) optimal value; records store raw states.
    pub fn with_f_star(mut self, f_star: f64) -> Self {
        self.f_star = Some(f_star);
        self
    }

    pub fn first(&self) -> &IterRecord {
        &self.records[0]
    }

    pub fn last(&self) -> &IterRecord {
        self.records.last().expect("traces hold at least the initial record")
    }

    pub fn at(&self, k: usize) -> Option<&IterRecord> {
        self.records.binary_search_by_key(&k, |r| r.k).ok().map(|i| &self.records[i])
    }

    /// `f(x_i(k)) - f*` per node; NaN without `f*`.
    pub fn gaps(&self, rec: &IterRecord) -> Vec<f64> {
        let fs = self.f_star.unwrap_or(f64::NAN);
        rec.node_values.iter().map(|v| v - fs).collect()
    }

    pub fn max_gap(&self, rec: &IterRecord) -> f64 {
        self.gaps(rec).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_gap(&self, rec: &IterRecord) -> f64 {
        self.gaps(rec).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// `(1/n) sum_i (f(x_i(k)) - f*) / (f(x_i(0)) - f*)`. A node that starts
    /// at the optimum contributes its raw gap.
    pub fn avg_rel_err(&self, rec: &IterRecord) -> f64 {
        let g0 = self.gaps(self.first());
        let gk = self.gaps(rec);
        let s: f64 = gk
            .iter()
            .zip(&g0)
            .map(|(a, b)| if *b > 1e-300 { a / b } else { *a })
            .sum();
        s / self.n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn momentum_schedule() {
        assert_eq!(Momentum::Nesterov.at(1), 0.0);
        assert_eq!(Momentum::Nesterov.at(2), 0.25);
        assert_eq!(Momentum::Fixed(0.3).at(7), 0.3);
    }
}
