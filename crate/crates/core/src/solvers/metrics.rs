use serde::{Deserialize, Serialize};

use super::{IterRecord, RunTrace};

/// Accuracy targets reported by experiment summaries.
pub const EPS_TARGETS: [f64; 7] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7];

/// Error measure scanned for first hits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    AvgRelErr,
    MaxGap,
}

impl Metric {
    pub fn eval(&self, trace: &RunTrace, rec: &IterRecord) -> f64 {
        match self {
            Metric::AvgRelErr => trace.avg_rel_err(rec),
            Metric::MaxGap => trace.max_gap(rec),
        }
    }
}

/// First recorded iteration at which the metric is at most `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetHit {
    pub eps: f64,
    pub k: Option<usize>,
    pub comms_per_node: Option<u64>,
    pub total_comms: Option<u64>,
}

/// Scans the trace in order for each target. Diverged traces report no hits.
pub fn first_hits(trace: &RunTrace, targets: &[f64], metric: Metric) -> Vec<TargetHit> {
    targets
        .iter()
        .map(|&eps| {
            let hit = if trace.diverged {
                None
            } else {
                trace.records.iter().find(|r| metric.eval(trace, r) <= eps)
            };
            TargetHit {
                eps,
                k: hit.map(|r| r.k),
                comms_per_node: hit.map(|r| r.comms_per_node),
                total_comms: hit.map(|r| r.comms_per_node * trace.n as u64),
            }
        })
        .collect()
}
