//! Sampling certificates for objective sets: finite-difference gradients,
//! Lipschitz and gradient bounds, convexity and optimality spot checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LipschitzScope, NodeObjective, ObjectiveSet};
use crate::stack::norm;

const FD_STEP: f64 = 1e-6;
const KNOT_EXCLUSION: f64 = 1e-4;

fn sample_point(rng: &mut ChaCha8Rng, d: usize, half: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-half..=half)).collect()
}

/// Largest relative error between analytic and centered finite-difference
/// gradients over `points` random points per node; points within `1e-4` of a
/// knot are redrawn. Relative error is `||g - g_fd|| / max(||g||, 1)`.
pub fn check_gradient_fd(set: &ObjectiveSet, points: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = set.d();
    let mut worst = 0.0f64;
    for f in &set.nodes {
        let mut done = 0;
        while done < points {
            let x = sample_point(&mut rng, d, set.test_box);
            if f.near_knot(&x, KNOT_EXCLUSION) {
                continue;
            }
            let g = f.gradient(&x);
            let mut fd = vec![0.0; d];
            let mut xp = x.clone();
            for l in 0..d {
                xp[l] = x[l] + FD_STEP;
                let up = f.value(&xp);
                xp[l] = x[l] - FD_STEP;
                let down = f.value(&xp);
                xp[l] = x[l];
                fd[l] = (up - down) / (2.0 * FD_STEP);
            }
            let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
            worst = worst.max(norm(&diff) / norm(&g).max(1.0));
            done += 1;
        }
    }
    worst
}

/// Outcome of the sampled `L` / `G` certificates. Ratios at most 1 pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateReport {
    /// `max ||grad f_i(x) - grad f_i(y)|| / (L ||x - y||)`, if `L` is declared.
    pub lipschitz_ratio: Option<f64>,
    /// `max ||grad f_i(x)|| / G`, if `G` is declared.
    pub grad_bound_ratio: Option<f64>,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.lipschitz_ratio.is_none_or(|r| r <= 1.0 + 1e-12)
            && self.grad_bound_ratio.is_none_or(|r| r <= 1.0 + 1e-12)
    }
}

/// Samples `samples` pairs/points per node in the set's test box. Constants
/// with [`LipschitzScope::Average`] are checked on the averaged gradient
/// instead of per node.
pub fn check_lipschitz(set: &ObjectiveSet, samples: usize, seed: u64) -> CertificateReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = set.d();
    let mut lip = 0.0f64;
    let mut gb = 0.0f64;
    let mut record_pair = |x: &[f64], y: &[f64], gx: &[f64], gy: &[f64]| {
        let dg: Vec<f64> = gx.iter().zip(gy).map(|(a, b)| a - b).collect();
        let dx: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let nx = norm(&dx);
        if nx > 0.0 {
            lip = lip.max(norm(&dg) / nx);
        }
    };
    let average = set.lipschitz_scope == LipschitzScope::Average;
    for f in &set.nodes {
        for _ in 0..samples {
            let x = sample_point(&mut rng, d, set.test_box);
            let y = sample_point(&mut rng, d, set.test_box);
            let gx = f.gradient(&x);
            if !average {
                record_pair(&x, &y, &gx, &f.gradient(&y));
            }
            gb = gb.max(norm(&gx));
        }
    }
    if average {
        let scale = 1.0 / set.n() as f64;
        for _ in 0..samples {
            let x = sample_point(&mut rng, d, set.test_box);
            let y = sample_point(&mut rng, d, set.test_box);
            let gx: Vec<f64> = set.gradient(&x).iter().map(|v| v * scale).collect();
            let gy: Vec<f64> = set.gradient(&y).iter().map(|v| v * scale).collect();
            record_pair(&x, &y, &gx, &gy);
        }
    }
    CertificateReport {
        lipschitz_ratio: set.lipschitz.map(|l| lip / l),
        grad_bound_ratio: set.grad_bound.map(|g| gb / g),
    }
}

/// Largest `f_i(mid) - (f_i(a) + f_i(b))/2` over random segments; convexity
/// requires this to be at most ~0.
pub fn check_convexity(set: &ObjectiveSet, segments: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = set.d();
    let mut worst = f64::NEG_INFINITY;
    for f in &set.nodes {
        for _ in 0..segments {
            let a = sample_point(&mut rng, d, set.test_box);
            let b = sample_point(&mut rng, d, set.test_box);
            let mid: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
            let gap = f.value(&mid) - 0.5 * (f.value(&a) + f.value(&b));
            worst = worst.max(gap / (1.0 + f.value(&a).abs().max(f.value(&b).abs())));
        }
    }
    worst
}

/// Smallest `f(x* + delta) - f*` over random `||delta|| <= 1`; negative values
/// mean the stored optimum is not a minimizer. `None` without an optimum.
pub fn check_optimality(set: &ObjectiveSet, perturbations: usize, seed: u64) -> Option<f64> {
    let opt = set.optimum.as_ref()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = set.d();
    let mut worst = f64::INFINITY;
    for _ in 0..perturbations {
        let mut delta = sample_point(&mut rng, d, 1.0);
        let nd = norm(&delta);
        if nd > 1.0 {
            delta.iter_mut().for_each(|v| *v /= nd);
        }
        let x: Vec<f64> = opt.x.iter().zip(&delta).map(|(a, b)| a + b).collect();
        worst = worst.min(set.value(&x) - opt.f);
    }
    Some(worst)
}
