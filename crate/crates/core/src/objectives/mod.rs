//! Per-node convex objectives with certified constants and reference optima.

mod checks;
mod families;
mod optimum;

pub use checks::{
    check_convexity, check_gradient_fd, check_lipschitz, check_optimality, CertificateReport,
};
pub use families::{
    make_cubic_pair, make_fair_loss, make_hard_nonsmooth_pair, make_hard_quadratic_pair,
    make_huber_pair, make_huber_two_group, make_logistic, random_anchors, CHI_BAR, HUBER_TWO_GROUP_N,
};
pub use optimum::{reference_optimum, DEFAULT_GRAD_TOL, DEFAULT_ITER_CAP};

use serde::{Deserialize, Serialize};

/// A convex function of `x in R^d` known to a single node.
pub trait NodeObjective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// Writes the gradient at `x` into `out` (length `dim`).
    fn gradient_into(&self, x: &[f64], out: &mut [f64]);

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(x, &mut g);
        g
    }

    /// True if `x` lies within `eps` of a point where the closed form switches
    /// pieces (finite differences are unreliable there).
    fn near_knot(&self, _x: &[f64], _eps: f64) -> bool {
        false
    }
}

/// Concrete node functions, enum-dispatched so solver inner loops stay
/// monomorphic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeFn {
    /// `log(1 + exp(-c^T x))`.
    Logistic { c: Vec<f64> },
    /// Huber loss around `a` with unit threshold.
    Huber { a: f64 },
    /// Two-region function: quadratic inside the ellipse
    /// `theta*u^2 + v^2 <= chi^2` (with `u = x1 + s`, `v = x2 + s`), scaled
    /// norm outside.
    HardNonsmooth { theta: f64, s: f64 },
    /// `(x - center)^2 / 2`.
    Quadratic { center: f64 },
    /// `g(s x)` with `g(x) = 4x^3 + 1.5x^2` for `x > 1`, `7.5x^2 - 2` otherwise.
    Cubic { s: f64 },
    /// Fair loss `b0^2 (|r|/b0 - log(1 + |r|/b0))`, `r = x - anchor`.
    Fair { b0: f64, anchor: f64 },
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn huber(r: f64) -> f64 {
    if r.abs() <= 1.0 {
        0.5 * r * r
    } else {
        r.abs() - 0.5
    }
}

fn cubic_branch(x: f64) -> (f64, f64) {
    if x > 1.0 {
        (4.0 * x * x * x + 1.5 * x * x, 12.0 * x * x + 3.0 * x)
    } else {
        (7.5 * x * x - 2.0, 15.0 * x)
    }
}

impl NodeObjective for NodeFn {
    fn dim(&self) -> usize {
        match self {
            NodeFn::Logistic { c } => c.len(),
            NodeFn::HardNonsmooth { .. } => 2,
            _ => 1,
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self {
            NodeFn::Logistic { c } => {
                let z: f64 = c.iter().zip(x).map(|(a, b)| a * b).sum();
                softplus(-z)
            }
            NodeFn::Huber { a } => huber(x[0] - a),
            &NodeFn::HardNonsmooth { theta, s } => {
                let (u, v) = (x[0] + s, x[1] + s);
                let q = theta * u * u + v * v;
                if q <= CHI_BAR * CHI_BAR {
                    0.5 * q
                } else {
                    CHI_BAR * (q.sqrt() - 0.5 * CHI_BAR)
                }
            }
            NodeFn::Quadratic { center } => 0.5 * (x[0] - center) * (x[0] - center),
            NodeFn::Cubic { s } => cubic_branch(s * x[0]).0,
            &NodeFn::Fair { b0, anchor } => {
                let r = (x[0] - anchor).abs() / b0;
                b0 * b0 * (r - r.ln_1p())
            }
        }
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            NodeFn::Logistic { c } => {
                let z: f64 = c.iter().zip(x).map(|(a, b)| a * b).sum();
                let w = -sigmoid(-z);
                for (o, ci) in out.iter_mut().zip(c) {
                    *o = w * ci;
                }
            }
            NodeFn::Huber { a } => out[0] = (x[0] - a).clamp(-1.0, 1.0),
            &NodeFn::HardNonsmooth { theta, s } => {
                let (u, v) = (x[0] + s, x[1] + s);
                let q = theta * u * u + v * v;
                let scale = if q <= CHI_BAR * CHI_BAR { 1.0 } else { CHI_BAR / q.sqrt() };
                out[0] = scale * theta * u;
                out[1] = scale * v;
            }
            NodeFn::Quadratic { center } => out[0] = x[0] - center,
            NodeFn::Cubic { s } => out[0] = s * cubic_branch(s * x[0]).1,
            &NodeFn::Fair { b0, anchor } => {
                let r = x[0] - anchor;
                out[0] = b0 * r / (b0 + r.abs());
            }
        }
    }

    fn near_knot(&self, x: &[f64], eps: f64) -> bool {
        match self {
            NodeFn::Huber { a } => ((x[0] - a).abs() - 1.0).abs() < eps,
            &NodeFn::HardNonsmooth { theta, s } => {
                let (u, v) = (x[0] + s, x[1] + s);
                let q = (theta * u * u + v * v).sqrt();
                (q - CHI_BAR).abs() < eps
            }
            NodeFn::Cubic { s } => (s * x[0] - 1.0).abs() < eps,
            NodeFn::Fair { anchor, .. } => (x[0] - anchor).abs() < eps,
            _ => false,
        }
    }
}

/// How an optimum was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    ClosedForm,
    Solved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub provenance: Provenance,
}

/// Generating parameters of an objective set; enough to rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Logistic { n: usize, seed: u64 },
    HuberTwoGroup { theta: f64, seed: u64 },
    HuberPair,
    HardNonsmooth { theta: f64 },
    HardQuadratic { theta: f64 },
    CubicPair,
    Fair { b0: f64, anchors: Vec<f64> },
    Custom { name: String },
}

impl Family {
    pub fn name(&self) -> &str {
        match self {
            Family::Logistic { .. } => "logistic",
            Family::HuberTwoGroup { .. } => "huber_two_group",
            Family::HuberPair => "huber_pair",
            Family::HardNonsmooth { .. } => "hard_nonsmooth",
            Family::HardQuadratic { .. } => "hard_quadratic",
            Family::CubicPair => "cubic_pair",
            Family::Fair { .. } => "fair",
            Family::Custom { name } => name,
        }
    }
}

/// What a declared Lipschitz constant certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzScope {
    /// Every `grad f_i` is `L`-Lipschitz.
    #[default]
    PerNode,
    /// The averaged gradient `(1/n) sum_i grad f_i` is `L`-Lipschitz.
    Average,
}

/// `n` node objectives on a shared `R^d`, the global cost being their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSet {
    pub nodes: Vec<NodeFn>,
    pub lipschitz: Option<f64>,
    #[serde(default)]
    pub lipschitz_scope: LipschitzScope,
    pub grad_bound: Option<f64>,
    pub optimum: Option<Optimum>,
    pub family: Family,
    /// Certificates are sampled in `[-test_box, test_box]^d`.
    pub test_box: f64,
}

impl ObjectiveSet {
    /// Assembles a set from arbitrary node functions. All nodes must share a
    /// dimension.
    pub fn custom(
        name: &str,
        nodes: Vec<NodeFn>,
        lipschitz: Option<f64>,
        grad_bound: Option<f64>,
        optimum: Option<Optimum>,
    ) -> crate::Result<Self> {
        let d = nodes.first().map(|f| f.dim()).unwrap_or(0);
        if nodes.is_empty() || nodes.iter().any(|f| f.dim() != d) {
            return Err(crate::error::invalid("nodes", "need at least one node, all of equal dimension"));
        }
        Ok(Self {
            nodes,
            lipschitz,
            lipschitz_scope: LipschitzScope::PerNode,
            grad_bound,
            optimum,
            family: Family::Custom { name: name.to_string() },
            test_box: 20.0,
        })
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn d(&self) -> usize {
        self.nodes[0].dim()
    }

    pub fn f_star(&self) -> Option<f64> {
        self.optimum.as_ref().map(|o| o.f)
    }

    pub fn x_star(&self) -> Option<&[f64]> {
        self.optimum.as_ref().map(|o| o.x.as_slice())
    }

    /// `f(x) = sum_i f_i(x)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.nodes.iter().map(|f| f.value(x)).sum()
    }

    /// `grad f(x)` into `out`; `scratch` has length `d`.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        out.fill(0.0);
        for f in &self.nodes {
            f.gradient_into(x, scratch);
            for (o, s) in out.iter_mut().zip(scratch.iter()) {
                *o += s;
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = self.d();
        let (mut g, mut s) = (vec![0.0; d], vec![0.0; d]);
        self.gradient_into(x, &mut g, &mut s);
        g
    }

    /// Stacked local gradients `grad F(y) = (grad f_1(y_1), ..., grad f_n(y_n))`.
    pub fn stacked_gradient_into(&self, y: &[f64], out: &mut [f64]) {
        let d = self.d();
        for (i, f) in self.nodes.iter().enumerate() {
            f.gradient_into(&y[i * d..(i + 1) * d], &mut out[i * d..(i + 1) * d]);
        }
    }

    /// Replaces the optimum, e.g. after refining it.
    pub fn with_optimum(mut self, x: Vec<f64>, f: f64, provenance: Provenance) -> Self {
        self.optimum = Some(Optimum { x, f, provenance });
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_at_origin() {
        let f = NodeFn::Logistic { c: vec![1.0, 1.0, 1.0] };
        assert!((f.value(&[0.0; 3]) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(f.gradient(&[0.0; 3]), vec![-0.5; 3]);
    }

    #[test]
    fn logistic_is_stable_for_large_margins() {
        let f = NodeFn::Logistic { c: vec![1.0, 0.0, 0.0] };
        assert!(f.value(&[800.0, 0.0, 0.0]).is_finite());
        assert!((f.value(&[-800.0, 0.0, 0.0]) - 800.0).abs() < 1e-9);
        assert!(f.gradient(&[-800.0, 0.0, 0.0])[0] + 1.0 < 1e-12);
    }

    #[test]
    fn huber_pieces() {
        let f = NodeFn::Huber { a: 1.0 };
        assert_eq!(f.gradient(&[1.0]), vec![0.0]);
        assert_eq!(f.value(&[3.0]), 1.5);
        assert_eq!(f.gradient(&[3.0]), vec![1.0]);
        assert_eq!(f.gradient(&[0.0]), vec![-1.0]);
    }

    #[test]
    fn cubic_knot_is_continuous() {
        let f1 = NodeFn::Cubic { s: 1.0 };
        let f2 = NodeFn::Cubic { s: -1.0 };
        assert_eq!(f1.value(&[1.0]), 5.5);
        assert!((f1.value(&[1.0 + 1e-12]) - 5.5).abs() < 1e-9);
        assert_eq!(f2.value(&[-1.0]), 5.5);
    }

    #[test]
    fn fair_values() {
        let f = NodeFn::Fair { b0: 2.0, anchor: 1.0 };
        assert_eq!(f.value(&[1.0]), 0.0);
        assert_eq!(f.gradient(&[1.0]), vec![0.0]);
        assert!((f.value(&[3.0]) - 4.0 * (1.0 - 2f64.ln())).abs() < 1e-14);
    }
}
