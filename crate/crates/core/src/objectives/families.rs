use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};

use super::{reference_optimum, Family, LipschitzScope, NodeFn, ObjectiveSet, Optimum, Provenance, DEFAULT_GRAD_TOL};
use crate::error::{invalid, LabError, Result};

/// Radius of the quadratic region of the hard nonsmooth pair.
pub const CHI_BAR: f64 = 6.0;

/// Node count of the Huber two-group instance.
pub const HUBER_TWO_GROUP_N: usize = 20;

const LOGISTIC_DRAWS: usize = 1000;
const LABEL_NOISE_VARIANCE: f64 = 3.0;

/// Logistic regression with `n` nodes, one sample each, `d = 3`
/// (two features plus intercept).
///
/// Draws whose labels are linearly separable (no finite minimizer) are
/// rejected and redrawn from the same stream.
pub fn make_logistic(n: usize, seed: u64) -> Result<ObjectiveSet> {
    if n == 0 {
        return Err(invalid("n", "need at least one node"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, LABEL_NOISE_VARIANCE.sqrt()).expect("valid normal");
    for _ in 0..LOGISTIC_DRAWS {
        let truth: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let cs: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                let a: [f64; 2] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
                let eps = noise.sample(&mut rng);
                let b = if truth[0] * a[0] + truth[1] * a[1] + truth[2] + eps >= 0.0 { 1.0 } else { -1.0 };
                [b * a[0], b * a[1], b]
            })
            .collect();
        if has_minimizer(&cs) {
            return Ok(logistic_set(&cs, Family::Logistic { n, seed }));
        }
    }
    Err(LabError::Precondition(format!(
        "no non-separable logistic data for n={n}, seed={seed} after {LOGISTIC_DRAWS} draws"
    )))
}

fn logistic_set(cs: &[[f64; 3]], family: Family) -> ObjectiveSet {
    let n = cs.len();
    let mut m = Matrix3::zeros();
    for c in cs {
        let v = Vector3::from(*c);
        m += v * v.transpose();
    }
    let top = SymmetricEigen::new(m).eigenvalues.iter().copied().fold(0.0, f64::max);
    let l = top / (4.0 * n as f64);
    let g = cs
        .iter()
        .map(|c| (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt())
        .fold(0.0, f64::max);
    let mut set = ObjectiveSet {
        nodes: cs.iter().map(|c| NodeFn::Logistic { c: c.to_vec() }).collect(),
        lipschitz: Some(l),
        lipschitz_scope: LipschitzScope::Average,
        grad_bound: Some(g),
        optimum: None,
        family,
        test_box: 10.0,
    };
    let (x, f) = reference_optimum(&set, DEFAULT_GRAD_TOL).expect("non-separable logistic data has a minimizer");
    set.optimum = Some(Optimum { x, f, provenance: Provenance::Solved });
    set
}

/// The logistic sum attains its infimum iff the cone `{x : c_i^T x >= 0 for
/// all i}` is `{0}`. In `R^3` a nontrivial pointed cone has an extreme ray
/// along some `c_i x c_j`, so checking those rays (both signs) decides it.
fn has_minimizer(cs: &[[f64; 3]]) -> bool {
    let rank_deficient = {
        let mut m = Matrix3::zeros();
        for c in cs {
            let v = Vector3::from(*c);
            m += v * v.transpose();
        }
        let ev = SymmetricEigen::new(m).eigenvalues;
        let max = ev.iter().copied().fold(0.0, f64::max);
        ev.iter().copied().fold(f64::INFINITY, f64::min) <= 1e-10 * max.max(1.0)
    };
    if rank_deficient {
        return false;
    }
    for i in 0..cs.len() {
        for j in i + 1..cs.len() {
            let r = Vector3::from(cs[i]).cross(&Vector3::from(cs[j]));
            let rn = r.norm();
            if rn < 1e-12 {
                continue;
            }
            for sign in [1.0, -1.0] {
                let ray = r * (sign / rn);
                let inside = cs.iter().all(|c| {
                    let cv = Vector3::from(*c);
                    cv.dot(&ray) >= -1e-9 * cv.norm()
                });
                if inside {
                    return false;
                }
            }
        }
    }
    true
}

/// Twenty Huber losses in two groups: nodes 1..6 centered at `theta + nu_i`,
/// nodes 7..20 at `-theta + nu_i`, `nu_i ~ U[-0.1 theta, 0.1 theta]`.
pub fn make_huber_two_group(theta: f64, seed: u64) -> Result<ObjectiveSet> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(invalid("theta", format!("{theta} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nu = Uniform::new_inclusive(-0.1 * theta, 0.1 * theta);
    let nodes = (0..HUBER_TWO_GROUP_N)
        .map(|i| {
            let center = if i < 6 { theta } else { -theta };
            NodeFn::Huber { a: center + nu.sample(&mut rng) }
        })
        .collect();
    let mut set = ObjectiveSet {
        nodes,
        lipschitz: Some(1.0),
        lipschitz_scope: LipschitzScope::PerNode,
        grad_bound: Some(1.0),
        optimum: None,
        family: Family::HuberTwoGroup { theta, seed },
        test_box: 20.0_f64.max(2.0 * theta),
    };
    let (x, f) = reference_optimum(&set, DEFAULT_GRAD_TOL)?;
    set.optimum = Some(Optimum { x, f, provenance: Provenance::Solved });
    Ok(set)
}

/// Huber losses around `+1` and `-1`; minimizer 0 with value 1.
pub fn make_huber_pair() -> ObjectiveSet {
    ObjectiveSet {
        nodes: vec![NodeFn::Huber { a: 1.0 }, NodeFn::Huber { a: -1.0 }],
        lipschitz: Some(1.0),
        lipschitz_scope: LipschitzScope::PerNode,
        grad_bound: Some(1.0),
        optimum: Some(Optimum { x: vec![0.0], f: 1.0, provenance: Provenance::ClosedForm }),
        family: Family::HuberPair,
        test_box: 20.0,
    }
}

/// Two-node, two-dimensional instance that is quadratic inside an ellipse and
/// grows like a norm outside it. `L = sqrt(2)`, `G = 10` for `theta in [0, 1]`.
pub fn make_hard_nonsmooth_pair(theta: f64) -> Result<ObjectiveSet> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(invalid("theta", format!("{theta} not in [0, 1]")));
    }
    Ok(ObjectiveSet {
        nodes: vec![
            NodeFn::HardNonsmooth { theta, s: -1.0 },
            NodeFn::HardNonsmooth { theta, s: 1.0 },
        ],
        lipschitz: Some(2f64.sqrt()),
        lipschitz_scope: LipschitzScope::PerNode,
        grad_bound: Some(10.0),
        optimum: Some(Optimum {
            x: vec![0.0, 0.0],
            f: theta + 1.0,
            provenance: Provenance::ClosedForm,
        }),
        family: Family::HardNonsmooth { theta },
        test_box: 20.0,
    })
}

/// `f_1 = (x - theta)^2/2`, `f_2 = (x + theta)^2/2`. Gradients are unbounded.
pub fn make_hard_quadratic_pair(theta: f64) -> Result<ObjectiveSet> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(invalid("theta", format!("{theta} must be positive")));
    }
    Ok(ObjectiveSet {
        nodes: vec![NodeFn::Quadratic { center: theta }, NodeFn::Quadratic { center: -theta }],
        lipschitz: Some(1.0),
        lipschitz_scope: LipschitzScope::PerNode,
        grad_bound: None,
        optimum: Some(Optimum {
            x: vec![0.0],
            f: theta * theta,
            provenance: Provenance::ClosedForm,
        }),
        family: Family::HardQuadratic { theta },
        test_box: 20.0,
    })
}

/// Piecewise cubic/quadratic pair without a Lipschitz gradient.
pub fn make_cubic_pair() -> ObjectiveSet {
    let mut set = ObjectiveSet {
        nodes: vec![NodeFn::Cubic { s: 1.0 }, NodeFn::Cubic { s: -1.0 }],
        lipschitz: None,
        lipschitz_scope: LipschitzScope::PerNode,
        grad_bound: None,
        optimum: None,
        family: Family::CubicPair,
        test_box: 10.0,
    };
    let (x, f) = reference_optimum(&set, DEFAULT_GRAD_TOL).expect("bounded search always succeeds in 1-D");
    set.optimum = Some(Optimum { x, f, provenance: Provenance::Solved });
    set
}

/// Fair losses around the given anchors, one node per anchor.
pub fn make_fair_loss(n: usize, b0: f64, anchors: &[f64]) -> Result<ObjectiveSet> {
    if !(b0 > 0.0 && b0.is_finite()) {
        return Err(invalid("b0", format!("{b0} must be positive")));
    }
    if n == 0 || anchors.len() != n {
        return Err(invalid("anchors", format!("expected {n} anchors, got {}", anchors.len())));
    }
    let mut set = ObjectiveSet {
        nodes: anchors.iter().map(|&anchor| NodeFn::Fair { b0, anchor }).collect(),
        lipschitz: Some(1.0),
        lipschitz_scope: LipschitzScope::PerNode,
        grad_bound: Some(b0),
        optimum: None,
        family: Family::Fair { b0, anchors: anchors.to_vec() },
        test_box: 20.0,
    };
    let (x, f) = reference_optimum(&set, DEFAULT_GRAD_TOL)?;
    set.optimum = Some(Optimum { x, f, provenance: Provenance::Solved });
    Ok(set)
}

/// Random uniform anchors in `[-width, width]`; convenience for tests and
/// configs.
pub fn random_anchors(n: usize, width: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-width..=width)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::NodeObjective;

    #[test]
    fn logistic_constants_are_sane() {
        let set = make_logistic(100, 3).unwrap();
        let l = set.lipschitz.unwrap();
        assert!(l > 0.05 && l < 2.0, "L = {l}");
        assert_eq!(set.d(), 3);
    }

    #[test]
    fn separable_data_is_detected() {
        let cs = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]];
        assert!(!has_minimizer(&cs));
        let cs = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [-1.0, -1.0, -1.0],
        ];
        assert!(has_minimizer(&cs));
    }

    #[test]
    fn hard_nonsmooth_origin() {
        let set = make_hard_nonsmooth_pair(0.5).unwrap();
        assert_eq!(set.value(&[0.0, 0.0]), 1.5);
        assert_eq!(set.nodes[0].gradient(&[0.0, 0.0]), vec![-0.5, -1.0]);
        assert!(make_hard_nonsmooth_pair(1.5).is_err());
    }

    #[test]
    fn hard_quadratic_minimizers() {
        let set = make_hard_quadratic_pair(3.0).unwrap();
        assert_eq!(set.nodes[0].gradient(&[3.0]), vec![0.0]);
        assert_eq!(set.nodes[1].gradient(&[-3.0]), vec![0.0]);
        assert_eq!(set.nodes[0].gradient(&[0.0]), vec![-3.0]);
        assert_eq!(set.f_star(), Some(9.0));
    }

    #[test]
    fn cubic_optimum() {
        let set = make_cubic_pair();
        let o = set.optimum.unwrap();
        assert!(o.x[0].abs() < 1e-6);
        assert!((o.f + 4.0).abs() < 1e-9);
    }

    #[test]
    fn huber_two_group_small_theta() {
        let set = make_huber_two_group(0.01, 5).unwrap();
        let x = set.x_star().unwrap()[0];
        assert!((-0.011..=0.011).contains(&x), "{x}");
    }
}
