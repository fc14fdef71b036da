use super::ObjectiveSet;
use crate::error::{LabError, Result};
use crate::stack::{dot, norm};

pub const DEFAULT_GRAD_TOL: f64 = 1e-10;
pub const DEFAULT_ITER_CAP: usize = 1_000_000;

/// Search interval for sets without a smoothness constant.
const FALLBACK_INTERVAL: (f64, f64) = (-10.0, 10.0);

/// Minimizer and minimum of `f = sum_i f_i`.
///
/// Closed-form optima are returned as stored. Sets with a Lipschitz constant
/// are solved by centralized Nesterov iterations (step `1/(nL)`) with
/// gradient-based restarts until `||grad f|| <= tol`. One-dimensional sets
/// without `L` fall back to golden-section search on a bounded interval.
pub fn reference_optimum(obj: &ObjectiveSet, tol: f64) -> Result<(Vec<f64>, f64)> {
    if let Some(o) = &obj.optimum {
        if o.provenance == super::Provenance::ClosedForm {
            return Ok((o.x.clone(), o.f));
        }
    }
    match obj.lipschitz {
        Some(l) => nesterov_restart(obj, l, tol, DEFAULT_ITER_CAP),
        None if obj.d() == 1 => Ok(golden_section(obj, FALLBACK_INTERVAL)),
        None => Err(LabError::Precondition(
            "reference optimum needs a Lipschitz constant in more than one dimension".into(),
        )),
    }
}

fn nesterov_restart(obj: &ObjectiveSet, l: f64, tol: f64, cap: usize) -> Result<(Vec<f64>, f64)> {
    let d = obj.d();
    let step = 1.0 / (obj.n() as f64 * l);
    let mut scratch = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut x_prev = vec![0.0; d];
    let mut y = x_prev.clone();
    let mut x = vec![0.0; d];
    let mut t = 1usize;

    obj.gradient_into(&x_prev, &mut g, &mut scratch);
    if norm(&g) <= tol {
        return Ok((x_prev.clone(), obj.value(&x_prev)));
    }
    for _ in 0..cap {
        obj.gradient_into(&y, &mut g, &mut scratch);
        for l in 0..d {
            x[l] = y[l] - step * g[l];
        }
        let dx: Vec<f64> = x.iter().zip(&x_prev).map(|(a, b)| a - b).collect();
        if dot(&g, &dx) > 0.0 {
            t = 1;
        }
        let beta = (t as f64 - 1.0) / (t as f64 + 2.0);
        for l in 0..d {
            y[l] = x[l] + beta * dx[l];
        }
        x_prev.copy_from_slice(&x);
        t += 1;

        obj.gradient_into(&x, &mut g, &mut scratch);
        if norm(&g) <= tol {
            return Ok((x.clone(), obj.value(&x)));
        }
    }
    obj.gradient_into(&x, &mut g, &mut scratch);
    Err(LabError::NoConvergence {
        iterations: cap,
        grad_norm: norm(&g),
    })
}

fn golden_section(obj: &ObjectiveSet, (mut a, mut b): (f64, f64)) -> (Vec<f64>, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = |x: f64| obj.value(&[x]);
    let mut c = b - inv_phi * (b - a);
    let mut e = a + inv_phi * (b - a);
    let (mut fc, mut fe) = (f(c), f(e));
    while b - a > 1e-12 {
        if fc <= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (b - a);
            fe = f(e);
        }
    }
    let x = 0.5 * (a + b);
    (vec![x], f(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{make_hard_quadratic_pair, make_huber_pair, make_logistic, Provenance};

    #[test]
    fn closed_form_short_circuits() {
        let set = make_hard_quadratic_pair(5.0).unwrap();
        assert_eq!(reference_optimum(&set, 1e-10).unwrap(), (vec![0.0], 25.0));
    }

    #[test]
    fn huber_pair_solved_from_scratch() {
        let mut set = make_huber_pair();
        set.optimum.as_mut().unwrap().provenance = Provenance::Solved;
        let (x, f) = reference_optimum(&set, 1e-10).unwrap();
        assert!(x[0].abs() < 1e-9);
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn logistic_self_consistent() {
        let set = make_logistic(10, 1).unwrap();
        let (_, f1) = reference_optimum(&set, 1e-10).unwrap();
        let (_, f2) = reference_optimum(&set, 1e-11).unwrap();
        assert!((f1 - f2).abs() < 1e-9);
    }
}
