//! Step-size, momentum and consensus-round schedules.

use crate::error::{invalid, Result};

/// Relative slack so that ceilings of exact integers stay put under rounding.
const CEIL_GUARD: f64 = 1e-10;

/// D-NG step `alpha_k = c / (k + 1)`.
pub fn alpha_dng(c: f64, k: usize) -> f64 {
    c / (k as f64 + 1.0)
}

/// Momentum `beta_k = k / (k + 3)`; `beta(-1) = 0`.
pub fn beta(k: i64) -> f64 {
    if k < 0 {
        0.0
    } else {
        k as f64 / (k as f64 + 3.0)
    }
}

/// Baseline step `alpha_k = c / (k + 1)^tau`.
pub fn alpha_dsg(c: f64, tau: f64, k: usize) -> f64 {
    c / (k as f64 + 1.0).powf(tau)
}

fn guarded_ceil(v: f64) -> usize {
    let c = (v - CEIL_GUARD * v.abs().max(1.0)).ceil();
    c.max(0.0) as usize
}

fn check_mu(mu: f64) -> Result<()> {
    if !(0.0..1.0).contains(&mu) {
        return Err(invalid("mu", format!("{mu} not in [0, 1)")));
    }
    Ok(())
}

fn rounds(k: usize, mu: f64, numerator: f64) -> Result<usize> {
    check_mu(mu)?;
    if k == 0 {
        return Err(invalid("k", "consensus schedules start at k = 1"));
    }
    if mu == 0.0 {
        return Ok(usize::from(k >= 2));
    }
    Ok(guarded_ceil(numerator / -mu.ln()))
}

/// Consensus rounds after the gradient step: `ceil(2 log k / (-log mu))`.
/// With `mu = 0` one round is exact averaging, so `k >= 2` uses one round.
pub fn tau_x(k: usize, mu: f64) -> Result<usize> {
    rounds(k, mu, 2.0 * (k as f64).ln())
}

/// Consensus rounds after the momentum step:
/// `ceil((log 3 + 2 log k) / (-log mu))`, same `mu = 0` convention.
pub fn tau_y(k: usize, mu: f64) -> Result<usize> {
    rounds(k, mu, 3f64.ln() + 2.0 * (k as f64).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_and_momentum() {
        assert_eq!(beta(0), 0.0);
        assert_eq!(beta(1), 0.25);
        assert_eq!(beta(-1), 0.0);
        assert_eq!(alpha_dng(1.0, 0), 1.0);
        assert_eq!(alpha_dsg(1.0, 0.5, 3), 0.5);
    }

    #[test]
    fn tau_examples() {
        assert_eq!(tau_x(1, 0.5).unwrap(), 0);
        assert_eq!(tau_x(2, 0.5).unwrap(), 2);
        assert_eq!(tau_y(2, 0.5).unwrap(), 4);
        assert_eq!(tau_y(1, 1.0 / 3.0).unwrap(), 1);
        assert_eq!(tau_y(1, 0.5).unwrap(), 2);
        assert!(tau_x(3, 1.0).is_err());
    }

    #[test]
    fn tau_with_ideal_averaging() {
        assert_eq!(tau_x(1, 0.0).unwrap(), 0);
        assert_eq!(tau_y(1, 0.0).unwrap(), 0);
        assert_eq!(tau_x(5, 0.0).unwrap(), 1);
        assert_eq!(tau_y(5, 0.0).unwrap(), 1);
    }
}
