//! Node-major stacked vectors `(x_1^T, ..., x_n^T)^T` and the handful of
//! operations the solvers and checkers need on them.

use crate::net::WeightMatrix;

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Network average of a stack with `n` blocks of dimension `d`.
pub fn block_mean(stack: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for l in 0..d {
            mean[l] += stack[i * d + l];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    mean
}

/// Disagreement `(I - J) stack` written into `out`.
pub fn disagreement(stack: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mean = block_mean(stack, n, d);
    let mut out = stack.to_vec();
    for i in 0..n {
        for l in 0..d {
            out[i * d + l] -= mean[l];
        }
    }
    out
}

/// `out = (W kron I_d) v`.
pub fn mix_into(w: &WeightMatrix, v: &[f64], d: usize, out: &mut [f64]) {
    let n = w.n();
    for i in 0..n {
        let row = w.row(i);
        let dst = &mut out[i * d..(i + 1) * d];
        dst.fill(0.0);
        for (j, &wij) in row.iter().enumerate() {
            if wij == 0.0 {
                continue;
            }
            let src = &v[j * d..(j + 1) * d];
            for l in 0..d {
                dst[l] += wij * src[l];
            }
        }
    }
}

/// Apply `sweeps` consensus steps in place, using `scratch` as a buffer.
pub fn mix_repeat(w: &WeightMatrix, v: &mut Vec<f64>, d: usize, sweeps: usize, scratch: &mut Vec<f64>) {
    scratch.resize(v.len(), 0.0);
    for _ in 0..sweeps {
        mix_into(w, v, d, scratch);
        std::mem::swap(v, scratch);
    }
}

/// Replicate `x0` on every node.
pub fn uniform_stack(x0: &[f64], n: usize) -> Vec<f64> {
    let mut s = Vec::with_capacity(n * x0.len());
    for _ in 0..n {
        s.extend_from_slice(x0);
    }
    s
}
