//! Quadrature wavefunctions and Gauss–Hermite nodes.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

/// Number-state wavefunctions `⟨x|n⟩` for `n < dim`, normalized so that the
/// vacuum density is a unit-variance normal.
pub fn hermite_functions(x: f64, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    if dim == 0 {
        return out;
    }
    out[0] = (2.0 * PI).powf(-0.25) * (-0.25 * x * x).exp();
    if dim > 1 {
        out[1] = x * out[0];
    }
    for n in 1..dim - 1 {
        out[n + 1] = (x * out[n] - (n as f64).sqrt() * out[n - 1]) / ((n + 1) as f64).sqrt();
    }
    out
}

/// Gauss–Hermite rule for `∫ f(t) e^{−t²} dt`. Returns nodes in increasing
/// order together with `wᵢ e^{tᵢ²}`, so that `∫ g(t) dt ≈ Σ ŵᵢ g(tᵢ)` for
/// integrands with Gaussian decay.
///
/// Nodes are eigenvalues of the Jacobi matrix; the scaled weights are
/// `1 / Σₖ φₖ(tᵢ)²` over the orthonormal Hermite functions `φₖ`, which stays
/// accurate far into the tails.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    let weights = nodes
        .iter()
        .map(|&t| {
            let mut prev = 0.0;
            let mut cur = PI.powf(-0.25) * (-0.5 * t * t).exp();
            let mut sum = cur * cur;
            for k in 0..n - 1 {
                let next = t * (2.0 / (k + 1) as f64).sqrt() * cur - (k as f64 / (k + 1) as f64).sqrt() * prev;
                prev = cur;
                cur = next;
                sum += cur * cur;
            }
            1.0 / sum
        })
        .collect();
    (nodes, weights)
}
