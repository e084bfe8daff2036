//! Dense kernels shared by the Gaussian engine.
//!
//! Phase-space vectors use interleaved ordering `(x₀, p₀, x₁, p₁, …)`, so mode
//! `k` owns indices `2k` and `2k + 1`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Canonical symplectic form for `num_modes` modes: per-mode blocks `[[0, 1], [-1, 0]]`.
pub fn symplectic_form(num_modes: usize) -> DMatrix<f64> {
    let dim = 2 * num_modes;
    let mut omega = DMatrix::zeros(dim, dim);
    for k in 0..num_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `max |M Ω Mᵀ − Ω|` for a square even-dimensional `m`.
pub fn symplectic_defect(m: &DMatrix<f64>) -> f64 {
    let omega = symplectic_form(m.nrows() / 2);
    max_abs(&(m * &omega * m.transpose() - omega))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn hermitian_min_eigenvalue(m: DMatrix<Complex64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    m.symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v))
}

/// Smallest eigenvalue of `real + i·imag`, both given as real matrices.
pub fn min_eigenvalue_re_im(real: &DMatrix<f64>, imag: &DMatrix<f64>) -> f64 {
    let m = DMatrix::from_fn(real.nrows(), real.ncols(), |r, c| {
        Complex64::new(real[(r, c)], imag[(r, c)])
    });
    hermitian_min_eigenvalue(m)
}

/// Applies `r[idx] ← X r[idx] + d` and `V ← X V Xᵀ + Y` where `X` and `Y`
/// act only on the listed indices.
///
/// Touches `O(k·n)` entries. Cross-covariances are written to both triangles
/// from the same value and the diagonal block is symmetrized, so the result is
/// exactly symmetric; entries outside the touched rows and columns are left
/// bit-identical.
pub fn apply_local(
    mean: &mut DVector<f64>,
    cov: &mut DMatrix<f64>,
    idx: &[usize],
    x: &DMatrix<f64>,
    y: Option<&DMatrix<f64>>,
    displacement: Option<&[f64]>,
) {
    let k = idx.len();
    debug_assert_eq!(x.nrows(), k);
    debug_assert_eq!(x.ncols(), k);
    let n = cov.nrows();

    let local: Vec<f64> = idx.iter().map(|&i| mean[i]).collect();
    for a in 0..k {
        let mut acc = 0.0;
        for b in 0..k {
            acc += x[(a, b)] * local[b];
        }
        if let Some(d) = displacement {
            acc += d[a];
        }
        mean[idx[a]] = acc;
    }

    let mut column = vec![0.0; k];
    let mut updated = vec![0.0; k];
    for j in 0..n {
        if idx.contains(&j) {
            continue;
        }
        for a in 0..k {
            column[a] = cov[(idx[a], j)];
        }
        for a in 0..k {
            let mut acc = 0.0;
            for b in 0..k {
                acc += x[(a, b)] * column[b];
            }
            updated[a] = acc;
        }
        for a in 0..k {
            cov[(idx[a], j)] = updated[a];
            cov[(j, idx[a])] = updated[a];
        }
    }

    let block = DMatrix::from_fn(k, k, |a, b| cov[(idx[a], idx[b])]);
    let mut block = x * block * x.transpose();
    if let Some(y) = y {
        block += y;
    }
    for a in 0..k {
        for b in 0..k {
            cov[(idx[a], idx[b])] = 0.5 * (block[(a, b)] + block[(b, a)]);
        }
    }
}

/// Gaussian conditioning followed by removal of one mode.
///
/// `removed` holds the two (sorted) phase-space indices of the mode that is
/// consumed. `conditioned` lists the variables that were observed (a subset
/// of `removed`), `factor` is a matrix `F` with `F Fᵀ = K`, the (pseudo-)inverse
/// of the observed-variable covariance, and `residual` is the observed value
/// minus its prior mean. The update is
///
/// ```text
/// V_BB ← V_BB − V_BA K V_AB,     r_B ← r_B + V_BA K residual
/// ```
///
/// written in place while compacting the storage; the rank-k correction is
/// formed as `Σ_a g_a gᵀ_a` with `g = Fᵀ V_AB`, which keeps the output exactly
/// symmetric.
pub fn condition_and_remove(
    mean: &mut DVector<f64>,
    cov: &mut DMatrix<f64>,
    removed: [usize; 2],
    conditioned: &[usize],
    factor: &DMatrix<f64>,
    residual: &[f64],
) {
    let n = cov.nrows();
    let m = conditioned.len();
    debug_assert!(removed[0] < removed[1] && removed[1] < n);

    // Gain for the mean: K residual = F (Fᵀ residual).
    let mut f_res = vec![0.0; m];
    for a in 0..m {
        for b in 0..m {
            f_res[a] += factor[(b, a)] * residual[b];
        }
    }
    let mut k_res = vec![0.0; m];
    for a in 0..m {
        for b in 0..m {
            k_res[a] += factor[(a, b)] * f_res[b];
        }
    }

    let columns: Vec<Vec<f64>> = conditioned
        .iter()
        .map(|&c| cov.column(c).iter().copied().collect())
        .collect();
    let g: Vec<Vec<f64>> = (0..m)
        .map(|a| {
            (0..n)
                .map(|i| (0..m).map(|b| factor[(b, a)] * columns[b][i]).sum())
                .collect()
        })
        .collect();

    let keep = |i: usize| i != removed[0] && i != removed[1];

    let mut new_mean = Vec::with_capacity(n - 2);
    for i in (0..n).filter(|&i| keep(i)) {
        let mut shift = 0.0;
        for a in 0..m {
            shift += columns[a][i] * k_res[a];
        }
        new_mean.push(mean[i] + shift);
    }

    let reduced = n - 2;
    let mut data: Vec<f64> = std::mem::replace(cov, DMatrix::zeros(0, 0)).data.into();
    let ranges = [0..removed[0], removed[0] + 1..removed[1], removed[1] + 1..n];
    let mut dest = 0;
    for j in (0..n).filter(|&j| keep(j)) {
        let col_start = j * n;
        for range in ranges.iter().cloned() {
            let src = col_start + range.start;
            let len = range.len();
            // dest ≤ src, so the compaction can run front to back in place.
            match g.as_slice() {
                [] => data.copy_within(src..src + len, dest),
                [g0] => {
                    let c0 = g0[j];
                    for (t, i) in range.enumerate() {
                        data[dest + t] = data[src + t] - g0[i] * c0;
                    }
                }
                _ => {
                    for (t, i) in range.enumerate() {
                        let corr: f64 = g.iter().map(|ga| ga[i] * ga[j]).sum();
                        data[dest + t] = data[src + t] - corr;
                    }
                }
            }
            dest += len;
        }
    }
    data.truncate(reduced * reduced);
    *cov = DMatrix::from_vec(reduced, reduced, data);
    *mean = DVector::from_vec(new_mean);
}

/// Removes one mode without conditioning (partial trace).
pub fn remove_mode(mean: &mut DVector<f64>, cov: &mut DMatrix<f64>, mode: usize) {
    let empty = DMatrix::zeros(0, 0);
    condition_and_remove(mean, cov, [2 * mode, 2 * mode + 1], &[], &empty, &[]);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_squares_to_minus_identity() {
        let omega = symplectic_form(3);
        let sq = &omega * &omega;
        assert_eq!(sq, -DMatrix::identity(6, 6));
        assert_eq!(omega.transpose(), -omega);
    }

    #[test]
    fn conditioning_matches_dense_schur_complement() {
        // Random SPD 6x6 covariance, condition on x of mode 1.
        let a = DMatrix::from_fn(6, 6, |r, c| ((r * 7 + c * 3) % 5) as f64 * 0.3 - 0.4);
        let cov0 = &a * a.transpose() + DMatrix::identity(6, 6);
        let mean0 = DVector::from_fn(6, |i, _| i as f64 * 0.1);
        let v = cov0[(2, 2)];
        let factor = DMatrix::from_element(1, 1, 1.0 / v.sqrt());
        let residual = [0.7 - mean0[2]];

        let mut mean = mean0.clone();
        let mut cov = cov0.clone();
        condition_and_remove(&mut mean, &mut cov, [2, 3], &[2], &factor, &residual);

        let keep = [0usize, 1, 4, 5];
        for (a, &i) in keep.iter().enumerate() {
            let expected_mean = mean0[i] + cov0[(i, 2)] / v * residual[0];
            assert!((mean[a] - expected_mean).abs() < 1e-14);
            for (b, &j) in keep.iter().enumerate() {
                let expected = cov0[(i, j)] - cov0[(i, 2)] * cov0[(2, j)] / v;
                assert!((cov[(a, b)] - expected).abs() < 1e-13);
                assert_eq!(cov[(a, b)], cov[(b, a)]);
            }
        }
    }

    #[test]
    fn remove_mode_is_a_plain_submatrix() {
        let cov0 = DMatrix::from_fn(4, 4, |r, c| (r + c) as f64 + if r == c { 5.0 } else { 0.0 });
        let mut cov = cov0.clone();
        let mut mean = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        remove_mode(&mut mean, &mut cov, 0);
        assert_eq!(mean.as_slice(), &[3.0, 4.0]);
        assert_eq!(cov, cov0.view((2, 2), (2, 2)).into_owned());
    }
}
