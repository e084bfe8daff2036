//! N-mode Gaussian states and the Gaussian unitaries acting on them.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{finite, Error, Result};
use crate::linalg::{self, apply_local, symplectic_form};
use crate::symplectic::{self, SymplecticMatrix};

/// Floor for the smallest eigenvalue of `V + iΩ`.
pub const TAU_PSD: f64 = 1e-8;
/// Tolerance for composition and purity checks.
pub const TAU_NUM: f64 = 1e-9;

/// A Gaussian state of `N` modes described by its mean vector and covariance
/// matrix in interleaved `(x₀, p₀, x₁, p₁, …)` ordering, with the vacuum
/// covariance normalized to the identity.
///
/// Gates mutate the state in place; clone first to keep the input.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn vacuum(num_modes: usize) -> Self {
        Self {
            mean: DVector::zeros(2 * num_modes),
            cov: DMatrix::identity(2 * num_modes, 2 * num_modes),
        }
    }

    /// Builds a state from raw moments. Checks shape and symmetry only; use
    /// [`GaussianState::uncertainty_min_eigenvalue`] for physicality.
    pub fn from_moments(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if mean.len() % 2 != 0 || cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "mean of length {} with {}x{} covariance",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        let asym = linalg::max_abs(&(&cov - cov.transpose()));
        if !(asym <= symplectic::TAU_SYM) {
            return Err(Error::DimensionMismatch(format!(
                "covariance is not symmetric (defect {asym:e})"
            )));
        }
        Ok(Self { mean, cov })
    }

    /// Single-mode coherent state with the given quadrature means.
    pub fn coherent(x: f64, p: f64) -> Self {
        let mut state = Self::vacuum(1);
        state.mean[0] = x;
        state.mean[1] = p;
        state
    }

    /// Single-mode squeezed vacuum.
    pub fn squeezed(s: f64, phi: f64) -> Result<Self> {
        let mut state = Self::vacuum(1);
        state.squeeze(0, s, phi)?;
        Ok(state)
    }

    /// Single-mode thermal state with mean photon number `n`.
    pub fn thermal(n: f64) -> Result<Self> {
        if !(n >= 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter {
                name: "n",
                value: n,
                reason: "mean photon number must be finite and non-negative",
            });
        }
        let mut state = Self::vacuum(1);
        state.cov *= 2.0 * n + 1.0;
        Ok(state)
    }

    pub fn num_modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut DVector<f64>, &mut DMatrix<f64>) {
        (&mut self.mean, &mut self.cov)
    }

    pub(crate) fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.num_modes() {
            Ok(())
        } else {
            Err(Error::ModeOutOfRange {
                mode,
                num_modes: self.num_modes(),
            })
        }
    }

    pub(crate) fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        self.check_mode(a)?;
        self.check_mode(b)?;
        if a == b {
            return Err(Error::SameMode(a));
        }
        Ok(())
    }

    /// Mean and covariance block of one mode.
    pub fn mode_moments(&self, mode: usize) -> Result<(Vector2<f64>, Matrix2<f64>)> {
        self.check_mode(mode)?;
        let i = 2 * mode;
        let mean = Vector2::new(self.mean[i], self.mean[i + 1]);
        let cov = Matrix2::new(
            self.cov[(i, i)],
            self.cov[(i, i + 1)],
            self.cov[(i + 1, i)],
            self.cov[(i + 1, i + 1)],
        );
        Ok((mean, cov))
    }

    /// Reduced state of the listed modes, in the listed order.
    pub fn reduced(&self, modes: &[usize]) -> Result<GaussianState> {
        for &m in modes {
            self.check_mode(m)?;
        }
        let idx: Vec<usize> = modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        let mean = DVector::from_fn(idx.len(), |a, _| self.mean[idx[a]]);
        let cov = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.cov[(idx[a], idx[b])]);
        Ok(Self { mean, cov })
    }

    /// Tensor product `self ⊗ other`; the new modes are appended.
    pub fn append(&mut self, other: &GaussianState) {
        self.append_all(std::slice::from_ref(other));
    }

    /// Appends several independent states with a single reallocation.
    pub fn append_all(&mut self, others: &[GaussianState]) {
        let n = self.mean.len();
        let added: usize = others.iter().map(|o| o.mean.len()).sum();
        if added == 0 {
            return;
        }
        let total = n + added;
        let mut mean = Vec::with_capacity(total);
        mean.extend(self.mean.iter());
        for o in others {
            mean.extend(o.mean.iter());
        }
        // Grow the existing column-major buffer in place (large states would
        // otherwise pay for a fresh allocation on every append), moving the
        // old columns from last to first.
        let mut data: Vec<f64> = std::mem::replace(&mut self.cov, DMatrix::zeros(0, 0)).data.into();
        data.resize(total * total, 0.0);
        for j in (0..n).rev() {
            data.copy_within(j * n..(j + 1) * n, j * total);
            data[j * total + n..(j + 1) * total].fill(0.0);
        }
        let mut offset = n;
        for o in others {
            let m = o.mean.len();
            for b in 0..m {
                for a in 0..m {
                    data[(offset + b) * total + offset + a] = o.cov[(a, b)];
                }
            }
            offset += m;
        }
        self.mean = DVector::from_vec(mean);
        self.cov = DMatrix::from_vec(total, total, data);
    }

    /// Removes a mode by partial trace.
    pub fn trace_out(&mut self, mode: usize) -> Result<()> {
        self.check_mode(mode)?;
        linalg::remove_mode(&mut self.mean, &mut self.cov, mode);
        Ok(())
    }

    pub fn displace(&mut self, mode: usize, dx: f64, dp: f64) -> Result<()> {
        self.check_mode(mode)?;
        finite("dx", dx)?;
        finite("dp", dp)?;
        self.mean[2 * mode] += dx;
        self.mean[2 * mode + 1] += dp;
        Ok(())
    }

    /// Phase rotation, `x → x cos θ + p sin θ`.
    pub fn phase_rotate(&mut self, mode: usize, theta: f64) -> Result<()> {
        self.check_mode(mode)?;
        finite("theta", theta)?;
        self.apply_block(&[mode], &symplectic::rotation_block(theta));
        Ok(())
    }

    /// Single-mode squeezing; `s > 0` with `phi = 0` shrinks the x variance to `e^{−2s}`.
    pub fn squeeze(&mut self, mode: usize, s: f64, phi: f64) -> Result<()> {
        self.check_mode(mode)?;
        finite("s", s)?;
        finite("phi", phi)?;
        self.apply_block(&[mode], &symplectic::squeezer_block(s, phi));
        Ok(())
    }

    pub fn two_mode_squeeze(&mut self, mode_a: usize, mode_b: usize, s: f64) -> Result<()> {
        self.check_pair(mode_a, mode_b)?;
        finite("s", s)?;
        self.apply_block(&[mode_a, mode_b], &symplectic::two_mode_squeezer_block(s));
        Ok(())
    }

    /// Passive mixer with transmissivity `cos²θ`.
    pub fn beamsplitter(&mut self, mode_a: usize, mode_b: usize, theta: f64, phi: f64) -> Result<()> {
        self.check_pair(mode_a, mode_b)?;
        finite("theta", theta)?;
        finite("phi", phi)?;
        self.apply_block(&[mode_a, mode_b], &symplectic::beamsplitter_block(theta, phi));
        Ok(())
    }

    pub fn apply_symplectic(&mut self, s: &SymplecticMatrix) -> Result<()> {
        for &m in s.modes() {
            self.check_mode(m)?;
        }
        self.apply_block(s.modes(), s.entries());
        Ok(())
    }

    fn apply_block(&mut self, modes: &[usize], block: &DMatrix<f64>) {
        let idx: Vec<usize> = modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        apply_local(&mut self.mean, &mut self.cov, &idx, block, None, None);
    }

    /// Smallest eigenvalue of the Hermitian matrix `V + iΩ`; non-negative
    /// (up to rounding) for every physical state.
    pub fn uncertainty_min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue_re_im(&self.cov, &symplectic_form(self.num_modes()))
    }

    pub fn symmetry_defect(&self) -> f64 {
        linalg::max_abs(&(&self.cov - self.cov.transpose()))
    }

    /// Symmetric and satisfying the uncertainty relation within [`TAU_PSD`].
    pub fn is_physical(&self) -> bool {
        self.symmetry_defect() <= symplectic::TAU_SYM
            && self.uncertainty_min_eigenvalue() >= -TAU_PSD
    }

    /// `det V`; equals 1 for pure states.
    pub fn cov_determinant(&self) -> f64 {
        self.cov.determinant()
    }

    /// Mean photon number of one mode, `(tr V_k + |r_k|²)/4 − 1/2`.
    pub fn mean_photon_number(&self, mode: usize) -> Result<f64> {
        let (r, v) = self.mode_moments(mode)?;
        Ok((v.trace() + r.norm_squared()) / 4.0 - 0.5)
    }
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    num_modes: usize,
    mean: Vec<f64>,
    /// Row-major.
    cov: Vec<f64>,
}

impl Serialize for GaussianState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let dim = self.mean.len();
        let cov = (0..dim)
            .flat_map(|r| (0..dim).map(move |c| (r, c)))
            .map(|(r, c)| self.cov[(r, c)])
            .collect();
        StateRepr {
            num_modes: self.num_modes(),
            mean: self.mean.iter().copied().collect(),
            cov,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GaussianState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = StateRepr::deserialize(deserializer)?;
        let dim = 2 * repr.num_modes;
        if repr.mean.len() != dim || repr.cov.len() != dim * dim {
            return Err(serde::de::Error::custom("state arrays do not match num_modes"));
        }
        let mean = DVector::from_vec(repr.mean);
        let cov = DMatrix::from_row_slice(dim, dim, &repr.cov);
        GaussianState::from_moments(mean, cov).map_err(serde::de::Error::custom)
    }
}
