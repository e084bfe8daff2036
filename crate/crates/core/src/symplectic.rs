//! Symplectic matrices for the Gaussian unitaries.
//!
//! Conventions (vacuum covariance = identity, interleaved quadratures):
//!
//! * rotation by `θ`: `x → x cos θ + p sin θ`, `p → −x sin θ + p cos θ`
//! * squeezing with `s > 0`, `φ = 0`: `x → e^{−s} x`, `p → e^{s} p`
//! * two-mode squeezing: `x_a → cosh s·x_a + sinh s·x_b`, `p_a → cosh s·p_a − sinh s·p_b`
//! * beamsplitter: `a → cos θ·a + e^{iφ} sin θ·b`, `b → −e^{−iφ} sin θ·a + cos θ·b`
//!
//! Each matrix maps the Heisenberg-picture quadratures, so states update as
//! `r → S r`, `V → S V Sᵀ`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::symplectic_defect;

/// Default symplectic tolerance on `max |S Ω Sᵀ − Ω|`.
pub const TAU_SYM: f64 = 1e-10;

/// A symplectic matrix acting on an ordered list of modes.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix {
    entries: DMatrix<f64>,
    modes: Vec<usize>,
}

impl SymplecticMatrix {
    /// Validates `S Ω Sᵀ = Ω` within [`TAU_SYM`].
    pub fn new(entries: DMatrix<f64>, modes: Vec<usize>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() != 2 * modes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for {} modes",
                entries.nrows(),
                entries.ncols(),
                modes.len()
            )));
        }
        for (i, m) in modes.iter().enumerate() {
            if modes[..i].contains(m) {
                return Err(Error::SameMode(*m));
            }
        }
        let defect = symplectic_defect(&entries);
        if !(defect <= TAU_SYM) {
            return Err(Error::NotSymplectic { defect });
        }
        Ok(Self { entries, modes })
    }

    /// A matrix acting on modes `0..N`.
    pub fn on_all_modes(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows() / 2;
        Self::new(entries, (0..n).collect())
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn rotation(mode: usize, theta: f64) -> Self {
        Self {
            entries: rotation_block(theta),
            modes: vec![mode],
        }
    }

    pub fn squeezer(mode: usize, s: f64, phi: f64) -> Self {
        Self {
            entries: squeezer_block(s, phi),
            modes: vec![mode],
        }
    }

    pub fn two_mode_squeezer(mode_a: usize, mode_b: usize, s: f64) -> Self {
        Self {
            entries: two_mode_squeezer_block(s),
            modes: vec![mode_a, mode_b],
        }
    }

    pub fn beamsplitter(mode_a: usize, mode_b: usize, theta: f64, phi: f64) -> Self {
        Self {
            entries: beamsplitter_block(theta, phi),
            modes: vec![mode_a, mode_b],
        }
    }

    /// Embeds the matrix into the full `2N × 2N` phase space.
    pub fn to_full(&self, num_modes: usize) -> DMatrix<f64> {
        let mut full = DMatrix::identity(2 * num_modes, 2 * num_modes);
        let idx: Vec<usize> = self.modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                full[(i, j)] = self.entries[(a, b)];
            }
        }
        full
    }
}

pub(crate) fn rotation_block(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, s, -s, c])
}

pub(crate) fn squeezer_block(s: f64, phi: f64) -> DMatrix<f64> {
    let (ch, sh) = (s.cosh(), s.sinh());
    let (sp, cp) = phi.sin_cos();
    DMatrix::from_row_slice(
        2,
        2,
        &[ch - sh * cp, -sh * sp, -sh * sp, ch + sh * cp],
    )
}

pub(crate) fn two_mode_squeezer_block(s: f64) -> DMatrix<f64> {
    let (c, h) = (s.cosh(), s.sinh());
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        c, 0.0, h, 0.0,
        0.0, c, 0.0, -h,
        h, 0.0, c, 0.0,
        0.0, -h, 0.0, c,
    ]);
    m
}

pub(crate) fn beamsplitter_block(theta: f64, phi: f64) -> DMatrix<f64> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        ct, 0.0, st * cp, -st * sp,
        0.0, ct, st * sp, st * cp,
        -st * cp, -st * sp, ct, 0.0,
        st * sp, -st * cp, 0.0, ct,
    ]);
    m
}
