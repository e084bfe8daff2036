//! Gaussian completely positive maps `V → X V Xᵀ + Y`, `r → X r + d`.

use nalgebra::{DMatrix, DVector};

use crate::error::{finite, Error, Result};
use crate::linalg::{self, apply_local, symplectic_form};
use crate::state::{GaussianState, TAU_PSD};
use crate::symplectic::TAU_SYM;

/// A Gaussian channel acting on an ordered list of `M` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianChannel {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    modes: Vec<usize>,
    displacement: Option<DVector<f64>>,
}

impl GaussianChannel {
    /// Validates shapes, symmetry of `Y` and complete positivity
    /// `Y + i(Ω − X Ω Xᵀ) ⪰ −τ_psd`.
    pub fn new(
        x: DMatrix<f64>,
        y: DMatrix<f64>,
        modes: Vec<usize>,
        displacement: Option<DVector<f64>>,
    ) -> Result<Self> {
        let dim = 2 * modes.len();
        if x.shape() != (dim, dim) || y.shape() != (dim, dim) {
            return Err(Error::DimensionMismatch(format!(
                "X is {:?}, Y is {:?}, expected {dim}x{dim}",
                x.shape(),
                y.shape()
            )));
        }
        if let Some(d) = &displacement {
            if d.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "displacement of length {}, expected {dim}",
                    d.len()
                )));
            }
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                name: "channel",
                value: f64::NAN,
            });
        }
        for (i, m) in modes.iter().enumerate() {
            if modes[..i].contains(m) {
                return Err(Error::SameMode(*m));
            }
        }
        let asym = linalg::max_abs(&(&y - y.transpose()));
        if asym > TAU_SYM {
            return Err(Error::DimensionMismatch(format!(
                "Y is not symmetric (defect {asym:e})"
            )));
        }
        let ch = Self {
            x,
            y,
            modes,
            displacement,
        };
        let min_eigenvalue = ch.cp_min_eigenvalue();
        if min_eigenvalue < -TAU_PSD {
            return Err(Error::CpViolation { min_eigenvalue });
        }
        Ok(ch)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn displacement(&self) -> Option<&DVector<f64>> {
        self.displacement.as_ref()
    }

    /// Smallest eigenvalue of `Y + i(Ω − X Ω Xᵀ)`.
    pub fn cp_min_eigenvalue(&self) -> f64 {
        let omega = symplectic_form(self.modes.len());
        let imag = &omega - &self.x * &omega * self.x.transpose();
        linalg::min_eigenvalue_re_im(&self.y, &imag)
    }

    pub fn identity(modes: Vec<usize>) -> Self {
        let dim = 2 * modes.len();
        Self {
            x: DMatrix::identity(dim, dim),
            y: DMatrix::zeros(dim, dim),
            modes,
            displacement: None,
        }
    }

    /// Pure loss with transmissivity `eta`.
    pub fn loss(mode: usize, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter {
                name: "eta",
                value: eta,
                reason: "transmissivity must lie in [0, 1]",
            });
        }
        Ok(Self {
            x: DMatrix::identity(2, 2) * eta.sqrt(),
            y: DMatrix::identity(2, 2) * (1.0 - eta),
            modes: vec![mode],
            displacement: None,
        })
    }

    /// Phase-insensitive amplifier with gain `G ≥ 1`.
    pub fn amplifier(mode: usize, gain: f64) -> Result<Self> {
        if !(gain >= 1.0) || !gain.is_finite() {
            return Err(Error::InvalidParameter {
                name: "gain",
                value: gain,
                reason: "gain must be finite and at least 1",
            });
        }
        Ok(Self {
            x: DMatrix::identity(2, 2) * gain.sqrt(),
            y: DMatrix::identity(2, 2) * (gain - 1.0),
            modes: vec![mode],
            displacement: None,
        })
    }

    /// Classical additive noise of variance `n` in both quadratures.
    pub fn additive_noise(mode: usize, n: f64) -> Result<Self> {
        if !(n >= 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter {
                name: "n",
                value: n,
                reason: "noise variance must be finite and non-negative",
            });
        }
        Ok(Self {
            x: DMatrix::identity(2, 2),
            y: DMatrix::identity(2, 2) * n,
            modes: vec![mode],
            displacement: None,
        })
    }

    /// `next ∘ self`: `(X₂X₁, X₂Y₁X₂ᵀ + Y₂)`, displacement `X₂d₁ + d₂`.
    /// Both channels must act on the same ordered modes.
    pub fn then(&self, next: &GaussianChannel) -> Result<GaussianChannel> {
        if self.modes != next.modes {
            return Err(Error::DimensionMismatch(
                "composed channels must act on the same modes".into(),
            ));
        }
        let x = &next.x * &self.x;
        let y = &next.x * &self.y * next.x.transpose() + &next.y;
        let y = (&y + y.transpose()) * 0.5;
        let displacement = match (&self.displacement, &next.displacement) {
            (None, None) => None,
            (d1, d2) => {
                let dim = x.nrows();
                let d1 = d1.clone().unwrap_or_else(|| DVector::zeros(dim));
                let d2 = d2.clone().unwrap_or_else(|| DVector::zeros(dim));
                Some(&next.x * d1 + d2)
            }
        };
        Ok(GaussianChannel {
            x,
            y,
            modes: self.modes.clone(),
            displacement,
        })
    }
}

impl GaussianState {
    /// Applies a validated channel on its target modes; cross-covariances with
    /// untouched modes transform by `X` on the touched side.
    pub fn apply_channel(&mut self, ch: &GaussianChannel) -> Result<()> {
        for &m in &ch.modes {
            self.check_mode(m)?;
        }
        let idx: Vec<usize> = ch.modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        let (mean, cov) = self.parts_mut();
        apply_local(
            mean,
            cov,
            &idx,
            &ch.x,
            Some(&ch.y),
            ch.displacement.as_ref().map(|d| d.as_slice()),
        );
        Ok(())
    }

    /// Loss with transmissivity `eta ∈ [0, 1]`.
    pub fn loss(&mut self, mode: usize, eta: f64) -> Result<()> {
        self.check_mode(mode)?;
        self.apply_channel(&GaussianChannel::loss(mode, eta)?)
    }

    /// Phase-insensitive amplification with gain `G ≥ 1`.
    pub fn amplify(&mut self, mode: usize, gain: f64) -> Result<()> {
        self.check_mode(mode)?;
        self.apply_channel(&GaussianChannel::amplifier(mode, gain)?)
    }

    pub fn add_noise(&mut self, mode: usize, n: f64) -> Result<()> {
        self.check_mode(mode)?;
        finite("n", n)?;
        self.apply_channel(&GaussianChannel::additive_noise(mode, n)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn epr(s: f64) -> GaussianState {
        let mut st = GaussianState::vacuum(2);
        st.two_mode_squeeze(0, 1, s).unwrap();
        st.displace(0, 0.4, -0.3).unwrap();
        st
    }

    #[test]
    fn identity_channel_is_a_no_op() {
        let mut s = epr(0.5);
        let before = s.clone();
        s.apply_channel(&GaussianChannel::identity(vec![1])).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn generic_channel_reproduces_loss() {
        let eta: f64 = 0.63;
        let ch = GaussianChannel::new(
            DMatrix::identity(2, 2) * eta.sqrt(),
            DMatrix::identity(2, 2) * (1.0 - eta),
            vec![0],
            None,
        )
        .unwrap();
        let mut a = epr(0.7);
        let mut b = a.clone();
        a.apply_channel(&ch).unwrap();
        b.loss(0, eta).unwrap();
        assert_eq!(a, b);
        assert!((a.cov()[(0, 2)] - eta.sqrt() * 1.4f64.sinh()).abs() < 1e-14);
    }

    #[test]
    fn negative_noise_violates_cp() {
        let err = GaussianChannel::new(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2) * -0.1,
            vec![0],
            None,
        )
        .unwrap_err();
        match err {
            Error::CpViolation { min_eigenvalue } => assert!((min_eigenvalue + 0.1).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn loss_edge_cases() {
        let mut s = epr(0.5);
        let before = s.clone();
        s.loss(1, 1.0).unwrap();
        assert_eq!(s, before);
        s.loss(0, 0.0).unwrap();
        let (r, v) = s.mode_moments(0).unwrap();
        assert_eq!(r.norm(), 0.0);
        assert!((v - nalgebra::Matrix2::identity()).norm() < 1e-15);
        for c in 2..4 {
            assert_eq!(s.cov()[(0, c)], 0.0);
            assert_eq!(s.cov()[(1, c)], 0.0);
        }
        assert!(s.loss(0, 1.2).is_err());
        assert!(s.loss(0, -0.1).is_err());
    }

    #[test]
    fn amplifier_on_vacuum_saturates_bound() {
        let mut s = GaussianState::vacuum(1);
        s.amplify(0, 1.0).unwrap();
        assert_eq!(s, GaussianState::vacuum(1));
        s.amplify(0, 2.0).unwrap();
        assert!(max_abs(&(s.cov() - DMatrix::identity(2, 2) * 3.0)) < 1e-15);
        assert!(GaussianChannel::amplifier(0, 2.0).unwrap().cp_min_eigenvalue().abs() < 1e-12);
        assert!(s.amplify(0, 0.9).is_err());
    }

    #[test]
    fn amplify_then_matching_loss_adds_noise() {
        // Composed update: G·I + (G−1)·I then (1/G)(·) + (1 − 1/G)·I.
        for &g in &[1.5, 2.0, 4.0] {
            let mut s = GaussianState::vacuum(1);
            s.amplify(0, g).unwrap();
            s.loss(0, 1.0 / g).unwrap();
            let expected = 2.0 * (1.0 - 1.0 / g) + 1.0;
            assert!((s.cov()[(0, 0)] - expected).abs() < 1e-14);
            assert!((s.cov()[(1, 1)] - expected).abs() < 1e-14);
            assert!(expected > 1.0);
        }
    }

    #[test]
    fn noise_is_additive() {
        let mut a = GaussianState::vacuum(1);
        a.add_noise(0, 0.0).unwrap();
        assert_eq!(a, GaussianState::vacuum(1));
        a.add_noise(0, 1.0).unwrap();
        assert_eq!(a.cov(), &(DMatrix::identity(2, 2) * 2.0));
        let mut b = epr(0.3);
        let mut c = b.clone();
        b.add_noise(1, 0.25).unwrap();
        b.add_noise(1, 0.5).unwrap();
        c.add_noise(1, 0.75).unwrap();
        assert!(max_abs(&(b.cov() - c.cov())) < 1e-15);
        assert!(c.add_noise(0, -1.0).is_err());
    }

    #[test]
    fn composition_matches_sequential_application() {
        let ch1 = GaussianChannel::loss(0, 0.4).unwrap();
        let ch2 = GaussianChannel::amplifier(0, 2.5).unwrap();
        let composed = ch1.then(&ch2).unwrap();
        assert!(composed.cp_min_eigenvalue() >= -TAU_PSD);
        let mut a = epr(0.6);
        let mut b = a.clone();
        a.apply_channel(&ch1).unwrap();
        a.apply_channel(&ch2).unwrap();
        b.apply_channel(&composed).unwrap();
        assert!(max_abs(&(a.cov() - b.cov())) < 1e-13);
        assert!((a.mean() - b.mean()).norm() < 1e-14);
    }
}
