//! Gaussian measurements with conditional collapse.
//!
//! Every measurement consumes its mode: the returned state has one mode fewer
//! and later modes shift down by one index.

use std::convert::Infallible;

use nalgebra::{DMatrix, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::citation;
use crate::error::{finite, Error, Result};
use crate::linalg::condition_and_remove;
use crate::state::GaussianState;

/// Variances below this are treated as zero by the homodyne pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-12;
/// Vacuum-branch probabilities below this are reported as degenerate.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Deterministic per-shot random source. Equal `(seed, shot_index)` pairs
/// replay the same draws.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    shot_index: u64,
    counter: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, shot_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shot_index);
        Self {
            seed,
            shot_index,
            counter: 0,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn shot_index(&self) -> u64 {
        self.shot_index
    }

    /// Number of draws taken so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.counter += 1;
        self.rng.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.counter += 1;
        self.rng.random::<f64>()
    }
}

/// Value recorded by a measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OutcomeValue {
    Scalar(f64),
    Pair([f64; 2]),
}

impl OutcomeValue {
    /// The value seen by feedforward expressions; heterodyne feeds its x part.
    pub fn scalar(&self) -> f64 {
        match *self {
            OutcomeValue::Scalar(v) => v,
            OutcomeValue::Pair([x, _]) => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MeasurementKind {
    Homodyne { angle: f64, efficiency: f64 },
    Heterodyne,
    VacuumFlag,
    /// Photon number, produced only by the Fock oracle.
    PhotonNumber,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementOutcome {
    pub register: String,
    /// Index of the mode at the time it was measured.
    pub mode: usize,
    pub kind: MeasurementKind,
    pub value: OutcomeValue,
}

impl GaussianState {
    fn prepare_homodyne(&mut self, mode: usize, angle: f64, efficiency: f64) -> Result<()> {
        self.check_mode(mode)?;
        finite("angle", angle)?;
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "efficiency",
                value: efficiency,
                reason: "detector efficiency must lie in (0, 1]",
            });
        }
        if efficiency < 1.0 {
            self.loss(mode, efficiency)?;
        }
        self.phase_rotate(mode, angle)
    }

    /// Mean and variance of the homodyne outcome for quadrature
    /// `x cos(angle) + p sin(angle)` seen through a detector of the given efficiency.
    pub fn homodyne_distribution(&self, mode: usize, angle: f64, efficiency: f64) -> Result<(f64, f64)> {
        let mut prepared = self.reduced(&[mode])?;
        prepared.prepare_homodyne(0, angle, efficiency)?;
        Ok((prepared.mean()[0], prepared.cov()[(0, 0)]))
    }

    /// Lossy homodyne detection of `x cos(angle) + p sin(angle)`: samples an
    /// outcome, conditions the remaining modes on it and removes the mode.
    pub fn homodyne(
        &mut self,
        mode: usize,
        angle: f64,
        efficiency: f64,
        rng: &mut RandomStream,
    ) -> Result<f64> {
        self.prepare_homodyne(mode, angle, efficiency)?;
        let i = 2 * mode;
        let outcome = self.mean()[i] + self.cov()[(i, i)].sqrt() * rng.standard_normal();
        self.condition_x(mode, outcome);
        Ok(outcome)
    }

    /// As [`GaussianState::homodyne`] but conditions on a given outcome.
    pub fn homodyne_conditioned(&mut self, mode: usize, angle: f64, efficiency: f64, outcome: f64) -> Result<()> {
        finite("outcome", outcome)?;
        self.prepare_homodyne(mode, angle, efficiency)?;
        self.condition_x(mode, outcome);
        Ok(())
    }

    fn condition_x(&mut self, mode: usize, outcome: f64) {
        let i = 2 * mode;
        let variance = self.cov()[(i, i)];
        let inv_sqrt = if variance > PINV_CUTOFF {
            1.0 / variance.sqrt()
        } else {
            0.0
        };
        let factor = DMatrix::from_element(1, 1, inv_sqrt);
        let residual = [outcome - self.mean()[i]];
        let (mean, cov) = self.parts_mut();
        condition_and_remove(mean, cov, [i, i + 1], &[i], &factor, &residual);
    }

    /// Conditions on a coherent-state projection with outcome `(mx, mp)`
    /// (quadrature units), i.e. a Gaussian smoothing of `I` on the mode block.
    fn condition_coherent(&mut self, mode: usize, outcome: Vector2<f64>) {
        let (r, v) = self.mode_moments(mode).expect("mode checked by caller");
        let smoothed = v + Matrix2::identity();
        let l = smoothed.cholesky().expect("V + I is positive definite").l();
        let l_inv_t = l.try_inverse().expect("triangular factor is invertible").transpose();
        let factor = DMatrix::from_column_slice(2, 2, l_inv_t.as_slice());
        let residual = outcome - r;
        let i = 2 * mode;
        let (mean, cov) = self.parts_mut();
        condition_and_remove(mean, cov, [i, i + 1], &[i, i + 1], &factor, residual.as_slice());
    }

    /// Heterodyne detection. Outcomes are in quadrature units with covariance
    /// `V_mode + I` (so `2I` for vacuum).
    pub fn heterodyne(&mut self, mode: usize, rng: &mut RandomStream) -> Result<[f64; 2]> {
        let (r, v) = self.mode_moments(mode)?;
        let l = (v + Matrix2::identity())
            .cholesky()
            .ok_or_else(|| Error::DimensionMismatch("mode covariance is not positive".into()))?
            .l();
        let z = Vector2::new(rng.standard_normal(), rng.standard_normal());
        let m = r + l * z;
        self.condition_coherent(mode, m);
        Ok([m[0], m[1]])
    }

    pub fn heterodyne_conditioned(&mut self, mode: usize, outcome: [f64; 2]) -> Result<()> {
        self.check_mode(mode)?;
        finite("outcome", outcome[0])?;
        finite("outcome", outcome[1])?;
        self.condition_coherent(mode, Vector2::new(outcome[0], outcome[1]));
        Ok(())
    }

    /// `⟨0|ρ_mode|0⟩ = 2/√det(V+I) · exp(−½ rᵀ (V+I)⁻¹ r)`.
    pub fn vacuum_projection_prob(&self, mode: usize) -> Result<f64> {
        let (r, v) = self.mode_moments(mode)?;
        let smoothed = v + Matrix2::identity();
        let inv = smoothed
            .try_inverse()
            .ok_or_else(|| Error::DimensionMismatch("mode covariance is singular".into()))?;
        let quad = (r.transpose() * inv * r)[0];
        Ok((2.0 / smoothed.determinant().sqrt() * (-0.5 * quad).exp()).clamp(0.0, 1.0))
    }

    /// Post-selects the no-click branch of an ideal photodetector on `mode`.
    /// Returns the branch probability; the mode is removed.
    pub fn condition_on_no_absorption(&mut self, mode: usize) -> Result<f64> {
        let probability = self.vacuum_projection_prob(mode)?;
        if probability < PROBABILITY_FLOOR {
            return Err(Error::DegenerateOutcome { probability });
        }
        self.condition_coherent(mode, Vector2::zeros());
        Ok(probability)
    }

    /// The click branch is not a Gaussian map; this always fails with
    /// [`Error::NonGaussianOutcome`] carrying `1 − p_vacuum`.
    pub fn condition_on_absorption(&self, mode: usize) -> Result<Infallible> {
        let p_vacuum = self.vacuum_projection_prob(mode)?;
        Err(Error::NonGaussianOutcome {
            p_absorb: 1.0 - p_vacuum,
            citation: citation::absorption_branch(),
        })
    }
}
