//! Truncated number-basis simulation used to cross-check the Gaussian engine.
//!
//! States are dense pure-state tensors with a common cutoff `d` per factor.
//! Mixedness from loss, gain, noise or thermal inputs is carried by extra
//! environment factors (a purification), which are never measured and are
//! traced over when moments are taken. The oracle is deliberately small:
//! at most three live circuit modes and a few million amplitudes.

mod exec;
mod gates;
pub mod quadrature;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use num_complex::Complex64 as C;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::state::GaussianState;

pub use exec::{max_live_modes, oracle_ensemble, oracle_execute, EnsembleMoments, OracleOptions, OracleRun, OutcomePolicy};

/// Largest supported cutoff.
pub const MAX_CUTOFF: usize = 64;
/// Largest number of simultaneously live circuit modes.
pub const MAX_MODES: usize = 3;
/// Largest tensor, in amplitudes.
pub const MAX_AMPLITUDES: usize = 1 << 22;
/// Default bound on accumulated truncation leakage.
pub const DEFAULT_LEAKAGE_BUDGET: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Factor {
    Mode(String),
    Environment,
}

/// A pure state on `factors.len()` truncated oscillators. Amplitudes are
/// stored with the first factor as the slowest index.
#[derive(Debug, Clone)]
pub struct FockState {
    cutoff: usize,
    factors: Vec<Factor>,
    amplitudes: Vec<C>,
    leakage: f64,
}

impl FockState {
    /// The empty product (a single amplitude 1).
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff == 0 || cutoff > MAX_CUTOFF {
            return Err(Error::ResourceLimit(format!(
                "cutoff {cutoff} outside 1..={MAX_CUTOFF}"
            )));
        }
        Ok(Self {
            cutoff,
            factors: Vec::new(),
            amplitudes: vec![C::new(1.0, 0.0)],
            leakage: 0.0,
        })
    }

    /// Number state `|n₀, n₁, …⟩` on named modes.
    pub fn number_state(cutoff: usize, photons: &[(&str, usize)]) -> Result<Self> {
        let mut s = Self::new(cutoff)?;
        for &(name, n) in photons {
            s.push_factor(Factor::Mode(name.to_string()), n)?;
        }
        Ok(s)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn amplitudes(&self) -> &[C] {
        &self.amplitudes
    }

    /// Accumulated relative norm lost to truncation.
    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Names of the circuit modes, in factor order.
    pub fn modes(&self) -> Vec<&str> {
        self.factors
            .iter()
            .filter_map(|f| match f {
                Factor::Mode(name) => Some(name.as_str()),
                Factor::Environment => None,
            })
            .collect()
    }

    pub fn num_modes(&self) -> usize {
        self.modes().len()
    }

    fn mode_factors(&self) -> Vec<usize> {
        (0..self.factors.len())
            .filter(|&k| matches!(self.factors[k], Factor::Mode(_)))
            .collect()
    }

    pub(crate) fn factor_of(&self, name: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| matches!(f, Factor::Mode(m) if m == name))
            .ok_or_else(|| Error::DeadMode(name.to_string()))
    }

    /// Factor index of the `mode`-th circuit mode.
    pub fn mode_factor(&self, mode: usize) -> Result<usize> {
        let f = self.mode_factors();
        f.get(mode).copied().ok_or(Error::ModeOutOfRange {
            mode,
            num_modes: f.len(),
        })
    }

    fn stride(&self, k: usize) -> usize {
        self.cutoff.pow((self.factors.len() - 1 - k) as u32)
    }

    /// Appends a factor in number state `|n⟩`.
    pub(crate) fn push_factor(&mut self, factor: Factor, n: usize) -> Result<()> {
        if n >= self.cutoff {
            return Err(Error::ResourceLimit(format!(
                "number state |{n}⟩ does not fit below cutoff {}",
                self.cutoff
            )));
        }
        let size = self.amplitudes.len() * self.cutoff;
        if size > MAX_AMPLITUDES {
            return Err(Error::ResourceLimit(format!(
                "{} factors at cutoff {} exceed {MAX_AMPLITUDES} amplitudes",
                self.factors.len() + 1,
                self.cutoff
            )));
        }
        let mut out = vec![C::new(0.0, 0.0); size];
        for (i, a) in self.amplitudes.iter().enumerate() {
            out[i * self.cutoff + n] = *a;
        }
        self.amplitudes = out;
        self.factors.push(factor);
        Ok(())
    }

    /// Applies a `d × d` matrix to one factor.
    pub(crate) fn apply_single(&mut self, k: usize, u: &DMatrix<C>) {
        let d = self.cutoff;
        let stride = self.stride(k);
        let outer = self.amplitudes.len() / (stride * d);
        let mut column = vec![C::new(0.0, 0.0); d];
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * stride * d + inner;
                for n in 0..d {
                    column[n] = self.amplitudes[base + n * stride];
                }
                for m in 0..d {
                    let mut acc = C::new(0.0, 0.0);
                    for n in 0..d {
                        acc += u[(m, n)] * column[n];
                    }
                    self.amplitudes[base + m * stride] = acc;
                }
            }
        }
    }

    /// Multiplies each amplitude by `phases[n_k]`.
    pub(crate) fn apply_diagonal(&mut self, k: usize, phases: &[C]) {
        let d = self.cutoff;
        let stride = self.stride(k);
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            *a *= phases[(i / stride) % d];
        }
    }

    /// Applies a block-structured two-factor unitary; block states are
    /// flattened as `n_k · d + n_l`.
    pub(crate) fn apply_pair(&mut self, k: usize, l: usize, blocks: &[gates::Block]) {
        let d = self.cutoff;
        let (sk, sl) = (self.stride(k), self.stride(l));
        let bases: Vec<usize> = (0..self.amplitudes.len())
            .filter(|&i| (i / sk) % d == 0 && (i / sl) % d == 0)
            .collect();
        let mut buf = Vec::new();
        for block in blocks {
            let offsets: Vec<usize> = block.states.iter().map(|&s| (s / d) * sk + (s % d) * sl).collect();
            let n = offsets.len();
            for &base in &bases {
                buf.clear();
                buf.extend(offsets.iter().map(|&o| self.amplitudes[base + o]));
                for (a, &o) in offsets.iter().enumerate() {
                    let mut acc = C::new(0.0, 0.0);
                    for b in 0..n {
                        acc += block.u[(a, b)] * buf[b];
                    }
                    self.amplitudes[base + o] = acc;
                }
            }
        }
    }

    /// Contracts factor `k` with `⟨v|` (the vector holds `⟨v|n⟩`) and removes
    /// it. Returns the squared norm of the unnormalized result.
    pub(crate) fn project(&mut self, k: usize, bra: &[C]) -> f64 {
        let d = self.cutoff;
        let stride = self.stride(k);
        let outer = self.amplitudes.len() / (stride * d);
        let mut out = vec![C::new(0.0, 0.0); outer * stride];
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * stride * d + inner;
                let mut acc = C::new(0.0, 0.0);
                for n in 0..d {
                    acc += bra[n] * self.amplitudes[base + n * stride];
                }
                out[o * stride + inner] = acc;
            }
        }
        self.amplitudes = out;
        self.factors.remove(k);
        self.norm_sqr()
    }

    /// Rescales to unit norm, recording the relative loss since the last
    /// normalization as truncation leakage.
    pub(crate) fn renormalize_tracking(&mut self) {
        let n2 = self.norm_sqr();
        self.leakage += (1.0 - n2).max(0.0);
        self.scale(1.0 / n2.sqrt());
    }

    pub(crate) fn scale(&mut self, k: f64) {
        for a in &mut self.amplitudes {
            *a *= k;
        }
    }

    /// Reduced density matrix of factor `k`.
    pub fn reduced_density(&self, k: usize) -> DMatrix<C> {
        let d = self.cutoff;
        let stride = self.stride(k);
        let outer = self.amplitudes.len() / (stride * d);
        let mut rho = DMatrix::zeros(d, d);
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * stride * d + inner;
                for m in 0..d {
                    let am = self.amplitudes[base + m * stride];
                    if am == C::new(0.0, 0.0) {
                        continue;
                    }
                    for n in 0..d {
                        rho[(m, n)] += am * self.amplitudes[base + n * stride].conj();
                    }
                }
            }
        }
        rho
    }

    fn lower(&self, k: usize) -> Vec<C> {
        let d = self.cutoff;
        let stride = self.stride(k);
        let mut out = vec![C::new(0.0, 0.0); self.amplitudes.len()];
        for (i, o) in out.iter_mut().enumerate() {
            let n = (i / stride) % d;
            if n + 1 < d {
                *o = ((n + 1) as f64).sqrt() * self.amplitudes[i + stride];
            }
        }
        out
    }

    /// Quadrature means and symmetrized covariance of the circuit modes,
    /// normalized by the current norm. Only lowering operators are applied,
    /// so truncation introduces no edge terms.
    pub fn moments(&self) -> (DVector<f64>, DMatrix<f64>) {
        let factors = self.mode_factors();
        let m = factors.len();
        let norm = self.norm_sqr();
        let dot = |a: &[C], b: &[C]| -> C { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C>() / norm };
        let lowered: Vec<Vec<C>> = factors.iter().map(|&k| self.lower(k)).collect();
        let a_mean: Vec<C> = lowered.iter().map(|l| dot(&self.amplitudes, l)).collect();

        let mut mean = DVector::zeros(2 * m);
        for i in 0..m {
            mean[2 * i] = 2.0 * a_mean[i].re;
            mean[2 * i + 1] = 2.0 * a_mean[i].im;
        }
        let mut cov = DMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            for j in i..m {
                // ⟨a_i a_j⟩ = ⟨ψ| a_i (a_j ψ)⟩, ⟨a_i† a_j⟩ = ⟨a_i ψ | a_j ψ⟩.
                let aa = {
                    let twice = self.lower_vec(factors[i], &lowered[j]);
                    dot(&self.amplitudes, &twice)
                };
                let ada = dot(&lowered[i], &lowered[j]);
                let delta = if i == j { 1.0 } else { 0.0 };
                let xx = 2.0 * aa.re + 2.0 * ada.re + delta;
                let pp = -2.0 * aa.re + 2.0 * ada.re + delta;
                let xp = 2.0 * aa.im + 2.0 * ada.im;
                let px = 2.0 * aa.im - 2.0 * ada.im;
                let (xi, pi, xj, pj) = (mean[2 * i], mean[2 * i + 1], mean[2 * j], mean[2 * j + 1]);
                cov[(2 * i, 2 * j)] = xx - xi * xj;
                cov[(2 * i + 1, 2 * j + 1)] = pp - pi * pj;
                cov[(2 * i, 2 * j + 1)] = xp - xi * pj;
                cov[(2 * i + 1, 2 * j)] = px - pi * xj;
                cov[(2 * j, 2 * i)] = cov[(2 * i, 2 * j)];
                cov[(2 * j + 1, 2 * i + 1)] = cov[(2 * i + 1, 2 * j + 1)];
                cov[(2 * j + 1, 2 * i)] = cov[(2 * i, 2 * j + 1)];
                cov[(2 * j, 2 * i + 1)] = cov[(2 * i + 1, 2 * j)];
            }
        }
        (mean, cov)
    }

    fn lower_vec(&self, k: usize, v: &[C]) -> Vec<C> {
        let d = self.cutoff;
        let stride = self.stride(k);
        let mut out = vec![C::new(0.0, 0.0); v.len()];
        for (i, o) in out.iter_mut().enumerate() {
            let n = (i / stride) % d;
            if n + 1 < d {
                *o = ((n + 1) as f64).sqrt() * v[i + stride];
            }
        }
        out
    }

    /// Mean and covariance of one factor's quadratures.
    pub(crate) fn factor_moments(&self, k: usize) -> (Vector2<f64>, Matrix2<f64>) {
        let rho = self.reduced_density(k);
        let d = self.cutoff;
        let tr = rho.trace().re;
        // tr(ρ a) = Σ √n ρ_{n,n−1}, tr(ρ a²) = Σ √(n(n−1)) ρ_{n,n−2}.
        let (mut a, mut aa, mut ada) = (C::new(0.0, 0.0), C::new(0.0, 0.0), 0.0);
        for n in 1..d {
            a += (n as f64).sqrt() * rho[(n, n - 1)];
            ada += n as f64 * rho[(n, n)].re;
        }
        for n in 2..d {
            aa += ((n * (n - 1)) as f64).sqrt() * rho[(n, n - 2)];
        }
        let (a, aa, ada) = (a / tr, aa / tr, ada / tr);
        let mean = Vector2::new(2.0 * a.re, 2.0 * a.im);
        let xx = 2.0 * aa.re + 2.0 * ada + 1.0 - mean[0] * mean[0];
        let pp = -2.0 * aa.re + 2.0 * ada + 1.0 - mean[1] * mean[1];
        let xp = 2.0 * aa.im - mean[0] * mean[1];
        (mean, Matrix2::new(xx, xp, xp, pp))
    }

    /// Probability of zero photons in circuit mode `mode`.
    pub fn vacuum_prob(&self, mode: usize) -> Result<f64> {
        let k = self.mode_factor(mode)?;
        let rho = self.reduced_density(k);
        Ok(rho[(0, 0)].re / rho.trace().re)
    }

    /// Photon-number distribution of circuit mode `mode`.
    pub fn photon_distribution(&self, mode: usize) -> Result<Vec<f64>> {
        let k = self.mode_factor(mode)?;
        let rho = self.reduced_density(k);
        let tr = rho.trace().re;
        Ok((0..self.cutoff).map(|n| rho[(n, n)].re / tr).collect())
    }

    /// Fourth cumulant of the quadrature `x cos θ + p sin θ` of circuit mode
    /// `mode`; zero for every Gaussian state.
    pub fn quadrature_cumulant4(&self, mode: usize, theta: f64) -> Result<f64> {
        let k = self.mode_factor(mode)?;
        let rho = self.reduced_density(k);
        let d = self.cutoff;
        let big = d + 4;
        // x_θ = e^{−iθ} a + e^{iθ} a† in an enlarged basis, exact on ρ's support.
        let mut x = DMatrix::<C>::zeros(big, big);
        for n in 1..big {
            let s = (n as f64).sqrt();
            x[(n - 1, n)] = C::from_polar(s, -theta);
            x[(n, n - 1)] = C::from_polar(s, theta);
        }
        let mut rho_big = DMatrix::<C>::zeros(big, big);
        rho_big.view_mut((0, 0), (d, d)).copy_from(&rho);
        let tr = rho.trace().re;
        let mut moments = [0.0; 5];
        let mut power = DMatrix::<C>::identity(big, big);
        for m in moments.iter_mut().skip(1) {
            power = &power * &x;
            *m = (&rho_big * &power).trace().re / tr;
        }
        let mu = moments[1];
        let c2 = moments[2] - mu * mu;
        let c4 = moments[4] - 4.0 * mu * moments[3] + 6.0 * mu * mu * moments[2] - 3.0 * mu.powi(4);
        Ok(c4 - 3.0 * c2 * c2)
    }
}

/// Deviations between a Gaussian-engine state and an oracle state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub num_modes: usize,
    pub mean_deviation: f64,
    pub cov_deviation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vacuum_prob_deviation: Option<f64>,
    pub leakage: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Compares moments (and optionally per-mode vacuum probabilities).
pub fn compare(gauss: &GaussianState, fock: &FockState, tol: f64, vacuum: bool) -> Result<CompareReport> {
    compare_moments(gauss, &fock.moments(), fock.leakage(), tol, vacuum.then_some(fock))
}

pub(crate) fn compare_moments(
    gauss: &GaussianState,
    (mean, cov): &(DVector<f64>, DMatrix<f64>),
    leakage: f64,
    tol: f64,
    fock: Option<&FockState>,
) -> Result<CompareReport> {
    if mean.len() != gauss.mean().len() {
        return Err(Error::DimensionMismatch(format!(
            "Gaussian state has {} modes, oracle state has {}",
            gauss.num_modes(),
            mean.len() / 2
        )));
    }
    let mean_deviation = (gauss.mean() - mean).amax();
    let cov_deviation = (gauss.cov() - cov).amax();
    let vacuum_prob_deviation = match fock {
        Some(f) => {
            let mut worst: f64 = 0.0;
            for m in 0..gauss.num_modes() {
                worst = worst.max((gauss.vacuum_projection_prob(m)? - f.vacuum_prob(m)?).abs());
            }
            Some(worst)
        }
        None => None,
    };
    let worst = mean_deviation
        .max(cov_deviation)
        .max(vacuum_prob_deviation.unwrap_or(0.0));
    Ok(CompareReport {
        num_modes: gauss.num_modes(),
        mean_deviation,
        cov_deviation,
        vacuum_prob_deviation,
        leakage,
        tol,
        pass: worst <= tol,
    })
}
