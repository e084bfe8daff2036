//! Program execution in the truncated number basis.
//!
//! Gaussian channels are dilated: loss is a beamsplitter with a fresh vacuum
//! environment factor, amplification a two-mode squeezer, additive noise a
//! loss followed by an amplifier, and a thermal input half of a two-mode
//! squeezed vacuum. Environment factors are kept until the end of the run.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;

use super::gates::{dense, exponentiate, Block, Generator};
use super::quadrature::{gauss_hermite, hermite_functions};
use super::{compare_moments, CompareReport, Factor, FockState, DEFAULT_LEAKAGE_BUDGET, MAX_MODES};
use crate::channel::GaussianChannel;
use crate::circuit::{check_valid, AffineExpr, CircuitProgram, InitialState, Instruction, Statement};
use crate::error::{Error, Result};
use crate::measure::{MeasurementKind, MeasurementOutcome, OutcomeValue, RandomStream};
use crate::state::GaussianState;

/// Gauss–Hermite nodes per homodyne in [`oracle_ensemble`].
pub const ENSEMBLE_NODES: usize = 200;
/// Upper bound on outcome branches in [`oracle_ensemble`].
pub const MAX_BRANCHES: usize = 40_000;
/// Branches lighter than this are dropped.
const BRANCH_FLOOR: f64 = 1e-15;
const PROBABILITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub cutoff: usize,
    pub leakage_budget: f64,
    /// Negates every squeezing parameter; used as a negative control.
    pub flip_squeeze: bool,
}

impl OracleOptions {
    pub fn new(cutoff: usize) -> Self {
        Self {
            cutoff,
            leakage_budget: DEFAULT_LEAKAGE_BUDGET,
            flip_squeeze: false,
        }
    }
}

/// How measurement outcomes are chosen in [`oracle_execute`].
#[derive(Debug)]
pub enum OutcomePolicy<'a> {
    Sample(RandomStream),
    /// Condition on recorded values; a photon count is rounded to an integer.
    Replay(&'a HashMap<String, OutcomeValue>),
}

#[derive(Debug, Clone)]
pub struct OracleRun {
    pub state: FockState,
    pub outcomes: Vec<MeasurementOutcome>,
}

/// Outcome-averaged moments of the surviving circuit modes.
#[derive(Debug, Clone)]
pub struct EnsembleMoments {
    pub modes: Vec<String>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Number of outcome branches summed.
    pub branches: usize,
    /// Total branch weight; 1 up to quadrature and truncation error.
    pub total_weight: f64,
    pub leakage: f64,
}

impl EnsembleMoments {
    pub fn compare(&self, gauss: &GaussianState, tol: f64) -> Result<CompareReport> {
        compare_moments(gauss, &(self.mean.clone(), self.cov.clone()), self.leakage, tol, None)
    }
}

/// Largest number of simultaneously live modes over the program.
pub fn max_live_modes(program: &CircuitProgram) -> usize {
    let (mut live, mut most) = (0usize, 0usize);
    for statement in program.statements() {
        match statement {
            Statement::Mode { .. } => {
                live += 1;
                most = most.max(live);
            }
            Statement::Op(i) if i.opcode().is_measurement() => live = live.saturating_sub(1),
            Statement::Op(_) => {}
        }
    }
    most
}

/// Runs one shot, sampling or replaying measurement outcomes.
pub fn oracle_execute(program: &CircuitProgram, options: &OracleOptions, policy: OutcomePolicy<'_>) -> Result<OracleRun> {
    let mut runner = Runner::new(program, options, Mode::Shot(policy))?;
    runner.run(program)?;
    let branch = runner.branches.pop().expect("a shot keeps one branch");
    Ok(OracleRun {
        state: branch.state,
        outcomes: runner.outcomes,
    })
}

/// Averages the final moments over all homodyne outcomes, integrating each
/// homodyne with a Gauss–Hermite rule centred on its own outcome
/// distribution. Feedforward may only enter through displacements, and only
/// homodyne measurements are supported.
pub fn oracle_ensemble(program: &CircuitProgram, options: &OracleOptions) -> Result<EnsembleMoments> {
    let mut runner = Runner::new(program, options, Mode::Ensemble)?;
    runner.run(program)?;
    let modes: Vec<String> = runner.branches[0].state.modes().iter().map(|s| s.to_string()).collect();
    let dim = 2 * modes.len();
    let mut mean = DVector::zeros(dim);
    let mut second = DMatrix::zeros(dim, dim);
    let mut total = 0.0;
    let mut leakage: f64 = 0.0;
    for b in &runner.branches {
        let (mut mu, cov) = b.state.moments();
        for (i, name) in modes.iter().enumerate() {
            if let Some(&(dx, dp)) = b.pending.get(name) {
                mu[2 * i] += dx;
                mu[2 * i + 1] += dp;
            }
        }
        total += b.weight;
        mean += b.weight * &mu;
        second += b.weight * (cov + &mu * mu.transpose());
        leakage = leakage.max(b.state.leakage());
    }
    mean /= total;
    let cov = second / total - &mean * mean.transpose();
    Ok(EnsembleMoments {
        modes,
        mean,
        cov,
        branches: runner.branches.len(),
        total_weight: total,
        leakage,
    })
}

enum Mode<'a> {
    Shot(OutcomePolicy<'a>),
    Ensemble,
}

#[derive(Clone)]
struct Branch {
    weight: f64,
    state: FockState,
    registers: HashMap<String, f64>,
    /// Deferred displacements per mode (ensemble only).
    pending: HashMap<String, (f64, f64)>,
}

impl Branch {
    fn eval(&self, e: &AffineExpr) -> Result<f64> {
        e.eval(|r| self.registers.get(r).copied())
    }
}

struct Runner<'a> {
    options: OracleOptions,
    mode: Mode<'a>,
    branches: Vec<Branch>,
    outcomes: Vec<MeasurementOutcome>,
}

fn rotation_phases(theta: f64, d: usize) -> Vec<C> {
    (0..d).map(|n| C::from_polar(1.0, -theta * n as f64)).collect()
}

fn squeezer_generator(phi: f64) -> Generator {
    let (s, c) = phi.sin_cos();
    Generator::from_symplectic(&DMatrix::from_row_slice(2, 2, &[-c, -s, -s, c]))
}

fn tms_generator() -> Generator {
    Generator::from_symplectic(&DMatrix::from_row_slice(
        4,
        4,
        &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0],
    ))
}

fn bs_generator(phi: f64) -> Generator {
    let (sp, cp) = phi.sin_cos();
    Generator::from_symplectic(&DMatrix::from_row_slice(
        4,
        4,
        &[0.0, 0.0, cp, -sp, 0.0, 0.0, sp, cp, -cp, -sp, 0.0, 0.0, sp, -cp, 0.0, 0.0],
    ))
}

/// `⟨α|n⟩` for a heterodyne outcome `(u, v) = (2 Re α, 2 Im α)`.
fn coherent_bra(u: f64, v: f64, d: usize) -> Vec<C> {
    let alpha_conj = C::new(0.5 * u, -0.5 * v);
    let mut out = Vec::with_capacity(d);
    let mut term = C::new((-0.125 * (u * u + v * v)).exp(), 0.0);
    for n in 0..d {
        out.push(term);
        term = term * alpha_conj / ((n + 1) as f64).sqrt();
    }
    out
}

fn real_bra(values: Vec<f64>) -> Vec<C> {
    values.into_iter().map(|v| C::new(v, 0.0)).collect()
}

fn basis_bra(n: usize, d: usize) -> Vec<C> {
    let mut v = vec![C::new(0.0, 0.0); d];
    v[n] = C::new(1.0, 0.0);
    v
}

/// Real part of `⟨v|ρ|v⟩` for a bra given as `⟨v|n⟩`.
fn expectation(rho: &DMatrix<C>, bra: &[C]) -> f64 {
    let d = bra.len();
    let mut acc = C::new(0.0, 0.0);
    for a in 0..d {
        for b in 0..d {
            acc += bra[a] * rho[(a, b)] * bra[b].conj();
        }
    }
    acc.re
}

/// Inverse-CDF draw from a density tabulated on an even grid.
fn sample_grid(grid: &[f64], density: &[f64], u: f64) -> f64 {
    let mut cdf = vec![0.0; grid.len()];
    for i in 1..grid.len() {
        cdf[i] = cdf[i - 1] + 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
    }
    let target = u * cdf[cdf.len() - 1];
    let i = cdf.partition_point(|&c| c < target).clamp(1, grid.len() - 1);
    let span = cdf[i] - cdf[i - 1];
    let frac = if span > 0.0 { (target - cdf[i - 1]) / span } else { 0.5 };
    grid[i - 1] + frac * (grid[i] - grid[i - 1])
}

impl<'a> Runner<'a> {
    fn new(program: &CircuitProgram, options: &OracleOptions, mode: Mode<'a>) -> Result<Self> {
        check_valid(program)?;
        let live = max_live_modes(program);
        if live > MAX_MODES {
            return Err(Error::ResourceLimit(format!(
                "program keeps {live} modes alive; the oracle handles at most {MAX_MODES}"
            )));
        }
        Ok(Self {
            options: *options,
            mode,
            branches: vec![Branch {
                weight: 1.0,
                state: FockState::new(options.cutoff)?,
                registers: HashMap::new(),
                pending: HashMap::new(),
            }],
            outcomes: Vec::new(),
        })
    }

    fn d(&self) -> usize {
        self.options.cutoff
    }

    fn ensemble(&self) -> bool {
        matches!(self.mode, Mode::Ensemble)
    }

    fn run(&mut self, program: &CircuitProgram) -> Result<()> {
        for statement in program.statements() {
            match statement {
                Statement::Mode { name, init } => self.declare(name, init)?,
                Statement::Op(instr) => self.step(instr)?,
            }
            self.check_leakage()?;
        }
        Ok(())
    }

    fn check_leakage(&mut self) -> Result<()> {
        let budget = self.options.leakage_budget;
        for b in &self.branches {
            if b.state.leakage() > budget {
                return Err(Error::TruncationBudgetExceeded {
                    leakage: b.state.leakage(),
                    budget,
                });
            }
        }
        Ok(())
    }

    /// Evaluates parameters that must agree across branches.
    fn constant(&self, e: &AffineExpr) -> Result<f64> {
        if self.ensemble() && !e.is_constant() {
            return Err(Error::Unsupported(
                "outcome-dependent parameters other than displacements in ensemble mode".into(),
            ));
        }
        self.branches[0].eval(e)
    }

    fn factor(&self, name: &str) -> Result<usize> {
        self.branches[0].state.factor_of(name)
    }

    fn for_each(&mut self, f: impl Fn(&mut FockState)) {
        for b in &mut self.branches {
            f(&mut b.state);
            b.state.renormalize_tracking();
        }
    }

    fn single(&mut self, k: usize, u: &DMatrix<C>) {
        self.for_each(|s| s.apply_single(k, u));
    }

    fn pair(&mut self, k: usize, l: usize, blocks: &[Block]) {
        self.for_each(|s| s.apply_pair(k, l, blocks));
    }

    fn push_environment(&mut self) -> Result<usize> {
        for b in &mut self.branches {
            b.state.push_factor(Factor::Environment, 0)?;
        }
        Ok(self.branches[0].state.factors().len() - 1)
    }

    fn squeeze_sign(&self) -> f64 {
        if self.options.flip_squeeze {
            -1.0
        } else {
            1.0
        }
    }

    fn displace_factor(&mut self, k: usize, dx: f64, dp: f64) {
        let d = self.d();
        let u = dense(&exponentiate(&Generator::displacement(dx, dp), 1.0, d), d);
        self.single(k, &u);
    }

    fn squeeze_factor(&mut self, k: usize, s: f64, phi: f64) {
        let d = self.d();
        let s = self.squeeze_sign() * s;
        let u = dense(&exponentiate(&squeezer_generator(phi), s, d), d);
        self.single(k, &u);
    }

    fn declare(&mut self, name: &str, init: &InitialState) -> Result<()> {
        let photons = match *init {
            InitialState::Fock(n) => n as usize,
            _ => 0,
        };
        for b in &mut self.branches {
            b.state.push_factor(Factor::Mode(name.to_string()), photons)?;
            b.pending.remove(name);
        }
        if self.branches[0].state.num_modes() > MAX_MODES {
            return Err(Error::ResourceLimit(format!("more than {MAX_MODES} live modes")));
        }
        let k = self.factor(name)?;
        match *init {
            InitialState::Vacuum | InitialState::Fock(_) => {}
            InitialState::Coherent { x, p } => self.displace_factor(k, x, p),
            InitialState::Squeezed { s, phi } => self.squeeze_factor(k, s, phi),
            InitialState::Thermal { n } => {
                GaussianState::thermal(n)?;
                if n > 0.0 {
                    let env = self.push_environment()?;
                    let s = (n + 1.0).sqrt().acosh();
                    let blocks = exponentiate(&tms_generator(), s, self.d());
                    self.pair(k, env, &blocks);
                }
            }
        }
        Ok(())
    }

    /// Applies any deferred displacement of `name` to the amplitudes.
    fn flush(&mut self, name: &str) -> Result<()> {
        if !self.branches.iter().any(|b| b.pending.contains_key(name)) {
            return Ok(());
        }
        let k = self.factor(name)?;
        let d = self.d();
        for b in &mut self.branches {
            if let Some((dx, dp)) = b.pending.remove(name) {
                let u = dense(&exponentiate(&Generator::displacement(dx, dp), 1.0, d), d);
                b.state.apply_single(k, &u);
                b.state.renormalize_tracking();
            }
        }
        Ok(())
    }

    fn lose(&mut self, k: usize, eta: f64) -> Result<()> {
        GaussianChannel::loss(0, eta)?;
        if eta < 1.0 {
            let env = self.push_environment()?;
            let blocks = exponentiate(&bs_generator(0.0), eta.sqrt().acos(), self.d());
            self.pair(k, env, &blocks);
        }
        Ok(())
    }

    fn amplify(&mut self, k: usize, gain: f64) -> Result<()> {
        GaussianChannel::amplifier(0, gain)?;
        if gain > 1.0 {
            let env = self.push_environment()?;
            let blocks = exponentiate(&tms_generator(), gain.sqrt().acosh(), self.d());
            self.pair(k, env, &blocks);
        }
        Ok(())
    }

    fn step(&mut self, instr: &Instruction) -> Result<()> {
        for name in instr.modes() {
            let deferred_homodyne = matches!(instr, Instruction::Homodyne { .. }) && self.ensemble();
            let deferred_displace = matches!(instr, Instruction::Displace { .. }) && self.ensemble();
            if !deferred_homodyne && !deferred_displace {
                self.flush(name)?;
            }
        }
        let d = self.d();
        match instr {
            Instruction::Displace { mode, dx, dp } => {
                if self.ensemble() {
                    for b in &mut self.branches {
                        let (x, p) = (b.eval(dx)?, b.eval(dp)?);
                        let entry = b.pending.entry(mode.clone()).or_insert((0.0, 0.0));
                        entry.0 += x;
                        entry.1 += p;
                    }
                } else {
                    let k = self.factor(mode)?;
                    let (x, p) = (self.branches[0].eval(dx)?, self.branches[0].eval(dp)?);
                    self.displace_factor(k, x, p);
                }
                Ok(())
            }
            Instruction::Rotate { mode, theta } => {
                let k = self.factor(mode)?;
                let phases = rotation_phases(self.constant(theta)?, d);
                self.for_each(|s| s.apply_diagonal(k, &phases));
                Ok(())
            }
            Instruction::Squeeze { mode, s, phi } => {
                let k = self.factor(mode)?;
                let (s, phi) = (self.constant(s)?, self.constant(phi)?);
                self.squeeze_factor(k, s, phi);
                Ok(())
            }
            Instruction::Tms { a, b, s } => {
                let (ka, kb) = (self.factor(a)?, self.factor(b)?);
                let s = self.squeeze_sign() * self.constant(s)?;
                let blocks = exponentiate(&tms_generator(), s, d);
                self.pair(ka, kb, &blocks);
                Ok(())
            }
            Instruction::Bs { a, b, theta, phi } => {
                let (ka, kb) = (self.factor(a)?, self.factor(b)?);
                let (theta, phi) = (self.constant(theta)?, self.constant(phi)?);
                let blocks = exponentiate(&bs_generator(phi), theta, d);
                self.pair(ka, kb, &blocks);
                Ok(())
            }
            Instruction::Loss { mode, eta } => {
                let k = self.factor(mode)?;
                let eta = self.constant(eta)?;
                self.lose(k, eta)
            }
            Instruction::Amplify { mode, gain } => {
                let k = self.factor(mode)?;
                let gain = self.constant(gain)?;
                self.amplify(k, gain)
            }
            Instruction::Noise { mode, n } => {
                let k = self.factor(mode)?;
                let n = self.constant(n)?;
                GaussianChannel::additive_noise(0, n)?;
                let gain = 1.0 + 0.5 * n;
                self.lose(k, 1.0 / gain)?;
                self.amplify(k, gain)
            }
            Instruction::Channel { .. } => Err(Error::Unsupported(
                "generic (X, Y) channels have no dilation in the oracle".into(),
            )),
            Instruction::Kerr { mode, kappa } => {
                let k = self.factor(mode)?;
                let kappa = self.constant(kappa)?;
                let phases: Vec<C> = (0..d)
                    .map(|n| C::from_polar(1.0, kappa * (n * n.saturating_sub(1)) as f64))
                    .collect();
                self.for_each(|s| s.apply_diagonal(k, &phases));
                Ok(())
            }
            Instruction::Homodyne {
                register,
                mode,
                angle,
                efficiency,
            } => self.homodyne(register, mode, angle, *efficiency),
            Instruction::Heterodyne { register, mode } => self.heterodyne(register, mode),
            Instruction::VacProject { register, mode } => {
                let k = self.factor(mode)?;
                self.shot_only("vacproject")?;
                let index = self.mode_index(k);
                let state = &mut self.branches[0].state;
                let p = state.project(k, &basis_bra(0, d));
                if p < PROBABILITY_FLOOR {
                    return Err(Error::DegenerateOutcome { probability: p });
                }
                state.scale(1.0 / p.sqrt());
                self.record(register, index, MeasurementKind::VacuumFlag, OutcomeValue::Scalar(p));
                Ok(())
            }
            Instruction::PhotonCount { register, mode } => {
                let k = self.factor(mode)?;
                self.shot_only("photoncount")?;
                let index = self.mode_index(k);
                let n = match &mut self.mode {
                    Mode::Shot(OutcomePolicy::Replay(map)) => {
                        let v = map
                            .get(register)
                            .ok_or_else(|| Error::UnknownRegister(register.clone()))?
                            .scalar();
                        (v.round().max(0.0) as usize).min(d - 1)
                    }
                    Mode::Shot(OutcomePolicy::Sample(rng)) => {
                        let probs = self.branches[0].state.photon_distribution(index)?;
                        let u = rng.uniform();
                        let mut acc = 0.0;
                        probs
                            .iter()
                            .position(|p| {
                                acc += p;
                                acc > u
                            })
                            .unwrap_or(d - 1)
                    }
                    Mode::Ensemble => unreachable!(),
                };
                let state = &mut self.branches[0].state;
                let p = state.project(k, &basis_bra(n, d));
                if p < PROBABILITY_FLOOR {
                    return Err(Error::DegenerateOutcome { probability: p });
                }
                state.scale(1.0 / p.sqrt());
                self.record(register, index, MeasurementKind::PhotonNumber, OutcomeValue::Scalar(n as f64));
                Ok(())
            }
        }
    }

    fn shot_only(&self, what: &str) -> Result<()> {
        if self.ensemble() {
            Err(Error::Unsupported(format!("{what} in ensemble mode")))
        } else {
            Ok(())
        }
    }

    /// Position of factor `k` among the circuit modes.
    fn mode_index(&self, k: usize) -> usize {
        self.branches[0].state.factors()[..k]
            .iter()
            .filter(|f| matches!(f, Factor::Mode(_)))
            .count()
    }

    fn record(&mut self, register: &str, mode: usize, kind: MeasurementKind, value: OutcomeValue) {
        self.branches[0].registers.insert(register.to_string(), value.scalar());
        self.outcomes.push(MeasurementOutcome {
            register: register.to_string(),
            mode,
            kind,
            value,
        });
    }

    fn homodyne(&mut self, register: &str, mode: &str, angle: &AffineExpr, efficiency: f64) -> Result<()> {
        let angle = self.constant(angle)?;
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "efficiency",
                value: efficiency,
                reason: "detector efficiency must lie in (0, 1]",
            });
        }
        let k = self.factor(mode)?;
        let index = self.mode_index(k);
        self.lose(k, efficiency)?;
        let phases = rotation_phases(angle, self.d());
        self.for_each(|s| s.apply_diagonal(k, &phases));
        self.check_leakage()?;
        let d = self.d();

        if self.ensemble() {
            return self.homodyne_ensemble(register, mode, k, angle, efficiency);
        }
        let outcome = match &mut self.mode {
            Mode::Shot(OutcomePolicy::Replay(map)) => map
                .get(register)
                .ok_or_else(|| Error::UnknownRegister(register.to_string()))?
                .scalar(),
            Mode::Shot(OutcomePolicy::Sample(rng)) => {
                let state = &self.branches[0].state;
                let rho = state.reduced_density(k);
                let (mu, cov) = state.factor_moments(k);
                let sigma = cov[(0, 0)].sqrt();
                let grid: Vec<f64> = (0..=6000).map(|i| mu[0] + sigma * (-12.0 + 24.0 * i as f64 / 6000.0)).collect();
                let density: Vec<f64> = grid
                    .iter()
                    .map(|&m| expectation(&rho, &real_bra(hermite_functions(m, d))).max(0.0))
                    .collect();
                sample_grid(&grid, &density, rng.uniform())
            }
            Mode::Ensemble => unreachable!(),
        };
        let state = &mut self.branches[0].state;
        let p = state.project(k, &real_bra(hermite_functions(outcome, d)));
        if p < PROBABILITY_FLOOR {
            return Err(Error::DegenerateOutcome { probability: p });
        }
        state.scale(1.0 / p.sqrt());
        let kind = MeasurementKind::Homodyne { angle, efficiency };
        self.record(register, index, kind, OutcomeValue::Scalar(outcome));
        Ok(())
    }

    fn homodyne_ensemble(&mut self, register: &str, mode: &str, k: usize, angle: f64, efficiency: f64) -> Result<()> {
        let d = self.d();
        let (nodes, weights) = gauss_hermite(ENSEMBLE_NODES);
        let mut children = Vec::new();
        for b in std::mem::take(&mut self.branches) {
            // A deferred displacement only shifts the recorded outcome.
            let shift = b
                .pending
                .get(mode)
                .map(|&(dx, dp)| efficiency.sqrt() * (dx * angle.cos() + dp * angle.sin()))
                .unwrap_or(0.0);
            let (mu, cov) = b.state.factor_moments(k);
            let sigma = cov[(0, 0)].sqrt();
            let scale = std::f64::consts::SQRT_2 * sigma;
            for (t, w) in nodes.iter().zip(&weights) {
                let m = mu[0] + scale * t;
                let mut state = b.state.clone();
                let p = state.project(k, &real_bra(hermite_functions(m, d)));
                let weight = b.weight * scale * w * p;
                if weight < BRANCH_FLOOR || p < PROBABILITY_FLOOR {
                    continue;
                }
                state.scale(1.0 / p.sqrt());
                let mut registers = b.registers.clone();
                registers.insert(register.to_string(), m + shift);
                let mut pending = b.pending.clone();
                pending.remove(mode);
                children.push(Branch {
                    weight,
                    state,
                    registers,
                    pending,
                });
                if children.len() > MAX_BRANCHES {
                    return Err(Error::ResourceLimit(format!("more than {MAX_BRANCHES} outcome branches")));
                }
            }
        }
        if children.is_empty() {
            return Err(Error::DegenerateOutcome { probability: 0.0 });
        }
        self.branches = children;
        Ok(())
    }

    fn heterodyne(&mut self, register: &str, mode: &str) -> Result<()> {
        self.shot_only("heterodyne")?;
        let d = self.d();
        let k = self.factor(mode)?;
        let index = self.mode_index(k);
        let (u, v) = match &mut self.mode {
            Mode::Shot(OutcomePolicy::Replay(map)) => {
                match map.get(register).ok_or_else(|| Error::UnknownRegister(register.to_string()))? {
                    OutcomeValue::Pair([u, v]) => (*u, *v),
                    OutcomeValue::Scalar(_) => {
                        return Err(Error::DimensionMismatch(format!(
                            "heterodyne register `{register}` needs a pair of values"
                        )))
                    }
                }
            }
            Mode::Shot(OutcomePolicy::Sample(rng)) => {
                let state = &self.branches[0].state;
                let rho = state.reduced_density(k);
                let (mu, cov) = state.factor_moments(k);
                let n = 300;
                let axis = |c: usize| -> Vec<f64> {
                    let half = 8.0 * (cov[(c, c)] + 1.0).sqrt();
                    (0..=n).map(|i| mu[c] - half + 2.0 * half * i as f64 / n as f64).collect()
                };
                let (us, vs) = (axis(0), axis(1));
                // Q function on cell centres, rows along u.
                let cells: Vec<f64> = (0..n)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .map(|(i, j)| {
                        let (cu, cv) = (0.5 * (us[i] + us[i + 1]), 0.5 * (vs[j] + vs[j + 1]));
                        expectation(&rho, &coherent_bra(cu, cv, d)).max(0.0)
                    })
                    .collect();
                let total: f64 = cells.iter().sum();
                let target = rng.uniform() * total;
                let mut acc = 0.0;
                let cell = cells
                    .iter()
                    .position(|q| {
                        acc += q;
                        acc > target
                    })
                    .unwrap_or(cells.len() - 1);
                let (i, j) = (cell / n, cell % n);
                let (ju, jv) = (rng.uniform(), rng.uniform());
                (us[i] + ju * (us[i + 1] - us[i]), vs[j] + jv * (vs[j + 1] - vs[j]))
            }
            Mode::Ensemble => unreachable!(),
        };
        let state = &mut self.branches[0].state;
        let p = state.project(k, &coherent_bra(u, v, d));
        if p < PROBABILITY_FLOOR {
            return Err(Error::DegenerateOutcome { probability: p });
        }
        state.scale(1.0 / p.sqrt());
        self.record(register, index, MeasurementKind::Heterodyne, OutcomeValue::Pair([u, v]));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::compare;
    use super::*;
    use crate::circuit::{execute_ensemble, execute_replay, parse};

    fn oracle(text: &str, cutoff: usize) -> FockState {
        let p = parse(text).unwrap();
        oracle_execute(&p, &OracleOptions::new(cutoff), OutcomePolicy::Sample(RandomStream::new(0, 0)))
            .unwrap()
            .state
    }

    fn engine(text: &str) -> GaussianState {
        let p = parse(text).unwrap();
        execute_replay(&p, &HashMap::new()).unwrap().final_state
    }

    fn agree(text: &str, cutoff: usize, tol: f64) {
        let r = compare(&engine(text), &oracle(text, cutoff), tol, true).unwrap();
        assert!(r.pass, "{text}: {r:?}");
    }

    #[test]
    fn vacuum_program_is_the_zero_photon_state() {
        let s = oracle("mode a; mode b;", 8);
        assert_eq!(s.amplitudes()[0], C::new(1.0, 0.0));
        assert_eq!(s.norm_sqr(), 1.0);
    }

    #[test]
    fn coherent_input_moments() {
        let s = oracle("mode a init=coherent(1, 0);", 30);
        let (mean, cov) = s.moments();
        assert!((mean[0] - 1.0).abs() < 1e-12 && mean[1].abs() < 1e-12);
        assert!((cov - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn squeezed_vacuum_moments_and_parity() {
        let s = oracle("mode a; squeeze a 0.4 0;", 30);
        let (_, cov) = s.moments();
        assert!((cov[(0, 0)] - (-0.8f64).exp()).abs() < 1e-10);
        assert!((cov[(1, 1)] - 0.8f64.exp()).abs() < 1e-10);
        let n: f64 = s.photon_distribution(0).unwrap().iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        assert!((n - 0.4f64.sinh().powi(2)).abs() < 1e-10);
    }

    #[test]
    fn rotation_convention_matches_engine() {
        // A quarter turn moves the squeezed variance from x to p.
        let text = "mode a; squeeze a 0.5 0; rotate a 1.5707963267948966;";
        let (_, cov) = oracle(text, 30).moments();
        assert!(cov[(0, 0)] > 1.0 && cov[(1, 1)] < 1.0);
        agree(text, 30, 1e-7);
        agree("mode a; squeeze a 0.3 0; rotate a 0.4;", 30, 1e-9);
    }

    #[test]
    fn gates_agree_with_engine() {
        agree("mode a; squeeze a 0.4 0.9;", 30, 1e-9);
        agree("mode a; mode b; tms a b 0.3;", 30, 1e-9);
        agree("mode a init=coherent(0.5, -0.3); mode b init=squeezed(0.3, 0.2); bs a b 0.6 1.1;", 30, 1e-9);
        agree("mode a; mode b; squeeze a 0.4 0; squeeze b -0.4 0; bs a b 0.7853981633974483 0;", 30, 1e-9);
    }

    #[test]
    fn channels_agree_with_engine() {
        agree("mode a init=squeezed(0.5, 0); loss a 0.7;", 30, 1e-7);
        agree("mode a init=coherent(0.4, 0.2); amplify a 1.3; loss a 0.7692307692307692;", 30, 1e-8);
        agree("mode a; noise a 0.3;", 30, 1e-8);
        agree("mode a init=thermal(0.2);", 30, 1e-8);
    }

    #[test]
    fn conditioned_measurements_agree_with_engine() {
        let text = "mode a; mode b; tms a b 0.6; m = homodyne a 0.3 0.8; v = vacproject b;";
        let p = parse("mode a; mode b; mode c; tms a b 0.6; bs b c 0.5 0.1; m = homodyne a 0.3 0.8; h = heterodyne c;").unwrap();
        let outcomes = HashMap::from([
            ("m".to_string(), OutcomeValue::Scalar(0.7)),
            ("h".to_string(), OutcomeValue::Pair([-0.4, 0.9])),
        ]);
        let g = execute_replay(&p, &outcomes).unwrap().final_state;
        let f = oracle_execute(&p, &OracleOptions::new(30), OutcomePolicy::Replay(&outcomes)).unwrap();
        let r = compare(&g, &f.state, 1e-8, true).unwrap();
        assert!(r.pass, "{r:?}");

        let p = parse(text).unwrap();
        let outcomes = HashMap::from([("m".to_string(), OutcomeValue::Scalar(-0.5))]);
        let f = oracle_execute(&p, &OracleOptions::new(30), OutcomePolicy::Replay(&outcomes)).unwrap();
        let g = execute_replay(&p, &outcomes).unwrap();
        let (gv, fv) = (g.outcome("v").unwrap().scalar(), f.outcomes[1].value.scalar());
        assert!((gv - fv).abs() < 1e-9, "{gv} vs {fv}");
    }

    #[test]
    fn sampled_homodyne_statistics() {
        // Vacuum x outcomes have unit variance.
        let p = parse("mode a; m = homodyne a 0 1.0;").unwrap();
        let samples: Vec<f64> = (0..2000)
            .map(|i| {
                let run = oracle_execute(&p, &OracleOptions::new(10), OutcomePolicy::Sample(RandomStream::new(5, i))).unwrap();
                run.outcomes[0].value.scalar()
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / 2000.0;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 2000.0;
        assert!(mean.abs() < 0.1 && (var - 1.0).abs() < 0.1, "{mean} {var}");
    }

    #[test]
    fn ensemble_teleportation_matches_engine() {
        let text = "mode in init=coherent(1.0, -0.5); mode a; mode b; tms a b 0.5; bs in a 0.7853981633974483 0; \
                    mx = homodyne a 0 1.0; mp = homodyne in 1.5707963267948966 1.0; \
                    displace b (-1.4142135623730951*mx) (1.4142135623730951*mp);";
        let p = parse(text).unwrap();
        let g = execute_ensemble(&p).unwrap();
        let f = oracle_ensemble(&p, &OracleOptions::new(20)).unwrap();
        let r = f.compare(&g.state, 1e-3).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn kerr_makes_quadratures_non_gaussian() {
        let s = oracle("mode a; squeeze a 0.5 0; kerr a 0.2;", 30);
        assert!(s.quadrature_cumulant4(0, 0.0).unwrap().abs() > 1e-2);
        let g = oracle("mode a; squeeze a 0.5 0;", 30);
        let gauss = g.quadrature_cumulant4(0, 0.0).unwrap().abs();
        assert!(gauss < 1e-6, "{gauss}");
    }

    #[test]
    fn one_photon_heralding_is_non_gaussian() {
        // Counting one photon on half of a two-mode squeezed pair heralds |1⟩.
        let p = parse("mode a; mode b; tms a b 0.4; n = photoncount a;").unwrap();
        let outcomes = HashMap::from([("n".to_string(), OutcomeValue::Scalar(1.0))]);
        let run = oracle_execute(&p, &OracleOptions::new(30), OutcomePolicy::Replay(&outcomes)).unwrap();
        let dist = run.state.photon_distribution(0).unwrap();
        assert!((dist[1] - 1.0).abs() < 1e-12);
        // Excess kurtosis of |1⟩ in vacuum-variance units.
        assert!((run.state.quadrature_cumulant4(0, 0.3).unwrap() + 12.0).abs() < 1e-9);
        assert_eq!(run.outcomes[0].kind, MeasurementKind::PhotonNumber);
    }

    #[test]
    fn single_photons_bunch_on_a_balanced_beamsplitter() {
        let s = oracle("mode a init=fock(1); mode b init=fock(1); bs a b 0.7853981633974483 0;", 6);
        let dist = s.photon_distribution(0).unwrap();
        assert!((dist[0] - 0.5).abs() < 1e-12 && dist[1].abs() < 1e-12 && (dist[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn flipped_squeezing_is_reported_as_a_mismatch() {
        let p = parse("mode a; squeeze a 0.5 0;").unwrap();
        let options = OracleOptions {
            flip_squeeze: true,
            ..OracleOptions::new(30)
        };
        let run = oracle_execute(&p, &options, OutcomePolicy::Sample(RandomStream::new(0, 0))).unwrap();
        let r = compare(&engine("mode a; squeeze a 0.5 0;"), &run.state, 1e-5, false).unwrap();
        assert!(!r.pass);
        assert!((r.cov_deviation - (1.0f64.exp() - (-1.0f64).exp())).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn limits_are_enforced() {
        let p = parse("mode a; mode b; mode c; mode d;").unwrap();
        let err = oracle_execute(&p, &OracleOptions::new(4), OutcomePolicy::Sample(RandomStream::new(0, 0)));
        assert!(matches!(err, Err(Error::ResourceLimit(_))));
        let p = parse("mode a; squeeze a 1.5 0;").unwrap();
        let err = oracle_execute(&p, &OracleOptions::new(10), OutcomePolicy::Sample(RandomStream::new(0, 0)));
        assert!(matches!(err, Err(Error::TruncationBudgetExceeded { .. })));
        assert_eq!(max_live_modes(&parse("mode a; m = homodyne a 0 1.0; mode a; mode b;").unwrap()), 2);
    }
}
