//! Outcome-averaged execution.
//!
//! Measured quadratures are kept as classical variables in an enlarged
//! Gaussian, so affine displacement feedforward becomes a linear map and the
//! result is the state averaged over all measurement records.

use nalgebra::{DMatrix, DVector};

use super::exec::{check_valid, initial_state, kerr_error, square};
use super::{AffineExpr, CircuitProgram, Instruction, Statement};
use crate::channel::GaussianChannel;
use crate::error::{finite, Error, Result};
use crate::linalg::apply_local;
use crate::state::GaussianState;
use crate::symplectic;

/// Averaged output of [`execute_ensemble`].
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    /// Surviving modes in state order.
    pub modes: Vec<String>,
    pub state: GaussianState,
}

#[derive(Debug, Clone, PartialEq)]
enum Var {
    X(String),
    P(String),
    Reg(String),
}

struct Joint {
    vars: Vec<Var>,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl Joint {
    fn find(&self, v: &Var) -> Option<usize> {
        self.vars.iter().position(|w| w == v)
    }

    fn quad(&self, mode: &str) -> Result<[usize; 2]> {
        let x = self.find(&Var::X(mode.into()));
        let p = self.find(&Var::P(mode.into()));
        match (x, p) {
            (Some(x), Some(p)) => Ok([x, p]),
            _ => Err(Error::DeadMode(mode.to_string())),
        }
    }

    fn quads(&self, modes: &[&str]) -> Result<Vec<usize>> {
        let mut idx = Vec::with_capacity(2 * modes.len());
        for m in modes {
            idx.extend(self.quad(m)?);
        }
        Ok(idx)
    }

    fn append(&mut self, name: &str, single: &GaussianState) {
        let n = self.vars.len();
        let mut mean = DVector::zeros(n + 2);
        mean.rows_mut(0, n).copy_from(&self.mean);
        mean.rows_mut(n, 2).copy_from(single.mean());
        let mut cov = DMatrix::zeros(n + 2, n + 2);
        cov.view_mut((0, 0), (n, n)).copy_from(&self.cov);
        cov.view_mut((n, n), (2, 2)).copy_from(single.cov());
        self.mean = mean;
        self.cov = cov;
        self.vars.push(Var::X(name.into()));
        self.vars.push(Var::P(name.into()));
    }

    fn drop_var(&mut self, i: usize) {
        self.vars.remove(i);
        self.mean = std::mem::replace(&mut self.mean, DVector::zeros(0)).remove_row(i);
        self.cov = std::mem::replace(&mut self.cov, DMatrix::zeros(0, 0))
            .remove_row(i)
            .remove_column(i);
    }

    fn linear(&mut self, idx: &[usize], x: &DMatrix<f64>, y: Option<&DMatrix<f64>>) {
        apply_local(&mut self.mean, &mut self.cov, idx, x, y, None);
    }

    /// The mode's x variable becomes register `register`; p is discarded.
    fn read_out(&mut self, mode: &str, register: &str) -> Result<()> {
        let [x, p] = self.quad(mode)?;
        self.vars[x] = Var::Reg(register.to_string());
        self.drop_var(p);
        Ok(())
    }

    fn displace(&mut self, mode: &str, dx: &AffineExpr, dp: &AffineExpr) -> Result<()> {
        let mut idx = self.quad(mode)?.to_vec();
        let mut registers: Vec<&str> = Vec::new();
        for r in dx.registers().chain(dp.registers()) {
            if !registers.contains(&r) {
                registers.push(r);
            }
        }
        for r in &registers {
            let i = self
                .find(&Var::Reg(r.to_string()))
                .ok_or_else(|| Error::UnknownRegister(r.to_string()))?;
            idx.push(i);
        }
        let k = idx.len();
        let mut x = DMatrix::identity(k, k);
        for (row, expr) in [dx, dp].into_iter().enumerate() {
            for (c, r) in &expr.terms {
                let col = 2 + registers.iter().position(|q| q == r).expect("collected above");
                x[(row, col)] += c;
            }
        }
        let mut shift = vec![0.0; k];
        shift[0] = finite("dx", dx.constant)?;
        shift[1] = finite("dp", dp.constant)?;
        apply_local(&mut self.mean, &mut self.cov, &idx, &x, None, Some(&shift));
        Ok(())
    }
}

fn constant(e: &AffineExpr, what: &str) -> Result<f64> {
    if e.is_constant() {
        Ok(e.constant)
    } else {
        Err(Error::Unsupported(format!(
            "outcome-averaged execution needs a constant {what}; only displacements may depend on registers"
        )))
    }
}

/// Executes `program` averaged over all measurement outcomes.
///
/// Supports every Gaussian instruction with constant parameters plus
/// homodyne and heterodyne measurements feeding affine displacements.
/// Vacuum projection is a post-selection rather than an average and is
/// reported as unsupported, as are register-dependent gate parameters.
/// Photon counting fails with [`Error::NonGaussianOutcome`], since the
/// average includes the absorption branch.
pub fn execute_ensemble(program: &CircuitProgram) -> Result<EnsembleState> {
    check_valid(program)?;
    let mut joint = Joint {
        vars: Vec::new(),
        mean: DVector::zeros(0),
        cov: DMatrix::zeros(0, 0),
    };
    for statement in program.statements() {
        let instr = match statement {
            Statement::Mode { name, init } => {
                joint.append(name, &initial_state(name, init)?);
                continue;
            }
            Statement::Op(instr) => instr,
        };
        match instr {
            Instruction::Displace { mode, dx, dp } => joint.displace(mode, dx, dp)?,
            Instruction::Rotate { mode, theta } => {
                let theta = finite("theta", constant(theta, "angle")?)?;
                joint.linear(&joint.quad(mode)?, &symplectic::rotation_block(theta), None);
            }
            Instruction::Squeeze { mode, s, phi } => {
                let s = finite("s", constant(s, "squeezing")?)?;
                let phi = finite("phi", constant(phi, "angle")?)?;
                joint.linear(&joint.quad(mode)?, &symplectic::squeezer_block(s, phi), None);
            }
            Instruction::Tms { a, b, s } => {
                let s = finite("s", constant(s, "squeezing")?)?;
                let idx = joint.quads(&[a, b])?;
                joint.linear(&idx, &symplectic::two_mode_squeezer_block(s), None);
            }
            Instruction::Bs { a, b, theta, phi } => {
                let theta = finite("theta", constant(theta, "angle")?)?;
                let phi = finite("phi", constant(phi, "angle")?)?;
                let idx = joint.quads(&[a, b])?;
                joint.linear(&idx, &symplectic::beamsplitter_block(theta, phi), None);
            }
            Instruction::Loss { mode, eta } => {
                let ch = GaussianChannel::loss(0, constant(eta, "transmissivity")?)?;
                joint.linear(&joint.quad(mode)?, ch.x(), Some(ch.y()));
            }
            Instruction::Amplify { mode, gain } => {
                let ch = GaussianChannel::amplifier(0, constant(gain, "gain")?)?;
                joint.linear(&joint.quad(mode)?, ch.x(), Some(ch.y()));
            }
            Instruction::Noise { mode, n } => {
                let ch = GaussianChannel::additive_noise(0, constant(n, "noise")?)?;
                joint.linear(&joint.quad(mode)?, ch.x(), Some(ch.y()));
            }
            Instruction::Channel { modes, x, y } => {
                let dim = 2 * modes.len();
                let ch = GaussianChannel::new(square(x, dim), square(y, dim), (0..modes.len()).collect(), None)?;
                let names: Vec<&str> = modes.iter().map(String::as_str).collect();
                joint.linear(&joint.quads(&names)?, ch.x(), Some(ch.y()));
            }
            Instruction::Homodyne {
                register,
                mode,
                angle,
                efficiency,
            } => {
                let angle = finite("angle", constant(angle, "homodyne angle")?)?;
                if !(*efficiency > 0.0 && *efficiency <= 1.0) {
                    return Err(Error::InvalidParameter {
                        name: "efficiency",
                        value: *efficiency,
                        reason: "detector efficiency must lie in (0, 1]",
                    });
                }
                let idx = joint.quad(mode)?;
                if *efficiency < 1.0 {
                    let ch = GaussianChannel::loss(0, *efficiency)?;
                    joint.linear(&idx, ch.x(), Some(ch.y()));
                }
                joint.linear(&idx, &symplectic::rotation_block(angle), None);
                joint.read_out(mode, register)?;
            }
            Instruction::Heterodyne { register, mode } => {
                let idx = joint.quad(mode)?;
                joint.linear(&idx, &DMatrix::identity(2, 2), Some(&DMatrix::identity(2, 2)));
                joint.read_out(mode, register)?;
            }
            Instruction::PhotonCount { mode, .. } => {
                // The vacuum probability is linear in the state, so the
                // averaged marginal gives the averaged absorption probability.
                let [x, p] = joint.quad(mode)?;
                let mean = DVector::from_vec(vec![joint.mean[x], joint.mean[p]]);
                let cov = DMatrix::from_fn(2, 2, |r, c| joint.cov[([x, p][r], [x, p][c])]);
                match GaussianState::from_moments(mean, cov)?.condition_on_absorption(0)? {}
            }
            Instruction::VacProject { .. } => {
                return Err(Error::Unsupported(format!(
                    "`{}` has no outcome-averaged Gaussian form",
                    instr.opcode().keyword()
                )))
            }
            Instruction::Kerr { .. } => return Err(kerr_error()),
        }
    }

    let mut modes = Vec::new();
    let mut idx = Vec::new();
    for (i, v) in joint.vars.iter().enumerate() {
        if let Var::X(name) = v {
            modes.push(name.clone());
            idx.push(i);
            idx.push(joint.find(&Var::P(name.clone())).expect("x and p are kept together"));
        }
    }
    let mean = DVector::from_fn(idx.len(), |a, _| joint.mean[idx[a]]);
    let cov = DMatrix::from_fn(idx.len(), idx.len(), |a, b| joint.cov[(idx[a], idx[b])]);
    Ok(EnsembleState {
        modes,
        state: GaussianState::from_moments(mean, cov)?,
    })
}
