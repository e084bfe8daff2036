//! Shot-by-shot execution on the Gaussian engine.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::validate::validate;
use super::{AffineExpr, CircuitProgram, InitialState, Instruction, Statement};
use crate::channel::GaussianChannel;
use crate::citation;
use crate::error::{Error, Result};
use crate::measure::{MeasurementKind, MeasurementOutcome, OutcomeValue, RandomStream};
use crate::state::GaussianState;

/// Record of one shot.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace {
    pub seed: u64,
    pub shot_index: u64,
    /// Measurements in program order.
    pub outcomes: Vec<MeasurementOutcome>,
    /// Names of the surviving modes, in state order.
    pub modes: Vec<String>,
    pub final_state: GaussianState,
}

impl ExecutionTrace {
    pub fn outcome(&self, register: &str) -> Option<OutcomeValue> {
        self.outcomes
            .iter()
            .find(|o| o.register == register)
            .map(|o| o.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegisterValues {
    pub name: String,
    /// One value per shot, in shot order.
    pub values: Vec<OutcomeValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotState {
    pub shot_index: u64,
    pub modes: Vec<String>,
    pub state: GaussianState,
}

/// JSON form of a multi-shot run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceReport {
    pub seed: u64,
    pub shots: usize,
    pub registers: Vec<RegisterValues>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_state: Option<Vec<ShotState>>,
}

impl TraceReport {
    pub fn new(program: &CircuitProgram, seed: u64, traces: &[ExecutionTrace], emit_final_state: bool) -> Self {
        let registers = program
            .registers()
            .into_iter()
            .map(|name| RegisterValues {
                name: name.to_string(),
                values: traces
                    .iter()
                    .filter_map(|t| t.outcome(name))
                    .collect(),
            })
            .collect();
        let final_state = emit_final_state.then(|| {
            traces
                .iter()
                .map(|t| ShotState {
                    shot_index: t.shot_index,
                    modes: t.modes.clone(),
                    state: t.final_state.clone(),
                })
                .collect()
        });
        Self {
            seed,
            shots: traces.len(),
            registers,
            final_state,
        }
    }
}

pub(crate) fn check_valid(program: &CircuitProgram) -> Result<()> {
    let diagnostics = validate(program);
    if diagnostics.is_empty() {
        Ok(())
    } else {
        let lines: Vec<String> = diagnostics.iter().map(ToString::to_string).collect();
        Err(Error::InvalidProgram(lines.join("\n")))
    }
}

/// Runs `shots` independent shots. Shot `i` draws from
/// `RandomStream::new(seed, i)`; results are ordered by shot index.
pub fn execute(program: &CircuitProgram, seed: u64, shots: usize) -> Result<Vec<ExecutionTrace>> {
    check_valid(program)?;
    let results: Vec<Result<ExecutionTrace>> = (0..shots as u64)
        .into_par_iter()
        .map(|i| run(program, &mut Source::Sample(RandomStream::new(seed, i))))
        .collect();
    results.into_iter().collect()
}

/// Runs a single shot with the given random stream.
pub fn execute_shot(program: &CircuitProgram, rng: RandomStream) -> Result<ExecutionTrace> {
    check_valid(program)?;
    run(program, &mut Source::Sample(rng))
}

/// Runs a single shot with prescribed homodyne and heterodyne outcomes,
/// conditioning on them instead of sampling.
pub fn execute_replay(program: &CircuitProgram, outcomes: &HashMap<String, OutcomeValue>) -> Result<ExecutionTrace> {
    check_valid(program)?;
    run(program, &mut Source::Replay(outcomes))
}

enum Source<'a> {
    Sample(RandomStream),
    Replay(&'a HashMap<String, OutcomeValue>),
}

impl Source<'_> {
    fn ids(&self) -> (u64, u64) {
        match self {
            Source::Sample(rng) => (rng.seed(), rng.shot_index()),
            Source::Replay(_) => (0, 0),
        }
    }

    fn replayed(&self, register: &str) -> Result<Option<OutcomeValue>> {
        match self {
            Source::Sample(_) => Ok(None),
            Source::Replay(map) => map
                .get(register)
                .copied()
                .map(Some)
                .ok_or_else(|| Error::UnknownRegister(register.to_string())),
        }
    }
}

/// Single-mode state for a declaration; `fock(k ≥ 1)` is rejected.
pub(crate) fn initial_state(name: &str, init: &InitialState) -> Result<GaussianState> {
    match *init {
        InitialState::Vacuum | InitialState::Fock(0) => Ok(GaussianState::vacuum(1)),
        InitialState::Coherent { x, p } => Ok(GaussianState::coherent(x, p)),
        InitialState::Squeezed { s, phi } => GaussianState::squeezed(s, phi),
        InitialState::Thermal { n } => GaussianState::thermal(n),
        InitialState::Fock(_) => Err(Error::NonGaussianInput {
            mode: name.to_string(),
            citation: citation::fock_input(),
        }),
    }
}

pub(crate) fn kerr_error() -> Error {
    Error::NonGaussianGate {
        gate: "kerr".into(),
        citation: citation::kerr_gate(),
    }
}

/// Row-major `dim × dim` slice to a matrix.
pub(crate) fn square(values: &[f64], dim: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(dim, dim, values)
}

struct Machine {
    state: GaussianState,
    modes: Vec<String>,
    registers: HashMap<String, f64>,
    outcomes: Vec<MeasurementOutcome>,
}

impl Machine {
    fn index(&self, name: &str) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m == name)
            .ok_or_else(|| Error::DeadMode(name.to_string()))
    }

    fn eval(&self, e: &AffineExpr) -> Result<f64> {
        e.eval(|r| self.registers.get(r).copied())
    }

    fn record(&mut self, register: &str, mode: usize, kind: MeasurementKind, value: OutcomeValue) {
        self.modes.remove(mode);
        self.registers.insert(register.to_string(), value.scalar());
        self.outcomes.push(MeasurementOutcome {
            register: register.to_string(),
            mode,
            kind,
            value,
        });
    }

    fn step(&mut self, instr: &Instruction, source: &mut Source<'_>) -> Result<()> {
        match instr {
            Instruction::Displace { mode, dx, dp } => {
                let m = self.index(mode)?;
                let (dx, dp) = (self.eval(dx)?, self.eval(dp)?);
                self.state.displace(m, dx, dp)
            }
            Instruction::Rotate { mode, theta } => {
                let m = self.index(mode)?;
                let theta = self.eval(theta)?;
                self.state.phase_rotate(m, theta)
            }
            Instruction::Squeeze { mode, s, phi } => {
                let m = self.index(mode)?;
                let (s, phi) = (self.eval(s)?, self.eval(phi)?);
                self.state.squeeze(m, s, phi)
            }
            Instruction::Tms { a, b, s } => {
                let (a, b) = (self.index(a)?, self.index(b)?);
                let s = self.eval(s)?;
                self.state.two_mode_squeeze(a, b, s)
            }
            Instruction::Bs { a, b, theta, phi } => {
                let (a, b) = (self.index(a)?, self.index(b)?);
                let (theta, phi) = (self.eval(theta)?, self.eval(phi)?);
                self.state.beamsplitter(a, b, theta, phi)
            }
            Instruction::Loss { mode, eta } => {
                let m = self.index(mode)?;
                let eta = self.eval(eta)?;
                self.state.loss(m, eta)
            }
            Instruction::Amplify { mode, gain } => {
                let m = self.index(mode)?;
                let gain = self.eval(gain)?;
                self.state.amplify(m, gain)
            }
            Instruction::Noise { mode, n } => {
                let m = self.index(mode)?;
                let n = self.eval(n)?;
                self.state.add_noise(m, n)
            }
            Instruction::Channel { modes, x, y } => {
                let idx = modes.iter().map(|m| self.index(m)).collect::<Result<Vec<_>>>()?;
                let dim = 2 * idx.len();
                let channel = GaussianChannel::new(square(x, dim), square(y, dim), idx, None)?;
                self.state.apply_channel(&channel)
            }
            Instruction::Homodyne {
                register,
                mode,
                angle,
                efficiency,
            } => {
                let m = self.index(mode)?;
                let angle = self.eval(angle)?;
                let value = match (source.replayed(register)?, &mut *source) {
                    (Some(v), _) => {
                        let v = v.scalar();
                        self.state.homodyne_conditioned(m, angle, *efficiency, v)?;
                        v
                    }
                    (None, Source::Sample(rng)) => self.state.homodyne(m, angle, *efficiency, rng)?,
                    (None, Source::Replay(_)) => unreachable!(),
                };
                let kind = MeasurementKind::Homodyne {
                    angle,
                    efficiency: *efficiency,
                };
                self.record(register, m, kind, OutcomeValue::Scalar(value));
                Ok(())
            }
            Instruction::Heterodyne { register, mode } => {
                let m = self.index(mode)?;
                let value = match (source.replayed(register)?, &mut *source) {
                    (Some(OutcomeValue::Pair(v)), _) => {
                        self.state.heterodyne_conditioned(m, v)?;
                        v
                    }
                    (Some(OutcomeValue::Scalar(_)), _) => {
                        return Err(Error::DimensionMismatch(format!(
                            "heterodyne register `{register}` needs a pair of values"
                        )))
                    }
                    (None, Source::Sample(rng)) => self.state.heterodyne(m, rng)?,
                    (None, Source::Replay(_)) => unreachable!(),
                };
                self.record(register, m, MeasurementKind::Heterodyne, OutcomeValue::Pair(value));
                Ok(())
            }
            Instruction::VacProject { register, mode } => {
                let m = self.index(mode)?;
                let probability = self.state.condition_on_no_absorption(m)?;
                self.record(register, m, MeasurementKind::VacuumFlag, OutcomeValue::Scalar(probability));
                Ok(())
            }
            Instruction::PhotonCount { mode, .. } => {
                let m = self.index(mode)?;
                match self.state.condition_on_absorption(m)? {}
            }
            Instruction::Kerr { .. } => Err(kerr_error()),
        }
    }
}

fn run(program: &CircuitProgram, source: &mut Source<'_>) -> Result<ExecutionTrace> {
    let (seed, shot_index) = source.ids();
    let mut machine = Machine {
        state: GaussianState::vacuum(0),
        modes: Vec::new(),
        registers: HashMap::new(),
        outcomes: Vec::new(),
    };
    // Consecutive declarations are appended together.
    let mut declared = Vec::new();
    for statement in program.statements() {
        match statement {
            Statement::Mode { name, init } => {
                declared.push(initial_state(name, init)?);
                machine.modes.push(name.clone());
            }
            Statement::Op(instr) => {
                machine.state.append_all(&declared);
                declared.clear();
                machine.step(instr, source)?;
            }
        }
    }
    machine.state.append_all(&declared);
    Ok(ExecutionTrace {
        seed,
        shot_index,
        outcomes: machine.outcomes,
        modes: machine.modes,
        final_state: machine.state,
    })
}
