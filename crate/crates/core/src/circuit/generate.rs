//! Random program generation for tests and benchmarks.

use std::f64::consts::PI;

use rand::Rng;

use super::{AffineExpr, CircuitProgram, InitialState, Instruction, Opcode};

/// Shape of the programs produced by [`random_program`].
#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub num_modes: usize,
    /// Number of non-measurement instructions.
    pub gates: usize,
    /// Number of measurements, interleaved with the gates.
    pub measurements: usize,
    /// Gate opcodes to draw from.
    pub gate_set: Vec<Opcode>,
    /// Measurement opcodes to draw from.
    pub measurement_set: Vec<Opcode>,
    /// Initial states to draw from for each declared mode.
    pub initial_states: Vec<InitialState>,
    pub max_squeezing: f64,
    pub max_displacement: f64,
    /// Lowest homodyne efficiency; `1.0` gives ideal detectors.
    pub min_efficiency: f64,
    /// Allow displacements that depend on earlier outcomes.
    pub feedforward: bool,
    /// Re-declare a fresh vacuum mode after each measurement, keeping the
    /// number of live modes constant.
    pub redeclare: bool,
}

impl GeneratorConfig {
    /// All-Gaussian gates with homodyne measurements on vacuum inputs.
    pub fn gaussian(num_modes: usize, gates: usize, measurements: usize) -> Self {
        Self {
            num_modes,
            gates,
            measurements,
            gate_set: vec![
                Opcode::Displace,
                Opcode::Rotate,
                Opcode::Squeeze,
                Opcode::Tms,
                Opcode::Bs,
                Opcode::Loss,
                Opcode::Amplify,
                Opcode::Noise,
                Opcode::Channel,
            ],
            measurement_set: vec![Opcode::Homodyne],
            initial_states: vec![InitialState::Vacuum],
            max_squeezing: 1.0,
            max_displacement: 1.0,
            min_efficiency: 1.0,
            feedforward: false,
            redeclare: true,
        }
    }
}

fn mode_name(i: usize) -> String {
    format!("q{i}")
}

fn pick<T: Copy, R: Rng>(items: &[T], rng: &mut R) -> T {
    items[rng.random_range(0..items.len())]
}

fn symmetric<R: Rng>(rng: &mut R, bound: f64) -> f64 {
    if bound == 0.0 {
        0.0
    } else {
        rng.random_range(-bound..=bound)
    }
}

fn distinct_pair<R: Rng>(live: &[usize], rng: &mut R) -> (String, String) {
    let a = rng.random_range(0..live.len());
    let mut b = rng.random_range(0..live.len() - 1);
    if b >= a {
        b += 1;
    }
    (mode_name(live[a]), mode_name(live[b]))
}

fn random_gate<R: Rng>(op: Opcode, live: &[usize], registers: &[String], config: &GeneratorConfig, rng: &mut R) -> Instruction {
    let mode = mode_name(pick(live, rng));
    match op {
        Opcode::Displace => {
            let d = config.max_displacement;
            let mut dx = AffineExpr::constant(symmetric(rng, d));
            let mut dp = AffineExpr::constant(symmetric(rng, d));
            if config.feedforward && !registers.is_empty() && rng.random_bool(0.5) {
                let r = &registers[rng.random_range(0..registers.len())];
                dx = dx.with_term(symmetric(rng, 1.0), r);
                dp = dp.with_term(symmetric(rng, 1.0), r);
            }
            Instruction::Displace { mode, dx, dp }
        }
        Opcode::Rotate => Instruction::Rotate {
            mode,
            theta: rng.random_range(0.0..2.0 * PI).into(),
        },
        Opcode::Squeeze => Instruction::Squeeze {
            mode,
            s: symmetric(rng, config.max_squeezing).into(),
            phi: rng.random_range(0.0..2.0 * PI).into(),
        },
        Opcode::Tms | Opcode::Bs if live.len() < 2 => random_gate(Opcode::Rotate, live, registers, config, rng),
        Opcode::Tms => {
            let (a, b) = distinct_pair(live, rng);
            Instruction::Tms {
                a,
                b,
                s: symmetric(rng, config.max_squeezing).into(),
            }
        }
        Opcode::Bs => {
            let (a, b) = distinct_pair(live, rng);
            Instruction::Bs {
                a,
                b,
                theta: rng.random_range(0.0..PI).into(),
                phi: rng.random_range(0.0..2.0 * PI).into(),
            }
        }
        Opcode::Loss => Instruction::Loss {
            mode,
            eta: rng.random_range(0.5..=1.0).into(),
        },
        Opcode::Amplify => Instruction::Amplify {
            mode,
            gain: rng.random_range(1.0..=1.3).into(),
        },
        Opcode::Noise => Instruction::Noise {
            mode,
            n: rng.random_range(0.0..=0.3).into(),
        },
        Opcode::Channel => {
            // Attenuated rotation plus excess noise.
            let eta: f64 = rng.random_range(0.5..=1.0);
            let extra: f64 = rng.random_range(0.0..=0.2);
            let (s, c) = rng.random_range(0.0..2.0 * PI).sin_cos();
            let k = eta.sqrt();
            let y = 1.0 - eta + extra;
            Instruction::Channel {
                modes: vec![mode],
                x: vec![k * c, k * s, -k * s, k * c],
                y: vec![y, 0.0, 0.0, y],
            }
        }
        Opcode::Kerr => Instruction::Kerr {
            mode,
            kappa: rng.random_range(0.0..=0.5).into(),
        },
        measurement => unreachable!("{measurement:?} is not a gate"),
    }
}

/// Draws a valid program according to `config`.
///
/// Modes are named `q0, q1, …` and registers `m0, m1, …`. With
/// `redeclare = false`, measurements stop once a single live mode remains.
pub fn random_program<R: Rng>(config: &GeneratorConfig, rng: &mut R) -> CircuitProgram {
    assert!(config.num_modes >= 1, "need at least one mode");
    assert!(!config.gate_set.is_empty() || config.gates == 0);
    assert!(!config.measurement_set.is_empty() || config.measurements == 0);
    let mut program = CircuitProgram::new();
    for i in 0..config.num_modes {
        program.declare(&mode_name(i), pick(&config.initial_states, rng));
    }
    let mut live: Vec<usize> = (0..config.num_modes).collect();
    let mut registers: Vec<String> = Vec::new();

    let total = config.gates + config.measurements;
    // Choose which slots hold measurements.
    let mut is_measurement = vec![false; total];
    let mut placed = 0;
    while placed < config.measurements {
        let slot = rng.random_range(0..total);
        if !is_measurement[slot] {
            is_measurement[slot] = true;
            placed += 1;
        }
    }

    for measure in is_measurement {
        if !measure {
            let op = pick(&config.gate_set, rng);
            let instr = random_gate(op, &live, &registers, config, rng);
            program.push(instr);
            continue;
        }
        if !config.redeclare && live.len() == 1 {
            continue;
        }
        let slot = rng.random_range(0..live.len());
        let mode = mode_name(live[slot]);
        let register = format!("m{}", registers.len());
        let instr = match pick(&config.measurement_set, rng) {
            Opcode::Homodyne => Instruction::Homodyne {
                register: register.clone(),
                mode: mode.clone(),
                angle: rng.random_range(0.0..PI).into(),
                efficiency: if config.min_efficiency < 1.0 {
                    rng.random_range(config.min_efficiency..=1.0)
                } else {
                    1.0
                },
            },
            Opcode::Heterodyne => Instruction::Heterodyne {
                register: register.clone(),
                mode: mode.clone(),
            },
            Opcode::VacProject => Instruction::VacProject {
                register: register.clone(),
                mode: mode.clone(),
            },
            Opcode::PhotonCount => Instruction::PhotonCount {
                register: register.clone(),
                mode: mode.clone(),
            },
            other => unreachable!("{other:?} is not a measurement"),
        };
        program.push(instr);
        registers.push(register);
        if config.redeclare {
            program.declare(&mode, InitialState::Vacuum);
        } else {
            live.remove(slot);
        }
    }
    program
}
