//! Circuit programs: data model, `.cvq` text format, validation and execution.
//!
//! Modes and registers are referred to by name. Measurements consume their
//! mode; a later `mode` statement with the same name declares a fresh vacuum
//! (or otherwise initialized) mode appended to the state.

mod ensemble;
mod exec;
pub mod generate;
mod parse;
mod validate;

use std::fmt;

use serde::Serialize;

pub use ensemble::{execute_ensemble, EnsembleState};
pub(crate) use exec::check_valid;
pub use exec::{execute, execute_replay, execute_shot, ExecutionTrace, RegisterValues, ShotState, TraceReport};
pub use parse::parse;
pub use validate::{validate, Diagnostic, DiagnosticKind};

/// Initial-state token of a mode declaration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    Vacuum,
    Coherent { x: f64, p: f64 },
    Squeezed { s: f64, phi: f64 },
    Thermal { n: f64 },
    Fock(u32),
}

/// `constant + Σ coefficient·register`, evaluated against a shot's outcomes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AffineExpr {
    pub constant: f64,
    pub terms: Vec<(f64, String)>,
}

impl AffineExpr {
    pub fn constant(value: f64) -> Self {
        Self {
            constant: value,
            terms: Vec::new(),
        }
    }

    pub fn register(name: &str) -> Self {
        Self {
            constant: 0.0,
            terms: vec![(1.0, name.to_string())],
        }
    }

    /// Adds `coefficient·register`, merging with an existing term.
    pub fn with_term(mut self, coefficient: f64, register: &str) -> Self {
        match self.terms.iter_mut().find(|(_, r)| r == register) {
            Some((c, _)) => *c += coefficient,
            None => self.terms.push((coefficient, register.to_string())),
        }
        self
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn registers(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|(_, r)| r.as_str())
    }

    pub fn eval(&self, lookup: impl Fn(&str) -> Option<f64>) -> crate::Result<f64> {
        let mut value = self.constant;
        for (coefficient, register) in &self.terms {
            let v = lookup(register).ok_or_else(|| crate::Error::UnknownRegister(register.clone()))?;
            value += coefficient * v;
        }
        Ok(value)
    }
}

impl From<f64> for AffineExpr {
    fn from(value: f64) -> Self {
        AffineExpr::constant(value)
    }
}

/// Instruction opcodes. Every opcode maps to exactly one ingredient class in
/// [`crate::classify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Opcode {
    Displace,
    Rotate,
    Squeeze,
    Tms,
    Bs,
    Loss,
    Amplify,
    Noise,
    Channel,
    Homodyne,
    Heterodyne,
    VacProject,
    PhotonCount,
    Kerr,
}

impl Opcode {
    pub const ALL: [Opcode; 14] = [
        Opcode::Displace,
        Opcode::Rotate,
        Opcode::Squeeze,
        Opcode::Tms,
        Opcode::Bs,
        Opcode::Loss,
        Opcode::Amplify,
        Opcode::Noise,
        Opcode::Channel,
        Opcode::Homodyne,
        Opcode::Heterodyne,
        Opcode::VacProject,
        Opcode::PhotonCount,
        Opcode::Kerr,
    ];

    /// Keyword in the text format.
    pub fn keyword(self) -> &'static str {
        match self {
            Opcode::Displace => "displace",
            Opcode::Rotate => "rotate",
            Opcode::Squeeze => "squeeze",
            Opcode::Tms => "tms",
            Opcode::Bs => "bs",
            Opcode::Loss => "loss",
            Opcode::Amplify => "amplify",
            Opcode::Noise => "noise",
            Opcode::Channel => "channel",
            Opcode::Homodyne => "homodyne",
            Opcode::Heterodyne => "heterodyne",
            Opcode::VacProject => "vacproject",
            Opcode::PhotonCount => "photoncount",
            Opcode::Kerr => "kerr",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Opcode> {
        Opcode::ALL.into_iter().find(|op| op.keyword() == word)
    }

    pub fn is_measurement(self) -> bool {
        matches!(
            self,
            Opcode::Homodyne | Opcode::Heterodyne | Opcode::VacProject | Opcode::PhotonCount
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    Displace { mode: String, dx: AffineExpr, dp: AffineExpr },
    Rotate { mode: String, theta: AffineExpr },
    Squeeze { mode: String, s: AffineExpr, phi: AffineExpr },
    Tms { a: String, b: String, s: AffineExpr },
    Bs { a: String, b: String, theta: AffineExpr, phi: AffineExpr },
    Loss { mode: String, eta: AffineExpr },
    Amplify { mode: String, gain: AffineExpr },
    Noise { mode: String, n: AffineExpr },
    /// Generic `(X, Y)` channel; matrices row-major, `2M × 2M` for `M` modes.
    Channel { modes: Vec<String>, x: Vec<f64>, y: Vec<f64> },
    Homodyne { register: String, mode: String, angle: AffineExpr, efficiency: f64 },
    Heterodyne { register: String, mode: String },
    VacProject { register: String, mode: String },
    PhotonCount { register: String, mode: String },
    Kerr { mode: String, kappa: AffineExpr },
}

impl Instruction {
    pub fn opcode(&self) -> Opcode {
        match self {
            Instruction::Displace { .. } => Opcode::Displace,
            Instruction::Rotate { .. } => Opcode::Rotate,
            Instruction::Squeeze { .. } => Opcode::Squeeze,
            Instruction::Tms { .. } => Opcode::Tms,
            Instruction::Bs { .. } => Opcode::Bs,
            Instruction::Loss { .. } => Opcode::Loss,
            Instruction::Amplify { .. } => Opcode::Amplify,
            Instruction::Noise { .. } => Opcode::Noise,
            Instruction::Channel { .. } => Opcode::Channel,
            Instruction::Homodyne { .. } => Opcode::Homodyne,
            Instruction::Heterodyne { .. } => Opcode::Heterodyne,
            Instruction::VacProject { .. } => Opcode::VacProject,
            Instruction::PhotonCount { .. } => Opcode::PhotonCount,
            Instruction::Kerr { .. } => Opcode::Kerr,
        }
    }

    /// Mode operands in order.
    pub fn modes(&self) -> Vec<&str> {
        match self {
            Instruction::Displace { mode, .. }
            | Instruction::Rotate { mode, .. }
            | Instruction::Squeeze { mode, .. }
            | Instruction::Loss { mode, .. }
            | Instruction::Amplify { mode, .. }
            | Instruction::Noise { mode, .. }
            | Instruction::Homodyne { mode, .. }
            | Instruction::Heterodyne { mode, .. }
            | Instruction::VacProject { mode, .. }
            | Instruction::PhotonCount { mode, .. }
            | Instruction::Kerr { mode, .. } => vec![mode.as_str()],
            Instruction::Tms { a, b, .. } | Instruction::Bs { a, b, .. } => vec![a.as_str(), b.as_str()],
            Instruction::Channel { modes, .. } => modes.iter().map(String::as_str).collect(),
        }
    }

    /// Real parameters in operand order.
    pub fn params(&self) -> Vec<&AffineExpr> {
        match self {
            Instruction::Displace { dx, dp, .. } => vec![dx, dp],
            Instruction::Rotate { theta, .. } => vec![theta],
            Instruction::Squeeze { s, phi, .. } => vec![s, phi],
            Instruction::Tms { s, .. } => vec![s],
            Instruction::Bs { theta, phi, .. } => vec![theta, phi],
            Instruction::Loss { eta, .. } => vec![eta],
            Instruction::Amplify { gain, .. } => vec![gain],
            Instruction::Noise { n, .. } => vec![n],
            Instruction::Homodyne { angle, .. } => vec![angle],
            Instruction::Kerr { kappa, .. } => vec![kappa],
            Instruction::Channel { .. }
            | Instruction::Heterodyne { .. }
            | Instruction::VacProject { .. }
            | Instruction::PhotonCount { .. } => Vec::new(),
        }
    }

    /// Register written by a measurement.
    pub fn target_register(&self) -> Option<&str> {
        match self {
            Instruction::Homodyne { register, .. }
            | Instruction::Heterodyne { register, .. }
            | Instruction::VacProject { register, .. }
            | Instruction::PhotonCount { register, .. } => Some(register),
            _ => None,
        }
    }

    pub fn uses_feedforward(&self) -> bool {
        self.params().iter().any(|p| !p.is_constant())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Mode { name: String, init: InitialState },
    Op(Instruction),
}

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

/// An ordered list of mode declarations and instructions.
///
/// Equality ignores source positions.
#[derive(Debug, Clone, Default)]
pub struct CircuitProgram {
    statements: Vec<Statement>,
    spans: Vec<Option<Span>>,
}

impl PartialEq for CircuitProgram {
    fn eq(&self, other: &Self) -> bool {
        self.statements == other.statements
    }
}

impl CircuitProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, name: &str, init: InitialState) -> &mut Self {
        self.push_statement(
            Statement::Mode {
                name: name.to_string(),
                init,
            },
            None,
        )
    }

    pub fn push(&mut self, instruction: Instruction) -> &mut Self {
        self.push_statement(Statement::Op(instruction), None)
    }

    pub(crate) fn push_statement(&mut self, statement: Statement, span: Option<Span>) -> &mut Self {
        self.statements.push(statement);
        self.spans.push(span);
        self
    }

    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    pub fn span(&self, index: usize) -> Option<Span> {
        self.spans.get(index).copied().flatten()
    }

    pub fn mode_declarations(&self) -> impl Iterator<Item = (&str, &InitialState)> {
        self.statements.iter().filter_map(|s| match s {
            Statement::Mode { name, init } => Some((name.as_str(), init)),
            Statement::Op(_) => None,
        })
    }

    pub fn instructions(&self) -> impl Iterator<Item = &Instruction> {
        self.statements.iter().filter_map(|s| match s {
            Statement::Op(i) => Some(i),
            Statement::Mode { .. } => None,
        })
    }

    /// Registers written by measurements, in program order.
    pub fn registers(&self) -> Vec<&str> {
        self.instructions().filter_map(Instruction::target_register).collect()
    }

    pub fn num_declared_modes(&self) -> usize {
        self.mode_declarations().count()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }
}

fn fmt_number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    write!(f, "{v:?}")
}

impl fmt::Display for AffineExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return fmt_number(f, self.constant);
        }
        f.write_str("(")?;
        for (i, (c, r)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            fmt_number(f, *c)?;
            write!(f, "*{r}")?;
        }
        if self.constant != 0.0 {
            f.write_str(" + ")?;
            fmt_number(f, self.constant)?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            InitialState::Vacuum => f.write_str("vacuum"),
            InitialState::Coherent { x, p } => write!(f, "coherent({x:?}, {p:?})"),
            InitialState::Squeezed { s, phi } => write!(f, "squeezed({s:?}, {phi:?})"),
            InitialState::Thermal { n } => write!(f, "thermal({n:?})"),
            InitialState::Fock(k) => write!(f, "fock({k})"),
        }
    }
}

fn fmt_matrix(f: &mut fmt::Formatter<'_>, values: &[f64]) -> fmt::Result {
    f.write_str("[")?;
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        fmt_number(f, *v)?;
    }
    f.write_str("]")
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(register) = self.target_register() {
            write!(f, "{register} = ")?;
        }
        f.write_str(self.opcode().keyword())?;
        match self {
            Instruction::Channel { modes, x, y } => {
                for m in modes {
                    write!(f, " {m}")?;
                }
                f.write_str(" X=")?;
                fmt_matrix(f, x)?;
                f.write_str(" Y=")?;
                fmt_matrix(f, y)?;
            }
            Instruction::Homodyne {
                mode,
                angle,
                efficiency,
                ..
            } => {
                write!(f, " {mode} {angle} ")?;
                fmt_number(f, *efficiency)?;
            }
            other => {
                for m in other.modes() {
                    write!(f, " {m}")?;
                }
                for p in other.params() {
                    write!(f, " {p}")?;
                }
            }
        }
        f.write_str(";")
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Mode {
                name,
                init: InitialState::Vacuum,
            } => write!(f, "mode {name};"),
            Statement::Mode { name, init } => write!(f, "mode {name} init={init};"),
            Statement::Op(i) => i.fmt(f),
        }
    }
}

impl fmt::Display for CircuitProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.statements {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}
