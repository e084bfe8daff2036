use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use super::exec::square;
use super::{CircuitProgram, Instruction, Span, Statement};
use crate::channel::GaussianChannel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DiagnosticKind {
    SyntaxError,
    UnknownOpcode,
    UndeclaredMode,
    UseBeforeMeasure,
    /// A mode referenced after a measurement consumed it.
    DeadModeUse,
    DuplicateRegister,
    /// `mode` declaring a name that is still alive.
    DuplicateMode,
    /// The same mode passed twice to one instruction.
    RepeatedMode,
    /// A `channel` whose `(X, Y)` is not symmetric or not completely positive.
    InvalidChannel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, span: Span, message: impl Into<String>) -> Self {
        Self {
            kind,
            span,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {:?}: {}",
            self.span.line, self.span.col, self.kind, self.message
        )
    }
}

/// Checks the dataflow invariants: modes are declared and alive when used,
/// registers are written before they are read and written once. Literal
/// `channel` matrices are checked for complete positivity.
pub fn validate(program: &CircuitProgram) -> Vec<Diagnostic> {
    let mut alive: HashSet<&str> = HashSet::new();
    let mut consumed: HashSet<&str> = HashSet::new();
    let mut written: HashSet<&str> = HashSet::new();
    let mut out = Vec::new();

    for (i, statement) in program.statements().iter().enumerate() {
        let span = program.span(i).unwrap_or_default();
        let mut report = |kind, message: String| out.push(Diagnostic::new(kind, span, message));
        match statement {
            Statement::Mode { name, .. } => {
                if !alive.insert(name) {
                    report(DiagnosticKind::DuplicateMode, format!("mode `{name}` is already declared"));
                }
                consumed.remove(name.as_str());
            }
            Statement::Op(instr) => {
                let modes = instr.modes();
                for (k, &m) in modes.iter().enumerate() {
                    if modes[..k].contains(&m) {
                        report(
                            DiagnosticKind::RepeatedMode,
                            format!("mode `{m}` appears twice in `{}`", instr.opcode().keyword()),
                        );
                    } else if consumed.contains(m) {
                        report(
                            DiagnosticKind::DeadModeUse,
                            format!("mode `{m}` was consumed by an earlier measurement"),
                        );
                    } else if !alive.contains(m) {
                        report(DiagnosticKind::UndeclaredMode, format!("mode `{m}` is not declared"));
                    }
                }
                for param in instr.params() {
                    for r in param.registers() {
                        if !written.contains(r) {
                            report(
                                DiagnosticKind::UseBeforeMeasure,
                                format!("register `{r}` is read before any measurement writes it"),
                            );
                        }
                    }
                }
                if let Instruction::Channel { modes, x, y } = instr {
                    let dim = 2 * modes.len();
                    if x.len() == dim * dim && y.len() == dim * dim {
                        let local = (0..modes.len()).collect();
                        if let Err(e) = GaussianChannel::new(square(x, dim), square(y, dim), local, None) {
                            report(DiagnosticKind::InvalidChannel, e.to_string());
                        }
                    }
                }
                if let Some(r) = instr.target_register() {
                    if !written.insert(r) {
                        report(
                            DiagnosticKind::DuplicateRegister,
                            format!("register `{r}` is already written"),
                        );
                    }
                    for m in modes {
                        if alive.remove(m) {
                            consumed.insert(m);
                        }
                    }
                }
            }
        }
    }
    out
}
