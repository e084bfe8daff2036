//! Parser for the `.cvq` circuit format.
//!
//! Statements end with `;` and `#` starts a comment. Operand expressions are
//! affine in measured registers:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := number | 'pi' | register | '(' expr ')' | '-' factor | '+' factor
//! ```
//!
//! Operands are separated by whitespace, so a `+`/`-` that has whitespace
//! before it but none after it starts a new operand: `displace a 1 -1;` has
//! two operands, `displace a (1 - 1) 0;` and `displace a 1-1 0;` have a
//! single first operand. Constant arithmetic is folded at parse time.

use std::f64::consts::PI;

use super::validate::{validate, Diagnostic, DiagnosticKind};
use super::{AffineExpr, CircuitProgram, InitialState, Instruction, Opcode, Span, Statement};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Semi,
    Eq,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Unknown(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Span,
    space_before: bool,
}

fn lex(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let mut space_before = true;
    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            space_before = true;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            space_before = true;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            space_before = true;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let literal: String = chars[start..i].iter().collect();
            match literal.parse::<f64>() {
                Ok(v) => Tok::Number(v),
                Err(_) => {
                    return Err(Diagnostic::new(
                        DiagnosticKind::SyntaxError,
                        span,
                        format!("malformed number `{literal}`"),
                    ))
                }
            }
        } else {
            i += 1;
            match c {
                ';' => Tok::Semi,
                '=' => Tok::Eq,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                ',' => Tok::Comma,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                other => Tok::Unknown(other),
            }
        };
        col += i - start;
        tokens.push(Token {
            tok,
            span,
            space_before,
        });
        space_before = false;
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    last_span: Span,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn span(&self) -> Span {
        self.tokens.get(self.pos).map(|t| t.span).unwrap_or(self.last_span)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos)?;
        self.pos += 1;
        Some(t.tok.clone())
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(Diagnostic::new(DiagnosticKind::SyntaxError, self.span(), message))
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected {what}, found {}", self.describe()))
        }
    }

    fn describe(&self) -> String {
        match self.peek() {
            None => "end of input".into(),
            Some(Tok::Ident(s)) => format!("`{s}`"),
            Some(Tok::Number(v)) => format!("`{v}`"),
            Some(Tok::Semi) => "`;`".into(),
            Some(Tok::Unknown(c)) => format!("`{c}`"),
            Some(other) => format!("{other:?}"),
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.error(format!("expected {what}, found {}", self.describe())),
        }
    }

    fn skip_statement(&mut self) {
        while let Some(t) = self.bump() {
            if t == Tok::Semi {
                break;
            }
        }
    }

    /// True when the `+`/`-` at the cursor starts a new operand.
    fn at_operand_boundary(&self) -> bool {
        let Some(cur) = self.tokens.get(self.pos) else {
            return false;
        };
        let Some(next) = self.tokens.get(self.pos + 1) else {
            return false;
        };
        cur.space_before && !next.space_before
    }

    fn operand(&mut self) -> PResult<AffineExpr> {
        self.expr(true)
    }

    fn constant_operand(&mut self, what: &str) -> PResult<f64> {
        let span = self.span();
        let e = self.operand()?;
        if e.is_constant() {
            Ok(e.constant)
        } else {
            Err(Diagnostic::new(
                DiagnosticKind::SyntaxError,
                span,
                format!("{what} must be a constant"),
            ))
        }
    }

    fn expr(&mut self, top_level: bool) -> PResult<AffineExpr> {
        let mut acc = self.term()?;
        while let Some(op @ (Tok::Plus | Tok::Minus)) = self.peek().cloned() {
            if top_level && self.at_operand_boundary() {
                break;
            }
            self.pos += 1;
            let rhs = self.term()?;
            acc = add(acc, if op == Tok::Plus { rhs } else { negate(rhs) });
        }
        Ok(acc)
    }

    fn term(&mut self) -> PResult<AffineExpr> {
        let mut acc = self.factor()?;
        while let Some(op @ (Tok::Star | Tok::Slash)) = self.peek().cloned() {
            let span = self.span();
            self.pos += 1;
            let rhs = self.factor()?;
            acc = if op == Tok::Star {
                match (acc.is_constant(), rhs.is_constant()) {
                    (true, _) => scale(rhs, acc.constant),
                    (_, true) => scale(acc, rhs.constant),
                    _ => {
                        return Err(Diagnostic::new(
                            DiagnosticKind::SyntaxError,
                            span,
                            "product of two registers is not affine",
                        ))
                    }
                }
            } else if rhs.is_constant() {
                scale(acc, 1.0 / rhs.constant)
            } else {
                return Err(Diagnostic::new(
                    DiagnosticKind::SyntaxError,
                    span,
                    "division by a register is not affine",
                ));
            };
        }
        Ok(acc)
    }

    fn factor(&mut self) -> PResult<AffineExpr> {
        match self.peek().cloned() {
            Some(Tok::Number(v)) => {
                self.pos += 1;
                Ok(AffineExpr::constant(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if name == "pi" {
                    Ok(AffineExpr::constant(PI))
                } else {
                    Ok(AffineExpr::register(&name))
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr(false)?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(negate(self.factor()?))
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.factor()
            }
            _ => self.error(format!("expected an expression, found {}", self.describe())),
        }
    }

    fn constant_list(&mut self) -> PResult<Vec<f64>> {
        self.expect(Tok::LBracket, "`[`")?;
        let mut values = Vec::new();
        if self.peek() == Some(&Tok::RBracket) {
            self.pos += 1;
            return Ok(values);
        }
        loop {
            let span = self.span();
            let e = self.expr(false)?;
            if !e.is_constant() {
                return Err(Diagnostic::new(
                    DiagnosticKind::SyntaxError,
                    span,
                    "matrix entries must be constants",
                ));
            }
            values.push(e.constant);
            match self.bump() {
                Some(Tok::Comma) => continue,
                Some(Tok::RBracket) => break,
                _ => {
                    self.pos -= 1;
                    return self.error("expected `,` or `]`");
                }
            }
        }
        Ok(values)
    }

    fn init_args(&mut self, count: usize) -> PResult<Vec<f64>> {
        self.expect(Tok::LParen, "`(`")?;
        let mut values = Vec::with_capacity(count);
        for k in 0..count {
            if k > 0 {
                self.expect(Tok::Comma, "`,`")?;
            }
            let span = self.span();
            let e = self.expr(false)?;
            if !e.is_constant() {
                return Err(Diagnostic::new(
                    DiagnosticKind::SyntaxError,
                    span,
                    "initial-state parameters must be constants",
                ));
            }
            values.push(e.constant);
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(values)
    }

    fn initial_state(&mut self) -> PResult<InitialState> {
        let span = self.span();
        let kind = self.ident("initial state")?;
        Ok(match kind.as_str() {
            "vacuum" => InitialState::Vacuum,
            "coherent" => {
                let v = self.init_args(2)?;
                InitialState::Coherent { x: v[0], p: v[1] }
            }
            "squeezed" => {
                let v = self.init_args(2)?;
                InitialState::Squeezed { s: v[0], phi: v[1] }
            }
            "thermal" => InitialState::Thermal { n: self.init_args(1)?[0] },
            "fock" => {
                let k = self.init_args(1)?[0];
                if k < 0.0 || k.fract() != 0.0 || k > u32::MAX as f64 {
                    return Err(Diagnostic::new(
                        DiagnosticKind::SyntaxError,
                        span,
                        "fock(k) needs a non-negative integer",
                    ));
                }
                InitialState::Fock(k as u32)
            }
            other => {
                return Err(Diagnostic::new(
                    DiagnosticKind::SyntaxError,
                    span,
                    format!("unknown initial state `{other}`"),
                ))
            }
        })
    }

    fn statement(&mut self) -> PResult<Statement> {
        let first = self.ident("a statement")?;
        if first == "mode" {
            let name = self.ident("mode name")?;
            let init = if self.peek() == Some(&Tok::Ident("init".into())) {
                self.pos += 1;
                self.expect(Tok::Eq, "`=`")?;
                self.initial_state()?
            } else {
                InitialState::Vacuum
            };
            self.expect(Tok::Semi, "`;`")?;
            return Ok(Statement::Mode { name, init });
        }

        let (register, keyword_span, keyword) = if self.peek() == Some(&Tok::Eq) {
            self.pos += 1;
            let span = self.span();
            (Some(first), span, self.ident("measurement opcode")?)
        } else {
            (None, self.tokens[self.pos - 1].span, first)
        };
        let Some(opcode) = Opcode::from_keyword(&keyword) else {
            return Err(Diagnostic::new(
                DiagnosticKind::UnknownOpcode,
                keyword_span,
                format!("unknown opcode `{keyword}`"),
            ));
        };
        match (&register, opcode.is_measurement()) {
            (None, true) => {
                return Err(Diagnostic::new(
                    DiagnosticKind::SyntaxError,
                    keyword_span,
                    format!("`{keyword}` must assign its outcome: `<reg> = {keyword} ...`"),
                ))
            }
            (Some(_), false) => {
                return Err(Diagnostic::new(
                    DiagnosticKind::SyntaxError,
                    keyword_span,
                    format!("`{keyword}` produces no outcome to assign"),
                ))
            }
            _ => {}
        }
        let register = register.unwrap_or_default();

        let instruction = match opcode {
            Opcode::Displace => Instruction::Displace {
                mode: self.ident("mode")?,
                dx: self.operand()?,
                dp: self.operand()?,
            },
            Opcode::Rotate => Instruction::Rotate {
                mode: self.ident("mode")?,
                theta: self.operand()?,
            },
            Opcode::Squeeze => Instruction::Squeeze {
                mode: self.ident("mode")?,
                s: self.operand()?,
                phi: self.operand()?,
            },
            Opcode::Tms => Instruction::Tms {
                a: self.ident("mode")?,
                b: self.ident("mode")?,
                s: self.operand()?,
            },
            Opcode::Bs => Instruction::Bs {
                a: self.ident("mode")?,
                b: self.ident("mode")?,
                theta: self.operand()?,
                phi: self.operand()?,
            },
            Opcode::Loss => Instruction::Loss {
                mode: self.ident("mode")?,
                eta: self.operand()?,
            },
            Opcode::Amplify => Instruction::Amplify {
                mode: self.ident("mode")?,
                gain: self.operand()?,
            },
            Opcode::Noise => Instruction::Noise {
                mode: self.ident("mode")?,
                n: self.operand()?,
            },
            Opcode::Kerr => Instruction::Kerr {
                mode: self.ident("mode")?,
                kappa: self.operand()?,
            },
            Opcode::Channel => {
                let mut modes = Vec::new();
                loop {
                    let name = self.ident("mode or `X=`")?;
                    if name == "X" {
                        break;
                    }
                    modes.push(name);
                }
                if modes.is_empty() {
                    return self.error("channel needs at least one mode");
                }
                self.expect(Tok::Eq, "`=`")?;
                let x = self.constant_list()?;
                if self.ident("`Y`")? != "Y" {
                    return self.error("expected `Y=`");
                }
                self.expect(Tok::Eq, "`=`")?;
                let y = self.constant_list()?;
                let dim = 2 * modes.len();
                if x.len() != dim * dim || y.len() != dim * dim {
                    return Err(Diagnostic::new(
                        DiagnosticKind::SyntaxError,
                        keyword_span,
                        format!("channel on {} modes needs {} entries in X and Y", modes.len(), dim * dim),
                    ));
                }
                Instruction::Channel { modes, x, y }
            }
            Opcode::Homodyne => {
                let mode = self.ident("mode")?;
                let angle = self.operand()?;
                let efficiency = self.constant_operand("homodyne efficiency")?;
                Instruction::Homodyne {
                    register,
                    mode,
                    angle,
                    efficiency,
                }
            }
            Opcode::Heterodyne => Instruction::Heterodyne {
                register,
                mode: self.ident("mode")?,
            },
            Opcode::VacProject => Instruction::VacProject {
                register,
                mode: self.ident("mode")?,
            },
            Opcode::PhotonCount => Instruction::PhotonCount {
                register,
                mode: self.ident("mode")?,
            },
        };
        self.expect(Tok::Semi, "`;`")?;
        Ok(Statement::Op(instruction))
    }
}

fn add(mut a: AffineExpr, b: AffineExpr) -> AffineExpr {
    a.constant += b.constant;
    for (c, r) in b.terms {
        a = a.with_term(c, &r);
    }
    a
}

fn negate(e: AffineExpr) -> AffineExpr {
    scale(e, -1.0)
}

fn scale(mut e: AffineExpr, k: f64) -> AffineExpr {
    e.constant *= k;
    for (c, _) in &mut e.terms {
        *c *= k;
    }
    e
}

/// Parses and validates a `.cvq` source. On failure returns every diagnostic
/// found, ordered by position.
pub fn parse(text: &str) -> Result<CircuitProgram, Vec<Diagnostic>> {
    let tokens = lex(text).map_err(|d| vec![d])?;
    let last_span = tokens.last().map(|t| t.span).unwrap_or(Span { line: 1, col: 1 });
    let mut parser = Parser {
        tokens,
        pos: 0,
        last_span,
    };
    let mut program = CircuitProgram::new();
    let mut diagnostics = Vec::new();
    while parser.pos < parser.tokens.len() {
        let span = parser.span();
        match parser.statement() {
            Ok(statement) => {
                program.push_statement(statement, Some(span));
            }
            Err(d) => {
                diagnostics.push(d);
                // Resume after the statement containing the error.
                if parser.pos > 0 && parser.tokens.get(parser.pos - 1).map(|t| &t.tok) == Some(&Tok::Semi) {
                    continue;
                }
                parser.skip_statement();
            }
        }
    }
    if !diagnostics.is_empty() {
        return Err(diagnostics);
    }
    let semantic = validate(&program);
    if semantic.is_empty() {
        Ok(program)
    } else {
        Err(semantic)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<DiagnosticKind> {
        parse(text).unwrap_err().into_iter().map(|d| d.kind).collect()
    }

    #[test]
    fn minimal_program() {
        let p = parse("mode a; squeeze a 0.5 0; m = homodyne a 0 1.0;").unwrap();
        assert_eq!(p.statements().len(), 3);
        assert_eq!(p.instructions().count(), 2);
        assert_eq!(p.registers(), vec!["m"]);
    }

    #[test]
    fn undeclared_mode_reports_line() {
        let err = parse("displace b 1 0;").unwrap_err();
        assert_eq!(err.len(), 1);
        assert_eq!(err[0].kind, DiagnosticKind::UndeclaredMode);
        assert_eq!(err[0].span.line, 1);
    }

    #[test]
    fn register_before_measurement() {
        assert_eq!(kinds("mode a; displace a (2*m) 0;"), vec![DiagnosticKind::UseBeforeMeasure]);
    }

    #[test]
    fn unknown_opcode_and_recovery() {
        let err = parse("mode a;\nfrobnicate a 1;\ndisplace a 1;\n").unwrap_err();
        assert_eq!(err[0].kind, DiagnosticKind::UnknownOpcode);
        assert_eq!(err[0].span, Span { line: 2, col: 1 });
        assert_eq!(err[1].kind, DiagnosticKind::SyntaxError);
        assert_eq!(err[1].span.line, 3);
    }

    #[test]
    fn operand_boundaries() {
        let p = parse("mode a; displace a 1 -1;").unwrap();
        assert_eq!(
            p.instructions().next().unwrap(),
            &Instruction::Displace {
                mode: "a".into(),
                dx: 1.0.into(),
                dp: (-1.0).into()
            }
        );
        let p = parse("mode a; displace a 1 - 1 2; displace a 1-1 3;").unwrap();
        for (i, instr) in p.instructions().enumerate() {
            let Instruction::Displace { dx, dp, .. } = instr else { unreachable!() };
            assert_eq!(dx.constant, 0.0);
            assert_eq!(dp.constant, (i + 2) as f64);
        }
    }

    #[test]
    fn affine_feedforward_expressions() {
        let src = "mode a; mode b; m1 = homodyne a 0 1.0; m2 = heterodyne b; \
                   mode c; displace c 2*m1 + 0.5 (-m1 + m2); rotate c pi/4;";
        let p = parse(src).unwrap();
        let instrs: Vec<_> = p.instructions().collect();
        let Instruction::Displace { dx, dp, .. } = instrs[2] else { panic!() };
        assert_eq!(dx, &AffineExpr::constant(0.5).with_term(2.0, "m1"));
        assert_eq!(dp, &AffineExpr::constant(0.0).with_term(-1.0, "m1").with_term(1.0, "m2"));
        let Instruction::Rotate { theta, .. } = instrs[3] else { panic!() };
        assert_eq!(theta.constant, PI / 4.0);
    }

    #[test]
    fn non_affine_is_rejected() {
        assert_eq!(
            kinds("mode a; m = homodyne a 0 1.0; mode b; displace b (m*m) 0;"),
            vec![DiagnosticKind::SyntaxError]
        );
        assert_eq!(
            kinds("mode a; m = homodyne a 0 1.0; mode b; rotate b 1/m;"),
            vec![DiagnosticKind::SyntaxError]
        );
        assert_eq!(kinds("mode a; m = homodyne a 0 k;"), vec![DiagnosticKind::SyntaxError]);
    }

    #[test]
    fn initial_states_and_comments() {
        let src = "# header\nmode a init=coherent(1, -0.5); # trailing\n\
                   mode b init=squeezed(0.3, pi/2);\nmode c init=thermal(0.2);\nmode d init=fock(1);";
        let p = parse(src).unwrap();
        let inits: Vec<InitialState> = p.mode_declarations().map(|(_, i)| *i).collect();
        assert_eq!(
            inits,
            vec![
                InitialState::Coherent { x: 1.0, p: -0.5 },
                InitialState::Squeezed { s: 0.3, phi: PI / 2.0 },
                InitialState::Thermal { n: 0.2 },
                InitialState::Fock(1)
            ]
        );
        assert_eq!(kinds("mode a init=fock(1.5);"), vec![DiagnosticKind::SyntaxError]);
    }

    #[test]
    fn channel_statement() {
        let p = parse("mode a; channel a X=[0.5, 0, 0, 0.5] Y=[0.75, 0, 0, 0.75];").unwrap();
        let Instruction::Channel { modes, x, y } = p.instructions().next().unwrap() else { panic!() };
        assert_eq!(modes, &vec!["a".to_string()]);
        assert_eq!(x, &vec![0.5, 0.0, 0.0, 0.5]);
        assert_eq!(y[0], 0.75);
        assert_eq!(
            kinds("mode a; channel a X=[1, 0] Y=[0, 0];"),
            vec![DiagnosticKind::SyntaxError]
        );
    }

    #[test]
    fn measurement_assignment_rules() {
        assert_eq!(kinds("mode a; homodyne a 0 1.0;"), vec![DiagnosticKind::SyntaxError]);
        assert_eq!(kinds("mode a; m = squeeze a 0.1 0;"), vec![DiagnosticKind::SyntaxError]);
        assert_eq!(kinds("mode a; m = frob a;"), vec![DiagnosticKind::UnknownOpcode]);
    }

    #[test]
    fn parse_only_opcodes() {
        let p = parse("mode a init=fock(2); kerr a 0.1; n = photoncount a;").unwrap();
        let ops: Vec<Opcode> = p.instructions().map(Instruction::opcode).collect();
        assert_eq!(ops, vec![Opcode::Kerr, Opcode::PhotonCount]);
    }

    #[test]
    fn printing_round_trips() {
        let src = "mode a init=coherent(1.25, -0.5); mode b; tms a b 0.3; bs a b pi/4 0;\
                   x = homodyne a pi/2 0.9; displace b (-2*x + 0.1) -x; y = vacproject b;\
                   mode a init=squeezed(-0.2, 1e-3); channel a X=[1,0,0,1] Y=[0.5,0,0,0.5];\
                   z = heterodyne a;";
        let p = parse(src).unwrap();
        let printed = p.to_string();
        let q = parse(&printed).unwrap();
        assert_eq!(p, q);
        assert_eq!(printed, q.to_string());
    }
}
