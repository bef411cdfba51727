//! Line-based assembly language used as the task-submission payload.
//!
//! ```text
//! qubits 10                          # required first statement
//! scan linspace -1.5707963 1.5707963 51
//! h 5
//! cnot 5 4
//! rz 0 s*-1                          # scanned: -1 × γ_k
//! rx 0 1.5707963                     # literal radians
//! measure 0 1 2                      # last statement
//! ```
//!
//! Mnemonics are case-insensitive; `#` starts a comment.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, Param, ScanSpec};

/// Largest register accepted by the parser.
pub const MAX_QUBITS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for SourceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for SourceError {}

#[derive(Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let code = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in code.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &code[s..i],
                    column: code[..s].chars().count() + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &code[s..],
            column: code[..s].chars().count() + 1,
        });
    }
    out
}

struct LineError {
    column: usize,
    message: String,
}

fn err(column: usize, message: impl Into<String>) -> LineError {
    LineError {
        column,
        message: message.into(),
    }
}

enum Statement {
    Qubits(usize),
    Scan(ScanSpec),
    Gate(Gate),
}

struct Parser {
    n: Option<usize>,
    scan: Option<ScanSpec>,
}

impl Parser {
    fn qubit(&self, tok: Token<'_>) -> Result<usize, LineError> {
        let q: usize = tok
            .text
            .parse()
            .map_err(|_| err(tok.column, format!("invalid qubit index '{}'", tok.text)))?;
        if let Some(n) = self.n {
            if q >= n {
                return Err(err(tok.column, format!("qubit index {q} out of range")));
            }
        }
        Ok(q)
    }

    fn number(tok: Token<'_>, what: &str) -> Result<f64, LineError> {
        match tok.text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(err(tok.column, format!("invalid {what} '{}'", tok.text))),
        }
    }

    fn param(&self, tok: Token<'_>) -> Result<Param, LineError> {
        let lower = tok.text.to_ascii_lowercase();
        if let Some(mult) = lower.strip_prefix("s*") {
            if self.scan.is_none() {
                return Err(err(tok.column, "scanned parameter used without a scan declaration"));
            }
            let m = Self::number(
                Token {
                    text: mult,
                    column: tok.column + 2,
                },
                "scan multiplier",
            )?;
            if m == 0.0 {
                return Err(err(tok.column, "scan multiplier must be nonzero"));
            }
            Ok(Param::Scanned { multiplier: m })
        } else {
            Ok(Param::Literal(Self::number(tok, "angle")?))
        }
    }

    fn statement(&self, toks: &[Token<'_>]) -> Result<Statement, LineError> {
        let head = toks[0];
        let mnemonic = head.text.to_ascii_lowercase();
        let args = &toks[1..];
        let arity = |expected: usize| -> Result<(), LineError> {
            if args.len() != expected {
                Err(err(
                    head.column,
                    format!("'{mnemonic}' expects {expected} operand(s), got {}", args.len()),
                ))
            } else {
                Ok(())
            }
        };
        let distinct = |a: usize, b: usize, col: usize| -> Result<(), LineError> {
            if a == b {
                Err(err(col, format!("repeated qubit operand {a}")))
            } else {
                Ok(())
            }
        };
        let gate = match mnemonic.as_str() {
            "qubits" => {
                arity(1)?;
                let n: usize = args[0]
                    .text
                    .parse()
                    .map_err(|_| err(args[0].column, format!("invalid qubit count '{}'", args[0].text)))?;
                if n == 0 || n > MAX_QUBITS {
                    return Err(err(
                        args[0].column,
                        format!("qubit count must be in 1..={MAX_QUBITS}"),
                    ));
                }
                return Ok(Statement::Qubits(n));
            }
            "scan" => {
                arity(4)?;
                if !args[0].text.eq_ignore_ascii_case("linspace") {
                    return Err(err(
                        args[0].column,
                        format!("unknown scan kind '{}'", args[0].text),
                    ));
                }
                let start = Self::number(args[1], "scan start")?;
                let stop = Self::number(args[2], "scan stop")?;
                let count: usize = args[3]
                    .text
                    .parse()
                    .map_err(|_| err(args[3].column, format!("invalid scan count '{}'", args[3].text)))?;
                if count == 0 {
                    return Err(err(args[3].column, "scan count must be at least 1"));
                }
                if start > stop {
                    return Err(err(args[1].column, "scan start must not exceed stop"));
                }
                return Ok(Statement::Scan(ScanSpec::linspace(start, stop, count)));
            }
            "h" | "x" | "y" | "z" => {
                arity(1)?;
                let q = self.qubit(args[0])?;
                match mnemonic.as_str() {
                    "h" => Gate::H(q),
                    "x" => Gate::X(q),
                    "y" => Gate::Y(q),
                    _ => Gate::Z(q),
                }
            }
            "rx" | "ry" | "rz" => {
                arity(2)?;
                let q = self.qubit(args[0])?;
                let p = self.param(args[1])?;
                match mnemonic.as_str() {
                    "rx" => Gate::Rx(q, p),
                    "ry" => Gate::Ry(q, p),
                    _ => Gate::Rz(q, p),
                }
            }
            "cnot" | "cz" => {
                arity(2)?;
                let a = self.qubit(args[0])?;
                let b = self.qubit(args[1])?;
                distinct(a, b, args[1].column)?;
                if mnemonic == "cnot" {
                    Gate::Cnot {
                        control: a,
                        target: b,
                    }
                } else {
                    Gate::Cz(a, b)
                }
            }
            "measure" => {
                if args.is_empty() {
                    return Err(err(head.column, "'measure' expects at least one qubit"));
                }
                let mut qs = Vec::with_capacity(args.len());
                for &t in args {
                    let q = self.qubit(t)?;
                    if qs.contains(&q) {
                        return Err(err(t.column, format!("repeated qubit operand {q}")));
                    }
                    qs.push(q);
                }
                qs.sort_unstable();
                Gate::Measure(qs)
            }
            _ => {
                return Err(err(
                    head.column,
                    format!("unknown mnemonic '{}'", head.text),
                ))
            }
        };
        Ok(Statement::Gate(gate))
    }
}

/// Parses a program. Every line reports at most one error; all errors are
/// collected rather than stopping at the first.
pub fn parse(text: &str) -> Result<Circuit, Vec<SourceError>> {
    let mut errors = Vec::new();
    let mut parser = Parser { n: None, scan: None };
    let mut header_seen = false;
    let mut gates = Vec::new();
    let mut measure_line: Option<usize> = None;
    let mut first_statement = true;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let toks = tokenize(raw);
        if toks.is_empty() {
            continue;
        }
        let is_first = std::mem::replace(&mut first_statement, false);
        let mut report = |e: LineError| {
            errors.push(SourceError {
                line,
                column: e.column,
                message: e.message,
            })
        };
        let stmt = match parser.statement(&toks) {
            Ok(s) => s,
            Err(e) => {
                report(e);
                continue;
            }
        };
        if is_first && !matches!(stmt, Statement::Qubits(_)) {
            report(err(toks[0].column, "missing qubits header: 'qubits N' must come first"));
            continue;
        }
        if measure_line.is_some() {
            report(err(toks[0].column, "measure must be the last statement"));
            continue;
        }
        match stmt {
            Statement::Qubits(n) => {
                if header_seen {
                    report(err(toks[0].column, "duplicate qubits declaration"));
                } else {
                    header_seen = true;
                    parser.n = Some(n);
                }
            }
            Statement::Scan(s) => {
                if parser.scan.is_some() {
                    report(err(toks[0].column, "duplicate scan declaration"));
                } else {
                    parser.scan = Some(s);
                }
            }
            Statement::Gate(g) => {
                if g.is_measure() {
                    measure_line = Some(line);
                }
                gates.push(g);
            }
        }
    }
    if first_statement {
        errors.push(SourceError {
            line: 1,
            column: 1,
            message: "missing qubits header: empty program".into(),
        });
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(Circuit {
        n: parser.n.expect("header checked"),
        gates,
        scan: parser.scan,
    })
}

/// Canonical text form: lowercase mnemonics, single spaces, shortest
/// round-trip decimals, scan declared right after the header.
pub fn serialize(circuit: &Circuit) -> String {
    let mut out = String::new();
    let _ = write!(out, "qubits {}", circuit.n);
    if let Some(s) = circuit.scan {
        let _ = write!(out, "\nscan linspace {} {} {}", s.start, s.stop, s.count);
    }
    for g in &circuit.gates {
        let _ = write!(out, "\n{g}");
    }
    out
}
