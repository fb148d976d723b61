//! PAL: the line-oriented PISA assembly text format.
//!
//! One instruction per line, an optional `label:` prefix, registers as `$n`
//! (or `rN`), decimal immediates and `;` comments. The pseudo-instructions
//! `SUBI`, `PUSH` and `POP` are expanded while parsing.

use std::fmt::Write as _;

use thiserror::Error;

use crate::instr::{Instr, Operand, Reg};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Line {
    pub label: Option<String>,
    pub instr: Instr,
    pub comment: Option<String>,
}

impl Line {
    pub fn new(instr: Instr) -> Line {
        Line { label: None, instr, comment: None }
    }

    pub fn labeled(label: impl Into<String>, instr: Instr) -> Line {
        Line { label: Some(label.into()), instr, comment: None }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {kind}")]
pub struct PalError {
    pub line: usize,
    pub kind: PalErrorKind,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PalErrorKind {
    #[error("unknown mnemonic `{0}`")]
    UnknownMnemonic(String),
    #[error("bad register `{0}`")]
    BadRegister(String),
    #[error("bad immediate `{0}`")]
    BadImmediate(String),
    #[error("bad label `{0}`")]
    BadLabel(String),
    #[error("`{mnemonic}` takes {expected} operand(s), found {found}")]
    Arity { mnemonic: String, expected: usize, found: usize },
    #[error("label `{0}` is not followed by an instruction")]
    DanglingLabel(String),
}

#[derive(Clone, Copy)]
enum Kind {
    R,
    I,
    L,
}

fn signature(mnemonic: &str) -> Option<&'static [Kind]> {
    use Kind::*;
    Some(match mnemonic {
        "ADD" | "SUB" | "XOR" | "RLV" | "RRV" | "EXCH" => &[R, R],
        "ANDX" | "NORX" | "ORX" | "SLLVX" | "SRAVX" | "SRLVX" => &[R, R, R],
        "ADDI" | "SUBI" | "RL" | "RR" | "XORI" => &[R, I],
        "ANDIX" | "ORIX" | "SLLX" | "SRAX" | "SRLX" => &[R, R, I],
        "BEQ" | "BNE" => &[R, R, L],
        "BGEZ" | "BGTZ" | "BLEZ" | "BLTZ" => &[R, L],
        "NEG" | "SWAPBR" | "PUSH" | "POP" => &[R],
        "BRA" | "RBRA" => &[L],
        "DATA" => &[I],
        "START" | "FINISH" => &[],
        _ => return None,
    })
}

fn is_label(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_reg(s: &str) -> Result<Reg, PalErrorKind> {
    let digits = s
        .strip_prefix('$')
        .or_else(|| s.strip_prefix('r'))
        .ok_or_else(|| PalErrorKind::BadRegister(s.to_string()))?;
    match digits.parse::<u8>() {
        Ok(n) if n < 32 && !digits.starts_with('+') => Ok(Reg(n)),
        _ => Err(PalErrorKind::BadRegister(s.to_string())),
    }
}

fn parse_imm(s: &str) -> Result<i32, PalErrorKind> {
    s.parse::<i32>().map_err(|_| PalErrorKind::BadImmediate(s.to_string()))
}

enum Arg {
    R(Reg),
    I(i32),
    L(String),
}

pub fn parse_pal(text: &str) -> Result<Vec<Line>, PalError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let err = |kind| PalError { line: lineno, kind };
        let (code, comment) = match raw.find(';') {
            Some(p) => (&raw[..p], Some(raw[p + 1..].trim().to_string())),
            None => (raw, None),
        };
        let mut code = code.trim();
        if code.is_empty() {
            continue;
        }
        let mut label = None;
        if let Some(p) = code.find(':') {
            let name = code[..p].trim();
            if !is_label(name) {
                return Err(err(PalErrorKind::BadLabel(name.to_string())));
            }
            label = Some(name.to_string());
            code = code[p + 1..].trim();
            if code.is_empty() {
                return Err(err(PalErrorKind::DanglingLabel(name.to_string())));
            }
        }
        let mut words = code.split(|c: char| c.is_whitespace() || c == ',').filter(|w| !w.is_empty());
        let mnemonic = words.next().unwrap_or_default().to_ascii_uppercase();
        let ops: Vec<&str> = words.collect();
        let sig = signature(&mnemonic).ok_or_else(|| err(PalErrorKind::UnknownMnemonic(mnemonic.clone())))?;
        if sig.len() != ops.len() {
            return Err(err(PalErrorKind::Arity { mnemonic, expected: sig.len(), found: ops.len() }));
        }
        let mut args = Vec::with_capacity(ops.len());
        for (k, op) in sig.iter().zip(&ops) {
            args.push(match k {
                Kind::R => Arg::R(parse_reg(op).map_err(err)?),
                Kind::I => Arg::I(parse_imm(op).map_err(err)?),
                Kind::L if is_label(op) => Arg::L(op.to_string()),
                Kind::L => return Err(err(PalErrorKind::BadLabel(op.to_string()))),
            });
        }
        let instrs = build(&mnemonic, args);
        for (n, instr) in instrs.into_iter().enumerate() {
            out.push(Line {
                label: if n == 0 { label.take() } else { None },
                instr,
                comment: if n == 0 { comment.clone() } else { None },
            });
        }
    }
    Ok(out)
}

fn build(m: &str, args: Vec<Arg>) -> Vec<Instr> {
    use Instr::*;
    let mut r = Vec::new();
    let mut i = Vec::new();
    let mut l = Vec::new();
    for a in args {
        match a {
            Arg::R(x) => r.push(x),
            Arg::I(x) => i.push(Operand::Num(x)),
            Arg::L(x) => l.push(Operand::Label(x)),
        }
    }
    let mut i = i.into_iter();
    let mut l = l.into_iter();
    let mut imm = || i.next().expect("signature checked");
    let mut lab = || l.next().expect("signature checked");
    let one = match m {
        "ADD" => Add(r[0], r[1]),
        "SUB" => Sub(r[0], r[1]),
        "XOR" => Xor(r[0], r[1]),
        "RLV" => Rlv(r[0], r[1]),
        "RRV" => Rrv(r[0], r[1]),
        "EXCH" => Exch(r[0], r[1]),
        "ANDX" => Andx(r[0], r[1], r[2]),
        "NORX" => Norx(r[0], r[1], r[2]),
        "ORX" => Orx(r[0], r[1], r[2]),
        "SLLVX" => Sllvx(r[0], r[1], r[2]),
        "SRAVX" => Sravx(r[0], r[1], r[2]),
        "SRLVX" => Srlvx(r[0], r[1], r[2]),
        "ADDI" => Addi(r[0], imm()),
        "SUBI" => Addi(r[0], imm().negate()),
        "RL" => Rl(r[0], imm()),
        "RR" => Rr(r[0], imm()),
        "XORI" => Xori(r[0], imm()),
        "ANDIX" => Andix(r[0], r[1], imm()),
        "ORIX" => Orix(r[0], r[1], imm()),
        "SLLX" => Sllx(r[0], r[1], imm()),
        "SRAX" => Srax(r[0], r[1], imm()),
        "SRLX" => Srlx(r[0], r[1], imm()),
        "BEQ" => Beq(r[0], r[1], lab()),
        "BNE" => Bne(r[0], r[1], lab()),
        "BGEZ" => Bgez(r[0], lab()),
        "BGTZ" => Bgtz(r[0], lab()),
        "BLEZ" => Blez(r[0], lab()),
        "BLTZ" => Bltz(r[0], lab()),
        "NEG" => Neg(r[0]),
        "SWAPBR" => Swapbr(r[0]),
        "BRA" => Bra(lab()),
        "RBRA" => Rbra(lab()),
        "DATA" => Data(imm()),
        "START" => Start,
        "FINISH" => Finish,
        "PUSH" => return push(r[0]).to_vec(),
        "POP" => return pop(r[0]).to_vec(),
        _ => unreachable!("signature table and builder disagree on {m}"),
    };
    vec![one]
}

/// `PUSH r` = `EXCH r $1; ADDI $1 1`.
pub fn push(r: Reg) -> [Instr; 2] {
    [Instr::Exch(r, Reg::SP), Instr::Addi(Reg::SP, Operand::Num(1))]
}

/// `POP r` = `SUBI $1 1; EXCH r $1`.
pub fn pop(r: Reg) -> [Instr; 2] {
    [Instr::Addi(Reg::SP, Operand::Num(-1)), Instr::Exch(r, Reg::SP)]
}

pub fn emit_pal(lines: &[Line]) -> String {
    let mut s = String::new();
    for line in lines {
        let head = match &line.label {
            Some(l) => format!("{l}:"),
            None => String::new(),
        };
        let body = line.instr.to_string();
        let _ = match &line.comment {
            Some(c) if !c.is_empty() => writeln!(s, "{head:<28} {body:<24} ; {c}"),
            _ => writeln!(s, "{head:<28} {body}"),
        };
    }
    s
}
