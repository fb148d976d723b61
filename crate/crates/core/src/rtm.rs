//! Reversible Turing machines: rule checking, a direct stepping oracle,
//! and a generator for the ROOPL simulator program.
//!
//! Tape symbols are `0..=3` with `0` the blank. A tape is reported by the
//! simulator as a base-4 number (cell 0 is the least significant digit),
//! its length, and the head position.

use std::fmt;

use thiserror::Error;

use crate::codegen::CodegenOptions;
use crate::interp::{run_program, RunOptions, RuntimeError};
use crate::pipeline::{check_source, run_on_vm, StaticError, VmRunError};

pub const BLANK: i32 = 0;
pub const SLASH: i32 = 4;
pub const LEFT: i32 = 5;
pub const RIGHT: i32 = 6;
/// Largest tape symbol.
pub const MAX_SYMBOL: i32 = 3;

/// A quadruple. Shift rules have `s1 == SLASH` and `s2` one of
/// `LEFT`/`RIGHT`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rule {
    pub q1: i32,
    pub s1: i32,
    pub s2: i32,
    pub q2: i32,
}

impl Rule {
    pub fn symbol(q1: i32, s1: i32, s2: i32, q2: i32) -> Rule {
        Rule { q1, s1, s2, q2 }
    }

    pub fn shift(q1: i32, right: bool, q2: i32) -> Rule {
        Rule { q1, s1: SLASH, s2: if right { RIGHT } else { LEFT }, q2 }
    }

    pub fn is_shift(&self) -> bool {
        self.s1 == SLASH
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sym = |s: i32| match s {
            SLASH => "/".to_string(),
            LEFT => "L".to_string(),
            RIGHT => "R".to_string(),
            n => n.to_string(),
        };
        write!(f, "({}, {}, {}, {})", self.q1, sym(self.s1), sym(self.s2), self.q2)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tm {
    pub rules: Vec<Rule>,
    pub start: i32,
    pub finish: i32,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RtmDiagnostic {
    #[error("rules {0} and {1} violate forward determinism")]
    Forward(usize, usize),
    #[error("rules {0} and {1} violate backward determinism")]
    Backward(usize, usize),
    #[error("rule {0} is malformed")]
    Malformed(usize),
    #[error("start and final state coincide")]
    StartIsFinal,
}

fn well_formed(r: &Rule) -> bool {
    let sym = |s: i32| (0..=MAX_SYMBOL).contains(&s);
    if r.is_shift() {
        r.s2 == LEFT || r.s2 == RIGHT
    } else {
        sym(r.s1) && sym(r.s2)
    }
}

/// Checks both determinism conditions over every pair of rules.
pub fn check_rules(rules: &[Rule]) -> Vec<RtmDiagnostic> {
    let mut out = Vec::new();
    for (i, r) in rules.iter().enumerate() {
        if !well_formed(r) {
            out.push(RtmDiagnostic::Malformed(i));
        }
    }
    for i in 0..rules.len() {
        for j in i + 1..rules.len() {
            let (a, b) = (&rules[i], &rules[j]);
            let both_symbol = !a.is_shift() && !b.is_shift();
            if a.q1 == b.q1 && !(both_symbol && a.s1 != b.s1) {
                out.push(RtmDiagnostic::Forward(i, j));
            }
            if a.q2 == b.q2 && !(both_symbol && a.s2 != b.s2) {
                out.push(RtmDiagnostic::Backward(i, j));
            }
        }
    }
    out
}

pub fn check_rtm(tm: &Tm) -> Vec<RtmDiagnostic> {
    let mut out = check_rules(&tm.rules);
    if tm.start == tm.finish {
        out.push(RtmDiagnostic::StartIsFinal);
    }
    out
}

/// Final tape as seen by the simulator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TapeResult {
    pub cells: Vec<i32>,
    pub head: i32,
}

impl TapeResult {
    pub fn code(&self) -> i32 {
        encode(&self.cells)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("no rule applies in state {state} reading {symbol}")]
    Stuck { state: i32, symbol: i32 },
    #[error("machine did not halt within {0} steps")]
    StepLimit(usize),
}

/// Runs the machine directly. The tape is extended by a blank only when
/// the head is off either end and the machine has not halted.
pub fn oracle(tm: &Tm, input: &[i32], max_steps: usize) -> Result<(TapeResult, usize), OracleError> {
    let mut tape = if input.is_empty() { vec![BLANK] } else { input.to_vec() };
    let mut head: i64 = 0;
    let mut state = tm.start;
    let mut steps = 0;
    while state != tm.finish {
        if steps == max_steps {
            return Err(OracleError::StepLimit(max_steps));
        }
        if head < 0 {
            tape.insert(0, BLANK);
            head = 0;
        } else if head as usize == tape.len() {
            tape.push(BLANK);
        }
        let sym = tape[head as usize];
        let rule = tm
            .rules
            .iter()
            .find(|r| r.q1 == state && (r.is_shift() || r.s1 == sym))
            .ok_or(OracleError::Stuck { state, symbol: sym })?;
        if rule.is_shift() {
            head += if rule.s2 == RIGHT { 1 } else { -1 };
        } else {
            tape[head as usize] = rule.s2;
        }
        state = rule.q2;
        steps += 1;
    }
    Ok((TapeResult { cells: tape, head: head as i32 }, steps))
}

pub fn encode(cells: &[i32]) -> i32 {
    cells.iter().rev().fold(0i32, |acc, &s| acc.wrapping_mul(4).wrapping_add(s))
}

pub fn decode(code: i32, len: usize) -> Vec<i32> {
    let mut c = code as u32;
    (0..len)
        .map(|_| {
            let d = (c & 3) as i32;
            c >>= 2;
            d
        })
        .collect()
}

/// `_` for blank, digits otherwise.
pub fn parse_tape(s: &str) -> Option<Vec<i32>> {
    s.chars()
        .map(|c| match c {
            '_' => Some(BLANK),
            '0'..='3' => Some(c as i32 - '0' as i32),
            _ => None,
        })
        .collect()
}

pub fn show_tape(cells: &[i32]) -> String {
    cells.iter().map(|&s| if s == BLANK { '_' } else { char::from(b'0' + s as u8) }).collect()
}

/// The unary incrementer: moves right over 1s and writes a 1 on the
/// first blank.
pub fn unary_increment() -> Tm {
    Tm {
        rules: vec![Rule::symbol(1, 1, 1, 2), Rule::shift(2, true, 1), Rule::symbol(1, 0, 1, 3)],
        start: 1,
        finish: 3,
    }
}

/// Swaps symbols 1 and 2 up to the first blank.
pub fn binary_flip() -> Tm {
    Tm {
        rules: vec![
            Rule::symbol(1, 1, 2, 2),
            Rule::symbol(1, 2, 1, 2),
            Rule::shift(2, true, 1),
            Rule::symbol(1, 0, 0, 3),
        ],
        start: 1,
        finish: 3,
    }
}

/// One shift and halt.
pub fn identity() -> Tm {
    Tm { rules: vec![Rule::shift(1, true, 2)], start: 1, finish: 2 }
}

const CLASSES: &str = "\
// Tape cell: one symbol and a link.
class Cell
    int data
    Cell next

    method constructor(int d)
        data ^= d

    method link(Cell n)
        next <=> n

    // len += number of cells from here on
    method length(int len)
        len += 1
        if next != nil then
            call next::length(len)
        fi next != nil

    method lookup(int i, int s)
        if i = 0 then
            s ^= data
        else
            i -= 1
            call next::lookup(i, s)
            i += 1
        fi i = 0

    method add(int i, int v)
        if i = 0 then
            data += v
        else
            i -= 1
            call next::add(i, v)
            i += 1
        fi i = 0

    // Links c after the cell i positions further on.
    method append(int i, Cell c)
        if i = 0 then
            next <=> c
        else
            i -= 1
            call next::append(i, c)
            i += 1
        fi i = 0

    // code += data * w + (rest of tape) * 4w
    method encode(int code, int w)
        code += data * w
        if next != nil then
            local int w4 = w * 4
            call next::encode(code, w4)
            delocal int w4 = w * 4
        fi next != nil

class Rule
    int q1
    int s1
    int s2
    int q2
    Rule next

    method constructor(int a, int b, int c, int d)
        q1 ^= a
        s1 ^= b
        s2 ^= c
        q2 ^= d

    method link(Rule n)
        next <=> n

    method get(int i, int a, int b, int c, int d)
        if i = 0 then
            a ^= q1
            b ^= s1
            c ^= s2
            d ^= q2
        else
            i -= 1
            call next::get(i, a, b, c, d)
            i += 1
        fi i = 0

class Rtm
    int SLASH
    int LEFT
    int RIGHT
    int QS
    int QF
    int NRULES
    Rule rules
    int rcode
    int rlen
    int rpos

    method result(int code, int len, int pos)
        rcode <=> code
        rlen <=> len
        rpos <=> pos

    method incPc(int pc)
        pc += 1
        if pc = NRULES then
            pc -= NRULES
        fi pc = 0

    method inst(Cell tape, int pos, int state, int q1, int s1, int s2, int q2, int applied)
        local int symbol = 0
        call tape::lookup(pos, symbol)
        if state = q1 && s1 = symbol then
            state += q2 - q1
            symbol += s2 - s1
            call tape::add(pos, s2 - s1)
            applied += 1
        fi applied = 1
        uncall tape::lookup(pos, symbol)
        delocal int symbol = 0

        if state = q1 && s1 = SLASH then
            state += q2 - q1
            if s2 = RIGHT then
                pos += 1
            fi s2 = RIGHT
            if s2 = LEFT then
                pos -= 1
            fi s2 = LEFT
            applied += 1
        fi applied = 1 && s1 = SLASH

    method simulate(Cell tape, int pos, int state, int pc)
        local int len = 0
        call tape::length(len)
        if pos = len then
            construct Cell cell
                local int last = len - 1
                call tape::append(last, cell)
                delocal int last = len - 1
                call simulate(tape, pos, state, pc)
                local int last = len - 1
                uncall tape::append(last, cell)
                delocal int last = len - 1
            destruct cell
        else
            if pos < 0 then
                construct Cell cell
                    call cell::link(tape)
                    tape <=> cell
                    pos += 1
                    call simulate(tape, pos, state, pc)
                    pos -= 1
                    tape <=> cell
                    uncall cell::link(tape)
                destruct cell
            else
                local int q1 = 0, int s1 = 0, int s2 = 0, int q2 = 0
                call incPc(pc)
                call rules::get(pc, q1, s1, s2, q2)
                local int applied = 0
                call inst(tape, pos, state, q1, s1, s2, q2, applied)
                if state = QF then
                    local int w = 1
                    call tape::encode(rcode, w)
                    delocal int w = 1
                    rlen += len
                    rpos += pos
                else
                    call simulate(tape, pos, state, pc)
                fi state = QF
                uncall inst(tape, pos, state, q1, s1, s2, q2, applied)
                delocal int applied = 0
                uncall rules::get(pc, q1, s1, s2, q2)
                uncall incPc(pc)
                delocal int q1 = 0, int s1 = 0, int s2 = 0, int q2 = 0
            fi pos < 0
        fi pos = len
        uncall tape::length(len)
        delocal int len = 0
";

/// ROOPL source of a simulator for `tm` started on `input`.
///
/// The result is left in the main object's fields `code`, `length` and
/// `head`.
pub fn rtm_program_source(tm: &Tm, input: &[i32]) -> String {
    let tape: Vec<i32> = if input.is_empty() { vec![BLANK] } else { input.to_vec() };
    let mut s = String::from(CLASSES);
    let mut run = Vec::new();
    let consts = [
        ("SLASH", SLASH),
        ("LEFT", LEFT),
        ("RIGHT", RIGHT),
        ("QS", tm.start),
        ("QF", tm.finish),
        ("NRULES", tm.rules.len() as i32),
    ];
    for (n, v) in consts {
        run.push(format!("{n} += {v}"));
    }
    let mut tail = Vec::new();
    for (n, v) in consts.iter().rev() {
        tail.push(format!("{n} -= {v}"));
    }

    let mut open = Vec::new();
    let mut close = Vec::new();
    for (k, r) in tm.rules.iter().enumerate() {
        let args = format!("{}, {}, {}, {}", r.q1, r.s1, r.s2, r.q2);
        open.push(format!("construct Rule r{k}({args})"));
        close.push(format!("destruct r{k}({args})"));
    }
    let mut links = Vec::new();
    for k in (0..tm.rules.len().saturating_sub(1)).rev() {
        links.push(format!("call r{k}::link(r{})", k + 1));
    }
    links.push("rules <=> r0".to_string());
    for (k, &c) in tape.iter().enumerate() {
        open.push(format!("construct Cell t{k}({c})"));
        close.push(format!("destruct t{k}({c})"));
    }
    for k in (0..tape.len() - 1).rev() {
        links.push(format!("call t{k}::link(t{})", k + 1));
    }
    let mut unlinks: Vec<String> = links
        .iter()
        .rev()
        .map(|l| l.strip_prefix("call ").map(|r| format!("uncall {r}")).unwrap_or_else(|| l.clone()))
        .collect();
    close.reverse();

    let mut body = Vec::new();
    body.extend(links);
    body.push("local int pos = 0".to_string());
    body.push("local int state = QS".to_string());
    body.push("local int pc = NRULES - 1".to_string());
    body.push("call simulate(t0, pos, state, pc)".to_string());
    body.push("delocal int pc = NRULES - 1".to_string());
    body.push("delocal int state = QS".to_string());
    body.push("delocal int pos = 0".to_string());
    body.append(&mut unlinks);

    s.push_str("\n    method run()\n");
    for l in &run {
        s.push_str(&format!("        {l}\n"));
    }
    let mut depth = 2;
    for l in &open {
        s.push_str(&format!("{}{l}\n", "    ".repeat(depth)));
        depth += 1;
    }
    for l in &body {
        s.push_str(&format!("{}{l}\n", "    ".repeat(depth)));
    }
    for l in &close {
        depth -= 1;
        s.push_str(&format!("{}{l}\n", "    ".repeat(depth)));
    }
    for l in &tail {
        s.push_str(&format!("        {l}\n"));
    }
    s.push_str(
        "
class Program
    int code
    int length
    int head

    method main()
        construct Rtm m
            call m::run()
            call m::result(code, length, head)
        destruct m
",
    );
    s
}

#[derive(Debug, Error)]
pub enum RtmRunError {
    #[error("rule set rejected: {0:?}")]
    Rules(Vec<RtmDiagnostic>),
    #[error(transparent)]
    Static(#[from] StaticError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Vm(#[from] VmRunError),
    #[error("output field `{0}` missing")]
    MissingOutput(&'static str),
}

/// Results of the same simulator program under both back ends.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RtmRun {
    pub interpreted: TapeResult,
    pub compiled: TapeResult,
}

fn tape_from(get: impl Fn(&str) -> Option<i32>) -> Result<TapeResult, RtmRunError> {
    let code = get("code").ok_or(RtmRunError::MissingOutput("code"))?;
    let len = get("length").ok_or(RtmRunError::MissingOutput("length"))?;
    let head = get("head").ok_or(RtmRunError::MissingOutput("head"))?;
    Ok(TapeResult { cells: decode(code, len.max(0) as usize), head })
}

/// Runs the generated simulator through the interpreter and on the VM.
pub fn run_rtm_program(tm: &Tm, input: &[i32]) -> Result<RtmRun, RtmRunError> {
    let diags = check_rtm(tm);
    if !diags.is_empty() {
        return Err(RtmRunError::Rules(diags));
    }
    let checked = check_source(&rtm_program_source(tm, input))?;
    let i = run_program(&checked.model, &RunOptions::default())?;
    let interpreted = tape_from(|n| i.output.get(n))?;
    let v = run_on_vm(
        &checked.model,
        CodegenOptions { runtime_checks: true },
        pisa::DEFAULT_MEMORY,
        pisa::DEFAULT_STEP_LIMIT,
    )?;
    let compiled = tape_from(|n| v.output(n))?;
    Ok(RtmRun { interpreted, compiled })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinism_examples() {
        let fwd = [Rule::symbol(1, 1, 2, 2), Rule::symbol(1, 1, 3, 3)];
        assert_eq!(check_rules(&fwd), vec![RtmDiagnostic::Forward(0, 1)]);
        let bwd = [Rule::symbol(1, 1, 2, 3), Rule::symbol(2, 3, 2, 3)];
        assert_eq!(check_rules(&bwd), vec![RtmDiagnostic::Backward(0, 1)]);
        let shift = [Rule::shift(1, true, 2), Rule::symbol(1, 0, 0, 3)];
        assert_eq!(check_rules(&shift), vec![RtmDiagnostic::Forward(0, 1)]);
        for tm in [unary_increment(), binary_flip(), identity()] {
            assert!(check_rtm(&tm).is_empty(), "{tm:?}");
        }
    }

    #[test]
    fn oracle_examples() {
        let (r, steps) = oracle(&unary_increment(), &[1, 1, 1], 100).unwrap();
        assert_eq!(show_tape(&r.cells), "1111");
        assert_eq!((r.head, steps), (3, 7));
        let (r, _) = oracle(&binary_flip(), &[1, 2, 2], 100).unwrap();
        assert_eq!(show_tape(&r.cells), "211_");
        let (r, _) = oracle(&identity(), &[3, 1], 100).unwrap();
        assert_eq!((r.cells, r.head), (vec![3, 1], 1));
    }

    #[test]
    fn encoding() {
        assert_eq!(encode(&[1, 1, 1, 1]), 85);
        assert_eq!(decode(85, 4), vec![1, 1, 1, 1]);
        assert_eq!(decode(encode(&[2, 0, 3]), 3), vec![2, 0, 3]);
        assert_eq!(parse_tape("1_2"), Some(vec![1, 0, 2]));
        assert_eq!(parse_tape("x"), None);
    }
}
