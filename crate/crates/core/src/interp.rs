//! Reference interpreter.
//!
//! Executing backwards runs the statement inverter's output directly, so an
//! uncall is the callee body executed in the opposite direction.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::classes::ClassModel;
use crate::frontend::{BinOp, Expr, Invocation, ModOp, Pos, Stmt, StmtKind};

pub type Loc = u32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObjVal {
    pub class: String,
    pub fields: Vec<(String, Loc)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Int(i32),
    Loc(Loc),
    Obj(Arc<ObjVal>),
}

impl Value {
    /// Integer view used by expressions; references read as their location.
    pub fn word(&self) -> Option<i32> {
        match self {
            Value::Int(v) => Some(*v),
            Value::Loc(l) => Some(*l as i32),
            Value::Obj(_) => None,
        }
    }
}

/// Location 0 is reserved for nil and never allocated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Store {
    cells: Vec<Value>,
}

impl Default for Store {
    fn default() -> Store {
        Store::new()
    }
}

impl Store {
    pub fn new() -> Store {
        Store { cells: vec![Value::Int(0)] }
    }

    pub fn alloc(&mut self, v: Value) -> Loc {
        self.cells.push(v);
        (self.cells.len() - 1) as Loc
    }

    pub fn get(&self, l: Loc) -> &Value {
        &self.cells[l as usize]
    }

    pub fn set(&mut self, l: Loc, v: Value) {
        self.cells[l as usize] = v;
    }

    /// Locations currently allocated, excluding 0.
    pub fn domain(&self) -> std::ops::Range<Loc> {
        1..self.cells.len() as Loc
    }

    /// μ restricted to the first `n` allocated locations.
    pub fn restrict(&mut self, n: Loc) {
        self.cells.truncate(n as usize + 1);
    }
}

pub type Env = Vec<(String, Loc)>;

fn lookup(env: &Env, x: &str) -> Option<Loc> {
    env.iter().rev().find(|(n, _)| n == x).map(|(_, l)| *l)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dir {
    Forward,
    Backward,
}

impl Dir {
    pub fn flip(self) -> Dir {
        match self {
            Dir::Forward => Dir::Backward,
            Dir::Backward => Dir::Forward,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Assertion {
    IfExit,
    LoopEntry,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuntimeErrorKind {
    #[error("{0:?} assertion failed")]
    AssertionFailure(Assertion),
    #[error("object `{0}` has non-zero fields at destruct")]
    NonZeroFieldsAtDestruct(String),
    #[error("reference `{0}` was not restored before destruct")]
    ReferenceNotRestored(String),
    #[error("local `{var}` holds {value} but delocal expects {expected}")]
    DelocalMismatch { var: String, value: i32, expected: i32 },
    #[error("method `{0}` invoked on nil")]
    NilDereference(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("class `{class}` has no method `{method}`")]
    UnknownMethod { class: String, method: String },
    #[error("`{0}` does not hold a value of the expected kind")]
    BadValue(String),
    #[error("recursion deeper than {0} frames")]
    StackOverflow(usize),
    #[error("statement limit of {0} exceeded")]
    StepLimitExceeded(u64),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub struct RuntimeError {
    pub kind: RuntimeErrorKind,
    pub pos: Pos,
    /// Enclosing invocations, innermost first.
    pub trace: Vec<(String, Pos)>,
}

impl fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.pos, self.kind)?;
        for (m, p) in &self.trace {
            write!(f, "\n    in {m} called at {p}")?;
        }
        Ok(())
    }
}

fn fail<T>(kind: RuntimeErrorKind, pos: Pos) -> Result<T, RuntimeError> {
    Err(RuntimeError { kind, pos, trace: Vec::new() })
}

pub fn eval_binop(op: BinOp, a: i32, b: i32) -> Result<i32, RuntimeErrorKind> {
    use BinOp::*;
    Ok(match op {
        Add => a.wrapping_add(b),
        Sub => a.wrapping_sub(b),
        Xor => a ^ b,
        Mul => a.wrapping_mul(b),
        Div if b == 0 => return Err(RuntimeErrorKind::DivisionByZero),
        Div => a.wrapping_div(b),
        Mod if b == 0 => return Err(RuntimeErrorKind::DivisionByZero),
        Mod => a.wrapping_rem(b),
        BitAnd => a & b,
        BitOr => a | b,
        And => (a != 0 && b != 0) as i32,
        Or => (a != 0 || b != 0) as i32,
        Lt => (a < b) as i32,
        Gt => (a > b) as i32,
        Eq => (a == b) as i32,
        Ne => (a != b) as i32,
        Le => (a <= b) as i32,
        Ge => (a >= b) as i32,
    })
}

pub fn eval_expression(env: &Env, store: &Store, e: &Expr) -> Result<i32, RuntimeErrorKind> {
    match e {
        Expr::Const(n) => Ok(*n),
        Expr::Nil => Ok(0),
        Expr::Var(x) => {
            let l = lookup(env, x).ok_or_else(|| RuntimeErrorKind::UnboundVariable(x.clone()))?;
            store.get(l).word().ok_or_else(|| RuntimeErrorKind::BadValue(x.clone()))
        }
        Expr::Binary(op, l, r) => eval_binop(*op, eval_expression(env, store, l)?, eval_expression(env, store, r)?),
    }
}

fn apply(op: ModOp, a: i32, b: i32) -> i32 {
    match op {
        ModOp::Add => a.wrapping_add(b),
        ModOp::Sub => a.wrapping_sub(b),
        ModOp::Xor => a ^ b,
    }
}

/// The executing method's object and scope.
#[derive(Clone, Debug)]
pub struct Frame {
    pub this: Loc,
    /// Class declaring the running method; local calls resolve here.
    pub class: String,
    pub env: Env,
}

pub const DEFAULT_MAX_DEPTH: usize = 1_000_000;

pub struct Interpreter<'m> {
    model: &'m ClassModel,
    pub max_depth: usize,
    pub step_limit: u64,
    pub steps: u64,
    depth: usize,
    trace: Option<Box<dyn FnMut(&str) + 'm>>,
}

impl<'m> Interpreter<'m> {
    pub fn new(model: &'m ClassModel) -> Interpreter<'m> {
        Interpreter { model, max_depth: DEFAULT_MAX_DEPTH, step_limit: u64::MAX, steps: 0, depth: 0, trace: None }
    }

    /// Receives one line per executed statement.
    pub fn set_trace(&mut self, sink: impl FnMut(&str) + 'm) {
        self.trace = Some(Box::new(sink));
    }

    /// Allocates the main object: zeroed fields at 1..=n, the object at n + 1.
    pub fn instantiate(&self, store: &mut Store, class: &str) -> Frame {
        let info = self.model.class(class).expect("known class");
        let fields: Env = info.fields.iter().map(|f| (f.name.clone(), store.alloc(Value::Int(0)))).collect();
        let this = store.alloc(Value::Obj(Arc::new(ObjVal { class: class.to_string(), fields: fields.clone() })));
        Frame { this, class: class.to_string(), env: fields }
    }

    pub fn exec_seq(&mut self, frame: &mut Frame, store: &mut Store, ss: &[Stmt], dir: Dir) -> Result<(), RuntimeError> {
        match dir {
            Dir::Forward => ss.iter().try_for_each(|s| self.exec(frame, store, s, dir)),
            Dir::Backward => ss.iter().rev().try_for_each(|s| self.exec(frame, store, s, dir)),
        }
    }

    fn eval(&self, frame: &Frame, store: &Store, e: &Expr, pos: Pos) -> Result<i32, RuntimeError> {
        eval_expression(&frame.env, store, e).map_err(|kind| RuntimeError { kind, pos, trace: Vec::new() })
    }

    fn loc(&self, frame: &Frame, x: &str, pos: Pos) -> Result<Loc, RuntimeError> {
        lookup(&frame.env, x).map_or_else(|| fail(RuntimeErrorKind::UnboundVariable(x.to_string()), pos), Ok)
    }

    pub fn exec(&mut self, frame: &mut Frame, store: &mut Store, s: &Stmt, dir: Dir) -> Result<(), RuntimeError> {
        let pos = s.pos;
        self.steps += 1;
        if self.steps > self.step_limit {
            return fail(RuntimeErrorKind::StepLimitExceeded(self.step_limit), pos);
        }
        if let Some(t) = self.trace.as_mut() {
            let head = crate::frontend::print_statements(std::slice::from_ref(s));
            let first = head.lines().next().unwrap_or_default();
            let arrow = if dir == Dir::Forward { "->" } else { "<-" };
            t(&format!("{pos} {arrow} {}{first}", "  ".repeat(self.depth)));
        }
        match &s.kind {
            StmtKind::Skip => Ok(()),
            StmtKind::Assign(x, op, e) => {
                let l = self.loc(frame, x, pos)?;
                let v = self.eval(frame, store, e, pos)?;
                let Value::Int(old) = *store.get(l) else {
                    return fail(RuntimeErrorKind::BadValue(x.clone()), pos);
                };
                let op = if dir == Dir::Forward { *op } else { op.inverse() };
                store.set(l, Value::Int(apply(op, old, v)));
                Ok(())
            }
            StmtKind::Swap(a, b) => {
                let (la, lb) = (self.loc(frame, a, pos)?, self.loc(frame, b, pos)?);
                let va = store.get(la).clone();
                let vb = std::mem::replace(&mut store.cells[lb as usize], va);
                store.set(la, vb);
                Ok(())
            }
            StmtKind::If(e1, s1, s2, e2) => {
                let (test, assert) = if dir == Dir::Forward { (e1, e2) } else { (e2, e1) };
                let taken = self.eval(frame, store, test, pos)? != 0;
                self.exec_seq(frame, store, if taken { s1 } else { s2 }, dir)?;
                if (self.eval(frame, store, assert, pos)? != 0) != taken {
                    return fail(RuntimeErrorKind::AssertionFailure(Assertion::IfExit), pos);
                }
                Ok(())
            }
            StmtKind::Loop(e1, s1, s2, e2) => {
                let (entry, exit) = if dir == Dir::Forward { (e1, e2) } else { (e2, e1) };
                if self.eval(frame, store, entry, pos)? == 0 {
                    return fail(RuntimeErrorKind::AssertionFailure(Assertion::LoopEntry), pos);
                }
                loop {
                    self.exec_seq(frame, store, s1, dir)?;
                    if self.eval(frame, store, exit, pos)? != 0 {
                        return Ok(());
                    }
                    self.exec_seq(frame, store, s2, dir)?;
                    if self.eval(frame, store, entry, pos)? != 0 {
                        return fail(RuntimeErrorKind::AssertionFailure(Assertion::LoopEntry), pos);
                    }
                }
            }
            StmtKind::ObjectBlock { class, var, body, .. } => {
                let mark = store.domain().end - 1;
                let info = self.model.class(class).expect("checked class");
                let fields: Env = info.fields.iter().map(|f| (f.name.clone(), store.alloc(Value::Int(0)))).collect();
                let obj = store.alloc(Value::Obj(Arc::new(ObjVal { class: class.clone(), fields: fields.clone() })));
                let r = store.alloc(Value::Loc(obj));
                frame.env.push((var.clone(), r));
                let res = self.exec_seq(frame, store, body, dir);
                frame.env.pop();
                res?;
                if *store.get(r) != Value::Loc(obj) {
                    return fail(RuntimeErrorKind::ReferenceNotRestored(var.clone()), pos);
                }
                if fields.iter().any(|(_, l)| store.get(*l).word() != Some(0)) {
                    return fail(RuntimeErrorKind::NonZeroFieldsAtDestruct(var.clone()), pos);
                }
                store.restrict(mark);
                Ok(())
            }
            StmtKind::LocalBlock { var, init, body, exit } => {
                let (init, exit) = if dir == Dir::Forward { (init, exit) } else { (exit, init) };
                let mark = store.domain().end - 1;
                let v = self.eval(frame, store, init, pos)?;
                let l = store.alloc(Value::Int(v));
                frame.env.push((var.clone(), l));
                let res = self.exec_seq(frame, store, body, dir);
                frame.env.pop();
                res?;
                let expected = self.eval(frame, store, exit, pos)?;
                let value = store.get(l).word().unwrap_or_default();
                if value != expected {
                    return fail(RuntimeErrorKind::DelocalMismatch { var: var.clone(), value, expected }, pos);
                }
                store.restrict(mark);
                Ok(())
            }
            StmtKind::Call(inv) => self.call(frame, store, inv, dir, pos),
            StmtKind::Reversal(inv, body) => {
                // Only reachable on programs that were not desugared.
                let fwd = Invocation { uncall: false, ..inv.clone() };
                let back = Invocation { uncall: true, ..inv.clone() };
                let (first, last) = if dir == Dir::Forward { (&fwd, &back) } else { (&back, &fwd) };
                self.call(frame, store, first, Dir::Forward, pos)?;
                self.exec(frame, store, body, dir)?;
                self.call(frame, store, last, Dir::Forward, pos)
            }
        }
    }

    fn call(&mut self, frame: &Frame, store: &mut Store, inv: &Invocation, dir: Dir, pos: Pos) -> Result<(), RuntimeError> {
        let (this, class) = match &inv.object {
            None => (frame.this, frame.class.clone()),
            Some(x0) => {
                let r = self.loc(frame, x0, pos)?;
                match store.get(r) {
                    Value::Loc(l) if *l != 0 => match store.get(*l) {
                        Value::Obj(o) => (*l, o.class.clone()),
                        _ => return fail(RuntimeErrorKind::BadValue(x0.clone()), pos),
                    },
                    Value::Int(0) | Value::Loc(_) => return fail(RuntimeErrorKind::NilDereference(x0.clone()), pos),
                    _ => return fail(RuntimeErrorKind::BadValue(x0.clone()), pos),
                }
            }
        };
        let model = self.model;
        let Some((owner, decl)) = model.method(&class, &inv.method) else {
            return fail(RuntimeErrorKind::UnknownMethod { class, method: inv.method.clone() }, pos);
        };
        let Value::Obj(obj) = store.get(this) else {
            return fail(RuntimeErrorKind::BadValue("this".into()), pos);
        };
        let mut env = obj.fields.clone();
        for (p, a) in decl.params.iter().zip(&inv.args) {
            let x = a.as_var().expect("desugared arguments are variables");
            env.push((p.name.clone(), self.loc(frame, x, pos)?));
        }
        if self.depth >= self.max_depth {
            return fail(RuntimeErrorKind::StackOverflow(self.max_depth), pos);
        }
        let body_dir = if inv.uncall { dir.flip() } else { dir };
        let mut callee = Frame { this, class: owner.to_string(), env };
        self.depth += 1;
        let res = self.exec_seq(&mut callee, store, &decl.body, body_dir);
        self.depth -= 1;
        res.map_err(|mut e| {
            let name = match &inv.object {
                Some(o) => format!("{o}::{}", inv.method),
                None => inv.method.clone(),
            };
            e.trace.push((name, pos));
            e
        })
    }
}

/// Final values of the main object's fields, in layout order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Output {
    pub fields: Vec<(String, i32)>,
}

impl Output {
    pub fn get(&self, name: &str) -> Option<i32> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

impl fmt::Display for Output {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, v) in &self.fields {
            writeln!(f, "{n} = {v}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub max_depth: usize,
    pub step_limit: u64,
    /// Native stack for the interpreter thread; deep recursion needs room.
    pub stack_bytes: usize,
    pub trace: bool,
}

impl Default for RunOptions {
    fn default() -> RunOptions {
        RunOptions { max_depth: DEFAULT_MAX_DEPTH, step_limit: u64::MAX, stack_bytes: 256 << 20, trace: false }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub output: Output,
    pub store: Store,
    pub steps: u64,
    pub trace: Vec<String>,
}

/// Runs `main` on a fresh store. The result keeps the final store so that
/// callers can check nothing leaked.
pub fn run_program(model: &ClassModel, opts: &RunOptions) -> Result<RunResult, RuntimeError> {
    std::thread::scope(|scope| {
        std::thread::Builder::new()
            .stack_size(opts.stack_bytes)
            .spawn_scoped(scope, || run_here(model, opts))
            .expect("spawn interpreter thread")
            .join()
            .expect("interpreter thread panicked")
    })
}

fn run_here(model: &ClassModel, opts: &RunOptions) -> Result<RunResult, RuntimeError> {
    let (main_class, main) = model.find_main().map_err(|e| RuntimeError {
        kind: RuntimeErrorKind::UnknownMethod { class: "<program>".into(), method: "main".into() },
        pos: e.pos,
        trace: Vec::new(),
    })?;
    let mut lines = Vec::new();
    let mut store = Store::new();
    let (res, steps, mut frame) = {
        let mut it = Interpreter::new(model);
        it.max_depth = opts.max_depth;
        it.step_limit = opts.step_limit;
        if opts.trace {
            it.set_trace(|l: &str| lines.push(l.to_string()));
        }
        let mut frame = it.instantiate(&mut store, main_class);
        let res = it.exec_seq(&mut frame, &mut store, &main.body, Dir::Forward);
        (res, it.steps, frame)
    };
    res?;
    frame.env.truncate(model.class(main_class).unwrap().fields.len());
    let fields = frame.env.iter().map(|(n, l)| (n.clone(), store.get(*l).word().unwrap_or_default())).collect();
    Ok(RunResult { output: Output { fields }, store, steps, trace: lines })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::build_class_model;
    use crate::frontend::{desugar, parse_source};

    fn run(src: &str) -> Result<Output, RuntimeErrorKind> {
        let m = build_class_model(&desugar(&parse_source(src).unwrap())).unwrap();
        run_program(&m, &RunOptions::default()).map(|r| r.output).map_err(|e| e.kind)
    }

    #[test]
    fn operator_table() {
        assert_eq!(eval_binop(BinOp::And, 0, 7), Ok(0));
        assert_eq!(eval_binop(BinOp::And, 3, 7), Ok(1));
        assert_eq!(eval_binop(BinOp::Le, 5, 5), Ok(1));
        assert_eq!(eval_binop(BinOp::Div, -7, 2), Ok(-3));
        assert_eq!(eval_binop(BinOp::Mod, -7, 2), Ok(-1));
        assert_eq!(eval_binop(BinOp::Div, i32::MIN, -1), Ok(i32::MIN));
        assert_eq!(eval_binop(BinOp::Mod, 1, 0), Err(RuntimeErrorKind::DivisionByZero));
        assert_eq!(eval_expression(&Env::new(), &Store::new(), &Expr::Nil), Ok(0));
    }

    #[test]
    fn zero_cleared_copy() {
        let o = run("class P int x int y method main() y += 9 x ^= y").unwrap();
        assert_eq!(o.get("x"), Some(9));
    }

    #[test]
    fn if_exit_assertion() {
        assert_eq!(
            run("class P int x method main() if x = 0 then x += 1 fi x = 0").unwrap_err(),
            RuntimeErrorKind::AssertionFailure(Assertion::IfExit)
        );
    }

    #[test]
    fn loop_counts_and_entry() {
        let o = run("class P int i int s method main() from i = 0 do i += 1 s += i until i = 4").unwrap();
        assert_eq!((o.get("i"), o.get("s")), (Some(4), Some(10)));
        assert_eq!(
            run("class P int i method main() from i = 0 loop skip until i = 4").unwrap_err(),
            RuntimeErrorKind::AssertionFailure(Assertion::LoopEntry)
        );
    }

    #[test]
    fn destruct_requires_zero_fields() {
        let src = "class O int d method add5() d += 5
                   class P int r method main() construct O o call o::add5() destruct o";
        assert_eq!(run(src).unwrap_err(), RuntimeErrorKind::NonZeroFieldsAtDestruct("o".into()));
    }

    #[test]
    fn delocal_mismatch_and_nil() {
        assert!(matches!(
            run("class P int x method main() local int t = 0 t += 1 delocal t = 0").unwrap_err(),
            RuntimeErrorKind::DelocalMismatch { .. }
        ));
        assert_eq!(
            run("class O method m() skip class P O o method main() call o::m()").unwrap_err(),
            RuntimeErrorKind::NilDereference("o".into())
        );
    }

    #[test]
    fn skip_program() {
        let o = run("class P int a int b method main() skip").unwrap();
        assert_eq!(o.fields, vec![("a".into(), 0), ("b".into(), 0)]);
    }

    #[test]
    fn uncall_inverts() {
        let o = run("class P int x int y method main() x += 3 uncall f(x) method f(int a) y += a * 2").unwrap();
        assert_eq!(o.get("y"), Some(-6));
    }

    #[test]
    fn depth_limit() {
        let m = build_class_model(&parse_source("class P int x method main() call main()").unwrap()).unwrap();
        let opts = RunOptions { max_depth: 100, ..RunOptions::default() };
        assert_eq!(run_program(&m, &opts).unwrap_err().kind, RuntimeErrorKind::StackOverflow(100));
    }
}
