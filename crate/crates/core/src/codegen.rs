//! Translation of core programs to PISA.
//!
//! Register use: `$0` is zero, `$1` the stack pointer, `$2` the return
//! offset, `$3` the current object. `$4`..`$31` form a pool handed out
//! in strict stack order. Every variable lives in a memory cell; a
//! variable's register holds the cell's address. Fields are reached
//! through `$3` plus the field offset.
//!
//! All statement templates restore every temporary register to zero, so
//! pool registers are zero whenever control crosses a method boundary.

use std::collections::{HashMap, HashSet};

use pisa::pal::{pop, push};
use pisa::{invert_instruction, Instr, Line, Operand, Reg};
use thiserror::Error;

use crate::classes::{ClassError, ClassModel};
use crate::frontend::{BinOp, Expr, Invocation, ModOp, Pos, Stmt, StmtKind, TypeName};

const POOL_FIRST: u8 = 4;
const POOL_LAST: u8 = 31;

/// Label of the shared trap used by runtime checks.
pub const ERROR_LABEL: &str = "l_error";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CodegenOptions {
    /// Emit branches to [`ERROR_LABEL`] on failed assertions, failed
    /// delocal checks, non-zero fields at destruction, unrestored
    /// references and division by zero.
    pub runtime_checks: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodegenError {
    #[error("register pool exhausted in {class}::{method}")]
    RegisterPoolExhausted { class: String, method: String, pos: Pos },
    #[error("statement form not in the core language; desugar first")]
    NotCore { pos: Pos },
    #[error("unbound variable `{name}`")]
    Unbound { name: String, pos: Pos },
    #[error("unknown method `{method}` in class `{class}`")]
    UnknownMethod { class: String, method: String, pos: Pos },
    #[error("`{name}` is not an object")]
    NotAnObject { name: String, pos: Pos },
    #[error(transparent)]
    Class(#[from] ClassError),
}

impl CodegenError {
    pub fn pos(&self) -> Pos {
        match self {
            CodegenError::RegisterPoolExhausted { pos, .. }
            | CodegenError::NotCore { pos }
            | CodegenError::Unbound { pos, .. }
            | CodegenError::UnknownMethod { pos, .. }
            | CodegenError::NotAnObject { pos, .. } => *pos,
            CodegenError::Class(e) => e.pos,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Compiled {
    pub lines: Vec<Line>,
    /// Main-class fields in layout order, each with the label of the
    /// static cell that receives its final value.
    pub outputs: Vec<(String, String)>,
    /// Number of leading static words (vtables and output cells).
    pub static_words: usize,
    /// First stack address; equal to the program length.
    pub stack_base: usize,
}

type R<T> = Result<T, CodegenError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Place {
    Reg(Reg),
    Field(i32),
}

#[derive(Clone, Debug)]
struct Var {
    name: String,
    place: Place,
    ty: TypeName,
}

fn reverse(code: &[Instr]) -> Vec<Instr> {
    code.iter().rev().map(invert_instruction).collect()
}

fn num(n: i32) -> Operand {
    Operand::Num(n)
}

fn lbl(l: &str) -> Operand {
    Operand::label(l)
}

struct Gen<'a> {
    model: &'a ClassModel,
    checks: bool,
    lines: Vec<Line>,
    used_labels: HashSet<String>,
    counter: usize,
    entries: HashMap<(String, String), String>,
    vtables: HashMap<String, String>,
    class: String,
    method: String,
    pos: Pos,
    used: u8,
    scope: Vec<Var>,
}

pub fn compile(model: &ClassModel, opts: CodegenOptions) -> Result<Compiled, CodegenError> {
    let mut g = Gen {
        model,
        checks: opts.runtime_checks,
        lines: Vec::new(),
        used_labels: HashSet::new(),
        counter: 0,
        entries: HashMap::new(),
        vtables: HashMap::new(),
        class: String::new(),
        method: String::new(),
        pos: Pos::default(),
        used: 0,
        scope: Vec::new(),
    };
    g.used_labels.insert(ERROR_LABEL.to_string());
    g.program()
}

/// Compiles and renders PAL text with label immediates made absolute.
pub fn compile_to_pal(model: &ClassModel, opts: CodegenOptions) -> Result<String, CodegenError> {
    let c = compile(model, opts)?;
    let lines = pisa::program::resolve_immediates(&c.lines).expect("generated labels resolve");
    Ok(pisa::emit_pal(&lines))
}

impl<'a> Gen<'a> {
    fn unique(&mut self, base: String) -> String {
        let mut l = base.clone();
        let mut n = 1;
        while !self.used_labels.insert(l.clone()) {
            l = format!("{base}_{n}");
            n += 1;
        }
        l
    }

    fn fresh(&mut self, kind: &str) -> String {
        self.counter += 1;
        format!("l_{kind}{}", self.counter)
    }

    fn emit(&mut self, i: Instr) {
        self.lines.push(Line::new(i));
    }

    fn emit_all(&mut self, is: impl IntoIterator<Item = Instr>) {
        for i in is {
            self.emit(i);
        }
    }

    fn emit_at(&mut self, label: &str, i: Instr) {
        self.lines.push(Line::labeled(label, i));
    }

    fn trap_if_nonzero(&mut self, r: Reg) {
        if self.checks {
            self.emit(Instr::Bne(r, Reg::ZERO, lbl(ERROR_LABEL)));
        }
    }

    // Register pool.

    fn mark(&self) -> u8 {
        self.used
    }

    fn release(&mut self, m: u8) {
        self.used = m;
    }

    fn alloc(&mut self) -> R<Reg> {
        let r = POOL_FIRST + self.used;
        if r > POOL_LAST {
            return Err(CodegenError::RegisterPoolExhausted {
                class: self.class.clone(),
                method: self.method.clone(),
                pos: self.pos,
            });
        }
        self.used += 1;
        Ok(Reg(r))
    }

    fn lookup(&self, x: &str) -> R<&Var> {
        self.scope
            .iter()
            .rev()
            .find(|v| v.name == x)
            .ok_or_else(|| CodegenError::Unbound { name: x.to_string(), pos: self.pos })
    }

    // Program layout.

    fn program(mut self) -> R<Compiled> {
        let model = self.model;
        let (main_class, _) = model.find_main()?;
        let main_class = main_class.to_string();

        for name in model.class_names() {
            let decl = model.decl(name).expect("class in model");
            for m in &decl.methods {
                let l = self.unique(format!("l_{}_{}", name, m.name));
                self.entries.insert((name.clone(), m.name.clone()), l);
            }
        }

        for name in model.class_names() {
            let info = model.class(name).expect("class in model");
            let vt = self.unique(format!("l_{name}_vt"));
            self.vtables.insert(name.clone(), vt.clone());
            if info.vtable.is_empty() {
                self.emit_at(&vt, Instr::Data(num(0)));
            }
            for (k, slot) in info.vtable.iter().enumerate() {
                let entry = self.entries[&(slot.owner.clone(), slot.method.clone())].clone();
                let d = Instr::Data(lbl(&entry));
                if k == 0 {
                    self.emit_at(&vt, d);
                } else {
                    self.emit(d);
                }
            }
        }

        let main_info = model.class(&main_class).expect("main class");
        let mut outputs = Vec::new();
        for f in &main_info.fields {
            let l = self.unique(format!("l_out_{}", f.name));
            self.emit_at(&l, Instr::Data(num(0)));
            outputs.push((f.name.clone(), l));
        }
        let static_words = self.lines.len();

        // Prelude: place the main object at the stack base, call main,
        // tear it down, and copy its fields to the output cells.
        let size = main_info.size() as i32;
        let vt = self.vtables[&main_class].clone();
        let entry = self.entries[&(main_class.clone(), "main".to_string())].clone();
        let (rm, rv) = (Reg(POOL_FIRST), Reg(POOL_FIRST + 1));
        self.lines.push(Line { label: None, instr: Instr::Start, comment: Some("program entry".into()) });
        let base_at = self.lines.len();
        self.emit(Instr::Addi(Reg::SP, num(0)));
        self.emit_all([
            Instr::Xor(rm, Reg::SP),
            Instr::Xori(rv, lbl(&vt)),
            Instr::Exch(rv, Reg::SP),
            Instr::Addi(Reg::SP, num(size)),
        ]);
        self.emit_all(push(rm));
        self.emit(Instr::Bra(lbl(&entry)));
        self.emit_all(pop(rm));
        self.emit_all([
            Instr::Addi(Reg::SP, num(-size)),
            Instr::Exch(rv, Reg::SP),
            Instr::Xori(rv, lbl(&vt)),
            Instr::Xor(rm, Reg::SP),
        ]);
        for (k, (_, out)) in outputs.iter().enumerate() {
            let off = k as i32 + 1;
            self.emit_all([
                Instr::Addi(Reg::SP, num(off)),
                Instr::Exch(rm, Reg::SP),
                Instr::Xori(rv, lbl(out)),
                Instr::Exch(rm, rv),
                Instr::Xori(rv, lbl(out)),
                Instr::Addi(Reg::SP, num(-off)),
            ]);
        }
        let unbase_at = self.lines.len();
        self.emit(Instr::Addi(Reg::SP, num(0)));
        self.emit(Instr::Finish);
        if self.checks {
            self.emit_at(ERROR_LABEL, Instr::Finish);
        }

        for name in model.class_names() {
            let decl = model.decl(name).expect("class in model");
            for m in &decl.methods {
                self.method(name, &m.name)?;
            }
        }

        let p = self.lines.len() as i32;
        self.lines[base_at].instr = Instr::Addi(Reg::SP, num(p));
        self.lines[unbase_at].instr = Instr::Addi(Reg::SP, num(-p));
        Ok(Compiled { lines: self.lines, outputs, static_words, stack_base: p as usize })
    }

    fn method(&mut self, class: &str, name: &str) -> R<()> {
        let model = self.model;
        let decl = model.decl(class).and_then(|c| c.method(name)).expect("declared method");
        let info = model.class(class).expect("class in model");
        self.class = class.to_string();
        self.method = name.to_string();
        self.pos = decl.pos;
        self.used = 0;
        self.scope = info
            .fields
            .iter()
            .enumerate()
            .map(|(k, f)| Var { name: f.name.clone(), place: Place::Field(k as i32 + 1), ty: f.ty.clone() })
            .collect();
        let mut params = Vec::new();
        for p in &decl.params {
            let r = self.alloc()?;
            params.push(r);
            self.scope.push(Var { name: p.name.clone(), place: Place::Reg(r), ty: p.ty.clone() });
        }

        let entry = self.entries[&(class.to_string(), name.to_string())].clone();
        let top = self.unique(format!("{entry}_top"));
        let bot = self.unique(format!("{entry}_bot"));
        self.lines.push(Line {
            label: Some(top.clone()),
            instr: Instr::Bra(lbl(&bot)),
            comment: Some(format!("{class}::{name}")),
        });
        self.emit_all(pop(Reg::RO));
        for &r in params.iter().rev() {
            self.emit_all(push(r));
        }
        self.emit_all(push(Reg::THIS));
        self.emit_at(&entry, Instr::Swapbr(Reg::RO));
        self.emit(Instr::Neg(Reg::RO));
        self.emit_all(pop(Reg::THIS));
        for &r in &params {
            self.emit_all(pop(r));
        }
        self.emit_all(push(Reg::RO));
        self.stmts(&decl.body)?;
        self.emit_at(&bot, Instr::Bra(lbl(&top)));
        Ok(())
    }

    // Statements.

    fn stmts(&mut self, ss: &[Stmt]) -> R<()> {
        for s in ss {
            self.stmt(s)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> R<()> {
        self.pos = s.pos;
        match &s.kind {
            StmtKind::Skip => Ok(()),
            StmtKind::Assign(x, op, e) => self.assign(x, *op, e),
            StmtKind::Swap(a, b) => self.swap(a, b),
            StmtKind::If(e1, s1, s2, e2) => self.conditional(e1, s1, s2, e2),
            StmtKind::Loop(e1, s1, s2, e2) => self.repeat(e1, s1, s2, e2),
            StmtKind::ObjectBlock { class, var, body, ctor: None } => self.object_block(class, var, body),
            StmtKind::LocalBlock { var, init, body, exit } => self.local_block(var, init, body, exit),
            StmtKind::Call(inv) => self.call(inv),
            StmtKind::ObjectBlock { .. } | StmtKind::Reversal(..) => Err(CodegenError::NotCore { pos: s.pos }),
        }
    }

    /// `x op= v` where `re` holds `v`.
    fn update(&mut self, x: &str, op: ModOp, re: Reg) -> R<()> {
        let place = self.lookup(x)?.place;
        let m = self.mark();
        let t = self.alloc()?;
        let apply = match op {
            ModOp::Add => Instr::Add(t, re),
            ModOp::Sub => Instr::Sub(t, re),
            ModOp::Xor => Instr::Xor(t, re),
        };
        match place {
            Place::Reg(a) => self.emit_all([Instr::Exch(t, a), apply, Instr::Exch(t, a)]),
            Place::Field(off) => self.emit_all([
                Instr::Addi(Reg::THIS, num(off)),
                Instr::Exch(t, Reg::THIS),
                apply,
                Instr::Exch(t, Reg::THIS),
                Instr::Addi(Reg::THIS, num(-off)),
            ]),
        }
        self.release(m);
        Ok(())
    }

    fn assign(&mut self, x: &str, op: ModOp, e: &Expr) -> R<()> {
        let m = self.mark();
        let mut c = Vec::new();
        let re = self.expr(e, &mut c)?;
        self.emit_all(c.clone());
        self.update(x, op, re)?;
        self.emit_all(reverse(&c));
        self.release(m);
        Ok(())
    }

    /// Register holding the address of `x`'s cell, with setup code.
    fn address(&mut self, x: &str) -> R<(Reg, Vec<Instr>)> {
        match self.lookup(x)?.place {
            Place::Reg(r) => Ok((r, Vec::new())),
            Place::Field(off) => {
                let t = self.alloc()?;
                Ok((t, vec![Instr::Xor(t, Reg::THIS), Instr::Addi(t, num(off))]))
            }
        }
    }

    fn swap(&mut self, a: &str, b: &str) -> R<()> {
        if a == b {
            return Ok(());
        }
        let m = self.mark();
        let (ra, mut setup) = self.address(a)?;
        let (rb, sb) = self.address(b)?;
        setup.extend(sb);
        let (va, vb) = (self.alloc()?, self.alloc()?);
        self.emit_all(setup.clone());
        self.emit_all([
            Instr::Exch(va, ra),
            Instr::Exch(vb, rb),
            Instr::Xor(va, vb),
            Instr::Xor(vb, va),
            Instr::Xor(va, vb),
            Instr::Exch(va, ra),
            Instr::Exch(vb, rb),
        ]);
        self.emit_all(reverse(&setup));
        self.release(m);
        Ok(())
    }

    /// Emits code leaving `rt ^= (e != 0)`, with all temporaries cleared.
    fn guard(&mut self, rt: Reg, e: &Expr) -> R<()> {
        let m = self.mark();
        let mut c = Vec::new();
        let re = self.expr(e, &mut c)?;
        let mut f = Vec::new();
        match e {
            Expr::Binary(op, ..) if op.is_boolean() => f.push(Instr::Xor(rt, re)),
            _ => self.nz(rt, re, &mut f)?,
        }
        self.emit_all(c.clone());
        self.emit_all(f);
        self.emit_all(reverse(&c));
        self.release(m);
        Ok(())
    }

    fn conditional(&mut self, e1: &Expr, s1: &[Stmt], s2: &[Stmt], e2: &Expr) -> R<()> {
        let base = self.fresh("if");
        let test = self.unique(format!("{base}_test"));
        let no = self.unique(format!("{base}_false"));
        let at = self.unique(format!("{base}_at"));
        let assert = self.unique(format!("{base}_assert"));
        let m = self.mark();
        let rt = self.alloc()?;
        self.trap_if_nonzero(rt);
        self.guard(rt, e1)?;
        self.emit_at(&test, Instr::Beq(rt, Reg::ZERO, lbl(&no)));
        self.emit(Instr::Xori(rt, num(1)));
        // rt is zero inside both branches, so they may borrow it.
        self.release(m);
        self.stmts(s1)?;
        self.emit(Instr::Xori(rt, num(1)));
        self.emit_at(&at, Instr::Bra(lbl(&assert)));
        self.emit_at(&no, Instr::Bra(lbl(&test)));
        self.stmts(s2)?;
        self.alloc()?;
        self.emit_at(&assert, Instr::Bne(rt, Reg::ZERO, lbl(&at)));
        self.guard(rt, e2)?;
        self.trap_if_nonzero(rt);
        self.release(m);
        Ok(())
    }

    fn repeat(&mut self, e1: &Expr, s1: &[Stmt], s2: &[Stmt], e2: &Expr) -> R<()> {
        let base = self.fresh("loop");
        let entry = self.unique(format!("{base}_entry"));
        let test = self.unique(format!("{base}_test"));
        let assert = self.unique(format!("{base}_assert"));
        let exit = self.unique(format!("{base}_exit"));
        let m = self.mark();
        let rt = self.alloc()?;
        self.emit(Instr::Xori(rt, num(1)));
        self.emit_at(&entry, Instr::Beq(rt, Reg::ZERO, lbl(&assert)));
        self.guard(rt, e1)?;
        self.trap_if_nonzero(rt);
        self.release(m);
        self.stmts(s1)?;
        self.alloc()?;
        self.trap_if_nonzero(rt);
        self.guard(rt, e2)?;
        self.emit_at(&test, Instr::Bne(rt, Reg::ZERO, lbl(&exit)));
        self.release(m);
        self.stmts(s2)?;
        self.alloc()?;
        self.emit_at(&assert, Instr::Bra(lbl(&entry)));
        self.emit_at(&exit, Instr::Bra(lbl(&test)));
        self.emit(Instr::Xori(rt, num(1)));
        self.release(m);
        Ok(())
    }

    fn field_checks(&mut self, size: i32) -> R<()> {
        if !self.checks {
            return Ok(());
        }
        for k in 1..size {
            let m = self.mark();
            let t = self.alloc()?;
            self.emit_all([
                Instr::Addi(Reg::SP, num(k)),
                Instr::Exch(t, Reg::SP),
                Instr::Bne(t, Reg::ZERO, lbl(ERROR_LABEL)),
                Instr::Exch(t, Reg::SP),
                Instr::Addi(Reg::SP, num(-k)),
            ]);
            self.release(m);
        }
        Ok(())
    }

    fn object_block(&mut self, class: &str, x: &str, body: &[Stmt]) -> R<()> {
        let info = self.model.class(class).ok_or_else(|| CodegenError::NotAnObject { name: x.into(), pos: self.pos })?;
        let size = info.size() as i32;
        let vt = self.vtables[class].clone();
        let m0 = self.mark();
        let rx = self.alloc()?;
        let m1 = self.mark();
        let (rv, rt) = (self.alloc()?, self.alloc()?);
        self.emit_all([Instr::Xori(rv, lbl(&vt)), Instr::Exch(rv, Reg::SP)]);
        self.field_checks(size)?;
        self.trap_if_nonzero(rt);
        self.emit_all([Instr::Xor(rt, Reg::SP), Instr::Addi(Reg::SP, num(size)), Instr::Xor(rx, Reg::SP)]);
        self.emit_all(push(rt));
        self.release(m1);

        self.scope.push(Var { name: x.to_string(), place: Place::Reg(rx), ty: TypeName::Class(class.to_string()) });
        self.stmts(body)?;
        self.scope.pop();

        let (rv, rt) = (self.alloc()?, self.alloc()?);
        self.emit_all(pop(rt));
        self.emit_all([Instr::Xor(rx, Reg::SP), Instr::Addi(Reg::SP, num(-size)), Instr::Xor(rt, Reg::SP)]);
        self.trap_if_nonzero(rt);
        self.field_checks(size)?;
        self.emit_all([Instr::Exch(rv, Reg::SP), Instr::Xori(rv, lbl(&vt))]);
        self.release(m0);
        Ok(())
    }

    fn local_block(&mut self, x: &str, init: &Expr, body: &[Stmt], exit: &Expr) -> R<()> {
        let m0 = self.mark();
        let rx = self.alloc()?;
        let m1 = self.mark();
        let rt = self.alloc()?;
        self.trap_if_nonzero(rt);
        let mut c = Vec::new();
        let re = self.expr(init, &mut c)?;
        self.emit_all(c.clone());
        self.emit_all([Instr::Xor(rx, Reg::SP), Instr::Xor(rt, re)]);
        self.emit_all(push(rt));
        self.emit_all(reverse(&c));
        self.release(m1);

        self.scope.push(Var { name: x.to_string(), place: Place::Reg(rx), ty: TypeName::Int });
        self.stmts(body)?;
        self.scope.pop();

        let rt = self.alloc()?;
        let mut c = Vec::new();
        let re = self.expr(exit, &mut c)?;
        self.emit_all(c.clone());
        self.emit_all(pop(rt));
        self.emit_all([Instr::Xor(rt, re), Instr::Xor(rx, Reg::SP)]);
        self.emit_all(reverse(&c));
        self.trap_if_nonzero(rt);
        self.release(m0);
        Ok(())
    }

    /// XORs the value of `x` into `r`. The sequence is its own inverse.
    fn load(&mut self, x: &str, r: Reg, code: &mut Vec<Instr>) -> R<()> {
        let place = self.lookup(x)?.place;
        let m = self.mark();
        let t = self.alloc()?;
        match place {
            Place::Reg(a) => code.extend([Instr::Exch(t, a), Instr::Xor(r, t), Instr::Exch(t, a)]),
            Place::Field(off) => code.extend([
                Instr::Addi(Reg::THIS, num(off)),
                Instr::Exch(t, Reg::THIS),
                Instr::Xor(r, t),
                Instr::Exch(t, Reg::THIS),
                Instr::Addi(Reg::THIS, num(-off)),
            ]),
        }
        self.release(m);
        Ok(())
    }

    /// `rtgt ^= vtable[slot]` of the object whose address is in `robj`.
    fn vtable_lookup(&mut self, robj: Reg, slot: i32, rtgt: Reg) -> R<()> {
        let m = self.mark();
        let (rv, rt) = (self.alloc()?, self.alloc()?);
        self.emit_all([
            Instr::Exch(rv, robj),
            Instr::Addi(rv, num(slot)),
            Instr::Exch(rt, rv),
            Instr::Xor(rtgt, rt),
            Instr::Exch(rt, rv),
            Instr::Addi(rv, num(-slot)),
            Instr::Exch(rv, robj),
        ]);
        self.release(m);
        Ok(())
    }

    fn call(&mut self, inv: &Invocation) -> R<()> {
        let m0 = self.mark();
        let mut args = Vec::new();
        let mut setup = Vec::new();
        let target = match &inv.object {
            None => {
                let (owner, _) = self.model.method(&self.class, &inv.method).ok_or_else(|| {
                    CodegenError::UnknownMethod { class: self.class.clone(), method: inv.method.clone(), pos: self.pos }
                })?;
                Err(self.entries[&(owner.to_string(), inv.method.clone())].clone())
            }
            Some(x0) => {
                let class = match &self.lookup(x0)?.ty {
                    TypeName::Class(c) => c.clone(),
                    TypeName::Int => return Err(CodegenError::NotAnObject { name: x0.clone(), pos: self.pos }),
                };
                let slot = self.model.class(&class).and_then(|c| c.slot(&inv.method)).ok_or_else(|| {
                    CodegenError::UnknownMethod { class: class.clone(), method: inv.method.clone(), pos: self.pos }
                })?;
                let robj = self.alloc()?;
                let mut c = Vec::new();
                self.load(x0, robj, &mut c)?;
                self.emit_all(c);
                Ok((x0.clone(), robj, slot as i32))
            }
        };
        for a in &inv.args {
            let Expr::Var(x) = a else { return Err(CodegenError::NotCore { pos: self.pos }) };
            let (r, s) = self.address(x)?;
            args.push(r);
            setup.extend(s);
        }
        self.emit_all(setup.clone());

        let mut saved: Vec<Reg> = Vec::new();
        for v in &self.scope {
            if let Place::Reg(r) = v.place {
                if !args.contains(&r) && !saved.contains(&r) {
                    saved.push(r);
                }
            }
        }
        if target.is_ok() {
            saved.push(Reg::THIS);
        }
        for &r in &saved {
            self.emit_all(push(r));
        }

        let this = match &target {
            Ok((_, robj, _)) => *robj,
            Err(_) => Reg::THIS,
        };
        let rtgt = match &target {
            Ok((_, robj, slot)) => {
                let rtgt = self.alloc()?;
                self.vtable_lookup(*robj, *slot, rtgt)?;
                Some(rtgt)
            }
            Err(_) => None,
        };
        for &r in args.iter().rev() {
            self.emit_all(push(r));
        }
        self.emit_all(push(this));

        match (&target, rtgt) {
            (Err(entry), _) => {
                let j = if inv.uncall { Instr::Rbra(lbl(entry)) } else { Instr::Bra(lbl(entry)) };
                self.emit(j);
            }
            (Ok(_), Some(rtgt)) => {
                let base = self.fresh("call");
                let jl = self.unique(format!("{base}_jump"));
                self.emit(Instr::Addi(rtgt, Operand::NegLabel(jl.clone())));
                if inv.uncall {
                    let t = self.unique(format!("{base}_turn"));
                    let b = self.unique(format!("{base}_back"));
                    self.emit_at(&t, Instr::Rbra(lbl(&b)));
                    self.emit_at(&jl, Instr::Swapbr(rtgt));
                    self.emit(Instr::Neg(rtgt));
                    self.emit_at(&b, Instr::Bra(lbl(&t)));
                } else {
                    self.emit_at(&jl, Instr::Swapbr(rtgt));
                    self.emit(Instr::Neg(rtgt));
                }
                self.emit(Instr::Addi(rtgt, lbl(&jl)));
            }
            (Ok(_), None) => unreachable!(),
        }

        self.emit_all(pop(this));
        for &r in &args {
            self.emit_all(pop(r));
        }
        if let (Ok((_, robj, slot)), Some(rtgt)) = (&target, rtgt) {
            self.vtable_lookup(*robj, *slot, rtgt)?;
        }
        for &r in saved.iter().rev() {
            self.emit_all(pop(r));
        }
        self.emit_all(reverse(&setup));
        if let Ok((x0, robj, _)) = &target {
            let mut c = Vec::new();
            self.release(m0 + 1);
            self.load(x0, *robj, &mut c)?;
            self.emit_all(c);
        }
        self.release(m0);
        Ok(())
    }

    // Expressions. Each returns the register holding the value; the
    // caller releases everything above its mark after emitting the
    // reversed code. Operand registers normally stay live until then. A
    // node that would exhaust the pool that way is lowered compactly
    // instead: it uncomputes its operands at once so only its result
    // stays live, at the price of evaluating them twice.

    fn expr(&mut self, e: &Expr, code: &mut Vec<Instr>) -> R<Reg> {
        match e {
            Expr::Const(n) => {
                let r = self.alloc()?;
                if *n != 0 {
                    code.push(Instr::Xori(r, num(*n)));
                }
                Ok(r)
            }
            Expr::Nil => self.alloc(),
            Expr::Var(x) => {
                let r = self.alloc()?;
                self.load(x, r, code)?;
                Ok(r)
            }
            Expr::Binary(op, a, b) => {
                let (m, len) = (self.mark(), code.len());
                let wide = (|| {
                    let ra = self.expr(a, code)?;
                    let rb = self.expr(b, code)?;
                    let r = self.alloc()?;
                    self.binop(*op, r, ra, rb, code)?;
                    Ok(r)
                })();
                match wide {
                    Err(CodegenError::RegisterPoolExhausted { .. }) => {
                        self.release(m);
                        code.truncate(len);
                    }
                    r => return r,
                }
                let r = self.alloc()?;
                let m = self.mark();
                let mut c = Vec::new();
                let ra = self.tight(a, &mut c)?;
                let rb = self.tight(b, &mut c)?;
                let mut f = Vec::new();
                self.binop(*op, r, ra, rb, &mut f)?;
                self.around(m, c, f, code);
                Ok(r)
            }
        }
    }

    /// Like `expr`, but leaves exactly one register allocated.
    fn tight(&mut self, e: &Expr, code: &mut Vec<Instr>) -> R<Reg> {
        if !matches!(e, Expr::Binary(..)) {
            return self.expr(e, code);
        }
        let t = self.alloc()?;
        let m = self.mark();
        let mut c = Vec::new();
        let x = self.expr(e, &mut c)?;
        self.around(m, c, vec![Instr::Xor(t, x)], code);
        Ok(t)
    }

    /// Runs `c`, then `f`, then undoes `c` and frees registers above `m`.
    fn around(&mut self, m: u8, c: Vec<Instr>, f: Vec<Instr>, code: &mut Vec<Instr>) {
        code.extend(c.iter().cloned());
        code.extend(f);
        code.extend(reverse(&c));
        self.release(m);
    }

    /// `r ^= (x != 0)`.
    fn nz(&mut self, r: Reg, x: Reg, code: &mut Vec<Instr>) -> R<()> {
        let m = self.mark();
        let (t1, t2) = (self.alloc()?, self.alloc()?);
        let c = vec![Instr::Xor(t1, x), Instr::Neg(t1), Instr::Orx(t2, x, t1)];
        self.around(m, c, vec![Instr::Srlx(r, t2, num(31))], code);
        Ok(())
    }

    /// `r ^= (a < b)`, signed.
    fn lt(&mut self, r: Reg, a: Reg, b: Reg, code: &mut Vec<Instr>) -> R<()> {
        let m = self.mark();
        let d = self.alloc()?;
        let x = self.alloc()?;
        let y = self.alloc()?;
        let z = self.alloc()?;
        let c = vec![
            Instr::Xor(d, a),
            Instr::Sub(d, b),
            Instr::Xor(x, a),
            Instr::Xor(x, b),
            Instr::Xor(y, d),
            Instr::Xor(y, a),
            Instr::Andx(z, x, y),
            Instr::Xor(z, d),
        ];
        self.around(m, c, vec![Instr::Srlx(r, z, num(31))], code);
        Ok(())
    }

    fn binop(&mut self, op: BinOp, r: Reg, a: Reg, b: Reg, code: &mut Vec<Instr>) -> R<()> {
        use BinOp::*;
        match op {
            Add => code.extend([Instr::Xor(r, a), Instr::Add(r, b)]),
            Sub => code.extend([Instr::Xor(r, a), Instr::Sub(r, b)]),
            Xor => code.extend([Instr::Xor(r, a), Instr::Xor(r, b)]),
            BitAnd => code.push(Instr::Andx(r, a, b)),
            BitOr => code.push(Instr::Orx(r, a, b)),
            Eq | Ne => {
                let m = self.mark();
                let d = self.alloc()?;
                let c = vec![Instr::Xor(d, a), Instr::Xor(d, b)];
                let mut f = Vec::new();
                self.nz(r, d, &mut f)?;
                self.around(m, c, f, code);
                if op == Eq {
                    code.push(Instr::Xori(r, num(1)));
                }
            }
            Lt => self.lt(r, a, b, code)?,
            Gt => self.lt(r, b, a, code)?,
            Le | Ge => {
                let (x, y) = if op == Le { (b, a) } else { (a, b) };
                self.lt(r, x, y, code)?;
                code.push(Instr::Xori(r, num(1)));
            }
            And => {
                let m = self.mark();
                let (t1, t2) = (self.alloc()?, self.alloc()?);
                let mut c = Vec::new();
                self.nz(t1, a, &mut c)?;
                self.nz(t2, b, &mut c)?;
                self.around(m, c, vec![Instr::Andx(r, t1, t2)], code);
            }
            Or => {
                let m = self.mark();
                let o = self.alloc()?;
                let mut f = Vec::new();
                self.nz(r, o, &mut f)?;
                self.around(m, vec![Instr::Orx(o, a, b)], f, code);
            }
            Mul => {
                for i in 0..32 {
                    let m = self.mark();
                    let (x, mask, s, u) = (self.alloc()?, self.alloc()?, self.alloc()?, self.alloc()?);
                    let c = vec![
                        Instr::Sllx(x, b, num(31 - i)),
                        Instr::Srax(mask, x, num(31)),
                        Instr::Sllx(s, a, num(i)),
                        Instr::Andx(u, s, mask),
                    ];
                    self.around(m, c, vec![Instr::Add(r, u)], code);
                }
            }
            Div | Mod => self.divmod(op == Div, r, a, b, code)?,
        }
        Ok(())
    }

    /// Truncating division or remainder by unsigned long division of the
    /// magnitudes followed by a sign fix.
    fn divmod(&mut self, quotient: bool, r: Reg, a: Reg, b: Reg, code: &mut Vec<Instr>) -> R<()> {
        let m0 = self.mark();
        let mut c = Vec::new();
        if self.checks {
            c.push(Instr::Beq(b, Reg::ZERO, lbl(ERROR_LABEL)));
        }
        let (sa, ua, sb, ub, q, rem) =
            (self.alloc()?, self.alloc()?, self.alloc()?, self.alloc()?, self.alloc()?, self.alloc()?);
        c.extend([
            Instr::Srax(sa, a, num(31)),
            Instr::Xor(ua, a),
            Instr::Xor(ua, sa),
            Instr::Sub(ua, sa),
            Instr::Srax(sb, b, num(31)),
            Instr::Xor(ub, b),
            Instr::Xor(ub, sb),
            Instr::Sub(ub, sb),
        ]);
        for i in (0..32).rev() {
            // Shift the next dividend bit into the remainder.
            c.push(Instr::Rl(rem, num(1)));
            let m = self.mark();
            let (x, bit) = (self.alloc()?, self.alloc()?);
            let step = vec![Instr::Sllx(x, ua, num(31 - i)), Instr::Srlx(bit, x, num(31))];
            self.around(m, step, vec![Instr::Xor(rem, bit)], &mut c);

            let mc = self.mark();
            let cf = self.alloc()?;
            let m = self.mark();
            let (tr, tb) = (self.alloc()?, self.alloc()?);
            let step = vec![
                Instr::Xor(tr, rem),
                Instr::Xori(tr, num(i32::MIN)),
                Instr::Xor(tb, ub),
                Instr::Xori(tb, num(i32::MIN)),
            ];
            let mut f = Vec::new();
            self.lt(cf, tr, tb, &mut f)?;
            f.push(Instr::Xori(cf, num(1)));
            self.around(m, step, f, &mut c);

            c.push(Instr::Sllx(q, cf, num(i)));
            let m = self.mark();
            let (mask, u) = (self.alloc()?, self.alloc()?);
            let step = vec![Instr::Xor(mask, cf), Instr::Neg(mask), Instr::Andx(u, ub, mask)];
            self.around(m, step, vec![Instr::Sub(rem, u)], &mut c);

            let m = self.mark();
            let t = self.alloc()?;
            self.around(m, vec![Instr::Srlx(t, q, num(i))], vec![Instr::Andix(cf, t, num(1))], &mut c);
            self.release(mc);
        }
        let mut f = Vec::new();
        if quotient {
            let m = self.mark();
            let s = self.alloc()?;
            let sign = vec![Instr::Xor(s, sa), Instr::Xor(s, sb)];
            self.around(m, sign, vec![Instr::Xor(r, q), Instr::Xor(r, s), Instr::Sub(r, s)], &mut f);
        } else {
            f.extend([Instr::Xor(r, rem), Instr::Xor(r, sa), Instr::Sub(r, sa)]);
        }
        self.around(m0, c, f, code);
        Ok(())
    }
}
