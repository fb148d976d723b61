//! Statement, class and program inverters.
//!
//! `invert` also accepts the surface extension forms and returns them in
//! surface form, so a program can be inverted without desugaring.

use crate::frontend::{ClassDecl, Invocation, MethodDecl, Program, Stmt, StmtKind};

pub fn invert(s: &Stmt) -> Stmt {
    let kind = match &s.kind {
        StmtKind::Skip | StmtKind::Swap(..) => s.kind.clone(),
        StmtKind::Assign(x, op, e) => StmtKind::Assign(x.clone(), op.inverse(), e.clone()),
        StmtKind::If(e1, s1, s2, e2) => StmtKind::If(e2.clone(), invert_seq(s1), invert_seq(s2), e1.clone()),
        StmtKind::Loop(e1, s1, s2, e2) => StmtKind::Loop(e2.clone(), invert_seq(s1), invert_seq(s2), e1.clone()),
        StmtKind::ObjectBlock { class, var, body, ctor } => StmtKind::ObjectBlock {
            class: class.clone(),
            var: var.clone(),
            body: invert_seq(body),
            ctor: ctor.as_ref().map(|(a, z)| (z.clone(), a.clone())),
        },
        StmtKind::LocalBlock { var, init, body, exit } => StmtKind::LocalBlock {
            var: var.clone(),
            init: exit.clone(),
            body: invert_seq(body),
            exit: init.clone(),
        },
        StmtKind::Call(inv) => StmtKind::Call(Invocation { uncall: !inv.uncall, ..inv.clone() }),
        StmtKind::Reversal(inv, body) => StmtKind::Reversal(inv.clone(), Box::new(invert(body))),
    };
    Stmt::at(kind, s.pos)
}

pub fn invert_seq(ss: &[Stmt]) -> Vec<Stmt> {
    ss.iter().rev().map(invert).collect()
}

/// The modified inverter: invocations are fixed points, everything else is
/// inverted as by `invert`, with nested statements handled by this inverter.
/// Extension forms whose inverse has no surface spelling are expanded.
pub fn invert_modified_seq(ss: &[Stmt]) -> Vec<Stmt> {
    let mut out = Vec::with_capacity(ss.len());
    for s in ss.iter().rev() {
        modified(s, &mut out);
    }
    out
}

pub fn invert_modified(s: &Stmt) -> Vec<Stmt> {
    let mut out = Vec::new();
    modified(s, &mut out);
    out
}

fn modified(s: &Stmt, out: &mut Vec<Stmt>) {
    let kind = match &s.kind {
        StmtKind::Call(_) => s.kind.clone(),
        StmtKind::Skip | StmtKind::Swap(..) | StmtKind::Assign(..) => invert(s).kind,
        StmtKind::If(e1, s1, s2, e2) => {
            StmtKind::If(e2.clone(), invert_modified_seq(s1), invert_modified_seq(s2), e1.clone())
        }
        StmtKind::Loop(e1, s1, s2, e2) => {
            StmtKind::Loop(e2.clone(), invert_modified_seq(s1), invert_modified_seq(s2), e1.clone())
        }
        StmtKind::ObjectBlock { class, var, body, ctor } => {
            let mut inner = invert_modified_seq(body);
            if let Some((a, z)) = ctor {
                let ctor_call = |uncall, args: &Vec<_>| {
                    Stmt::at(
                        StmtKind::Call(Invocation {
                            uncall,
                            object: Some(var.clone()),
                            method: "constructor".into(),
                            args: args.clone(),
                        }),
                        s.pos,
                    )
                };
                inner.insert(0, ctor_call(true, z));
                inner.push(ctor_call(false, a));
            }
            let ctor = fold_constructor(var, &mut inner);
            StmtKind::ObjectBlock { class: class.clone(), var: var.clone(), body: inner, ctor }
        }
        StmtKind::LocalBlock { var, init, body, exit } => StmtKind::LocalBlock {
            var: var.clone(),
            init: exit.clone(),
            body: invert_modified_seq(body),
            exit: init.clone(),
        },
        StmtKind::Reversal(inv, body) => {
            out.push(Stmt::at(StmtKind::Call(Invocation { uncall: true, ..inv.clone() }), s.pos));
            out.extend(invert_modified(body));
            out.push(Stmt::at(StmtKind::Call(Invocation { uncall: false, ..inv.clone() }), s.pos));
            return;
        }
    };
    out.push(Stmt::at(kind, s.pos));
}

/// Turns `call x::constructor(a); ...; uncall x::constructor(z)` back into
/// the short form, so that inverting twice restores the original spelling.
fn fold_constructor(var: &str, body: &mut Vec<Stmt>) -> Option<(Vec<crate::frontend::Expr>, Vec<crate::frontend::Expr>)> {
    let ctor = |s: &Stmt, uncall: bool| match &s.kind {
        StmtKind::Call(inv) if inv.uncall == uncall && inv.object.as_deref() == Some(var) && inv.method == "constructor" => {
            Some(inv.args.clone())
        }
        _ => None,
    };
    if body.len() < 2 {
        return None;
    }
    let a = ctor(&body[0], false)?;
    let z = ctor(&body[body.len() - 1], true)?;
    body.pop();
    body.remove(0);
    Some((a, z))
}

pub fn invert_class(c: &ClassDecl) -> ClassDecl {
    ClassDecl {
        methods: c
            .methods
            .iter()
            .map(|m| MethodDecl { body: invert_modified_seq(&m.body), ..m.clone() })
            .collect(),
        ..c.clone()
    }
}

pub fn invert_program(p: &Program) -> Program {
    Program { classes: p.classes.iter().map(invert_class).collect() }
}
