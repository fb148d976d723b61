//! Rewrites the extension forms into the core language. Local blocks stay.

use super::ast::*;

pub const TMP_PREFIX: &str = "$tmp";

struct Fresh(usize);

impl Fresh {
    fn next(&mut self) -> String {
        let n = self.0;
        self.0 += 1;
        format!("{TMP_PREFIX}{n}")
    }
}

pub fn desugar(p: &Program) -> Program {
    let mut fresh = Fresh(0);
    Program {
        classes: p
            .classes
            .iter()
            .map(|c| ClassDecl {
                methods: c
                    .methods
                    .iter()
                    .map(|m| MethodDecl { body: seq(&m.body, &mut fresh), ..m.clone() })
                    .collect(),
                ..c.clone()
            })
            .collect(),
    }
}

/// Desugars a statement sequence on its own. Temporaries are numbered from 0.
pub fn desugar_statements(ss: &[Stmt]) -> Vec<Stmt> {
    seq(ss, &mut Fresh(0))
}

fn skip_if_empty(v: Vec<Stmt>, pos: Pos) -> Vec<Stmt> {
    if v.is_empty() {
        vec![Stmt::at(StmtKind::Skip, pos)]
    } else {
        v
    }
}

fn seq(ss: &[Stmt], fresh: &mut Fresh) -> Vec<Stmt> {
    let mut out = Vec::with_capacity(ss.len());
    for s in ss {
        stmt(s, fresh, &mut out);
    }
    out
}

fn stmt(s: &Stmt, fresh: &mut Fresh, out: &mut Vec<Stmt>) {
    let pos = s.pos;
    let kind = match &s.kind {
        StmtKind::Assign(..) | StmtKind::Swap(..) | StmtKind::Skip => s.kind.clone(),
        StmtKind::If(e1, s1, s2, e2) => StmtKind::If(
            e1.clone(),
            skip_if_empty(seq(s1, fresh), pos),
            skip_if_empty(seq(s2, fresh), pos),
            e2.clone(),
        ),
        StmtKind::Loop(e1, s1, s2, e2) => StmtKind::Loop(
            e1.clone(),
            skip_if_empty(seq(s1, fresh), pos),
            skip_if_empty(seq(s2, fresh), pos),
            e2.clone(),
        ),
        StmtKind::ObjectBlock { class, var, body, ctor } => {
            let mut inner = Vec::new();
            if let Some((a, _)) = ctor {
                call(constructor_call(var, false, a), pos, fresh, &mut inner);
            }
            inner.extend(seq(body, fresh));
            if let Some((_, z)) = ctor {
                call(constructor_call(var, true, z), pos, fresh, &mut inner);
            }
            StmtKind::ObjectBlock { class: class.clone(), var: var.clone(), body: inner, ctor: None }
        }
        StmtKind::LocalBlock { var, init, body, exit } => StmtKind::LocalBlock {
            var: var.clone(),
            init: init.clone(),
            body: seq(body, fresh),
            exit: exit.clone(),
        },
        StmtKind::Call(inv) => return call(inv.clone(), pos, fresh, out),
        StmtKind::Reversal(inv, body) => {
            call(Invocation { uncall: false, ..inv.clone() }, pos, fresh, out);
            stmt(body, fresh, out);
            call(Invocation { uncall: true, ..inv.clone() }, pos, fresh, out);
            return;
        }
    };
    out.push(Stmt::at(kind, pos));
}

fn constructor_call(var: &str, uncall: bool, args: &[Expr]) -> Invocation {
    Invocation { uncall, object: Some(var.to_string()), method: "constructor".into(), args: args.to_vec() }
}

/// Wraps non-variable arguments in local blocks, first argument outermost.
fn call(mut inv: Invocation, pos: Pos, fresh: &mut Fresh, out: &mut Vec<Stmt>) {
    let mut temps = Vec::new();
    for a in inv.args.iter_mut() {
        if a.as_var().is_none() {
            let t = fresh.next();
            temps.push((t.clone(), std::mem::replace(a, Expr::Var(t))));
        }
    }
    let mut s = Stmt::at(StmtKind::Call(inv), pos);
    for (t, e) in temps.into_iter().rev() {
        s = Stmt::at(StmtKind::LocalBlock { var: t, init: e.clone(), body: vec![s], exit: e }, pos);
    }
    out.push(s);
}

/// True when a program contains no extension forms besides local blocks.
pub fn is_core(p: &Program) -> bool {
    fn ok(ss: &[Stmt]) -> bool {
        !ss.is_empty()
            && ss.iter().all(|s| match &s.kind {
                StmtKind::If(_, a, b, _) | StmtKind::Loop(_, a, b, _) => ok(a) && ok(b),
                StmtKind::ObjectBlock { body, ctor, .. } => ctor.is_none() && ok(body),
                StmtKind::LocalBlock { body, .. } => ok(body),
                StmtKind::Call(inv) => inv.args.iter().all(|a| a.as_var().is_some()),
                StmtKind::Reversal(..) => false,
                _ => true,
            })
    }
    p.classes.iter().all(|c| c.methods.iter().all(|m| ok(&m.body)))
}
