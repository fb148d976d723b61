use std::fmt::Write as _;

use super::ast::*;

const INDENT: &str = "    ";

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for (k, c) in p.classes.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        print_class(c, &mut out);
    }
    out
}

fn print_class(c: &ClassDecl, out: &mut String) {
    match &c.base {
        Some(b) => writeln!(out, "class {} inherits {b}", c.name),
        None => writeln!(out, "class {}", c.name),
    }
    .unwrap();
    for f in &c.fields {
        writeln!(out, "{INDENT}{} {}", f.ty, f.name).unwrap();
    }
    for m in &c.methods {
        out.push('\n');
        let params: Vec<String> = m.params.iter().map(|d| format!("{} {}", d.ty, d.name)).collect();
        writeln!(out, "{INDENT}method {}({})", m.name, params.join(", ")).unwrap();
        print_seq(&m.body, 2, out);
    }
}

pub fn print_statements(ss: &[Stmt]) -> String {
    let mut out = String::new();
    print_seq(ss, 0, &mut out);
    out
}

fn print_seq(ss: &[Stmt], depth: usize, out: &mut String) {
    for s in ss {
        print_stmt(s, depth, out);
    }
}

fn line(depth: usize, text: &str, out: &mut String) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
    out.push_str(text);
    out.push('\n');
}

fn args(a: &[Expr]) -> String {
    a.iter().map(print_expr).collect::<Vec<_>>().join(", ")
}

fn invocation(inv: &Invocation) -> String {
    let target = match &inv.object {
        Some(o) => format!("{o}::{}", inv.method),
        None => inv.method.clone(),
    };
    format!("{}({})", target, args(&inv.args))
}

fn print_stmt(s: &Stmt, d: usize, out: &mut String) {
    match &s.kind {
        StmtKind::Assign(x, op, e) => line(d, &format!("{x} {} {}", op.symbol(), print_expr(e)), out),
        StmtKind::Swap(a, b) => line(d, &format!("{a} <=> {b}"), out),
        StmtKind::Skip => line(d, "skip", out),
        StmtKind::If(e1, s1, s2, e2) => {
            line(d, &format!("if {} then", print_expr(e1)), out);
            print_seq(s1, d + 1, out);
            if !s2.is_empty() {
                line(d, "else", out);
                print_seq(s2, d + 1, out);
            }
            line(d, &format!("fi {}", print_expr(e2)), out);
        }
        StmtKind::Loop(e1, s1, s2, e2) => {
            if s1.is_empty() {
                line(d, &format!("from {}", print_expr(e1)), out);
            } else {
                line(d, &format!("from {} do", print_expr(e1)), out);
                print_seq(s1, d + 1, out);
            }
            if !s2.is_empty() {
                line(d, "loop", out);
                print_seq(s2, d + 1, out);
            }
            line(d, &format!("until {}", print_expr(e2)), out);
        }
        StmtKind::ObjectBlock { class, var, body, ctor } => {
            match ctor {
                Some((a, _)) => line(d, &format!("construct {class} {var}({})", args(a)), out),
                None => line(d, &format!("construct {class} {var}"), out),
            }
            print_seq(body, d + 1, out);
            match ctor {
                Some((_, z)) => line(d, &format!("destruct {var}({})", args(z)), out),
                None => line(d, &format!("destruct {var}"), out),
            }
        }
        StmtKind::LocalBlock { var, init, body, exit } => {
            line(d, &format!("local int {var} = {}", print_expr(init)), out);
            print_seq(body, d, out);
            line(d, &format!("delocal int {var} = {}", print_expr(exit)), out);
        }
        StmtKind::Call(inv) => {
            let kw = if inv.uncall { "uncall" } else { "call" };
            line(d, &format!("{kw} {}", invocation(inv)), out);
        }
        StmtKind::Reversal(inv, body) => {
            line(d, &format!("reversal {}", invocation(inv)), out);
            print_stmt(body, d + 1, out);
        }
    }
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    expr(e, &mut s);
    s
}

fn expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Const(n) => write!(out, "{}", *n as u32).unwrap(),
        Expr::Var(v) => out.push_str(v),
        Expr::Nil => out.push_str("nil"),
        Expr::Binary(op, l, r) => {
            operand(l, op.precedence(), out);
            write!(out, " {} ", op.symbol()).unwrap();
            operand(r, op.precedence() + 1, out);
        }
    }
}

fn operand(e: &Expr, min: u8, out: &mut String) {
    match e {
        Expr::Binary(op, ..) if op.precedence() < min => {
            out.push('(');
            expr(e, out);
            out.push(')');
        }
        _ => expr(e, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{lexer::tokenize, parser::parse_expression};

    #[test]
    fn minimal_parens() {
        for src in ["a - (b - c)", "(a || b) && c", "a * (b + c)", "a + b * c", "0 - x", "a = (b < c)"] {
            let e = parse_expression(&tokenize(src).unwrap()).unwrap();
            assert_eq!(print_expr(&e), src);
        }
    }

    #[test]
    fn negative_constants_print_unsigned() {
        assert_eq!(print_expr(&Expr::Const(-1)), "4294967295");
    }
}
