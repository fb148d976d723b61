//! Typing judgments for expressions, statements and programs.

use std::collections::BTreeSet;
use std::fmt;

use crate::classes::ClassModel;
use crate::frontend::{BinOp, Expr, Invocation, Pos, Stmt, StmtKind, TypeName};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Int,
    Class(String),
    /// The type of `nil`: below every class type, incompatible with int.
    Nil,
}

impl Type {
    pub fn of(t: &TypeName) -> Type {
        match t {
            TypeName::Int => Type::Int,
            TypeName::Class(c) => Type::Class(c.clone()),
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => f.write_str("int"),
            Type::Class(c) => f.write_str(c),
            Type::Nil => f.write_str("nil"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub rule: &'static str,
    pub message: String,
    pub pos: Pos,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} [{}]", self.pos, self.message, self.rule)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Binding {
    name: String,
    ty: Type,
    field: bool,
}

/// Π, with shadowing: later bindings hide earlier ones.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypeEnv {
    bindings: Vec<Binding>,
}

impl TypeEnv {
    pub fn new() -> TypeEnv {
        TypeEnv::default()
    }

    pub fn with(&self, name: &str, ty: Type) -> TypeEnv {
        let mut env = self.clone();
        env.bindings.push(Binding { name: name.to_string(), ty, field: false });
        env
    }

    pub fn with_field(&self, name: &str, ty: Type) -> TypeEnv {
        let mut env = self.clone();
        env.bindings.push(Binding { name: name.to_string(), ty, field: true });
        env
    }

    fn binding(&self, name: &str) -> Option<&Binding> {
        self.bindings.iter().rev().find(|b| b.name == name)
    }

    pub fn lookup(&self, name: &str) -> Option<&Type> {
        self.binding(name).map(|b| &b.ty)
    }

    /// True when the visible binding of `name` is an instance field.
    pub fn is_field(&self, name: &str) -> bool {
        self.binding(name).is_some_and(|b| b.field)
    }

    /// Visible names and their types.
    pub fn visible(&self) -> Vec<(String, Type)> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for b in self.bindings.iter().rev() {
            if seen.insert(b.name.clone()) {
                out.push((b.name.clone(), b.ty.clone()));
            }
        }
        out.reverse();
        out
    }
}

pub fn vars(e: &Expr) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    fn go(e: &Expr, out: &mut BTreeSet<String>) {
        match e {
            Expr::Var(x) => {
                out.insert(x.clone());
            }
            Expr::Binary(_, l, r) => {
                go(l, out);
                go(r, out);
            }
            Expr::Const(_) | Expr::Nil => {}
        }
    }
    go(e, &mut out);
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprError {
    UnboundVariable(String),
    TypeMismatch { op: BinOp, left: Type, right: Type },
    NilInArithmetic(BinOp),
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprError::UnboundVariable(x) => write!(f, "unbound variable `{x}`"),
            ExprError::TypeMismatch { op, left, right } => {
                write!(f, "operator `{}` cannot combine {left} and {right}", op.symbol())
            }
            ExprError::NilInArithmetic(op) => write!(f, "`nil` used as an int operand of `{}`", op.symbol()),
        }
    }
}

impl ExprError {
    fn rule(&self) -> &'static str {
        match self {
            ExprError::UnboundVariable(_) => "T-Var",
            ExprError::TypeMismatch { op: BinOp::Eq | BinOp::Ne, .. } => "T-BinOpObj",
            _ => "T-BinOpInt",
        }
    }
}

pub fn type_of_expression(env: &TypeEnv, e: &Expr) -> Result<Type, ExprError> {
    match e {
        Expr::Const(_) => Ok(Type::Int),
        Expr::Nil => Ok(Type::Nil),
        Expr::Var(x) => env.lookup(x).cloned().ok_or_else(|| ExprError::UnboundVariable(x.clone())),
        Expr::Binary(op, l, r) => {
            let (lt, rt) = (type_of_expression(env, l)?, type_of_expression(env, r)?);
            match (&lt, &rt) {
                (Type::Int, Type::Int) => Ok(Type::Int),
                (Type::Nil, Type::Int) | (Type::Int, Type::Nil) => Err(ExprError::NilInArithmetic(*op)),
                _ if !matches!(op, BinOp::Eq | BinOp::Ne) => match (&lt, &rt) {
                    (Type::Nil, _) | (_, Type::Nil) => Err(ExprError::NilInArithmetic(*op)),
                    _ => Err(ExprError::TypeMismatch { op: *op, left: lt, right: rt }),
                },
                (Type::Class(a), Type::Class(b)) if a == b => Ok(Type::Int),
                (Type::Class(_), Type::Nil) | (Type::Nil, Type::Class(_)) | (Type::Nil, Type::Nil) => Ok(Type::Int),
                _ => Err(ExprError::TypeMismatch { op: *op, left: lt, right: rt }),
            }
        }
    }
}

struct Checker<'a> {
    model: &'a ClassModel,
    class: &'a str,
    out: Vec<Diagnostic>,
}

impl<'a> Checker<'a> {
    fn report(&mut self, rule: &'static str, pos: Pos, message: String) {
        self.out.push(Diagnostic { rule, message, pos });
    }

    fn int_expr(&mut self, env: &TypeEnv, e: &Expr, rule: &'static str, what: &str, pos: Pos) {
        match type_of_expression(env, e) {
            Ok(Type::Int) => {}
            Ok(t) => self.report(rule, pos, format!("{what} has type {t}, expected int")),
            Err(err) => self.report(err.rule(), pos, err.to_string()),
        }
    }

    fn subtype(&self, a: &Type, b: &Type) -> bool {
        match (a, b) {
            (Type::Int, Type::Int) | (Type::Nil, Type::Class(_)) => true,
            (Type::Class(x), Type::Class(y)) => self.model.subtype(x, y),
            _ => false,
        }
    }

    fn seq(&mut self, env: &TypeEnv, ss: &[Stmt]) {
        for s in ss {
            self.stmt(env, s);
        }
    }

    fn stmt(&mut self, env: &TypeEnv, s: &Stmt) {
        let pos = s.pos;
        match &s.kind {
            StmtKind::Skip => {}
            StmtKind::Assign(x, _, e) => {
                match env.lookup(x) {
                    None => self.report("T-AssVar", pos, format!("unbound variable `{x}`")),
                    Some(Type::Int) => {}
                    Some(t) => self.report("T-AssVar", pos, format!("`{x}` has type {t}, expected int")),
                }
                self.int_expr(env, e, "T-AssVar", "right-hand side", pos);
                if vars(e).contains(x) {
                    self.report("T-AssVar", pos, format!("`{x}` occurs in its own update expression"));
                }
            }
            StmtKind::Swap(a, b) => match (env.lookup(a), env.lookup(b)) {
                (Some(ta), Some(tb)) if ta == tb => {}
                (Some(ta), Some(tb)) => {
                    self.report("T-SwpVar", pos, format!("cannot swap `{a}` of type {ta} with `{b}` of type {tb}"))
                }
                (None, _) => self.report("T-SwpVar", pos, format!("unbound variable `{a}`")),
                (_, None) => self.report("T-SwpVar", pos, format!("unbound variable `{b}`")),
            },
            StmtKind::If(e1, s1, s2, e2) => {
                self.int_expr(env, e1, "T-If", "entry condition", pos);
                self.seq(env, s1);
                self.seq(env, s2);
                self.int_expr(env, e2, "T-If", "exit assertion", pos);
            }
            StmtKind::Loop(e1, s1, s2, e2) => {
                self.int_expr(env, e1, "T-Loop", "entry assertion", pos);
                self.seq(env, s1);
                self.seq(env, s2);
                self.int_expr(env, e2, "T-Loop", "exit condition", pos);
            }
            StmtKind::ObjectBlock { class, var, body, ctor } => {
                if self.model.class(class).is_none() {
                    self.report("T-ObjBlock", pos, format!("unknown class `{class}`"));
                }
                if ctor.is_some() {
                    self.report("T-ObjBlock", pos, "constructor arguments must be desugared first".into());
                }
                self.seq(&env.with(var, Type::Class(class.clone())), body);
            }
            StmtKind::LocalBlock { var, init, body, exit } => {
                self.int_expr(env, init, "T-LocalBlock", "initializer", pos);
                self.seq(&env.with(var, Type::Int), body);
                self.int_expr(env, exit, "T-LocalBlock", "delocal expression", pos);
            }
            StmtKind::Call(inv) => self.call(env, inv, pos),
            StmtKind::Reversal(..) => {
                self.report("T-Call", pos, "method reversal must be desugared first".into());
            }
        }
    }

    fn call(&mut self, env: &TypeEnv, inv: &Invocation, pos: Pos) {
        let rule = match (&inv.object, inv.uncall) {
            (None, false) => "T-Call",
            (None, true) => "T-UC",
            (Some(_), false) => "T-CallO",
            (Some(_), true) => "T-UCO",
        };
        let mut names = Vec::new();
        for a in &inv.args {
            match a.as_var() {
                Some(x) => names.push(x),
                None => {
                    self.report(rule, pos, "method arguments must be variables".into());
                    return;
                }
            }
        }
        let target = match &inv.object {
            None => self.class.to_string(),
            Some(x0) => match env.lookup(x0) {
                Some(Type::Class(c)) => {
                    if names.contains(&x0.as_str()) {
                        self.report(rule, pos, format!("`{x0}` is passed as an argument to its own method"));
                    }
                    c.clone()
                }
                Some(t) => {
                    self.report(rule, pos, format!("`{x0}` has type {t}, not a class"));
                    return;
                }
                None => {
                    self.report(rule, pos, format!("unbound variable `{x0}`"));
                    return;
                }
            },
        };
        let Some((_, decl)) = self.model.method(&target, &inv.method) else {
            self.report(rule, pos, format!("class `{target}` has no method `{}`", inv.method));
            return;
        };
        if decl.params.len() != names.len() {
            self.report(
                rule,
                pos,
                format!("`{}` takes {} argument(s), {} given", inv.method, decl.params.len(), names.len()),
            );
        }
        for (i, x) in names.iter().enumerate() {
            if names[..i].contains(x) {
                self.report(rule, pos, format!("`{x}` is passed more than once"));
            }
            if inv.object.is_none() && env.is_field(x) {
                self.report(rule, pos, format!("field `{x}` cannot be passed to a local method"));
            }
            let Some(t) = env.lookup(x) else {
                self.report(rule, pos, format!("unbound variable `{x}`"));
                continue;
            };
            if let Some(p) = decl.params.get(i) {
                let want = Type::of(&p.ty);
                if !self.subtype(t, &want) {
                    self.report(rule, pos, format!("argument `{x}` has type {t}, parameter `{}` expects {want}", p.name));
                }
            }
        }
    }
}

pub fn check_statement(model: &ClassModel, env: &TypeEnv, class: &str, s: &Stmt) -> Vec<Diagnostic> {
    let mut c = Checker { model, class, out: Vec::new() };
    c.stmt(env, s);
    c.out
}

pub fn check_statements(model: &ClassModel, env: &TypeEnv, class: &str, ss: &[Stmt]) -> Vec<Diagnostic> {
    let mut c = Checker { model, class, out: Vec::new() };
    c.seq(env, ss);
    c.out
}

/// Π for the body of a method of `class`: its resolved fields, then the parameters.
pub fn method_env(model: &ClassModel, class: &str, params: &[crate::frontend::Decl]) -> TypeEnv {
    let mut env = TypeEnv::new();
    if let Some(info) = model.class(class) {
        for f in &info.fields {
            env = env.with_field(&f.name, Type::of(&f.ty));
        }
    }
    for p in params {
        env = env.with(&p.name, Type::of(&p.ty));
    }
    env
}

/// Checks every method in the class that declares it.
pub fn check_program(model: &ClassModel) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if let Err(e) = model.find_main() {
        out.push(Diagnostic { rule: "T-Prog", message: e.kind.to_string(), pos: e.pos });
    }
    for c in &model.program().classes {
        for m in &c.methods {
            let env = method_env(model, &c.name, &m.params);
            out.extend(check_statements(model, &env, &c.name, &m.body));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::build_class_model;
    use crate::frontend::{desugar, parse_source, parse_stmts_source};

    fn model(src: &str) -> ClassModel {
        build_class_model(&desugar(&parse_source(src).unwrap())).unwrap()
    }

    const BASE: &str = "
        class Shape int x method m(Shape s) skip
        class Circle inherits Shape int r method n() skip
        class Node int v method get(int out) skip
        class P int a Shape sh Circle ci int b
            method main() skip
            method bar(int p, int q) skip
            method take(Shape s) skip
    ";

    fn check(src: &str) -> Vec<Diagnostic> {
        let m = model(BASE);
        let env = method_env(&m, "P", &[]).with("u", Type::Int).with("w", Type::Int).with("c2", Type::Class("Circle".into()));
        check_statements(&m, &env, "P", &desugar::desugar_statements(&parse_stmts_source(src).unwrap()))
    }

    #[test]
    fn vars_of_expressions() {
        assert!(vars(&Expr::Const(5)).is_empty());
        assert!(vars(&Expr::Nil).is_empty());
        let e = crate::frontend::parse_expression(&crate::frontend::tokenize("x + (y * x)").unwrap()).unwrap();
        assert_eq!(vars(&e), ["x".to_string(), "y".to_string()].into());
    }

    #[test]
    fn expression_types() {
        let env = TypeEnv::new().with("x", Type::Int).with("a", Type::Class("Node".into())).with("b", Type::Class("Shape".into()));
        let t = |s: &str| type_of_expression(&env, &crate::frontend::parse_expression(&crate::frontend::tokenize(s).unwrap()).unwrap());
        assert_eq!(t("x + 1"), Ok(Type::Int));
        assert_eq!(t("a != nil"), Ok(Type::Int));
        assert!(matches!(t("a = b"), Err(ExprError::TypeMismatch { .. })));
        assert!(matches!(t("a + 1"), Err(ExprError::TypeMismatch { .. })));
        assert!(matches!(t("nil + 1"), Err(ExprError::NilInArithmetic(_))));
        assert!(matches!(t("z"), Err(ExprError::UnboundVariable(_))));
    }

    #[test]
    fn self_update_rejected() {
        let d = check("u += u");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].rule, "T-AssVar");
    }

    #[test]
    fn call_restrictions() {
        assert_eq!(check("call bar(u, u)")[0].rule, "T-Call");
        assert_eq!(check("call bar(a, u)")[0].rule, "T-Call");
        assert!(check("call bar(u, w)").is_empty());
        assert!(check("call take(c2)").is_empty());
        assert!(check("call ci::m(sh)").is_empty());
        assert_eq!(check("call ci::m(ci)")[0].rule, "T-CallO");
        assert_eq!(check("uncall sh::n()")[0].rule, "T-UCO");
        assert!(!check("call bar(u)").is_empty());
        assert!(!check("call sh::m(u)").is_empty());
    }

    #[test]
    fn shadowed_field_may_be_passed() {
        assert!(check("local int a = 0 call bar(a, u) delocal a = 0").is_empty());
    }

    #[test]
    fn swaps_need_equal_types() {
        assert!(check("sh <=> ci")[0].rule == "T-SwpVar");
        assert!(check("ci <=> c2").is_empty());
        assert!(check("a <=> b").is_empty());
    }

    #[test]
    fn blocks_bind_their_variable() {
        assert!(check("construct Node n call n::get(u) destruct n").is_empty());
        assert!(!check("construct Nope n skip destruct n").is_empty());
        assert!(check("local int t = u + 1 w += t delocal t = u + 1").is_empty());
        assert!(!check("if sh then skip fi u").is_empty());
    }

    #[test]
    fn programs() {
        let m = model("class P int x method main() x += 1");
        assert!(check_program(&m).is_empty());
        let m = model("class P int x method go() x += 1");
        assert_eq!(check_program(&m)[0].rule, "T-Prog");
    }
}
