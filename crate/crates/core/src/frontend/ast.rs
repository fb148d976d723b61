use std::fmt;

/// Source position. Positions never take part in structural equality, so
/// two ASTs parsed from differently formatted text compare equal.
#[derive(Clone, Copy, Debug, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl Pos {
    pub fn new(line: u32, col: u32) -> Pos {
        Pos { line, col }
    }
}

impl PartialEq for Pos {
    fn eq(&self, _: &Pos) -> bool {
        true
    }
}

impl Eq for Pos {}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeName {
    Int,
    Class(String),
}

impl fmt::Display for TypeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeName::Int => f.write_str("int"),
            TypeName::Class(c) => f.write_str(c),
        }
    }
}

/// A typed name: a field or a parameter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decl {
    pub ty: TypeName,
    pub name: String,
    pub pos: Pos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModOp {
    Add,
    Sub,
    Xor,
}

impl ModOp {
    pub fn inverse(self) -> ModOp {
        match self {
            ModOp::Add => ModOp::Sub,
            ModOp::Sub => ModOp::Add,
            ModOp::Xor => ModOp::Xor,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            ModOp::Add => "+=",
            ModOp::Sub => "-=",
            ModOp::Xor => "^=",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Xor,
    Mul,
    Div,
    Mod,
    BitAnd,
    BitOr,
    And,
    Or,
    Lt,
    Gt,
    Eq,
    Ne,
    Le,
    Ge,
}

impl BinOp {
    pub const ALL: [BinOp; 16] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Xor,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Mod,
        BinOp::BitAnd,
        BinOp::BitOr,
        BinOp::And,
        BinOp::Or,
        BinOp::Lt,
        BinOp::Gt,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Le,
        BinOp::Ge,
    ];

    pub fn symbol(self) -> &'static str {
        use BinOp::*;
        match self {
            Add => "+",
            Sub => "-",
            Xor => "^",
            Mul => "*",
            Div => "/",
            Mod => "%",
            BitAnd => "&",
            BitOr => "|",
            And => "&&",
            Or => "||",
            Lt => "<",
            Gt => ">",
            Eq => "=",
            Ne => "!=",
            Le => "<=",
            Ge => ">=",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        use BinOp::*;
        match self {
            Or => 1,
            And => 2,
            Eq | Ne | Lt | Gt | Le | Ge => 3,
            BitOr | Xor | BitAnd => 4,
            Add | Sub => 5,
            Mul | Div | Mod => 6,
        }
    }

    /// Operators whose result is always 0 or 1.
    pub fn is_boolean(self) -> bool {
        self.precedence() <= 3
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(i32),
    Var(String),
    Nil,
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Expr::Var(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub pos: Pos,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Stmt {
        Stmt { kind, pos: Pos::default() }
    }

    pub fn at(kind: StmtKind, pos: Pos) -> Stmt {
        Stmt { kind, pos }
    }
}

/// Method invocation. `object` is `None` for a local call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Invocation {
    pub uncall: bool,
    pub object: Option<String>,
    pub method: String,
    pub args: Vec<Expr>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StmtKind {
    Assign(String, ModOp, Expr),
    Swap(String, String),
    /// `if e1 then s1 else s2 fi e2`; an empty else branch is the short form.
    If(Expr, Vec<Stmt>, Vec<Stmt>, Expr),
    /// `from e1 do s1 loop s2 until e2`; either body may be empty (short form).
    Loop(Expr, Vec<Stmt>, Vec<Stmt>, Expr),
    /// `construct c x s destruct x`, optionally with constructor and
    /// deconstructor arguments.
    ObjectBlock {
        class: String,
        var: String,
        body: Vec<Stmt>,
        ctor: Option<(Vec<Expr>, Vec<Expr>)>,
    },
    LocalBlock {
        var: String,
        init: Expr,
        body: Vec<Stmt>,
        exit: Expr,
    },
    Call(Invocation),
    /// `reversal q(args) s`: call, run s, uncall.
    Reversal(Invocation, Box<Stmt>),
    Skip,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MethodDecl {
    pub name: String,
    pub params: Vec<Decl>,
    pub body: Vec<Stmt>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassDecl {
    pub name: String,
    pub base: Option<String>,
    pub fields: Vec<Decl>,
    pub methods: Vec<MethodDecl>,
    pub pos: Pos,
}

impl ClassDecl {
    pub fn method(&self, name: &str) -> Option<&MethodDecl> {
        self.methods.iter().find(|m| m.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub classes: Vec<ClassDecl>,
}

impl Program {
    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.classes.iter().find(|c| c.name == name)
    }
}

/// Number of statement and expression nodes.
pub fn stmt_size(s: &Stmt) -> usize {
    fn seq(ss: &[Stmt]) -> usize {
        ss.iter().map(stmt_size).sum()
    }
    fn args(a: &[Expr]) -> usize {
        a.iter().map(expr_size).sum()
    }
    1 + match &s.kind {
        StmtKind::Assign(_, _, e) => expr_size(e),
        StmtKind::Swap(..) | StmtKind::Skip => 0,
        StmtKind::If(a, s1, s2, b) | StmtKind::Loop(a, s1, s2, b) => {
            expr_size(a) + seq(s1) + seq(s2) + expr_size(b)
        }
        StmtKind::ObjectBlock { body, ctor, .. } => {
            seq(body) + ctor.as_ref().map_or(0, |(a, z)| args(a) + args(z))
        }
        StmtKind::LocalBlock { init, body, exit, .. } => expr_size(init) + seq(body) + expr_size(exit),
        StmtKind::Call(inv) => args(&inv.args),
        StmtKind::Reversal(inv, s) => args(&inv.args) + stmt_size(s),
    }
}

pub fn expr_size(e: &Expr) -> usize {
    match e {
        Expr::Binary(_, l, r) => 1 + expr_size(l) + expr_size(r),
        _ => 1,
    }
}

/// Every identifier appearing in the program: classes, fields, methods,
/// parameters and variables.
pub fn identifiers(p: &Program) -> std::collections::BTreeSet<String> {
    fn expr(e: &Expr, out: &mut std::collections::BTreeSet<String>) {
        match e {
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Binary(_, l, r) => {
                expr(l, out);
                expr(r, out);
            }
            _ => {}
        }
    }
    fn stmts(ss: &[Stmt], out: &mut std::collections::BTreeSet<String>) {
        for s in ss {
            match &s.kind {
                StmtKind::Assign(x, _, e) => {
                    out.insert(x.clone());
                    expr(e, out);
                }
                StmtKind::Swap(a, b) => {
                    out.insert(a.clone());
                    out.insert(b.clone());
                }
                StmtKind::If(a, s1, s2, b) | StmtKind::Loop(a, s1, s2, b) => {
                    expr(a, out);
                    expr(b, out);
                    stmts(s1, out);
                    stmts(s2, out);
                }
                StmtKind::ObjectBlock { class, var, body, ctor } => {
                    out.insert(class.clone());
                    out.insert(var.clone());
                    if let Some((a, z)) = ctor {
                        a.iter().chain(z).for_each(|e| expr(e, out));
                    }
                    stmts(body, out);
                }
                StmtKind::LocalBlock { var, init, body, exit } => {
                    out.insert(var.clone());
                    expr(init, out);
                    expr(exit, out);
                    stmts(body, out);
                }
                StmtKind::Call(inv) | StmtKind::Reversal(inv, _) => {
                    out.extend(inv.object.iter().cloned());
                    out.insert(inv.method.clone());
                    inv.args.iter().for_each(|e| expr(e, out));
                    if let StmtKind::Reversal(_, s) = &s.kind {
                        stmts(std::slice::from_ref(s), out);
                    }
                }
                StmtKind::Skip => {}
            }
        }
    }
    let mut out = std::collections::BTreeSet::new();
    for c in &p.classes {
        out.insert(c.name.clone());
        out.extend(c.base.iter().cloned());
        for f in &c.fields {
            out.insert(f.name.clone());
        }
        for m in &c.methods {
            out.insert(m.name.clone());
            out.extend(m.params.iter().map(|d| d.name.clone()));
            stmts(&m.body, &mut out);
        }
    }
    out
}
