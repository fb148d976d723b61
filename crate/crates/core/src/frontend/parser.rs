use std::collections::BTreeSet;

use thiserror::Error;

use super::ast::*;
use super::lexer::{Token, TokenKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{pos}: expected {}, found {found}", expected_list(.expected))]
pub struct ParseError {
    pub pos: Pos,
    pub expected: BTreeSet<String>,
    pub found: String,
}

fn expected_list(e: &BTreeSet<String>) -> String {
    let v: Vec<&str> = e.iter().map(String::as_str).collect();
    match v.len() {
        0 => "nothing".into(),
        1 => v[0].into(),
        n => format!("{} or {}", v[..n - 1].join(", "), v[n - 1]),
    }
}

struct Parser<'a> {
    toks: &'a [Token],
    at: usize,
    eof: Pos,
}

type PResult<T> = Result<T, ParseError>;

const STMT_START: &[&str] = &["if", "from", "construct", "local", "call", "uncall", "skip", "reversal"];

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.at)
    }

    fn peek_is(&self, lexeme: &str) -> bool {
        self.peek().is_some_and(|t| t.is(lexeme))
    }

    fn pos(&self) -> Pos {
        self.peek().map_or(self.eof, Token::pos)
    }

    fn fail<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(ParseError {
            pos: self.pos(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().map_or("end of input".to_string(), |t| t.to_string()),
        })
    }

    fn bump(&mut self) -> &'a Token {
        let t = &self.toks[self.at];
        self.at += 1;
        t
    }

    fn eat(&mut self, lexeme: &str) -> bool {
        if self.peek_is(lexeme) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, lexeme: &str) -> PResult<Pos> {
        let p = self.pos();
        if self.eat(lexeme) {
            Ok(p)
        } else {
            self.fail(&[&format!("`{lexeme}`")])
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Ident => {
                self.at += 1;
                Ok(t.lexeme.clone())
            }
            _ => self.fail(&["identifier"]),
        }
    }

    fn ty(&mut self) -> PResult<TypeName> {
        if self.eat("int") {
            Ok(TypeName::Int)
        } else {
            match self.ident() {
                Ok(c) => Ok(TypeName::Class(c)),
                Err(_) => self.fail(&["`int`", "class name"]),
            }
        }
    }

    fn program(&mut self) -> PResult<Program> {
        let mut classes = vec![self.class()?];
        while self.peek().is_some() {
            classes.push(self.class()?);
        }
        Ok(Program { classes })
    }

    fn class(&mut self) -> PResult<ClassDecl> {
        let pos = self.expect("class")?;
        let name = self.ident()?;
        let base = if self.eat("inherits") { Some(self.ident()?) } else { None };
        let mut fields = Vec::new();
        while !self.peek_is("method") {
            if self.peek().is_none() || self.peek_is("class") {
                return self.fail(&["field declaration", "`method`"]);
            }
            let pos = self.pos();
            let ty = self.ty()?;
            let name = self.ident()?;
            fields.push(Decl { ty, name, pos });
        }
        let mut methods = Vec::new();
        while self.peek_is("method") {
            methods.push(self.method()?);
        }
        if self.peek().is_some() && !self.peek_is("class") {
            return self.fail(&["`method`", "`class`", "end of input"]);
        }
        Ok(ClassDecl { name, base, fields, methods, pos })
    }

    fn method(&mut self) -> PResult<MethodDecl> {
        let pos = self.expect("method")?;
        let name = self.ident()?;
        self.expect("(")?;
        let mut params = Vec::new();
        if !self.peek_is(")") {
            loop {
                let pos = self.pos();
                let ty = self.ty()?;
                let name = self.ident()?;
                params.push(Decl { ty, name, pos });
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(")")?;
        let body = self.block()?;
        Ok(MethodDecl { name, params, body, pos })
    }

    fn starts_stmt(&self) -> bool {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Ident => true,
            Some(t) if t.kind == TokenKind::Keyword => STMT_START.contains(&t.lexeme.as_str()),
            _ => false,
        }
    }

    /// A non-empty statement sequence.
    fn block(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = vec![self.stmt()?];
        while self.starts_stmt() {
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    /// A possibly empty sequence, used only by the short forms.
    fn opt_block(&mut self) -> PResult<Vec<Stmt>> {
        if self.starts_stmt() {
            self.block()
        } else {
            Ok(Vec::new())
        }
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect("(")?;
        let mut out = Vec::new();
        if !self.peek_is(")") {
            loop {
                out.push(self.expr()?);
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(")")?;
        Ok(out)
    }

    fn invocation(&mut self, uncall: bool) -> PResult<Invocation> {
        let first = self.ident()?;
        let (object, method) = if self.eat("::") { (Some(first), self.ident()?) } else { (None, first) };
        let args = self.args()?;
        Ok(Invocation { uncall, object, method, args })
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        let Some(t) = self.peek() else {
            return self.fail(&["statement"]);
        };
        let kind = if t.kind == TokenKind::Ident {
            let x = self.ident()?;
            let op = match self.peek() {
                Some(t) if t.is("+=") => Some(ModOp::Add),
                Some(t) if t.is("-=") => Some(ModOp::Sub),
                Some(t) if t.is("^=") => Some(ModOp::Xor),
                Some(t) if t.is("<=>") => None,
                _ => return self.fail(&["`+=`", "`-=`", "`^=`", "`<=>`"]),
            };
            self.bump();
            match op {
                Some(op) => StmtKind::Assign(x, op, self.expr()?),
                None => StmtKind::Swap(x, self.ident()?),
            }
        } else {
            match t.lexeme.as_str() {
                "skip" if t.kind == TokenKind::Keyword => {
                    self.bump();
                    StmtKind::Skip
                }
                "if" if t.kind == TokenKind::Keyword => {
                    self.bump();
                    let e1 = self.expr()?;
                    self.expect("then")?;
                    let s1 = self.block()?;
                    let s2 = if self.eat("else") { self.block()? } else { Vec::new() };
                    self.expect("fi")?;
                    StmtKind::If(e1, s1, s2, self.expr()?)
                }
                "from" if t.kind == TokenKind::Keyword => {
                    self.bump();
                    let e1 = self.expr()?;
                    let s1 = if self.eat("do") { self.opt_block()? } else { Vec::new() };
                    let s2 = if self.eat("loop") { self.opt_block()? } else { Vec::new() };
                    self.expect("until")?;
                    StmtKind::Loop(e1, s1, s2, self.expr()?)
                }
                "construct" if t.kind == TokenKind::Keyword => {
                    self.bump();
                    let class = self.ident()?;
                    let var = self.ident()?;
                    let ctor_args = if self.peek_is("(") { Some(self.args()?) } else { None };
                    let body = self.block()?;
                    self.expect("destruct")?;
                    let closing = self.pos();
                    if self.ident()? != var {
                        return Err(ParseError {
                            pos: closing,
                            expected: [format!("`{var}`")].into(),
                            found: self.toks[self.at - 1].to_string(),
                        });
                    }
                    let ctor = match ctor_args {
                        Some(a) => Some((a, self.args()?)),
                        None => None,
                    };
                    StmtKind::ObjectBlock { class, var, body, ctor }
                }
                "local" if t.kind == TokenKind::Keyword => {
                    self.bump();
                    return self.local(pos);
                }
                "call" | "uncall" if t.kind == TokenKind::Keyword => {
                    let uncall = self.bump().lexeme == "uncall";
                    StmtKind::Call(self.invocation(uncall)?)
                }
                "reversal" if t.kind == TokenKind::Keyword => {
                    self.bump();
                    let inv = self.invocation(false)?;
                    StmtKind::Reversal(inv, Box::new(self.stmt()?))
                }
                _ => return self.fail(&["statement"]),
            }
        };
        Ok(Stmt::at(kind, pos))
    }

    fn declarator(&mut self) -> PResult<(String, Expr, Pos)> {
        let pos = self.pos();
        self.eat("int");
        let x = self.ident()?;
        self.expect("=")?;
        Ok((x, self.expr()?, pos))
    }

    /// `local int a = e, b = e  s  delocal a = e, b = e` nests one block
    /// per declarator, the first outermost.
    fn local(&mut self, pos: Pos) -> PResult<Stmt> {
        if !self.peek_is("int") {
            return self.fail(&["`int`"]);
        }
        let mut decls = vec![self.declarator()?];
        while self.eat(",") {
            decls.push(self.declarator()?);
        }
        let body = self.block()?;
        self.expect("delocal")?;
        let mut exits = vec![self.declarator()?];
        while self.eat(",") {
            exits.push(self.declarator()?);
        }
        let mut body = body;
        for (k, (var, init, dpos)) in decls.iter().enumerate().rev() {
            let Some(idx) = exits.iter().position(|(x, _, _)| x == var) else {
                return Err(ParseError {
                    pos: exits.last().map_or(pos, |e| e.2),
                    expected: [format!("`delocal {var}`")].into(),
                    found: "end of delocal list".into(),
                });
            };
            let (_, exit, _) = exits.remove(idx);
            let p = if k == 0 { pos } else { *dpos };
            body = vec![Stmt::at(StmtKind::LocalBlock { var: var.clone(), init: init.clone(), body, exit }, p)];
        }
        if let Some((x, _, p)) = exits.first() {
            return Err(ParseError { pos: *p, expected: BTreeSet::new(), found: format!("`{x}` without a matching local") });
        }
        Ok(body.pop().expect("at least one declarator"))
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        let t = self.peek()?;
        if t.kind != TokenKind::Op {
            return None;
        }
        BinOp::ALL.into_iter().find(|o| o.symbol() == t.lexeme)
    }

    fn binary(&mut self, min: u8) -> PResult<Expr> {
        let mut lhs = self.primary()?;
        while let Some(op) = self.binop() {
            if op.precedence() < min {
                break;
            }
            self.bump();
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Int => {
                self.bump();
                let v: u32 = t.lexeme.parse().expect("lexer bounds literals");
                Ok(Expr::Const(v as i32))
            }
            Some(t) if t.kind == TokenKind::Ident => Ok(Expr::Var(self.ident()?)),
            Some(t) if t.is("nil") => {
                self.bump();
                Ok(Expr::Nil)
            }
            Some(t) if t.is("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            _ => self.fail(&["expression"]),
        }
    }
}

fn eof_pos(toks: &[Token]) -> Pos {
    toks.last().map_or(Pos::new(1, 1), |t| Pos::new(t.line, t.col + t.lexeme.chars().count() as u32))
}

pub fn parse_program(toks: &[Token]) -> Result<Program, ParseError> {
    Parser { toks, at: 0, eof: eof_pos(toks) }.program()
}

/// Parses a statement sequence on its own; used by tests and tools.
pub fn parse_statements(toks: &[Token]) -> Result<Vec<Stmt>, ParseError> {
    let mut p = Parser { toks, at: 0, eof: eof_pos(toks) };
    let out = p.block()?;
    if p.peek().is_some() {
        return p.fail(&["statement", "end of input"]);
    }
    Ok(out)
}

pub fn parse_expression(toks: &[Token]) -> Result<Expr, ParseError> {
    let mut p = Parser { toks, at: 0, eof: eof_pos(toks) };
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.fail(&["operator", "end of input"]);
    }
    Ok(e)
}
