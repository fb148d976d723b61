pub mod ast;
pub mod desugar;
pub mod lexer;
pub mod parser;
pub mod pretty;

use thiserror::Error;

pub use ast::*;
pub use desugar::{desugar, desugar_statements, is_core};
pub use lexer::{tokenize, LexError, Token, TokenKind};
pub use parser::{parse_expression, parse_program, parse_statements, ParseError};
pub use pretty::{print_expr, print_program, print_statements};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SyntaxError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl SyntaxError {
    pub fn pos(&self) -> Pos {
        match self {
            SyntaxError::Lex(e) => e.pos(),
            SyntaxError::Parse(e) => e.pos,
        }
    }
}

/// Tokenizes and parses surface syntax, without desugaring.
pub fn parse_source(src: &str) -> Result<Program, SyntaxError> {
    Ok(parse_program(&tokenize(src)?)?)
}

pub fn parse_stmts_source(src: &str) -> Result<Vec<Stmt>, SyntaxError> {
    Ok(parse_statements(&tokenize(src)?)?)
}
