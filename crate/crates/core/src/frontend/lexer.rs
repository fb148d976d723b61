use std::fmt;

use thiserror::Error;

use super::ast::Pos;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenKind {
    Keyword,
    Ident,
    Int,
    Op,
    Punct,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub line: u32,
    pub col: u32,
}

impl Token {
    pub fn pos(&self) -> Pos {
        Pos::new(self.line, self.col)
    }

    pub fn is(&self, lexeme: &str) -> bool {
        self.lexeme == lexeme && self.kind != TokenKind::Ident
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}`", self.lexeme)
    }
}

pub const KEYWORDS: &[&str] = &[
    "class", "inherits", "method", "int", "nil", "if", "then", "else", "fi", "from", "do", "loop", "until",
    "construct", "destruct", "local", "delocal", "call", "uncall", "skip", "reversal",
];

// Longest first so that `<=>` wins over `<=`.
const OPERATORS: &[&str] = &[
    "<=>", "+=", "-=", "^=", "&&", "||", "!=", "<=", ">=", "+", "-", "^", "*", "/", "%", "&", "|", "<", ">", "=",
];

const PUNCT: &[&str] = &["::", "(", ")", ","];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LexError {
    #[error("{line}:{col}: illegal character `{ch}`")]
    IllegalChar { ch: char, line: u32, col: u32 },
    #[error("{line}:{col}: integer literal `{lexeme}` does not fit 32 bits")]
    Overflow { lexeme: String, line: u32, col: u32 },
}

impl LexError {
    pub fn pos(&self) -> Pos {
        match self {
            LexError::IllegalChar { line, col, .. } | LexError::Overflow { line, col, .. } => Pos::new(*line, *col),
        }
    }
}

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let tok = |kind, lexeme: String| Token { kind, lexeme, line, col };
        if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let kind = if is_keyword(&word) { TokenKind::Keyword } else { TokenKind::Ident };
            out.push(tok(kind, word));
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let lexeme: String = chars[start..i].iter().collect();
            if lexeme.parse::<u32>().is_err() {
                return Err(LexError::Overflow { lexeme, line, col });
            }
            out.push(tok(TokenKind::Int, lexeme));
        } else {
            let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
            let found = OPERATORS
                .iter()
                .map(|o| (TokenKind::Op, o))
                .chain(PUNCT.iter().map(|p| (TokenKind::Punct, p)))
                .find(|(_, s)| rest.starts_with(**s));
            match found {
                Some((kind, s)) => {
                    i += s.len();
                    out.push(tok(kind, s.to_string()));
                }
                None => return Err(LexError::IllegalChar { ch: c, line, col }),
            }
        }
        col += (i - start) as u32;
    }
    Ok(out)
}
