//! Tokenizer for `.tsia` sources.

use std::fmt;

use super::diag::{DiagCode, Diagnostic, Span};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    Real(f64),
    // keywords
    KwInt,
    KwReal,
    KwDel,
    KwRecord,
    KwIf,
    KwElse,
    KwReturn,
    // punctuation
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Semi,
    Comma,
    Colon,
    Dot,
    Eq,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    PlusPlus,
    MinusMinus,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "ident {s}"),
            TokenKind::Int(v) => write!(f, "int {v}"),
            TokenKind::Real(v) => write!(f, "real {v:?}"),
            TokenKind::KwInt => f.write_str("kw int"),
            TokenKind::KwReal => f.write_str("kw real"),
            TokenKind::KwDel => f.write_str("kw del"),
            TokenKind::KwRecord => f.write_str("kw record"),
            TokenKind::KwIf => f.write_str("kw if"),
            TokenKind::KwElse => f.write_str("kw else"),
            TokenKind::KwReturn => f.write_str("kw return"),
            other => f.write_str(other.name()),
        }
    }
}

impl TokenKind {
    /// Short name used in "expected" sets.
    pub fn name(&self) -> &'static str {
        match self {
            TokenKind::Ident(_) => "ident",
            TokenKind::Int(_) => "int",
            TokenKind::Real(_) => "real",
            TokenKind::KwInt => "`int`",
            TokenKind::KwReal => "`real`",
            TokenKind::KwDel => "`del`",
            TokenKind::KwRecord => "`record`",
            TokenKind::KwIf => "`if`",
            TokenKind::KwElse => "`else`",
            TokenKind::KwReturn => "`return`",
            TokenKind::LParen => "lparen",
            TokenKind::RParen => "rparen",
            TokenKind::LBracket => "lbracket",
            TokenKind::RBracket => "rbracket",
            TokenKind::LBrace => "lbrace",
            TokenKind::RBrace => "rbrace",
            TokenKind::Semi => "semi",
            TokenKind::Comma => "comma",
            TokenKind::Colon => "colon",
            TokenKind::Dot => "dot",
            TokenKind::Eq => "eq",
            TokenKind::Plus => "plus",
            TokenKind::Minus => "minus",
            TokenKind::Star => "star",
            TokenKind::Slash => "slash",
            TokenKind::Percent => "percent",
            TokenKind::Lt => "lt",
            TokenKind::Le => "le",
            TokenKind::Gt => "gt",
            TokenKind::Ge => "ge",
            TokenKind::EqEq => "eqeq",
            TokenKind::Ne => "ne",
            TokenKind::PlusPlus => "plusplus",
            TokenKind::MinusMinus => "minusminus",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, Diagnostic> {
    Lexer::new(source).run()
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { chars: src.char_indices().peekable(), src, line: 1, col: 1 }
    }

    fn bump(&mut self) -> Option<(usize, char)> {
        let next = self.chars.next();
        if let Some((_, c)) = next {
            if c == '\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
        }
        next
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next().map(|(_, c)| c)
    }

    fn run(mut self) -> Result<Vec<Token>, Diagnostic> {
        let mut out = Vec::new();
        while let Some(c) = self.peek() {
            let span = Span::new(self.line, self.col);
            if c.is_whitespace() {
                self.bump();
                continue;
            }
            if c == '/' && self.peek2() == Some('/') {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
                continue;
            }
            let kind = if c.is_ascii_alphabetic() || c == '_' {
                self.ident()
            } else if c.is_ascii_digit()
                || (c == '.' && self.peek2().is_some_and(|d| d.is_ascii_digit()))
            {
                self.number(span)?
            } else {
                self.bump();
                self.punct(c, span)?
            };
            out.push(Token { kind, span });
        }
        Ok(out)
    }

    fn ident(&mut self) -> TokenKind {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        match s.as_str() {
            "int" => TokenKind::KwInt,
            "real" => TokenKind::KwReal,
            "del" => TokenKind::KwDel,
            "record" => TokenKind::KwRecord,
            "if" => TokenKind::KwIf,
            "else" => TokenKind::KwElse,
            "return" => TokenKind::KwReturn,
            _ => TokenKind::Ident(s),
        }
    }

    fn number(&mut self, span: Span) -> Result<TokenKind, Diagnostic> {
        let start = self.chars.peek().map(|&(i, _)| i).unwrap_or(self.src.len());
        let mut end = start;
        let mut is_real = false;
        while let Some(&(i, c)) = self.chars.peek() {
            if c.is_ascii_digit() {
                end = i + 1;
                self.bump();
            } else if c == '.' && !is_real {
                is_real = true;
                end = i + 1;
                self.bump();
            } else {
                break;
            }
        }
        // exponent: e[+-]digits
        if matches!(self.peek(), Some('e' | 'E')) {
            let mut look = self.chars.clone();
            look.next();
            let mut ok = false;
            if let Some(&(_, c)) = look.peek() {
                if c == '+' || c == '-' {
                    look.next();
                }
            }
            if let Some(&(_, c)) = look.peek() {
                ok = c.is_ascii_digit();
            }
            if ok {
                is_real = true;
                self.bump();
                if matches!(self.peek(), Some('+' | '-')) {
                    self.bump();
                }
                while let Some(&(i, c)) = self.chars.peek() {
                    if c.is_ascii_digit() {
                        end = i + 1;
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
        }
        let text = &self.src[start..end];
        if is_real {
            text.parse::<f64>().map(TokenKind::Real).map_err(|_| {
                Diagnostic::new(DiagCode::IllegalCharacter, span, format!("bad real literal `{text}`"))
            })
        } else {
            text.parse::<i64>().map(TokenKind::Int).map_err(|_| {
                Diagnostic::new(
                    DiagCode::IllegalCharacter,
                    span,
                    format!("integer literal `{text}` out of range"),
                )
            })
        }
    }

    fn punct(&mut self, c: char, span: Span) -> Result<TokenKind, Diagnostic> {
        let two = |lx: &mut Self, next: char, yes: TokenKind, no: TokenKind| {
            if lx.peek() == Some(next) {
                lx.bump();
                yes
            } else {
                no
            }
        };
        Ok(match c {
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            '[' => TokenKind::LBracket,
            ']' => TokenKind::RBracket,
            '{' => TokenKind::LBrace,
            '}' => TokenKind::RBrace,
            ';' => TokenKind::Semi,
            ',' => TokenKind::Comma,
            ':' => TokenKind::Colon,
            '.' => TokenKind::Dot,
            '*' => TokenKind::Star,
            '/' => TokenKind::Slash,
            '%' => TokenKind::Percent,
            '+' => two(self, '+', TokenKind::PlusPlus, TokenKind::Plus),
            '-' => two(self, '-', TokenKind::MinusMinus, TokenKind::Minus),
            '=' => two(self, '=', TokenKind::EqEq, TokenKind::Eq),
            '<' => two(self, '=', TokenKind::Le, TokenKind::Lt),
            '>' => two(self, '=', TokenKind::Ge, TokenKind::Gt),
            '!' if self.peek() == Some('=') => {
                self.bump();
                TokenKind::Ne
            }
            other => {
                return Err(Diagnostic::new(
                    DiagCode::IllegalCharacter,
                    span,
                    format!("illegal character `{other}`"),
                ))
            }
        })
    }
}
