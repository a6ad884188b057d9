//! Recursive-descent parser producing an unchecked [`Program`].

use super::ast::*;
use super::diag::{DiagCode, Diagnostic, Span};
use super::lexer::{Token, TokenKind};
use crate::value::BaseType;

pub fn parse(tokens: Vec<Token>) -> Result<Program, Diagnostic> {
    let mut p = Parser::new(tokens);
    let mut items = Vec::new();
    while !p.at_end() {
        items.push(p.item()?);
    }
    Ok(Program { items })
}

/// One argument of a command-line entry call: `expr` or `name = expr`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryArg {
    pub name: Option<String>,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryCall {
    pub callee: String,
    /// `None` for a bare routine name (all outs auto-named).
    pub args: Option<[Vec<EntryArg>; 3]>,
}

/// Parse an entry call such as `fib(10;;a)`,
/// `jacobi(8, 1e-4; e = 2e-4, imax = 1000, a = [1,0,0,0,0,0,0,8];)` or a
/// bare routine name.
pub fn parse_entry(tokens: Vec<Token>) -> Result<EntryCall, Diagnostic> {
    let mut p = Parser::new(tokens);
    let (callee, _) = p.ident()?;
    let args = if p.at_end() {
        None
    } else {
        p.expect(TokenKind::LParen)?;
        let mut groups: [Vec<EntryArg>; 3] = Default::default();
        for (gi, group) in groups.iter_mut().enumerate() {
            if gi > 0 {
                p.group_separator()?;
            }
            if p.check(&TokenKind::Semi) || p.check(&TokenKind::RParen) {
                continue;
            }
            loop {
                let name = match (p.peek_kind(0), p.peek_kind(1)) {
                    (Some(TokenKind::Ident(n)), Some(TokenKind::Eq)) => {
                        let n = n.clone();
                        p.pos += 2;
                        Some(n)
                    }
                    _ => None,
                };
                let expr = p.expr()?;
                group.push(EntryArg { name, expr });
                if !p.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        p.expect(TokenKind::RParen)?;
        Some(groups)
    };
    if !p.at_end() {
        return Err(p.unexpected(&["end of input"]));
    }
    Ok(EntryCall { callee, args })
}

pub(crate) struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(tokens: Vec<Token>) -> Self {
        Parser { tokens, pos: 0 }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek_kind(&self, ahead: usize) -> Option<&TokenKind> {
        self.tokens.get(self.pos + ahead).map(|t| &t.kind)
    }

    fn span(&self) -> Span {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map(|t| t.span)
            .unwrap_or(Span::new(1, 1))
    }

    fn check(&self, kind: &TokenKind) -> bool {
        self.peek_kind(0) == Some(kind)
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.check(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &[&str]) -> Diagnostic {
        let found = match self.peek_kind(0) {
            Some(k) => k.to_string(),
            None => "end of input".to_string(),
        };
        Diagnostic::new(
            DiagCode::SyntaxError,
            self.span(),
            format!("expected {}, found {found}", expected.join(" or ")),
        )
    }

    fn expect(&mut self, kind: TokenKind) -> Result<Span, Diagnostic> {
        let span = self.span();
        if self.eat(&kind) {
            Ok(span)
        } else {
            Err(self.unexpected(&[kind.name()]))
        }
    }

    fn ident(&mut self) -> Result<(String, Span), Diagnostic> {
        let span = self.span();
        match self.peek_kind(0) {
            Some(TokenKind::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok((s, span))
            }
            _ => Err(self.unexpected(&["ident"])),
        }
    }

    /// The `;` between parameter or argument groups.
    fn group_separator(&mut self) -> Result<(), Diagnostic> {
        if self.eat(&TokenKind::Semi) {
            Ok(())
        } else if self.check(&TokenKind::RParen) {
            Err(Diagnostic::new(
                DiagCode::MissingGroupSeparator,
                self.span(),
                "expected two `;` separating ins, inouts and outs",
            ))
        } else {
            Err(self.unexpected(&["semi", "comma"]))
        }
    }

    fn item(&mut self) -> Result<Item, Diagnostic> {
        if self.check(&TokenKind::KwRecord) {
            return self.record().map(Item::Record);
        }
        let (name, span) = self.ident()?;
        self.expect(TokenKind::LParen)?;
        let params = self.params(false)?;
        self.expect(TokenKind::RParen)?;
        let body = if self.eat(&TokenKind::Semi) {
            None
        } else if self.check(&TokenKind::LBrace) {
            Some(self.block()?)
        } else {
            return Err(self.unexpected(&["lbrace", "semi"]));
        };
        Ok(Item::Routine(RoutineDef { name, params, body, pos: span.into() }))
    }

    fn record(&mut self) -> Result<RecordDecl, Diagnostic> {
        let span = self.expect(TokenKind::KwRecord)?;
        let (name, _) = self.ident()?;
        self.expect(TokenKind::LBrace)?;
        let mut methods = Vec::new();
        if !self.check(&TokenKind::RBrace) {
            loop {
                let (mname, mspan) = self.ident()?;
                self.expect(TokenKind::LParen)?;
                let params = self.params(true)?;
                self.expect(TokenKind::RParen)?;
                methods.push(MethodSig { name: mname, params, pos: mspan.into() });
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        self.expect(TokenKind::RBrace)?;
        self.eat(&TokenKind::Semi);
        Ok(RecordDecl { name, methods, pos: span.into() })
    }

    fn params(&mut self, allow_unnamed: bool) -> Result<Params, Diagnostic> {
        let mut params = Params::default();
        for gi in 0..3 {
            if gi > 0 {
                self.group_separator()?;
            }
            if self.check(&TokenKind::Semi) || self.check(&TokenKind::RParen) {
                continue;
            }
            loop {
                let p = self.param(allow_unnamed)?;
                params.groups[gi].push(p);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        Ok(params)
    }

    fn param(&mut self, allow_unnamed: bool) -> Result<Param, Diagnostic> {
        let span = self.span();
        let del = self.eat(&TokenKind::KwDel);
        let ty = self.base_type()?;
        let name = match self.peek_kind(0) {
            Some(TokenKind::Ident(_)) => Some(self.ident()?.0),
            _ if allow_unnamed => None,
            _ => return Err(self.unexpected(&["ident"])),
        };
        let len = if self.eat(&TokenKind::LBracket) {
            let e = self.expr()?;
            self.expect(TokenKind::RBracket)?;
            Some(e)
        } else {
            None
        };
        Ok(Param { name, ty, len, del, pos: span.into() })
    }

    fn base_type(&mut self) -> Result<BaseType, Diagnostic> {
        match self.peek_kind(0) {
            Some(TokenKind::KwInt) => {
                self.pos += 1;
                Ok(BaseType::Int)
            }
            Some(TokenKind::KwReal) => {
                self.pos += 1;
                Ok(BaseType::Real)
            }
            Some(TokenKind::Ident(_)) => Ok(BaseType::Record(self.ident()?.0)),
            _ => Err(self.unexpected(&["`int`", "`real`", "record type"])),
        }
    }

    fn block(&mut self) -> Result<Block, Diagnostic> {
        self.expect(TokenKind::LBrace)?;
        let mut stmts = Vec::new();
        while !self.check(&TokenKind::RBrace) {
            if self.at_end() {
                return Err(self.unexpected(&["rbrace"]));
            }
            stmts.push(self.stmt()?);
        }
        self.pos += 1;
        Ok(Block { stmts })
    }

    fn stmt(&mut self) -> Result<Stmt, Diagnostic> {
        let span = self.span();
        let kind = match self.peek_kind(0) {
            Some(TokenKind::LBrace) => StmtKind::Block(self.block()?),
            Some(TokenKind::KwIf) => {
                self.pos += 1;
                self.expect(TokenKind::LParen)?;
                let cond = self.expr()?;
                self.expect(TokenKind::RParen)?;
                let then = Box::new(self.stmt()?);
                let els = if self.eat(&TokenKind::KwElse) {
                    Some(Box::new(self.stmt()?))
                } else {
                    None
                };
                StmtKind::If { cond, then, els }
            }
            Some(TokenKind::KwReturn) => {
                self.pos += 1;
                self.expect(TokenKind::Semi)?;
                StmtKind::Return
            }
            Some(TokenKind::KwInt | TokenKind::KwReal) => self.decl()?,
            Some(TokenKind::PlusPlus | TokenKind::MinusMinus) => {
                let e = self.expr()?;
                self.expect(TokenKind::Semi)?;
                StmtKind::Expr(e)
            }
            Some(TokenKind::Ident(_)) => self.ident_stmt()?,
            _ => return Err(self.unexpected(&["statement"])),
        };
        Ok(Stmt { kind, pos: span.into() })
    }

    fn decl(&mut self) -> Result<StmtKind, Diagnostic> {
        let ty = self.base_type()?;
        let mut decls = Vec::new();
        loop {
            let (name, span) = self.ident()?;
            let dims = if self.eat(&TokenKind::LBracket) {
                let first = self.expr()?;
                let dims = if self.eat(&TokenKind::Colon) {
                    (Some(first), self.expr()?)
                } else {
                    (None, first)
                };
                self.expect(TokenKind::RBracket)?;
                Some(dims)
            } else {
                None
            };
            let init = if self.eat(&TokenKind::Eq) { Some(self.expr()?) } else { None };
            decls.push(Declarator { name, dims, init, pos: span.into() });
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }
        self.expect(TokenKind::Semi)?;
        Ok(StmtKind::Decl { ty, decls })
    }

    /// Index of the `)` matching the `(` at `open`.
    fn matching_paren(&self, open: usize) -> Option<usize> {
        let mut depth = 0usize;
        for (i, t) in self.tokens.iter().enumerate().skip(open) {
            match t.kind {
                TokenKind::LParen => depth += 1,
                TokenKind::RParen => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(i);
                    }
                }
                _ => {}
            }
        }
        None
    }

    fn ident_stmt(&mut self) -> Result<StmtKind, Diagnostic> {
        match self.peek_kind(1) {
            // `Stack s;`
            Some(TokenKind::Ident(_)) => self.decl(),
            Some(TokenKind::Dot) => {
                let (receiver, span) = self.ident()?;
                self.pos += 1;
                let (method, _) = self.ident()?;
                let args = self.call_args()?;
                if self.check(&TokenKind::LBrace) {
                    let mut params: [Vec<String>; 3] = Default::default();
                    for (gi, group) in args.iter().enumerate() {
                        for a in group {
                            match &a.kind {
                                ExprKind::Name(n) => params[gi].push(n.clone()),
                                _ => {
                                    return Err(Diagnostic::new(
                                        DiagCode::SyntaxError,
                                        a.span(),
                                        "method implementation parameters must be names",
                                    ))
                                }
                            }
                        }
                    }
                    let body = self.block()?;
                    Ok(StmtKind::MethodImpl(MethodImpl { receiver, method, params, body }))
                } else {
                    self.expect(TokenKind::Semi)?;
                    Ok(StmtKind::Call(Call {
                        receiver: Some(receiver),
                        callee: method,
                        args,
                        must_inline: false,
                        pos: span.into(),
                    }))
                }
            }
            Some(TokenKind::LParen) => {
                let close = self.matching_paren(self.pos + 1);
                let is_assign = close
                    .and_then(|c| self.tokens.get(c + 1))
                    .is_some_and(|t| t.kind == TokenKind::Eq);
                if is_assign {
                    self.assign()
                } else {
                    let (callee, span) = self.ident()?;
                    let args = self.call_args()?;
                    self.expect(TokenKind::Semi)?;
                    Ok(StmtKind::Call(Call {
                        receiver: None,
                        callee,
                        args,
                        must_inline: false,
                        pos: span.into(),
                    }))
                }
            }
            Some(TokenKind::PlusPlus | TokenKind::MinusMinus) => {
                let e = self.expr()?;
                self.expect(TokenKind::Semi)?;
                Ok(StmtKind::Expr(e))
            }
            _ => self.assign(),
        }
    }

    fn assign(&mut self) -> Result<StmtKind, Diagnostic> {
        let (base, _) = self.ident()?;
        let target = if self.eat(&TokenKind::LParen) {
            let index = self.expr()?;
            self.expect(TokenKind::RParen)?;
            LValue::Index { base, index }
        } else if self.eat(&TokenKind::LBracket) {
            let index = self.expr()?;
            self.expect(TokenKind::RBracket)?;
            LValue::Index { base, index }
        } else {
            LValue::Name(base)
        };
        self.expect(TokenKind::Eq)?;
        let value = self.expr()?;
        self.expect(TokenKind::Semi)?;
        Ok(StmtKind::Assign { target, value })
    }

    fn call_args(&mut self) -> Result<[Vec<Expr>; 3], Diagnostic> {
        self.expect(TokenKind::LParen)?;
        let mut groups: [Vec<Expr>; 3] = Default::default();
        for (gi, group) in groups.iter_mut().enumerate() {
            if gi > 0 {
                self.group_separator()?;
            }
            if self.check(&TokenKind::Semi) || self.check(&TokenKind::RParen) {
                continue;
            }
            loop {
                group.push(self.expr()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        Ok(groups)
    }

    fn expr(&mut self) -> Result<Expr, Diagnostic> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek_kind(0)? {
            TokenKind::Plus => BinOp::Add,
            TokenKind::Minus => BinOp::Sub,
            TokenKind::Star => BinOp::Mul,
            TokenKind::Slash => BinOp::Div,
            TokenKind::Percent => BinOp::Rem,
            TokenKind::Lt => BinOp::Lt,
            TokenKind::Le => BinOp::Le,
            TokenKind::Gt => BinOp::Gt,
            TokenKind::Ge => BinOp::Ge,
            TokenKind::EqEq => BinOp::Eq,
            TokenKind::Ne => BinOp::Ne,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, Diagnostic> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            let span = self.span();
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::new(ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, span);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, Diagnostic> {
        let span = self.span();
        match self.peek_kind(0) {
            Some(TokenKind::Minus) => {
                self.pos += 1;
                let e = self.unary()?;
                Ok(Expr::new(ExprKind::Neg(Box::new(e)), span))
            }
            Some(TokenKind::PlusPlus | TokenKind::MinusMinus) => {
                let inc = self.check(&TokenKind::PlusPlus);
                self.pos += 1;
                let (name, _) = self.ident()?;
                Ok(Expr::new(ExprKind::Step { name, inc, prefix: true }, span))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, Diagnostic> {
        let span = self.span();
        let kind = match self.peek_kind(0).cloned() {
            Some(TokenKind::Int(v)) => {
                self.pos += 1;
                ExprKind::Int(v)
            }
            Some(TokenKind::Real(v)) => {
                self.pos += 1;
                ExprKind::Real(v)
            }
            Some(TokenKind::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                return Ok(e);
            }
            Some(TokenKind::LBracket) => {
                self.pos += 1;
                let mut items = Vec::new();
                if !self.check(&TokenKind::RBracket) {
                    loop {
                        items.push(self.expr()?);
                        if !self.eat(&TokenKind::Comma) {
                            break;
                        }
                    }
                }
                self.expect(TokenKind::RBracket)?;
                ExprKind::ArrayLit(items)
            }
            Some(TokenKind::Ident(name)) => {
                self.pos += 1;
                if self.eat(&TokenKind::LParen) {
                    let arg = self.expr()?;
                    self.expect(TokenKind::RParen)?;
                    match Builtin::lookup(&name) {
                        Some(func) => ExprKind::Builtin { func, arg: Box::new(arg) },
                        None => ExprKind::Index { base: name, index: Box::new(arg) },
                    }
                } else if self.eat(&TokenKind::LBracket) {
                    let first = self.expr()?;
                    let kind = if self.eat(&TokenKind::Colon) {
                        let hi = self.expr()?;
                        ExprKind::Range { base: name, lo: Box::new(first), hi: Box::new(hi) }
                    } else {
                        ExprKind::Index { base: name, index: Box::new(first) }
                    };
                    self.expect(TokenKind::RBracket)?;
                    kind
                } else if self.check(&TokenKind::PlusPlus) || self.check(&TokenKind::MinusMinus) {
                    let inc = self.check(&TokenKind::PlusPlus);
                    self.pos += 1;
                    ExprKind::Step { name, inc, prefix: false }
                } else {
                    ExprKind::Name(name)
                }
            }
            _ => return Err(self.unexpected(&["expression"])),
        };
        Ok(Expr::new(kind, span))
    }
}
