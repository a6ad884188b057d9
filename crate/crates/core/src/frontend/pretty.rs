//! Canonical source printer. `parse(pretty(p))` is structurally equal to `p`.

use std::fmt::Write;

use super::ast::*;

pub fn pretty(program: &Program) -> String {
    let mut out = String::new();
    for item in &program.items {
        match item {
            Item::Record(r) => {
                let sigs: Vec<String> = r
                    .methods
                    .iter()
                    .map(|m| format!("{}({})", m.name, params(&m.params)))
                    .collect();
                let _ = writeln!(out, "record {} {{ {} }};", r.name, sigs.join(", "));
            }
            Item::Routine(r) => {
                let _ = write!(out, "{}({})", r.name, params(&r.params));
                match &r.body {
                    None => out.push_str(";\n"),
                    Some(b) => {
                        out.push(' ');
                        block(&mut out, b, 0);
                        out.push('\n');
                    }
                }
            }
        }
    }
    out
}

fn params(p: &Params) -> String {
    p.groups
        .iter()
        .map(|g| g.iter().map(param).collect::<Vec<_>>().join(", "))
        .collect::<Vec<_>>()
        .join("; ")
}

fn param(p: &Param) -> String {
    let mut s = String::new();
    if p.del {
        s.push_str("del ");
    }
    s.push_str(&p.ty.to_string());
    if let Some(n) = &p.name {
        s.push(' ');
        s.push_str(n);
    }
    if let Some(len) = &p.len {
        let _ = write!(s, "[{}]", expr(len));
    }
    s
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn block(out: &mut String, b: &Block, level: usize) {
    out.push_str("{\n");
    for s in &b.stmts {
        indent(out, level + 1);
        stmt(out, s, level + 1);
        out.push('\n');
    }
    indent(out, level);
    out.push('}');
}

fn stmt(out: &mut String, s: &Stmt, level: usize) {
    match &s.kind {
        StmtKind::Decl { ty, decls } => {
            let ds: Vec<String> = decls
                .iter()
                .map(|d| {
                    let mut t = d.name.clone();
                    if let Some((lo, hi)) = &d.dims {
                        match lo {
                            Some(lo) => {
                                let _ = write!(t, "[{}:{}]", expr(lo), expr(hi));
                            }
                            None => {
                                let _ = write!(t, "[{}]", expr(hi));
                            }
                        }
                    }
                    if let Some(init) = &d.init {
                        let _ = write!(t, " = {}", expr(init));
                    }
                    t
                })
                .collect();
            let _ = write!(out, "{ty} {};", ds.join(", "));
        }
        StmtKind::Assign { target, value } => {
            match target {
                LValue::Name(n) => out.push_str(n),
                LValue::Index { base, index } => {
                    let _ = write!(out, "{base}[{}]", expr(index));
                }
            }
            let _ = write!(out, " = {};", expr(value));
        }
        StmtKind::Call(c) => {
            out.push_str(&call(c));
            out.push(';');
        }
        StmtKind::If { cond, then, els } => {
            let _ = write!(out, "if ({}) ", expr(cond));
            stmt(out, then, level);
            if let Some(e) = els {
                out.push_str(" else ");
                stmt(out, e, level);
            }
        }
        StmtKind::Return => out.push_str("return;"),
        StmtKind::Block(b) => block(out, b, level),
        StmtKind::MethodImpl(m) => {
            let groups: Vec<String> = m.params.iter().map(|g| g.join(", ")).collect();
            let _ = write!(out, "{}.{}({}) ", m.receiver, m.method, groups.join("; "));
            block(out, &m.body, level);
        }
        StmtKind::Expr(e) => {
            let _ = write!(out, "{};", expr(e));
        }
    }
}

pub fn call(c: &Call) -> String {
    let groups: Vec<String> = c
        .args
        .iter()
        .map(|g| g.iter().map(expr).collect::<Vec<_>>().join(", "))
        .collect();
    match &c.receiver {
        Some(r) => format!("{r}.{}({})", c.callee, groups.join("; ")),
        None => format!("{}({})", c.callee, groups.join("; ")),
    }
}

pub fn expr(e: &Expr) -> String {
    expr_prec(e, 0)
}

fn expr_prec(e: &Expr, ctx: u8) -> String {
    match &e.kind {
        ExprKind::Int(v) if *v < 0 => format!("({v})"),
        ExprKind::Int(v) => v.to_string(),
        ExprKind::Real(v) if *v < 0.0 || v.is_sign_negative() => format!("({v:?})"),
        ExprKind::Real(v) => format!("{v:?}"),
        ExprKind::Name(n) => n.clone(),
        ExprKind::Index { base, index } => format!("{base}[{}]", expr(index)),
        ExprKind::Range { base, lo, hi } => format!("{base}[{}:{}]", expr(lo), expr(hi)),
        ExprKind::Neg(inner) => {
            let s = expr_prec(inner, 4);
            if s.starts_with('-') {
                format!("-({s})")
            } else {
                format!("-{s}")
            }
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            let s = format!("{} {} {}", expr_prec(lhs, p), op.symbol(), expr_prec(rhs, p + 1));
            if p < ctx {
                format!("({s})")
            } else {
                s
            }
        }
        ExprKind::Builtin { func, arg } => format!("{}({})", func.name(), expr(arg)),
        ExprKind::Step { name, inc, prefix } => {
            let op = if *inc { "++" } else { "--" };
            if *prefix {
                format!("{op}{name}")
            } else {
                format!("{name}{op}")
            }
        }
        ExprKind::ArrayLit(items) => {
            format!("[{}]", items.iter().map(expr).collect::<Vec<_>>().join(", "))
        }
    }
}
