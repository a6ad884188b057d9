//! Lexer, parser, checker and pretty-printer for the task language.

pub mod ast;
pub mod check;
pub mod diag;
pub mod lexer;
pub mod parser;
pub mod pretty;

pub use check::{check, CheckedProgram};
pub use diag::{DiagCode, Diagnostic, Span};

/// Parse and check a whole source file.
pub fn compile(source: &str) -> Result<CheckedProgram, Vec<Diagnostic>> {
    let tokens = lexer::tokenize(source).map_err(|d| vec![d])?;
    let program = parser::parse(tokens).map_err(|d| vec![d])?;
    check(program)
}

/// Parse without checking, for round-trip tests and the pretty-printer.
pub fn parse(source: &str) -> Result<ast::Program, Diagnostic> {
    parser::parse(lexer::tokenize(source)?)
}
