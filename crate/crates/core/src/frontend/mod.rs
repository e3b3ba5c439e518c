//! Parsing the kernel language into [`Program`] IR and printing it back as C.
//!
//! The accepted language is a C99 subset: one `void` function (or a bare
//! statement list) whose parameters are `int` scalars and `int`/`float`
//! variable-length arrays, canonical `for` loops, assignments and
//! `#pragma omp` lines.

mod emit;
mod lexer;
mod parser;

use std::fmt;

use thiserror::Error;

use crate::ir::Program;

pub use emit::{emit_expr, emit_source};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl SourceSpan {
    pub fn new(line: usize, column: usize, length: usize) -> Self {
        SourceSpan { line, column, length }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lex,
    Syntax,
    UnsupportedConstruct,
    BadPragma,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Lex => "lex",
            ParseErrorKind::Syntax => "syntax",
            ParseErrorKind::UnsupportedConstruct => "unsupported-construct",
            ParseErrorKind::BadPragma => "bad-pragma",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {kind} error: {message}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub(crate) fn new(kind: ParseErrorKind, span: SourceSpan, message: impl Into<String>) -> Self {
        ParseError { span, message: message.into(), kind }
    }
}

/// Parses kernel source. The returned program always passes
/// [`crate::validate::validate`].
pub fn parse_program(source: &str) -> Result<Program, ParseError> {
    parser::Parser::new(source)?.program()
}
