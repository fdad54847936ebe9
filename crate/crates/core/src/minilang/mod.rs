//! MiniLang: the small class-based language that mutation analysis runs on.
//!
//! A program is a list of classes holding functions; functions flagged
//! `test` form the test suite. Integers are 64-bit and wrap on overflow.
//! Execution cost is counted in interpreter steps, one per evaluated
//! statement or expression, which serve as the virtual clock everywhere else
//! in the crate.

mod ast;
mod interp;
mod lexer;
mod parser;
mod printer;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::*;
pub use interp::{
    call_function, run_all_tests, run_function, ExecutionOutcome, ExecutionStatus, Value,
    DEFAULT_STEP_LIMIT, MAX_CALL_DEPTH,
};
pub use parser::parse_program;
pub use printer::{print_expr, print_node, print_program, print_program_lines, PrintedLine};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParseErrorKind {
    Syntax,
    Unresolved,
    Duplicate,
    Type,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::Unresolved => "unresolved name",
            ParseErrorKind::Duplicate => "duplicate name",
            ParseErrorKind::Type => "type error",
        })
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{line}:{column}: {kind}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Byte offset into the source text.
    pub offset: usize,
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(kind: ParseErrorKind, offset: usize, message: String) -> Self {
        ParseError {
            kind,
            offset,
            line: 0,
            column: 0,
            message,
        }
    }

    pub(crate) fn syntax(offset: usize, message: String) -> Self {
        Self::new(ParseErrorKind::Syntax, offset, message)
    }

    pub(crate) fn locate(mut self, text: &str) -> Self {
        let upto = &text[..self.offset.min(text.len())];
        self.line = upto.matches('\n').count() as u32 + 1;
        self.column = (upto.len() - upto.rfind('\n').map_or(0, |i| i + 1)) as u32 + 1;
        self
    }
}

/// Parse `text` and immediately re-parse its canonical rendering, so spans
/// and line numbers refer to the canonical form. This is the form shipped to
/// workers and the one mutant byte offsets are reported against.
pub fn parse_canonical(text: &str) -> Result<SourceProgram, ParseError> {
    let program = parse_program(text)?;
    let canonical = print_program(&program);
    if canonical == text {
        return Ok(program);
    }
    parse_program(&canonical)
}
