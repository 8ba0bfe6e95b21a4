//! The `.dana` UDF language: lexer, parser, canonical printer and validator.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod validate;

use std::fmt;

pub use ast::*;
pub use parser::parse;
pub use printer::print;
pub use validate::{validate, Assignment, MergeSpec, Phase, TerminationSpec, TypedProgram, VarInfo};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub pos: Pos,
    pub message: String,
}

impl Diagnostic {
    pub fn new(pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic { pos, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.pos, self.message)
    }
}

/// One or more positioned diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DslError {
    pub diagnostics: Vec<Diagnostic>,
}

impl DslError {
    pub fn single(d: Diagnostic) -> Self {
        DslError { diagnostics: vec![d] }
    }

    /// `file:line:col: message`, one diagnostic per line.
    pub fn render(&self, file: &str) -> String {
        self.diagnostics
            .iter()
            .map(|d| format!("{file}:{d}"))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn first_message(&self) -> &str {
        self.diagnostics.first().map(|d| d.message.as_str()).unwrap_or("")
    }
}

impl fmt::Display for DslError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for DslError {}

/// Parse and validate in one step.
pub fn compile(source: &str) -> Result<TypedProgram, DslError> {
    validate(&parse(source)?)
}
