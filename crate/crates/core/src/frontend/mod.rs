//! RelC concrete syntax: lexing, parsing and pretty-printing.

mod lexer;
mod parser;
mod printer;

use std::path::{Path, PathBuf};

pub use lexer::{lex, Token, TokenKind, ANNOTATION_KEYWORDS, KEYWORDS};
pub use parser::parse;
pub use printer::{print, print_expr};

use crate::ast::Program;
use crate::diag::{Diagnostic, Span};

/// Newline-normalized UTF-8 source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    path: PathBuf,
    text: String,
}

impl SourceFile {
    pub fn new(path: impl Into<PathBuf>, text: &str) -> Self {
        SourceFile {
            path: path.into(),
            text: text.replace("\r\n", "\n").replace('\r', "\n"),
        }
    }

    /// Rejects input that is not UTF-8, pointing at the first bad byte.
    pub fn from_bytes(path: impl Into<PathBuf>, bytes: &[u8]) -> Result<Self, Diagnostic> {
        match std::str::from_utf8(bytes) {
            Ok(text) => Ok(SourceFile::new(path, text)),
            Err(e) => {
                let good = &bytes[..e.valid_up_to()];
                let line = 1 + good.iter().filter(|b| **b == b'\n').count() as u32;
                let column = 1 + good.iter().rev().take_while(|b| **b != b'\n').count() as u32;
                Err(Diagnostic::error(
                    Span::new(line, column, e.valid_up_to(), e.valid_up_to() + 1),
                    "source is not valid UTF-8",
                ))
            }
        }
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        SourceFile::from_bytes(path, &bytes).map_err(|d| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, d.to_string())
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

/// Lexes and parses in one step.
pub fn parse_source(src: &SourceFile) -> Result<Program, Vec<Diagnostic>> {
    let tokens = lex(src)?;
    parse(&tokens)
}

/// Total entry point for untrusted input: never panics, reports problems as
/// diagnostics.
pub fn parse_bytes(bytes: &[u8]) -> Result<Program, Vec<Diagnostic>> {
    let src = SourceFile::from_bytes("<input>", bytes).map_err(|d| vec![d])?;
    parse_source(&src)
}
