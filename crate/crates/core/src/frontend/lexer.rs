use std::fmt;

use crate::diag::{Diagnostic, Span};

use super::SourceFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Identifier,
    IntLiteral,
    Keyword,
    AnnotationKeyword,
    Operator,
    Punctuation,
    AnnotationOpen,
    AnnotationClose,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub span: Span,
}

impl Token {
    pub fn is(&self, kind: TokenKind, lexeme: &str) -> bool {
        self.kind == kind && self.lexeme == lexeme
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TokenKind::AnnotationClose if self.lexeme.is_empty() => f.write_str("end of annotation"),
            _ => write!(f, "'{}'", self.lexeme),
        }
    }
}

pub const KEYWORDS: &[&str] = &["int", "if", "else", "while", "return"];

/// Words that are keywords only inside annotation comments.
pub const ANNOTATION_KEYWORDS: &[&str] = &[
    "requires",
    "ensures",
    "assigns",
    "assert",
    "loop",
    "invariant",
    "relational",
    "lemma",
    "logic",
    "behavior",
    "axiomatic",
    "integer",
    "\\call",
    "\\result",
    "\\forall",
    "\\exists",
    "\\nothing",
    "\\true",
    "\\false",
];

const OPERATORS: &[&str] = &[
    "<==>", "==>", "==", "!=", "<=", ">=", "&&", "||", "<", ">", "=", "+", "-", "*", "/", "%", "!",
];

const PUNCTUATION: &[char] = &['(', ')', '{', '}', ',', ';', ':'];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Code,
    /// Inside `/*@ ... */`.
    BlockAnnotation,
    /// Inside `//@ ...` up to the end of the line.
    LineAnnotation,
}

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
    line: u32,
    column: u32,
    tokens: Vec<Token>,
    diags: Vec<Diagnostic>,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn bump_n(&mut self, bytes: usize) {
        let end = self.pos + bytes;
        while self.pos < end {
            self.bump();
        }
    }

    fn mark(&self) -> (u32, u32, usize) {
        (self.line, self.column, self.pos)
    }

    fn span_from(&self, mark: (u32, u32, usize)) -> Span {
        Span::new(mark.0, mark.1, mark.2, self.pos)
    }

    fn push(&mut self, kind: TokenKind, mark: (u32, u32, usize)) {
        let span = self.span_from(mark);
        self.tokens.push(Token {
            kind,
            lexeme: self.text[span.start..span.end].to_string(),
            span,
        });
    }

    fn run(mut self) -> Result<Vec<Token>, Vec<Diagnostic>> {
        let mut mode = Mode::Code;
        let mut annotation_start = self.mark();
        while let Some(c) = self.peek() {
            let rest = self.rest();
            if mode == Mode::LineAnnotation && c == '\n' {
                let m = self.mark();
                self.push(TokenKind::AnnotationClose, m);
                mode = Mode::Code;
                self.bump();
                continue;
            }
            if c.is_whitespace() || (mode != Mode::Code && c == '@') {
                self.bump();
                continue;
            }
            if mode == Mode::BlockAnnotation && rest.starts_with("*/") {
                let m = self.mark();
                self.bump_n(2);
                self.push(TokenKind::AnnotationClose, m);
                mode = Mode::Code;
                continue;
            }
            if mode == Mode::Code && rest.starts_with("/*@") {
                annotation_start = self.mark();
                self.bump_n(3);
                self.push(TokenKind::AnnotationOpen, annotation_start);
                mode = Mode::BlockAnnotation;
                continue;
            }
            if mode == Mode::Code && rest.starts_with("//@") {
                annotation_start = self.mark();
                self.bump_n(3);
                self.push(TokenKind::AnnotationOpen, annotation_start);
                mode = Mode::LineAnnotation;
                continue;
            }
            if rest.starts_with("//") {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    if mode == Mode::BlockAnnotation && self.rest().starts_with("*/") {
                        break;
                    }
                    self.bump();
                }
                continue;
            }
            if rest.starts_with("/*") {
                let m = self.mark();
                self.bump_n(2);
                match self.rest().find("*/") {
                    Some(off) => self.bump_n(off + 2),
                    None => {
                        self.bump_n(self.text.len() - self.pos);
                        self.diags
                            .push(Diagnostic::error(self.span_from(m), "unterminated comment"));
                    }
                }
                continue;
            }
            let m = self.mark();
            if c.is_ascii_alphabetic() || c == '_' || (c == '\\' && mode != Mode::Code) {
                self.bump();
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                    self.bump();
                }
                let word = &self.text[m.2..self.pos];
                let kind = if KEYWORDS.contains(&word) {
                    TokenKind::Keyword
                } else if mode != Mode::Code && ANNOTATION_KEYWORDS.contains(&word) {
                    TokenKind::AnnotationKeyword
                } else if word.starts_with('\\') {
                    let span = self.span_from(m);
                    self.diags
                        .push(Diagnostic::error(span, format!("unknown construct '{word}'")));
                    continue;
                } else {
                    TokenKind::Identifier
                };
                self.push(kind, m);
                continue;
            }
            if c.is_ascii_digit() {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.bump();
                }
                if matches!(self.peek(), Some(c) if c.is_ascii_alphabetic() || c == '_') {
                    while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                        self.bump();
                    }
                    let span = self.span_from(m);
                    self.diags.push(Diagnostic::error(
                        span,
                        format!("malformed integer literal '{}'", &self.text[m.2..self.pos]),
                    ));
                    continue;
                }
                if self.text[m.2..self.pos].parse::<i64>().is_err() {
                    let span = self.span_from(m);
                    self.diags
                        .push(Diagnostic::error(span, "integer literal out of range"));
                    continue;
                }
                self.push(TokenKind::IntLiteral, m);
                continue;
            }
            if let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(**op)) {
                self.bump_n(op.len());
                self.push(TokenKind::Operator, m);
                continue;
            }
            if PUNCTUATION.contains(&c) {
                self.bump();
                self.push(TokenKind::Punctuation, m);
                continue;
            }
            self.bump();
            let span = self.span_from(m);
            self.diags.push(Diagnostic::error(
                span,
                format!("illegal character '{}'", c.escape_default()),
            ));
        }
        match mode {
            Mode::Code => {}
            Mode::LineAnnotation => {
                let m = self.mark();
                self.push(TokenKind::AnnotationClose, m);
            }
            Mode::BlockAnnotation => {
                let span = Span::new(
                    annotation_start.0,
                    annotation_start.1,
                    annotation_start.2,
                    self.pos,
                );
                self.diags
                    .push(Diagnostic::error(span, "unterminated annotation"));
            }
        }
        if self.diags.is_empty() {
            Ok(self.tokens)
        } else {
            Err(self.diags)
        }
    }
}

/// Splits a source file into tokens. Plain comments and whitespace are dropped;
/// annotation comments are framed by open/close tokens.
pub fn lex(src: &SourceFile) -> Result<Vec<Token>, Vec<Diagnostic>> {
    Lexer {
        text: src.text(),
        pos: 0,
        line: 1,
        column: 1,
        tokens: Vec::new(),
        diags: Vec::new(),
    }
    .run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex_str(s: &str) -> Result<Vec<Token>, Vec<Diagnostic>> {
        lex(&SourceFile::new("test.relc", s))
    }

    #[test]
    fn simple_function_has_eleven_tokens() {
        let toks = lex_str("int f(int x){return x;}").unwrap();
        assert_eq!(toks.len(), 11);
        assert_eq!(toks.last().unwrap().lexeme, "}");
        assert_eq!(toks[0].kind, TokenKind::Keyword);
        assert_eq!(toks[1].kind, TokenKind::Identifier);
    }

    #[test]
    fn relational_annotation_tokens() {
        let src = r"/*@ relational R1: \forall int x1,x2; x1<x2 ==> \call(f1,x1) < \call(f1,x2); */";
        let toks = lex_str(src).unwrap();
        assert_eq!(toks[0].kind, TokenKind::AnnotationOpen);
        assert_eq!(toks.last().unwrap().kind, TokenKind::AnnotationClose);
        assert!(toks[1].is(TokenKind::AnnotationKeyword, "relational"));
        assert!(toks[2].is(TokenKind::Identifier, "R1"));
        assert!(toks
            .iter()
            .any(|t| t.is(TokenKind::AnnotationKeyword, "\\forall")));
        let calls = toks
            .iter()
            .filter(|t| t.is(TokenKind::AnnotationKeyword, "\\call"))
            .count();
        assert_eq!(calls, 2);
        assert!(toks.iter().any(|t| t.is(TokenKind::Operator, "==>")));
    }

    #[test]
    fn empty_file() {
        assert_eq!(lex_str("").unwrap(), vec![]);
    }

    #[test]
    fn spans_are_lossless() {
        let src = "/*@ requires x >= 0;\n  @ ensures \\result == x; */\nint f(int x) { // hi\n  return x; }\n//@ assert 1 == 1;\n";
        let file = SourceFile::new("t", src);
        for t in lex(&file).unwrap() {
            assert_eq!(&file.text()[t.span.start..t.span.end], t.lexeme);
        }
    }

    #[test]
    fn line_annotation_closes_at_newline() {
        let toks = lex_str("//@ assert x;\nint").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.kind).collect();
        assert_eq!(
            kinds,
            vec![
                TokenKind::AnnotationOpen,
                TokenKind::AnnotationKeyword,
                TokenKind::Identifier,
                TokenKind::Punctuation,
                TokenKind::AnnotationClose,
                TokenKind::Keyword,
            ]
        );
        assert_eq!(toks[5].span.line, 2);
    }

    #[test]
    fn annotation_words_are_identifiers_in_code() {
        let toks = lex_str("int requires;").unwrap();
        assert_eq!(toks[1].kind, TokenKind::Identifier);
    }

    #[test]
    fn errors_carry_spans() {
        let errs = lex_str("int x = 3 $ 4;").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].message.contains("illegal character"));
        assert_eq!(errs[0].span.column, 11);

        let errs = lex_str("int f();\n/*@ requires x;").unwrap_err();
        assert!(errs[0].message.contains("unterminated annotation"));
        assert_eq!(errs[0].span.line, 2);

        let errs = lex_str("/* never closed").unwrap_err();
        assert!(errs[0].message.contains("unterminated comment"));

        assert!(lex_str("int f(int x) { return x \\result; }").is_err());
        assert!(lex_str("99999999999999999999").is_err());
    }

    #[test]
    fn unary_minus_is_an_operator() {
        let toks = lex_str("-5").unwrap();
        assert_eq!(toks[0].kind, TokenKind::Operator);
        assert_eq!(toks[1].lexeme, "5");
    }
}
