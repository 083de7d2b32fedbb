use crate::ast::*;
use crate::diag::{Diagnostic, Span};

use super::lexer::{Token, TokenKind};

/// Guard against stack exhaustion on adversarial nesting.
const MAX_DEPTH: usize = 96;

type PResult<T> = Result<T, Diagnostic>;

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
    depth: usize,
}

/// Parses a token stream into a program. Stops at the first syntax error.
pub fn parse(tokens: &[Token]) -> Result<Program, Vec<Diagnostic>> {
    let mut p = Parser {
        tokens,
        pos: 0,
        depth: 0,
    };
    p.program().map_err(|d| vec![d])
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&'t Token> {
        self.tokens.get(self.pos + n)
    }

    fn at(&self, kind: TokenKind, lexeme: &str) -> bool {
        self.peek().is_some_and(|t| t.is(kind, lexeme))
    }

    fn at_kind(&self, kind: TokenKind) -> bool {
        self.peek().is_some_and(|t| t.kind == kind)
    }

    fn at_op(&self, op: &str) -> bool {
        self.at(TokenKind::Operator, op)
    }

    fn at_punct(&self, p: &str) -> bool {
        self.at(TokenKind::Punctuation, p)
    }

    fn at_akw(&self, kw: &str) -> bool {
        self.at(TokenKind::AnnotationKeyword, kw)
    }

    fn bump(&mut self) -> &'t Token {
        let t = &self.tokens[self.pos];
        self.pos += 1;
        t
    }

    fn eat(&mut self, kind: TokenKind, lexeme: &str) -> bool {
        if self.at(kind, lexeme) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn here(&self) -> Span {
        match self.peek() {
            Some(t) => t.span,
            None => match self.tokens.last() {
                Some(t) => Span::new(t.span.line, t.span.column + 1, t.span.end, t.span.end),
                None => Span::new(1, 1, 0, 0),
            },
        }
    }

    fn error(&self, expected: &str) -> Diagnostic {
        let found = match self.peek() {
            Some(t) => format!("found {t}"),
            None => "found end of input".to_string(),
        };
        Diagnostic::error(self.here(), format!("expected {expected}, {found}"))
    }

    fn expect(&mut self, kind: TokenKind, lexeme: &str) -> PResult<&'t Token> {
        if self.at(kind, lexeme) {
            Ok(self.bump())
        } else {
            Err(self.error(&format!("'{lexeme}'")))
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<&'t Token> {
        self.expect(TokenKind::Punctuation, p)
    }

    fn ident(&mut self, what: &str) -> PResult<(Ident, Span)> {
        if self.at_kind(TokenKind::Identifier) {
            let t = self.bump();
            Ok((t.lexeme.clone(), t.span))
        } else {
            Err(self.error(what))
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            Err(Diagnostic::error(self.here(), "nesting too deep"))
        } else {
            Ok(())
        }
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn program(&mut self) -> PResult<Program> {
        let mut program = Program::default();
        let mut pending: Option<(Contract, Span)> = None;
        while let Some(tok) = self.peek() {
            match tok.kind {
                TokenKind::AnnotationOpen => {
                    let open = self.bump().span;
                    if self.at_akw("logic") || self.at_akw("lemma") || self.at_akw("axiomatic") {
                        if pending.is_some() {
                            return Err(Diagnostic::error(
                                open,
                                "contract annotation must be followed by a function",
                            ));
                        }
                        self.global_decls(&mut program.logic_decls)?;
                    } else {
                        let (contract, span) = pending
                            .take()
                            .unwrap_or_else(|| (Contract::default(), open));
                        pending = Some((self.contract(contract)?, span));
                    }
                    self.expect_close()?;
                }
                TokenKind::Keyword if tok.lexeme == "int" => {
                    let (contract, span) = pending
                        .take()
                        .map_or((Contract::default(), None), |(c, s)| (c, Some(s)));
                    let mut f = self.function(contract)?;
                    if let Some(s) = span {
                        f.span = s.to(f.span);
                    }
                    program.functions.push(f);
                }
                _ => return Err(self.error("function definition or annotation")),
            }
        }
        if let Some((_, span)) = pending {
            return Err(Diagnostic::error(
                span,
                "contract annotation must be followed by a function",
            ));
        }
        Ok(program)
    }

    fn expect_close(&mut self) -> PResult<()> {
        if self.at_kind(TokenKind::AnnotationClose) {
            self.bump();
            Ok(())
        } else {
            Err(self.error("end of annotation"))
        }
    }

    fn logic_type(&mut self) -> PResult<()> {
        if self.eat(TokenKind::Keyword, "int") || self.eat(TokenKind::AnnotationKeyword, "integer")
        {
            Ok(())
        } else {
            Err(self.error("type 'int' or 'integer'"))
        }
    }

    fn global_decls(&mut self, out: &mut Vec<LogicDecl>) -> PResult<()> {
        while !self.at_kind(TokenKind::AnnotationClose) {
            if self.peek().is_none() {
                return Err(self.error("end of annotation"));
            }
            self.global_decl(out)?;
        }
        Ok(())
    }

    fn global_decl(&mut self, out: &mut Vec<LogicDecl>) -> PResult<()> {
        let start = self.here();
        if self.eat(TokenKind::AnnotationKeyword, "logic") {
            self.logic_type()?;
            let (name, _) = self.ident("logic function name")?;
            self.expect_punct("(")?;
            let mut params = Vec::new();
            if !self.at_punct(")") {
                loop {
                    self.logic_type()?;
                    params.push(self.ident("parameter name")?.0);
                    if !self.eat(TokenKind::Punctuation, ",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
            let end = self.expect_punct(";")?.span;
            out.push(LogicDecl::Function {
                name,
                params,
                span: start.to(end),
            });
        } else if self.eat(TokenKind::AnnotationKeyword, "lemma") {
            let (name, _) = self.ident("lemma name")?;
            self.expect_punct(":")?;
            let pred = self.expr()?;
            let end = self.expect_punct(";")?.span;
            out.push(LogicDecl::Lemma {
                name,
                pred,
                span: start.to(end),
            });
        } else if self.eat(TokenKind::AnnotationKeyword, "axiomatic") {
            self.ident("axiomatic block name")?;
            self.expect_punct("{")?;
            self.enter()?;
            while !self.eat(TokenKind::Punctuation, "}") {
                if !(self.at_akw("logic") || self.at_akw("lemma") || self.at_akw("axiomatic")) {
                    return Err(self.error("'logic', 'lemma' or '}'"));
                }
                self.global_decl(out)?;
            }
            self.leave();
        } else {
            return Err(self.error("'logic', 'lemma' or 'axiomatic'"));
        }
        Ok(())
    }

    fn contract(&mut self, mut c: Contract) -> PResult<Contract> {
        let mut behavior: Option<Ident> = None;
        while !self.at_kind(TokenKind::AnnotationClose) {
            let start = self.here();
            if self.eat(TokenKind::AnnotationKeyword, "ensures") {
                let pred = self.expr()?;
                let end = self.expect_punct(";")?.span;
                c.ensures.push(Ensures {
                    pred,
                    behavior: behavior.clone(),
                    span: start.to(end),
                });
            } else if self.eat(TokenKind::AnnotationKeyword, "behavior") {
                behavior = Some(self.ident("behavior name")?.0);
                self.expect_punct(":")?;
            } else if behavior.is_some() {
                return Err(self.error("'ensures' or 'behavior' inside a behavior"));
            } else if self.eat(TokenKind::AnnotationKeyword, "requires") {
                let pred = self.expr()?;
                let end = self.expect_punct(";")?.span;
                c.requires.push(Clause {
                    pred,
                    span: start.to(end),
                });
            } else if self.eat(TokenKind::AnnotationKeyword, "assigns") {
                if !self.eat(TokenKind::AnnotationKeyword, "\\nothing") {
                    return Err(self.error("'\\nothing' (only 'assigns \\nothing' is supported)"));
                }
                self.expect_punct(";")?;
                c.assigns_nothing = true;
            } else if self.eat(TokenKind::AnnotationKeyword, "relational") {
                let (name, _) = self.ident("relational property name")?;
                self.expect_punct(":")?;
                let pred = self.expr()?;
                let end = self.expect_punct(";")?.span;
                let (binders, body) = match pred {
                    Expr::Quant(Quantifier::Forall, vs, body) => (vs, *body),
                    other => (Vec::new(), other),
                };
                c.relational.push(RelationalProperty {
                    name,
                    binders,
                    body,
                    span: start.to(end),
                });
            } else {
                return Err(self.error(
                    "'requires', 'ensures', 'assigns', 'relational' or 'behavior'",
                ));
            }
        }
        Ok(c)
    }

    fn function(&mut self, contract: Contract) -> PResult<FunctionDef> {
        let start = self.expect(TokenKind::Keyword, "int")?.span;
        let (name, _) = self.ident("function name")?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.eat(TokenKind::Punctuation, ")") {
            loop {
                if !self.eat(TokenKind::Keyword, "int") {
                    return Err(if params.is_empty() {
                        self.error("parameter or ')'")
                    } else {
                        self.error("parameter")
                    });
                }
                params.push(self.ident("parameter name")?.0);
                if self.eat(TokenKind::Punctuation, ",") {
                    continue;
                }
                if self.eat(TokenKind::Punctuation, ")") {
                    break;
                }
                return Err(self.error("',' or ')'"));
            }
        }
        let (body, end) = if self.at_punct(";") {
            (None, self.bump().span)
        } else if self.at_punct("{") {
            let (b, end) = self.block()?;
            (Some(b), end)
        } else {
            return Err(self.error("'{' or ';'"));
        };
        Ok(FunctionDef {
            name,
            params,
            body,
            contract,
            span: start.to(end),
        })
    }

    fn block(&mut self) -> PResult<(Block, Span)> {
        self.enter()?;
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.at_punct("}") {
            if self.peek().is_none() {
                return Err(self.error("statement or '}'"));
            }
            self.statement(&mut stmts)?;
        }
        let end = self.bump().span;
        self.leave();
        Ok((Block::new(stmts), end))
    }

    /// A statement in a branch or loop body: braces optional.
    fn body(&mut self) -> PResult<(Block, Span)> {
        if self.at_punct("{") {
            self.block()
        } else {
            let mut stmts = Vec::new();
            self.enter()?;
            self.statement(&mut stmts)?;
            self.leave();
            let end = stmts.last().map_or(self.here(), |s: &Stmt| s.span);
            Ok((Block::new(stmts), end))
        }
    }

    fn statement(&mut self, out: &mut Vec<Stmt>) -> PResult<()> {
        let start = self.here();
        let Some(tok) = self.peek() else {
            return Err(self.error("statement"));
        };
        match tok.kind {
            TokenKind::AnnotationOpen => {
                self.bump();
                if self.at_akw("loop") {
                    let mut invariants = Vec::new();
                    while self.eat(TokenKind::AnnotationKeyword, "loop") {
                        self.expect(TokenKind::AnnotationKeyword, "invariant")?;
                        invariants.push(self.expr()?);
                        self.expect_punct(";")?;
                    }
                    self.expect_close()?;
                    if !self.at(TokenKind::Keyword, "while") {
                        return Err(self.error("'while' after loop annotation"));
                    }
                    let mut s = self.while_loop(invariants)?;
                    s.span = start.to(s.span);
                    out.push(s);
                    return Ok(());
                }
                let mut any = false;
                while self.at_akw("assert") {
                    let a = self.bump().span;
                    let label = if self.at_kind(TokenKind::Identifier)
                        && self
                            .peek_at(1)
                            .is_some_and(|t| t.is(TokenKind::Punctuation, ":"))
                    {
                        let l = self.bump().lexeme.clone();
                        self.bump();
                        Some(l)
                    } else {
                        None
                    };
                    let pred = self.expr()?;
                    let end = self.expect_punct(";")?.span;
                    out.push(Stmt {
                        kind: StmtKind::Assert { label, pred },
                        span: a.to(end),
                    });
                    any = true;
                }
                if !any {
                    return Err(self.error("'assert' or 'loop invariant'"));
                }
                self.expect_close()
            }
            TokenKind::Keyword => match tok.lexeme.as_str() {
                "int" => {
                    self.bump();
                    let (name, _) = self.ident("variable name")?;
                    let init = if self.eat(TokenKind::Operator, "=") {
                        Some(self.expr()?)
                    } else {
                        None
                    };
                    let end = self.expect_punct(";")?.span;
                    out.push(Stmt {
                        kind: StmtKind::Decl { name, init },
                        span: start.to(end),
                    });
                    Ok(())
                }
                "if" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let cond = self.expr()?;
                    self.expect_punct(")")?;
                    let (then_branch, mut end) = self.body()?;
                    let else_branch = if self.eat(TokenKind::Keyword, "else") {
                        let (b, e) = self.body()?;
                        end = e;
                        Some(b)
                    } else {
                        None
                    };
                    out.push(Stmt {
                        kind: StmtKind::If {
                            cond,
                            then_branch,
                            else_branch,
                        },
                        span: start.to(end),
                    });
                    Ok(())
                }
                "while" => {
                    let s = self.while_loop(Vec::new())?;
                    out.push(s);
                    Ok(())
                }
                "return" => {
                    self.bump();
                    let e = self.expr()?;
                    let end = self.expect_punct(";")?.span;
                    out.push(Stmt {
                        kind: StmtKind::Return(e),
                        span: start.to(end),
                    });
                    Ok(())
                }
                _ => Err(self.error("statement")),
            },
            TokenKind::Punctuation if tok.lexeme == "{" => {
                let (b, end) = self.block()?;
                out.push(Stmt {
                    kind: StmtKind::Block(b),
                    span: start.to(end),
                });
                Ok(())
            }
            TokenKind::Identifier => {
                let (name, _) = self.ident("variable")?;
                if !self.eat(TokenKind::Operator, "=") {
                    return Err(self.error("'='"));
                }
                let value = self.expr()?;
                let end = self.expect_punct(";")?.span;
                out.push(Stmt {
                    kind: StmtKind::Assign { name, value },
                    span: start.to(end),
                });
                Ok(())
            }
            _ => Err(self.error("statement")),
        }
    }

    fn while_loop(&mut self, mut invariants: Vec<Expr>) -> PResult<Stmt> {
        let start = self.expect(TokenKind::Keyword, "while")?.span;
        self.expect_punct("(")?;
        let cond = self.expr()?;
        self.expect_punct(")")?;
        // Also accept the annotation between the condition and the body.
        if self.at_kind(TokenKind::AnnotationOpen)
            && self
                .peek_at(1)
                .is_some_and(|t| t.is(TokenKind::AnnotationKeyword, "loop"))
        {
            self.bump();
            while self.eat(TokenKind::AnnotationKeyword, "loop") {
                self.expect(TokenKind::AnnotationKeyword, "invariant")?;
                invariants.push(self.expr()?);
                self.expect_punct(";")?;
            }
            self.expect_close()?;
        }
        let (body, end) = self.body()?;
        Ok(Stmt {
            kind: StmtKind::While {
                cond,
                invariants,
                body,
            },
            span: start.to(end),
        })
    }

    // Expressions, lowest precedence first.

    pub(super) fn expr(&mut self) -> PResult<Expr> {
        self.enter()?;
        let e = self.iff();
        self.leave();
        e
    }

    fn iff(&mut self) -> PResult<Expr> {
        let mut lhs = self.implies()?;
        while self.eat(TokenKind::Operator, "<==>") {
            let rhs = self.implies()?;
            lhs = Expr::binary(BinOp::Iff, lhs, rhs);
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> PResult<Expr> {
        let lhs = self.or()?;
        if self.eat(TokenKind::Operator, "==>") {
            self.enter()?;
            let rhs = self.implies()?;
            self.leave();
            Ok(Expr::binary(BinOp::Implies, lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn or(&mut self) -> PResult<Expr> {
        let mut lhs = self.and()?;
        while self.eat(TokenKind::Operator, "||") {
            let rhs = self.and()?;
            lhs = Expr::binary(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> PResult<Expr> {
        let mut lhs = self.comparison()?;
        while self.eat(TokenKind::Operator, "&&") {
            let rhs = self.comparison()?;
            lhs = Expr::binary(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn comparison_op(&self) -> Option<BinOp> {
        let t = self.peek()?;
        if t.kind != TokenKind::Operator {
            return None;
        }
        Some(match t.lexeme.as_str() {
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            _ => return None,
        })
    }

    /// Chained comparisons `a < b <= c` mean `a < b && b <= c`.
    fn comparison(&mut self) -> PResult<Expr> {
        let first = self.additive()?;
        let mut operands = vec![first];
        let mut ops = Vec::new();
        while let Some(op) = self.comparison_op() {
            self.bump();
            ops.push(op);
            operands.push(self.additive()?);
        }
        if ops.is_empty() {
            return Ok(operands.pop().unwrap());
        }
        let mut result: Option<Expr> = None;
        for (i, op) in ops.into_iter().enumerate() {
            let cmp = Expr::binary(op, operands[i].clone(), operands[i + 1].clone());
            result = Some(match result {
                None => cmp,
                Some(acc) => Expr::binary(BinOp::And, acc, cmp),
            });
        }
        Ok(result.unwrap())
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = if self.at_op("+") {
                BinOp::Add
            } else if self.at_op("-") {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = self.multiplicative()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.at_op("*") {
                BinOp::Mul
            } else if self.at_op("/") {
                BinOp::Div
            } else if self.at_op("%") {
                BinOp::Rem
            } else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.at_op("-") {
            self.bump();
            if self.at_kind(TokenKind::IntLiteral) {
                let t = self.bump();
                // The lexer guarantees the literal fits.
                let n: i64 = t.lexeme.parse().unwrap_or(0);
                return Ok(Expr::Int(-n));
            }
            self.enter()?;
            let e = self.unary()?;
            self.leave();
            return Ok(Expr::Unary(UnOp::Neg, Box::new(e)));
        }
        if self.at_op("!") {
            self.bump();
            self.enter()?;
            let e = self.unary()?;
            self.leave();
            return Ok(Expr::Unary(UnOp::Not, Box::new(e)));
        }
        self.primary()
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        let mut args = Vec::new();
        if self.eat(TokenKind::Punctuation, ")") {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat(TokenKind::Punctuation, ",") {
                continue;
            }
            self.expect_punct(")")?;
            return Ok(args);
        }
    }

    fn binders(&mut self) -> PResult<Vec<Ident>> {
        let mut vars = Vec::new();
        self.logic_type()?;
        loop {
            vars.push(self.ident("bound variable")?.0);
            if !self.eat(TokenKind::Punctuation, ",") {
                break;
            }
            if self.at(TokenKind::Keyword, "int") || self.at_akw("integer") {
                self.bump();
            }
        }
        self.expect_punct(";")?;
        Ok(vars)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let Some(tok) = self.peek() else {
            return Err(self.error("expression"));
        };
        match tok.kind {
            TokenKind::IntLiteral => {
                self.bump();
                Ok(Expr::Int(tok.lexeme.parse().unwrap_or(0)))
            }
            TokenKind::Identifier => {
                self.bump();
                if self.eat(TokenKind::Punctuation, "(") {
                    let args = self.args()?;
                    Ok(Expr::App(tok.lexeme.clone(), args))
                } else {
                    Ok(Expr::Var(tok.lexeme.clone()))
                }
            }
            TokenKind::Punctuation if tok.lexeme == "(" => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            TokenKind::AnnotationKeyword => match tok.lexeme.as_str() {
                "\\result" => {
                    self.bump();
                    Ok(Expr::Result)
                }
                "\\true" => {
                    self.bump();
                    Ok(Expr::Bool(true))
                }
                "\\false" => {
                    self.bump();
                    Ok(Expr::Bool(false))
                }
                "\\call" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let (callee, _) = self.ident("function name")?;
                    let args = if self.eat(TokenKind::Punctuation, ",") {
                        self.args()?
                    } else {
                        self.expect_punct(")")?;
                        Vec::new()
                    };
                    Ok(Expr::Call(CallTerm { callee, args }))
                }
                "\\forall" | "\\exists" => {
                    let q = if tok.lexeme == "\\forall" {
                        Quantifier::Forall
                    } else {
                        Quantifier::Exists
                    };
                    self.bump();
                    let vars = self.binders()?;
                    let body = self.expr()?;
                    Ok(Expr::Quant(q, vars, Box::new(body)))
                }
                _ => Err(self.error("expression")),
            },
            _ => Err(self.error("expression")),
        }
    }
}
