//! Recursive-descent parser for the supported subset.
//!
//! Unsupported syntax (modules, classes, generators, async/await, regex
//! literals, `switch`, `do`, `for-in/of`, destructuring, spread) is rejected
//! with a [`SyntaxError`] rather than parsed partially.

use super::ast::*;
use super::lexer::{Lexer, Token, TokenKind};
use super::SyntaxError;

const RESERVED: &[&str] = &[
    "break",
    "case",
    "catch",
    "class",
    "const",
    "continue",
    "debugger",
    "default",
    "delete",
    "do",
    "else",
    "enum",
    "export",
    "extends",
    "false",
    "finally",
    "for",
    "function",
    "if",
    "import",
    "in",
    "instanceof",
    "let",
    "new",
    "null",
    "return",
    "super",
    "switch",
    "this",
    "throw",
    "true",
    "try",
    "typeof",
    "var",
    "void",
    "while",
    "with",
    "yield",
    "await",
];

/// Statement keywords outside the subset.
const UNSUPPORTED_STATEMENTS: &[&str] = &[
    "class", "import", "export", "switch", "do", "with", "debugger", "yield", "await",
];

pub fn is_reserved(name: &str) -> bool {
    RESERVED.contains(&name)
}

pub struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Token,
    prev_end: u32,
    ids: NodeIdGen,
    depth: usize,
}

#[derive(Clone)]
struct Checkpoint<'a> {
    lexer: Lexer<'a>,
    tok: Token,
    prev_end: u32,
    next_id: u32,
}

// Deep nesting is reported as a syntax error instead of overflowing the stack.
const MAX_DEPTH: usize = 400;

impl<'a> Parser<'a> {
    pub fn new(src: &'a str) -> Result<Self, SyntaxError> {
        let mut lexer = Lexer::new(src);
        let tok = lexer.next_token()?;
        Ok(Parser {
            lexer,
            tok,
            prev_end: 0,
            ids: NodeIdGen::default(),
            depth: 0,
        })
    }

    pub fn parse_program(mut self) -> Result<Program, SyntaxError> {
        let id = self.ids.fresh();
        let mut body = Vec::new();
        while self.tok.kind != TokenKind::Eof {
            body.push(self.parse_statement()?);
        }
        let len = self.lexer.source().len() as u32;
        Ok(Program {
            id,
            span: Span::new(0, len),
            body,
            next_id: self.ids.peek(),
        })
    }

    // ----- token helpers -------------------------------------------------

    fn advance(&mut self) -> Result<Token, SyntaxError> {
        let next = self.lexer.next_token()?;
        let prev = std::mem::replace(&mut self.tok, next);
        self.prev_end = prev.end;
        Ok(prev)
    }

    fn checkpoint(&self) -> Checkpoint<'a> {
        Checkpoint {
            lexer: self.lexer.clone(),
            tok: self.tok.clone(),
            prev_end: self.prev_end,
            next_id: self.ids.peek(),
        }
    }

    fn restore(&mut self, cp: Checkpoint<'a>) {
        self.lexer = cp.lexer;
        self.tok = cp.tok;
        self.prev_end = cp.prev_end;
        self.ids = NodeIdGen::starting_at(cp.next_id);
    }

    fn error(&self, expected: &str) -> SyntaxError {
        self.lexer
            .error_at(self.tok.start as usize, expected, &self.tok.describe())
    }

    fn eat_punct(&mut self, p: &str) -> Result<bool, SyntaxError> {
        if self.tok.is_punct(p) {
            self.advance()?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<Token, SyntaxError> {
        if self.tok.is_punct(p) {
            self.advance()
        } else {
            Err(self.error(&format!("`{p}`")))
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> Result<bool, SyntaxError> {
        if self.tok.is_ident(kw) {
            self.advance()?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<Token, SyntaxError> {
        if self.tok.is_ident(kw) {
            self.advance()
        } else {
            Err(self.error(&format!("`{kw}`")))
        }
    }

    fn consume_semicolon(&mut self) -> Result<(), SyntaxError> {
        if self.eat_punct(";")? {
            return Ok(());
        }
        if self.tok.is_punct("}") || self.tok.kind == TokenKind::Eof || self.tok.newline_before {
            return Ok(());
        }
        Err(self.error("`;`"))
    }

    fn binding_ident(&mut self) -> Result<Ident, SyntaxError> {
        match &self.tok.kind {
            TokenKind::Ident(name) if !is_reserved(name) => {
                let name = name.clone();
                let t = self.advance()?;
                Ok(Ident {
                    id: self.ids.fresh(),
                    span: Span::new(t.start, t.end),
                    name,
                })
            }
            TokenKind::Punct("[") | TokenKind::Punct("{") => {
                Err(self.error("identifier (destructuring is not supported)"))
            }
            _ => Err(self.error("identifier")),
        }
    }

    fn enter(&mut self) -> Result<(), SyntaxError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error("shallower nesting"));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    // ----- statements ----------------------------------------------------

    fn parse_statement(&mut self) -> Result<Stmt, SyntaxError> {
        self.enter()?;
        let r = self.parse_statement_inner();
        self.leave();
        r
    }

    fn parse_statement_inner(&mut self) -> Result<Stmt, SyntaxError> {
        let start = self.tok.start;
        if let TokenKind::Ident(word) = &self.tok.kind {
            let word = word.clone();
            if UNSUPPORTED_STATEMENTS.contains(&word.as_str()) {
                return Err(self.error(&format!(
                    "a supported statement (`{word}` is not supported)"
                )));
            }
            match word.as_str() {
                "var" | "let" | "const" => {
                    let decl = self.parse_var_decl()?;
                    self.consume_semicolon()?;
                    return Ok(self.finish_stmt(start, StmtKind::VarDecl(decl)));
                }
                "function" => {
                    let f = self.parse_function(start, true)?;
                    return Ok(self.finish_stmt(start, StmtKind::FunctionDecl(f)));
                }
                "async" => {
                    let cp = self.checkpoint();
                    self.advance()?;
                    let is_async_fn = self.tok.is_ident("function") && !self.tok.newline_before;
                    self.restore(cp);
                    if is_async_fn {
                        return Err(
                            self.error("a supported statement (async functions are not supported)")
                        );
                    }
                }
                "if" => return self.parse_if(start),
                "for" => return self.parse_for(start),
                "while" => {
                    self.advance()?;
                    self.expect_punct("(")?;
                    let test = self.parse_expression()?;
                    self.expect_punct(")")?;
                    let body = Box::new(self.parse_statement()?);
                    return Ok(self.finish_stmt(start, StmtKind::While { test, body }));
                }
                "return" => {
                    self.advance()?;
                    let arg = if self.tok.is_punct(";")
                        || self.tok.is_punct("}")
                        || self.tok.kind == TokenKind::Eof
                        || self.tok.newline_before
                    {
                        None
                    } else {
                        Some(self.parse_expression()?)
                    };
                    self.consume_semicolon()?;
                    return Ok(self.finish_stmt(start, StmtKind::Return(arg)));
                }
                "break" | "continue" => {
                    self.advance()?;
                    let label = match &self.tok.kind {
                        TokenKind::Ident(n) if !self.tok.newline_before && !is_reserved(n) => {
                            Some(self.binding_ident()?)
                        }
                        _ => None,
                    };
                    self.consume_semicolon()?;
                    let kind = if word == "break" {
                        StmtKind::Break(label)
                    } else {
                        StmtKind::Continue(label)
                    };
                    return Ok(self.finish_stmt(start, kind));
                }
                "throw" => {
                    self.advance()?;
                    if self.tok.newline_before {
                        return Err(self.error("expression on the same line as `throw`"));
                    }
                    let arg = self.parse_expression()?;
                    self.consume_semicolon()?;
                    return Ok(self.finish_stmt(start, StmtKind::Throw(arg)));
                }
                "try" => return self.parse_try(start),
                _ => {}
            }
        }
        if self.tok.is_punct("{") {
            let body = self.parse_block()?;
            return Ok(self.finish_stmt(start, StmtKind::Block(body)));
        }
        if self.eat_punct(";")? {
            return Ok(self.finish_stmt(start, StmtKind::Empty));
        }

        let expr = self.parse_expression()?;
        if self.tok.is_punct(":") {
            if let ExprKind::Ident(name) = &expr.kind {
                if !is_reserved(name) {
                    let label = Ident {
                        id: expr.id,
                        span: expr.span,
                        name: name.clone(),
                    };
                    self.advance()?;
                    let body = Box::new(self.parse_statement()?);
                    return Ok(self.finish_stmt(start, StmtKind::Labeled { label, body }));
                }
            }
        }
        self.consume_semicolon()?;
        Ok(self.finish_stmt(start, StmtKind::Expr(expr)))
    }

    fn finish_stmt(&mut self, start: u32, kind: StmtKind) -> Stmt {
        Stmt {
            id: self.ids.fresh(),
            span: Span::new(start, self.prev_end),
            kind,
        }
    }

    fn parse_block(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        self.expect_punct("{")?;
        let mut body = Vec::new();
        while !self.tok.is_punct("}") {
            if self.tok.kind == TokenKind::Eof {
                return Err(self.error("`}`"));
            }
            body.push(self.parse_statement()?);
        }
        self.advance()?;
        Ok(body)
    }

    fn parse_var_decl(&mut self) -> Result<VarDecl, SyntaxError> {
        let kind = match self.advance()?.kind {
            TokenKind::Ident(ref k) if k == "var" => DeclKind::Var,
            TokenKind::Ident(ref k) if k == "let" => DeclKind::Let,
            _ => DeclKind::Const,
        };
        let mut declarators = Vec::new();
        loop {
            let start = self.tok.start;
            let name = self.binding_ident()?;
            let init = if self.eat_punct("=")? {
                Some(self.parse_assignment()?)
            } else {
                None
            };
            declarators.push(Declarator {
                id: self.ids.fresh(),
                span: Span::new(start, self.prev_end),
                name,
                init,
            });
            if !self.eat_punct(",")? {
                break;
            }
        }
        Ok(VarDecl { kind, declarators })
    }

    fn parse_if(&mut self, start: u32) -> Result<Stmt, SyntaxError> {
        self.advance()?;
        self.expect_punct("(")?;
        let test = self.parse_expression()?;
        self.expect_punct(")")?;
        let consequent = Box::new(self.parse_statement()?);
        let alternate = if self.eat_keyword("else")? {
            Some(Box::new(self.parse_statement()?))
        } else {
            None
        };
        Ok(self.finish_stmt(
            start,
            StmtKind::If {
                test,
                consequent,
                alternate,
            },
        ))
    }

    fn parse_for(&mut self, start: u32) -> Result<Stmt, SyntaxError> {
        self.advance()?;
        if self.tok.is_ident("await") {
            return Err(self.error("`(` (for-await is not supported)"));
        }
        self.expect_punct("(")?;
        let init = if self.tok.is_punct(";") {
            None
        } else if self.tok.is_ident("var") || self.tok.is_ident("let") || self.tok.is_ident("const")
        {
            Some(ForInit::Decl(self.parse_var_decl()?))
        } else {
            Some(ForInit::Expr(self.parse_expression()?))
        };
        let bare_in = matches!(
            &init,
            Some(ForInit::Expr(Expr {
                kind: ExprKind::Binary {
                    op: BinaryOp::In,
                    ..
                },
                ..
            }))
        ) && self.tok.is_punct(")");
        if bare_in || self.tok.is_ident("of") || self.tok.is_ident("in") {
            return Err(self.error("`;` (for-in/for-of loops are not supported)"));
        }
        self.expect_punct(";")?;
        let test = if self.tok.is_punct(";") {
            None
        } else {
            Some(self.parse_expression()?)
        };
        self.expect_punct(";")?;
        let update = if self.tok.is_punct(")") {
            None
        } else {
            Some(self.parse_expression()?)
        };
        self.expect_punct(")")?;
        let body = Box::new(self.parse_statement()?);
        Ok(self.finish_stmt(
            start,
            StmtKind::For {
                init,
                test,
                update,
                body,
            },
        ))
    }

    fn parse_try(&mut self, start: u32) -> Result<Stmt, SyntaxError> {
        self.advance()?;
        let block = self.parse_block()?;
        let handler = if self.eat_keyword("catch")? {
            let param = if self.eat_punct("(")? {
                let p = self.binding_ident()?;
                self.expect_punct(")")?;
                Some(p)
            } else {
                None
            };
            let body = self.parse_block()?;
            Some(CatchClause { param, body })
        } else {
            None
        };
        let finalizer = if self.eat_keyword("finally")? {
            Some(self.parse_block()?)
        } else {
            None
        };
        if handler.is_none() && finalizer.is_none() {
            return Err(self.error("`catch` or `finally`"));
        }
        Ok(self.finish_stmt(
            start,
            StmtKind::Try {
                block,
                handler,
                finalizer,
            },
        ))
    }

    /// Parses `function name?(params) { body }` starting at the keyword.
    fn parse_function(&mut self, start: u32, require_name: bool) -> Result<Function, SyntaxError> {
        self.expect_keyword("function")?;
        if self.tok.is_punct("*") {
            return Err(self.error("function name (generators are not supported)"));
        }
        let name = if require_name || !self.tok.is_punct("(") {
            Some(self.binding_ident()?)
        } else {
            None
        };
        let params = self.parse_params()?;
        let body = self.parse_block()?;
        Ok(Function {
            id: self.ids.fresh(),
            span: Span::new(start, self.prev_end),
            name,
            params,
            body: FunctionBody::Block(body),
            is_arrow: false,
        })
    }

    fn parse_params(&mut self) -> Result<Vec<Ident>, SyntaxError> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        while !self.tok.is_punct(")") {
            if self.tok.is_punct("...") {
                return Err(self.error("parameter (rest parameters are not supported)"));
            }
            params.push(self.binding_ident()?);
            if self.tok.is_punct("=") {
                return Err(self.error("`,` or `)` (default parameters are not supported)"));
            }
            if !self.eat_punct(",")? {
                break;
            }
        }
        self.expect_punct(")")?;
        Ok(params)
    }

    // ----- expressions ---------------------------------------------------

    pub fn parse_expression(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.tok.start;
        let first = self.parse_assignment()?;
        if !self.tok.is_punct(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_punct(",")? {
            items.push(self.parse_assignment()?);
        }
        Ok(self.finish_expr(start, ExprKind::Sequence(items)))
    }

    fn finish_expr(&mut self, start: u32, kind: ExprKind) -> Expr {
        Expr {
            id: self.ids.fresh(),
            span: Span::new(start, self.prev_end),
            kind,
        }
    }

    fn parse_assignment(&mut self) -> Result<Expr, SyntaxError> {
        self.enter()?;
        let r = self.parse_assignment_inner();
        self.leave();
        r
    }

    fn parse_assignment_inner(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.tok.start;
        if let Some(arrow) = self.try_parse_arrow()? {
            return Ok(arrow);
        }
        if self.tok.is_ident("yield") || self.tok.is_ident("await") {
            return Err(self.error("expression (`yield`/`await` are not supported)"));
        }
        let left = self.parse_conditional()?;
        if let TokenKind::Punct(p) = self.tok.kind {
            if let Some(op) = AssignOp::from_token(p) {
                if !matches!(left.kind, ExprKind::Ident(_) | ExprKind::Member { .. }) {
                    return Err(self.error("`;` (invalid assignment target)"));
                }
                self.advance()?;
                let value = self.parse_assignment()?;
                return Ok(self.finish_expr(
                    start,
                    ExprKind::Assign {
                        op,
                        target: Box::new(left),
                        value: Box::new(value),
                    },
                ));
            }
            if matches!(p, "**=" | "&&=" | "||=" | "??=") {
                return Err(self.error("a supported assignment operator"));
            }
        }
        Ok(left)
    }

    fn try_parse_arrow(&mut self) -> Result<Option<Expr>, SyntaxError> {
        let start = self.tok.start;
        if self.tok.is_ident("async") {
            let cp = self.checkpoint();
            self.advance()?;
            let arrowish = !self.tok.newline_before
                && (self.tok.is_punct("(") || matches!(self.tok.kind, TokenKind::Ident(_)))
                && self.looks_like_arrow_after()?;
            self.restore(cp);
            if arrowish {
                return Err(self.error("expression (async arrow functions are not supported)"));
            }
        }
        let params = match &self.tok.kind {
            TokenKind::Ident(name) if !is_reserved(name) => {
                let cp = self.checkpoint();
                let p = self.binding_ident()?;
                if self.tok.is_punct("=>") && !self.tok.newline_before {
                    vec![p]
                } else {
                    self.restore(cp);
                    return Ok(None);
                }
            }
            TokenKind::Punct("(") => {
                let cp = self.checkpoint();
                match self.parse_params() {
                    Ok(p) if self.tok.is_punct("=>") && !self.tok.newline_before => p,
                    _ => {
                        self.restore(cp);
                        return Ok(None);
                    }
                }
            }
            _ => return Ok(None),
        };
        self.expect_punct("=>")?;
        let body = if self.tok.is_punct("{") {
            FunctionBody::Block(self.parse_block()?)
        } else {
            FunctionBody::Expr(Box::new(self.parse_assignment()?))
        };
        let func = Function {
            id: self.ids.fresh(),
            span: Span::new(start, self.prev_end),
            name: None,
            params,
            body,
            is_arrow: true,
        };
        Ok(Some(
            self.finish_expr(start, ExprKind::Function(Box::new(func))),
        ))
    }

    fn looks_like_arrow_after(&mut self) -> Result<bool, SyntaxError> {
        if let TokenKind::Ident(_) = self.tok.kind {
            self.advance()?;
            return Ok(self.tok.is_punct("=>"));
        }
        Ok(self.parse_params().is_ok() && self.tok.is_punct("=>"))
    }

    fn parse_conditional(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.tok.start;
        let test = self.parse_binary(0)?;
        if !self.eat_punct("?")? {
            return Ok(test);
        }
        let consequent = self.parse_assignment()?;
        self.expect_punct(":")?;
        let alternate = self.parse_assignment()?;
        Ok(self.finish_expr(
            start,
            ExprKind::Conditional {
                test: Box::new(test),
                consequent: Box::new(consequent),
                alternate: Box::new(alternate),
            },
        ))
    }

    fn current_binary_op(&self) -> Option<BinaryOp> {
        match &self.tok.kind {
            TokenKind::Punct(p) => BinaryOp::from_token(p),
            TokenKind::Ident(w) if w == "in" || w == "instanceof" => BinaryOp::from_token(w),
            _ => None,
        }
    }

    /// Precedence climbing over binary and logical operators.
    fn parse_binary(&mut self, min_prec: u8) -> Result<Expr, SyntaxError> {
        let start = self.tok.start;
        let parenthesized = self.tok.is_punct("(");
        let mut left = self.parse_unary()?;
        while let Some(op) = self.current_binary_op() {
            let prec = op.precedence();
            if prec < min_prec || (prec == min_prec && op != BinaryOp::Exp) {
                break;
            }
            if op == BinaryOp::Exp && !parenthesized && matches!(left.kind, ExprKind::Unary { .. })
            {
                return Err(self.error("parenthesized unary operand before `**`"));
            }
            self.advance()?;
            // `**` is right-associative.
            let right = if op == BinaryOp::Exp {
                self.parse_binary(prec)?
            } else {
                self.parse_binary(prec + 1)?
            };
            left = self.finish_expr(
                start,
                ExprKind::Binary {
                    op,
                    left: Box::new(left),
                    right: Box::new(right),
                },
            );
        }
        Ok(left)
    }

    fn parse_unary(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.tok.start;
        let op = match &self.tok.kind {
            TokenKind::Punct("!") => Some(UnaryOp::Not),
            TokenKind::Punct("-") => Some(UnaryOp::Minus),
            TokenKind::Punct("+") => Some(UnaryOp::Plus),
            TokenKind::Punct("~") => Some(UnaryOp::BitNot),
            TokenKind::Ident(w) if w == "typeof" => Some(UnaryOp::Typeof),
            TokenKind::Ident(w) if w == "void" => Some(UnaryOp::Void),
            TokenKind::Ident(w) if w == "delete" => Some(UnaryOp::Delete),
            TokenKind::Ident(w) if w == "await" => {
                return Err(self.error("expression (`await` is not supported)"));
            }
            _ => None,
        };
        if let Some(op) = op {
            self.advance()?;
            self.enter()?;
            let arg = self.parse_unary();
            self.leave();
            let arg = arg?;
            return Ok(self.finish_expr(
                start,
                ExprKind::Unary {
                    op,
                    arg: Box::new(arg),
                },
            ));
        }
        if self.tok.is_punct("++") || self.tok.is_punct("--") {
            let op = if self.tok.is_punct("++") {
                UpdateOp::Increment
            } else {
                UpdateOp::Decrement
            };
            self.advance()?;
            let arg = self.parse_unary()?;
            if !matches!(arg.kind, ExprKind::Ident(_) | ExprKind::Member { .. }) {
                return Err(self.error("assignable operand for update"));
            }
            return Ok(self.finish_expr(
                start,
                ExprKind::Update {
                    op,
                    prefix: true,
                    arg: Box::new(arg),
                },
            ));
        }
        let expr = self.parse_postfix()?;
        Ok(expr)
    }

    fn parse_postfix(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.tok.start;
        let expr = self.parse_call_member()?;
        if (self.tok.is_punct("++") || self.tok.is_punct("--")) && !self.tok.newline_before {
            if !matches!(expr.kind, ExprKind::Ident(_) | ExprKind::Member { .. }) {
                return Err(self.error("assignable operand for update"));
            }
            let op = if self.tok.is_punct("++") {
                UpdateOp::Increment
            } else {
                UpdateOp::Decrement
            };
            self.advance()?;
            return Ok(self.finish_expr(
                start,
                ExprKind::Update {
                    op,
                    prefix: false,
                    arg: Box::new(expr),
                },
            ));
        }
        Ok(expr)
    }

    fn parse_args(&mut self) -> Result<Vec<Expr>, SyntaxError> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        while !self.tok.is_punct(")") {
            if self.tok.is_punct("...") {
                return Err(self.error("argument (spread is not supported)"));
            }
            args.push(self.parse_assignment()?);
            if !self.eat_punct(",")? {
                break;
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn parse_property_name(&mut self) -> Result<Ident, SyntaxError> {
        match &self.tok.kind {
            TokenKind::Ident(name) => {
                let name = name.clone();
                let t = self.advance()?;
                Ok(Ident {
                    id: self.ids.fresh(),
                    span: Span::new(t.start, t.end),
                    name,
                })
            }
            TokenKind::Punct("#") => {
                Err(self.error("property name (private names are not supported)"))
            }
            _ => Err(self.error("property name")),
        }
    }

    /// Applies one `.name` / `[expr]` suffix; returns the input unchanged
    /// (and `false`) when the current token starts no member access.
    fn parse_member_suffix(
        &mut self,
        start: u32,
        object: Expr,
    ) -> Result<(Expr, bool), SyntaxError> {
        if self.eat_punct(".")? {
            let name = self.parse_property_name()?;
            let e = self.finish_expr(
                start,
                ExprKind::Member {
                    object: Box::new(object),
                    property: MemberProp::Static(name),
                },
            );
            return Ok((e, true));
        }
        if self.eat_punct("[")? {
            let prop = self.parse_expression()?;
            self.expect_punct("]")?;
            let e = self.finish_expr(
                start,
                ExprKind::Member {
                    object: Box::new(object),
                    property: MemberProp::Computed(Box::new(prop)),
                },
            );
            return Ok((e, true));
        }
        if self.tok.is_punct("?.") {
            return Err(self.error("member access (optional chaining is not supported)"));
        }
        if matches!(self.tok.kind, TokenKind::Template { .. }) {
            return Err(self.error("`;` (tagged templates are not supported)"));
        }
        Ok((object, false))
    }

    fn parse_call_member(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.tok.start;
        let mut expr = if self.tok.is_ident("new") {
            self.parse_new()?
        } else {
            self.parse_primary()?
        };
        loop {
            if self.tok.is_punct("(") {
                let args = self.parse_args()?;
                expr = self.finish_expr(
                    start,
                    ExprKind::Call {
                        callee: Box::new(expr),
                        args,
                    },
                );
                continue;
            }
            let (next, more) = self.parse_member_suffix(start, expr)?;
            expr = next;
            if !more {
                return Ok(expr);
            }
        }
    }

    /// `new Callee(args?)` where Callee is a member chain without calls.
    fn parse_new(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.tok.start;
        self.expect_keyword("new")?;
        if self.tok.is_punct(".") {
            return Err(self.error("constructor (`new.target` is not supported)"));
        }
        self.enter()?;
        let callee = if self.tok.is_ident("new") {
            self.parse_new()
        } else {
            self.parse_primary()
        };
        self.leave();
        let mut callee = callee?;
        let callee_start = callee.span.start;
        loop {
            let (next, more) = self.parse_member_suffix(callee_start, callee)?;
            callee = next;
            if !more {
                break;
            }
        }
        let args = if self.tok.is_punct("(") {
            self.parse_args()?
        } else {
            Vec::new()
        };
        Ok(self.finish_expr(
            start,
            ExprKind::New {
                callee: Box::new(callee),
                args,
            },
        ))
    }

    fn parse_primary(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.tok.start;
        let kind = match self.tok.kind.clone() {
            TokenKind::Number(n) => {
                self.advance()?;
                ExprKind::Number(n)
            }
            TokenKind::String(s) => {
                self.advance()?;
                ExprKind::String(s)
            }
            TokenKind::Template { cooked, tail } => self.advance_template(start, cooked, tail)?,
            TokenKind::Punct("(") => {
                self.advance()?;
                let mut inner = self.parse_expression()?;
                self.expect_punct(")")?;
                // Parentheses are not nodes; widen the span to keep children nested.
                inner.span = Span::new(start, self.prev_end);
                return Ok(inner);
            }
            TokenKind::Punct("[") => {
                self.advance()?;
                let mut items = Vec::new();
                while !self.tok.is_punct("]") {
                    if self.tok.is_punct(",") {
                        return Err(self.error("array element (holes are not supported)"));
                    }
                    if self.tok.is_punct("...") {
                        return Err(self.error("array element (spread is not supported)"));
                    }
                    items.push(self.parse_assignment()?);
                    if !self.eat_punct(",")? {
                        break;
                    }
                }
                self.expect_punct("]")?;
                ExprKind::Array(items)
            }
            TokenKind::Punct("{") => {
                self.advance()?;
                ExprKind::Object(self.parse_object_body()?)
            }
            TokenKind::Punct("/") | TokenKind::Punct("/=") => {
                return Err(
                    self.error("expression (regular expression literals are not supported)")
                );
            }
            TokenKind::Ident(word) => match word.as_str() {
                "true" | "false" => {
                    self.advance()?;
                    ExprKind::Bool(word == "true")
                }
                "null" => {
                    self.advance()?;
                    ExprKind::Null
                }
                "this" => {
                    self.advance()?;
                    ExprKind::This
                }
                "function" => {
                    let f = self.parse_function(start, false)?;
                    ExprKind::Function(Box::new(f))
                }
                "class" | "super" | "import" | "yield" | "await" => {
                    return Err(self.error(&format!("expression (`{word}` is not supported)")));
                }
                w if is_reserved(w) => return Err(self.error("expression")),
                _ => {
                    self.advance()?;
                    ExprKind::Ident(word)
                }
            },
            _ => return Err(self.error("expression")),
        };
        Ok(self.finish_expr(start, kind))
    }

    fn advance_template(
        &mut self,
        _start: u32,
        cooked: String,
        tail: bool,
    ) -> Result<ExprKind, SyntaxError> {
        let mut quasis = vec![cooked];
        let mut exprs = Vec::new();
        if tail {
            self.advance()?;
            return Ok(ExprKind::Template { quasis, exprs });
        }
        self.advance()?;
        loop {
            exprs.push(self.parse_expression()?);
            if !self.tok.is_punct("}") {
                return Err(self.error("`}` closing template substitution"));
            }
            let resume = self.tok.end as usize;
            let chunk = self.lexer.continue_template(resume)?;
            let TokenKind::Template { cooked, tail } = chunk.kind.clone() else {
                unreachable!()
            };
            quasis.push(cooked);
            // Make the chunk current, then step past it.
            self.tok = chunk;
            self.advance()?;
            if tail {
                return Ok(ExprKind::Template { quasis, exprs });
            }
        }
    }

    fn parse_object_body(&mut self) -> Result<Vec<Property>, SyntaxError> {
        let mut props = Vec::new();
        while !self.tok.is_punct("}") {
            let start = self.tok.start;
            if self.tok.is_punct("...") {
                return Err(self.error("property (spread is not supported)"));
            }
            if self.tok.is_punct("[") {
                return Err(self.error("property name (computed keys are not supported)"));
            }
            let (key, shorthand_ident) = match self.tok.kind.clone() {
                TokenKind::Ident(name) => {
                    let t = self.advance()?;
                    let ident = Ident {
                        id: NodeId::default(),
                        span: Span::new(t.start, t.end),
                        name: name.clone(),
                    };
                    (PropKey::Ident(name), Some(ident))
                }
                TokenKind::String(s) => {
                    self.advance()?;
                    (PropKey::String(s), None)
                }
                TokenKind::Number(n) => {
                    self.advance()?;
                    (PropKey::Number(n), None)
                }
                _ => return Err(self.error("property name")),
            };
            let (value, shorthand) = if self.eat_punct(":")? {
                (self.parse_assignment()?, false)
            } else if self.tok.is_punct("(") {
                return Err(self.error("`:` (method shorthand is not supported)"));
            } else {
                match shorthand_ident {
                    Some(ident) if !is_reserved(&ident.name) => {
                        if matches!(ident.name.as_str(), "get" | "set" | "async")
                            && !self.tok.is_punct(",")
                            && !self.tok.is_punct("}")
                        {
                            return Err(self.error("`:` (accessors are not supported)"));
                        }
                        let e = Expr {
                            id: self.ids.fresh(),
                            span: ident.span,
                            kind: ExprKind::Ident(ident.name),
                        };
                        (e, true)
                    }
                    _ => return Err(self.error("`:`")),
                }
            };
            props.push(Property {
                id: self.ids.fresh(),
                span: Span::new(start, self.prev_end),
                key,
                value,
                shorthand,
            });
            if !self.eat_punct(",")? {
                break;
            }
        }
        self.expect_punct("}")?;
        Ok(props)
    }
}
