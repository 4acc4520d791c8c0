//! Constructors for synthesized syntax nodes.

use crate::js::*;

pub struct Builder<'g> {
    pub ids: &'g mut NodeIdGen,
}

impl Builder<'_> {
    fn expr(&mut self, kind: ExprKind) -> Expr {
        Expr::new(self.ids.fresh(), Span::SYNTHETIC, kind)
    }

    fn stmt(&mut self, kind: StmtKind) -> Stmt {
        Stmt::new(self.ids.fresh(), Span::SYNTHETIC, kind)
    }

    pub fn ident_node(&mut self, name: &str) -> Ident {
        Ident {
            id: self.ids.fresh(),
            span: Span::SYNTHETIC,
            name: name.to_string(),
        }
    }

    pub fn ident(&mut self, name: &str) -> Expr {
        self.expr(ExprKind::Ident(name.to_string()))
    }

    /// A numeric literal; negative values become unary minus.
    pub fn num(&mut self, v: f64) -> Expr {
        if v.is_nan() {
            return self.ident("NaN");
        }
        if v.is_sign_negative() {
            let arg = self.num(-v);
            return self.unary(UnaryOp::Minus, arg);
        }
        if v.is_infinite() {
            return self.ident("Infinity");
        }
        self.expr(ExprKind::Number(v))
    }

    pub fn string(&mut self, s: &str) -> Expr {
        self.expr(ExprKind::String(s.to_string()))
    }

    pub fn array(&mut self, items: Vec<Expr>) -> Expr {
        self.expr(ExprKind::Array(items))
    }

    pub fn unary(&mut self, op: UnaryOp, arg: Expr) -> Expr {
        self.expr(ExprKind::Unary {
            op,
            arg: Box::new(arg),
        })
    }

    pub fn binary(&mut self, op: BinaryOp, left: Expr, right: Expr) -> Expr {
        self.expr(ExprKind::Binary {
            op,
            left: Box::new(left),
            right: Box::new(right),
        })
    }

    pub fn conditional(&mut self, test: Expr, consequent: Expr, alternate: Expr) -> Expr {
        self.expr(ExprKind::Conditional {
            test: Box::new(test),
            consequent: Box::new(consequent),
            alternate: Box::new(alternate),
        })
    }

    pub fn call(&mut self, callee: Expr, args: Vec<Expr>) -> Expr {
        self.expr(ExprKind::Call {
            callee: Box::new(callee),
            args,
        })
    }

    pub fn call_named(&mut self, name: &str, args: Vec<Expr>) -> Expr {
        let callee = self.ident(name);
        self.call(callee, args)
    }

    pub fn index(&mut self, object: Expr, property: Expr) -> Expr {
        self.expr(ExprKind::Member {
            object: Box::new(object),
            property: MemberProp::Computed(Box::new(property)),
        })
    }

    pub fn assign(&mut self, target: Expr, value: Expr) -> Expr {
        self.expr(ExprKind::Assign {
            op: AssignOp::Assign,
            target: Box::new(target),
            value: Box::new(value),
        })
    }

    pub fn decl(&mut self, kind: DeclKind, name: &str, init: Option<Expr>) -> Stmt {
        let declarator = Declarator {
            id: self.ids.fresh(),
            span: Span::SYNTHETIC,
            name: self.ident_node(name),
            init,
        };
        self.stmt(StmtKind::VarDecl(VarDecl {
            kind,
            declarators: vec![declarator],
        }))
    }

    pub fn const_decl(&mut self, name: &str, init: Expr) -> Stmt {
        self.decl(DeclKind::Const, name, Some(init))
    }

    pub fn expr_stmt(&mut self, e: Expr) -> Stmt {
        self.stmt(StmtKind::Expr(e))
    }

    pub fn assign_stmt(&mut self, name: &str, value: Expr) -> Stmt {
        let target = self.ident(name);
        let e = self.assign(target, value);
        self.expr_stmt(e)
    }

    pub fn block(&mut self, body: Vec<Stmt>) -> Stmt {
        self.stmt(StmtKind::Block(body))
    }

    /// `label: for (;;) { body }`
    pub fn labeled_loop(&mut self, label: &str, body: Vec<Stmt>) -> Stmt {
        let block = self.block(body);
        let for_stmt = self.stmt(StmtKind::For {
            init: None,
            test: None,
            update: None,
            body: Box::new(block),
        });
        self.labeled(label, for_stmt)
    }

    pub fn labeled(&mut self, label: &str, body: Stmt) -> Stmt {
        let label = self.ident_node(label);
        self.stmt(StmtKind::Labeled {
            label,
            body: Box::new(body),
        })
    }

    pub fn break_(&mut self, label: &str) -> Stmt {
        let l = self.ident_node(label);
        self.stmt(StmtKind::Break(Some(l)))
    }

    pub fn continue_(&mut self, label: &str) -> Stmt {
        let l = self.ident_node(label);
        self.stmt(StmtKind::Continue(Some(l)))
    }

    pub fn if_(&mut self, test: Expr, then: Vec<Stmt>, otherwise: Option<Vec<Stmt>>) -> Stmt {
        let consequent = self.block(then);
        let alternate = otherwise.map(|o| Box::new(self.block(o)));
        self.stmt(StmtKind::If {
            test,
            consequent: Box::new(consequent),
            alternate,
        })
    }

    pub fn return_(&mut self, value: Option<Expr>) -> Stmt {
        self.stmt(StmtKind::Return(value))
    }

    pub fn throw_str(&mut self, message: &str) -> Stmt {
        let s = self.string(message);
        self.stmt(StmtKind::Throw(s))
    }

    pub fn function_decl(&mut self, name: &str, params: &[String], body: Vec<Stmt>) -> Stmt {
        let f = Function {
            id: self.ids.fresh(),
            span: Span::SYNTHETIC,
            name: Some(self.ident_node(name)),
            params: params.iter().map(|p| self.ident_node(p)).collect(),
            body: FunctionBody::Block(body),
            is_arrow: false,
        };
        self.stmt(StmtKind::FunctionDecl(f))
    }

    /// Deep copy of `e` with fresh ids and synthetic spans.
    pub fn fresh_copy(&mut self, e: &Expr) -> Expr {
        let mut copy = e.clone();
        crate::js::visit::expr_mut(&mut copy, &mut |id, span| {
            *id = self.ids.fresh();
            *span = Span::SYNTHETIC;
        });
        copy
    }

    pub fn fresh_stmt_copy(&mut self, s: &Stmt) -> Stmt {
        let mut copy = s.clone();
        crate::js::visit::stmt_mut(&mut copy, &mut |id, span| {
            *id = self.ids.fresh();
            *span = Span::SYNTHETIC;
        });
        copy
    }
}
