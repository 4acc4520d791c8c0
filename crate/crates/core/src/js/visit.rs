//! Generic traversal over the syntax tree.

use super::ast::*;

/// A borrowed reference to any node that carries an id.
#[derive(Clone, Copy, Debug)]
pub enum NodeRef<'a> {
    Stmt(&'a Stmt),
    Expr(&'a Expr),
    Declarator(&'a Declarator),
    Function(&'a Function),
    Ident(&'a Ident),
    Property(&'a Property),
}

impl<'a> NodeRef<'a> {
    pub fn id(&self) -> NodeId {
        match self {
            NodeRef::Stmt(s) => s.id,
            NodeRef::Expr(e) => e.id,
            NodeRef::Declarator(d) => d.id,
            NodeRef::Function(f) => f.id,
            NodeRef::Ident(i) => i.id,
            NodeRef::Property(p) => p.id,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            NodeRef::Stmt(s) => s.span,
            NodeRef::Expr(e) => e.span,
            NodeRef::Declarator(d) => d.span,
            NodeRef::Function(f) => f.span,
            NodeRef::Ident(i) => i.span,
            NodeRef::Property(p) => p.span,
        }
    }

    /// Direct children in source order.
    pub fn children(&self) -> Vec<NodeRef<'a>> {
        let mut out = Vec::new();
        match *self {
            NodeRef::Stmt(s) => stmt_children(s, &mut out),
            NodeRef::Expr(e) => expr_children(e, &mut out),
            NodeRef::Declarator(d) => {
                out.push(NodeRef::Ident(&d.name));
                if let Some(init) = &d.init {
                    out.push(NodeRef::Expr(init));
                }
            }
            NodeRef::Function(f) => {
                if let Some(n) = &f.name {
                    out.push(NodeRef::Ident(n));
                }
                out.extend(f.params.iter().map(NodeRef::Ident));
                match &f.body {
                    FunctionBody::Block(b) => out.extend(b.iter().map(NodeRef::Stmt)),
                    FunctionBody::Expr(e) => out.push(NodeRef::Expr(e)),
                }
            }
            NodeRef::Ident(_) => {}
            NodeRef::Property(p) => out.push(NodeRef::Expr(&p.value)),
        }
        out
    }
}

fn decl_children<'a>(d: &'a VarDecl, out: &mut Vec<NodeRef<'a>>) {
    out.extend(d.declarators.iter().map(NodeRef::Declarator));
}

fn stmt_children<'a>(s: &'a Stmt, out: &mut Vec<NodeRef<'a>>) {
    match &s.kind {
        StmtKind::VarDecl(d) => decl_children(d, out),
        StmtKind::FunctionDecl(f) => out.push(NodeRef::Function(f)),
        StmtKind::Expr(e) | StmtKind::Throw(e) => out.push(NodeRef::Expr(e)),
        StmtKind::If {
            test,
            consequent,
            alternate,
        } => {
            out.push(NodeRef::Expr(test));
            out.push(NodeRef::Stmt(consequent));
            if let Some(a) = alternate {
                out.push(NodeRef::Stmt(a));
            }
        }
        StmtKind::For {
            init,
            test,
            update,
            body,
        } => {
            match init {
                Some(ForInit::Decl(d)) => decl_children(d, out),
                Some(ForInit::Expr(e)) => out.push(NodeRef::Expr(e)),
                None => {}
            }
            if let Some(t) = test {
                out.push(NodeRef::Expr(t));
            }
            if let Some(u) = update {
                out.push(NodeRef::Expr(u));
            }
            out.push(NodeRef::Stmt(body));
        }
        StmtKind::While { test, body } => {
            out.push(NodeRef::Expr(test));
            out.push(NodeRef::Stmt(body));
        }
        StmtKind::Labeled { label, body } => {
            out.push(NodeRef::Ident(label));
            out.push(NodeRef::Stmt(body));
        }
        StmtKind::Break(l) | StmtKind::Continue(l) => {
            if let Some(l) = l {
                out.push(NodeRef::Ident(l));
            }
        }
        StmtKind::Return(arg) => {
            if let Some(a) = arg {
                out.push(NodeRef::Expr(a));
            }
        }
        StmtKind::Try {
            block,
            handler,
            finalizer,
        } => {
            out.extend(block.iter().map(NodeRef::Stmt));
            if let Some(h) = handler {
                if let Some(p) = &h.param {
                    out.push(NodeRef::Ident(p));
                }
                out.extend(h.body.iter().map(NodeRef::Stmt));
            }
            if let Some(f) = finalizer {
                out.extend(f.iter().map(NodeRef::Stmt));
            }
        }
        StmtKind::Block(b) => out.extend(b.iter().map(NodeRef::Stmt)),
        StmtKind::Empty => {}
    }
}

fn expr_children<'a>(e: &'a Expr, out: &mut Vec<NodeRef<'a>>) {
    match &e.kind {
        ExprKind::Ident(_)
        | ExprKind::Number(_)
        | ExprKind::String(_)
        | ExprKind::Bool(_)
        | ExprKind::Null
        | ExprKind::This => {}
        ExprKind::Template { exprs, .. } => out.extend(exprs.iter().map(NodeRef::Expr)),
        ExprKind::Array(items) | ExprKind::Sequence(items) => {
            out.extend(items.iter().map(NodeRef::Expr))
        }
        ExprKind::Object(props) => out.extend(props.iter().map(NodeRef::Property)),
        ExprKind::Function(f) => out.push(NodeRef::Function(f)),
        ExprKind::Unary { arg, .. } | ExprKind::Update { arg, .. } => out.push(NodeRef::Expr(arg)),
        ExprKind::Binary { left, right, .. } => {
            out.push(NodeRef::Expr(left));
            out.push(NodeRef::Expr(right));
        }
        ExprKind::Assign { target, value, .. } => {
            out.push(NodeRef::Expr(target));
            out.push(NodeRef::Expr(value));
        }
        ExprKind::Conditional {
            test,
            consequent,
            alternate,
        } => {
            out.push(NodeRef::Expr(test));
            out.push(NodeRef::Expr(consequent));
            out.push(NodeRef::Expr(alternate));
        }
        ExprKind::Call { callee, args } | ExprKind::New { callee, args } => {
            out.push(NodeRef::Expr(callee));
            out.extend(args.iter().map(NodeRef::Expr));
        }
        ExprKind::Member { object, property } => {
            out.push(NodeRef::Expr(object));
            match property {
                MemberProp::Static(id) => out.push(NodeRef::Ident(id)),
                MemberProp::Computed(p) => out.push(NodeRef::Expr(p)),
            }
        }
    }
}

/// Pre-order walk over every node of the program (the program root itself
/// is not visited).
pub fn walk_program<'a>(program: &'a Program, f: &mut dyn FnMut(NodeRef<'a>)) {
    let mut stack: Vec<NodeRef<'a>> = program.body.iter().rev().map(NodeRef::Stmt).collect();
    while let Some(node) = stack.pop() {
        f(node);
        let mut kids = node.children();
        kids.reverse();
        stack.extend(kids);
    }
}

/// Every identifier lexeme in the program: bindings, references, labels and
/// static property names.
pub fn identifier_names(program: &Program) -> std::collections::BTreeSet<String> {
    let mut names = std::collections::BTreeSet::new();
    walk_program(program, &mut |n| match n {
        NodeRef::Ident(i) => {
            names.insert(i.name.clone());
        }
        NodeRef::Expr(e) => {
            if let ExprKind::Ident(name) = &e.kind {
                names.insert(name.clone());
            }
        }
        NodeRef::Property(p) => {
            if let PropKey::Ident(k) = &p.key {
                names.insert(k.clone());
            }
        }
        _ => {}
    });
    names
}

/// Applies `f` to the id and span of every node, including the root.
pub fn for_each_node_mut(program: &mut Program, f: &mut dyn FnMut(&mut NodeId, &mut Span)) {
    f(&mut program.id, &mut program.span);
    for s in &mut program.body {
        stmt_mut(s, f);
    }
}

pub fn stmt_mut(s: &mut Stmt, f: &mut dyn FnMut(&mut NodeId, &mut Span)) {
    f(&mut s.id, &mut s.span);
    match &mut s.kind {
        StmtKind::VarDecl(d) => decl_mut(d, f),
        StmtKind::FunctionDecl(func) => function_mut(func, f),
        StmtKind::Expr(e) | StmtKind::Throw(e) => expr_mut(e, f),
        StmtKind::If {
            test,
            consequent,
            alternate,
        } => {
            expr_mut(test, f);
            stmt_mut(consequent, f);
            if let Some(a) = alternate {
                stmt_mut(a, f);
            }
        }
        StmtKind::For {
            init,
            test,
            update,
            body,
        } => {
            match init {
                Some(ForInit::Decl(d)) => decl_mut(d, f),
                Some(ForInit::Expr(e)) => expr_mut(e, f),
                None => {}
            }
            if let Some(t) = test {
                expr_mut(t, f);
            }
            if let Some(u) = update {
                expr_mut(u, f);
            }
            stmt_mut(body, f);
        }
        StmtKind::While { test, body } => {
            expr_mut(test, f);
            stmt_mut(body, f);
        }
        StmtKind::Labeled { label, body } => {
            f(&mut label.id, &mut label.span);
            stmt_mut(body, f);
        }
        StmtKind::Break(l) | StmtKind::Continue(l) => {
            if let Some(l) = l {
                f(&mut l.id, &mut l.span);
            }
        }
        StmtKind::Return(arg) => {
            if let Some(a) = arg {
                expr_mut(a, f);
            }
        }
        StmtKind::Try {
            block,
            handler,
            finalizer,
        } => {
            for s in block {
                stmt_mut(s, f);
            }
            if let Some(h) = handler {
                if let Some(p) = &mut h.param {
                    f(&mut p.id, &mut p.span);
                }
                for s in &mut h.body {
                    stmt_mut(s, f);
                }
            }
            if let Some(fin) = finalizer {
                for s in fin {
                    stmt_mut(s, f);
                }
            }
        }
        StmtKind::Block(b) => {
            for s in b {
                stmt_mut(s, f);
            }
        }
        StmtKind::Empty => {}
    }
}

fn decl_mut(d: &mut VarDecl, f: &mut dyn FnMut(&mut NodeId, &mut Span)) {
    for decl in &mut d.declarators {
        f(&mut decl.id, &mut decl.span);
        f(&mut decl.name.id, &mut decl.name.span);
        if let Some(init) = &mut decl.init {
            expr_mut(init, f);
        }
    }
}

fn function_mut(func: &mut Function, f: &mut dyn FnMut(&mut NodeId, &mut Span)) {
    f(&mut func.id, &mut func.span);
    if let Some(n) = &mut func.name {
        f(&mut n.id, &mut n.span);
    }
    for p in &mut func.params {
        f(&mut p.id, &mut p.span);
    }
    match &mut func.body {
        FunctionBody::Block(b) => {
            for s in b {
                stmt_mut(s, f);
            }
        }
        FunctionBody::Expr(e) => expr_mut(e, f),
    }
}

pub fn expr_mut(e: &mut Expr, f: &mut dyn FnMut(&mut NodeId, &mut Span)) {
    f(&mut e.id, &mut e.span);
    match &mut e.kind {
        ExprKind::Ident(_)
        | ExprKind::Number(_)
        | ExprKind::String(_)
        | ExprKind::Bool(_)
        | ExprKind::Null
        | ExprKind::This => {}
        ExprKind::Template { exprs, .. } => {
            for x in exprs {
                expr_mut(x, f);
            }
        }
        ExprKind::Array(items) | ExprKind::Sequence(items) => {
            for x in items {
                expr_mut(x, f);
            }
        }
        ExprKind::Object(props) => {
            for p in props {
                f(&mut p.id, &mut p.span);
                expr_mut(&mut p.value, f);
            }
        }
        ExprKind::Function(func) => function_mut(func, f),
        ExprKind::Unary { arg, .. } | ExprKind::Update { arg, .. } => expr_mut(arg, f),
        ExprKind::Binary { left, right, .. } => {
            expr_mut(left, f);
            expr_mut(right, f);
        }
        ExprKind::Assign { target, value, .. } => {
            expr_mut(target, f);
            expr_mut(value, f);
        }
        ExprKind::Conditional {
            test,
            consequent,
            alternate,
        } => {
            expr_mut(test, f);
            expr_mut(consequent, f);
            expr_mut(alternate, f);
        }
        ExprKind::Call { callee, args } | ExprKind::New { callee, args } => {
            expr_mut(callee, f);
            for a in args {
                expr_mut(a, f);
            }
        }
        ExprKind::Member { object, property } => {
            expr_mut(object, f);
            match property {
                MemberProp::Static(id) => f(&mut id.id, &mut id.span),
                MemberProp::Computed(p) => expr_mut(p, f),
            }
        }
    }
}
