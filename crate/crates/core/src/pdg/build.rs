use std::collections::{BTreeSet, HashMap};

use super::*;
use crate::js::visit::NodeRef;
use crate::js::*;

/// Builds the dependence graph for a parsed program.
pub fn build_pdg(ast: &Program) -> Pdg<'_> {
    let (nodes, parents) = index_nodes(ast);
    let mut b = Builder {
        scopes: vec![Scope {
            kind: ScopeKind::Global,
            parent: None,
            node: ast.id,
            names: HashMap::new(),
        }],
        bindings: Vec::new(),
        cur: 0,
        occurrences: Vec::new(),
        control: Vec::new(),
        flow: Vec::new(),
        calls: Vec::new(),
        returns: HashMap::new(),
        fn_stack: Vec::new(),
    };
    b.stmt_list(&ast.body, ast.id);
    b.finish(ast, nodes, parents)
}

fn index_nodes(ast: &Program) -> (HashMap<NodeId, NodeRef<'_>>, HashMap<NodeId, NodeId>) {
    let mut nodes = HashMap::new();
    let mut parents = HashMap::new();
    let mut stack: Vec<(NodeRef<'_>, NodeId)> = ast
        .body
        .iter()
        .map(|s| (NodeRef::Stmt(s), ast.id))
        .collect();
    while let Some((node, parent)) = stack.pop() {
        let id = node.id();
        nodes.insert(id, node);
        parents.insert(id, parent);
        stack.extend(node.children().into_iter().map(|c| (c, id)));
    }
    (nodes, parents)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Use,
    Def,
    UseDef,
}

struct Occurrence {
    node: NodeId,
    name: String,
    scope: ScopeId,
    role: Role,
}

enum CallShape<'a> {
    /// `f(args)` where `f` is an identifier.
    Direct { callee: NodeId, args: &'a [Expr] },
    /// `recv.then(cb, ...)`.
    Then { recv: NodeId, cb: &'a Expr },
}

struct Builder<'a> {
    scopes: Vec<Scope>,
    bindings: Vec<Binding>,
    cur: ScopeId,
    occurrences: Vec<Occurrence>,
    control: Vec<ControlEdge>,
    flow: Vec<(NodeId, NodeId)>,
    calls: Vec<(NodeId, CallShape<'a>)>,
    /// Returned expressions per function node.
    returns: HashMap<NodeId, Vec<NodeId>>,
    fn_stack: Vec<NodeId>,
}

impl<'a> Builder<'a> {
    fn push_scope(&mut self, kind: ScopeKind, node: NodeId) -> ScopeId {
        self.scopes.push(Scope {
            kind,
            parent: Some(self.cur),
            node,
            names: HashMap::new(),
        });
        self.cur = self.scopes.len() - 1;
        self.cur
    }

    fn pop_scope(&mut self) {
        self.cur = self.scopes[self.cur]
            .parent
            .expect("never pops the global scope");
    }

    fn function_scope(&self) -> ScopeId {
        let mut s = self.cur;
        while self.scopes[s].kind == ScopeKind::Block {
            s = self.scopes[s].parent.expect("global scope is not a block");
        }
        s
    }

    fn declare(&mut self, scope: ScopeId, name: &str, kind: BindingKind) -> BindingId {
        if let Some(&b) = self.scopes[scope].names.get(name) {
            return b;
        }
        self.bindings.push(Binding {
            name: name.to_string(),
            kind,
            scope,
            defs: Vec::new(),
            uses: Vec::new(),
        });
        let id = self.bindings.len() - 1;
        self.scopes[scope].names.insert(name.to_string(), id);
        id
    }

    fn occur(&mut self, node: NodeId, name: &str, role: Role) {
        self.occurrences.push(Occurrence {
            node,
            name: name.to_string(),
            scope: self.cur,
            role,
        });
    }

    fn edge(&mut self, from: NodeId, to: NodeId) {
        self.flow.push((from, to));
    }

    fn ctl(&mut self, from: NodeId, to: NodeId, label: ControlLabel) {
        self.control.push(ControlEdge { from, to, label });
    }

    /// Control edges from `from` to each statement of a branch.
    fn branch(&mut self, from: NodeId, body: &Stmt, label: ControlLabel) {
        match &body.kind {
            StmtKind::Block(list) => {
                for s in list {
                    self.ctl(from, s.id, label);
                }
            }
            _ => self.ctl(from, body.id, label),
        }
    }

    fn stmt_list(&mut self, list: &'a [Stmt], owner: NodeId) {
        for s in list {
            self.ctl(owner, s.id, ControlLabel::Uncond);
        }
        for s in list {
            self.stmt(s);
        }
    }

    fn block(&mut self, list: &'a [Stmt], owner: NodeId) {
        self.push_scope(ScopeKind::Block, owner);
        self.stmt_list(list, owner);
        self.pop_scope();
    }

    fn var_decl(&mut self, d: &'a VarDecl) {
        let scope = match d.kind {
            DeclKind::Var => self.function_scope(),
            _ => self.cur,
        };
        let kind = match d.kind {
            DeclKind::Var => BindingKind::Var,
            DeclKind::Let => BindingKind::Let,
            DeclKind::Const => BindingKind::Const,
        };
        for decl in &d.declarators {
            self.declare(scope, &decl.name.name, kind);
            if let Some(init) = &decl.init {
                self.expr(init);
                self.edge(init.id, decl.id);
                self.occur(decl.id, &decl.name.name, Role::Def);
            }
        }
    }

    fn stmt(&mut self, s: &'a Stmt) {
        match &s.kind {
            StmtKind::VarDecl(d) => self.var_decl(d),
            StmtKind::FunctionDecl(f) => {
                if let Some(name) = &f.name {
                    self.declare(self.cur, &name.name, BindingKind::Function);
                    self.occur(f.id, &name.name, Role::Def);
                }
                self.function(f, false);
            }
            StmtKind::Expr(e) | StmtKind::Throw(e) => self.expr(e),
            StmtKind::If {
                test,
                consequent,
                alternate,
            } => {
                self.expr(test);
                self.branch(test.id, consequent, ControlLabel::True);
                self.stmt(consequent);
                if let Some(alt) = alternate {
                    self.branch(test.id, alt, ControlLabel::False);
                    self.stmt(alt);
                }
            }
            StmtKind::For {
                init,
                test,
                update,
                body,
            } => {
                self.push_scope(ScopeKind::Block, s.id);
                match init {
                    Some(ForInit::Decl(d)) => self.var_decl(d),
                    Some(ForInit::Expr(e)) => self.expr(e),
                    None => {}
                }
                match test {
                    Some(t) => {
                        self.expr(t);
                        self.branch(t.id, body, ControlLabel::True);
                    }
                    None => self.branch(s.id, body, ControlLabel::Uncond),
                }
                if let Some(u) = update {
                    self.expr(u);
                }
                self.stmt(body);
                self.pop_scope();
            }
            StmtKind::While { test, body } => {
                self.expr(test);
                self.branch(test.id, body, ControlLabel::True);
                self.stmt(body);
            }
            StmtKind::Labeled { body, .. } => {
                self.ctl(s.id, body.id, ControlLabel::Uncond);
                self.stmt(body);
            }
            StmtKind::Return(arg) => {
                if let Some(a) = arg {
                    self.expr(a);
                    if let Some(&f) = self.fn_stack.last() {
                        self.returns.entry(f).or_default().push(a.id);
                    }
                }
            }
            StmtKind::Try {
                block,
                handler,
                finalizer,
            } => {
                self.block(block, s.id);
                if let Some(h) = handler {
                    self.push_scope(ScopeKind::Block, s.id);
                    if let Some(p) = &h.param {
                        self.declare(self.cur, &p.name, BindingKind::CatchParam);
                        self.occur(p.id, &p.name, Role::Def);
                    }
                    self.stmt_list(&h.body, s.id);
                    self.pop_scope();
                }
                if let Some(f) = finalizer {
                    self.block(f, s.id);
                }
            }
            StmtKind::Block(list) => self.block(list, s.id),
            StmtKind::Break(_) | StmtKind::Continue(_) | StmtKind::Empty => {}
        }
    }

    fn function(&mut self, f: &'a Function, is_expr: bool) {
        self.push_scope(ScopeKind::Function, f.id);
        if is_expr {
            if let Some(name) = &f.name {
                self.declare(self.cur, &name.name, BindingKind::Function);
                self.occur(f.id, &name.name, Role::Def);
            }
        }
        for p in &f.params {
            self.declare(self.cur, &p.name, BindingKind::Param);
            self.occur(p.id, &p.name, Role::Def);
        }
        self.fn_stack.push(f.id);
        match &f.body {
            FunctionBody::Block(list) => self.stmt_list(list, f.id),
            FunctionBody::Expr(e) => {
                self.ctl(f.id, e.id, ControlLabel::Uncond);
                self.expr(e);
                self.returns.entry(f.id).or_default().push(e.id);
            }
        }
        self.fn_stack.pop();
        self.pop_scope();
    }

    fn expr(&mut self, e: &'a Expr) {
        match &e.kind {
            ExprKind::Ident(name) => self.occur(e.id, name, Role::Use),
            ExprKind::Number(_)
            | ExprKind::String(_)
            | ExprKind::Bool(_)
            | ExprKind::Null
            | ExprKind::This => {}
            ExprKind::Template { exprs, .. } => {
                for x in exprs {
                    self.expr(x);
                    self.edge(x.id, e.id);
                }
            }
            ExprKind::Array(items) => {
                for x in items {
                    self.expr(x);
                    self.edge(x.id, e.id);
                }
            }
            ExprKind::Sequence(items) => {
                for x in items {
                    self.expr(x);
                }
                if let Some(last) = items.last() {
                    self.edge(last.id, e.id);
                }
            }
            ExprKind::Object(props) => {
                for p in props {
                    self.expr(&p.value);
                    self.edge(p.value.id, e.id);
                }
            }
            ExprKind::Function(f) => self.function(f, true),
            ExprKind::Unary { arg, .. } => self.expr(arg),
            ExprKind::Update { arg, .. } => match &arg.kind {
                ExprKind::Ident(name) => self.occur(arg.id, name, Role::UseDef),
                _ => self.expr(arg),
            },
            ExprKind::Binary { left, right, .. } => {
                self.expr(left);
                self.expr(right);
                self.edge(left.id, e.id);
                self.edge(right.id, e.id);
            }
            ExprKind::Assign { op, target, value } => {
                self.expr(value);
                match &target.kind {
                    ExprKind::Ident(name) => {
                        let role = if *op == AssignOp::Assign {
                            Role::Def
                        } else {
                            Role::UseDef
                        };
                        self.occur(target.id, name, role);
                    }
                    _ => self.expr(target),
                }
                self.edge(value.id, target.id);
                self.edge(value.id, e.id);
            }
            ExprKind::Conditional {
                test,
                consequent,
                alternate,
            } => {
                self.expr(test);
                self.expr(consequent);
                self.expr(alternate);
                self.ctl(test.id, consequent.id, ControlLabel::True);
                self.ctl(test.id, alternate.id, ControlLabel::False);
                self.edge(consequent.id, e.id);
                self.edge(alternate.id, e.id);
            }
            ExprKind::Call { callee, args } => {
                self.expr(callee);
                for a in args {
                    self.expr(a);
                }
                self.edge(callee.id, e.id);
                if callee.as_ident().is_some() {
                    self.calls.push((
                        e.id,
                        CallShape::Direct {
                            callee: callee.id,
                            args,
                        },
                    ));
                }
                if let (ExprKind::Member { object, .. }, Some("then"), Some(cb)) =
                    (&callee.kind, callee.member_name(), args.first())
                {
                    self.calls.push((
                        e.id,
                        CallShape::Then {
                            recv: object.id,
                            cb,
                        },
                    ));
                }
            }
            ExprKind::New { callee, args } => {
                self.expr(callee);
                for a in args {
                    self.expr(a);
                    self.edge(a.id, e.id);
                }
                self.edge(callee.id, e.id);
            }
            ExprKind::Member { object, property } => {
                self.expr(object);
                if let MemberProp::Computed(p) = property {
                    self.expr(p);
                }
                self.edge(object.id, e.id);
            }
        }
    }

    fn resolve(&self, scope: ScopeId, name: &str) -> Option<BindingId> {
        let mut s = Some(scope);
        while let Some(id) = s {
            if let Some(&b) = self.scopes[id].names.get(name) {
                return Some(b);
            }
            s = self.scopes[id].parent;
        }
        None
    }

    fn finish(
        mut self,
        ast: &'a Program,
        nodes: HashMap<NodeId, NodeRef<'a>>,
        parents: HashMap<NodeId, NodeId>,
    ) -> Pdg<'a> {
        let mut def_binding = HashMap::new();
        let mut use_binding = HashMap::new();
        let mut unresolved = BTreeSet::new();
        let occurrences = std::mem::take(&mut self.occurrences);
        for occ in &occurrences {
            let b = match self.resolve(occ.scope, &occ.name) {
                Some(b) => b,
                None => {
                    if !KNOWN_GLOBALS.contains(&occ.name.as_str()) && occ.role != Role::Def {
                        unresolved.insert(occ.name.clone());
                    }
                    self.declare(0, &occ.name, BindingKind::ImplicitGlobal)
                }
            };
            if matches!(occ.role, Role::Def | Role::UseDef) {
                self.bindings[b].defs.push(occ.node);
                def_binding.insert(occ.node, b);
            }
            if matches!(occ.role, Role::Use | Role::UseDef) {
                self.bindings[b].uses.push(occ.node);
                use_binding.insert(occ.node, b);
            }
        }
        // Assigned implicit globals are not unresolved reads.
        unresolved.retain(|name| {
            self.scopes[0]
                .names
                .get(name)
                .is_none_or(|b| self.bindings[*b].defs.is_empty())
        });

        let mut binding_functions: HashMap<BindingId, Vec<NodeId>> = HashMap::new();
        for (bid, b) in self.bindings.iter().enumerate() {
            for d in &b.defs {
                let func = match nodes.get(d) {
                    Some(NodeRef::Function(f)) => Some(f.id),
                    Some(NodeRef::Declarator(decl)) => match decl.init.as_ref().map(|i| &i.kind) {
                        Some(ExprKind::Function(f)) => Some(f.id),
                        _ => None,
                    },
                    _ => None,
                };
                if let Some(f) = func {
                    binding_functions.entry(bid).or_default().push(f);
                }
            }
        }

        let calls = std::mem::take(&mut self.calls);
        for (call, shape) in calls {
            match shape {
                CallShape::Direct { callee, args } => {
                    let Some(b) = use_binding.get(&callee) else {
                        continue;
                    };
                    for f in binding_functions.get(b).into_iter().flatten() {
                        let Some(NodeRef::Function(func)) = nodes.get(f) else {
                            continue;
                        };
                        for (a, p) in args.iter().zip(&func.params) {
                            self.flow.push((a.id, p.id));
                        }
                        for r in self.returns.get(f).into_iter().flatten() {
                            self.flow.push((*r, call));
                        }
                    }
                }
                CallShape::Then { recv, cb } => {
                    let funcs: Vec<NodeId> = match &cb.kind {
                        ExprKind::Function(f) => vec![f.id],
                        ExprKind::Ident(_) => use_binding
                            .get(&cb.id)
                            .and_then(|b| binding_functions.get(b))
                            .cloned()
                            .unwrap_or_default(),
                        _ => Vec::new(),
                    };
                    for f in funcs {
                        let Some(NodeRef::Function(func)) = nodes.get(&f) else {
                            continue;
                        };
                        if let Some(p) = func.params.first() {
                            self.flow.push((recv, p.id));
                        }
                        for r in self.returns.get(&f).into_iter().flatten() {
                            self.flow.push((*r, call));
                        }
                    }
                }
            }
        }

        let mut succ: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
        let mut pred: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
        self.flow.sort();
        self.flow.dedup();
        for (a, b) in &self.flow {
            succ.entry(*a).or_default().push(*b);
            pred.entry(*b).or_default().push(*a);
        }

        Pdg {
            ast,
            nodes,
            parents,
            scopes: self.scopes,
            bindings: self.bindings,
            control_edges: self.control,
            def_binding,
            use_binding,
            succ,
            pred,
            binding_functions,
            unresolved,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decl_id(ast: &Program, name: &str) -> NodeId {
        let mut found = None;
        crate::js::visit::walk_program(ast, &mut |n| {
            if let NodeRef::Declarator(d) = n {
                if d.name.name == name {
                    found = Some(d.id);
                }
            }
        });
        found.expect("declarator")
    }

    #[test]
    fn dead_definition_has_no_edges() {
        let ast = parse_js("var x = 1;").unwrap();
        let pdg = build_pdg(&ast);
        assert_eq!(pdg.data_edge_count(), 0);
    }

    #[test]
    fn straight_line_chain() {
        let ast = parse_js("var e = 1; var a = e; var b = a;").unwrap();
        let pdg = build_pdg(&ast);
        let a = decl_id(&ast, "a");
        let b = decl_id(&ast, "b");
        assert!(pdg.flows_from(a).contains(&b));
        assert!(pdg.flows_to(b).contains(&a));
    }

    #[test]
    fn block_scoping() {
        let ast = parse_js("let x = 1; { let x = 2; f(x); } g(x);").unwrap();
        let pdg = build_pdg(&ast);
        let edges = pdg.data_edges();
        assert_eq!(edges.len(), 2);
        let outer = pdg
            .data_edges()
            .into_iter()
            .filter(|e| e.def == decl_id(&ast, "x"))
            .count();
        assert_eq!(outer, 1);
    }

    #[test]
    fn var_is_function_scoped_and_hoisted() {
        let ast = parse_js("function f() { g(y); if (c) { var y = 2; } } var y = 1;").unwrap();
        let pdg = build_pdg(&ast);
        // Inner y resolves to the function-level var, not the global.
        assert_eq!(pdg.data_edges().len(), 1);
        let b = pdg.binding_of_def(pdg.data_edges()[0].def).unwrap();
        assert_eq!(pdg.scopes[b.scope].kind, ScopeKind::Function);
    }

    #[test]
    fn if_condition_controls_call() {
        let ast = parse_js("if (c) { f(); }").unwrap();
        let pdg = build_pdg(&ast);
        let StmtKind::If {
            test, consequent, ..
        } = &ast.body[0].kind
        else {
            panic!()
        };
        let StmtKind::Block(list) = &consequent.kind else {
            panic!()
        };
        assert!(pdg.control_edges.contains(&ControlEdge {
            from: test.id,
            to: list[0].id,
            label: ControlLabel::True
        }));
    }

    #[test]
    fn literal_has_no_flow() {
        let ast = parse_js("1;").unwrap();
        let pdg = build_pdg(&ast);
        let StmtKind::Expr(e) = &ast.body[0].kind else {
            panic!()
        };
        assert!(pdg.flows_from(e.id).is_empty());
    }

    #[test]
    fn unresolved_reads_are_recorded() {
        let ast = parse_js("mystery(document); implicit = 1; implicit;").unwrap();
        let pdg = build_pdg(&ast);
        assert_eq!(pdg.unresolved.iter().collect::<Vec<_>>(), vec!["mystery"]);
    }

    #[test]
    fn dot_dump_format() {
        let ast = parse_js("var x = 1; if (x) { f(x); }").unwrap();
        let dot = build_pdg(&ast).to_dot();
        assert!(dot.contains("DEF->USE var=x"));
        assert!(dot.contains("CTL label=True"));
    }
}
