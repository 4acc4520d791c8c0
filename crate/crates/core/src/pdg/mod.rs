//! Program dependence graph: the syntax tree plus control edges, def-use
//! edges under lexical scoping, and value-flow steps used by flow queries.

mod build;

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use crate::js::visit::NodeRef;
use crate::js::{Expr, Function, NodeId, Program, Stmt};

pub use build::build_pdg;

/// Names treated as declared by the host environment.
pub const KNOWN_GLOBALS: &[&str] = &[
    "WebAssembly",
    "document",
    "window",
    "self",
    "globalThis",
    "fetch",
    "atob",
    "btoa",
    "console",
    "Uint8Array",
    "Int8Array",
    "Uint16Array",
    "Int16Array",
    "Uint32Array",
    "Int32Array",
    "Float32Array",
    "Float64Array",
    "ArrayBuffer",
    "DataView",
    "Array",
    "Object",
    "String",
    "Number",
    "Math",
    "JSON",
    "Promise",
    "Error",
    "parseInt",
    "parseFloat",
    "undefined",
    "NaN",
    "Infinity",
    "setTimeout",
    "setInterval",
    "eval",
    "location",
    "navigator",
    "XMLHttpRequest",
    "TextDecoder",
    "TextEncoder",
    "Response",
    "alert",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControlLabel {
    True,
    False,
    Uncond,
}

impl ControlLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ControlLabel::True => "True",
            ControlLabel::False => "False",
            ControlLabel::Uncond => "Uncond",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ControlEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub label: ControlLabel,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DataEdge {
    pub def: NodeId,
    pub use_: NodeId,
    pub var: String,
}

pub type ScopeId = usize;
pub type BindingId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScopeKind {
    Global,
    Function,
    Block,
}

#[derive(Clone, Debug)]
pub struct Scope {
    pub kind: ScopeKind,
    pub parent: Option<ScopeId>,
    /// Node that introduced the scope.
    pub node: NodeId,
    pub names: HashMap<String, BindingId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BindingKind {
    Var,
    Let,
    Const,
    Function,
    Param,
    CatchParam,
    /// Assigned or read without any declaration.
    ImplicitGlobal,
}

#[derive(Clone, Debug)]
pub struct Binding {
    pub name: String,
    pub kind: BindingKind,
    pub scope: ScopeId,
    /// Definition nodes: declarators with initializers, assignment targets,
    /// parameters and function nodes.
    pub defs: Vec<NodeId>,
    /// Reading identifier occurrences.
    pub uses: Vec<NodeId>,
}

/// The program dependence graph over a borrowed syntax tree.
pub struct Pdg<'a> {
    pub ast: &'a Program,
    pub(crate) nodes: HashMap<NodeId, NodeRef<'a>>,
    pub(crate) parents: HashMap<NodeId, NodeId>,
    pub scopes: Vec<Scope>,
    pub bindings: Vec<Binding>,
    pub control_edges: Vec<ControlEdge>,
    pub(crate) def_binding: HashMap<NodeId, BindingId>,
    pub(crate) use_binding: HashMap<NodeId, BindingId>,
    pub(crate) succ: HashMap<NodeId, Vec<NodeId>>,
    pub(crate) pred: HashMap<NodeId, Vec<NodeId>>,
    /// Function nodes a binding may hold.
    pub(crate) binding_functions: HashMap<BindingId, Vec<NodeId>>,
    /// Identifiers read without any declaration and not known host globals.
    pub unresolved: BTreeSet<String>,
}

impl<'a> Pdg<'a> {
    pub fn node(&self, id: NodeId) -> Option<NodeRef<'a>> {
        self.nodes.get(&id).copied()
    }

    pub fn expr(&self, id: NodeId) -> Option<&'a Expr> {
        match self.nodes.get(&id)? {
            NodeRef::Expr(e) => Some(e),
            _ => None,
        }
    }

    pub fn stmt(&self, id: NodeId) -> Option<&'a Stmt> {
        match self.nodes.get(&id)? {
            NodeRef::Stmt(s) => Some(s),
            _ => None,
        }
    }

    pub fn function(&self, id: NodeId) -> Option<&'a Function> {
        match self.nodes.get(&id)? {
            NodeRef::Function(f) => Some(f),
            _ => None,
        }
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.parents.get(&id).copied()
    }

    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(self.parent(id), move |p| self.parent(*p))
    }

    /// Nearest statement containing `id` (inclusive).
    pub fn enclosing_stmt(&self, id: NodeId) -> Option<&'a Stmt> {
        std::iter::once(id)
            .chain(self.ancestors(id))
            .find_map(|n| self.stmt(n))
    }

    /// Nearest function containing `id` (exclusive).
    pub fn enclosing_function(&self, id: NodeId) -> Option<&'a Function> {
        self.ancestors(id).find_map(|n| self.function(n))
    }

    pub fn binding(&self, id: BindingId) -> &Binding {
        &self.bindings[id]
    }

    /// Binding read at a use occurrence.
    pub fn binding_of_use(&self, use_node: NodeId) -> Option<&Binding> {
        self.use_binding.get(&use_node).map(|b| &self.bindings[*b])
    }

    /// Binding written at a definition node.
    pub fn binding_of_def(&self, def_node: NodeId) -> Option<&Binding> {
        self.def_binding.get(&def_node).map(|b| &self.bindings[*b])
    }

    pub fn binding_id_of_use(&self, use_node: NodeId) -> Option<BindingId> {
        self.use_binding.get(&use_node).copied()
    }

    /// Function values a called identifier may refer to.
    pub fn functions_of_binding(&self, id: BindingId) -> &[NodeId] {
        self.binding_functions
            .get(&id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Value assigned at a definition node, when it is an expression.
    pub fn def_value(&self, def: NodeId) -> Option<&'a Expr> {
        match self.node(def)? {
            NodeRef::Declarator(d) => d.init.as_ref(),
            NodeRef::Expr(target) => {
                let parent = self.expr(self.parent(target.id)?)?;
                match &parent.kind {
                    crate::js::ExprKind::Assign {
                        target: t,
                        value,
                        op,
                    } if t.id == target.id => {
                        (*op == crate::js::AssignOp::Assign).then_some(&**value)
                    }
                    _ => None,
                }
            }
            _ => None,
        }
    }

    /// All def-use edges, sorted.
    pub fn data_edges(&self) -> Vec<DataEdge> {
        let mut out = Vec::new();
        for b in &self.bindings {
            for &d in &b.defs {
                for &u in &b.uses {
                    out.push(DataEdge {
                        def: d,
                        use_: u,
                        var: b.name.clone(),
                    });
                }
            }
        }
        out.sort();
        out
    }

    pub fn data_edge_count(&self) -> usize {
        self.bindings
            .iter()
            .map(|b| b.defs.len() * b.uses.len())
            .sum()
    }

    pub fn has_data_edge(&self, def: NodeId, use_: NodeId) -> bool {
        match (self.def_binding.get(&def), self.use_binding.get(&use_)) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    }

    /// One-step value-flow successors of a node.
    pub fn successors(&self, n: NodeId) -> Vec<NodeId> {
        let mut out = self.succ.get(&n).cloned().unwrap_or_default();
        if let Some(b) = self.def_binding.get(&n) {
            out.extend(self.bindings[*b].uses.iter().copied());
        }
        out
    }

    /// One-step value-flow predecessors of a node.
    pub fn predecessors(&self, n: NodeId) -> Vec<NodeId> {
        let mut out = self.pred.get(&n).cloned().unwrap_or_default();
        if let Some(b) = self.use_binding.get(&n) {
            out.extend(self.bindings[*b].defs.iter().copied());
        }
        out
    }

    /// Nodes reachable forward from `n` along value flow.
    pub fn flows_from(&self, n: NodeId) -> HashSet<NodeId> {
        self.closure(n, |x| self.successors(x))
    }

    /// Nodes from which `n` is reachable along value flow.
    pub fn flows_to(&self, n: NodeId) -> HashSet<NodeId> {
        self.closure(n, |x| self.predecessors(x))
    }

    fn closure(&self, start: NodeId, step: impl Fn(NodeId) -> Vec<NodeId>) -> HashSet<NodeId> {
        let mut seen = HashSet::new();
        let mut queue: VecDeque<NodeId> = step(start).into();
        while let Some(n) = queue.pop_front() {
            if seen.insert(n) {
                queue.extend(step(n));
            }
        }
        seen
    }

    /// Every identifier lexeme of the program.
    pub fn symbols(&self) -> BTreeSet<String> {
        crate::js::visit::identifier_names(self.ast)
    }

    /// Graphviz rendering of control and def-use edges.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph pdg {\n");
        let mut ctl = self.control_edges.clone();
        ctl.sort();
        for e in &ctl {
            let _ = writeln!(
                out,
                "  {} -> {} [label=\"CTL label={}\"];",
                e.from,
                e.to,
                e.label.as_str()
            );
        }
        for e in self.data_edges() {
            let _ = writeln!(
                out,
                "  {} -> {} [label=\"DEF->USE var={}\"];",
                e.def, e.use_, e.var
            );
        }
        out.push_str("}\n");
        out
    }
}
