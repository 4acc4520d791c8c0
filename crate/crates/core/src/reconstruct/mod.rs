//! Splicing abstractions back into the JavaScript unit and regenerating text.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::interop::InteropMap;
use crate::js::visit::identifier_names;
use crate::js::*;
use crate::pdg::Pdg;
use crate::ssr::{
    abstract_data, Diagnostic, Emitter, JsFragment, ModuleAbstraction, ModulePrelude,
};
use crate::wasm::WasmModule;

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Code,
    Data,
    All,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Code, Mode::Data, Mode::All];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Code => "code",
            Mode::Data => "data",
            Mode::All => "all",
        }
    }

    /// Output file suffix, e.g. `.code.js`.
    pub fn suffix(self) -> String {
        format!(".{}.js", self.as_str())
    }

    pub fn includes_code(self) -> bool {
        matches!(self, Mode::Code | Mode::All)
    }

    pub fn includes_data(self) -> bool {
        matches!(self, Mode::Data | Mode::All)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "code" => Ok(Mode::Code),
            "data" => Ok(Mode::Data),
            "all" => Ok(Mode::All),
            _ => Err(format!("unknown mode {s:?} (expected code, data or all)")),
        }
    }
}

/// Abstractions for one instantiation site.
#[derive(Clone, Debug)]
pub struct SiteAbstraction {
    pub site: usize,
    pub prefix: String,
    pub data: JsFragment,
    pub prelude: ModulePrelude,
    /// Inline fragment per export invocation call node.
    pub invocations: BTreeMap<NodeId, JsFragment>,
}

/// A site or invocation left as it was.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Unresolved {
    pub site: usize,
    pub node: u32,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct Abstractions {
    pub emitter: Emitter,
    pub sites: BTreeMap<usize, SiteAbstraction>,
    pub unresolved: Vec<Unresolved>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Abstracts the data of every decoded module and the exported function
/// behind every invocation. `modules` is keyed by instantiation site.
pub fn abstract_sites(
    pdg: &Pdg,
    interops: &InteropMap,
    modules: &BTreeMap<usize, WasmModule>,
) -> Abstractions {
    let program = pdg.ast;
    let mut em = Emitter::new(identifier_names(program), program.id_gen());
    let mut out = Abstractions {
        emitter: em.clone(),
        sites: BTreeMap::new(),
        unresolved: Vec::new(),
        diagnostics: Vec::new(),
    };
    let many = modules.len() > 1;
    for site in interops.instantiation_sites() {
        let Some(module) = modules.get(&site.index) else {
            let reason = match interops.binaries.get(&site.index) {
                Some(b) if !b.is_resolved() => format!("binary {}", b.kind.as_str()),
                _ => "no decoded module".to_string(),
            };
            for inv in interops.invocations_of(site.index) {
                out.unresolved.push(Unresolved {
                    site: site.index,
                    node: inv.call.0,
                    reason: reason.clone(),
                });
            }
            out.unresolved.push(Unresolved {
                site: site.index,
                node: site.node.0,
                reason,
            });
            continue;
        };
        let prefix = if many {
            format!("S{}_", site.index)
        } else {
            String::new()
        };
        let bindings: BTreeMap<(String, String), Expr> = interops
            .import_bindings
            .get(&site.index)
            .into_iter()
            .flatten()
            .filter_map(|(k, id)| pdg.expr(*id).map(|e| (k.clone(), e.clone())))
            .collect();
        let data = abstract_data(module, &prefix, &mut em);
        let mut ma = ModuleAbstraction::new(module, &prefix, &bindings, &mut em);
        let mut invocations = BTreeMap::new();
        for inv in interops.invocations_of(site.index) {
            let Some(f) = module.exported_func(&inv.export) else {
                out.unresolved.push(Unresolved {
                    site: site.index,
                    node: inv.call.0,
                    reason: format!("no exported function {:?}", inv.export),
                });
                continue;
            };
            match ma.abstract_function(&mut em, f) {
                Ok(frag) => {
                    invocations.insert(inv.call, frag);
                }
                Err(e) => out.unresolved.push(Unresolved {
                    site: site.index,
                    node: inv.call.0,
                    reason: format!("abstraction failed: {e}"),
                }),
            }
        }
        let prelude = ma.finish(&mut em);
        out.diagnostics.extend(prelude.diagnostics.iter().cloned());
        out.sites.insert(
            site.index,
            SiteAbstraction {
                site: site.index,
                prefix,
                data,
                prelude,
                invocations,
            },
        );
    }
    out.emitter = em;
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpliceKind {
    InvocationReplacement,
    InstantiationInsertion,
    HelperPrelude,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Splice {
    /// Original node the splice is anchored at.
    pub position: NodeId,
    pub kind: SpliceKind,
    pub site: Option<usize>,
}

/// The JavaScript unit with abstractions spliced in.
#[derive(Clone, Debug)]
pub struct Ipdg {
    pub program: Program,
    pub splices: Vec<Splice>,
    pub mode: Mode,
}

/// Splices abstractions into a copy of `program` according to `mode`.
pub fn integrate(
    program: &Program,
    interops: &InteropMap,
    abs: &mut Abstractions,
    mode: Mode,
) -> Ipdg {
    if interops.is_empty() || abs.sites.is_empty() {
        return Ipdg {
            program: program.clone(),
            splices: Vec::new(),
            mode,
        };
    }
    let mut invocations = HashMap::new();
    let mut data = HashMap::new();
    for (site, sa) in &abs.sites {
        if mode.includes_code() {
            for (call, frag) in &sa.invocations {
                invocations.insert(*call, (*site, frag));
            }
        }
        if mode.includes_data() {
            if let Some(s) = interops.sites.iter().find(|s| s.index == *site) {
                data.insert(s.node, (*site, sa.data.statements.clone()));
            }
        }
    }
    let mut rw = Rewriter {
        em: &mut abs.emitter,
        invocations,
        data,
        splices: Vec::new(),
    };
    let body = rw.list(program.body.clone());
    let mut splices = rw.splices;

    let mut top = Vec::new();
    let used_sites: Vec<usize> = {
        let mut v: Vec<usize> = splices
            .iter()
            .filter(|s| s.kind == SpliceKind::InvocationReplacement)
            .filter_map(|s| s.site)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    if !used_sites.is_empty() {
        let helpers = abs.emitter.helper_prelude();
        if !helpers.is_empty() {
            splices.push(Splice {
                position: program.id,
                kind: SpliceKind::HelperPrelude,
                site: None,
            });
        }
        top.extend(helpers);
        for site in &used_sites {
            top.extend(abs.sites[site].prelude.statements.iter().cloned());
        }
    }
    top.extend(body);
    Ipdg {
        program: Program {
            id: program.id,
            span: program.span,
            body: top,
            next_id: abs.emitter.ids.peek(),
        },
        splices,
        mode,
    }
}

/// Regenerates JavaScript text from a spliced unit.
pub fn reconstruct(ipdg: &Ipdg) -> String {
    print_js(&ipdg.program)
}

struct Rewriter<'r> {
    em: &'r mut Emitter,
    invocations: HashMap<NodeId, (usize, &'r JsFragment)>,
    data: HashMap<NodeId, (usize, Vec<Stmt>)>,
    splices: Vec<Splice>,
}

impl Rewriter<'_> {
    fn list(&mut self, stmts: Vec<Stmt>) -> Vec<Stmt> {
        stmts.into_iter().flat_map(|s| self.stmt(s)).collect()
    }

    /// A statement in a position that holds exactly one.
    fn single(&mut self, s: Stmt) -> Stmt {
        let mut v = self.stmt(s);
        match v.len() {
            1 => v.pop().expect("one"),
            0 => Stmt::new(self.em.ids.fresh(), Span::SYNTHETIC, StmtKind::Empty),
            _ => self.em.builder().block(v),
        }
    }

    fn stmt(&mut self, s: Stmt) -> Vec<Stmt> {
        let mut pre = Vec::new();
        let (id, span) = (s.id, s.span);
        let kind = match s.kind {
            StmtKind::VarDecl(d) => StmtKind::VarDecl(self.decl(d, &mut pre)),
            StmtKind::FunctionDecl(f) => StmtKind::FunctionDecl(self.function(f)),
            StmtKind::Expr(e) => {
                let whole = self.invocations.contains_key(&e.id);
                let e = self.expr(e, &mut pre);
                if whole {
                    return pre;
                }
                StmtKind::Expr(e)
            }
            StmtKind::If {
                test,
                consequent,
                alternate,
            } => StmtKind::If {
                test: self.expr(test, &mut pre),
                consequent: Box::new(self.single(*consequent)),
                alternate: alternate.map(|a| Box::new(self.single(*a))),
            },
            StmtKind::For {
                init,
                test,
                update,
                body,
            } => StmtKind::For {
                init: init.map(|i| match i {
                    ForInit::Decl(d) => ForInit::Decl(self.decl(d, &mut pre)),
                    ForInit::Expr(e) => ForInit::Expr(self.expr(e, &mut pre)),
                }),
                test: test.map(|e| self.expr(e, &mut pre)),
                update: update.map(|e| self.expr(e, &mut pre)),
                body: Box::new(self.single(*body)),
            },
            StmtKind::While { test, body } => StmtKind::While {
                test: self.expr(test, &mut pre),
                body: Box::new(self.single(*body)),
            },
            StmtKind::Labeled { label, body } => {
                // Hoisted statements go outside the label so it still names a loop.
                let mut v = self.stmt(*body);
                let last = v.pop().unwrap_or_else(|| {
                    Stmt::new(self.em.ids.fresh(), Span::SYNTHETIC, StmtKind::Empty)
                });
                pre.extend(v);
                StmtKind::Labeled {
                    label,
                    body: Box::new(last),
                }
            }
            StmtKind::Return(e) => StmtKind::Return(e.map(|e| self.expr(e, &mut pre))),
            StmtKind::Throw(e) => StmtKind::Throw(self.expr(e, &mut pre)),
            StmtKind::Try {
                block,
                handler,
                finalizer,
            } => StmtKind::Try {
                block: self.list(block),
                handler: handler.map(|h| CatchClause {
                    param: h.param,
                    body: self.list(h.body),
                }),
                finalizer: finalizer.map(|f| self.list(f)),
            },
            StmtKind::Block(b) => StmtKind::Block(self.list(b)),
            k @ (StmtKind::Break(_) | StmtKind::Continue(_) | StmtKind::Empty) => k,
        };
        pre.push(Stmt::new(id, span, kind));
        pre
    }

    fn decl(&mut self, d: VarDecl, pre: &mut Vec<Stmt>) -> VarDecl {
        VarDecl {
            kind: d.kind,
            declarators: d
                .declarators
                .into_iter()
                .map(|dc| Declarator {
                    init: dc.init.map(|e| self.expr(e, pre)),
                    ..dc
                })
                .collect(),
        }
    }

    fn function(&mut self, f: Function) -> Function {
        let body = match f.body {
            FunctionBody::Block(b) => FunctionBody::Block(self.list(b)),
            FunctionBody::Expr(e) => {
                let mut pre = Vec::new();
                let e = self.expr(*e, &mut pre);
                if pre.is_empty() {
                    FunctionBody::Expr(Box::new(e))
                } else {
                    pre.push(self.em.builder().return_(Some(e)));
                    FunctionBody::Block(pre)
                }
            }
        };
        Function { body, ..f }
    }

    fn exprs(&mut self, v: Vec<Expr>, pre: &mut Vec<Stmt>) -> Vec<Expr> {
        v.into_iter().map(|e| self.expr(e, pre)).collect()
    }

    #[allow(clippy::boxed_local)]
    fn boxed(&mut self, e: Box<Expr>, pre: &mut Vec<Stmt>) -> Box<Expr> {
        Box::new(self.expr(*e, pre))
    }

    fn expr(&mut self, e: Expr, pre: &mut Vec<Stmt>) -> Expr {
        let (id, span) = (e.id, e.span);
        let kind = match e.kind {
            ExprKind::Template { quasis, exprs } => ExprKind::Template {
                quasis,
                exprs: self.exprs(exprs, pre),
            },
            ExprKind::Array(items) => ExprKind::Array(self.exprs(items, pre)),
            ExprKind::Object(props) => ExprKind::Object(
                props
                    .into_iter()
                    .map(|p| Property {
                        value: self.expr(p.value, pre),
                        ..p
                    })
                    .collect(),
            ),
            ExprKind::Function(f) => ExprKind::Function(Box::new(self.function(*f))),
            ExprKind::Unary { op, arg } => ExprKind::Unary {
                op,
                arg: self.boxed(arg, pre),
            },
            ExprKind::Update { op, prefix, arg } => ExprKind::Update {
                op,
                prefix,
                arg: self.boxed(arg, pre),
            },
            ExprKind::Binary { op, left, right } => ExprKind::Binary {
                op,
                left: self.boxed(left, pre),
                right: self.boxed(right, pre),
            },
            ExprKind::Assign { op, target, value } => ExprKind::Assign {
                op,
                target: self.boxed(target, pre),
                value: self.boxed(value, pre),
            },
            ExprKind::Conditional {
                test,
                consequent,
                alternate,
            } => ExprKind::Conditional {
                test: self.boxed(test, pre),
                consequent: self.boxed(consequent, pre),
                alternate: self.boxed(alternate, pre),
            },
            ExprKind::Call { callee, args } => ExprKind::Call {
                callee: self.boxed(callee, pre),
                args: self.exprs(args, pre),
            },
            ExprKind::New { callee, args } => ExprKind::New {
                callee: self.boxed(callee, pre),
                args: self.exprs(args, pre),
            },
            ExprKind::Member { object, property } => ExprKind::Member {
                object: self.boxed(object, pre),
                property: match property {
                    MemberProp::Computed(p) => MemberProp::Computed(self.boxed(p, pre)),
                    s => s,
                },
            },
            ExprKind::Sequence(items) => ExprKind::Sequence(self.exprs(items, pre)),
            k => k,
        };
        if let Some((site, stmts)) = self.data.remove(&id) {
            pre.extend(stmts);
            self.splices.push(Splice {
                position: id,
                kind: SpliceKind::InstantiationInsertion,
                site: Some(site),
            });
        }
        if let Some((site, frag)) = self.invocations.get(&id).copied() {
            let ExprKind::Call { args, .. } = kind else {
                unreachable!("invocations are calls")
            };
            return self.inline_call(id, site, frag, args, pre);
        }
        Expr::new(id, span, kind)
    }

    fn inline_call(
        &mut self,
        id: NodeId,
        site: usize,
        frag: &JsFragment,
        args: Vec<Expr>,
        pre: &mut Vec<Stmt>,
    ) -> Expr {
        let mut args = args.into_iter();
        for (i, p) in frag.params.iter().enumerate() {
            let mut b = self.em.builder();
            let value = args.next().unwrap_or_else(|| b.num(0.0));
            let kind = if frag.param_reassigned.get(i).copied().unwrap_or(false) {
                DeclKind::Let
            } else {
                DeclKind::Const
            };
            pre.push(b.decl(kind, p, Some(value)));
        }
        for extra in args {
            pre.push(self.em.builder().expr_stmt(extra));
        }
        pre.extend(frag.statements.iter().cloned());
        self.splices.push(Splice {
            position: id,
            kind: SpliceKind::InvocationReplacement,
            site: Some(site),
        });
        match &frag.result_expr {
            Some(r) => r.clone(),
            None => self.em.builder().ident("undefined"),
        }
    }
}
