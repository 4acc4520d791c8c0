//! Discovery of JavaScript/WebAssembly interoperation sites on the PDG.

mod recover;

use std::collections::{BTreeMap, HashSet, VecDeque};

use crate::js::visit::{walk_program, NodeRef};
use crate::js::{BinaryOp, Expr, ExprKind, NodeId, Property};
use crate::pdg::{BindingKind, Pdg};

pub use recover::{recover_binary, BinaryOrigin, OriginKind, UnresolvedReason, DEFAULT_DEPTH_CAP};

const DEFAULT_KEY_APIS: &str = include_str!("../../data/key_apis.txt");
const ALIAS_DEPTH: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ApiKind {
    Modularization,
    Instantiation,
    Auxiliary,
    /// The `exports` property of an instance.
    Exports,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("key API table line {line}: {message}")]
pub struct KeyApiError {
    pub line: usize,
    pub message: String,
}

/// The table of recognized API paths.
#[derive(Clone, Debug)]
pub struct KeyApiTable {
    entries: Vec<(String, ApiKind)>,
}

impl Default for KeyApiTable {
    fn default() -> Self {
        KeyApiTable::parse(DEFAULT_KEY_APIS).expect("bundled key API table parses")
    }
}

impl KeyApiTable {
    pub fn parse(text: &str) -> Result<Self, KeyApiError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: &str| KeyApiError {
                line: i + 1,
                message: message.to_string(),
            };
            let mut parts = line.split_whitespace();
            let path = parts.next().ok_or_else(|| err("missing path"))?;
            let kind = match parts.next() {
                Some("modularization") => ApiKind::Modularization,
                Some("instantiation") => ApiKind::Instantiation,
                Some("auxiliary") => ApiKind::Auxiliary,
                Some("exports") => ApiKind::Exports,
                Some(other) => return Err(err(&format!("unknown kind `{other}`"))),
                None => return Err(err("missing kind")),
            };
            if parts.next().is_some() {
                return Err(err("trailing fields"));
            }
            entries.push((path.to_string(), kind));
        }
        Ok(KeyApiTable { entries })
    }

    pub fn lookup(&self, path: &str) -> Option<ApiKind> {
        self.entries
            .iter()
            .find(|(p, k)| p == path && *k != ApiKind::Exports)
            .map(|(_, k)| *k)
    }

    pub fn is_exports_property(&self, name: &str) -> bool {
        self.entries
            .iter()
            .any(|(p, k)| p == name && *k == ApiKind::Exports)
    }

    pub fn contains(&self, path: &str) -> bool {
        self.entries.iter().any(|(p, _)| p == path)
    }
}

/// A call or construction of a key API.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Site {
    pub index: usize,
    pub node: NodeId,
    pub api: String,
    pub kind: ApiKind,
    pub module_arg: Option<NodeId>,
    pub import_object: Option<NodeId>,
}

/// A call of a Wasm export from JavaScript.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Invocation {
    pub call: NodeId,
    pub export: String,
    /// Index of the instantiation site the instance came from.
    pub site: usize,
}

#[derive(Clone, Debug, Default)]
pub struct InteropMap {
    /// All key-API sites in source order.
    pub sites: Vec<Site>,
    /// Per instantiation site: (wasm module, field) to the JS value node.
    pub import_bindings: BTreeMap<usize, BTreeMap<(String, String), NodeId>>,
    pub export_invocations: Vec<Invocation>,
    pub binaries: BTreeMap<usize, BinaryOrigin>,
}

impl InteropMap {
    pub fn is_empty(&self) -> bool {
        self.sites.is_empty() && self.export_invocations.is_empty()
    }

    pub fn instantiation_sites(&self) -> impl Iterator<Item = &Site> {
        self.sites
            .iter()
            .filter(|s| s.kind == ApiKind::Instantiation)
    }

    pub fn site_at(&self, node: NodeId) -> Option<&Site> {
        self.sites.iter().find(|s| s.node == node)
    }

    pub fn invocations_of(&self, site: usize) -> impl Iterator<Item = &Invocation> {
        self.export_invocations
            .iter()
            .filter(move |i| i.site == site)
    }
}

/// Canonical API path of a callee, following aliases and stripping
/// global-object prefixes.
pub fn callee_path(pdg: &Pdg, e: &Expr) -> Option<String> {
    let raw = raw_path(pdg, e, 0)?;
    let mut path = raw.as_str();
    loop {
        let stripped = ["window.", "self.", "globalThis."]
            .iter()
            .find_map(|p| path.strip_prefix(p));
        match stripped {
            Some(rest) => path = rest,
            None => break,
        }
    }
    Some(path.to_string())
}

fn raw_path(pdg: &Pdg, e: &Expr, depth: usize) -> Option<String> {
    if depth > ALIAS_DEPTH {
        return None;
    }
    match &e.kind {
        ExprKind::Ident(name) => match pdg.binding_of_use(e.id) {
            Some(b) if b.kind != BindingKind::ImplicitGlobal => {
                let [def] = b.defs.as_slice() else {
                    return None;
                };
                let value = pdg.def_value(*def)?;
                match value.kind {
                    ExprKind::Ident(_) | ExprKind::Member { .. } => raw_path(pdg, value, depth + 1),
                    _ => None,
                }
            }
            _ => Some(name.clone()),
        },
        ExprKind::Member { object, .. } => {
            let prop = e.member_name()?;
            Some(format!("{}.{prop}", raw_path(pdg, object, depth + 1)?))
        }
        _ => None,
    }
}

/// Resolves an expression to an object literal, through one variable.
fn object_literal<'a>(pdg: &Pdg<'a>, e: &'a Expr) -> Option<&'a [Property]> {
    match &e.kind {
        ExprKind::Object(props) => Some(props),
        ExprKind::Ident(_) => {
            let b = pdg.binding_of_use(e.id)?;
            b.defs.iter().find_map(|d| match &pdg.def_value(*d)?.kind {
                ExprKind::Object(props) => Some(props.as_slice()),
                _ => None,
            })
        }
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Kind {
    Module,
    Instance,
    Exports,
    Export(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Ty {
    site: usize,
    kind: Kind,
    promise: bool,
}

/// Finds instantiation sites, import bindings and export invocations.
pub fn find_interops(pdg: &Pdg, table: &KeyApiTable) -> InteropMap {
    let mut map = InteropMap::default();
    walk_program(pdg.ast, &mut |n| {
        let NodeRef::Expr(e) = n else { return };
        let (callee, args, is_new) = match &e.kind {
            ExprKind::Call { callee, args } => (callee, args, false),
            ExprKind::New { callee, args } => (callee, args, true),
            _ => return,
        };
        let Some(path) = callee_path(pdg, callee) else {
            return;
        };
        let Some(kind) = table.lookup(&path) else {
            return;
        };
        // Module and Instance are constructors; the rest are plain calls.
        let ctor = matches!(
            path.as_str(),
            "WebAssembly.Module"
                | "WebAssembly.Instance"
                | "WebAssembly.Memory"
                | "WebAssembly.Table"
        );
        if ctor != is_new && path.starts_with("WebAssembly.") {
            return;
        }
        map.sites.push(Site {
            index: map.sites.len(),
            node: e.id,
            api: path,
            kind,
            module_arg: args.first().map(|a| a.id),
            import_object: if kind == ApiKind::Instantiation {
                args.get(1).map(|a| a.id)
            } else {
                None
            },
        });
    });

    for site in map
        .sites
        .iter()
        .filter(|s| s.kind == ApiKind::Instantiation)
    {
        let Some(obj) = site.import_object.and_then(|id| pdg.expr(id)) else {
            continue;
        };
        let Some(outer) = object_literal(pdg, obj) else {
            continue;
        };
        let entry = map.import_bindings.entry(site.index).or_default();
        for module in outer {
            let Some(inner) = object_literal(pdg, &module.value) else {
                continue;
            };
            for field in inner {
                entry
                    .entry((module.key.as_key(), field.key.as_key()))
                    .or_insert(field.value.id);
            }
        }
    }

    map.export_invocations = propagate(pdg, table, &map.sites);
    map
}

fn propagate(pdg: &Pdg, table: &KeyApiTable, sites: &[Site]) -> Vec<Invocation> {
    let mut queue = VecDeque::new();
    for s in sites {
        let (kind, promise) = match s.api.as_str() {
            "WebAssembly.Module" => (Kind::Module, false),
            "WebAssembly.Instance" => (Kind::Instance, false),
            _ => match s.kind {
                ApiKind::Modularization => (Kind::Module, true),
                ApiKind::Instantiation => (Kind::Instance, true),
                _ => continue,
            },
        };
        queue.push_back((
            s.node,
            Ty {
                site: s.index,
                kind,
                promise,
            },
        ));
    }
    let mut seen = HashSet::new();
    let mut invocations = Vec::new();
    let mut invoked = HashSet::new();
    while let Some((n, ty)) = queue.pop_front() {
        if !seen.insert((n, ty.clone())) {
            continue;
        }
        if let (Kind::Export(name), false) = (&ty.kind, ty.promise) {
            if let Some(parent) = pdg.parent(n).and_then(|p| pdg.expr(p)) {
                if let ExprKind::Call { callee, .. } = &parent.kind {
                    if callee.id == n
                        && sites
                            .iter()
                            .any(|s| s.index == ty.site && s.kind == ApiKind::Instantiation)
                        && invoked.insert(parent.id)
                    {
                        invocations.push(Invocation {
                            call: parent.id,
                            export: name.clone(),
                            site: ty.site,
                        });
                    }
                }
            }
        }
        for s in pdg.successors(n) {
            if let Some(next) = transfer(pdg, table, n, s, &ty) {
                queue.push_back((s, next));
            }
        }
    }
    invocations.sort_by_key(|i| i.call);
    invocations
}

fn transfer(pdg: &Pdg, table: &KeyApiTable, from: NodeId, to: NodeId, ty: &Ty) -> Option<Ty> {
    let same = Some(ty.clone());
    match pdg.node(to)? {
        NodeRef::Declarator(_) => same,
        // A parameter: either a `.then` callback fed by a promise, or a
        // local function fed by an argument.
        NodeRef::Ident(_) => {
            let via_then = pdg
                .parent(from)
                .and_then(|p| pdg.expr(p))
                .is_some_and(|m| m.member_name() == Some("then"));
            if via_then {
                Some(Ty {
                    promise: false,
                    ..ty.clone()
                })
            } else {
                same
            }
        }
        NodeRef::Expr(e) => match &e.kind {
            ExprKind::Ident(_) => same,
            ExprKind::Member { object, .. } if object.id == from => {
                if ty.promise {
                    return None;
                }
                let name = e.member_name()?;
                let kind = match (&ty.kind, name) {
                    (Kind::Instance, n) if table.is_exports_property(n) => Kind::Exports,
                    (Kind::Instance, "instance") => Kind::Instance,
                    (Kind::Instance, "module") => Kind::Module,
                    (Kind::Exports, n) => Kind::Export(n.to_string()),
                    _ => return None,
                };
                Some(Ty { kind, ..ty.clone() })
            }
            ExprKind::Call { callee, .. } if callee.id != from => {
                // A returned value reaching its call; through `.then` the
                // call yields a promise of it.
                if callee.member_name() == Some("then") {
                    Some(Ty {
                        promise: true,
                        ..ty.clone()
                    })
                } else {
                    same
                }
            }
            ExprKind::Assign { .. } | ExprKind::Conditional { .. } | ExprKind::Sequence(_) => same,
            ExprKind::Binary {
                op: BinaryOp::And | BinaryOp::Or | BinaryOp::Nullish,
                ..
            } => same,
            _ => None,
        },
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::js::parse_js;
    use crate::pdg::build_pdg;

    fn interops(src: &str) -> InteropMap {
        let ast = parse_js(src).unwrap();
        let pdg = build_pdg(&ast);
        find_interops(&pdg, &KeyApiTable::default())
    }

    #[test]
    fn pure_js_is_empty() {
        let m = interops("var a = 1; function f(x) { return x + a; } f(2);");
        assert!(m.is_empty());
    }

    #[test]
    fn promise_parameter_flow() {
        let m = interops("WebAssembly.instantiate(buf, imp).then(r => r.instance.exports.run());");
        assert_eq!(m.instantiation_sites().count(), 1);
        assert_eq!(m.export_invocations.len(), 1);
        assert_eq!(m.export_invocations[0].export, "run");
        assert_eq!(m.export_invocations[0].site, 0);
    }

    #[test]
    fn aliases_and_prefixes() {
        let m = interops("var W = window.WebAssembly; var inst = new W.Instance(new W[\"Module\"](b), {}); inst.exports.go(1);");
        let apis: Vec<_> = m.sites.iter().map(|s| s.api.as_str()).collect();
        assert_eq!(apis, ["WebAssembly.Instance", "WebAssembly.Module"]);
        assert_eq!(m.export_invocations.len(), 1);
        assert_eq!(m.export_invocations[0].export, "go");
    }

    #[test]
    fn import_object_one_level() {
        let m = interops("var imp = { env: { log: console.log, write: document.write } }; new WebAssembly.Instance(mod, imp);");
        let b = &m.import_bindings[&0];
        assert_eq!(b.len(), 2);
        assert!(b.contains_key(&("env".to_string(), "write".to_string())));
    }

    #[test]
    fn exports_through_local_variable_and_function() {
        let m = interops(
            "function run(e) { e.main(); }\n\
             WebAssembly.instantiate(bytes).then(function (res) { var ex = res.instance.exports; run(ex); var f = ex.other; f(); });",
        );
        let names: Vec<_> = m
            .export_invocations
            .iter()
            .map(|i| i.export.as_str())
            .collect();
        assert_eq!(names, ["main", "other"]);
    }

    #[test]
    fn table_parses_and_rejects() {
        assert!(KeyApiTable::parse("WebAssembly.instantiate instantiation\n# c\n").is_ok());
        assert_eq!(KeyApiTable::parse("foo bogus").unwrap_err().line, 1);
        let t = KeyApiTable::default();
        assert_eq!(
            t.lookup("WebAssembly.compileStreaming"),
            Some(ApiKind::Modularization)
        );
        assert!(t.is_exports_property("exports"));
    }
}
