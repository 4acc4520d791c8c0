//! Backward recovery of the Wasm bytes behind an instantiation site.

use std::collections::HashSet;
use std::path::Path;

use base64::Engine as _;

use super::{callee_path, ApiKind, InteropMap, Site};
use crate::js::visit::NodeRef;
use crate::js::{BinaryOp, Expr, ExprKind, NodeId, UnaryOp};
use crate::pdg::Pdg;

pub const DEFAULT_DEPTH_CAP: usize = 64;

const TYPED_ARRAYS: &[&str] = &["Uint8Array", "Int8Array", "Uint8ClampedArray"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnresolvedReason {
    NetworkOnly,
    DynamicConstruction,
    DepthExceeded,
}

impl UnresolvedReason {
    pub fn as_str(self) -> &'static str {
        match self {
            UnresolvedReason::NetworkOnly => "network-only",
            UnresolvedReason::DynamicConstruction => "dynamic-construction",
            UnresolvedReason::DepthExceeded => "depth-exceeded",
        }
    }

    /// Which failure to report when several paths fail.
    fn priority(self) -> u8 {
        match self {
            UnresolvedReason::NetworkOnly => 2,
            UnresolvedReason::DepthExceeded => 1,
            UnresolvedReason::DynamicConstruction => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OriginKind {
    InlineTypedArray,
    Base64String,
    HexString,
    AssetFile,
    Unresolved(UnresolvedReason),
}

impl OriginKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OriginKind::InlineTypedArray => "inline-typed-array",
            OriginKind::Base64String => "base64-string",
            OriginKind::HexString => "hex-string",
            OriginKind::AssetFile => "asset-file",
            OriginKind::Unresolved(_) => "unresolved",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryOrigin {
    pub kind: OriginKind,
    /// Absent iff unresolved.
    pub bytes: Option<Vec<u8>>,
    /// Nodes visited from the module argument to the constant source.
    pub provenance: Vec<NodeId>,
}

impl BinaryOrigin {
    pub fn unresolved(reason: UnresolvedReason) -> Self {
        BinaryOrigin {
            kind: OriginKind::Unresolved(reason),
            bytes: None,
            provenance: Vec::new(),
        }
    }

    pub fn is_resolved(&self) -> bool {
        self.bytes.is_some()
    }
}

type Found = (OriginKind, Vec<u8>);

struct Walker<'p, 'a> {
    pdg: &'p Pdg<'a>,
    interops: &'p InteropMap,
    assets: Option<&'p Path>,
    depth_cap: usize,
    visited: HashSet<NodeId>,
    path: Vec<NodeId>,
    uses_hex_parse: bool,
}

/// Walks data flow backward from the site's module argument to a constant
/// byte source.
pub fn recover_binary(
    pdg: &Pdg,
    interops: &InteropMap,
    site: &Site,
    assets: Option<&Path>,
    depth_cap: usize,
) -> BinaryOrigin {
    let Some(arg) = site.module_arg else {
        return BinaryOrigin::unresolved(UnresolvedReason::DynamicConstruction);
    };
    let mut w = Walker {
        pdg,
        interops,
        assets,
        depth_cap,
        visited: HashSet::new(),
        path: Vec::new(),
        uses_hex_parse: program_parses_hex(pdg),
    };
    match w.trace(arg, 0) {
        Ok((kind, bytes)) => BinaryOrigin {
            kind,
            bytes: Some(bytes),
            provenance: w.path,
        },
        Err(reason) => BinaryOrigin::unresolved(reason),
    }
}

fn program_parses_hex(pdg: &Pdg) -> bool {
    let mut found = false;
    crate::js::visit::walk_program(pdg.ast, &mut |n| {
        if let NodeRef::Expr(e) = n {
            if let ExprKind::Call { callee, args } = &e.kind {
                if callee.as_ident() == Some("parseInt")
                    && matches!(args.get(1).map(|a| &a.kind), Some(ExprKind::Number(r)) if *r == 16.0)
                {
                    found = true;
                }
            }
        }
    });
    found
}

fn number_to_byte(n: f64) -> Option<u8> {
    if n.fract() != 0.0 || !(-128.0..=255.0).contains(&n) {
        return None;
    }
    Some((n as i64 & 0xFF) as u8)
}

fn literal_number(e: &Expr) -> Option<f64> {
    match &e.kind {
        ExprKind::Number(n) => Some(*n),
        ExprKind::Unary {
            op: UnaryOp::Minus,
            arg,
        } => match arg.kind {
            ExprKind::Number(n) => Some(-n),
            _ => None,
        },
        _ => None,
    }
}

fn is_hex(s: &str) -> bool {
    !s.is_empty() && s.len().is_multiple_of(2) && s.bytes().all(|b| b.is_ascii_hexdigit())
}

impl Walker<'_, '_> {
    fn trace(&mut self, node: NodeId, depth: usize) -> Result<Found, UnresolvedReason> {
        if depth > self.depth_cap {
            return Err(UnresolvedReason::DepthExceeded);
        }
        if !self.visited.insert(node) {
            return Err(UnresolvedReason::DynamicConstruction);
        }
        self.path.push(node);
        let result = self.step(node, depth);
        if result.is_err() {
            self.path.pop();
        }
        result
    }

    fn first_success(
        &mut self,
        nodes: impl IntoIterator<Item = NodeId>,
        depth: usize,
    ) -> Result<Found, UnresolvedReason> {
        let mut best = UnresolvedReason::DynamicConstruction;
        for n in nodes {
            match self.trace(n, depth + 1) {
                Ok(found) => return Ok(found),
                Err(r) if r.priority() > best.priority() => best = r,
                Err(_) => {}
            }
        }
        Err(best)
    }

    fn step(&mut self, node: NodeId, depth: usize) -> Result<Found, UnresolvedReason> {
        let pdg = self.pdg;
        let Some(NodeRef::Expr(e)) = pdg.node(node) else {
            // Declarators, parameters and function nodes: follow flow.
            return self.first_success(pdg.predecessors(node), depth);
        };

        // A modularization site standing in for its bytes.
        if let Some(site) = self.interops.site_at(node) {
            if site.kind == ApiKind::Modularization {
                let arg = site
                    .module_arg
                    .ok_or(UnresolvedReason::DynamicConstruction)?;
                return self.trace(arg, depth + 1);
            }
        }

        match &e.kind {
            ExprKind::Array(items) => items
                .iter()
                .map(|i| literal_number(i).and_then(number_to_byte))
                .collect::<Option<Vec<u8>>>()
                .map(|b| (OriginKind::InlineTypedArray, b))
                .ok_or(UnresolvedReason::DynamicConstruction),
            ExprKind::String(s) if self.uses_hex_parse && is_hex(s) => {
                let bytes = hex::decode(s).map_err(|_| UnresolvedReason::DynamicConstruction)?;
                Ok((OriginKind::HexString, bytes))
            }
            ExprKind::New { callee, args } | ExprKind::Call { callee, args } => {
                let path = callee_path(pdg, callee);
                match path.as_deref() {
                    Some(p) if TYPED_ARRAYS.contains(&p) => {
                        let arg = args.first().ok_or(UnresolvedReason::DynamicConstruction)?;
                        self.trace(arg.id, depth + 1)
                    }
                    Some(p)
                        if TYPED_ARRAYS.iter().any(|t| {
                            p.strip_prefix(t)
                                .is_some_and(|r| r == ".from" || r == ".of")
                        }) =>
                    {
                        let arg = args.first().ok_or(UnresolvedReason::DynamicConstruction)?;
                        self.trace(arg.id, depth + 1)
                    }
                    Some("atob") => {
                        let arg = args.first().ok_or(UnresolvedReason::DynamicConstruction)?;
                        let text = self.const_string(arg, depth)?;
                        let bytes = base64::engine::general_purpose::STANDARD
                            .decode(text.trim())
                            .map_err(|_| UnresolvedReason::DynamicConstruction)?;
                        Ok((OriginKind::Base64String, bytes))
                    }
                    Some("fetch") => {
                        let arg = args.first().ok_or(UnresolvedReason::DynamicConstruction)?;
                        let url = self
                            .const_string(arg, depth)
                            .map_err(|_| UnresolvedReason::NetworkOnly)?;
                        self.asset(&url)
                    }
                    _ => {
                        // `x.arrayBuffer()` and similar views of the same bytes.
                        if matches!(e.kind, ExprKind::Call { .. })
                            && matches!(callee.member_name(), Some("arrayBuffer" | "slice"))
                        {
                            if let ExprKind::Member { object, .. } = &callee.kind {
                                return self.trace(object.id, depth + 1);
                            }
                        }
                        let preds: Vec<NodeId> = pdg
                            .predecessors(node)
                            .into_iter()
                            .filter(|p| *p != callee.id)
                            .collect();
                        self.first_success(preds, depth)
                    }
                }
            }
            ExprKind::Member { object, .. } => match e.member_name() {
                Some("buffer" | "length" | "body") => self.trace(object.id, depth + 1),
                _ => Err(UnresolvedReason::DynamicConstruction),
            },
            // `hex.length / 2` sizing a typed array for a char-pair loop.
            ExprKind::Binary {
                op: BinaryOp::Div,
                left,
                right,
            } if matches!(right.kind, ExprKind::Number(n) if n == 2.0) => {
                self.trace(left.id, depth + 1)
            }
            _ => self.first_success(pdg.predecessors(node), depth),
        }
    }

    fn asset(&self, url: &str) -> Result<Found, UnresolvedReason> {
        let base = url
            .split(['?', '#'])
            .next()
            .unwrap_or("")
            .rsplit('/')
            .next()
            .unwrap_or("");
        if base.is_empty() || base == "." || base == ".." {
            return Err(UnresolvedReason::NetworkOnly);
        }
        let dir = self.assets.ok_or(UnresolvedReason::NetworkOnly)?;
        std::fs::read(dir.join(base))
            .map(|b| (OriginKind::AssetFile, b))
            .map_err(|_| UnresolvedReason::NetworkOnly)
    }

    /// Evaluates a string built from literals, variables and `+`.
    fn const_string(&mut self, e: &Expr, depth: usize) -> Result<String, UnresolvedReason> {
        if depth > self.depth_cap {
            return Err(UnresolvedReason::DepthExceeded);
        }
        match &e.kind {
            ExprKind::String(s) => Ok(s.clone()),
            ExprKind::Template { quasis, exprs } if exprs.is_empty() => Ok(quasis.concat()),
            ExprKind::Binary {
                op: BinaryOp::Add,
                left,
                right,
            } => Ok(self.const_string(left, depth + 1)? + &self.const_string(right, depth + 1)?),
            ExprKind::Ident(_) => {
                let b = self
                    .pdg
                    .binding_of_use(e.id)
                    .ok_or(UnresolvedReason::DynamicConstruction)?;
                let [def] = b.defs.as_slice() else {
                    return Err(UnresolvedReason::DynamicConstruction);
                };
                let value = self
                    .pdg
                    .def_value(*def)
                    .ok_or(UnresolvedReason::DynamicConstruction)?;
                self.const_string(value, depth + 1)
            }
            _ => Err(UnresolvedReason::DynamicConstruction),
        }
    }
}
