//! Rule-based abstraction of Wasm code and data into JavaScript fragments.

mod ast;
mod code;
mod data;
mod helpers;
mod names;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::js::{Expr, NodeId, NodeIdGen, Stmt};
use crate::wasm::{DecodeError, LoadOp, StoreOp, ValType, WasmModule};

pub use ast::Builder;
pub use code::{AbstractValue, FunctionContext, ModuleAbstraction, ModulePrelude};
pub use data::abstract_data;
pub use helpers::Helper;
pub use names::NameGenerator;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MemAccess {
    Load(LoadOp),
    Store(StoreOp),
}

/// How an indexed `MEM[...]` access maps back to a Wasm memory operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemOp {
    pub access: MemAccess,
    pub offset: u32,
}

/// Type information the emitted text does not carry.
#[derive(Clone, Debug, Default)]
pub struct SideTables {
    /// Value type of every declared numeric name.
    pub decl_types: HashMap<String, ValType>,
    /// Memory operation behind each `MEM[...]` member node.
    pub mem_ops: HashMap<NodeId, MemOp>,
}

/// Mutable state shared by every abstraction in one reconstruction.
#[derive(Clone, Debug)]
pub struct Emitter {
    pub names: NameGenerator,
    pub ids: NodeIdGen,
    pub tables: SideTables,
    helpers: BTreeMap<Helper, String>,
}

impl Emitter {
    pub fn new(reserved: impl IntoIterator<Item = String>, ids: NodeIdGen) -> Self {
        Emitter {
            names: NameGenerator::new(reserved),
            ids,
            tables: SideTables::default(),
            helpers: BTreeMap::new(),
        }
    }

    pub fn builder(&mut self) -> Builder<'_> {
        Builder { ids: &mut self.ids }
    }

    /// Name of a helper, registering it on first use.
    pub fn helper(&mut self, h: Helper) -> String {
        if let Some(n) = self.helpers.get(&h) {
            return n.clone();
        }
        let name = self.names.fixed(h.base_name());
        self.helpers.insert(h, name.clone());
        name
    }

    pub fn helpers(&self) -> &BTreeMap<Helper, String> {
        &self.helpers
    }

    /// Helper lookup by emitted name.
    pub fn helper_names(&self) -> HashMap<String, Helper> {
        self.helpers.iter().map(|(h, n)| (n.clone(), *h)).collect()
    }

    /// Definitions of every registered helper, in a fixed order.
    pub fn helper_prelude(&mut self) -> Vec<Stmt> {
        let helpers: Vec<(Helper, String)> =
            self.helpers.iter().map(|(h, n)| (*h, n.clone())).collect();
        helpers
            .into_iter()
            .map(|(h, n)| h.definition(&n, &mut self.ids))
            .collect()
    }

    pub fn set_type(&mut self, name: &str, ty: ValType) {
        self.tables.decl_types.insert(name.to_string(), ty);
    }
}

/// JavaScript-like statements produced for one function or data section.
#[derive(Clone, Debug, Default)]
pub struct JsFragment {
    pub statements: Vec<Stmt>,
    /// The function's return value, when it has one.
    pub result_expr: Option<Expr>,
    pub result_type: Option<ValType>,
    pub helpers_used: BTreeSet<Helper>,
    /// Names the caller binds arguments to.
    pub params: Vec<String>,
    pub param_types: Vec<ValType>,
    /// Whether the body assigns each parameter.
    pub param_reassigned: Vec<bool>,
    pub func_index: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum AbstractionError {
    #[error("stack underflow at {instr} (instruction {position})")]
    StackUnderflow { instr: String, position: usize },
    #[error("stack height mismatch at instruction {position}")]
    StackMismatch { position: usize },
    #[error("unsupported construct at instruction {position}: {what}")]
    Unsupported { what: String, position: usize },
    #[error("function {0} does not exist")]
    UnknownFunction(u32),
    #[error("function body could not be decoded: {0}")]
    UndecodableBody(DecodeError),
}

/// A non-fatal note produced while abstracting.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Diagnostic {
    pub func: Option<u32>,
    pub message: String,
}

/// True when `module` has nothing for the code abstraction to reference
/// outside `func_index` (used by callers that want import-free checks).
pub fn is_import_free(module: &WasmModule) -> bool {
    module.imported_func_count() == 0
}
