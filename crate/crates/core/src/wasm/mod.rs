//! WebAssembly binary decoder for the MVP core.

mod decode;
pub mod instr;
pub mod leb;

pub use decode::{decode_body, decode_module};
pub use instr::*;
pub use leb::{decode_sleb, decode_sleb64, decode_uleb};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("bad magic or version at offset {offset}")]
    BadMagic { offset: usize },
    #[error("truncated input at offset {offset}")]
    TruncatedSection { offset: usize },
    #[error("malformed LEB128 at offset {offset}")]
    MalformedLeb { offset: usize },
    #[error("unsupported opcode 0x{byte:02x} at offset {offset}")]
    UnsupportedOpcode { byte: u32, offset: usize },
    #[error("unbalanced block structure at offset {offset}")]
    Unbalanced { offset: usize },
    #[error("section {id} out of order at offset {offset}")]
    SectionOrder { id: u8, offset: usize },
    #[error("malformed module at offset {offset}: {what}")]
    Malformed { offset: usize, what: String },
}

impl DecodeError {
    pub fn offset(&self) -> usize {
        match self {
            DecodeError::BadMagic { offset }
            | DecodeError::TruncatedSection { offset }
            | DecodeError::MalformedLeb { offset }
            | DecodeError::UnsupportedOpcode { offset, .. }
            | DecodeError::Unbalanced { offset }
            | DecodeError::SectionOrder { offset, .. }
            | DecodeError::Malformed { offset, .. } => *offset,
        }
    }

    /// Truncation reported at the last valid byte so offsets stay in range.
    pub(crate) fn truncated(bytes: &[u8], at: usize) -> Self {
        DecodeError::TruncatedSection {
            offset: at.min(bytes.len().saturating_sub(1)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FuncType {
    pub params: Vec<ValType>,
    pub results: Vec<ValType>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub min: u32,
    pub max: Option<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ImportKind {
    Func(u32),
    Table(Limits),
    Memory(Limits),
    Global { ty: ValType, mutable: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Import {
    pub module: String,
    pub field: String,
    pub kind: ImportKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Function {
    pub type_idx: u32,
    /// Declared locals, excluding parameters.
    pub locals: Vec<ValType>,
    /// The decoded body, or the reason it could not be decoded.
    pub body: Result<Vec<Instr>, DecodeError>,
    /// Byte offset of the body within the module.
    pub offset: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExternalKind {
    Func,
    Table,
    Memory,
    Global,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Export {
    pub name: String,
    pub kind: ExternalKind,
    pub index: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Global {
    pub ty: ValType,
    pub mutable: bool,
    pub init: Vec<Instr>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegmentOffset {
    Const(u32),
    Dynamic,
    Passive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataSegment {
    pub mem_idx: u32,
    /// Empty for passive segments.
    pub offset_expr: Vec<Instr>,
    pub passive: bool,
    pub bytes: Vec<u8>,
}

impl DataSegment {
    /// Only `i32.const k` offsets are evaluated.
    pub fn offset(&self) -> SegmentOffset {
        if self.passive {
            return SegmentOffset::Passive;
        }
        match self.offset_expr.as_slice() {
            [Instr::I32Const(k)] => SegmentOffset::Const(*k as u32),
            _ => SegmentOffset::Dynamic,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElementSegment {
    pub table_idx: u32,
    pub offset_expr: Vec<Instr>,
    pub func_indices: Vec<u32>,
}

impl ElementSegment {
    pub fn const_offset(&self) -> Option<u32> {
        match self.offset_expr.as_slice() {
            [Instr::I32Const(k)] => Some(*k as u32),
            _ => None,
        }
    }
}

/// A section the decoder did not interpret.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkippedSection {
    pub id: u8,
    pub offset: usize,
    /// Name of a custom section.
    pub name: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WasmModule {
    pub types: Vec<FuncType>,
    pub imports: Vec<Import>,
    pub functions: Vec<Function>,
    pub tables: Vec<Limits>,
    pub memories: Vec<Limits>,
    pub globals: Vec<Global>,
    pub exports: Vec<Export>,
    pub start: Option<u32>,
    pub elements: Vec<ElementSegment>,
    pub data_segments: Vec<DataSegment>,
    pub skipped_sections: Vec<SkippedSection>,
}

impl WasmModule {
    pub fn imported_funcs(&self) -> impl Iterator<Item = (&Import, u32)> {
        self.imports.iter().filter_map(|i| match i.kind {
            ImportKind::Func(t) => Some((i, t)),
            _ => None,
        })
    }

    pub fn imported_func_count(&self) -> u32 {
        self.imported_funcs().count() as u32
    }

    pub fn imported_globals(&self) -> impl Iterator<Item = (&Import, ValType, bool)> {
        self.imports.iter().filter_map(|i| match i.kind {
            ImportKind::Global { ty, mutable } => Some((i, ty, mutable)),
            _ => None,
        })
    }

    pub fn total_funcs(&self) -> u32 {
        self.imported_func_count() + self.functions.len() as u32
    }

    /// Type index of a function in the combined index space.
    pub fn func_type_idx(&self, func_idx: u32) -> Option<u32> {
        let imported = self.imported_func_count();
        if func_idx < imported {
            self.imported_funcs().nth(func_idx as usize).map(|(_, t)| t)
        } else {
            self.functions
                .get((func_idx - imported) as usize)
                .map(|f| f.type_idx)
        }
    }

    pub fn func_type(&self, func_idx: u32) -> Option<&FuncType> {
        self.types.get(self.func_type_idx(func_idx)? as usize)
    }

    /// The import a function index refers to, if imported.
    pub fn func_import(&self, func_idx: u32) -> Option<&Import> {
        self.imported_funcs().nth(func_idx as usize).map(|(i, _)| i)
    }

    /// The internal function for a combined index, if not imported.
    pub fn internal_func(&self, func_idx: u32) -> Option<&Function> {
        let imported = self.imported_func_count();
        func_idx
            .checked_sub(imported)
            .and_then(|i| self.functions.get(i as usize))
    }

    pub fn global_type(&self, idx: u32) -> Option<(ValType, bool)> {
        let imported: Vec<_> = self.imported_globals().collect();
        if (idx as usize) < imported.len() {
            let (_, ty, m) = imported[idx as usize];
            Some((ty, m))
        } else {
            self.globals
                .get(idx as usize - imported.len())
                .map(|g| (g.ty, g.mutable))
        }
    }

    pub fn global_count(&self) -> u32 {
        (self.imported_globals().count() + self.globals.len()) as u32
    }

    pub fn exported_func(&self, name: &str) -> Option<u32> {
        self.exports
            .iter()
            .find(|e| e.kind == ExternalKind::Func && e.name == name)
            .map(|e| e.index)
    }

    pub fn has_memory(&self) -> bool {
        !self.memories.is_empty()
            || self
                .imports
                .iter()
                .any(|i| matches!(i.kind, ImportKind::Memory(_)))
    }

    /// Table contents from constant-offset element segments.
    pub fn table_entries(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for seg in &self.elements {
            if let Some(base) = seg.const_offset() {
                for (i, f) in seg.func_indices.iter().enumerate() {
                    out.push((base.wrapping_add(i as u32), *f));
                }
            }
        }
        out
    }
}
