//! Fixed JavaScript definitions for operations without a JS operator.

use crate::js::{parse_js, NodeIdGen, Stmt};
use crate::wasm::{ConvOp, FloatWidth, IntBinOp, IntCmp, IntUnOp, IntWidth};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Helper {
    Popcnt,
    Clz,
    Ctz,
    Rotl,
    Rotr,
    DivU,
    RemU,
    ShrU,
    LtU,
    GtU,
    LeU,
    GeU,
    I32Wrap,
    I64ExtendS,
    I64ExtendU,
    I32TruncS,
    I32TruncU,
    I64TruncS,
    I64TruncU,
    F32ConvertS,
    F32ConvertU,
    F64ConvertS,
    F64ConvertU,
    F32Demote,
    F64Promote,
    I64,
    MemorySize,
    MemoryGrow,
}

impl Helper {
    pub const ALL: [Helper; 28] = [
        Helper::Popcnt,
        Helper::Clz,
        Helper::Ctz,
        Helper::Rotl,
        Helper::Rotr,
        Helper::DivU,
        Helper::RemU,
        Helper::ShrU,
        Helper::LtU,
        Helper::GtU,
        Helper::LeU,
        Helper::GeU,
        Helper::I32Wrap,
        Helper::I64ExtendS,
        Helper::I64ExtendU,
        Helper::I32TruncS,
        Helper::I32TruncU,
        Helper::I64TruncS,
        Helper::I64TruncU,
        Helper::F32ConvertS,
        Helper::F32ConvertU,
        Helper::F64ConvertS,
        Helper::F64ConvertU,
        Helper::F32Demote,
        Helper::F64Promote,
        Helper::I64,
        Helper::MemorySize,
        Helper::MemoryGrow,
    ];

    /// Preferred identifier.
    pub fn base_name(self) -> &'static str {
        match self {
            Helper::Popcnt => "popcnt",
            Helper::Clz => "clz",
            Helper::Ctz => "ctz",
            Helper::Rotl => "rotl",
            Helper::Rotr => "rotr",
            Helper::DivU => "div_u",
            Helper::RemU => "rem_u",
            Helper::ShrU => "shr_u",
            Helper::LtU => "lt_u",
            Helper::GtU => "gt_u",
            Helper::LeU => "le_u",
            Helper::GeU => "ge_u",
            Helper::I32Wrap => "i32_wrap",
            Helper::I64ExtendS => "i64_extend_s",
            Helper::I64ExtendU => "i64_extend_u",
            Helper::I32TruncS => "i32_trunc_s",
            Helper::I32TruncU => "i32_trunc_u",
            Helper::I64TruncS => "i64_trunc_s",
            Helper::I64TruncU => "i64_trunc_u",
            Helper::F32ConvertS => "f32_convert_s",
            Helper::F32ConvertU => "f32_convert_u",
            Helper::F64ConvertS => "f64_convert_s",
            Helper::F64ConvertU => "f64_convert_u",
            Helper::F32Demote => "f32_demote",
            Helper::F64Promote => "f64_promote",
            Helper::I64 => "i64",
            Helper::MemorySize => "memory_size",
            Helper::MemoryGrow => "memory_grow",
        }
    }

    fn source(self) -> &'static str {
        match self {
            Helper::Popcnt => "function NAME(x) { let n = 0; x = x >>> 0; while (x !== 0) { n += x & 1; x = x >>> 1; } return n; }",
            Helper::Clz => "function NAME(x) { return Math.clz32(x); }",
            Helper::Ctz => "function NAME(x) { x = x >>> 0; if (x === 0) { return 32; } let n = 0; while ((x & 1) === 0) { x = x >>> 1; n++; } return n; }",
            Helper::Rotl => "function NAME(x, k) { k = k & 31; return (x << k | x >>> 32 - k) | 0; }",
            Helper::Rotr => "function NAME(x, k) { k = k & 31; return (x >>> k | x << 32 - k) | 0; }",
            Helper::DivU => "function NAME(a, b) { if (b === 0) { throw \"integer divide by zero\"; } return (a >>> 0) / (b >>> 0) | 0; }",
            Helper::RemU => "function NAME(a, b) { if (b === 0) { throw \"integer divide by zero\"; } return (a >>> 0) % (b >>> 0) | 0; }",
            Helper::ShrU => "function NAME(a, b) { return a >>> b | 0; }",
            Helper::LtU => "function NAME(a, b) { return (a >>> 0) < (b >>> 0) ? 1 : 0; }",
            Helper::GtU => "function NAME(a, b) { return (a >>> 0) > (b >>> 0) ? 1 : 0; }",
            Helper::LeU => "function NAME(a, b) { return (a >>> 0) <= (b >>> 0) ? 1 : 0; }",
            Helper::GeU => "function NAME(a, b) { return (a >>> 0) >= (b >>> 0) ? 1 : 0; }",
            Helper::I32Wrap => "function NAME(x) { return Number(BigInt.asIntN(32, BigInt(x))); }",
            Helper::I64ExtendS => "function NAME(x) { return x; }",
            Helper::I64ExtendU => "function NAME(x) { return x >>> 0; }",
            Helper::I32TruncS => "function NAME(x) { if (x !== x) { throw \"invalid conversion to integer\"; } return Math.trunc(x) | 0; }",
            Helper::I32TruncU => "function NAME(x) { if (x !== x) { throw \"invalid conversion to integer\"; } return Math.trunc(x) >>> 0 | 0; }",
            Helper::I64TruncS => "function NAME(x) { if (x !== x) { throw \"invalid conversion to integer\"; } return Math.trunc(x); }",
            Helper::I64TruncU => "function NAME(x) { if (x !== x) { throw \"invalid conversion to integer\"; } return Math.trunc(x); }",
            Helper::F32ConvertS => "function NAME(x) { return Math.fround(x); }",
            Helper::F32ConvertU => "function NAME(x) { return Math.fround(x < 0 ? x + 4294967296 : x); }",
            Helper::F64ConvertS => "function NAME(x) { return x; }",
            Helper::F64ConvertU => "function NAME(x) { return x < 0 ? x + 4294967296 : x; }",
            Helper::F32Demote => "function NAME(x) { return Math.fround(x); }",
            Helper::F64Promote => "function NAME(x) { return x; }",
            Helper::I64 => "function NAME(s) { return BigInt(s); }",
            Helper::MemorySize => "function NAME(m) { return m.length / 65536 | 0; }",
            Helper::MemoryGrow => "function NAME(m, d) { const old = m.length / 65536 | 0; m.length = m.length + d * 65536; return old; }",
        }
    }

    /// The definition under `name`, with ids drawn from `ids`.
    pub fn definition(self, name: &str, ids: &mut NodeIdGen) -> Stmt {
        let src = self.source().replacen("NAME", name, 1);
        let program = parse_js(&src).expect("helper source parses");
        let mut stmt = program.body.into_iter().next().expect("one declaration");
        crate::js::visit::stmt_mut(&mut stmt, &mut |id, span| {
            *id = ids.fresh();
            *span = crate::js::Span::SYNTHETIC;
        });
        stmt
    }

    pub fn for_int_unary(op: IntUnOp) -> Helper {
        match op {
            IntUnOp::Clz => Helper::Clz,
            IntUnOp::Ctz => Helper::Ctz,
            IntUnOp::Popcnt => Helper::Popcnt,
        }
    }

    pub fn for_int_binary(op: IntBinOp) -> Option<Helper> {
        Some(match op {
            IntBinOp::DivU => Helper::DivU,
            IntBinOp::RemU => Helper::RemU,
            IntBinOp::ShrU => Helper::ShrU,
            IntBinOp::Rotl => Helper::Rotl,
            IntBinOp::Rotr => Helper::Rotr,
            _ => return None,
        })
    }

    pub fn for_int_cmp(op: IntCmp) -> Option<Helper> {
        Some(match op {
            IntCmp::LtU => Helper::LtU,
            IntCmp::GtU => Helper::GtU,
            IntCmp::LeU => Helper::LeU,
            IntCmp::GeU => Helper::GeU,
            _ => return None,
        })
    }

    pub fn for_conversion(op: ConvOp) -> Helper {
        match op {
            ConvOp::I32WrapI64 => Helper::I32Wrap,
            ConvOp::I64ExtendI32 { signed: true } => Helper::I64ExtendS,
            ConvOp::I64ExtendI32 { signed: false } => Helper::I64ExtendU,
            ConvOp::Trunc {
                to: IntWidth::W32,
                signed: true,
                ..
            } => Helper::I32TruncS,
            ConvOp::Trunc {
                to: IntWidth::W32,
                signed: false,
                ..
            } => Helper::I32TruncU,
            ConvOp::Trunc {
                to: IntWidth::W64,
                signed: true,
                ..
            } => Helper::I64TruncS,
            ConvOp::Trunc {
                to: IntWidth::W64,
                signed: false,
                ..
            } => Helper::I64TruncU,
            ConvOp::Convert {
                to: FloatWidth::F32,
                signed: true,
                ..
            } => Helper::F32ConvertS,
            ConvOp::Convert {
                to: FloatWidth::F32,
                signed: false,
                ..
            } => Helper::F32ConvertU,
            ConvOp::Convert {
                to: FloatWidth::F64,
                signed: true,
                ..
            } => Helper::F64ConvertS,
            ConvOp::Convert {
                to: FloatWidth::F64,
                signed: false,
                ..
            } => Helper::F64ConvertU,
            ConvOp::F32DemoteF64 => Helper::F32Demote,
            ConvOp::F64PromoteF32 => Helper::F64Promote,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_helper_parses() {
        let mut ids = NodeIdGen::default();
        for h in Helper::ALL {
            let s = h.definition(h.base_name(), &mut ids);
            assert!(
                matches!(s.kind, crate::js::StmtKind::FunctionDecl(_)),
                "{h:?}"
            );
        }
    }
}
