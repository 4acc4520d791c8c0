//! Structured instruction set for the supported subset.

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ValType {
    I32,
    I64,
    F32,
    F64,
}

impl ValType {
    pub fn from_byte(b: u8) -> Option<ValType> {
        match b {
            0x7F => Some(ValType::I32),
            0x7E => Some(ValType::I64),
            0x7D => Some(ValType::F32),
            0x7C => Some(ValType::F64),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ValType::I32 => "i32",
            ValType::I64 => "i64",
            ValType::F32 => "f32",
            ValType::F64 => "f64",
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, ValType::F32 | ValType::F64)
    }
}

impl fmt::Display for ValType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockType {
    Empty,
    Value(ValType),
    /// Multi-value block signature by type index.
    Func(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntWidth {
    W32,
    W64,
}

impl IntWidth {
    pub fn val_type(self) -> ValType {
        match self {
            IntWidth::W32 => ValType::I32,
            IntWidth::W64 => ValType::I64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FloatWidth {
    F32,
    F64,
}

impl FloatWidth {
    pub fn val_type(self) -> ValType {
        match self {
            FloatWidth::F32 => ValType::F32,
            FloatWidth::F64 => ValType::F64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntUnOp {
    Clz,
    Ctz,
    Popcnt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntBinOp {
    Add,
    Sub,
    Mul,
    DivS,
    DivU,
    RemS,
    RemU,
    And,
    Or,
    Xor,
    Shl,
    ShrS,
    ShrU,
    Rotl,
    Rotr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntCmp {
    Eq,
    Ne,
    LtS,
    LtU,
    GtS,
    GtU,
    LeS,
    LeU,
    GeS,
    GeU,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FloatBinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FloatCmp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvOp {
    I32WrapI64,
    I64ExtendI32 {
        signed: bool,
    },
    Trunc {
        from: FloatWidth,
        to: IntWidth,
        signed: bool,
    },
    Convert {
        from: IntWidth,
        to: FloatWidth,
        signed: bool,
    },
    F32DemoteF64,
    F64PromoteF32,
}

impl ConvOp {
    pub fn operand(self) -> ValType {
        match self {
            ConvOp::I32WrapI64 => ValType::I64,
            ConvOp::I64ExtendI32 { .. } => ValType::I32,
            ConvOp::Trunc { from, .. } => from.val_type(),
            ConvOp::Convert { from, .. } => from.val_type(),
            ConvOp::F32DemoteF64 => ValType::F64,
            ConvOp::F64PromoteF32 => ValType::F32,
        }
    }

    pub fn result(self) -> ValType {
        match self {
            ConvOp::I32WrapI64 => ValType::I32,
            ConvOp::I64ExtendI32 { .. } => ValType::I64,
            ConvOp::Trunc { to, .. } => to.val_type(),
            ConvOp::Convert { to, .. } => to.val_type(),
            ConvOp::F32DemoteF64 => ValType::F32,
            ConvOp::F64PromoteF32 => ValType::F64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemArg {
    pub align: u32,
    pub offset: u32,
}

/// A load: `ty` is the pushed type, `bytes` the access width.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoadOp {
    pub ty: ValType,
    pub bytes: u8,
    pub signed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StoreOp {
    pub ty: ValType,
    pub bytes: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instr {
    Unreachable,
    Nop,
    Block {
        ty: BlockType,
        body: Vec<Instr>,
    },
    Loop {
        ty: BlockType,
        body: Vec<Instr>,
    },
    If {
        ty: BlockType,
        then: Vec<Instr>,
        otherwise: Vec<Instr>,
    },
    Br(u32),
    BrIf(u32),
    BrTable {
        targets: Vec<u32>,
        default: u32,
    },
    Return,
    Call(u32),
    CallIndirect {
        type_idx: u32,
        table: u32,
    },
    Drop,
    Select,
    LocalGet(u32),
    LocalSet(u32),
    LocalTee(u32),
    GlobalGet(u32),
    GlobalSet(u32),
    Load(LoadOp, MemArg),
    Store(StoreOp, MemArg),
    MemorySize,
    MemoryGrow,
    I32Const(i32),
    I64Const(i64),
    /// Raw IEEE-754 bits.
    F32Const(u32),
    F64Const(u64),
    IntEqz(IntWidth),
    IntUn(IntWidth, IntUnOp),
    IntBin(IntWidth, IntBinOp),
    IntCmp(IntWidth, IntCmp),
    FloatBin(FloatWidth, FloatBinOp),
    FloatCmp(FloatWidth, FloatCmp),
    Conv(ConvOp),
}

impl Instr {
    /// Text-format mnemonic, used in diagnostics.
    pub fn mnemonic(&self) -> String {
        fn int(w: IntWidth) -> &'static str {
            match w {
                IntWidth::W32 => "i32",
                IntWidth::W64 => "i64",
            }
        }
        fn float(w: FloatWidth) -> &'static str {
            match w {
                FloatWidth::F32 => "f32",
                FloatWidth::F64 => "f64",
            }
        }
        fn sx(signed: bool) -> &'static str {
            if signed {
                "s"
            } else {
                "u"
            }
        }
        match self {
            Instr::Unreachable => "unreachable".into(),
            Instr::Nop => "nop".into(),
            Instr::Block { .. } => "block".into(),
            Instr::Loop { .. } => "loop".into(),
            Instr::If { .. } => "if".into(),
            Instr::Br(_) => "br".into(),
            Instr::BrIf(_) => "br_if".into(),
            Instr::BrTable { .. } => "br_table".into(),
            Instr::Return => "return".into(),
            Instr::Call(_) => "call".into(),
            Instr::CallIndirect { .. } => "call_indirect".into(),
            Instr::Drop => "drop".into(),
            Instr::Select => "select".into(),
            Instr::LocalGet(_) => "local.get".into(),
            Instr::LocalSet(_) => "local.set".into(),
            Instr::LocalTee(_) => "local.tee".into(),
            Instr::GlobalGet(_) => "global.get".into(),
            Instr::GlobalSet(_) => "global.set".into(),
            Instr::Load(op, _) => {
                let full = match op.ty {
                    ValType::I32 | ValType::F32 => 4,
                    _ => 8,
                };
                if op.bytes == full {
                    format!("{}.load", op.ty)
                } else {
                    format!("{}.load{}_{}", op.ty, op.bytes * 8, sx(op.signed))
                }
            }
            Instr::Store(op, _) => {
                let full = match op.ty {
                    ValType::I32 | ValType::F32 => 4,
                    _ => 8,
                };
                if op.bytes == full {
                    format!("{}.store", op.ty)
                } else {
                    format!("{}.store{}", op.ty, op.bytes * 8)
                }
            }
            Instr::MemorySize => "memory.size".into(),
            Instr::MemoryGrow => "memory.grow".into(),
            Instr::I32Const(_) => "i32.const".into(),
            Instr::I64Const(_) => "i64.const".into(),
            Instr::F32Const(_) => "f32.const".into(),
            Instr::F64Const(_) => "f64.const".into(),
            Instr::IntEqz(w) => format!("{}.eqz", int(*w)),
            Instr::IntUn(w, op) => format!("{}.{}", int(*w), format!("{op:?}").to_lowercase()),
            Instr::IntBin(w, op) => {
                let name = match op {
                    IntBinOp::Add => "add",
                    IntBinOp::Sub => "sub",
                    IntBinOp::Mul => "mul",
                    IntBinOp::DivS => "div_s",
                    IntBinOp::DivU => "div_u",
                    IntBinOp::RemS => "rem_s",
                    IntBinOp::RemU => "rem_u",
                    IntBinOp::And => "and",
                    IntBinOp::Or => "or",
                    IntBinOp::Xor => "xor",
                    IntBinOp::Shl => "shl",
                    IntBinOp::ShrS => "shr_s",
                    IntBinOp::ShrU => "shr_u",
                    IntBinOp::Rotl => "rotl",
                    IntBinOp::Rotr => "rotr",
                };
                format!("{}.{name}", int(*w))
            }
            Instr::IntCmp(w, op) => {
                let name = match op {
                    IntCmp::Eq => "eq",
                    IntCmp::Ne => "ne",
                    IntCmp::LtS => "lt_s",
                    IntCmp::LtU => "lt_u",
                    IntCmp::GtS => "gt_s",
                    IntCmp::GtU => "gt_u",
                    IntCmp::LeS => "le_s",
                    IntCmp::LeU => "le_u",
                    IntCmp::GeS => "ge_s",
                    IntCmp::GeU => "ge_u",
                };
                format!("{}.{name}", int(*w))
            }
            Instr::FloatBin(w, op) => format!("{}.{}", float(*w), format!("{op:?}").to_lowercase()),
            Instr::FloatCmp(w, op) => format!("{}.{}", float(*w), format!("{op:?}").to_lowercase()),
            Instr::Conv(op) => match op {
                ConvOp::I32WrapI64 => "i32.wrap_i64".into(),
                ConvOp::I64ExtendI32 { signed } => format!("i64.extend_i32_{}", sx(*signed)),
                ConvOp::Trunc { from, to, signed } => {
                    format!("{}.trunc_{}_{}", int(*to), float(*from), sx(*signed))
                }
                ConvOp::Convert { from, to, signed } => {
                    format!("{}.convert_{}_{}", float(*to), int(*from), sx(*signed))
                }
                ConvOp::F32DemoteF64 => "f32.demote_f64".into(),
                ConvOp::F64PromoteF32 => "f64.promote_f32".into(),
            },
        }
    }

    /// Visits this instruction and every nested one, pre-order.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Instr)) {
        f(self);
        match self {
            Instr::Block { body, .. } | Instr::Loop { body, .. } => {
                body.iter().for_each(|i| i.walk(f));
            }
            Instr::If {
                then, otherwise, ..
            } => {
                then.iter().for_each(|i| i.walk(f));
                otherwise.iter().for_each(|i| i.walk(f));
            }
            _ => {}
        }
    }
}

/// Decodes one non-structured opcode that needs no immediates.
pub(crate) fn simple_opcode(op: u8) -> Option<Instr> {
    use FloatWidth::*;
    use IntWidth::*;
    let int_bin = |w, o| Some(Instr::IntBin(w, o));
    Some(match op {
        0x00 => Instr::Unreachable,
        0x01 => Instr::Nop,
        0x0F => Instr::Return,
        0x1A => Instr::Drop,
        0x1B => Instr::Select,
        0x45 => Instr::IntEqz(W32),
        0x46..=0x4F => Instr::IntCmp(W32, int_cmp(op - 0x46)),
        0x50 => Instr::IntEqz(W64),
        0x51..=0x5A => Instr::IntCmp(W64, int_cmp(op - 0x51)),
        0x5B..=0x60 => Instr::FloatCmp(F32, float_cmp(op - 0x5B)),
        0x61..=0x66 => Instr::FloatCmp(F64, float_cmp(op - 0x61)),
        0x67 => Instr::IntUn(W32, IntUnOp::Clz),
        0x68 => Instr::IntUn(W32, IntUnOp::Ctz),
        0x69 => Instr::IntUn(W32, IntUnOp::Popcnt),
        0x6A..=0x78 => return int_bin(W32, int_bin_op(op - 0x6A)),
        0x79 => Instr::IntUn(W64, IntUnOp::Clz),
        0x7A => Instr::IntUn(W64, IntUnOp::Ctz),
        0x7B => Instr::IntUn(W64, IntUnOp::Popcnt),
        0x7C..=0x8A => return int_bin(W64, int_bin_op(op - 0x7C)),
        0x92..=0x95 => Instr::FloatBin(F32, float_bin(op - 0x92)),
        0xA0..=0xA3 => Instr::FloatBin(F64, float_bin(op - 0xA0)),
        0xA7 => Instr::Conv(ConvOp::I32WrapI64),
        0xA8..=0xAB => Instr::Conv(ConvOp::Trunc {
            from: if op < 0xAA { F32 } else { F64 },
            to: W32,
            signed: op.is_multiple_of(2),
        }),
        0xAC => Instr::Conv(ConvOp::I64ExtendI32 { signed: true }),
        0xAD => Instr::Conv(ConvOp::I64ExtendI32 { signed: false }),
        0xAE..=0xB1 => Instr::Conv(ConvOp::Trunc {
            from: if op < 0xB0 { F32 } else { F64 },
            to: W64,
            signed: op.is_multiple_of(2),
        }),
        0xB2..=0xB5 => Instr::Conv(ConvOp::Convert {
            from: if op < 0xB4 { W32 } else { W64 },
            to: F32,
            signed: op.is_multiple_of(2),
        }),
        0xB6 => Instr::Conv(ConvOp::F32DemoteF64),
        0xB7..=0xBA => Instr::Conv(ConvOp::Convert {
            from: if op < 0xB9 { W32 } else { W64 },
            to: F64,
            signed: op % 2 == 1,
        }),
        0xBB => Instr::Conv(ConvOp::F64PromoteF32),
        _ => return None,
    })
}

fn int_cmp(i: u8) -> IntCmp {
    [
        IntCmp::Eq,
        IntCmp::Ne,
        IntCmp::LtS,
        IntCmp::LtU,
        IntCmp::GtS,
        IntCmp::GtU,
        IntCmp::LeS,
        IntCmp::LeU,
        IntCmp::GeS,
        IntCmp::GeU,
    ][i as usize]
}

fn float_cmp(i: u8) -> FloatCmp {
    [
        FloatCmp::Eq,
        FloatCmp::Ne,
        FloatCmp::Lt,
        FloatCmp::Gt,
        FloatCmp::Le,
        FloatCmp::Ge,
    ][i as usize]
}

fn float_bin(i: u8) -> FloatBinOp {
    [
        FloatBinOp::Add,
        FloatBinOp::Sub,
        FloatBinOp::Mul,
        FloatBinOp::Div,
    ][i as usize]
}

fn int_bin_op(i: u8) -> IntBinOp {
    [
        IntBinOp::Add,
        IntBinOp::Sub,
        IntBinOp::Mul,
        IntBinOp::DivS,
        IntBinOp::DivU,
        IntBinOp::RemS,
        IntBinOp::RemU,
        IntBinOp::And,
        IntBinOp::Or,
        IntBinOp::Xor,
        IntBinOp::Shl,
        IntBinOp::ShrS,
        IntBinOp::ShrU,
        IntBinOp::Rotl,
        IntBinOp::Rotr,
    ][i as usize]
}

/// Load/store opcodes 0x28..=0x3E.
pub(crate) fn memory_opcode(op: u8, memarg: MemArg) -> Option<Instr> {
    use ValType::*;
    let load = |ty, bytes, signed| Instr::Load(LoadOp { ty, bytes, signed }, memarg);
    let store = |ty, bytes| Instr::Store(StoreOp { ty, bytes }, memarg);
    Some(match op {
        0x28 => load(I32, 4, false),
        0x29 => load(I64, 8, false),
        0x2A => load(F32, 4, false),
        0x2B => load(F64, 8, false),
        0x2C => load(I32, 1, true),
        0x2D => load(I32, 1, false),
        0x2E => load(I32, 2, true),
        0x2F => load(I32, 2, false),
        0x30 => load(I64, 1, true),
        0x31 => load(I64, 1, false),
        0x32 => load(I64, 2, true),
        0x33 => load(I64, 2, false),
        0x34 => load(I64, 4, true),
        0x35 => load(I64, 4, false),
        0x36 => store(I32, 4),
        0x37 => store(I64, 8),
        0x38 => store(F32, 4),
        0x39 => store(F64, 8),
        0x3A => store(I32, 1),
        0x3B => store(I32, 2),
        0x3C => store(I64, 1),
        0x3D => store(I64, 2),
        0x3E => store(I64, 4),
        _ => return None,
    })
}
