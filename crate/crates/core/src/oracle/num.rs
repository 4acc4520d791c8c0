//! Wasm numeric semantics shared by the interpreter and the evaluator.

use crate::wasm::{
    ConvOp, FloatBinOp, FloatCmp, FloatWidth, IntBinOp, IntCmp, IntUnOp, IntWidth, ValType,
};

use super::{Trap, Value};

pub(crate) fn int_unary(op: IntUnOp, a: Value) -> Result<Value, Trap> {
    Ok(match a {
        Value::I32(x) => Value::I32(match op {
            IntUnOp::Clz => x.leading_zeros() as i32,
            IntUnOp::Ctz => x.trailing_zeros() as i32,
            IntUnOp::Popcnt => x.count_ones() as i32,
        }),
        Value::I64(x) => Value::I64(match op {
            IntUnOp::Clz => x.leading_zeros() as i64,
            IntUnOp::Ctz => x.trailing_zeros() as i64,
            IntUnOp::Popcnt => x.count_ones() as i64,
        }),
        _ => return Err(Trap::Type(format!("{op:?} on {a:?}"))),
    })
}

pub(crate) fn int_binary(op: IntBinOp, a: Value, b: Value) -> Result<Value, Trap> {
    match (a, b) {
        (Value::I32(x), Value::I32(y)) => bin32(op, x, y).map(Value::I32),
        (Value::I64(x), Value::I64(y)) => bin64(op, x, y).map(Value::I64),
        _ => Err(Trap::Type(format!("{op:?} on {a:?}, {b:?}"))),
    }
}

fn bin32(op: IntBinOp, x: i32, y: i32) -> Result<i32, Trap> {
    let (ux, uy) = (x as u32, y as u32);
    Ok(match op {
        IntBinOp::Add => x.wrapping_add(y),
        IntBinOp::Sub => x.wrapping_sub(y),
        IntBinOp::Mul => x.wrapping_mul(y),
        IntBinOp::DivS => {
            if y == 0 {
                return Err(Trap::DivByZero);
            }
            if x == i32::MIN && y == -1 {
                return Err(Trap::IntegerOverflow);
            }
            x / y
        }
        IntBinOp::DivU => {
            if y == 0 {
                return Err(Trap::DivByZero);
            }
            (ux / uy) as i32
        }
        IntBinOp::RemS => {
            if y == 0 {
                return Err(Trap::DivByZero);
            }
            x.wrapping_rem(y)
        }
        IntBinOp::RemU => {
            if y == 0 {
                return Err(Trap::DivByZero);
            }
            (ux % uy) as i32
        }
        IntBinOp::And => x & y,
        IntBinOp::Or => x | y,
        IntBinOp::Xor => x ^ y,
        IntBinOp::Shl => x.wrapping_shl(uy),
        IntBinOp::ShrS => x.wrapping_shr(uy),
        IntBinOp::ShrU => ux.wrapping_shr(uy) as i32,
        IntBinOp::Rotl => ux.rotate_left(uy % 32) as i32,
        IntBinOp::Rotr => ux.rotate_right(uy % 32) as i32,
    })
}

fn bin64(op: IntBinOp, x: i64, y: i64) -> Result<i64, Trap> {
    let (ux, uy) = (x as u64, y as u64);
    Ok(match op {
        IntBinOp::Add => x.wrapping_add(y),
        IntBinOp::Sub => x.wrapping_sub(y),
        IntBinOp::Mul => x.wrapping_mul(y),
        IntBinOp::DivS => {
            if y == 0 {
                return Err(Trap::DivByZero);
            }
            if x == i64::MIN && y == -1 {
                return Err(Trap::IntegerOverflow);
            }
            x / y
        }
        IntBinOp::DivU => {
            if y == 0 {
                return Err(Trap::DivByZero);
            }
            (ux / uy) as i64
        }
        IntBinOp::RemS => {
            if y == 0 {
                return Err(Trap::DivByZero);
            }
            x.wrapping_rem(y)
        }
        IntBinOp::RemU => {
            if y == 0 {
                return Err(Trap::DivByZero);
            }
            (ux % uy) as i64
        }
        IntBinOp::And => x & y,
        IntBinOp::Or => x | y,
        IntBinOp::Xor => x ^ y,
        IntBinOp::Shl => x.wrapping_shl(uy as u32),
        IntBinOp::ShrS => x.wrapping_shr(uy as u32),
        IntBinOp::ShrU => ux.wrapping_shr(uy as u32) as i64,
        IntBinOp::Rotl => ux.rotate_left((uy % 64) as u32) as i64,
        IntBinOp::Rotr => ux.rotate_right((uy % 64) as u32) as i64,
    })
}

pub(crate) fn int_cmp(op: IntCmp, a: Value, b: Value) -> Result<Value, Trap> {
    let r = match (a, b) {
        (Value::I32(x), Value::I32(y)) => {
            cmp(op, x as i64, y as i64, x as u32 as u64, y as u32 as u64)
        }
        (Value::I64(x), Value::I64(y)) => cmp(op, x, y, x as u64, y as u64),
        _ => return Err(Trap::Type(format!("{op:?} on {a:?}, {b:?}"))),
    };
    Ok(Value::I32(r as i32))
}

fn cmp(op: IntCmp, x: i64, y: i64, ux: u64, uy: u64) -> bool {
    match op {
        IntCmp::Eq => x == y,
        IntCmp::Ne => x != y,
        IntCmp::LtS => x < y,
        IntCmp::LtU => ux < uy,
        IntCmp::GtS => x > y,
        IntCmp::GtU => ux > uy,
        IntCmp::LeS => x <= y,
        IntCmp::LeU => ux <= uy,
        IntCmp::GeS => x >= y,
        IntCmp::GeU => ux >= uy,
    }
}

pub(crate) fn eqz(a: Value) -> Result<Value, Trap> {
    match a {
        Value::I32(x) => Ok(Value::I32((x == 0) as i32)),
        Value::I64(x) => Ok(Value::I32((x == 0) as i32)),
        _ => Err(Trap::Type(format!("eqz on {a:?}"))),
    }
}

pub(crate) fn float_binary(op: FloatBinOp, a: Value, b: Value) -> Result<Value, Trap> {
    Ok(match (a, b) {
        (Value::F32(x), Value::F32(y)) => Value::F32(match op {
            FloatBinOp::Add => x + y,
            FloatBinOp::Sub => x - y,
            FloatBinOp::Mul => x * y,
            FloatBinOp::Div => x / y,
        }),
        (Value::F64(x), Value::F64(y)) => Value::F64(match op {
            FloatBinOp::Add => x + y,
            FloatBinOp::Sub => x - y,
            FloatBinOp::Mul => x * y,
            FloatBinOp::Div => x / y,
        }),
        _ => return Err(Trap::Type(format!("{op:?} on {a:?}, {b:?}"))),
    })
}

pub(crate) fn float_cmp(op: FloatCmp, a: Value, b: Value) -> Result<Value, Trap> {
    let (x, y) = match (a, b) {
        (Value::F32(x), Value::F32(y)) => (x as f64, y as f64),
        (Value::F64(x), Value::F64(y)) => (x, y),
        _ => return Err(Trap::Type(format!("{op:?} on {a:?}, {b:?}"))),
    };
    let r = match op {
        FloatCmp::Eq => x == y,
        FloatCmp::Ne => x != y,
        FloatCmp::Lt => x < y,
        FloatCmp::Gt => x > y,
        FloatCmp::Le => x <= y,
        FloatCmp::Ge => x >= y,
    };
    Ok(Value::I32(r as i32))
}

fn trunc(x: f64, lo: f64, hi: f64) -> Result<f64, Trap> {
    if x.is_nan() {
        return Err(Trap::InvalidConversion);
    }
    let t = x.trunc();
    // lo is inclusive, hi exclusive
    if t < lo || t >= hi {
        return Err(Trap::IntegerOverflow);
    }
    Ok(t)
}

pub(crate) fn convert(op: ConvOp, a: Value) -> Result<Value, Trap> {
    let bad = || Trap::Type(format!("{op:?} on {a:?}"));
    Ok(match op {
        ConvOp::I32WrapI64 => match a {
            Value::I64(x) => Value::I32(x as i32),
            _ => return Err(bad()),
        },
        ConvOp::I64ExtendI32 { signed } => match a {
            Value::I32(x) if signed => Value::I64(x as i64),
            Value::I32(x) => Value::I64(x as u32 as i64),
            _ => return Err(bad()),
        },
        ConvOp::Trunc { from, to, signed } => {
            let x = match (from, a) {
                (FloatWidth::F32, Value::F32(x)) => x as f64,
                (FloatWidth::F64, Value::F64(x)) => x,
                _ => return Err(bad()),
            };
            match (to, signed) {
                (IntWidth::W32, true) => Value::I32(trunc(x, -2147483648.0, 2147483648.0)? as i32),
                (IntWidth::W32, false) => {
                    Value::I32(trunc(x, -0.5, 4294967296.0)?.max(0.0) as u32 as i32)
                }
                (IntWidth::W64, true) => {
                    Value::I64(trunc(x, -9223372036854775808.0, 9223372036854775808.0)? as i64)
                }
                (IntWidth::W64, false) => {
                    Value::I64(trunc(x, -0.5, 18446744073709551616.0)?.max(0.0) as u64 as i64)
                }
            }
        }
        ConvOp::Convert { from, to, signed } => {
            let v = match (from, a) {
                (IntWidth::W32, Value::I32(x)) => {
                    if signed {
                        IntSrc::S(x as i64)
                    } else {
                        IntSrc::U(x as u32 as u64)
                    }
                }
                (IntWidth::W64, Value::I64(x)) => {
                    if signed {
                        IntSrc::S(x)
                    } else {
                        IntSrc::U(x as u64)
                    }
                }
                _ => return Err(bad()),
            };
            match (to, v) {
                (FloatWidth::F32, IntSrc::S(x)) => Value::F32(x as f32),
                (FloatWidth::F32, IntSrc::U(x)) => Value::F32(x as f32),
                (FloatWidth::F64, IntSrc::S(x)) => Value::F64(x as f64),
                (FloatWidth::F64, IntSrc::U(x)) => Value::F64(x as f64),
            }
        }
        ConvOp::F32DemoteF64 => match a {
            Value::F64(x) => Value::F32(x as f32),
            _ => return Err(bad()),
        },
        ConvOp::F64PromoteF32 => match a {
            Value::F32(x) => Value::F64(x as f64),
            _ => return Err(bad()),
        },
    })
}

enum IntSrc {
    S(i64),
    U(u64),
}

/// Little-endian load of `bytes` bytes at `ea`.
pub(crate) fn load(
    mem: &[u8],
    ea: u64,
    ty: ValType,
    bytes: u8,
    signed: bool,
) -> Result<Value, Trap> {
    let end = ea.checked_add(bytes as u64).ok_or(Trap::OutOfBounds)?;
    if end > mem.len() as u64 {
        return Err(Trap::OutOfBounds);
    }
    let slice = &mem[ea as usize..end as usize];
    let mut raw = [0u8; 8];
    raw[..bytes as usize].copy_from_slice(slice);
    let mut v = u64::from_le_bytes(raw);
    if signed && bytes < 8 {
        let shift = 64 - 8 * bytes as u32;
        v = (((v << shift) as i64) >> shift) as u64;
    }
    Ok(match ty {
        ValType::I32 => Value::I32(v as i32),
        ValType::I64 => Value::I64(v as i64),
        ValType::F32 => Value::F32(f32::from_bits(v as u32)),
        ValType::F64 => Value::F64(f64::from_bits(v)),
    })
}

pub(crate) fn store(mem: &mut [u8], ea: u64, bytes: u8, v: Value) -> Result<(), Trap> {
    let end = ea.checked_add(bytes as u64).ok_or(Trap::OutOfBounds)?;
    if end > mem.len() as u64 {
        return Err(Trap::OutOfBounds);
    }
    let raw = match v {
        Value::I32(x) => x as u32 as u64,
        Value::I64(x) => x as u64,
        Value::F32(x) => x.to_bits() as u64,
        Value::F64(x) => x.to_bits(),
    };
    mem[ea as usize..end as usize].copy_from_slice(&raw.to_le_bytes()[..bytes as usize]);
    Ok(())
}

pub(crate) const PAGE: usize = 65536;

/// `memory.grow`: the old page count, or -1 when the limit forbids it.
pub(crate) fn grow(mem: &mut Vec<u8>, delta: i32, max: Option<u32>) -> i32 {
    let old = (mem.len() / PAGE) as u64;
    let new = old + delta as u32 as u64;
    let cap = max.map_or(65536, |m| m as u64).min(65536);
    if new > cap {
        return -1;
    }
    mem.resize(new as usize * PAGE, 0);
    old as i32
}
