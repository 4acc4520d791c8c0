//! Differential oracle: a reference Wasm interpreter and an evaluator for
//! the generated fragment grammar.

mod diff;
mod eval;
mod interp;
mod num;

use std::collections::HashMap;

pub use diff::{differential_check, import_paths, DiffReport, Mismatch, Observation};
pub use eval::{eval_fragment, FragmentRun};
pub use interp::{initial_memory, interp_wasm};

use crate::wasm::ValType;

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub enum Value {
    I32(i32),
    I64(i64),
    F32(f32),
    F64(f64),
}

impl Value {
    pub fn ty(self) -> ValType {
        match self {
            Value::I32(_) => ValType::I32,
            Value::I64(_) => ValType::I64,
            Value::F32(_) => ValType::F32,
            Value::F64(_) => ValType::F64,
        }
    }

    pub fn zero(ty: ValType) -> Value {
        match ty {
            ValType::I32 => Value::I32(0),
            ValType::I64 => Value::I64(0),
            ValType::F32 => Value::F32(0.0),
            ValType::F64 => Value::F64(0.0),
        }
    }

    /// Exact equality; floats compare by bits, any NaN equals any NaN.
    pub fn same(self, other: Value) -> bool {
        match (self, other) {
            (Value::I32(a), Value::I32(b)) => a == b,
            (Value::I64(a), Value::I64(b)) => a == b,
            (Value::F32(a), Value::F32(b)) => {
                (a.is_nan() && b.is_nan()) || a.to_bits() == b.to_bits()
            }
            (Value::F64(a), Value::F64(b)) => {
                (a.is_nan() && b.is_nan()) || a.to_bits() == b.to_bits()
            }
            _ => false,
        }
    }

    pub fn as_i32(self) -> Option<i32> {
        match self {
            Value::I32(v) => Some(v),
            _ => None,
        }
    }

    /// Parses `i32:5`, `i64:-1`, `f64:0.5`, or a bare integer as i32.
    pub fn parse(s: &str) -> Option<Value> {
        let (ty, v) = s.split_once(':').unwrap_or(("i32", s));
        Some(match ty {
            "i32" => Value::I32(v.parse().ok()?),
            "i64" => Value::I64(v.parse().ok()?),
            "f32" => Value::F32(v.parse().ok()?),
            "f64" => Value::F64(v.parse().ok()?),
            _ => return None,
        })
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        self.same(*other)
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::I32(v) => write!(f, "i32:{v}"),
            Value::I64(v) => write!(f, "i64:{v}"),
            Value::F32(v) => write!(f, "f32:{v}"),
            Value::F64(v) => write!(f, "f64:{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error, serde::Serialize)]
pub enum Trap {
    #[error("integer divide by zero")]
    DivByZero,
    #[error("integer overflow")]
    IntegerOverflow,
    #[error("invalid conversion to integer")]
    InvalidConversion,
    #[error("unreachable")]
    Unreachable,
    #[error("out of bounds memory access")]
    OutOfBounds,
    #[error("undefined table element")]
    UndefinedElement,
    #[error("indirect call type mismatch")]
    IndirectTypeMismatch,
    #[error("call stack exhausted")]
    StackExhausted,
    #[error("step limit exceeded")]
    FuelExhausted,
    #[error("type error: {0}")]
    Type(String),
    #[error("{0}")]
    Other(String),
}

impl Trap {
    /// The trap a thrown string literal stands for.
    pub fn from_message(msg: &str) -> Trap {
        match msg {
            "unreachable" => Trap::Unreachable,
            "integer divide by zero" => Trap::DivByZero,
            "integer overflow" => Trap::IntegerOverflow,
            "invalid conversion to integer" => Trap::InvalidConversion,
            "indirect call" => Trap::UndefinedElement,
            other => Trap::Other(other.to_string()),
        }
    }
}

/// One call into the host, in emission order.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct HostCall {
    pub callee: String,
    pub args: Vec<Value>,
    /// Extra observation made by the host stub, such as a string read from memory.
    pub note: Option<String>,
}

/// Imported behaviour for both sides of the oracle.
pub trait Host {
    /// Handles a call; the returned note is stored with the trace entry.
    fn call(
        &mut self,
        callee: &str,
        args: &[Value],
        memory: &mut [u8],
    ) -> Result<(Option<Value>, Option<String>), Trap>;
}

/// Host that returns fixed results per callee and optionally reads a
/// NUL-terminated string at the first argument.
#[derive(Clone, Debug, Default)]
pub struct StubHost {
    pub results: HashMap<String, Value>,
    pub read_strings: bool,
}

impl Host for StubHost {
    fn call(
        &mut self,
        callee: &str,
        args: &[Value],
        memory: &mut [u8],
    ) -> Result<(Option<Value>, Option<String>), Trap> {
        let note = match (self.read_strings, args.first()) {
            (true, Some(Value::I32(p))) => Some(read_cstr(memory, *p as u32 as usize)),
            _ => None,
        };
        Ok((self.results.get(callee).copied(), note))
    }
}

/// Bytes from `at` up to the first NUL, decoded lossily.
pub fn read_cstr(memory: &[u8], at: usize) -> String {
    let tail = memory.get(at..).unwrap_or(&[]);
    let end = tail.iter().position(|b| *b == 0).unwrap_or(tail.len());
    String::from_utf8_lossy(&tail[..end]).into_owned()
}

/// Outcome of running a function on either side of the oracle.
#[derive(Clone, Debug)]
pub struct Execution {
    pub outcome: Result<Option<Value>, Trap>,
    pub trace: Vec<HostCall>,
    pub memory: Vec<u8>,
}

/// Default cap on executed instructions or statements.
pub const DEFAULT_FUEL: u64 = 5_000_000;

const MAX_CALL_DEPTH: usize = 200;
