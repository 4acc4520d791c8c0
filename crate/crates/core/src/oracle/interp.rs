use std::collections::HashMap;

use crate::wasm::{BlockType, ImportKind, Instr, Limits, SegmentOffset, WasmModule};

use super::num::{self, PAGE};
use super::{Execution, Host, HostCall, Trap, Value, DEFAULT_FUEL, MAX_CALL_DEPTH};

fn memory_limits(module: &WasmModule) -> Option<Limits> {
    module.memories.first().copied().or_else(|| {
        module.imports.iter().find_map(|i| match i.kind {
            ImportKind::Memory(l) => Some(l),
            _ => None,
        })
    })
}

/// Linear memory after applying active constant-offset data segments.
pub fn initial_memory(module: &WasmModule) -> Result<Vec<u8>, Trap> {
    let pages = memory_limits(module).map_or(0, |l| l.min as usize);
    let mut mem = vec![0u8; pages * PAGE];
    for seg in &module.data_segments {
        if let SegmentOffset::Const(k) = seg.offset() {
            let start = k as usize;
            let end = start
                .checked_add(seg.bytes.len())
                .ok_or(Trap::OutOfBounds)?;
            if end > mem.len() {
                return Err(Trap::OutOfBounds);
            }
            mem[start..end].copy_from_slice(&seg.bytes);
        }
    }
    Ok(mem)
}

fn const_value(init: &[Instr], globals: &[Value]) -> Value {
    match init.first() {
        Some(Instr::I32Const(v)) => Value::I32(*v),
        Some(Instr::I64Const(v)) => Value::I64(*v),
        Some(Instr::F32Const(b)) => Value::F32(f32::from_bits(*b)),
        Some(Instr::F64Const(b)) => Value::F64(f64::from_bits(*b)),
        Some(Instr::GlobalGet(j)) => globals.get(*j as usize).copied().unwrap_or(Value::I32(0)),
        _ => Value::I32(0),
    }
}

pub(crate) fn initial_globals(module: &WasmModule) -> Vec<Value> {
    let mut globals: Vec<Value> = module
        .imported_globals()
        .map(|(_, ty, _)| Value::zero(ty))
        .collect();
    for g in &module.globals {
        let v = const_value(&g.init, &globals);
        globals.push(v);
    }
    globals
}

/// Runs function `func_idx` with `args`. `imports[k]` names the host
/// callee for imported function `k`.
pub fn interp_wasm(
    module: &WasmModule,
    func_idx: u32,
    args: &[Value],
    imports: &[String],
    host: &mut dyn Host,
) -> Execution {
    let mut m = Machine {
        module,
        imports,
        host,
        mem: Vec::new(),
        globals: initial_globals(module),
        trace: Vec::new(),
        fuel: DEFAULT_FUEL,
        depth: 0,
        table: module.table_entries().into_iter().collect(),
        max_pages: memory_limits(module).and_then(|l| l.max),
    };
    let outcome = match initial_memory(module) {
        Ok(mem) => {
            m.mem = mem;
            m.call(func_idx, args.to_vec())
        }
        Err(t) => Err(t),
    };
    Execution {
        outcome,
        trace: m.trace,
        memory: m.mem,
    }
}

enum Ctl {
    Next,
    Br(u32),
    Return,
}

struct Machine<'a> {
    module: &'a WasmModule,
    imports: &'a [String],
    host: &'a mut dyn Host,
    mem: Vec<u8>,
    globals: Vec<Value>,
    trace: Vec<HostCall>,
    fuel: u64,
    depth: usize,
    table: HashMap<u32, u32>,
    max_pages: Option<u32>,
}

struct Frame {
    locals: Vec<Value>,
    stack: Vec<Value>,
}

impl Frame {
    fn pop(&mut self) -> Result<Value, Trap> {
        self.stack
            .pop()
            .ok_or_else(|| Trap::Type("operand stack underflow".into()))
    }

    fn pop_i32(&mut self) -> Result<i32, Trap> {
        match self.pop()? {
            Value::I32(v) => Ok(v),
            v => Err(Trap::Type(format!("expected i32, found {v:?}"))),
        }
    }

    /// Keeps the top `arity` values and drops everything above `height`.
    fn unwind(&mut self, height: usize, arity: usize) {
        let keep = self.stack.split_off(self.stack.len().saturating_sub(arity));
        self.stack.truncate(height);
        self.stack.extend(keep);
    }
}

impl Machine<'_> {
    fn arity(&self, ty: &BlockType) -> usize {
        match ty {
            BlockType::Empty => 0,
            BlockType::Value(_) => 1,
            BlockType::Func(i) => self
                .module
                .types
                .get(*i as usize)
                .map_or(0, |t| t.results.len()),
        }
    }

    fn call(&mut self, f: u32, args: Vec<Value>) -> Result<Option<Value>, Trap> {
        let ty = self
            .module
            .func_type(f)
            .cloned()
            .ok_or_else(|| Trap::Other(format!("no function {f}")))?;
        if f < self.module.imported_func_count() {
            let callee = self
                .imports
                .get(f as usize)
                .cloned()
                .unwrap_or_else(|| format!("IMPORT_{f}"));
            let (res, note) = self.host.call(&callee, &args, &mut self.mem)?;
            self.trace.push(HostCall { callee, args, note });
            return Ok(ty.results.first().map(|t| res.unwrap_or(Value::zero(*t))));
        }
        if self.depth >= MAX_CALL_DEPTH {
            return Err(Trap::StackExhausted);
        }
        let func = self.module.internal_func(f).expect("typed above");
        let body = func.body.as_ref().map_err(|e| Trap::Other(e.to_string()))?;
        let mut locals = args;
        locals.extend(func.locals.iter().map(|t| Value::zero(*t)));
        let mut frame = Frame {
            locals,
            stack: Vec::new(),
        };
        self.depth += 1;
        let r = self.exec(body, &mut frame);
        self.depth -= 1;
        r?;
        Ok(if ty.results.is_empty() {
            None
        } else {
            Some(frame.pop()?)
        })
    }

    fn structured(&mut self, ty: &BlockType, body: &[Instr], fr: &mut Frame) -> Result<Ctl, Trap> {
        let height = fr.stack.len();
        let arity = self.arity(ty);
        match self.exec(body, fr)? {
            Ctl::Next => Ok(Ctl::Next),
            Ctl::Br(0) => {
                fr.unwind(height, arity);
                Ok(Ctl::Next)
            }
            Ctl::Br(n) => Ok(Ctl::Br(n - 1)),
            Ctl::Return => Ok(Ctl::Return),
        }
    }

    fn exec(&mut self, body: &[Instr], fr: &mut Frame) -> Result<Ctl, Trap> {
        for ins in body {
            if self.fuel == 0 {
                return Err(Trap::FuelExhausted);
            }
            self.fuel -= 1;
            match ins {
                Instr::Unreachable => return Err(Trap::Unreachable),
                Instr::Nop => {}
                Instr::Block { ty, body } => match self.structured(ty, body, fr)? {
                    Ctl::Next => {}
                    c => return Ok(c),
                },
                Instr::Loop { body, .. } => loop {
                    let height = fr.stack.len();
                    match self.exec(body, fr)? {
                        Ctl::Next => break,
                        Ctl::Br(0) => {
                            fr.stack.truncate(height);
                            if self.fuel == 0 {
                                return Err(Trap::FuelExhausted);
                            }
                        }
                        Ctl::Br(n) => return Ok(Ctl::Br(n - 1)),
                        Ctl::Return => return Ok(Ctl::Return),
                    }
                },
                Instr::If {
                    ty,
                    then,
                    otherwise,
                } => {
                    let c = fr.pop_i32()?;
                    let arm = if c != 0 { then } else { otherwise };
                    match self.structured(ty, arm, fr)? {
                        Ctl::Next => {}
                        c => return Ok(c),
                    }
                }
                Instr::Br(d) => return Ok(Ctl::Br(*d)),
                Instr::BrIf(d) => {
                    if fr.pop_i32()? != 0 {
                        return Ok(Ctl::Br(*d));
                    }
                }
                Instr::BrTable { targets, default } => {
                    let i = fr.pop_i32()? as u32 as usize;
                    return Ok(Ctl::Br(*targets.get(i).unwrap_or(default)));
                }
                Instr::Return => return Ok(Ctl::Return),
                Instr::Call(f) => {
                    let n = self.module.func_type(*f).map_or(0, |t| t.params.len());
                    let args = fr.stack.split_off(fr.stack.len().saturating_sub(n));
                    if let Some(v) = self.call(*f, args)? {
                        fr.stack.push(v);
                    }
                }
                Instr::CallIndirect { type_idx, .. } => {
                    let slot = fr.pop_i32()? as u32;
                    let f = *self.table.get(&slot).ok_or(Trap::UndefinedElement)?;
                    let want = self.module.types.get(*type_idx as usize);
                    if self.module.func_type(f) != want {
                        return Err(Trap::IndirectTypeMismatch);
                    }
                    let n = want.map_or(0, |t| t.params.len());
                    let args = fr.stack.split_off(fr.stack.len().saturating_sub(n));
                    if let Some(v) = self.call(f, args)? {
                        fr.stack.push(v);
                    }
                }
                Instr::Drop => {
                    fr.pop()?;
                }
                Instr::Select => {
                    let c = fr.pop_i32()?;
                    let b = fr.pop()?;
                    let a = fr.pop()?;
                    fr.stack.push(if c != 0 { a } else { b });
                }
                Instr::LocalGet(i) => {
                    let v = *fr
                        .locals
                        .get(*i as usize)
                        .ok_or_else(|| Trap::Type(format!("no local {i}")))?;
                    fr.stack.push(v);
                }
                Instr::LocalSet(i) | Instr::LocalTee(i) => {
                    let v = fr.pop()?;
                    *fr.locals
                        .get_mut(*i as usize)
                        .ok_or_else(|| Trap::Type(format!("no local {i}")))? = v;
                    if matches!(ins, Instr::LocalTee(_)) {
                        fr.stack.push(v);
                    }
                }
                Instr::GlobalGet(g) => {
                    let v = *self
                        .globals
                        .get(*g as usize)
                        .ok_or_else(|| Trap::Type(format!("no global {g}")))?;
                    fr.stack.push(v);
                }
                Instr::GlobalSet(g) => {
                    let v = fr.pop()?;
                    *self
                        .globals
                        .get_mut(*g as usize)
                        .ok_or_else(|| Trap::Type(format!("no global {g}")))? = v;
                }
                Instr::Load(op, arg) => {
                    let addr = fr.pop_i32()? as u32 as u64;
                    let v = num::load(
                        &self.mem,
                        addr + arg.offset as u64,
                        op.ty,
                        op.bytes,
                        op.signed,
                    )?;
                    fr.stack.push(v);
                }
                Instr::Store(op, arg) => {
                    let v = fr.pop()?;
                    let addr = fr.pop_i32()? as u32 as u64;
                    num::store(&mut self.mem, addr + arg.offset as u64, op.bytes, v)?;
                }
                Instr::MemorySize => fr.stack.push(Value::I32((self.mem.len() / PAGE) as i32)),
                Instr::MemoryGrow => {
                    let d = fr.pop_i32()?;
                    let r = num::grow(&mut self.mem, d, self.max_pages);
                    fr.stack.push(Value::I32(r));
                }
                Instr::I32Const(v) => fr.stack.push(Value::I32(*v)),
                Instr::I64Const(v) => fr.stack.push(Value::I64(*v)),
                Instr::F32Const(b) => fr.stack.push(Value::F32(f32::from_bits(*b))),
                Instr::F64Const(b) => fr.stack.push(Value::F64(f64::from_bits(*b))),
                Instr::IntEqz(_) => {
                    let a = fr.pop()?;
                    fr.stack.push(num::eqz(a)?);
                }
                Instr::IntUn(_, op) => {
                    let a = fr.pop()?;
                    fr.stack.push(num::int_unary(*op, a)?);
                }
                Instr::IntBin(_, op) => {
                    let b = fr.pop()?;
                    let a = fr.pop()?;
                    fr.stack.push(num::int_binary(*op, a, b)?);
                }
                Instr::IntCmp(_, op) => {
                    let b = fr.pop()?;
                    let a = fr.pop()?;
                    fr.stack.push(num::int_cmp(*op, a, b)?);
                }
                Instr::FloatBin(_, op) => {
                    let b = fr.pop()?;
                    let a = fr.pop()?;
                    fr.stack.push(num::float_binary(*op, a, b)?);
                }
                Instr::FloatCmp(_, op) => {
                    let b = fr.pop()?;
                    let a = fr.pop()?;
                    fr.stack.push(num::float_cmp(*op, a, b)?);
                }
                Instr::Conv(op) => {
                    let a = fr.pop()?;
                    fr.stack.push(num::convert(*op, a)?);
                }
            }
        }
        Ok(Ctl::Next)
    }
}
