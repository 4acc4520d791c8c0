use std::collections::HashMap;

use crate::js::*;
use crate::ssr::{Helper, JsFragment, MemAccess, SideTables};
use crate::wasm::{
    ConvOp, FloatBinOp, FloatCmp, FloatWidth, IntBinOp, IntCmp, IntUnOp, IntWidth, ValType,
};

use super::num::{self, PAGE};
use super::{Execution, Host, HostCall, Trap, Value, DEFAULT_FUEL, MAX_CALL_DEPTH};

/// Everything needed to evaluate one fragment.
pub struct FragmentRun<'a> {
    pub fragment: &'a JsFragment,
    /// Module declarations the fragment refers to (globals, `MEM`, internal functions).
    pub prelude: &'a [Stmt],
    pub tables: &'a SideTables,
    /// Emitted helper names.
    pub helpers: &'a HashMap<String, Helper>,
    /// Initial contents `MEM` is bound to.
    pub memory: Vec<u8>,
    pub max_pages: Option<u32>,
}

/// Evaluates a fragment with `args` bound to its parameters.
pub fn eval_fragment(run: FragmentRun<'_>, args: &[Value], host: &mut dyn Host) -> Execution {
    let mut ev = Evaluator {
        tables: run.tables,
        helpers: run.helpers,
        functions: HashMap::new(),
        globals: HashMap::new(),
        frames: Vec::new(),
        host,
        trace: Vec::new(),
        mem: run.memory,
        max_pages: run.max_pages,
        fuel: DEFAULT_FUEL,
        depth: 0,
    };
    let outcome = ev.run(run.fragment, run.prelude, args);
    Execution {
        outcome,
        trace: ev.trace,
        memory: ev.mem,
    }
}

#[derive(Clone, Debug)]
enum Jv {
    Num(Value),
    /// A numeric literal not yet given a Wasm type.
    Untyped(f64),
    Str(String),
    Func(String),
    Host(String),
    Mem,
    Undefined,
}

enum Flow {
    Normal,
    Break(Option<String>),
    Continue(Option<String>),
    Return(Jv),
}

struct Evaluator<'a> {
    tables: &'a SideTables,
    helpers: &'a HashMap<String, Helper>,
    functions: HashMap<String, &'a Function>,
    globals: HashMap<String, Jv>,
    frames: Vec<HashMap<String, Jv>>,
    host: &'a mut dyn Host,
    trace: Vec<HostCall>,
    mem: Vec<u8>,
    max_pages: Option<u32>,
    fuel: u64,
    depth: usize,
}

fn coerce(v: Jv, ty: ValType) -> Jv {
    match v {
        Jv::Untyped(x) => Jv::Num(match ty {
            ValType::I32 => Value::I32(x as i64 as i32),
            ValType::I64 => Value::I64(x as i64),
            ValType::F32 => Value::F32(x as f32),
            ValType::F64 => Value::F64(x),
        }),
        Jv::Undefined => Jv::Num(Value::zero(ty)),
        v => v,
    }
}

fn truthy(v: &Jv) -> bool {
    match v {
        Jv::Num(Value::I32(x)) => *x != 0,
        Jv::Num(Value::I64(x)) => *x != 0,
        Jv::Num(Value::F32(x)) => *x != 0.0 && !x.is_nan(),
        Jv::Num(Value::F64(x)) | Jv::Untyped(x) => *x != 0.0 && !x.is_nan(),
        Jv::Str(s) => !s.is_empty(),
        Jv::Func(_) | Jv::Host(_) | Jv::Mem => true,
        Jv::Undefined => false,
    }
}

fn value(v: &Jv) -> Result<Value, Trap> {
    match v {
        Jv::Num(x) => Ok(*x),
        Jv::Untyped(x) => Ok(Value::F64(*x)),
        other => Err(Trap::Type(format!("expected a number, found {other:?}"))),
    }
}

/// Gives an untyped operand the type of the other one.
fn unify(a: Jv, b: Jv) -> Result<(Value, Value), Trap> {
    match (&a, &b) {
        (Jv::Num(x), Jv::Untyped(_)) => {
            let t = x.ty();
            Ok((*x, value(&coerce(b, t))?))
        }
        (Jv::Untyped(_), Jv::Num(y)) => {
            let t = y.ty();
            Ok((value(&coerce(a, t))?, *y))
        }
        _ => Ok((value(&a)?, value(&b)?)),
    }
}

fn int_width(v: Value) -> Option<IntWidth> {
    match v {
        Value::I32(_) => Some(IntWidth::W32),
        Value::I64(_) => Some(IntWidth::W64),
        _ => None,
    }
}

fn float_width(v: Value) -> Option<FloatWidth> {
    match v {
        Value::F32(_) => Some(FloatWidth::F32),
        Value::F64(_) => Some(FloatWidth::F64),
        _ => None,
    }
}

fn binary(op: BinaryOp, a: Jv, b: Jv) -> Result<Jv, Trap> {
    let (x, y) = unify(a, b)?;
    let r = if x.ty().is_float() {
        let fb = match op {
            BinaryOp::Add => Some(FloatBinOp::Add),
            BinaryOp::Sub => Some(FloatBinOp::Sub),
            BinaryOp::Mul => Some(FloatBinOp::Mul),
            BinaryOp::Div => Some(FloatBinOp::Div),
            _ => None,
        };
        match fb {
            Some(fb) => num::float_binary(fb, x, y)?,
            None => {
                let fc = match op {
                    BinaryOp::StrictEq => FloatCmp::Eq,
                    BinaryOp::StrictNotEq => FloatCmp::Ne,
                    BinaryOp::Lt => FloatCmp::Lt,
                    BinaryOp::Gt => FloatCmp::Gt,
                    BinaryOp::LtEq => FloatCmp::Le,
                    BinaryOp::GtEq => FloatCmp::Ge,
                    _ => return Err(Trap::Type(format!("float operator {}", op.as_str()))),
                };
                num::float_cmp(fc, x, y)?
            }
        }
    } else {
        let ib = match op {
            BinaryOp::Add => Some(IntBinOp::Add),
            BinaryOp::Sub => Some(IntBinOp::Sub),
            BinaryOp::Mul => Some(IntBinOp::Mul),
            BinaryOp::Div => Some(IntBinOp::DivS),
            BinaryOp::Rem => Some(IntBinOp::RemS),
            BinaryOp::BitAnd => Some(IntBinOp::And),
            BinaryOp::BitOr => Some(IntBinOp::Or),
            BinaryOp::BitXor => Some(IntBinOp::Xor),
            BinaryOp::Shl => Some(IntBinOp::Shl),
            BinaryOp::Shr => Some(IntBinOp::ShrS),
            BinaryOp::UShr => Some(IntBinOp::ShrU),
            _ => None,
        };
        match ib {
            Some(ib) => num::int_binary(ib, x, y)?,
            None => {
                let ic = match op {
                    BinaryOp::StrictEq => IntCmp::Eq,
                    BinaryOp::StrictNotEq => IntCmp::Ne,
                    BinaryOp::Lt => IntCmp::LtS,
                    BinaryOp::Gt => IntCmp::GtS,
                    BinaryOp::LtEq => IntCmp::LeS,
                    BinaryOp::GtEq => IntCmp::GeS,
                    _ => return Err(Trap::Type(format!("integer operator {}", op.as_str()))),
                };
                num::int_cmp(ic, x, y)?
            }
        }
    };
    Ok(Jv::Num(r))
}

impl<'a> Evaluator<'a> {
    fn tick(&mut self) -> Result<(), Trap> {
        if self.fuel == 0 {
            return Err(Trap::FuelExhausted);
        }
        self.fuel -= 1;
        Ok(())
    }

    fn run(
        &mut self,
        frag: &'a JsFragment,
        prelude: &'a [Stmt],
        args: &[Value],
    ) -> Result<Option<Value>, Trap> {
        self.hoist(prelude);
        self.exec_list(prelude)?;
        let mut frame = HashMap::new();
        for (i, p) in frag.params.iter().enumerate() {
            let v = args.get(i).map_or(Jv::Undefined, |v| Jv::Num(*v));
            frame.insert(p.clone(), self.typed(p, v));
        }
        self.frames.push(frame);
        self.hoist(&frag.statements);
        let flow = self.exec_list(&frag.statements)?;
        let result = match flow {
            Flow::Normal => match &frag.result_expr {
                Some(e) => self.eval(e)?,
                None => Jv::Undefined,
            },
            Flow::Return(v) => v,
            Flow::Break(l) | Flow::Continue(l) => {
                return Err(Trap::Other(format!("jump to unknown label {l:?}")))
            }
        };
        match (frag.result_type, result) {
            (None, _) => Ok(None),
            (Some(t), v) => Ok(Some(value(&coerce(v, t))?)),
        }
    }

    fn hoist(&mut self, stmts: &'a [Stmt]) {
        for s in stmts {
            if let StmtKind::FunctionDecl(f) = &s.kind {
                if let Some(n) = &f.name {
                    self.functions.insert(n.name.clone(), f);
                }
            }
        }
    }

    fn typed(&self, name: &str, v: Jv) -> Jv {
        match self.tables.decl_types.get(name) {
            Some(t) => coerce(v, *t),
            None => v,
        }
    }

    fn lookup(&self, name: &str) -> Option<&Jv> {
        self.frames
            .last()
            .and_then(|f| f.get(name))
            .or_else(|| self.globals.get(name))
    }

    fn declare(&mut self, name: &str, v: Jv) {
        let v = self.typed(name, v);
        match self.frames.last_mut() {
            Some(f) => f.insert(name.to_string(), v),
            None => self.globals.insert(name.to_string(), v),
        };
    }

    fn assign(&mut self, name: &str, v: Jv) -> Result<(), Trap> {
        let v = self.typed(name, v);
        if let Some(slot) = self.frames.last_mut().and_then(|f| f.get_mut(name)) {
            *slot = v;
            return Ok(());
        }
        match self.globals.get_mut(name) {
            Some(slot) => {
                *slot = v;
                Ok(())
            }
            None => Err(Trap::Other(format!("assignment to undeclared {name}"))),
        }
    }

    fn exec_list(&mut self, stmts: &'a [Stmt]) -> Result<Flow, Trap> {
        for s in stmts {
            match self.exec(s)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    fn exec(&mut self, s: &'a Stmt) -> Result<Flow, Trap> {
        self.tick()?;
        match &s.kind {
            StmtKind::VarDecl(d) => {
                for dc in &d.declarators {
                    let v = match &dc.init {
                        Some(e) => self.eval(e)?,
                        None => Jv::Undefined,
                    };
                    self.declare(&dc.name.name, v);
                }
            }
            StmtKind::FunctionDecl(f) => {
                if let Some(n) = &f.name {
                    self.functions.insert(n.name.clone(), f);
                }
            }
            StmtKind::Expr(e) => {
                self.eval(e)?;
            }
            StmtKind::If {
                test,
                consequent,
                alternate,
            } => {
                let t = self.eval(test)?;
                if truthy(&t) {
                    return self.exec(consequent);
                } else if let Some(a) = alternate {
                    return self.exec(a);
                }
            }
            StmtKind::For { .. } | StmtKind::While { .. } => return self.run_loop(None, s),
            StmtKind::Labeled { label, body } => {
                let flow = match &body.kind {
                    StmtKind::For { .. } | StmtKind::While { .. } => {
                        self.run_loop(Some(&label.name), body)?
                    }
                    _ => self.exec(body)?,
                };
                return Ok(match flow {
                    Flow::Break(Some(l)) if l == label.name => Flow::Normal,
                    other => other,
                });
            }
            StmtKind::Break(l) => return Ok(Flow::Break(l.as_ref().map(|i| i.name.clone()))),
            StmtKind::Continue(l) => return Ok(Flow::Continue(l.as_ref().map(|i| i.name.clone()))),
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(e)?,
                    None => Jv::Undefined,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::Throw(e) => {
                return Err(match self.eval(e)? {
                    Jv::Str(m) => Trap::from_message(&m),
                    other => Trap::Other(format!("thrown {other:?}")),
                })
            }
            StmtKind::Block(b) => return self.exec_list(b),
            StmtKind::Empty => {}
            StmtKind::Try { .. } => return Err(Trap::Other("try statement in fragment".into())),
        }
        Ok(Flow::Normal)
    }

    fn run_loop(&mut self, label: Option<&str>, s: &'a Stmt) -> Result<Flow, Trap> {
        let (test, update, body) = match &s.kind {
            StmtKind::For {
                init,
                test,
                update,
                body,
            } => {
                match init {
                    Some(ForInit::Decl(d)) => {
                        for dc in &d.declarators {
                            let v = match &dc.init {
                                Some(e) => self.eval(e)?,
                                None => Jv::Undefined,
                            };
                            self.declare(&dc.name.name, v);
                        }
                    }
                    Some(ForInit::Expr(e)) => {
                        self.eval(e)?;
                    }
                    None => {}
                }
                (test.as_ref(), update.as_ref(), body)
            }
            StmtKind::While { test, body } => (Some(test), None, body),
            _ => unreachable!("loop statement"),
        };
        let mine = |l: &Option<String>| l.is_none() || l.as_deref() == label;
        loop {
            self.tick()?;
            if let Some(t) = test {
                let v = self.eval(t)?;
                if !truthy(&v) {
                    return Ok(Flow::Normal);
                }
            }
            match self.exec(body)? {
                Flow::Normal => {}
                Flow::Continue(l) if mine(&l) => {}
                Flow::Break(l) if mine(&l) => return Ok(Flow::Normal),
                other => return Ok(other),
            }
            if let Some(u) = update {
                self.eval(u)?;
            }
        }
    }

    fn eval(&mut self, e: &'a Expr) -> Result<Jv, Trap> {
        Ok(match &e.kind {
            ExprKind::Ident(n) => match self.lookup(n) {
                Some(v) => v.clone(),
                None => match n.as_str() {
                    "undefined" => Jv::Undefined,
                    "NaN" => Jv::Untyped(f64::NAN),
                    "Infinity" => Jv::Untyped(f64::INFINITY),
                    _ if self.functions.contains_key(n) => Jv::Func(n.clone()),
                    _ => Jv::Host(n.clone()),
                },
            },
            ExprKind::Number(n) => Jv::Untyped(*n),
            ExprKind::String(s) => Jv::Str(s.clone()),
            ExprKind::Bool(b) => Jv::Num(Value::I32(*b as i32)),
            ExprKind::Unary { op, arg } => {
                let v = self.eval(arg)?;
                match (op, v) {
                    (UnaryOp::Minus, Jv::Untyped(x)) => Jv::Untyped(-x),
                    (UnaryOp::Not, v) => Jv::Num(Value::I32(!truthy(&v) as i32)),
                    (op, v) => return Err(Trap::Type(format!("unary {} on {v:?}", op.as_str()))),
                }
            }
            ExprKind::Binary { op, left, right } => {
                let a = self.eval(left)?;
                let b = self.eval(right)?;
                binary(*op, a, b)?
            }
            ExprKind::Conditional {
                test,
                consequent,
                alternate,
            } => {
                let t = self.eval(test)?;
                if truthy(&t) {
                    self.eval(consequent)?
                } else {
                    self.eval(alternate)?
                }
            }
            ExprKind::Assign {
                op: AssignOp::Assign,
                target,
                value: v,
            } => {
                let val = self.eval(v)?;
                match &target.kind {
                    ExprKind::Ident(n) => self.assign(n, val.clone())?,
                    ExprKind::Member { .. } => self.store(target, val.clone())?,
                    _ => return Err(Trap::Type("assignment target".into())),
                }
                val
            }
            ExprKind::Call { callee, args } => {
                let mut argv = Vec::with_capacity(args.len());
                for a in args {
                    argv.push(self.eval(a)?);
                }
                self.call(callee, argv)?
            }
            ExprKind::Member { object, .. } => {
                if matches!(self.eval(object)?, Jv::Mem) {
                    self.load(e)?
                } else {
                    Jv::Host(print_expr(e))
                }
            }
            ExprKind::Array(items) if items.is_empty() => Jv::Mem,
            _ => {
                return Err(Trap::Other(format!(
                    "unsupported expression {}",
                    print_expr(e)
                )))
            }
        })
    }

    fn effective_address(&mut self, member: &'a Expr) -> Result<(u64, MemAccess), Trap> {
        let op = *self
            .tables
            .mem_ops
            .get(&member.id)
            .ok_or_else(|| Trap::Other("memory access without a recorded operation".into()))?;
        let ExprKind::Member {
            property: MemberProp::Computed(prop),
            ..
        } = &member.kind
        else {
            return Err(Trap::Type("memory access".into()));
        };
        // `MEM[a + off]` adds the static offset without 32-bit wrapping.
        let (base_expr, off): (&'a Expr, u64) = match &prop.kind {
            ExprKind::Binary {
                op: BinaryOp::Add,
                left,
                right,
            } if op.offset != 0
                && matches!(right.kind, ExprKind::Number(n) if n == op.offset as f64) =>
            {
                (left, op.offset as u64)
            }
            _ if op.offset == 0 => (prop, 0),
            _ => {
                return Err(Trap::Type(
                    "memory offset does not match its operation".into(),
                ))
            }
        };
        let b = value(&coerce(self.eval(base_expr)?, ValType::I32))?;
        let addr = b
            .as_i32()
            .ok_or_else(|| Trap::Type("address is not i32".into()))?;
        Ok((addr as u32 as u64 + off, op.access))
    }

    fn load(&mut self, member: &'a Expr) -> Result<Jv, Trap> {
        let (ea, access) = self.effective_address(member)?;
        match access {
            MemAccess::Load(op) => Ok(Jv::Num(num::load(
                &self.mem, ea, op.ty, op.bytes, op.signed,
            )?)),
            MemAccess::Store(_) => Err(Trap::Type("read through a store access".into())),
        }
    }

    fn store(&mut self, member: &'a Expr, v: Jv) -> Result<(), Trap> {
        let (ea, access) = self.effective_address(member)?;
        match access {
            MemAccess::Store(op) => {
                let v = value(&coerce(v, op.ty))?;
                num::store(&mut self.mem, ea, op.bytes, v)
            }
            MemAccess::Load(_) => Err(Trap::Type("write through a load access".into())),
        }
    }

    fn call(&mut self, callee: &'a Expr, args: Vec<Jv>) -> Result<Jv, Trap> {
        let target = match &callee.kind {
            ExprKind::Ident(n) if self.lookup(n).is_none() => {
                if let Some(h) = self.helpers.get(n) {
                    return self.helper(*h, args);
                }
                if self.functions.contains_key(n) {
                    Jv::Func(n.clone())
                } else {
                    Jv::Host(n.clone())
                }
            }
            ExprKind::Member { .. } => Jv::Host(print_expr(callee)),
            _ => self.eval(callee)?,
        };
        match target {
            Jv::Func(name) => self.call_function(&name, args),
            Jv::Host(path) => {
                let values = args.iter().map(value).collect::<Result<Vec<_>, _>>()?;
                let (res, note) = self.host.call(&path, &values, &mut self.mem)?;
                self.trace.push(HostCall {
                    callee: path,
                    args: values,
                    note,
                });
                Ok(res.map_or(Jv::Undefined, Jv::Num))
            }
            other => Err(Trap::Type(format!("call of {other:?}"))),
        }
    }

    fn call_function(&mut self, name: &str, args: Vec<Jv>) -> Result<Jv, Trap> {
        let f = *self
            .functions
            .get(name)
            .ok_or_else(|| Trap::Other(format!("no function {name}")))?;
        if self.depth >= MAX_CALL_DEPTH {
            return Err(Trap::StackExhausted);
        }
        let mut frame = HashMap::new();
        let mut args = args.into_iter();
        for p in &f.params {
            let v = args.next().unwrap_or(Jv::Undefined);
            frame.insert(p.name.clone(), self.typed(&p.name, v));
        }
        let FunctionBody::Block(body) = &f.body else {
            return Err(Trap::Other("expression-bodied function".into()));
        };
        self.frames.push(frame);
        self.depth += 1;
        self.hoist(body);
        let r = self.exec_list(body);
        self.depth -= 1;
        self.frames.pop();
        match r? {
            Flow::Return(v) => Ok(v),
            Flow::Normal => Ok(Jv::Undefined),
            _ => Err(Trap::Other("jump out of function".into())),
        }
    }

    fn helper(&mut self, h: Helper, args: Vec<Jv>) -> Result<Jv, Trap> {
        let arg = |i: usize| -> Result<Value, Trap> {
            args.get(i)
                .map(value)
                .unwrap_or_else(|| Err(Trap::Type("missing helper argument".into())))
        };
        let pair = |args: &[Jv]| -> Result<(Value, Value), Trap> {
            match args {
                [a, b] => unify(a.clone(), b.clone()),
                _ => Err(Trap::Type("helper expects two arguments".into())),
            }
        };
        let int_src =
            |v: Value| int_width(v).ok_or_else(|| Trap::Type(format!("{v:?} is not an integer")));
        let float_src =
            |v: Value| float_width(v).ok_or_else(|| Trap::Type(format!("{v:?} is not a float")));
        let v = match h {
            Helper::Popcnt => num::int_unary(IntUnOp::Popcnt, arg(0)?)?,
            Helper::Clz => num::int_unary(IntUnOp::Clz, arg(0)?)?,
            Helper::Ctz => num::int_unary(IntUnOp::Ctz, arg(0)?)?,
            Helper::Rotl | Helper::Rotr | Helper::DivU | Helper::RemU | Helper::ShrU => {
                let (a, b) = pair(&args)?;
                let op = match h {
                    Helper::Rotl => IntBinOp::Rotl,
                    Helper::Rotr => IntBinOp::Rotr,
                    Helper::DivU => IntBinOp::DivU,
                    Helper::RemU => IntBinOp::RemU,
                    _ => IntBinOp::ShrU,
                };
                num::int_binary(op, a, b)?
            }
            Helper::LtU | Helper::GtU | Helper::LeU | Helper::GeU => {
                let (a, b) = pair(&args)?;
                let op = match h {
                    Helper::LtU => IntCmp::LtU,
                    Helper::GtU => IntCmp::GtU,
                    Helper::LeU => IntCmp::LeU,
                    _ => IntCmp::GeU,
                };
                num::int_cmp(op, a, b)?
            }
            Helper::I32Wrap => num::convert(ConvOp::I32WrapI64, arg(0)?)?,
            Helper::I64ExtendS => num::convert(ConvOp::I64ExtendI32 { signed: true }, arg(0)?)?,
            Helper::I64ExtendU => num::convert(ConvOp::I64ExtendI32 { signed: false }, arg(0)?)?,
            Helper::I32TruncS | Helper::I32TruncU | Helper::I64TruncS | Helper::I64TruncU => {
                let a = arg(0)?;
                let to = if matches!(h, Helper::I32TruncS | Helper::I32TruncU) {
                    IntWidth::W32
                } else {
                    IntWidth::W64
                };
                let signed = matches!(h, Helper::I32TruncS | Helper::I64TruncS);
                num::convert(
                    ConvOp::Trunc {
                        from: float_src(a)?,
                        to,
                        signed,
                    },
                    a,
                )?
            }
            Helper::F32ConvertS
            | Helper::F32ConvertU
            | Helper::F64ConvertS
            | Helper::F64ConvertU => {
                let a = arg(0)?;
                let to = if matches!(h, Helper::F32ConvertS | Helper::F32ConvertU) {
                    FloatWidth::F32
                } else {
                    FloatWidth::F64
                };
                let signed = matches!(h, Helper::F32ConvertS | Helper::F64ConvertS);
                num::convert(
                    ConvOp::Convert {
                        from: int_src(a)?,
                        to,
                        signed,
                    },
                    a,
                )?
            }
            Helper::F32Demote => num::convert(ConvOp::F32DemoteF64, arg(0)?)?,
            Helper::F64Promote => num::convert(ConvOp::F64PromoteF32, arg(0)?)?,
            Helper::I64 => match args.first() {
                Some(Jv::Str(s)) => Value::I64(
                    s.parse()
                        .map_err(|_| Trap::Type(format!("bad i64 literal {s:?}")))?,
                ),
                _ => return Err(Trap::Type("i64 helper expects a string".into())),
            },
            Helper::MemorySize => Value::I32((self.mem.len() / PAGE) as i32),
            Helper::MemoryGrow => {
                let d = match args.get(1) {
                    Some(v) => value(&coerce(v.clone(), ValType::I32))?,
                    None => return Err(Trap::Type("memory_grow expects a delta".into())),
                };
                Value::I32(num::grow(
                    &mut self.mem,
                    d.as_i32().unwrap_or(0),
                    self.max_pages,
                ))
            }
        };
        Ok(Jv::Num(v))
    }
}
