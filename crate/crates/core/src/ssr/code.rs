use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::js::{BinaryOp, DeclKind, Expr, Stmt, UnaryOp};
use crate::wasm::{
    BlockType, FloatBinOp, FloatCmp, FuncType, ImportKind, Instr, IntBinOp, IntCmp, IntWidth,
    ValType, WasmModule,
};

use super::{AbstractionError, Diagnostic, Emitter, Helper, JsFragment, MemAccess, MemOp};

const MAX_SAFE_INTEGER: u64 = (1 << 53) - 1;

enum Callee {
    Bound(Expr),
    Unbound(String),
}

/// Declarations a module's abstracted code depends on.
#[derive(Clone, Debug, Default)]
pub struct ModulePrelude {
    pub statements: Vec<Stmt>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Abstraction state for one Wasm module at one instantiation site.
pub struct ModuleAbstraction<'m> {
    module: &'m WasmModule,
    prefix: String,
    imports: BTreeMap<u32, Callee>,
    global_imports: BTreeMap<u32, Option<Expr>>,
    mem: Option<String>,
    globals: BTreeMap<u32, String>,
    funcs: BTreeMap<u32, String>,
    lowered: BTreeMap<u32, Stmt>,
    stubs: BTreeMap<u32, String>,
    pub diagnostics: Vec<Diagnostic>,
}

impl<'m> ModuleAbstraction<'m> {
    /// `bindings` maps `(module, field)` import names to the JavaScript
    /// expressions bound to them.
    pub fn new(
        module: &'m WasmModule,
        prefix: &str,
        bindings: &BTreeMap<(String, String), Expr>,
        em: &mut Emitter,
    ) -> Self {
        let mut ma = ModuleAbstraction {
            module,
            prefix: prefix.to_string(),
            imports: BTreeMap::new(),
            global_imports: BTreeMap::new(),
            mem: None,
            globals: BTreeMap::new(),
            funcs: BTreeMap::new(),
            lowered: BTreeMap::new(),
            stubs: BTreeMap::new(),
            diagnostics: Vec::new(),
        };
        let (mut nf, mut ng) = (0u32, 0u32);
        for imp in &module.imports {
            let key = (imp.module.clone(), imp.field.clone());
            match imp.kind {
                ImportKind::Func(_) => {
                    let callee = match bindings.get(&key) {
                        Some(e) => Callee::Bound(e.clone()),
                        None => {
                            let name = em.names.fixed(&format!("{prefix}IMPORT_{nf}"));
                            ma.diagnostics.push(Diagnostic {
                                func: Some(nf),
                                message: format!(
                                    "unbound import {}.{} emitted as {name}",
                                    imp.module, imp.field
                                ),
                            });
                            Callee::Unbound(name)
                        }
                    };
                    ma.imports.insert(nf, callee);
                    nf += 1;
                }
                ImportKind::Global { .. } => {
                    ma.global_imports.insert(ng, bindings.get(&key).cloned());
                    ng += 1;
                }
                _ => {}
            }
        }
        ma
    }

    pub fn module(&self) -> &'m WasmModule {
        self.module
    }

    fn mem_name(&mut self, em: &mut Emitter) -> String {
        if let Some(m) = &self.mem {
            return m.clone();
        }
        let name = em.names.fixed(&format!("{}MEM", self.prefix));
        self.mem = Some(name.clone());
        name
    }

    fn global_name(
        &mut self,
        g: u32,
        em: &mut Emitter,
    ) -> Result<(String, ValType), AbstractionError> {
        let (ty, _) = self
            .module
            .global_type(g)
            .ok_or_else(|| AbstractionError::Unsupported {
                what: format!("global {g} does not exist"),
                position: 0,
            })?;
        if let Some(n) = self.globals.get(&g) {
            return Ok((n.clone(), ty));
        }
        let name = em.names.fixed(&format!("{}glob{g}", self.prefix));
        em.set_type(&name, ty);
        self.globals.insert(g, name.clone());
        let imported = self.global_imports.len() as u32;
        if g >= imported {
            if let Some(Instr::GlobalGet(j)) =
                self.module.globals[(g - imported) as usize].init.first()
            {
                self.global_name(*j, em)?;
            }
        }
        Ok((name, ty))
    }

    fn func_name(&mut self, f: u32, em: &mut Emitter) -> String {
        if let Some(n) = self.funcs.get(&f) {
            return n.clone();
        }
        let name = em.names.fixed(&format!("{}F_{f}", self.prefix));
        self.funcs.insert(f, name.clone());
        name
    }

    /// Callee expression for function `f`, imported or internal.
    fn callee(&mut self, f: u32, em: &mut Emitter) -> Expr {
        match self.imports.get(&f) {
            Some(Callee::Bound(e)) => em.builder().fresh_copy(e),
            Some(Callee::Unbound(n)) => em.builder().ident(n),
            None => {
                let n = self.func_name(f, em);
                em.builder().ident(&n)
            }
        }
    }

    fn stub_name(&mut self, type_idx: u32, em: &mut Emitter) -> String {
        if let Some(n) = self.stubs.get(&type_idx) {
            return n.clone();
        }
        let name = em
            .names
            .fixed(&format!("{}INDIRECT_{type_idx}", self.prefix));
        self.stubs.insert(type_idx, name.clone());
        for f in self.table_targets(type_idx).into_iter().map(|(_, f)| f) {
            if !self.imports.contains_key(&f) {
                self.func_name(f, em);
            }
        }
        name
    }

    fn table_targets(&self, type_idx: u32) -> Vec<(u32, u32)> {
        let want = self.module.types.get(type_idx as usize);
        self.module
            .table_entries()
            .into_iter()
            .filter(|(_, f)| want.is_some() && self.module.func_type(*f) == want)
            .collect()
    }

    /// Starts abstracting the body of internal function `func_idx`.
    pub fn function_context<'a>(
        &'a mut self,
        em: &'a mut Emitter,
        func_idx: u32,
    ) -> Result<FunctionContext<'a, 'm>, AbstractionError> {
        FunctionContext::new(self, em, func_idx, true)
    }

    /// Abstracts `func_idx` as a fragment to be inlined at a call site.
    pub fn abstract_function(
        &mut self,
        em: &mut Emitter,
        func_idx: u32,
    ) -> Result<JsFragment, AbstractionError> {
        let body = self.body_of(func_idx)?;
        FunctionContext::new(self, em, func_idx, true)?.run(&body)
    }

    fn body_of(&self, func_idx: u32) -> Result<Vec<Instr>, AbstractionError> {
        let func = self
            .module
            .internal_func(func_idx)
            .ok_or(AbstractionError::UnknownFunction(func_idx))?;
        func.body.clone().map_err(AbstractionError::UndecodableBody)
    }

    fn lower_function(
        &mut self,
        em: &mut Emitter,
        f: u32,
        name: &str,
    ) -> Result<Stmt, AbstractionError> {
        let body = self.body_of(f)?;
        let frag = FunctionContext::new(self, em, f, false)?.run(&body)?;
        Ok(em
            .builder()
            .function_decl(name, &frag.params, frag.statements))
    }

    /// Lowers every internal function referenced so far and returns the
    /// declarations the abstracted code needs.
    pub fn finish(mut self, em: &mut Emitter) -> ModulePrelude {
        loop {
            let next = self
                .funcs
                .iter()
                .find(|(f, _)| !self.lowered.contains_key(f))
                .map(|(f, n)| (*f, n.clone()));
            let Some((f, name)) = next else { break };
            let stmt = match self.lower_function(em, f, &name) {
                Ok(s) => s,
                Err(e) => {
                    self.diagnostics.push(Diagnostic {
                        func: Some(f),
                        message: format!("abstraction failed: {e}"),
                    });
                    let mut b = em.builder();
                    let t = b.throw_str("abstraction failed");
                    b.function_decl(&name, &[], vec![t])
                }
            };
            self.lowered.insert(f, stmt);
        }

        let mut out = Vec::new();
        let globals: Vec<(u32, String)> =
            self.globals.iter().map(|(g, n)| (*g, n.clone())).collect();
        let imported = self.global_imports.len() as u32;
        for (g, name) in globals {
            let init = if g < imported {
                match self.global_imports.get(&g).cloned().flatten() {
                    Some(e) => em.builder().fresh_copy(&e),
                    None => {
                        self.diagnostics.push(Diagnostic {
                            func: None,
                            message: format!("unbound imported global {g} initialized to 0"),
                        });
                        em.builder().num(0.0)
                    }
                }
            } else {
                match self.module.globals[(g - imported) as usize].init.first() {
                    Some(Instr::GlobalGet(j)) => {
                        let n = self.globals[j].clone();
                        em.builder().ident(&n)
                    }
                    Some(i) => const_expr(i, em),
                    None => em.builder().num(0.0),
                }
            };
            out.push(em.builder().decl(DeclKind::Let, &name, Some(init)));
        }
        if let Some(m) = &self.mem {
            let mut b = em.builder();
            let arr = b.array(Vec::new());
            out.push(b.const_decl(m, arr));
        }
        out.extend(std::mem::take(&mut self.lowered).into_values());
        let stubs: Vec<(u32, String)> = self.stubs.iter().map(|(t, n)| (*t, n.clone())).collect();
        for (t, name) in stubs {
            let slot = em.names.counter("T");
            em.set_type(&slot, ValType::I32);
            let mut body = Vec::new();
            for (k, f) in self.table_targets(t) {
                let callee = self.callee(f, em);
                let mut b = em.builder();
                let s = b.ident(&slot);
                let kk = b.num(k as f64);
                let test = b.binary(BinaryOp::StrictEq, s, kk);
                let ret = b.return_(Some(callee));
                body.push(b.if_(test, vec![ret], None));
            }
            let mut b = em.builder();
            body.push(b.throw_str("indirect call"));
            out.push(b.function_decl(&name, &[slot], body));
        }
        ModulePrelude {
            statements: out,
            diagnostics: self.diagnostics,
        }
    }
}

fn const_expr(i: &Instr, em: &mut Emitter) -> Expr {
    match i {
        Instr::I32Const(v) => em.builder().num(*v as f64),
        Instr::I64Const(v) => i64_literal(*v, em).0,
        Instr::F32Const(b) => em.builder().num(f32::from_bits(*b) as f64),
        Instr::F64Const(b) => em.builder().num(f64::from_bits(*b)),
        _ => em.builder().num(0.0),
    }
}

fn i64_literal(v: i64, em: &mut Emitter) -> (Expr, Option<Helper>) {
    if v.unsigned_abs() <= MAX_SAFE_INTEGER {
        (em.builder().num(v as f64), None)
    } else {
        let h = em.helper(Helper::I64);
        let mut b = em.builder();
        let s = b.string(&v.to_string());
        (b.call_named(&h, vec![s]), Some(Helper::I64))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Source {
    Plain,
    Local(u32),
    Global(u32),
}

/// One entry of the abstract operand stack: always a named JS value.
#[derive(Clone, Debug, PartialEq)]
pub struct AbstractValue {
    pub name: String,
    pub ty: ValType,
    /// Known integer value of a constant.
    pub konst: Option<i64>,
    source: Source,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum LabelKind {
    Block,
    Loop,
    If,
}

struct Label {
    name: Option<String>,
    kind: LabelKind,
    result: Option<String>,
    height: usize,
    targeted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Flow {
    Next,
    Diverged,
}

/// Abstract interpreter state while lowering one function body.
pub struct FunctionContext<'a, 'm> {
    ma: &'a mut ModuleAbstraction<'m>,
    em: &'a mut Emitter,
    func_idx: u32,
    inline: bool,
    locals: Vec<(String, ValType)>,
    param_count: usize,
    results: Vec<ValType>,
    stack: Vec<AbstractValue>,
    labels: Vec<Label>,
    ret: Option<(String, Option<String>)>,
    final_result: Option<Option<String>>,
    position: usize,
    helpers: BTreeSet<Helper>,
    reassigned: Vec<bool>,
}

impl<'a, 'm> FunctionContext<'a, 'm> {
    fn new(
        ma: &'a mut ModuleAbstraction<'m>,
        em: &'a mut Emitter,
        func_idx: u32,
        inline: bool,
    ) -> Result<Self, AbstractionError> {
        let module = ma.module;
        let func = module
            .internal_func(func_idx)
            .ok_or(AbstractionError::UnknownFunction(func_idx))?;
        let ty: FuncType = module
            .func_type(func_idx)
            .cloned()
            .ok_or(AbstractionError::UnknownFunction(func_idx))?;
        if ty.results.len() > 1 {
            return Err(AbstractionError::Unsupported {
                what: "multiple results".into(),
                position: 0,
            });
        }
        let frame = em.names.frame();
        let suffix = if frame == 0 {
            String::new()
        } else {
            format!("_{frame}")
        };
        let mut locals = Vec::new();
        for (i, t) in ty.params.iter().enumerate() {
            let n = em.names.fixed(&format!("p{i}{suffix}"));
            em.set_type(&n, *t);
            locals.push((n, *t));
        }
        for (i, t) in func.locals.iter().enumerate() {
            let n = em
                .names
                .fixed(&format!("loc{}{suffix}", ty.params.len() + i));
            em.set_type(&n, *t);
            locals.push((n, *t));
        }
        Ok(FunctionContext {
            ma,
            em,
            func_idx,
            inline,
            locals,
            param_count: ty.params.len(),
            results: ty.results,
            stack: Vec::new(),
            labels: Vec::new(),
            ret: None,
            final_result: None,
            position: 0,
            helpers: BTreeSet::new(),
            reassigned: vec![false; ty.params.len()],
        })
    }

    /// Current abstract stack, bottom first.
    pub fn stack(&self) -> &[AbstractValue] {
        &self.stack
    }

    /// Applies one instruction and returns the statements it emits.
    pub fn abstract_instruction(&mut self, instr: &Instr) -> Result<Vec<Stmt>, AbstractionError> {
        let mut out = Vec::new();
        self.instr(instr, &mut out)?;
        Ok(out)
    }

    fn run(mut self, body: &[Instr]) -> Result<JsFragment, AbstractionError> {
        let mut stmts = Vec::new();
        let names: Vec<String> = self.locals[self.param_count..]
            .iter()
            .map(|(n, _)| n.clone())
            .collect();
        for n in names {
            let mut b = self.em.builder();
            let zero = b.num(0.0);
            stmts.push(b.decl(DeclKind::Let, &n, Some(zero)));
        }
        let flow = self.body(body, &mut stmts)?;
        let (reachable, value) = match flow {
            Flow::Next => {
                if self.stack.len() != self.results.len() {
                    return Err(AbstractionError::StackMismatch {
                        position: self.position,
                    });
                }
                (true, self.stack.pop().map(|v| v.name))
            }
            Flow::Diverged => match self.final_result.take() {
                Some(v) => (true, v),
                None => (false, None),
            },
        };
        let mut frag = JsFragment {
            result_type: self.results.first().copied(),
            params: self.locals[..self.param_count]
                .iter()
                .map(|(n, _)| n.clone())
                .collect(),
            param_types: self.locals[..self.param_count]
                .iter()
                .map(|(_, t)| *t)
                .collect(),
            param_reassigned: self.reassigned.clone(),
            func_index: Some(self.func_idx),
            helpers_used: std::mem::take(&mut self.helpers),
            ..Default::default()
        };
        let mut b = self.em.builder();
        if !self.inline {
            if reachable {
                if let Some(v) = value {
                    let e = b.ident(&v);
                    stmts.push(b.return_(Some(e)));
                }
            }
            frag.statements = stmts;
        } else if let Some((label, var)) = self.ret.take() {
            if reachable {
                if let (Some(t), Some(v)) = (&var, &value) {
                    let e = b.ident(v);
                    stmts.push(b.assign_stmt(t, e));
                }
                stmts.push(b.break_(&label));
            }
            if let Some(t) = &var {
                frag.statements.push(b.decl(DeclKind::Let, t, None));
                frag.result_expr = Some(b.ident(t));
            }
            frag.statements.push(b.labeled_loop(&label, stmts));
        } else {
            frag.result_expr = value.map(|v| b.ident(&v));
            frag.statements = stmts;
        }
        Ok(frag)
    }

    fn body(&mut self, instrs: &[Instr], out: &mut Vec<Stmt>) -> Result<Flow, AbstractionError> {
        for i in instrs {
            if self.instr(i, out)? == Flow::Diverged {
                return Ok(Flow::Diverged);
            }
        }
        Ok(Flow::Next)
    }

    fn helper(&mut self, h: Helper) -> String {
        self.helpers.insert(h);
        self.em.helper(h)
    }

    fn floor(&self) -> usize {
        self.labels.last().map_or(0, |l| l.height)
    }

    fn underflow(&self, instr: &str) -> AbstractionError {
        AbstractionError::StackUnderflow {
            instr: instr.to_string(),
            position: self.position,
        }
    }

    fn pop(&mut self, instr: &str) -> Result<AbstractValue, AbstractionError> {
        if self.stack.len() <= self.floor() {
            return Err(self.underflow(instr));
        }
        Ok(self.stack.pop().expect("checked"))
    }

    fn pop_n(&mut self, n: usize, instr: &str) -> Result<Vec<AbstractValue>, AbstractionError> {
        if self.stack.len() < self.floor() + n {
            return Err(self.underflow(instr));
        }
        Ok(self.stack.split_off(self.stack.len() - n))
    }

    fn peek(&self, instr: &str) -> Result<String, AbstractionError> {
        if self.stack.len() <= self.floor() {
            return Err(self.underflow(instr));
        }
        Ok(self.stack.last().expect("checked").name.clone())
    }

    fn id(&mut self, v: &AbstractValue) -> Expr {
        self.em.builder().ident(&v.name)
    }

    fn push_plain(&mut self, name: String, ty: ValType, konst: Option<i64>) {
        self.stack.push(AbstractValue {
            name,
            ty,
            konst,
            source: Source::Plain,
        });
    }

    /// `const T_n = init;`
    fn temp(&mut self, init: Expr, ty: ValType, out: &mut Vec<Stmt>) {
        let n = self.em.names.counter("T");
        self.em.set_type(&n, ty);
        out.push(self.em.builder().const_decl(&n, init));
        self.push_plain(n, ty, None);
    }

    fn constant(&mut self, init: Expr, ty: ValType, konst: Option<i64>, out: &mut Vec<Stmt>) {
        let n = self.em.names.counter("C");
        self.em.set_type(&n, ty);
        out.push(self.em.builder().const_decl(&n, init));
        self.push_plain(n, ty, konst);
    }

    /// Copies stack entries that still name a mutable variable.
    fn snapshot(&mut self, pred: impl Fn(Source) -> bool, out: &mut Vec<Stmt>) {
        let mut done: HashMap<Source, String> = HashMap::new();
        for k in 0..self.stack.len() {
            let src = self.stack[k].source;
            if src == Source::Plain || !pred(src) {
                continue;
            }
            let name = match done.get(&src) {
                Some(n) => n.clone(),
                None => {
                    let n = self.em.names.counter("T");
                    let ty = self.stack[k].ty;
                    self.em.set_type(&n, ty);
                    let mut b = self.em.builder();
                    let e = b.ident(&self.stack[k].name);
                    out.push(b.const_decl(&n, e));
                    done.insert(src, n.clone());
                    n
                }
            };
            self.stack[k].name = name;
            self.stack[k].source = Source::Plain;
        }
    }

    fn unsupported(&self, what: impl Into<String>) -> AbstractionError {
        AbstractionError::Unsupported {
            what: what.into(),
            position: self.position,
        }
    }

    fn local(&self, i: u32) -> Result<(String, ValType), AbstractionError> {
        self.locals
            .get(i as usize)
            .cloned()
            .ok_or_else(|| self.unsupported(format!("local {i} does not exist")))
    }

    fn instr(&mut self, ins: &Instr, out: &mut Vec<Stmt>) -> Result<Flow, AbstractionError> {
        self.position += 1;
        let mn = ins.mnemonic();
        match ins {
            Instr::Nop => {}
            Instr::Unreachable => {
                out.push(self.em.builder().throw_str("unreachable"));
                return Ok(Flow::Diverged);
            }
            Instr::Block { ty, body } => {
                return self.structured(LabelKind::Block, ty, body, &[], out)
            }
            Instr::Loop { ty, body } => {
                return self.structured(LabelKind::Loop, ty, body, &[], out)
            }
            Instr::If {
                ty,
                then,
                otherwise,
            } => return self.structured(LabelKind::If, ty, then, otherwise, out),
            Instr::Br(d) => {
                self.branch(*d, out)?;
                return Ok(Flow::Diverged);
            }
            Instr::BrIf(d) => {
                let c = self.pop(&mn)?;
                let mut inner = Vec::new();
                self.branch(*d, &mut inner)?;
                let test = self.id(&c);
                out.push(self.em.builder().if_(test, inner, None));
            }
            Instr::BrTable { targets, default } => {
                let idx = self.pop(&mn)?;
                for (k, t) in targets.iter().enumerate() {
                    let mut inner = Vec::new();
                    self.branch(*t, &mut inner)?;
                    let mut b = self.em.builder();
                    let i = b.ident(&idx.name);
                    let kk = b.num(k as f64);
                    let test = b.binary(BinaryOp::StrictEq, i, kk);
                    out.push(b.if_(test, inner, None));
                }
                self.branch(*default, out)?;
                return Ok(Flow::Diverged);
            }
            Instr::Return => {
                self.do_return(out)?;
                return Ok(Flow::Diverged);
            }
            Instr::Call(f) => {
                let ty = self
                    .ma
                    .module
                    .func_type(*f)
                    .cloned()
                    .ok_or(AbstractionError::UnknownFunction(*f))?;
                let args = self.pop_n(ty.params.len(), &mn)?;
                let callee = self.ma.callee(*f, self.em);
                self.emit_call(callee, &args, &ty, out)?;
            }
            Instr::CallIndirect { type_idx, .. } => {
                let ty = self
                    .ma
                    .module
                    .types
                    .get(*type_idx as usize)
                    .cloned()
                    .ok_or_else(|| self.unsupported(format!("type {type_idx} does not exist")))?;
                let idx = self.pop(&mn)?;
                let args = self.pop_n(ty.params.len(), &mn)?;
                let target = idx.konst.and_then(|k| {
                    self.ma
                        .table_targets(*type_idx)
                        .into_iter()
                        .find(|(slot, _)| *slot as i64 == k)
                        .map(|(_, f)| f)
                });
                let callee = match target {
                    Some(f) => self.ma.callee(f, self.em),
                    None => {
                        let stub = self.ma.stub_name(*type_idx, self.em);
                        let i = self.id(&idx);
                        self.em.builder().call_named(&stub, vec![i])
                    }
                };
                self.emit_call(callee, &args, &ty, out)?;
            }
            Instr::Drop => {
                self.pop(&mn)?;
            }
            Instr::Select => {
                let c = self.pop(&mn)?;
                let y = self.pop(&mn)?;
                let x = self.pop(&mn)?;
                let (ce, xe, ye) = (self.id(&c), self.id(&x), self.id(&y));
                let e = self.em.builder().conditional(ce, xe, ye);
                self.temp(e, x.ty, out);
            }
            Instr::LocalGet(i) => {
                let (name, ty) = self.local(*i)?;
                self.stack.push(AbstractValue {
                    name,
                    ty,
                    konst: None,
                    source: Source::Local(*i),
                });
            }
            Instr::LocalSet(i) | Instr::LocalTee(i) => {
                let (name, ty) = self.local(*i)?;
                let v = self.pop(&mn)?;
                self.snapshot(|s| s == Source::Local(*i), out);
                let e = self.id(&v);
                out.push(self.em.builder().assign_stmt(&name, e));
                if (*i as usize) < self.param_count {
                    self.reassigned[*i as usize] = true;
                }
                if matches!(ins, Instr::LocalTee(_)) {
                    self.stack.push(AbstractValue {
                        name,
                        ty,
                        konst: None,
                        source: Source::Local(*i),
                    });
                }
            }
            Instr::GlobalGet(g) => {
                let (name, ty) = self.ma.global_name(*g, self.em)?;
                self.stack.push(AbstractValue {
                    name,
                    ty,
                    konst: None,
                    source: Source::Global(*g),
                });
            }
            Instr::GlobalSet(g) => {
                let (name, _) = self.ma.global_name(*g, self.em)?;
                let v = self.pop(&mn)?;
                self.snapshot(|s| s == Source::Global(*g), out);
                let e = self.id(&v);
                out.push(self.em.builder().assign_stmt(&name, e));
            }
            Instr::Load(op, arg) => {
                let addr = self.pop(&mn)?;
                let member = self.mem_access(&addr, arg.offset, MemAccess::Load(*op));
                self.temp(member, op.ty, out);
            }
            Instr::Store(op, arg) => {
                let v = self.pop(&mn)?;
                let addr = self.pop(&mn)?;
                let member = self.mem_access(&addr, arg.offset, MemAccess::Store(*op));
                let ve = self.id(&v);
                let mut b = self.em.builder();
                let e = b.assign(member, ve);
                out.push(b.expr_stmt(e));
            }
            Instr::MemorySize => {
                let h = self.helper(Helper::MemorySize);
                let m = self.ma.mem_name(self.em);
                let mut b = self.em.builder();
                let me = b.ident(&m);
                let e = b.call_named(&h, vec![me]);
                self.temp(e, ValType::I32, out);
            }
            Instr::MemoryGrow => {
                let d = self.pop(&mn)?;
                let h = self.helper(Helper::MemoryGrow);
                let m = self.ma.mem_name(self.em);
                let mut b = self.em.builder();
                let me = b.ident(&m);
                let de = b.ident(&d.name);
                let e = b.call_named(&h, vec![me, de]);
                self.temp(e, ValType::I32, out);
            }
            Instr::I32Const(v) => {
                let e = self.em.builder().num(*v as f64);
                self.constant(e, ValType::I32, Some(*v as i64), out);
            }
            Instr::I64Const(v) => {
                let (e, h) = i64_literal(*v, self.em);
                if let Some(h) = h {
                    self.helpers.insert(h);
                }
                self.constant(e, ValType::I64, Some(*v), out);
            }
            Instr::F32Const(bits) => {
                let e = self.em.builder().num(f32::from_bits(*bits) as f64);
                self.constant(e, ValType::F32, None, out);
            }
            Instr::F64Const(bits) => {
                let e = self.em.builder().num(f64::from_bits(*bits));
                self.constant(e, ValType::F64, None, out);
            }
            Instr::IntEqz(_) => {
                let a = self.pop(&mn)?;
                let ae = self.id(&a);
                let e = self.em.builder().unary(UnaryOp::Not, ae);
                self.temp(e, ValType::I32, out);
            }
            Instr::IntUn(w, op) => {
                let a = self.pop(&mn)?;
                let h = self.helper(Helper::for_int_unary(*op));
                let ae = self.id(&a);
                let e = self.em.builder().call_named(&h, vec![ae]);
                self.temp(e, int_type(*w), out);
            }
            Instr::IntBin(w, op) => {
                let helper = Helper::for_int_binary(*op);
                self.binary(&mn, int_binop(*op), helper, int_type(*w), out)?;
            }
            Instr::IntCmp(_, op) => {
                let helper = Helper::for_int_cmp(*op);
                self.binary(&mn, int_cmp(*op), helper, ValType::I32, out)?;
            }
            Instr::FloatBin(w, op) => {
                let bop = match op {
                    FloatBinOp::Add => BinaryOp::Add,
                    FloatBinOp::Sub => BinaryOp::Sub,
                    FloatBinOp::Mul => BinaryOp::Mul,
                    FloatBinOp::Div => BinaryOp::Div,
                };
                self.binary(&mn, bop, None, w.val_type(), out)?;
            }
            Instr::FloatCmp(_, op) => {
                let bop = match op {
                    FloatCmp::Eq => BinaryOp::StrictEq,
                    FloatCmp::Ne => BinaryOp::StrictNotEq,
                    FloatCmp::Lt => BinaryOp::Lt,
                    FloatCmp::Gt => BinaryOp::Gt,
                    FloatCmp::Le => BinaryOp::LtEq,
                    FloatCmp::Ge => BinaryOp::GtEq,
                };
                self.binary(&mn, bop, None, ValType::I32, out)?;
            }
            Instr::Conv(op) => {
                let a = self.pop(&mn)?;
                let h = self.helper(Helper::for_conversion(*op));
                let ae = self.id(&a);
                let e = self.em.builder().call_named(&h, vec![ae]);
                self.temp(e, op.result(), out);
            }
        }
        Ok(Flow::Next)
    }

    fn binary(
        &mut self,
        mn: &str,
        op: BinaryOp,
        helper: Option<Helper>,
        ty: ValType,
        out: &mut Vec<Stmt>,
    ) -> Result<(), AbstractionError> {
        let r = self.pop(mn)?;
        let l = self.pop(mn)?;
        let (le, re) = (self.id(&l), self.id(&r));
        let e = match helper {
            Some(h) => {
                let name = self.helper(h);
                self.em.builder().call_named(&name, vec![le, re])
            }
            None => self.em.builder().binary(op, le, re),
        };
        self.temp(e, ty, out);
        Ok(())
    }

    fn mem_access(&mut self, addr: &AbstractValue, offset: u32, access: MemAccess) -> Expr {
        let m = self.ma.mem_name(self.em);
        let mut b = self.em.builder();
        let me = b.ident(&m);
        let ae = b.ident(&addr.name);
        let index = if offset == 0 {
            ae
        } else {
            let off = b.num(offset as f64);
            b.binary(BinaryOp::Add, ae, off)
        };
        let member = b.index(me, index);
        self.em
            .tables
            .mem_ops
            .insert(member.id, MemOp { access, offset });
        member
    }

    fn emit_call(
        &mut self,
        callee: Expr,
        args: &[AbstractValue],
        ty: &FuncType,
        out: &mut Vec<Stmt>,
    ) -> Result<(), AbstractionError> {
        if ty.results.len() > 1 {
            return Err(self.unsupported("call with multiple results"));
        }
        self.snapshot(|s| matches!(s, Source::Global(_)), out);
        let arg_exprs: Vec<Expr> = args.iter().map(|a| self.id(a)).collect();
        let call = self.em.builder().call(callee, arg_exprs);
        match ty.results.first() {
            Some(t) => self.temp(call, *t, out),
            None => out.push(self.em.builder().expr_stmt(call)),
        }
        Ok(())
    }

    fn block_arity(&self, ty: &BlockType) -> Result<Option<ValType>, AbstractionError> {
        match ty {
            BlockType::Empty => Ok(None),
            BlockType::Value(t) => Ok(Some(*t)),
            BlockType::Func(i) => {
                let ft = self
                    .ma
                    .module
                    .types
                    .get(*i as usize)
                    .ok_or_else(|| self.unsupported(format!("type {i} does not exist")))?;
                if !ft.params.is_empty() || ft.results.len() > 1 {
                    return Err(self.unsupported("multi-value block"));
                }
                Ok(ft.results.first().copied())
            }
        }
    }

    fn structured(
        &mut self,
        kind: LabelKind,
        ty: &BlockType,
        body: &[Instr],
        otherwise: &[Instr],
        out: &mut Vec<Stmt>,
    ) -> Result<Flow, AbstractionError> {
        let result_ty = self.block_arity(ty)?;
        let cond = if kind == LabelKind::If {
            Some(self.pop("if")?)
        } else {
            None
        };
        self.snapshot(|_| true, out);
        let result = result_ty.map(|t| {
            let n = self.em.names.counter("T");
            self.em.set_type(&n, t);
            out.push(self.em.builder().decl(DeclKind::Let, &n, None));
            n
        });
        let name = match kind {
            LabelKind::If => None,
            _ => Some(self.em.names.counter("L")),
        };
        let height = self.stack.len();
        self.labels.push(Label {
            name,
            kind,
            result: result.clone(),
            height,
            targeted: false,
        });

        let mut then_stmts = Vec::new();
        let then_flow = self.body(body, &mut then_stmts)?;
        self.close_arm(then_flow, &result, &mut then_stmts)?;
        self.stack.truncate(height);
        let mut else_stmts = Vec::new();
        let mut else_flow = Flow::Next;
        if kind == LabelKind::If {
            else_flow = self.body(otherwise, &mut else_stmts)?;
            self.close_arm(else_flow, &result, &mut else_stmts)?;
            self.stack.truncate(height);
        }
        let label = self.labels.pop().expect("pushed above");

        let mut b = self.em.builder();
        let stmt = match kind {
            LabelKind::Block | LabelKind::Loop => {
                let l = label.name.clone().expect("named");
                then_stmts.push(b.break_(&l));
                b.labeled_loop(&l, then_stmts)
            }
            LabelKind::If => {
                let test = b.ident(&cond.expect("if condition").name);
                let alt = (!else_stmts.is_empty()).then_some(else_stmts);
                let s = b.if_(test, then_stmts, alt);
                match &label.name {
                    Some(l) => b.labeled(l, s),
                    None => s,
                }
            }
        };
        out.push(stmt);
        if let (Some(n), Some(t)) = (result, result_ty) {
            self.push_plain(n, t, None);
        }
        let reachable = match kind {
            LabelKind::Block => then_flow == Flow::Next || label.targeted,
            LabelKind::Loop => then_flow == Flow::Next,
            LabelKind::If => then_flow == Flow::Next || else_flow == Flow::Next || label.targeted,
        };
        Ok(if reachable {
            Flow::Next
        } else {
            Flow::Diverged
        })
    }

    fn close_arm(
        &mut self,
        flow: Flow,
        result: &Option<String>,
        stmts: &mut Vec<Stmt>,
    ) -> Result<(), AbstractionError> {
        if flow == Flow::Diverged {
            return Ok(());
        }
        let want = self.floor() + usize::from(result.is_some());
        if self.stack.len() != want {
            return Err(AbstractionError::StackMismatch {
                position: self.position,
            });
        }
        if let Some(r) = result {
            let v = self.pop("end")?;
            let e = self.id(&v);
            stmts.push(self.em.builder().assign_stmt(r, e));
        }
        Ok(())
    }

    fn branch(&mut self, depth: u32, out: &mut Vec<Stmt>) -> Result<(), AbstractionError> {
        let depth = depth as usize;
        if depth == self.labels.len() {
            return self.do_return(out);
        }
        if depth > self.labels.len() {
            return Err(self.unsupported(format!("branch depth {depth}")));
        }
        let idx = self.labels.len() - 1 - depth;
        let kind = self.labels[idx].kind;
        if kind != LabelKind::Loop {
            if let Some(var) = self.labels[idx].result.clone() {
                let v = self.peek("br")?;
                let mut b = self.em.builder();
                let e = b.ident(&v);
                out.push(b.assign_stmt(&var, e));
            }
        }
        let name = match self.labels[idx].name.clone() {
            Some(n) => n,
            None => {
                let n = self.em.names.counter("L");
                self.labels[idx].name = Some(n.clone());
                n
            }
        };
        self.labels[idx].targeted = true;
        let mut b = self.em.builder();
        out.push(if kind == LabelKind::Loop {
            b.continue_(&name)
        } else {
            b.break_(&name)
        });
        Ok(())
    }

    fn do_return(&mut self, out: &mut Vec<Stmt>) -> Result<(), AbstractionError> {
        let value = if self.results.is_empty() {
            None
        } else {
            Some(self.peek("return")?)
        };
        if !self.inline {
            let mut b = self.em.builder();
            let e = value.map(|v| b.ident(&v));
            out.push(b.return_(e));
        } else if self.labels.is_empty() {
            self.final_result = Some(value);
        } else {
            if self.ret.is_none() {
                let l = self.em.names.counter("L");
                let t = self.results.first().map(|t| {
                    let n = self.em.names.counter("T");
                    self.em.set_type(&n, *t);
                    n
                });
                self.ret = Some((l, t));
            }
            let (l, t) = self.ret.clone().expect("set above");
            let mut b = self.em.builder();
            if let (Some(t), Some(v)) = (t, value) {
                let e = b.ident(&v);
                out.push(b.assign_stmt(&t, e));
            }
            out.push(b.break_(&l));
        }
        Ok(())
    }
}

fn int_type(w: IntWidth) -> ValType {
    match w {
        IntWidth::W32 => ValType::I32,
        IntWidth::W64 => ValType::I64,
    }
}

fn int_binop(op: IntBinOp) -> BinaryOp {
    match op {
        IntBinOp::Add => BinaryOp::Add,
        IntBinOp::Sub => BinaryOp::Sub,
        IntBinOp::Mul => BinaryOp::Mul,
        IntBinOp::DivS | IntBinOp::DivU => BinaryOp::Div,
        IntBinOp::RemS | IntBinOp::RemU => BinaryOp::Rem,
        IntBinOp::And => BinaryOp::BitAnd,
        IntBinOp::Or => BinaryOp::BitOr,
        IntBinOp::Xor => BinaryOp::BitXor,
        IntBinOp::Shl => BinaryOp::Shl,
        IntBinOp::ShrS => BinaryOp::Shr,
        IntBinOp::ShrU => BinaryOp::UShr,
        IntBinOp::Rotl | IntBinOp::Rotr => BinaryOp::Shl,
    }
}

fn int_cmp(op: IntCmp) -> BinaryOp {
    match op {
        IntCmp::Eq => BinaryOp::StrictEq,
        IntCmp::Ne => BinaryOp::StrictNotEq,
        IntCmp::LtS | IntCmp::LtU => BinaryOp::Lt,
        IntCmp::GtS | IntCmp::GtU => BinaryOp::Gt,
        IntCmp::LeS | IntCmp::LeU => BinaryOp::LtEq,
        IntCmp::GeS | IntCmp::GeU => BinaryOp::GtEq,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::js::printer::print_statements;
    use crate::js::NodeIdGen;
    use crate::wasm::{decode_body, Function};

    fn module_with(
        params: Vec<ValType>,
        results: Vec<ValType>,
        locals: Vec<ValType>,
        body: Vec<Instr>,
    ) -> WasmModule {
        WasmModule {
            types: vec![FuncType { params, results }],
            functions: vec![Function {
                type_idx: 0,
                locals,
                body: Ok(body),
                offset: 0,
            }],
            ..Default::default()
        }
    }

    #[test]
    fn const_mul_set() {
        let m = module_with(vec![], vec![], vec![ValType::I32], vec![]);
        let mut em = Emitter::new(Vec::new(), NodeIdGen::default());
        let mut ma = ModuleAbstraction::new(&m, "", &BTreeMap::new(), &mut em);
        let mut cx = ma.function_context(&mut em, 0).unwrap();
        let mut stmts = Vec::new();
        for i in [
            Instr::I32Const(2),
            Instr::I32Const(3),
            Instr::IntBin(IntWidth::W32, IntBinOp::Mul),
            Instr::LocalSet(0),
        ] {
            stmts.extend(cx.abstract_instruction(&i).unwrap());
        }
        assert!(cx.stack().is_empty());
        assert_eq!(
            print_statements(&stmts).trim_end(),
            "const C_0 = 2;\nconst C_1 = 3;\nconst T_0 = C_0 * C_1;\nloc0 = T_0;"
        );
    }

    #[test]
    fn underflow_is_reported() {
        let m = module_with(vec![], vec![], vec![], vec![Instr::Drop]);
        let mut em = Emitter::new(Vec::new(), NodeIdGen::default());
        let mut ma = ModuleAbstraction::new(&m, "", &BTreeMap::new(), &mut em);
        let err = ma.abstract_function(&mut em, 0).unwrap_err();
        assert!(matches!(err, AbstractionError::StackUnderflow { .. }));
    }

    #[test]
    fn loop_with_branches() {
        // (loop (br_if 0 (local.get 0))) then return local 0 + 1
        let (locals, body) = decode_body(&[
            0x00, 0x03, 0x40, 0x20, 0x00, 0x0D, 0x00, 0x0B, 0x20, 0x00, 0x41, 0x01, 0x6A, 0x0B,
        ])
        .unwrap();
        let m = module_with(vec![ValType::I32], vec![ValType::I32], locals, body);
        let mut em = Emitter::new(Vec::new(), NodeIdGen::default());
        let mut ma = ModuleAbstraction::new(&m, "", &BTreeMap::new(), &mut em);
        let frag = ma.abstract_function(&mut em, 0).unwrap();
        let text = print_statements(&frag.statements);
        assert!(text.contains("L_0: for (;;) {"), "{text}");
        assert!(text.contains("continue L_0;"), "{text}");
        assert_eq!(frag.params, vec!["p0"]);
        assert!(frag.result_expr.is_some());
    }

    #[test]
    fn unbound_import_gets_synthetic_name() {
        let mut m = module_with(vec![], vec![], vec![], vec![Instr::Call(0)]);
        m.imports.push(crate::wasm::Import {
            module: "env".into(),
            field: "f".into(),
            kind: ImportKind::Func(0),
        });
        let mut em = Emitter::new(Vec::new(), NodeIdGen::default());
        let mut ma = ModuleAbstraction::new(&m, "", &BTreeMap::new(), &mut em);
        let frag = ma.abstract_function(&mut em, 1).unwrap();
        assert_eq!(print_statements(&frag.statements).trim_end(), "IMPORT_0();");
        assert_eq!(ma.diagnostics.len(), 1);
    }

    #[test]
    fn large_i64_uses_helper() {
        let m = module_with(
            vec![],
            vec![ValType::I64],
            vec![],
            vec![Instr::I64Const(i64::MAX)],
        );
        let mut em = Emitter::new(Vec::new(), NodeIdGen::default());
        let mut ma = ModuleAbstraction::new(&m, "", &BTreeMap::new(), &mut em);
        let frag = ma.abstract_function(&mut em, 0).unwrap();
        assert_eq!(
            print_statements(&frag.statements).trim_end(),
            "const C_0 = i64(\"9223372036854775807\");"
        );
        assert!(frag.helpers_used.contains(&Helper::I64));
    }
}
