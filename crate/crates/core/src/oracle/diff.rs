use std::collections::BTreeMap;

use crate::js::{print_expr, Expr, NodeIdGen};
use crate::ssr::{AbstractionError, Emitter, ModuleAbstraction};
use crate::wasm::{ImportKind, WasmModule};

use super::{
    eval_fragment, initial_memory, interp_wasm, Execution, FragmentRun, Host, HostCall, Trap, Value,
};

/// Host callee path for every imported function, as the fragment names it.
pub fn import_paths(
    module: &WasmModule,
    bindings: &BTreeMap<(String, String), Expr>,
) -> Vec<String> {
    module
        .imports
        .iter()
        .filter(|i| matches!(i.kind, ImportKind::Func(_)))
        .enumerate()
        .map(
            |(k, i)| match bindings.get(&(i.module.clone(), i.field.clone())) {
                Some(e) => print_expr(e),
                None => format!("IMPORT_{k}"),
            },
        )
        .collect()
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Observation {
    pub result: Result<Option<Value>, Trap>,
    pub trace: Vec<HostCall>,
}

impl From<Execution> for Observation {
    fn from(e: Execution) -> Self {
        Observation {
            result: e.outcome,
            trace: e.trace,
        }
    }
}

impl Observation {
    fn agrees(&self, other: &Observation) -> bool {
        let broken =
            |r: &Result<Option<Value>, Trap>| matches!(r, Err(Trap::Type(_) | Trap::Other(_)));
        !broken(&self.result) && !broken(&other.result) && self == other
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct Mismatch {
    pub input: Vec<Value>,
    pub wasm: Observation,
    pub fragment: Observation,
}

#[derive(Clone, Debug, Default)]
pub struct DiffReport {
    pub func_index: u32,
    pub runs: usize,
    pub mismatches: Vec<Mismatch>,
    pub abstraction_error: Option<AbstractionError>,
}

impl DiffReport {
    pub fn passed(&self) -> bool {
        self.abstraction_error.is_none() && self.mismatches.is_empty()
    }
}

/// Runs `func_idx` through the interpreter and through its abstraction on
/// every input vector and records disagreements in (result, trap, host trace).
pub fn differential_check(
    module: &WasmModule,
    func_idx: u32,
    inputs: &[Vec<Value>],
    bindings: &BTreeMap<(String, String), Expr>,
    make_host: &mut dyn FnMut() -> Box<dyn Host>,
) -> DiffReport {
    let mut report = DiffReport {
        func_index: func_idx,
        ..Default::default()
    };
    let mut em = Emitter::new(Vec::new(), NodeIdGen::default());
    let mut ma = ModuleAbstraction::new(module, "", bindings, &mut em);
    let fragment = match ma.abstract_function(&mut em, func_idx) {
        Ok(f) => f,
        Err(e) => {
            report.abstraction_error = Some(e);
            return report;
        }
    };
    let prelude = ma.finish(&mut em);
    let helpers = em.helper_names();
    let paths = import_paths(module, bindings);
    let max_pages = module.memories.first().and_then(|l| l.max);
    for input in inputs {
        report.runs += 1;
        let wasm: Observation =
            interp_wasm(module, func_idx, input, &paths, make_host().as_mut()).into();
        let frag: Observation = match initial_memory(module) {
            Ok(memory) => eval_fragment(
                FragmentRun {
                    fragment: &fragment,
                    prelude: &prelude.statements,
                    tables: &em.tables,
                    helpers: &helpers,
                    memory,
                    max_pages,
                },
                input,
                make_host().as_mut(),
            )
            .into(),
            Err(t) => Observation {
                result: Err(t),
                trace: Vec::new(),
            },
        };
        if !wasm.agrees(&frag) {
            report.mismatches.push(Mismatch {
                input: input.clone(),
                wasm,
                fragment: frag,
            });
        }
    }
    report
}
