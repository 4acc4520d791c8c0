mod common;

use std::collections::BTreeMap;

use jwbinder_core::js::{parse_js, Expr, StmtKind};
use jwbinder_core::oracle::{differential_check, interp_wasm, Host, StubHost, Trap, Value};
use jwbinder_core::wasm::{decode_module, WasmModule};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn module(wat: &str) -> WasmModule {
    decode_module(&wat::parse_str(wat).unwrap()).unwrap()
}

fn stub() -> Box<dyn Host> {
    Box::new(StubHost::default())
}

fn check(m: &WasmModule, export: &str, inputs: &[Vec<Value>]) -> jwbinder_core::oracle::DiffReport {
    let f = m.exported_func(export).unwrap();
    differential_check(m, f, inputs, &BTreeMap::new(), &mut stub)
}

fn run(m: &WasmModule, export: &str, args: &[Value]) -> Result<Option<Value>, Trap> {
    let f = m.exported_func(export).unwrap();
    interp_wasm(m, f, args, &[], &mut StubHost::default()).outcome
}

#[test]
fn reference_results() {
    let m = module(common::SMALL_WAT);
    assert_eq!(
        run(&m, "add", &[Value::I32(3), Value::I32(4)]),
        Ok(Some(Value::I32(7)))
    );
    assert_eq!(run(&m, "pop", &[Value::I32(13)]), Ok(Some(Value::I32(3))));
    assert_eq!(run(&m, "sum", &[Value::I32(5)]), Ok(Some(Value::I32(15))));
    assert_eq!(
        run(&m, "div", &[Value::I32(9), Value::I32(0)]),
        Err(Trap::DivByZero)
    );
    assert_eq!(
        run(&m, "div", &[Value::I32(i32::MIN), Value::I32(-1)]),
        Err(Trap::IntegerOverflow)
    );
}

#[test]
fn small_functions_agree() {
    let m = module(common::SMALL_WAT);
    for (name, inputs) in [
        (
            "add",
            vec![
                vec![Value::I32(3), Value::I32(4)],
                vec![Value::I32(i32::MAX), Value::I32(1)],
            ],
        ),
        ("pop", vec![vec![Value::I32(13)], vec![Value::I32(-1)]]),
        (
            "sum",
            vec![
                vec![Value::I32(5)],
                vec![Value::I32(0)],
                vec![Value::I32(100)],
            ],
        ),
        (
            "div",
            vec![
                vec![Value::I32(7), Value::I32(0)],
                vec![Value::I32(-7), Value::I32(2)],
            ],
        ),
    ] {
        let r = check(&m, name, &inputs);
        assert!(
            r.passed(),
            "{name}: {:?} {:?}",
            r.abstraction_error,
            r.mismatches
        );
        assert_eq!(r.runs, inputs.len());
    }
}

#[test]
fn division_by_zero_traps_on_both_sides() {
    let m = module(common::SMALL_WAT);
    let r = check(&m, "div", &[vec![Value::I32(1), Value::I32(0)]]);
    assert!(r.passed());
    let m2 = module(
        "(module (func (export \"f\") (result i32) (i32.rem_u (i32.const 1) (i32.const 0))))",
    );
    assert_eq!(run(&m2, "f", &[]), Err(Trap::DivByZero));
    assert!(check(&m2, "f", &[vec![]]).passed());
}

#[test]
fn random_additions_agree() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = module(common::SMALL_WAT);
    let inputs: Vec<Vec<Value>> = (0..100)
        .map(|_| vec![Value::I32(rng.gen()), Value::I32(rng.gen())])
        .collect();
    let r = check(&m, "add", &inputs);
    assert!(r.passed(), "{:?}", r.mismatches.first());
}

#[test]
fn memory_and_i64_paths_agree() {
    let m = module(
        r#"(module (memory 1)
             (data (i32.const 8) "\ff\00\80\7f")
             (func (export "f") (param i32) (result i64)
               (i32.store16 offset=2 (i32.const 100) (local.get 0))
               (i64.add
                 (i64.load32_u (i32.const 8))
                 (i64.extend_i32_s (i32.load16_s (i32.const 102)))))
             (func (export "oob") (param i32) (result i32)
               (i32.load (local.get 0))))"#,
    );
    let inputs = vec![vec![Value::I32(-2)], vec![Value::I32(0x1234)]];
    assert!(check(&m, "f", &inputs).passed());
    let oob = vec![
        vec![Value::I32(65534)],
        vec![Value::I32(-1)],
        vec![Value::I32(4)],
    ];
    let r = check(&m, "oob", &oob);
    assert!(r.passed(), "{:?}", r.mismatches);
    assert_eq!(run(&m, "oob", &[Value::I32(65534)]), Err(Trap::OutOfBounds));
}

#[test]
fn float_results_compare_bitwise() {
    let m = module(
        r#"(module
             (func (export "f") (param f64 f64) (result f64) (f64.div (local.get 0) (local.get 1)))
             (func (export "g") (param f32) (result f32) (f32.mul (local.get 0) (f32.const 0.1))))"#,
    );
    let inputs = vec![
        vec![Value::F64(1.0), Value::F64(0.0)],
        vec![Value::F64(-1.0), Value::F64(0.0)],
        vec![Value::F64(0.0), Value::F64(0.0)],
        vec![Value::F64(1.0), Value::F64(3.0)],
    ];
    assert!(check(&m, "f", &inputs).passed());
    let r = check(&m, "g", &[vec![Value::F32(3.0)], vec![Value::F32(1e30)]]);
    assert!(r.passed(), "{:?}", r.mismatches);
}

fn fig1_binding() -> BTreeMap<(String, String), Expr> {
    let prog = parse_js("document.write;").unwrap();
    let StmtKind::Expr(expr) = &prog.body[0].kind else {
        unreachable!()
    };
    BTreeMap::from([(
        ("env".to_string(), "document_write".to_string()),
        expr.clone(),
    )])
}

#[test]
fn running_example_traces_match() {
    let m = decode_module(&common::fig1_wasm()).unwrap();
    let foo = m.exported_func("foo").unwrap();
    let paths = vec!["document.write".to_string()];
    let mut host = StubHost {
        read_strings: true,
        ..Default::default()
    };
    let exec = interp_wasm(&m, foo, &[], &paths, &mut host);
    assert_eq!(exec.outcome, Ok(None));
    let notes: Vec<_> = exec.trace.iter().map(|c| c.note.clone().unwrap()).collect();
    assert_eq!(notes, common::FIG1_PAYLOADS);
    assert!(exec.trace.iter().all(|c| c.callee == "document.write"));

    let r = differential_check(&m, foo, &[vec![]], &fig1_binding(), &mut || {
        Box::new(StubHost {
            read_strings: true,
            ..Default::default()
        })
    });
    assert!(r.passed(), "{:?} {:?}", r.abstraction_error, r.mismatches);
}

#[test]
fn generated_functions_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..25 {
        let wat = common::gen::Gen::new(&mut rng).module(3);
        let m =
            decode_module(&wat::parse_str(&wat).unwrap_or_else(|e| panic!("{e}\n{wat}"))).unwrap();
        let inputs = common::gen::inputs(&mut rng, 10);
        let r = check(&m, "f", &inputs);
        assert!(
            r.passed(),
            "program {i}:\n{wat}\n{:?}\n{:?}",
            r.abstraction_error,
            r.mismatches.first()
        );
    }
}
