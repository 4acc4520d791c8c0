//! Host-import fixtures and benign JS+Wasm samples.

use std::collections::{BTreeMap, HashMap};

use jwbinder_core::js::{parse_js, Expr, StmtKind};
use jwbinder_core::oracle::Value;
use rand_chacha::ChaCha8Rng;

use super::gen::Gen;

/// Literal-string rules standing in for a malicious-script engine.
pub const STUB_RULES: &str = r#"[
  {"id": "write-script", "strings": ["document.write", "<script src="]},
  {"id": "eval-atob", "strings": ["eval(", "atob("]},
  {"id": "hidden-iframe", "strings": ["<iframe", "evil.example"]},
  {"id": "coin-miner", "strings": ["CoinHive.Anonymous"]},
  {"id": "unescape-shellcode", "strings": ["unescape(", "%u9090"]}
]"#;

pub fn js_expr(src: &str) -> Expr {
    let p = parse_js(&format!("({src});")).unwrap();
    match &p.body[0].kind {
        StmtKind::Expr(e) => e.clone(),
        other => panic!("not an expression: {other:?}"),
    }
}

/// A module with imports, the JS expression bound to each import, stub
/// results per callee, and the inputs to run `run` on.
pub struct ImportFixture {
    pub name: &'static str,
    pub wat: String,
    pub bindings: BTreeMap<(String, String), Expr>,
    pub results: HashMap<String, Value>,
    pub inputs: Vec<Vec<Value>>,
    pub export: &'static str,
}

fn bind(pairs: &[(&str, &str, &str)]) -> BTreeMap<(String, String), Expr> {
    pairs
        .iter()
        .map(|(m, f, js)| ((m.to_string(), f.to_string()), js_expr(js)))
        .collect()
}

fn ints(xs: &[i32]) -> Vec<Vec<Value>> {
    xs.iter().map(|x| vec![Value::I32(*x)]).collect()
}

pub fn import_fixtures() -> Vec<ImportFixture> {
    let xs = ints(&[0, 1, 7, 11, 12, -3, 100, i32::MIN, i32::MAX, 65]);
    vec![
        ImportFixture {
            name: "running-example",
            wat: super::fig1_wat(),
            bindings: bind(&[("env", "document_write", "document.write")]),
            results: HashMap::new(),
            inputs: vec![vec![]],
            export: "foo",
        },
        ImportFixture {
            name: "squares-logged-in-loop",
            wat: r#"(module (import "console" "log" (func $log (param i32)))
              (func (export "run") (param $n i32) (local $i i32)
                (block $out (loop $top
                  (br_if $out (i32.ge_s (local.get $i) (i32.rem_u (local.get $n) (i32.const 5))))
                  (call $log (i32.mul (local.get $i) (local.get $i)))
                  (local.set $i (i32.add (local.get $i) (i32.const 1)))
                  (br $top)))))"#
                .to_string(),
            bindings: bind(&[("console", "log", "console.log")]),
            results: HashMap::new(),
            inputs: xs.clone(),
            export: "run",
        },
        ImportFixture {
            name: "host-results-feed-arithmetic",
            wat: r#"(module (import "env" "rand" (func $rand (result i32)))
              (func (export "run") (param i32) (result i32)
                (i32.add (i32.mul (call $rand) (local.get 0)) (call $rand))))"#
                .to_string(),
            bindings: bind(&[("env", "rand", "host.rand")]),
            results: HashMap::from([("host.rand".to_string(), Value::I32(7))]),
            inputs: xs.clone(),
            export: "run",
        },
        ImportFixture {
            name: "mixed-width-arguments",
            wat: r#"(module (import "env" "emit" (func $emit (param i32 i64 f64)))
              (func (export "run") (param i32)
                (call $emit (local.get 0)
                  (i64.mul (i64.extend_i32_s (local.get 0)) (i64.const 1000000007))
                  (f64.div (f64.convert_i32_s (local.get 0)) (f64.const 3)))))"#
                .to_string(),
            bindings: bind(&[("env", "emit", "sink.emit")]),
            results: HashMap::new(),
            inputs: xs.clone(),
            export: "run",
        },
        ImportFixture {
            name: "conditional-call",
            wat: r#"(module (import "env" "alert" (func $alert (param i32)))
              (func (export "run") (param i32) (result i32)
                (if (i32.gt_s (local.get 0) (i32.const 10))
                  (then (call $alert (local.get 0)))
                  (else (call $alert (i32.sub (i32.const 0) (local.get 0)))))
                (local.get 0)))"#
                .to_string(),
            bindings: bind(&[("env", "alert", "window.alert")]),
            results: HashMap::new(),
            inputs: xs.clone(),
            export: "run",
        },
        ImportFixture {
            name: "call-through-internal-function",
            wat: r#"(module (import "env" "log" (func $log (param i32)))
              (func $twice (param i32) (result i32)
                (call $log (local.get 0))
                (i32.shl (local.get 0) (i32.const 1)))
              (func (export "run") (param i32) (result i32)
                (call $twice (call $twice (local.get 0)))))"#
                .to_string(),
            bindings: bind(&[("env", "log", "console.log")]),
            results: HashMap::new(),
            inputs: xs.clone(),
            export: "run",
        },
        ImportFixture {
            name: "global-state-between-calls",
            wat: r#"(module (import "env" "log" (func $log (param i32)))
              (global $count (mut i32) (i32.const 100))
              (func (export "run") (param i32)
                (global.set $count (i32.add (global.get $count) (local.get 0)))
                (call $log (global.get $count))
                (global.set $count (i32.xor (global.get $count) (i32.const 255)))
                (call $log (global.get $count))))"#
                .to_string(),
            bindings: bind(&[("env", "log", "console.log")]),
            results: HashMap::new(),
            inputs: xs.clone(),
            export: "run",
        },
        ImportFixture {
            name: "dispatch-by-table",
            wat: r#"(module
              (import "env" "a" (func $a (param i32)))
              (import "env" "b" (func $b (param i32)))
              (import "env" "c" (func $c (param i32)))
              (func (export "run") (param i32)
                (block $z (block $y (block $x
                  (br_table $x $y $z (i32.and (local.get 0) (i32.const 3))))
                  (call $a (local.get 0)) (return))
                  (call $b (local.get 0)) (return))
                (call $c (local.get 0))))"#
                .to_string(),
            bindings: bind(&[("env", "a", "api.a"), ("env", "b", "api.b"), ("env", "c", "api.c")]),
            results: HashMap::new(),
            inputs: xs.clone(),
            export: "run",
        },
        ImportFixture {
            name: "trap-after-calls",
            wat: r#"(module (import "env" "log" (func $log (param i32)))
              (func (export "run") (param i32) (result i32)
                (call $log (i32.const 1))
                (call $log (local.get 0))
                (i32.div_s (i32.const 100) (i32.sub (local.get 0) (i32.const 7)))))"#
                .to_string(),
            bindings: bind(&[("env", "log", "console.log")]),
            results: HashMap::new(),
            inputs: xs.clone(),
            export: "run",
        },
        ImportFixture {
            name: "host-value-ends-loop",
            wat: r#"(module
              (import "env" "poll" (func $poll (param i32) (result i32)))
              (memory 1)
              (data (i32.const 32) "status\00")
              (func (export "run") (param $x i32) (result i32) (local $i i32) (local $acc i32)
                (loop $again
                  (local.set $acc (i32.add (local.get $acc) (call $poll (i32.const 32))))
                  (local.set $i (i32.add (local.get $i) (i32.const 1)))
                  (br_if $again (i32.lt_u (local.get $acc) (i32.and (local.get $x) (i32.const 31)))))
                (local.get $i)))"#
                .to_string(),
            bindings: bind(&[("env", "poll", "net.poll")]),
            results: HashMap::from([("net.poll".to_string(), Value::I32(3))]),
            inputs: xs,
            export: "run",
        },
    ]
}

/// An arithmetic-only JS+Wasm sample: a generated module instantiated from
/// an inline byte array and invoked with constant arguments.
pub fn benign_sample(rng: &mut ChaCha8Rng, i: usize) -> (String, Vec<u8>) {
    let wat = Gen::new(rng).module(3);
    let wasm = wat::parse_str(&wat).unwrap();
    let js = format!(
        "var calc{i} = new WebAssembly.Instance(new WebAssembly.Module(new Uint8Array([{}])), {{}});\n\
         var total = 0;\n\
         for (var k = 0; k < 3; k++) {{\n  total = total + calc{i}.exports.f(k, {i});\n}}\n\
         console.log(\"sum\", calc{i}.exports.f(total, 2));\n",
        super::byte_list(&wasm)
    );
    (js, wasm)
}
