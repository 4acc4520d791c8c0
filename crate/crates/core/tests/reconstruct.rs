mod common;

use jwbinder_core::harness::{analyze_source, AnalyzeOptions};
use jwbinder_core::js::{parse_js, structurally_equal};
use jwbinder_core::reconstruct::Mode;

fn analyze(src: &str) -> jwbinder_core::harness::Analysis {
    analyze_source(src, &AnalyzeOptions::default()).unwrap()
}

#[test]
fn running_example_in_every_mode() {
    let a = analyze(&common::fig1_js());
    assert_eq!(a.entry.instantiation_sites, 1);
    assert_eq!(a.entry.invocations, 1);
    assert!(a.entry.failures.is_empty(), "{:?}", a.entry.failures);
    assert!(a.entry.binaries[0].resolved);

    let code = a.output(Mode::Code).unwrap();
    let data = a.output(Mode::Data).unwrap();
    let all = a.output(Mode::All).unwrap();
    for text in [code, data, all] {
        parse_js(text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    }
    assert!(code.contains("document.write("));
    assert!(code.contains("for (;;)"));
    assert!(!code.contains("wasmInstance.exports.foo()"));
    assert!(!code.contains("<script src="));

    assert!(data.contains("<script src="));
    assert!(data.contains("wasmInstance.exports.foo()"));
    assert!(data.find("DATA_0").unwrap() < data.find("new WebAssembly.Instance").unwrap());

    assert!(all.contains("<script src=") && all.contains("document.write("));
    assert!(!common::fig1_js().contains("<script src="));
}

#[test]
fn no_interop_is_identity() {
    for src in [
        "",
        "var x = 1;\nfunction f(a) { return a * 2; }\nconsole.log(f(x));\n",
        "const o = { a: [1, 2, 3] }; for (let k = 0; k < 3; k++) { if (o.a[k]) break; }",
    ] {
        let a = analyze(src);
        for (_, text) in &a.outputs {
            assert_eq!(text, src);
            assert!(structurally_equal(
                &parse_js(text).unwrap(),
                &parse_js(src).unwrap()
            ));
        }
    }
}

#[test]
fn invocation_arguments_are_bound() {
    let wasm = wat::parse_str(
        r#"(module (func (export "mix") (param i32 i32) (result i32)
             (i32.add (i32.mul (local.get 0) (i32.const 3)) (local.get 1))))"#,
    )
    .unwrap();
    let src = format!(
        "const inst = new WebAssembly.Instance(new WebAssembly.Module(new Uint8Array([{}])), {{}});\n\
         const r = inst.exports.mix(f(), 4) + 1;\nconsole.log(r);\n",
        common::byte_list(&wasm)
    );
    let a = analyze(&src);
    let code = a.output(Mode::Code).unwrap();
    assert!(code.contains("const p0 = f();"), "{code}");
    assert!(code.contains("const p1 = 4;"), "{code}");
    assert!(!code.contains("inst.exports.mix("));
    parse_js(code).unwrap();
}

#[test]
fn two_sites_get_disjoint_names() {
    let wasm = common::fig1_wasm();
    let bytes = common::byte_list(&wasm);
    let src = format!(
        "const a = new WebAssembly.Instance(new WebAssembly.Module(new Uint8Array([{bytes}])), {{ env: {{ document_write: document.write }} }});\n\
         const b = new WebAssembly.Instance(new WebAssembly.Module(new Uint8Array([{bytes}])), {{ env: {{ document_write: console.log }} }});\n\
         a.exports.foo();\nb.exports.foo();\n"
    );
    let a = analyze(&src);
    let all = a.output(Mode::All).unwrap();
    let prefixes: Vec<&str> = all
        .match_indices("_DATA_0 = ")
        .map(|(i, _)| all[..i].rsplit(' ').next().unwrap())
        .collect();
    assert_eq!(prefixes.len(), 2, "{all}");
    assert_ne!(prefixes[0], prefixes[1]);
    assert!(prefixes.iter().all(|p| p.starts_with('S')));
    assert!(all.contains("document.write(") && all.contains("console.log("));
    parse_js(all).unwrap();
}

#[test]
fn reconstruction_is_deterministic() {
    let src = common::fig1_js();
    let a = analyze(&src);
    let b = analyze(&src);
    assert_eq!(a.outputs, b.outputs);
    assert_eq!(a.entry.without_timings(), b.entry.without_timings());
}
