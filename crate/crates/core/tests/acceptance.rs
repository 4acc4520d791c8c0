//! End-to-end acceptance checks. Runs without the libtest harness so each
//! check prints exactly one PASS/FAIL line; exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use jwbinder_core::harness::{
    analyze_source, compute_metrics, AnalyzeOptions, DetectionMatrix, SignatureSet, Variant,
    VariantMatrix,
};
use jwbinder_core::interop::InteropMap;
use jwbinder_core::js::{parse_js, print_js, structurally_equal};
use jwbinder_core::oracle::{differential_check, Host, StubHost};
use jwbinder_core::pdg::build_pdg;
use jwbinder_core::reconstruct::{abstract_sites, integrate, reconstruct, Mode};
use jwbinder_core::wasm::{decode_module, decode_sleb, decode_uleb, ExternalKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::fixtures::{benign_sample, import_fixtures, STUB_RULES};

type Check = Result<String, String>;
type Named = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    };
}

fn stub_engine() -> SignatureSet {
    SignatureSet::parse("stub", STUB_RULES).unwrap()
}

fn analyze(src: &str) -> jwbinder_core::harness::Analysis {
    analyze_source(src, &AnalyzeOptions::default()).unwrap()
}

fn running_example_uplift() -> Check {
    let started = Instant::now();
    let js = common::fig1_js();
    let payload = common::FIG1_PAYLOADS[0];
    let marker = &payload[..payload.find('"').unwrap()];
    let write_payload = SignatureSet::new(
        "w",
        vec![jwbinder_core::harness::Rule {
            id: "write-payload".into(),
            strings: vec!["document.write".into(), marker.into()],
        }],
    );
    let payload_only = SignatureSet::parse(
        "p",
        &format!(r#"[{{"id": "payload", "strings": [{:?}]}}]"#, marker),
    )
    .unwrap();
    let write_in_loop = SignatureSet::parse(
        "l",
        r#"[{"id": "write-loop", "strings": ["for (;;)", "document.write("]}]"#,
    )
    .unwrap();

    let a = analyze(&js);
    let (code, data, all) = (
        a.output(Mode::Code).unwrap(),
        a.output(Mode::Data).unwrap(),
        a.output(Mode::All).unwrap(),
    );
    ensure!(!write_payload.scan(&js).matched, "original already matches");
    ensure!(
        write_payload.scan(all).matched,
        "all-mode output does not match"
    );
    ensure!(
        payload_only.scan(data).matched,
        "data-mode output lacks the payload"
    );
    ensure!(
        write_in_loop.scan(code).matched,
        "code-mode output lacks the write loop"
    );
    ensure!(
        !stub_engine().scan(&js).matched,
        "stub engine flags the original"
    );
    ensure!(
        stub_engine().scan(all).matched,
        "stub engine misses the reconstruction"
    );
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(2), "took {elapsed:?}");
    Ok(format!(
        "original clean, .all/.data/.code flagged, {:.3} s",
        elapsed.as_secs_f64()
    ))
}

fn differential_fidelity() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut runs = 0;
    for i in 0..200 {
        let wat = common::gen::Gen::new(&mut rng).module(4);
        let m = decode_module(&wat::parse_str(&wat).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let inputs = common::gen::inputs(&mut rng, 20);
        let f = m.exported_func("f").unwrap();
        let r = differential_check(&m, f, &inputs, &BTreeMap::new(), &mut || {
            Box::new(StubHost::default())
        });
        ensure!(
            r.abstraction_error.is_none(),
            "program {i}: {:?}\n{wat}",
            r.abstraction_error
        );
        ensure!(
            r.mismatches.is_empty(),
            "program {i}: {:?}\n{wat}",
            r.mismatches[0]
        );
        runs += r.runs;
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "200 functions, {runs} runs, 0 mismatches, {:.2} s",
        elapsed.as_secs_f64()
    ))
}

fn host_trace_fidelity() -> Check {
    let fixtures = import_fixtures();
    ensure!(fixtures.len() >= 10, "only {} fixtures", fixtures.len());
    let mut calls = 0;
    for fx in &fixtures {
        let m = decode_module(&wat::parse_str(&fx.wat).map_err(|e| format!("{}: {e}", fx.name))?)
            .map_err(|e| format!("{}: {e}", fx.name))?;
        let f = m.exported_func(fx.export).unwrap();
        let results = fx.results.clone();
        let mut host = || -> Box<dyn Host> {
            Box::new(StubHost {
                results: results.clone(),
                read_strings: true,
            })
        };
        let r = differential_check(&m, f, &fx.inputs, &fx.bindings, &mut host);
        ensure!(
            r.abstraction_error.is_none(),
            "{}: {:?}",
            fx.name,
            r.abstraction_error
        );
        ensure!(
            r.mismatches.is_empty(),
            "{}: {:?}",
            fx.name,
            r.mismatches[0]
        );
        let paths = jwbinder_core::oracle::import_paths(&m, &fx.bindings);
        let observed: usize = fx
            .inputs
            .iter()
            .map(|args| {
                jwbinder_core::oracle::interp_wasm(&m, f, args, &paths, host().as_mut())
                    .trace
                    .len()
            })
            .sum();
        ensure!(observed > 0, "{}: no host calls observed", fx.name);
        calls += observed;
    }
    Ok(format!(
        "{} fixtures, traces identical over {calls} host calls",
        fixtures.len()
    ))
}

fn benign_side_effects() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let engine = stub_engine();
    let mut outputs = 0;
    for i in 0..50 {
        let (js, _) = benign_sample(&mut rng, i);
        let a = analyze(&js);
        ensure!(
            a.entry.invocations == 2,
            "sample {i}: {} invocations",
            a.entry.invocations
        );
        for (mode, text) in &a.outputs {
            parse_js(text).map_err(|e| format!("sample {i} {mode}: {e}"))?;
            let v = engine.scan(text);
            ensure!(!v.matched, "sample {i} {mode}: matched {:?}", v.rules);
            outputs += 1;
        }
    }
    Ok(format!(
        "50 samples, {outputs} outputs re-parse, 0 signature matches"
    ))
}

/// Per-sample engine sets reproducing the published aggregates over 1000
/// samples and 12 engines.
fn table_matrix() -> DetectionMatrix {
    const ENGINES: usize = 12;
    let mut variants: BTreeMap<Variant, VariantMatrix> = BTreeMap::new();
    let mut push = |v: Variant, sample: usize, engines: &[usize]| {
        let m = variants.entry(v).or_insert_with(|| VariantMatrix {
            engines: (0..ENGINES).map(|e| format!("engine{e:02}")).collect(),
            ..Default::default()
        });
        m.samples.push(format!("sample{sample:04}"));
        m.verdicts
            .push((0..ENGINES).map(|e| engines.contains(&e)).collect());
    };
    let range = |n: usize| (0..n).collect::<Vec<_>>();
    for s in 0..1000 {
        let baseline = match s {
            0..=508 => range(0),
            509..=827 => range(8),
            _ => range(9),
        };
        push(Variant::Baseline, s, &baseline);
        // 138 undetected, 52 code-only nine-engine samples, 215 data-only
        // nine-engine samples, 53 nine-engine samples with partial code,
        // 542 ten-engine samples split between both.
        let (code, data): (Vec<usize>, Vec<usize>) = match s {
            0..=137 => (vec![], vec![]),
            138..=189 => (range(9), vec![]),
            190..=404 => (vec![], range(9)),
            405..=441 => (range(4), range(9)),
            442..=457 => (range(3), range(9)),
            458..=789 => (range(8), (1..10).collect()),
            _ => (range(8), range(10)),
        };
        push(Variant::Code, s, &code);
        push(Variant::Data, s, &data);
    }
    DetectionMatrix { variants }
}

fn metric_math() -> Check {
    let m = compute_metrics(&table_matrix(), 2).map_err(|e| e.to_string())?;
    let want = [
        (Variant::Baseline, 0.491, 4.1),
        (Variant::Code, 0.647, 5.0),
        (Variant::Data, 0.810, 7.5),
        (Variant::Combined, 0.862, 8.3),
    ];
    for (v, sdr, ade) in want {
        let got = m[&v];
        ensure!((got.sdr - sdr).abs() < 5e-4, "{v} SDR {} != {sdr}", got.sdr);
        ensure!((got.ade - ade).abs() < 5e-3, "{v} ADE {} != {ade}", got.ade);
    }
    let trivial = |counts: &[usize]| {
        let mut rows = VariantMatrix {
            engines: vec!["a".into(), "b".into()],
            ..Default::default()
        };
        for (i, c) in counts.iter().enumerate() {
            rows.samples.push(i.to_string());
            rows.verdicts.push(vec![*c > 0, *c > 1]);
        }
        let d = DetectionMatrix {
            variants: BTreeMap::from([(Variant::Baseline, rows)]),
        };
        compute_metrics(&d, 2).map(|m| (m[&Variant::Baseline].sdr, m[&Variant::Baseline].ade))
    };
    ensure!(
        trivial(&[2, 2]) == Ok((1.0, 2.0)),
        "[2, 2] gave {:?}",
        trivial(&[2, 2])
    );
    ensure!(
        trivial(&[0]) == Ok((0.0, 0.0)),
        "[0] gave {:?}",
        trivial(&[0])
    );
    Ok(format!(
        "SDR {:.1}% -> {:.1}%, ADE {:.1} -> {:.1}",
        m[&Variant::Baseline].sdr * 100.0,
        m[&Variant::Combined].sdr * 100.0,
        m[&Variant::Baseline].ade,
        m[&Variant::Combined].ade
    ))
}

/// Compares the decoder against an independent parser on one binary.
fn conforms(bytes: &[u8]) -> Result<(), String> {
    use wasmparser::{Parser, Payload};
    let ours = decode_module(bytes).map_err(|e| e.to_string())?;
    let (
        mut types,
        mut imports,
        mut funcs,
        mut tables,
        mut mems,
        mut globals,
        mut elems,
        mut bodies,
    ) = (0, 0, 0, 0, 0, 0, 0, 0);
    let mut exports = Vec::new();
    let mut data = Vec::new();
    for payload in Parser::new(0).parse_all(bytes) {
        match payload.map_err(|e| e.to_string())? {
            Payload::TypeSection(r) => types += r.count(),
            Payload::ImportSection(r) => imports += r.count(),
            Payload::FunctionSection(r) => funcs += r.count(),
            Payload::TableSection(r) => tables += r.count(),
            Payload::MemorySection(r) => mems += r.count(),
            Payload::GlobalSection(r) => globals += r.count(),
            Payload::ElementSection(r) => elems += r.count(),
            Payload::ExportSection(r) => {
                for e in r {
                    exports.push(e.map_err(|e| e.to_string())?.name.to_string());
                }
            }
            Payload::DataSection(r) => {
                for d in r {
                    data.push(d.map_err(|e| e.to_string())?.data.to_vec());
                }
            }
            Payload::CodeSectionEntry(_) => bodies += 1,
            _ => {}
        }
    }
    let counts = |a: usize, b: u32, what: &str| {
        if a == b as usize {
            Ok(())
        } else {
            Err(format!("{what}: decoded {a}, reference {b}"))
        }
    };
    counts(ours.types.len(), types, "types")?;
    counts(ours.imports.len(), imports, "imports")?;
    counts(ours.functions.len(), funcs, "functions")?;
    counts(ours.functions.len(), bodies, "bodies")?;
    counts(ours.tables.len(), tables, "tables")?;
    counts(ours.memories.len(), mems, "memories")?;
    counts(ours.globals.len(), globals, "globals")?;
    counts(ours.elements.len(), elems, "elements")?;
    let names: Vec<String> = ours.exports.iter().map(|e| e.name.clone()).collect();
    if names != exports {
        return Err(format!("exports {names:?} vs {exports:?}"));
    }
    let ours_data: Vec<Vec<u8>> = ours.data_segments.iter().map(|d| d.bytes.clone()).collect();
    if ours_data != data {
        return Err("data segment bytes differ".to_string());
    }
    if let Some(f) = ours.functions.iter().find(|f| f.body.is_err()) {
        return Err(format!("body at {} failed: {:?}", f.offset, f.body));
    }
    if decode_module(bytes).map_err(|e| e.to_string())? != ours {
        return Err("decoding is not deterministic".to_string());
    }
    Ok(())
}

fn decoder_conformance() -> Check {
    let mut corpus: Vec<(String, Vec<u8>)> = vec![
        ("running-example".into(), common::fig1_wasm()),
        ("small".into(), wat::parse_str(common::SMALL_WAT).unwrap()),
    ];
    for fx in import_fixtures() {
        corpus.push((fx.name.into(), wat::parse_str(&fx.wat).unwrap()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..60 {
        let wat = common::gen::Gen::new(&mut rng).module(3);
        corpus.push((format!("generated-{i}"), wat::parse_str(&wat).unwrap()));
    }
    for (name, bytes) in &corpus {
        conforms(bytes).map_err(|e| format!("{name}: {e}"))?;
    }
    let fig1 = decode_module(&common::fig1_wasm()).unwrap();
    ensure!(
        fig1.imports.len() == 1 && fig1.imports[0].field == "document_write",
        "running example imports {:?}",
        fig1.imports
    );
    ensure!(
        fig1.functions.len() == 1 && fig1.data_segments.len() == 1,
        "running example shape"
    );
    ensure!(
        fig1.exports.len() == 1
            && fig1.exports[0].name == "foo"
            && fig1.exports[0].kind == ExternalKind::Func,
        "running example exports"
    );

    let leb = [0xE5u8, 0x8E, 0x26];
    let reference = leb128::read::unsigned(&mut &leb[..]).unwrap();
    ensure!(
        decode_uleb(&leb, 0) == Ok((624485, 3)) && reference == 624485,
        "uleb 624485"
    );
    ensure!(decode_uleb(&[0x00], 0) == Ok((0, 1)), "uleb 0");
    ensure!(
        decode_uleb(&[0x80; 6], 0).is_err(),
        "overlong uleb accepted"
    );
    let mut buf = Vec::new();
    for v in [-1i64, -64, 63, -123456, i32::MIN as i64, i32::MAX as i64] {
        buf.clear();
        leb128::write::signed(&mut buf, v).unwrap();
        ensure!(
            decode_sleb(&buf, 0) == Ok((v as i32, buf.len())),
            "sleb {v}"
        );
    }
    Ok(format!(
        "{} binaries agree with the reference parser, LEB128 examples hold",
        corpus.len()
    ))
}

fn throughput_sample() -> (String, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut g = common::gen::Gen::new(&mut rng);
    let funcs: Vec<String> = (0..240).map(|i| g.function(&format!("f{i}"), 3)).collect();
    let text: String = (0..90)
        .map(|i| format!("record {i}: status=ok; "))
        .collect();
    let module = g.module_with(&funcs, &format!("(data (i32.const 4096) \"{text}\")"));
    let wasm = wat::parse_str(&module).unwrap();
    let literal = common::byte_list(&wasm);
    let mut js = String::new();
    let mut i = 0;
    while js.len() + literal.len() < 310_000 {
        js.push_str(&format!(
            "function util{i}(list, n) {{\n  var acc = {{ total: 0, name: \"util{i}\" }};\n  \
             for (var k = 0; k < n; k++) {{\n    if (list[k] > {i}) {{ acc.total = acc.total + list[k]; }} else {{ acc.total -= 1; }}\n  }}\n  \
             return acc.total * 2 + util{j}.length;\n}}\n",
            j = i / 2
        ));
        i += 1;
    }
    js.push_str(&format!(
        "const inst = new WebAssembly.Instance(new WebAssembly.Module(new Uint8Array([{literal}])), {{}});\n"
    ));
    for k in 0..8 {
        js.push_str(&format!(
            "console.log(inst.exports.f{}({k}, util{k}([1, 2, 3], 3)));\n",
            k * 20
        ));
    }
    (js, wasm.len())
}

fn throughput() -> Check {
    let (js, wasm_len) = throughput_sample();
    ensure!(js.len() >= 300_000, "JS is only {} bytes", js.len());
    ensure!(wasm_len >= 50_000, "Wasm is only {wasm_len} bytes");
    let started = Instant::now();
    let a = analyze(&js);
    let elapsed = started.elapsed();
    let t = a.entry.timings;
    ensure!(
        a.entry.invocations == 8,
        "{} invocations",
        a.entry.invocations
    );
    ensure!(a.entry.failures.is_empty(), "{:?}", a.entry.failures);
    ensure!(
        t.data_flow_seconds >= 0.0 && t.ssr_seconds >= 0.0,
        "negative timings"
    );
    ensure!(
        t.data_flow_seconds + t.ssr_seconds > 0.0,
        "timings not populated"
    );
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!(
        "{} KB JS with {} KB Wasm in {:.2} s (data-flow {:.2} s, SSR {:.2} s)",
        js.len() / 1000,
        wasm_len / 1000,
        elapsed.as_secs_f64(),
        t.data_flow_seconds,
        t.ssr_seconds
    ))
}

fn idempotence_and_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut corpus = vec![
        common::fig1_js(),
        String::new(),
        "var a = 1, b = [1, [2], 3];\nlabel: for (;;) { if (a) { break label; } else continue label; }\n".into(),
        "try { f(typeof x === \"undefined\" ? -1 : x.y); } catch (e) { g(e); } finally { h(); }\n".into(),
        "fetch(\"m.wasm\").then(r => r.arrayBuffer()).then(b => WebAssembly.instantiate(b, { env: { log: console.log } }));\n"
            .into(),
    ];
    for i in 0..20 {
        corpus.push(benign_sample(&mut rng, i).0);
    }
    for (i, c) in import_fixtures().iter().enumerate() {
        corpus.push(format!(
            "const m{i} = new WebAssembly.Module(new Uint8Array([{}]));\nnew WebAssembly.Instance(m{i}, {{}}).exports.{}(1);\n",
            common::byte_list(&wat::parse_str(&c.wat).unwrap()),
            c.export
        ));
    }
    let outputs: Vec<String> = corpus
        .iter()
        .flat_map(|s| analyze(s).outputs.into_iter().map(|(_, t)| t))
        .collect();
    let total = corpus.len() + outputs.len();
    for (i, src) in corpus.iter().chain(&outputs).enumerate() {
        let p1 = parse_js(src).map_err(|e| format!("unit {i}: {e}"))?;
        let t1 = print_js(&p1);
        let p2 = parse_js(&t1).map_err(|e| format!("unit {i} reprint: {e}"))?;
        ensure!(print_js(&p2) == t1, "unit {i}: printing is not idempotent");
        ensure!(structurally_equal(&p1, &p2), "unit {i}: reparse differs");
    }
    for (i, src) in corpus.iter().enumerate() {
        let program = parse_js(src).unwrap();
        let pdg = build_pdg(&program);
        let empty = InteropMap::default();
        for mode in Mode::ALL {
            let mut abs = abstract_sites(&pdg, &empty, &BTreeMap::new());
            let ipdg = integrate(&program, &empty, &mut abs, mode);
            ensure!(
                structurally_equal(&ipdg.program, &program),
                "unit {i} {mode}: not identity"
            );
            ensure!(
                reconstruct(&ipdg) == print_js(&program),
                "unit {i} {mode}: text differs"
            );
        }
    }
    Ok(format!(
        "{total} units idempotent, {} units identical without interops",
        corpus.len()
    ))
}

fn main() {
    let checks: [Named; 8] = [
        ("running-example detection uplift", running_example_uplift),
        (
            "differential fidelity on generated functions",
            differential_fidelity,
        ),
        ("host-call trace fidelity", host_trace_fidelity),
        ("benign reconstructions stay clean", benign_side_effects),
        ("detection metric arithmetic", metric_math),
        ("decoder conformance", decoder_conformance),
        ("throughput on a large sample", throughput),
        (
            "idempotence and no-interop identity",
            idempotence_and_identity,
        ),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".to_string()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name} ({secs:.2} s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name} ({secs:.2} s): {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
