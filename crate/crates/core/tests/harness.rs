mod common;

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use jwbinder_core::harness::*;

/// Minimal scanning service: `POST /files` then `GET /analyses/job`, which
/// reports "queued" once before completing with 3 of 5 engines positive.
fn scanner_server(key: &'static str) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        let polls = AtomicUsize::new(0);
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            counter.fetch_add(1, Ordering::SeqCst);
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let (mut len, mut auth) = (0usize, String::new());
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                if h.trim().is_empty() {
                    break;
                }
                let (name, value) = h.split_once(':').unwrap();
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => len = value.trim().parse().unwrap(),
                    "x-apikey" => auth = value.trim().to_string(),
                    _ => {}
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let (status, json) = if auth != key {
                ("401 Unauthorized", r#"{"error": "bad key"}"#.to_string())
            } else if request_line.starts_with("POST /files") {
                ("200 OK", r#"{"id": "job"}"#.to_string())
            } else if request_line.starts_with("GET /analyses/job")
                && polls.fetch_add(1, Ordering::SeqCst).is_multiple_of(2)
            {
                ("200 OK", r#"{"status": "queued"}"#.to_string())
            } else if request_line.starts_with("GET /analyses/job") {
                (
                    "200 OK",
                    r#"{"status": "completed", "results": {"e1": true, "e2": {"category": "malicious"},
                        "e3": {"detected": true}, "e4": false, "e5": {"category": "undetected"}}}"#
                        .to_string(),
                )
            } else {
                ("404 Not Found", "{}".to_string())
            };
            let _ = write!(
                stream,
                "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{json}",
                json.len()
            );
        }
    });
    (url, hits)
}

fn scanner_config(url: &str, cache: &std::path::Path) -> ScannerConfig {
    let mut cfg = ScannerConfig::for_endpoint(url, cache);
    cfg.allow_network = true;
    cfg.poll_interval = Duration::from_millis(5);
    cfg.max_polls = 5;
    cfg.request_timeout = Duration::from_secs(5);
    cfg
}

#[test]
fn external_scanner_counts_engines_and_caches() {
    let (url, hits) = scanner_server("secret");
    let cache = tempfile::tempdir().unwrap();
    let scanner = ExternalScanner::new(scanner_config(&url, cache.path()), "secret").unwrap();
    let verdicts = scanner.scan(b"payload").unwrap();
    assert_eq!(verdicts.len(), 5);
    assert_eq!(verdicts.values().filter(|v| **v).count(), 3);
    let before = hits.load(Ordering::SeqCst);
    assert_eq!(scanner.scan(b"payload").unwrap(), verdicts);
    assert_eq!(
        hits.load(Ordering::SeqCst),
        before,
        "cache hit must not touch the network"
    );

    let sample = BTreeMap::from([(Variant::Baseline, verdicts)]);
    let m = compute_metrics(&DetectionMatrix::from_verdicts([("s", &sample)]), 2).unwrap();
    assert_eq!(m[&Variant::Baseline].ade, 3.0);
}

#[test]
fn external_scanner_reports_auth_errors() {
    let (url, _) = scanner_server("secret");
    let cache = tempfile::tempdir().unwrap();
    let scanner = ExternalScanner::new(scanner_config(&url, cache.path()), "wrong").unwrap();
    let err = scanner.scan(b"x").unwrap_err();
    assert_eq!(err, ScanError::Auth(401));
    assert!(err.to_string().starts_with("scan-error(auth)"));
    assert_eq!(
        std::fs::read_dir(cache.path())
            .map(|d| d.count())
            .unwrap_or(0),
        0
    );
}

#[test]
fn network_needs_explicit_permission() {
    let cfg = ScannerConfig::for_endpoint("http://127.0.0.1:9", "/tmp");
    assert!(matches!(
        ExternalScanner::new(cfg, "k"),
        Err(ConfigError::NetworkNotAllowed)
    ));
}

fn write_corpus(dir: &std::path::Path) {
    std::fs::write(dir.join("fig1.js"), common::fig1_js()).unwrap();
    std::fs::write(dir.join("empty.js"), "").unwrap();
    std::fs::write(dir.join("broken.js"), "function (").unwrap();
    std::fs::write(
        dir.join("remote.js"),
        "WebAssembly.instantiateStreaming(fetch('m.wasm'), {}).then(r => r.instance.exports.run());",
    )
    .unwrap();
    for i in 0..6 {
        std::fs::write(
            dir.join(format!("n{i}.js")),
            format!("var v{i} = {i} * 2;\n"),
        )
        .unwrap();
    }
}

fn run(dir: &std::path::Path, out: &std::path::Path, parallelism: usize) -> (String, RunSummary) {
    let (files, root) = collect_inputs(dir).unwrap();
    let mut config = RunConfig::new(out);
    config.parallelism = parallelism;
    config.validate().unwrap();
    let sigs = vec![SignatureSet::parse(
        "stub",
        r#"[{"id": "w", "strings": ["document.write", "<script src="]}]"#,
    )
    .unwrap()];
    let mut buf = Vec::new();
    let summary = run_corpus(&files, root.as_deref(), &config, &sigs, None, &mut buf).unwrap();
    (String::from_utf8(buf).unwrap(), summary)
}

#[test]
fn corpus_run_is_deterministic_apart_from_timings() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    std::fs::create_dir_all(&input).unwrap();
    write_corpus(&input);
    let out = tmp.path().join("out");
    let (a, summary) = run(&input, &out, 1);
    let (b, _) = run(&input, &out, 4);
    assert_eq!(summary.files, 10);
    assert!(summary.partial_failures());
    let strip = |t: &str| {
        let (h, entries) = read_report(t).unwrap();
        (
            h,
            entries
                .iter()
                .map(ReportEntry::without_timings)
                .collect::<Vec<_>>(),
        )
    };
    assert_eq!(strip(&a), strip(&b));

    let (_, entries) = read_report(&a).unwrap();
    let by_name: BTreeMap<_, _> = entries.iter().map(|e| (e.file.as_str(), e)).collect();
    let fig1 = by_name["fig1.js"];
    assert_eq!((fig1.instantiation_sites, fig1.invocations), (1, 1));
    assert_eq!(fig1.outputs.len(), 3);
    assert!(fig1.failures.is_empty() && fig1.is_clean());
    assert!(fig1
        .outputs
        .iter()
        .all(|o| std::path::Path::new(&o.path).exists()));
    assert!(!fig1.verdicts[&Variant::Baseline]["stub"]);
    assert!(fig1.verdicts[&Variant::All]["stub"]);
    assert!(matches!(
        by_name["broken.js"].status,
        Status::Unparseable { .. }
    ));
    let empty = by_name["empty.js"];
    assert_eq!(empty.sites, 0);
    assert_eq!(std::fs::read_to_string(&empty.outputs[0].path).unwrap(), "");
    let remote = by_name["remote.js"];
    assert_eq!(remote.binaries[0].reason.as_deref(), Some("network-only"));
    assert!(!remote.is_clean());
}

#[test]
fn timeout_is_recorded_without_blocking_the_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    std::fs::create_dir_all(&input).unwrap();
    let big: String = (0..40_000)
        .map(|i| format!("var a{i} = b{i} + {i};\n"))
        .collect();
    std::fs::write(input.join("big.js"), big).unwrap();
    std::fs::write(input.join("small.js"), "var x;").unwrap();
    let (files, root) = collect_inputs(&input).unwrap();
    let mut config = RunConfig::new(tmp.path().join("out"));
    config.timeout = Duration::from_millis(1);
    config.parallelism = 2;
    let started = Instant::now();
    let mut buf = Vec::new();
    run_corpus(&files, root.as_deref(), &config, &[], None, &mut buf).unwrap();
    assert!(started.elapsed() < Duration::from_secs(5));
    let (_, entries) = read_report(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert!(
        matches!(entries[0].status, Status::Timeout { .. }),
        "{:?}",
        entries[0].status
    );
}
