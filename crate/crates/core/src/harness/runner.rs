use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use super::pipeline::{relative_name, run_pipeline};
use super::report::{ReportEntry, ReportHeader};
use super::{ExternalScanner, RunConfig, SignatureSet, Variant};
use crate::reconstruct::Mode;

/// Reconstruction outputs are skipped when collecting inputs.
const OUTPUT_SUFFIXES: [&str; 3] = [".code.js", ".data.js", ".all.js"];

fn variant_of(mode: Mode) -> Variant {
    match mode {
        Mode::Code => Variant::Code,
        Mode::Data => Variant::Data,
        Mode::All => Variant::All,
    }
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>, keep: &dyn Fn(&Path) -> bool) -> std::io::Result<()> {
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(std::io::Error::other)?;
        if entry.file_type().is_file() && keep(entry.path()) {
            out.push(entry.into_path());
        }
    }
    Ok(())
}

/// JavaScript files under `path` (or `path` itself), sorted, together with
/// the root their report names are relative to.
pub fn collect_inputs(path: &Path) -> std::io::Result<(Vec<PathBuf>, Option<PathBuf>)> {
    if !path.is_dir() {
        std::fs::metadata(path)?;
        return Ok((vec![path.to_path_buf()], None));
    }
    let mut files = Vec::new();
    walk(path, &mut files, &|p| {
        let name = p.to_string_lossy();
        (name.ends_with(".js") || name.ends_with(".mjs"))
            && !OUTPUT_SUFFIXES.iter().any(|s| name.ends_with(s))
    })?;
    files.sort();
    Ok((files, Some(path.to_path_buf())))
}

fn record_scan(
    entry: &mut ReportEntry,
    variant: Variant,
    text: &[u8],
    signatures: &[SignatureSet],
    scanner: Option<&ExternalScanner>,
) {
    let s = String::from_utf8_lossy(text);
    let verdicts = entry.verdicts.entry(variant).or_default();
    for set in signatures {
        let v = set.scan(&s);
        verdicts.insert(set.engine.clone(), v.matched);
        if v.matched {
            entry
                .matched_rules
                .entry(variant)
                .or_default()
                .extend(v.rules.iter().map(|r| format!("{}/{r}", set.engine)));
        }
    }
    if let Some(scanner) = scanner {
        match scanner.scan(text) {
            Ok(engines) => entry.verdicts.entry(variant).or_default().extend(engines),
            Err(e) => entry.scan_errors.push(format!("{variant}: {e}")),
        }
    }
}

/// Adds verdicts for the original file and every written reconstruction.
fn scan_entry(
    entry: &mut ReportEntry,
    file: &Path,
    signatures: &[SignatureSet],
    scanner: Option<&ExternalScanner>,
) {
    if signatures.is_empty() && scanner.is_none() {
        return;
    }
    if let Ok(original) = std::fs::read(file) {
        record_scan(entry, Variant::Baseline, &original, signatures, scanner);
    }
    let outputs = entry.outputs.clone();
    for out in outputs {
        match std::fs::read(&out.path) {
            Ok(text) => record_scan(entry, variant_of(out.mode), &text, signatures, scanner),
            Err(e) => entry.scan_errors.push(format!("{}: {e}", out.mode)),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub files: usize,
    pub clean: usize,
}

impl RunSummary {
    pub fn partial_failures(&self) -> bool {
        self.clean < self.files
    }
}

/// Runs the pipeline over `files` with up to `config.parallelism` workers
/// and streams the report to `sink`. Entries are written by this thread
/// only, in input order, as soon as every earlier file has finished.
pub fn run_corpus(
    files: &[PathBuf],
    root: Option<&Path>,
    config: &RunConfig,
    signatures: &[SignatureSet],
    scanner: Option<&ExternalScanner>,
    sink: &mut dyn Write,
) -> std::io::Result<RunSummary> {
    writeln!(
        sink,
        "{}",
        serde_json::to_string(&ReportHeader::new(&config.modes))?
    )?;
    let next = AtomicUsize::new(0);
    let mut summary = RunSummary::default();
    std::thread::scope(|scope| -> std::io::Result<()> {
        let (tx, rx) = mpsc::channel::<(usize, ReportEntry)>();
        for _ in 0..config.parallelism.min(files.len()).max(1) {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(file) = files.get(i) else { break };
                let mut entry = run_pipeline(file, root, config);
                scan_entry(&mut entry, file, signatures, scanner);
                if tx.send((i, entry)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        let mut emitted = 0;
        for (i, entry) in rx {
            pending.insert(i, entry);
            while let Some(entry) = pending.remove(&emitted) {
                writeln!(sink, "{}", entry.to_line())?;
                sink.flush()?;
                summary.files += 1;
                summary.clean += usize::from(entry.is_clean());
                emitted += 1;
            }
        }
        Ok(())
    })?;
    Ok(summary)
}

/// Scans a directory of originals and reconstructions. Files are grouped by
/// sample: `x.code.js`, `x.data.js` and `x.all.js` are variants of `x.js`.
pub fn scan_outputs(
    dir: &Path,
    signatures: &[SignatureSet],
    scanner: Option<&ExternalScanner>,
) -> std::io::Result<Vec<ReportEntry>> {
    let mut files = Vec::new();
    walk(dir, &mut files, &|p| p.to_string_lossy().ends_with(".js"))?;
    files.sort();
    let mut samples: BTreeMap<String, ReportEntry> = BTreeMap::new();
    for file in files {
        let rel = relative_name(&file, Some(dir));
        let (sample, variant) = Mode::ALL
            .iter()
            .find_map(|m| {
                rel.strip_suffix(&m.suffix())
                    .map(|s| (s.to_string(), variant_of(*m)))
            })
            .unwrap_or_else(|| (rel.trim_end_matches(".js").to_string(), Variant::Baseline));
        let entry = samples
            .entry(sample.clone())
            .or_insert_with(|| ReportEntry::new(format!("{sample}.js")));
        match std::fs::read(&file) {
            Ok(text) => record_scan(entry, variant, &text, signatures, scanner),
            Err(e) => entry.scan_errors.push(format!("{variant}: {e}")),
        }
    }
    Ok(samples.into_values().collect())
}
