use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use super::report::{BinaryRecord, FailureRecord, OutputRecord, ReportEntry, Status, Timings};
use super::RunConfig;
use crate::interop::{find_interops, recover_binary, KeyApiTable, OriginKind, DEFAULT_DEPTH_CAP};
use crate::js::{parse_js, SyntaxError};
use crate::pdg::build_pdg;
use crate::reconstruct::{abstract_sites, integrate, reconstruct, Mode};
use crate::wasm::decode_module;

#[derive(Clone, Debug)]
pub struct AnalyzeOptions {
    pub modes: Vec<Mode>,
    pub assets_dir: Option<PathBuf>,
    pub depth_cap: usize,
    pub dump_pdg: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            modes: Mode::ALL.to_vec(),
            assets_dir: None,
            depth_cap: DEFAULT_DEPTH_CAP,
            dump_pdg: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("unparseable: {0}")]
    Unparseable(#[from] SyntaxError),
    #[error("analysis exceeded {0:?}")]
    Timeout(Duration),
    #[error("analysis panicked: {0}")]
    Panicked(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// In-memory result for one JavaScript unit. `entry` carries everything
/// except the file name and output paths.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub entry: ReportEntry,
    pub outputs: Vec<(Mode, String)>,
    pub pdg_dot: Option<String>,
}

impl Analysis {
    pub fn output(&self, mode: Mode) -> Option<&str> {
        self.outputs
            .iter()
            .find(|(m, _)| *m == mode)
            .map(|(_, s)| s.as_str())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Runs both phases on `source`: data-flow (parse, PDG, interop discovery,
/// binary recovery) then reconstruction (decode, abstract, splice, print)
/// for each requested mode. Units without any splice are returned verbatim.
pub fn analyze_source(source: &str, opts: &AnalyzeOptions) -> Result<Analysis, SyntaxError> {
    let start = Instant::now();
    let program = parse_js(source)?;
    let pdg = build_pdg(&program);
    let mut interops = find_interops(&pdg, &KeyApiTable::default());
    let sites: Vec<_> = interops.instantiation_sites().cloned().collect();
    for site in &sites {
        let origin = recover_binary(
            &pdg,
            &interops,
            site,
            opts.assets_dir.as_deref(),
            opts.depth_cap,
        );
        interops.binaries.insert(site.index, origin);
    }
    let data_flow = start.elapsed();

    let ssr_start = Instant::now();
    let mut entry = ReportEntry {
        sites: interops.sites.len(),
        instantiation_sites: sites.len(),
        invocations: interops.export_invocations.len(),
        ..Default::default()
    };
    let mut modules = BTreeMap::new();
    for (index, origin) in &interops.binaries {
        let mut rec = BinaryRecord {
            site: *index,
            origin: origin.kind.as_str().to_string(),
            resolved: origin.is_resolved(),
            reason: match origin.kind {
                OriginKind::Unresolved(r) => Some(r.as_str().to_string()),
                _ => None,
            },
            size: origin.bytes.as_ref().map(Vec::len),
            sha256: origin.bytes.as_deref().map(sha256_hex),
            decode_error: None,
        };
        if let Some(bytes) = &origin.bytes {
            match decode_module(bytes) {
                Ok(m) => {
                    modules.insert(*index, m);
                }
                Err(e) => {
                    rec.decode_error = Some(e.to_string());
                    entry.failures.push(FailureRecord {
                        stage: "decode".to_string(),
                        site: Some(*index),
                        node: None,
                        message: e.to_string(),
                    });
                }
            }
        }
        entry.binaries.push(rec);
    }
    let abs = abstract_sites(&pdg, &interops, &modules);
    for u in &abs.unresolved {
        if modules.contains_key(&u.site) {
            entry.failures.push(FailureRecord {
                stage: "abstract".to_string(),
                site: Some(u.site),
                node: Some(u.node),
                message: u.reason.clone(),
            });
        }
    }
    entry.diagnostics = abs
        .diagnostics
        .iter()
        .map(|d| match d.func {
            Some(f) => format!("function {f}: {}", d.message),
            None => d.message.clone(),
        })
        .collect();
    let outputs = opts
        .modes
        .iter()
        .map(|&mode| {
            let mut a = abs.clone();
            let ipdg = integrate(&program, &interops, &mut a, mode);
            let text = if ipdg.splices.is_empty() {
                source.to_string()
            } else {
                reconstruct(&ipdg)
            };
            (mode, text)
        })
        .collect();
    let pdg_dot = opts.dump_pdg.then(|| pdg.to_dot());
    entry.timings = Timings {
        data_flow_seconds: data_flow.as_secs_f64(),
        ssr_seconds: ssr_start.elapsed().as_secs_f64(),
        total_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(Analysis {
        entry,
        outputs,
        pdg_dot,
    })
}

/// Runs `analyze_source` on a worker thread, giving up after `timeout`.
/// A timed-out worker is left to finish on its own; its result is dropped.
pub(crate) fn analyze_with_timeout(
    source: String,
    opts: AnalyzeOptions,
    timeout: Duration,
) -> Result<Analysis, PipelineError> {
    let (tx, rx) = mpsc::channel();
    std::thread::Builder::new()
        .name("jwbinder-analysis".to_string())
        .spawn(move || {
            let _ = tx.send(analyze_source(&source, &opts));
        })?;
    match rx.recv_timeout(timeout) {
        Ok(r) => r.map_err(PipelineError::from),
        Err(mpsc::RecvTimeoutError::Timeout) => Err(PipelineError::Timeout(timeout)),
        Err(mpsc::RecvTimeoutError::Disconnected) => {
            Err(PipelineError::Panicked("worker exited".to_string()))
        }
    }
}

/// Path of `file` relative to `root`, with forward slashes.
pub(crate) fn relative_name(file: &Path, root: Option<&Path>) -> String {
    let rel = root
        .and_then(|r| file.strip_prefix(r).ok())
        .filter(|r| !r.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new(file.file_name().unwrap_or(file.as_os_str())));
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Output path for `rel` with its extension replaced by `suffix`.
pub(crate) fn output_path(out_dir: &Path, rel: &str, suffix: &str) -> PathBuf {
    let stem = rel
        .strip_suffix(".js")
        .or_else(|| rel.strip_suffix(".mjs"))
        .unwrap_or(rel);
    out_dir.join(format!("{stem}{suffix}"))
}

/// Analyzes one file and writes its reconstructions under `config.out_dir`.
/// Failures are recorded in the entry rather than returned.
pub fn run_pipeline(file: &Path, root: Option<&Path>, config: &RunConfig) -> ReportEntry {
    let rel = relative_name(file, root);
    let mut entry = ReportEntry::new(rel.clone());
    let source = match std::fs::read(file).map(String::from_utf8) {
        Ok(Ok(s)) => s,
        Ok(Err(e)) => {
            entry.status = Status::Unparseable {
                message: format!("not UTF-8: {e}"),
            };
            return entry;
        }
        Err(e) => {
            entry.status = Status::Error {
                message: e.to_string(),
            };
            return entry;
        }
    };
    let started = Instant::now();
    let analysis = match analyze_with_timeout(source, config.analyze_options(), config.timeout) {
        Ok(a) => a,
        Err(e) => {
            entry.status = match e {
                PipelineError::Unparseable(e) => Status::Unparseable {
                    message: e.to_string(),
                },
                PipelineError::Timeout(t) => Status::Timeout {
                    seconds: t.as_secs(),
                },
                other => Status::Error {
                    message: other.to_string(),
                },
            };
            entry.timings.total_seconds = started.elapsed().as_secs_f64();
            return entry;
        }
    };
    let Analysis {
        entry: analyzed,
        outputs,
        pdg_dot,
    } = analysis;
    entry = ReportEntry {
        file: rel.clone(),
        ..analyzed
    };
    let write = |suffix: &str, text: &str| -> std::io::Result<PathBuf> {
        let path = output_path(&config.out_dir, &rel, suffix);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&path, text)?;
        Ok(path)
    };
    for (mode, text) in &outputs {
        match write(&mode.suffix(), text) {
            Ok(path) => entry.outputs.push(OutputRecord {
                mode: *mode,
                path: path.to_string_lossy().into_owned(),
            }),
            Err(e) => entry.failures.push(FailureRecord {
                stage: "write".to_string(),
                site: None,
                node: None,
                message: e.to_string(),
            }),
        }
    }
    if let Some(dot) = pdg_dot {
        if let Err(e) = write(".pdg.dot", &dot) {
            entry.failures.push(FailureRecord {
                stage: "write".to_string(),
                site: None,
                node: None,
                message: e.to_string(),
            });
        }
    }
    entry
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_program_is_returned_verbatim() {
        let a = analyze_source("", &AnalyzeOptions::default()).unwrap();
        assert_eq!(a.entry.sites, 0);
        assert_eq!(a.outputs.len(), 3);
        assert!(a.outputs.iter().all(|(_, t)| t.is_empty()));
    }

    #[test]
    fn syntax_errors_surface() {
        assert!(analyze_source("var = ;", &AnalyzeOptions::default()).is_err());
    }

    #[test]
    fn fetch_without_asset_is_unresolved() {
        let src = "WebAssembly.instantiateStreaming(fetch('m.wasm'), {}).then(r => r.instance.exports.f());";
        let a = analyze_source(src, &AnalyzeOptions::default()).unwrap();
        assert_eq!(a.entry.binaries.len(), 1);
        let b = &a.entry.binaries[0];
        assert!(!b.resolved);
        assert_eq!(b.reason.as_deref(), Some("network-only"));
        assert_eq!(a.output(Mode::Code), Some(src));
    }

    #[test]
    fn relative_names_and_outputs() {
        let root = Path::new("/corpus");
        assert_eq!(
            relative_name(Path::new("/corpus/a/b.js"), Some(root)),
            "a/b.js"
        );
        assert_eq!(relative_name(Path::new("/x/c.js"), None), "c.js");
        assert_eq!(
            output_path(Path::new("/out"), "a/b.js", ".all.js"),
            Path::new("/out/a/b.all.js")
        );
    }
}
