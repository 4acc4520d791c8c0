use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use jwbinder_core::harness::{
    collect_inputs, compute_metrics, read_report, run_corpus, scan_outputs, DetectionMatrix,
    ExternalScanner, ReportHeader, RunConfig, ScannerConfig, SignatureSet,
};
use jwbinder_core::oracle::{differential_check, import_paths, interp_wasm, Host, StubHost, Value};
use jwbinder_core::reconstruct::Mode;
use jwbinder_core::wasm::decode_module;

#[derive(Parser)]
#[command(
    name = "jwbinder",
    version,
    about = "Reconstruct JavaScript/WebAssembly programs into plain JavaScript"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruct a file or every .js file under a directory.
    Analyze(AnalyzeArgs),
    /// Run signature sets (and optionally an external scanner) over a directory of outputs.
    Scan(ScanArgs),
    /// Detection rate and average engine count per variant from a report.
    Metrics {
        report: PathBuf,
        #[arg(long, default_value_t = 2)]
        threshold: usize,
        #[arg(long)]
        json: bool,
    },
    /// Run one function through the interpreter and its abstraction.
    Oracle {
        fixture: PathBuf,
        #[arg(long)]
        func: u32,
        /// Arguments such as `i32:5`, `i64:-1`, `f64:0.5`; a bare integer is i32.
        #[arg(long, num_args = 0.., allow_hyphen_values = true)]
        args: Vec<String>,
    },
}

#[derive(Args)]
struct ExternalArgs {
    /// Base URL of an external scanning service.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    allow_network: bool,
    #[arg(long, default_value = "JWBINDER_SCANNER_KEY")]
    api_key_env: String,
    #[arg(long, default_value = ".jwbinder-cache")]
    cache_dir: PathBuf,
    #[arg(long, default_value_t = 15)]
    poll_interval: u64,
}

impl ExternalArgs {
    fn scanner(&self) -> Result<Option<ExternalScanner>, jwbinder_core::harness::ConfigError> {
        let Some(endpoint) = &self.endpoint else {
            return Ok(None);
        };
        let mut cfg = ScannerConfig::for_endpoint(endpoint, &self.cache_dir);
        cfg.allow_network = self.allow_network;
        cfg.api_key_env = self.api_key_env.clone();
        cfg.poll_interval = Duration::from_secs(self.poll_interval);
        cfg.validate()?;
        ExternalScanner::from_env(cfg).map(Some)
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    path: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "code,data,all")]
    mode: Vec<Mode>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    assets_dir: PathBuf,
    /// Per-file wall-clock limit in seconds.
    #[arg(long, default_value_t = 300)]
    timeout: u64,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    #[arg(long)]
    dump_pdg: bool,
    /// Signature file; each one counts as a separate engine.
    #[arg(long)]
    signatures: Vec<PathBuf>,
    /// Report destination, `-` for stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    external: ExternalArgs,
}

#[derive(Args)]
struct ScanArgs {
    dir: PathBuf,
    #[arg(long, required = true)]
    signatures: Vec<PathBuf>,
    /// Report destination, stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    external: ExternalArgs,
}

/// Configuration problems exit with 2.
struct ConfigFailure(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for ConfigFailure {
    fn from(e: E) -> Self {
        ConfigFailure(e.into())
    }
}

enum Outcome {
    Clean,
    Partial,
}

fn sink(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) if p != Path::new("-") => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        _ => Box::new(std::io::stdout().lock()),
    })
}

fn analyze(a: AnalyzeArgs) -> Result<anyhow::Result<Outcome>, ConfigFailure> {
    let config = RunConfig {
        modes: a.mode,
        out_dir: a.out_dir,
        assets_dir: Some(a.assets_dir),
        timeout: Duration::from_secs(a.timeout),
        parallelism: a.parallelism,
        signatures: a.signatures,
        scanner: None,
        dump_pdg: a.dump_pdg,
        depth_cap: jwbinder_core::interop::DEFAULT_DEPTH_CAP,
    };
    config.validate()?;
    let signatures = config.load_signatures()?;
    let scanner = a.external.scanner()?;
    let (files, root) =
        collect_inputs(&a.path).with_context(|| format!("reading {}", a.path.display()))?;
    let report = a
        .report
        .unwrap_or_else(|| config.out_dir.join("report.jsonl"));
    Ok((|| {
        let mut out = sink(Some(&report))?;
        let summary = run_corpus(
            &files,
            root.as_deref(),
            &config,
            &signatures,
            scanner.as_ref(),
            &mut out,
        )?;
        out.flush()?;
        eprintln!(
            "{} file(s), {} clean, report at {}",
            summary.files,
            summary.clean,
            report.display()
        );
        Ok(if summary.partial_failures() {
            Outcome::Partial
        } else {
            Outcome::Clean
        })
    })())
}

fn scan(a: ScanArgs) -> Result<anyhow::Result<Outcome>, ConfigFailure> {
    let signatures = a
        .signatures
        .iter()
        .map(|p| SignatureSet::load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let scanner = a.external.scanner()?;
    Ok((|| {
        let entries = scan_outputs(&a.dir, &signatures, scanner.as_ref())?;
        let mut out = sink(a.report.as_deref())?;
        writeln!(out, "{}", serde_json::to_string(&ReportHeader::new(&[]))?)?;
        let mut partial = false;
        for e in &entries {
            writeln!(out, "{}", e.to_line())?;
            partial |= !e.scan_errors.is_empty();
        }
        out.flush()?;
        Ok(if partial {
            Outcome::Partial
        } else {
            Outcome::Clean
        })
    })())
}

fn metrics(
    report: &Path,
    threshold: usize,
    json: bool,
) -> Result<anyhow::Result<Outcome>, ConfigFailure> {
    let text =
        std::fs::read_to_string(report).with_context(|| format!("reading {}", report.display()))?;
    let (_, entries) = read_report(&text)?;
    let matrix =
        DetectionMatrix::from_verdicts(entries.iter().map(|e| (e.file.as_str(), &e.verdicts)));
    let m = compute_metrics(&matrix, threshold)?;
    if json {
        let rows: BTreeMap<String, _> = m.iter().map(|(k, v)| (k.to_string(), v)).collect();
        println!(
            "{}",
            serde_json::to_string_pretty(&rows).map_err(anyhow::Error::from)?
        );
    } else {
        println!(
            "{:<10} {:>8} {:>8} {:>7}",
            "variant", "samples", "SDR", "ADE"
        );
        for (variant, v) in &m {
            println!(
                "{:<10} {:>8} {:>7.1}% {:>7.2}",
                variant.as_str(),
                v.samples,
                v.sdr * 100.0,
                v.ade
            );
        }
    }
    Ok(Ok(Outcome::Clean))
}

fn oracle(
    fixture: &Path,
    func: u32,
    args: &[String],
) -> Result<anyhow::Result<Outcome>, ConfigFailure> {
    let bytes = std::fs::read(fixture).with_context(|| format!("reading {}", fixture.display()))?;
    let module = decode_module(&bytes)?;
    let args = args
        .iter()
        .map(|a| Value::parse(a).with_context(|| format!("bad argument {a:?}")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let Some(ty) = module.func_type(func) else {
        return Err(ConfigFailure(anyhow::anyhow!("no function {func}")));
    };
    if ty.params.len() != args.len() || ty.params.iter().zip(&args).any(|(p, a)| *p != a.ty()) {
        return Err(ConfigFailure(anyhow::anyhow!(
            "function {func} expects {:?}",
            ty.params
        )));
    }
    let bindings = BTreeMap::new();
    let paths = import_paths(&module, &bindings);
    let host = || StubHost {
        read_strings: true,
        ..Default::default()
    };
    let exec = interp_wasm(&module, func, &args, &paths, &mut host());
    match &exec.outcome {
        Ok(Some(v)) => println!("result: {v}"),
        Ok(None) => println!("result: (none)"),
        Err(t) => println!("trap: {t}"),
    }
    for call in &exec.trace {
        let args: Vec<String> = call.args.iter().map(Value::to_string).collect();
        match &call.note {
            Some(n) => println!("call {}({}) {n:?}", call.callee, args.join(", ")),
            None => println!("call {}({})", call.callee, args.join(", ")),
        }
    }
    let report = differential_check(&module, func, &[args], &bindings, &mut || {
        Box::new(host()) as Box<dyn Host>
    });
    Ok(if let Some(e) = &report.abstraction_error {
        println!("abstraction: failed ({e})");
        Ok(Outcome::Partial)
    } else if report.passed() {
        println!("abstraction: agrees");
        Ok(Outcome::Clean)
    } else {
        let m = &report.mismatches[0];
        println!("abstraction: differs, fragment gave {:?}", m.fragment);
        Ok(Outcome::Partial)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Scan(a) => scan(a),
        Command::Metrics {
            report,
            threshold,
            json,
        } => metrics(&report, threshold, json),
        Command::Oracle {
            fixture,
            func,
            args,
        } => oracle(&fixture, func, &args),
    };
    match result {
        Err(ConfigFailure(e)) => {
            eprintln!("jwbinder: {e:#}");
            ExitCode::from(2)
        }
        Ok(Err(e)) => {
            eprintln!("jwbinder: {e:#}");
            ExitCode::from(1)
        }
        Ok(Ok(Outcome::Clean)) => ExitCode::SUCCESS,
        Ok(Ok(Outcome::Partial)) => ExitCode::from(1),
    }
}
