//! Corpus orchestration: the per-file pipeline, JSON Lines reports, the
//! literal-string signature scanner, an external scanner client and the
//! detection metrics.

mod metrics;
mod pipeline;
mod report;
mod runner;
mod scanner;
mod signatures;

use std::path::PathBuf;
use std::time::Duration;

pub use metrics::{
    compute_metrics, DetectionMatrix, MetricsError, Variant, VariantMatrix, VariantMetrics,
};
pub use pipeline::{analyze_source, run_pipeline, Analysis, AnalyzeOptions, PipelineError};
pub use report::{
    read_report, BinaryRecord, FailureRecord, OutputRecord, ReportEntry, ReportError, ReportHeader,
    Status, Timings, REPORT_SCHEMA, REPORT_VERSION,
};
pub use runner::{collect_inputs, run_corpus, scan_outputs, RunSummary};
pub use scanner::{ExternalScanner, ScanError, ScannerConfig};
pub use signatures::{Rule, ScanVerdict, SignatureSet};

use crate::interop::DEFAULT_DEPTH_CAP;
use crate::reconstruct::Mode;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("timeout must be positive")]
    ZeroTimeout,
    #[error("parallelism must be positive")]
    ZeroParallelism,
    #[error("no reconstruction mode requested")]
    NoModes,
    #[error("output directory {0} is not writable: {1}")]
    OutDir(PathBuf, std::io::Error),
    #[error("signature file {path}: {message}")]
    Signatures { path: PathBuf, message: String },
    #[error("external scanning needs --allow-network")]
    NetworkNotAllowed,
    #[error("environment variable {0} holding the scanner API key is not set")]
    MissingApiKey(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub modes: Vec<Mode>,
    pub out_dir: PathBuf,
    pub assets_dir: Option<PathBuf>,
    pub timeout: Duration,
    pub parallelism: usize,
    /// One engine per signature file.
    pub signatures: Vec<PathBuf>,
    pub scanner: Option<ScannerConfig>,
    pub dump_pdg: bool,
    pub depth_cap: usize,
}

impl RunConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            modes: Mode::ALL.to_vec(),
            out_dir: out_dir.into(),
            assets_dir: None,
            timeout: Duration::from_secs(300),
            parallelism: 1,
            signatures: Vec::new(),
            scanner: None,
            dump_pdg: false,
            depth_cap: DEFAULT_DEPTH_CAP,
        }
    }

    /// Checks the invariants and creates the output directory.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.timeout.is_zero() {
            return Err(ConfigError::ZeroTimeout);
        }
        if self.parallelism == 0 {
            return Err(ConfigError::ZeroParallelism);
        }
        if self.modes.is_empty() {
            return Err(ConfigError::NoModes);
        }
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| ConfigError::OutDir(self.out_dir.clone(), e))?;
        let probe = self.out_dir.join(".jwbinder-write-probe");
        std::fs::write(&probe, b"").map_err(|e| ConfigError::OutDir(self.out_dir.clone(), e))?;
        let _ = std::fs::remove_file(probe);
        if let Some(s) = &self.scanner {
            s.validate()?;
        }
        Ok(())
    }

    /// Loads every configured signature file, failing on the first malformed one.
    pub fn load_signatures(&self) -> Result<Vec<SignatureSet>, ConfigError> {
        self.signatures
            .iter()
            .map(|p| SignatureSet::load(p))
            .collect()
    }

    pub(crate) fn analyze_options(&self) -> AnalyzeOptions {
        AnalyzeOptions {
            modes: self.modes.clone(),
            assets_dir: self.assets_dir.clone(),
            depth_cap: self.depth_cap,
            dump_pdg: self.dump_pdg,
        }
    }
}
