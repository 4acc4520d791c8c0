use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Variant;
use crate::reconstruct::Mode;

pub const REPORT_SCHEMA: &str = "jwbinder-report";
pub const REPORT_VERSION: u32 = 1;

/// First line of every report file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub schema: String,
    pub version: u32,
    #[serde(default)]
    pub modes: Vec<String>,
}

impl ReportHeader {
    pub fn new(modes: &[Mode]) -> Self {
        ReportHeader {
            schema: REPORT_SCHEMA.to_string(),
            version: REPORT_VERSION,
            modes: modes.iter().map(|m| m.as_str().to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Status {
    #[default]
    Ok,
    Unparseable {
        message: String,
    },
    Timeout {
        seconds: u64,
    },
    Error {
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryRecord {
    pub site: usize,
    pub origin: String,
    pub resolved: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decode_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub stage: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<u32>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub mode: Mode,
    pub path: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub data_flow_seconds: f64,
    pub ssr_seconds: f64,
    pub total_seconds: f64,
}

/// One input file's outcome.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportEntry {
    pub file: String,
    pub status: Status,
    pub sites: usize,
    pub instantiation_sites: usize,
    pub invocations: usize,
    pub binaries: Vec<BinaryRecord>,
    pub failures: Vec<FailureRecord>,
    pub diagnostics: Vec<String>,
    pub outputs: Vec<OutputRecord>,
    pub timings: Timings,
    pub verdicts: BTreeMap<Variant, BTreeMap<String, bool>>,
    pub matched_rules: BTreeMap<Variant, Vec<String>>,
    pub scan_errors: Vec<String>,
}

impl Eq for ReportEntry {}

impl ReportEntry {
    pub fn new(file: impl Into<String>) -> Self {
        ReportEntry {
            file: file.into(),
            ..Default::default()
        }
    }

    /// True when the file was analyzed completely.
    pub fn is_clean(&self) -> bool {
        self.status == Status::Ok
            && self.failures.is_empty()
            && self.scan_errors.is_empty()
            && self
                .binaries
                .iter()
                .all(|b| b.resolved && b.decode_error.is_none())
    }

    /// Copy with timings zeroed, for determinism comparisons.
    pub fn without_timings(&self) -> ReportEntry {
        ReportEntry {
            timings: Timings::default(),
            ..self.clone()
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("report entries serialize")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("report is empty")]
    Empty,
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("unsupported report schema {schema:?} version {version}")]
    Schema { schema: String, version: u32 },
}

/// Parses a JSON Lines report: header first, then one entry per line.
pub fn read_report(text: &str) -> Result<(ReportHeader, Vec<ReportEntry>), ReportError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(ReportError::Empty)?;
    let header: ReportHeader =
        serde_json::from_str(first).map_err(|source| ReportError::Json { line: 1, source })?;
    if header.schema != REPORT_SCHEMA || header.version > REPORT_VERSION {
        return Err(ReportError::Schema {
            schema: header.schema,
            version: header.version,
        });
    }
    let entries = lines
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| ReportError::Json {
                line: i + 1,
                source,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok((header, entries))
}
