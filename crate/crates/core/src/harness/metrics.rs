use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Baseline,
    Code,
    Data,
    All,
    Combined,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Code => "code",
            Variant::Data => "data",
            Variant::All => "all",
            Variant::Combined => "combined",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "baseline" => Variant::Baseline,
            "code" => Variant::Code,
            "data" => Variant::Data,
            "all" => Variant::All,
            "combined" => Variant::Combined,
            _ => return Err(format!("unknown variant {s:?}")),
        })
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("detection matrix is empty")]
    Empty,
    #[error("variant {variant}: row {row} has {got} verdicts, expected {expected}")]
    Ragged {
        variant: Variant,
        row: usize,
        got: usize,
        expected: usize,
    },
}

/// Samples by engines verdict table for one variant.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantMatrix {
    pub engines: Vec<String>,
    pub samples: Vec<String>,
    /// `verdicts[sample][engine]`.
    pub verdicts: Vec<Vec<bool>>,
}

impl VariantMatrix {
    fn check(&self, variant: Variant) -> Result<(), MetricsError> {
        if self.verdicts.len() != self.samples.len() {
            return Err(MetricsError::Ragged {
                variant,
                row: self.verdicts.len().min(self.samples.len()),
                got: self.verdicts.len(),
                expected: self.samples.len(),
            });
        }
        for (row, v) in self.verdicts.iter().enumerate() {
            if v.len() != self.engines.len() {
                return Err(MetricsError::Ragged {
                    variant,
                    row,
                    got: v.len(),
                    expected: self.engines.len(),
                });
            }
        }
        Ok(())
    }

    fn lookup(&self) -> BTreeMap<(&str, &str), bool> {
        let mut m = BTreeMap::new();
        for (s, row) in self.samples.iter().zip(&self.verdicts) {
            for (e, v) in self.engines.iter().zip(row) {
                m.insert((s.as_str(), e.as_str()), *v);
            }
        }
        m
    }

    /// Engine-wise OR of two variants over the union of samples and engines.
    pub fn or(&self, other: &VariantMatrix) -> VariantMatrix {
        let samples: BTreeSet<&String> = self.samples.iter().chain(&other.samples).collect();
        let engines: BTreeSet<&String> = self.engines.iter().chain(&other.engines).collect();
        let (a, b) = (self.lookup(), other.lookup());
        let verdicts = samples
            .iter()
            .map(|s| {
                engines
                    .iter()
                    .map(|e| {
                        let k = (s.as_str(), e.as_str());
                        a.get(&k).copied().unwrap_or(false) || b.get(&k).copied().unwrap_or(false)
                    })
                    .collect()
            })
            .collect();
        VariantMatrix {
            engines: engines.into_iter().cloned().collect(),
            samples: samples.into_iter().cloned().collect(),
            verdicts,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionMatrix {
    pub variants: BTreeMap<Variant, VariantMatrix>,
}

impl DetectionMatrix {
    /// Builds a matrix from per-sample verdict maps; an engine missing for a
    /// sample counts as not detecting it.
    pub fn from_verdicts<'a>(
        rows: impl IntoIterator<Item = (&'a str, &'a BTreeMap<Variant, BTreeMap<String, bool>>)>,
    ) -> DetectionMatrix {
        let rows: Vec<_> = rows.into_iter().collect();
        let mut variants = BTreeMap::new();
        let kinds: BTreeSet<Variant> = rows.iter().flat_map(|(_, v)| v.keys().copied()).collect();
        for kind in kinds {
            let engines: BTreeSet<&String> = rows
                .iter()
                .filter_map(|(_, v)| v.get(&kind))
                .flat_map(|m| m.keys())
                .collect();
            let mut m = VariantMatrix {
                engines: engines.iter().map(|e| e.to_string()).collect(),
                ..Default::default()
            };
            for (sample, v) in &rows {
                let Some(verdicts) = v.get(&kind) else {
                    continue;
                };
                m.samples.push(sample.to_string());
                m.verdicts.push(
                    engines
                        .iter()
                        .map(|e| verdicts.get(*e).copied().unwrap_or(false))
                        .collect(),
                );
            }
            variants.insert(kind, m);
        }
        DetectionMatrix { variants }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VariantMetrics {
    pub samples: usize,
    /// Samples flagged by at least `threshold` engines.
    pub detected: usize,
    /// Successful detection rate in [0, 1].
    pub sdr: f64,
    /// Average number of engines flagging a sample.
    pub ade: f64,
}

/// Per-variant detection rate and average engine count. When both code and
/// data are present and no combined variant is given, it is derived as
/// their engine-wise OR.
pub fn compute_metrics(
    matrix: &DetectionMatrix,
    threshold: usize,
) -> Result<BTreeMap<Variant, VariantMetrics>, MetricsError> {
    if matrix.variants.is_empty() || matrix.variants.values().all(|m| m.samples.is_empty()) {
        return Err(MetricsError::Empty);
    }
    let mut variants = matrix.variants.clone();
    if let (Some(c), Some(d), false) = (
        variants.get(&Variant::Code),
        variants.get(&Variant::Data),
        variants.contains_key(&Variant::Combined),
    ) {
        let combined = c.or(d);
        variants.insert(Variant::Combined, combined);
    }
    let mut out = BTreeMap::new();
    for (kind, m) in &variants {
        m.check(*kind)?;
        if m.samples.is_empty() {
            continue;
        }
        let counts: Vec<usize> = m
            .verdicts
            .iter()
            .map(|r| r.iter().filter(|v| **v).count())
            .collect();
        let n = counts.len();
        let detected = counts.iter().filter(|c| **c >= threshold).count();
        out.insert(
            *kind,
            VariantMetrics {
                samples: n,
                detected,
                sdr: detected as f64 / n as f64,
                ade: counts.iter().sum::<usize>() as f64 / n as f64,
            },
        );
    }
    Ok(out)
}
