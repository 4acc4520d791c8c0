use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::ConfigError;

/// Endpoint-generic REST scanner settings. `poll_url` contains `{id}`,
/// replaced by the identifier returned from the submission.
#[derive(Clone, Debug)]
pub struct ScannerConfig {
    pub submit_url: String,
    pub poll_url: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub api_key_header: String,
    pub allow_network: bool,
    pub cache_dir: PathBuf,
    pub poll_interval: Duration,
    pub max_polls: u32,
    pub request_timeout: Duration,
}

impl ScannerConfig {
    /// Default layout under a base URL: `POST {base}/files`, `GET {base}/analyses/{id}`.
    pub fn for_endpoint(base: &str, cache_dir: impl Into<PathBuf>) -> Self {
        let base = base.trim_end_matches('/');
        ScannerConfig {
            submit_url: format!("{base}/files"),
            poll_url: format!("{base}/analyses/{{id}}"),
            api_key_env: "JWBINDER_SCANNER_KEY".to_string(),
            api_key_header: "x-apikey".to_string(),
            allow_network: false,
            cache_dir: cache_dir.into(),
            poll_interval: Duration::from_secs(15),
            max_polls: 40,
            request_timeout: Duration::from_secs(60),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.allow_network {
            return Err(ConfigError::NetworkNotAllowed);
        }
        if !self.poll_url.contains("{id}") {
            return Err(ConfigError::Invalid(format!(
                "poll URL {:?} lacks {{id}}",
                self.poll_url
            )));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ScanError {
    #[error("scan-error(auth): HTTP {0}")]
    Auth(u16),
    #[error("scan-error(http): HTTP {0}")]
    Http(u16),
    #[error("scan-error(network): {0}")]
    Network(String),
    #[error("scan-error(protocol): {0}")]
    Protocol(String),
    #[error("scan-error(timeout): not finished after {0} polls")]
    Timeout(u32),
    #[error("scan-error(analysis): {0}")]
    Failed(String),
}

#[derive(Deserialize)]
struct Submitted {
    id: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EngineResult {
    Flag(bool),
    Detail {
        #[serde(default)]
        detected: Option<bool>,
        #[serde(default)]
        category: Option<String>,
    },
}

impl EngineResult {
    fn detected(&self) -> bool {
        match self {
            EngineResult::Flag(b) => *b,
            EngineResult::Detail { detected, category } => {
                detected.unwrap_or(false)
                    || matches!(category.as_deref(), Some("malicious" | "suspicious"))
            }
        }
    }
}

#[derive(Deserialize)]
struct Polled {
    status: String,
    #[serde(default)]
    results: BTreeMap<String, EngineResult>,
    #[serde(default)]
    error: Option<String>,
}

/// Submits files, polls until a terminal state and caches verdicts on disk
/// by content hash.
pub struct ExternalScanner {
    config: ScannerConfig,
    api_key: String,
    agent: ureq::Agent,
    requests: AtomicUsize,
}

impl ExternalScanner {
    pub fn new(config: ScannerConfig, api_key: impl Into<String>) -> Result<Self, ConfigError> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.request_timeout))
            .build()
            .into();
        Ok(ExternalScanner {
            config,
            api_key: api_key.into(),
            agent,
            requests: AtomicUsize::new(0),
        })
    }

    /// Reads the API key from the configured environment variable.
    pub fn from_env(config: ScannerConfig) -> Result<Self, ConfigError> {
        let key = std::env::var(&config.api_key_env)
            .map_err(|_| ConfigError::MissingApiKey(config.api_key_env.clone()))?;
        ExternalScanner::new(config, key)
    }

    /// HTTP requests issued so far.
    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    fn cache_path(&self, bytes: &[u8]) -> PathBuf {
        self.config
            .cache_dir
            .join(format!("{}.json", hex::encode(Sha256::digest(bytes))))
    }

    /// Engine to verdict map for `bytes`.
    pub fn scan(&self, bytes: &[u8]) -> Result<BTreeMap<String, bool>, ScanError> {
        let cache = self.cache_path(bytes);
        if let Some(hit) = std::fs::read(&cache)
            .ok()
            .and_then(|b| serde_json::from_slice::<BTreeMap<String, bool>>(&b).ok())
        {
            return Ok(hit);
        }
        let verdicts = self.scan_remote(bytes)?;
        if std::fs::create_dir_all(&self.config.cache_dir).is_ok() {
            let _ = std::fs::write(
                &cache,
                serde_json::to_vec(&verdicts).expect("map serializes"),
            );
        }
        Ok(verdicts)
    }

    fn read(&self, mut resp: ureq::http::Response<ureq::Body>) -> Result<String, ScanError> {
        let status = resp.status().as_u16();
        match status {
            401 | 403 => return Err(ScanError::Auth(status)),
            200..=299 => {}
            _ => return Err(ScanError::Http(status)),
        }
        resp.body_mut()
            .read_to_string()
            .map_err(|e| ScanError::Network(e.to_string()))
    }

    fn scan_remote(&self, bytes: &[u8]) -> Result<BTreeMap<String, bool>, ScanError> {
        let net = |e: ureq::Error| ScanError::Network(e.to_string());
        let proto = |e: serde_json::Error| ScanError::Protocol(e.to_string());
        self.requests.fetch_add(1, Ordering::Relaxed);
        let resp = self
            .agent
            .post(&self.config.submit_url)
            .header(self.config.api_key_header.as_str(), self.api_key.as_str())
            .header("content-type", "application/octet-stream")
            .send(bytes)
            .map_err(net)?;
        let submitted: Submitted = serde_json::from_str(&self.read(resp)?).map_err(proto)?;
        let url = self.config.poll_url.replace("{id}", &submitted.id);
        for poll in 0..self.config.max_polls {
            if poll > 0 {
                std::thread::sleep(self.config.poll_interval);
            }
            self.requests.fetch_add(1, Ordering::Relaxed);
            let resp = self
                .agent
                .get(&url)
                .header(self.config.api_key_header.as_str(), self.api_key.as_str())
                .call()
                .map_err(net)?;
            let polled: Polled = serde_json::from_str(&self.read(resp)?).map_err(proto)?;
            match polled.status.as_str() {
                "completed" => {
                    return Ok(polled
                        .results
                        .iter()
                        .map(|(engine, r)| (engine.clone(), r.detected()))
                        .collect())
                }
                "failed" | "error" => {
                    return Err(ScanError::Failed(polled.error.unwrap_or(polled.status)));
                }
                _ => {}
            }
        }
        Err(ScanError::Timeout(self.config.max_polls))
    }
}
