use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ConfigError;

/// Matches when every literal occurs somewhere in the text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub id: String,
    pub strings: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ScanVerdict {
    pub matched: bool,
    pub rules: Vec<String>,
}

/// A named rule set, acting as one detection engine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignatureSet {
    pub engine: String,
    pub rules: Vec<Rule>,
}

impl SignatureSet {
    pub fn new(engine: impl Into<String>, rules: Vec<Rule>) -> Self {
        SignatureSet {
            engine: engine.into(),
            rules,
        }
    }

    pub fn parse(engine: &str, text: &str) -> Result<Self, String> {
        let rules: Vec<Rule> = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if let Some(r) = rules.iter().find(|r| r.strings.is_empty()) {
            return Err(format!("rule {:?} has no strings", r.id));
        }
        if let Some(r) = rules
            .iter()
            .find(|r| r.strings.iter().any(String::is_empty))
        {
            return Err(format!("rule {:?} has an empty string", r.id));
        }
        Ok(SignatureSet::new(engine, rules))
    }

    /// Reads a JSON rule list; the engine is named after the file stem.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let err = |message: String| ConfigError::Signatures {
            path: path.to_path_buf(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let engine = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "signatures".to_string());
        SignatureSet::parse(&engine, &text).map_err(err)
    }

    pub fn scan(&self, text: &str) -> ScanVerdict {
        let rules: Vec<String> = self
            .rules
            .iter()
            .filter(|r| r.strings.iter().all(|s| text.contains(s.as_str())))
            .map(|r| r.id.clone())
            .collect();
        ScanVerdict {
            matched: !rules.is_empty(),
            rules,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(json: &str) -> SignatureSet {
        SignatureSet::parse("t", json).unwrap()
    }

    #[test]
    fn conjunction_of_literals() {
        let s = set(
            r#"[{"id": "w", "strings": ["document.write", "<script src="]}, {"id": "e", "strings": ["eval("]}]"#,
        );
        assert_eq!(s.scan("document.write(\"<script src=x>\")").rules, ["w"]);
        assert!(!s.scan("document.write(x)").matched);
        let both = s.scan("eval(1); document.write('<script src=')");
        assert_eq!(both.rules, ["w", "e"]);
    }

    #[test]
    fn empty_rule_set_never_matches() {
        assert!(!set("[]").scan("anything").matched);
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(SignatureSet::parse("t", "{").is_err());
        assert!(SignatureSet::parse("t", r#"[{"id": "x", "strings": []}]"#).is_err());
        assert!(SignatureSet::parse("t", r#"[{"id": "x"}]"#).is_err());
    }
}
