//! Report envelope shared by every subcommand.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const TOOL: &str = "drconf";

/// What a command found.
#[derive(Debug, Clone)]
pub struct Checked {
    pub passed: bool,
    /// Short machine-readable cause when `passed` is false.
    pub reason: Option<String>,
    pub result: Value,
}

impl Checked {
    pub fn new(passed: bool, reason: impl FnOnce() -> String, result: Value) -> Self {
        Self {
            passed,
            reason: (!passed).then(reason),
            result,
        }
    }
}

/// Why a command did not produce a verdict of its own.
#[derive(Debug, Clone)]
pub enum Fail {
    /// Bad input: exit code 2, no report.
    Usage(String),
    /// A library check rejected the input: exit code 1, reported.
    Check { reason: String, message: String },
}

impl Fail {
    pub fn check<E: std::fmt::Debug + std::fmt::Display>(e: E) -> Self {
        Fail::Check {
            reason: variant_name(&e),
            message: e.to_string(),
        }
    }
}

/// `NotSkew { .. }` -> `NotSkew`.
pub fn variant_name<E: std::fmt::Debug>(e: &E) -> String {
    format!("{e:?}")
        .chars()
        .take_while(|c| c.is_alphanumeric() || *c == '_')
        .collect()
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// sha256 of the canonical JSON of `{command, seed, config}`.
    pub config_hash: String,
    pub seed: u64,
    pub config: Value,
    pub passed: bool,
    pub reason: Option<String>,
    pub result: Value,
}

impl Report {
    pub fn new(command: &str, seed: u64, config: Value, checked: Checked) -> Self {
        Self {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_hash: config_hash(command, seed, &config),
            seed,
            config,
            passed: checked.passed,
            reason: checked.reason,
            result: checked.result,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn config_hash(command: &str, seed: u64, config: &Value) -> String {
    let canonical = serde_json::json!({ "command": command, "seed": seed, "config": config });
    let bytes = serde_json::to_vec(&canonical).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug)]
    #[allow(dead_code)]
    enum E {
        NotSkew { index: usize },
        Tensor(u8),
        Degenerate,
    }

    #[test]
    fn variant_names() {
        assert_eq!(variant_name(&E::NotSkew { index: 0 }), "NotSkew");
        assert_eq!(variant_name(&E::Tensor(1)), "Tensor");
        assert_eq!(variant_name(&E::Degenerate), "Degenerate");
    }

    #[test]
    fn hash_depends_on_seed_and_config() {
        let c = serde_json::json!({ "tol": 1e-7 });
        let h = config_hash("probe", 1, &c);
        assert_eq!(h.len(), 64);
        assert_eq!(h, config_hash("probe", 1, &c));
        assert_ne!(h, config_hash("probe", 2, &c));
        assert_ne!(h, config_hash("probe", 1, &serde_json::json!({ "tol": 1e-6 })));
    }
}
