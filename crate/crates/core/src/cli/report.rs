use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::torsion::ClassificationResult;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ClassEntry {
    pub member: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FlowEntry {
    pub variable: String,
    pub unknowns: Vec<String>,
    /// `du/dt = rhs` lines.
    pub rhs: Vec<String>,
    pub leftovers_ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection: Option<String>,
    /// Per-equation agreement with the builtin's reference system.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_matches: Option<BTreeMap<String, bool>>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct NearlyParallelEntry {
    pub lambda_w: f64,
    pub spread: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TrajectoryEntry {
    pub method: String,
    pub samples: usize,
    pub start: f64,
    pub end: f64,
    pub truncated: bool,
}

/// Machine-readable result of one command. Field order is fixed and maps
/// are sorted, so identical inputs give identical bytes.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Report {
    pub command: String,
    pub input_digest: String,
    pub structure: String,
    pub lambda: Option<Vec<String>>,
    pub tol: f64,
    pub seed: u64,
    pub points: usize,
    pub status: String,
    pub residuals: BTreeMap<String, f64>,
    pub classes: BTreeMap<String, ClassEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nearly_parallel: Option<NearlyParallelEntry>,
    pub flow: Option<FlowEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectoryEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory_csv_path: Option<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub forms: BTreeMap<String, Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Report {
    pub fn new(command: &str, digest: String, structure: &str, tol: f64, seed: u64, points: usize) -> Self {
        Report {
            command: command.to_string(),
            input_digest: digest,
            structure: structure.to_string(),
            lambda: None,
            tol,
            seed,
            points,
            status: "ok".to_string(),
            residuals: BTreeMap::new(),
            classes: BTreeMap::new(),
            nearly_parallel: None,
            flow: None,
            trajectory: None,
            trajectory_csv_path: None,
            forms: BTreeMap::new(),
            error: None,
        }
    }

    pub fn set_classes(&mut self, c: &ClassificationResult) {
        self.classes = c
            .classes
            .iter()
            .map(|(k, v)| (k.clone(), ClassEntry { member: v.member, residual: clean(v.residual) }))
            .collect();
        self.nearly_parallel = c
            .nearly_parallel
            .map(|f| NearlyParallelEntry { lambda_w: clean(f.lambda_w), spread: clean(f.spread), residual: clean(f.residual) });
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Maps `-0.0` to `0.0` so signed zeros do not leak into reports.
pub fn clean(x: f64) -> f64 {
    x + 0.0
}

/// Hex SHA-256 of the concatenated input parts, each length-prefixed.
pub fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_separates_parts() {
        assert_ne!(digest(&[b"ab", b"c"]), digest(&[b"a", b"bc"]));
        assert_eq!(digest(&[b"x"]).len(), 64);
    }

    #[test]
    fn json_is_stable_and_skips_empty_fields() {
        let r = Report::new("verify", digest(&[b"x"]), "g2", 1e-8, 42, 100);
        let a = r.to_json();
        assert_eq!(a, r.clone().to_json());
        assert!(!a.contains("trajectory_csv_path"));
        assert!(a.contains("\"flow\": null"));
        assert!(a.ends_with("}\n"));
    }
}
