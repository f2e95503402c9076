use serde::{Deserialize, Serialize};
use serde_json::Value;

/// JSON summary shared by every probe and audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub name: String,
    pub parameters: Value,
    pub sample_count: usize,
    pub worst_ratio: Option<f64>,
    pub min_ratio: Option<f64>,
    pub violation_count: usize,
    pub pass: bool,
}

impl ProbeReport {
    pub fn new(name: impl Into<String>, parameters: Value) -> Self {
        ProbeReport {
            name: name.into(),
            parameters,
            sample_count: 0,
            worst_ratio: None,
            min_ratio: None,
            violation_count: 0,
            pass: true,
        }
    }
}

/// Non-finite values serialize as JSON `null`.
pub(crate) fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}
