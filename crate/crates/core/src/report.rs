//! Structured outcome of a principle check.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "PREMISE-FAIL")]
    PremiseFail,
    #[serde(rename = "DEGENERATE")]
    Degenerate,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::PremiseFail => "PREMISE-FAIL",
            Status::Degenerate => "DEGENERATE",
        }
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub label: String,
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiseCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of one check. Wall-clock time is kept in memory only, so the
/// serialized form is reproducible bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub check: String,
    pub status: Status,
    /// Named outcome such as MONOTONE or ONE-DIMENSIONAL, when the check has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<String>,
    pub summary: String,
    #[serde(default)]
    pub quantities: BTreeMap<String, f64>,
    #[serde(default)]
    pub witnesses: Vec<Witness>,
    #[serde(default)]
    pub premises: Vec<PremiseCheck>,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default)]
    pub config: serde_json::Value,
    #[serde(skip)]
    pub elapsed: Option<Duration>,
}

impl VerificationReport {
    pub fn new(check: impl Into<String>, status: Status, summary: impl Into<String>) -> Self {
        Self {
            scenario: String::new(),
            check: check.into(),
            status,
            certificate: None,
            summary: summary.into(),
            quantities: BTreeMap::new(),
            witnesses: Vec::new(),
            premises: Vec::new(),
            notes: Vec::new(),
            config: serde_json::Value::Null,
            elapsed: None,
        }
    }

    pub fn quantity(mut self, name: &str, value: f64) -> Self {
        self.quantities.insert(name.to_string(), value);
        self
    }

    pub fn witness(mut self, label: &str, point: Vec<f64>, value: f64) -> Self {
        self.witnesses.push(Witness { label: label.to_string(), point, value });
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    pub fn premise(mut self, name: &str, passed: bool, detail: impl Into<String>) -> Self {
        self.premises.push(PremiseCheck { name: name.to_string(), passed, detail: detail.into() });
        self
    }

    pub fn certify(mut self, label: &str) -> Self {
        self.certificate = Some(label.to_string());
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.quantities.get(name).copied()
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn premises_hold(&self) -> bool {
        self.premises.iter().all(|p| p.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
