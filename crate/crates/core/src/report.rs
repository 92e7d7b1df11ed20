//! JSON shapes of pipeline reports. Field order is fixed by declaration
//! order and artifact maps are sorted, so equal runs serialize identically.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::balance::ColorSetJson;
use crate::fppoly::NormalizeReport;
use crate::scheme::{Primitivity, SchemeJson};
use crate::verify::Check;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub p: u64,
    pub poly: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedInfo {
    pub poly: String,
    pub report: NormalizeReport,
}

/// One stage execution; `timing_ms` is only filled when timings are enabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub component: String,
    pub depth: usize,
    pub outcome: String,
    pub timing_ms: Option<f64>,
    pub artifacts: Value,
}

/// One step of a primitive reduction, kept with scheme certificates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrailStep {
    pub closed_subset: Vec<usize>,
    pub n_d: usize,
    pub coefficient_index: usize,
    pub h: String,
    pub reduced: String,
    /// Normalizing the reduced polynomial removed repeated or non-split parts.
    pub stripped: bool,
    pub result: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CertificateJson {
    ThinScheme {
        component: String,
        colors: ColorSetJson,
        scheme: SchemeJson,
        primitivity: Primitivity,
        trail: Vec<TrailStep>,
    },
    Scheme {
        component: String,
        colors: ColorSetJson,
        scheme: SchemeJson,
        primitivity: Primitivity,
        trail: Vec<TrailStep>,
    },
}

impl CertificateJson {
    pub fn component(&self) -> &str {
        match self {
            CertificateJson::ThinScheme { component, .. } | CertificateJson::Scheme { component, .. } => component,
        }
    }

    pub fn colors(&self) -> &ColorSetJson {
        match self {
            CertificateJson::ThinScheme { colors, .. } | CertificateJson::Scheme { colors, .. } => colors,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub input: InputInfo,
    pub normalized: NormalizedInfo,
    /// `full`, `partial` or `stalled`.
    pub outcome: String,
    pub stages: Vec<StageRecord>,
    pub factors: Vec<String>,
    pub certificates: Vec<CertificateJson>,
}

impl PipelineReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub input: InputInfo,
    pub normalized: String,
    pub roots: Vec<u64>,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}
