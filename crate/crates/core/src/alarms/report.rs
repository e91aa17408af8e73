//! Per-app JSON reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Alarm;
use crate::refine::PreferenceKey;

pub const SCHEMA_VERSION: u32 = 1;
pub const STATIC_EVIDENCE: &str = "static evidence only";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceInventory {
    /// Webview class to registered interface classes.
    pub webviews: BTreeMap<String, Vec<String>>,
    pub methods: Vec<String>,
    pub suspicious_methods: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HttpUrl {
    pub class: String,
    pub method: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feasibility {
    pub evidence: String,
    pub http_urls: Vec<HttpUrl>,
    /// JavaScript-side names of registered interface objects.
    pub interface_objects: Vec<String>,
}

impl Default for Feasibility {
    fn default() -> Self {
        Feasibility {
            evidence: STATIC_EVIDENCE.to_string(),
            http_urls: Vec::new(),
            interface_objects: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportStats {
    pub timed_out: bool,
    pub iterations: u64,
    pub units: usize,
    pub facts: usize,
    pub flows: usize,
    /// Phase durations in milliseconds; present only when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub durations_ms: Option<BTreeMap<String, u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlarmReport {
    pub schema_version: u32,
    pub app: String,
    pub alarms: Vec<Alarm>,
    pub interfaces: InterfaceInventory,
    pub preference_keys: Vec<PreferenceKey>,
    pub feasibility: Feasibility,
    pub stats: ReportStats,
    pub notes: Vec<String>,
}

impl AlarmReport {
    pub fn empty(app: &str) -> AlarmReport {
        AlarmReport {
            schema_version: SCHEMA_VERSION,
            app: app.to_string(),
            alarms: Vec::new(),
            interfaces: InterfaceInventory::default(),
            preference_keys: Vec::new(),
            feasibility: Feasibility::default(),
            stats: ReportStats::default(),
            notes: Vec::new(),
        }
    }
}

/// Pretty JSON with object keys in sorted order.
pub fn emit_report(report: &AlarmReport) -> String {
    let value = serde_json::to_value(report).expect("report serializes");
    let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_shape() {
        let text = emit_report(&AlarmReport::empty("demo"));
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["app"], "demo");
        assert_eq!(v["alarms"], serde_json::json!([]));
        assert_eq!(v["schema_version"], 1);
        assert!(v["stats"].get("durations_ms").is_none());
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let text = emit_report(&AlarmReport::empty("demo"));
        let back: AlarmReport = serde_json::from_str(&text).unwrap();
        assert_eq!(emit_report(&back), text);
    }
}
