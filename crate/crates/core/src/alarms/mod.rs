//! Alarm taxonomy, classification, reports and corpus aggregation.

pub mod corpus;
pub mod report;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::air::{Manifest, MethodSig, Site};
use crate::interface::{WebviewInterfaceMap, ANNOTATION_API};
use crate::refine::{IntentFinding, PreferenceLeak};
use crate::taint::{Flow, ATTACKER_INPUT, WEB_EXFILTRATION};

pub use corpus::{aggregate_corpus, render_table, CorpusError, CorpusSummary};
pub use report::{
    emit_report, AlarmReport, Feasibility, HttpUrl, InterfaceInventory, ReportStats, SCHEMA_VERSION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AlarmCategory {
    OpenFile,
    WriteFile,
    ReadFile,
    TMLeaks,
    PrefTMLeaks,
    PrefConnectivityLeaks,
    SQLiteLeaks,
    SQLiteQuery,
    PrefSQLiteLeaks,
    GPSLeaks,
    PrefGPSLeaks,
    DirectlySendSMS,
    DirectlyMakeCalls,
    CallViaIntent,
    EmailSMSViaIntent,
    TakePicture,
    DownloadPhoto,
    PlayVideoAudio,
    EditCalendar,
    PostToSocial,
    StartApp,
    ApiPriorTo17,
    UnknownIntent,
    FrameConfusion,
    FetchClass,
    FetchConstructor,
    ConstructorInit,
    FetchMethod,
    MethodParameter,
    Uncategorized,
}

impl AlarmCategory {
    pub const ALL: [AlarmCategory; 30] = [
        AlarmCategory::OpenFile,
        AlarmCategory::WriteFile,
        AlarmCategory::ReadFile,
        AlarmCategory::TMLeaks,
        AlarmCategory::PrefTMLeaks,
        AlarmCategory::PrefConnectivityLeaks,
        AlarmCategory::SQLiteLeaks,
        AlarmCategory::SQLiteQuery,
        AlarmCategory::PrefSQLiteLeaks,
        AlarmCategory::GPSLeaks,
        AlarmCategory::PrefGPSLeaks,
        AlarmCategory::DirectlySendSMS,
        AlarmCategory::DirectlyMakeCalls,
        AlarmCategory::CallViaIntent,
        AlarmCategory::EmailSMSViaIntent,
        AlarmCategory::TakePicture,
        AlarmCategory::DownloadPhoto,
        AlarmCategory::PlayVideoAudio,
        AlarmCategory::EditCalendar,
        AlarmCategory::PostToSocial,
        AlarmCategory::StartApp,
        AlarmCategory::ApiPriorTo17,
        AlarmCategory::UnknownIntent,
        AlarmCategory::FrameConfusion,
        AlarmCategory::FetchClass,
        AlarmCategory::FetchConstructor,
        AlarmCategory::ConstructorInit,
        AlarmCategory::FetchMethod,
        AlarmCategory::MethodParameter,
        AlarmCategory::Uncategorized,
    ];

    /// Display name as used in the alarm table.
    pub fn title(self) -> &'static str {
        use AlarmCategory::*;
        match self {
            OpenFile => "Open File",
            WriteFile => "Write File",
            ReadFile => "Read File",
            TMLeaks => "TM Leaks",
            PrefTMLeaks => "Pref. TM Leaks",
            PrefConnectivityLeaks => "Pref. Connectivity Leaks",
            SQLiteLeaks => "SQL-lite Leaks",
            SQLiteQuery => "SQL-lite Query",
            PrefSQLiteLeaks => "Pref. SQL-lite Leaks",
            GPSLeaks => "GPS Leaks",
            PrefGPSLeaks => "Pref. GPS Leaks",
            DirectlySendSMS => "Directly Send SMS",
            DirectlyMakeCalls => "Directly Make Calls",
            CallViaIntent => "Call via Intent",
            EmailSMSViaIntent => "Email/SMS via Intent",
            TakePicture => "Take Picture",
            DownloadPhoto => "Download Photo",
            PlayVideoAudio => "Play Video/Audio",
            EditCalendar => "Edit Calendar",
            PostToSocial => "Post to Social",
            StartApp => "Start App",
            ApiPriorTo17 => "API prior to 17",
            UnknownIntent => "Unknown Intent",
            FrameConfusion => "Frame Confusion",
            FetchClass => "Fetch Class",
            FetchConstructor => "Fetch Constructor",
            ConstructorInit => "Constructor init",
            FetchMethod => "Fetch Method",
            MethodParameter => "Method Parameter",
            Uncategorized => "Uncategorized",
        }
    }
}

impl fmt::Display for AlarmCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Confidence {
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Evidence {
    Flow {
        source: String,
        source_site: Site,
        sink: String,
        sink_site: Site,
        witness: Vec<Site>,
    },
    Preference {
        key: Option<String>,
        value_type: String,
        put_source: String,
        put_site: Site,
        get_site: Site,
        suspicious: bool,
    },
    Intent {
        action: Option<String>,
        package: Option<String>,
        launches_app: bool,
        sink_site: Site,
        stack_consistent: bool,
    },
    Manifest {
        target_api: u32,
        interface_classes: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Alarm {
    pub category: AlarmCategory,
    pub confidence: Confidence,
    /// Interface method whose invocation triggers the alarm.
    pub attribution: Option<MethodSig>,
    pub evidence: Evidence,
}

/// Packages of social networks recognized as Intent targets.
pub const SOCIAL_PACKAGES: [&str; 5] = [
    "com.facebook.katana",
    "com.twitter.android",
    "com.instagram.android",
    "com.whatsapp",
    "com.google.android.apps.plus",
];

/// Category of a direct flow by source and sink labels.
pub fn flow_category(source: &str, sink: &str) -> AlarmCategory {
    use AlarmCategory::*;
    let to_web = sink == WEB_EXFILTRATION || sink.starts_with("webview-");
    if source == ATTACKER_INPUT {
        return match sink {
            s if s.starts_with("webview-") => FrameConfusion,
            "file-open" | "file-open-child" => OpenFile,
            "file-open-output" | "file-write-path" | "file-write" => WriteFile,
            "file-read-path" | "file-read-open" => ReadFile,
            "sqlite-raw-query" | "sqlite-exec" | "sqlite-query" => SQLiteQuery,
            "sms-send" => DirectlySendSMS,
            "phone-call" => DirectlyMakeCalls,
            "media-play" | "media-create" => PlayVideoAudio,
            "download-request" => DownloadPhoto,
            "reflect-class" => FetchClass,
            "reflect-method" => FetchMethod,
            "reflect-constructor" => FetchConstructor,
            "reflect-new-instance" | "reflect-constructor-init" => ConstructorInit,
            "reflect-invoke" => MethodParameter,
            _ => Uncategorized,
        };
    }
    if !to_web {
        return Uncategorized;
    }
    match source {
        s if s.starts_with("tm-") => TMLeaks,
        "gps-location" => GPSLeaks,
        s if s.starts_with("sqlite-") => SQLiteLeaks,
        "file-content" | "file-line" => ReadFile,
        _ => Uncategorized,
    }
}

/// Category of a preference leak by the source of the stored value.
pub fn preference_category(put_source: &str) -> AlarmCategory {
    use AlarmCategory::*;
    match put_source {
        s if s.starts_with("tm-") => PrefTMLeaks,
        "connectivity-info" | "wifi-info" => PrefConnectivityLeaks,
        s if s.starts_with("sqlite-") => PrefSQLiteLeaks,
        "gps-location" => PrefGPSLeaks,
        _ => Uncategorized,
    }
}

/// Category of an attacker-influenced `startActivity`.
pub fn intent_category(finding: &IntentFinding) -> AlarmCategory {
    use AlarmCategory::*;
    if finding
        .package
        .as_deref()
        .is_some_and(|p| SOCIAL_PACKAGES.contains(&p))
    {
        return PostToSocial;
    }
    let Some(action) = &finding.action else {
        return if finding.launches_app {
            StartApp
        } else {
            UnknownIntent
        };
    };
    let short = action.rsplit('.').next().unwrap_or(action);
    match short {
        "CALL" | "DIAL" => CallViaIntent,
        "SEND" | "SENDTO" | "SEND_MULTIPLE" => EmailSMSViaIntent,
        "IMAGE_CAPTURE" | "VIDEO_CAPTURE" => TakePicture,
        "INSERT" | "EDIT" | "INSERT_OR_EDIT" => EditCalendar,
        _ if finding.launches_app => StartApp,
        _ => Uncategorized,
    }
}

fn flow_evidence(f: &Flow) -> Evidence {
    Evidence::Flow {
        source: f.source.clone(),
        source_site: f.source_site.clone(),
        sink: f.sink.clone(),
        sink_site: f.sink_site.clone(),
        witness: f.witness.clone(),
    }
}

/// Alarms for every attacker-attributed flow plus the manifest rule. Paired
/// preference flows and resolved intents replace the raw flows they cover.
/// Flows differing only in their source site share one alarm.
pub fn classify(
    flows: &[Flow],
    pref_leaks: &[PreferenceLeak],
    intents: &[IntentFinding],
    manifest: &Manifest,
    map: &WebviewInterfaceMap,
) -> Vec<Alarm> {
    let mut alarms = BTreeSet::new();
    if manifest.target_api < ANNOTATION_API && !map.is_empty() {
        alarms.insert(Alarm {
            category: AlarmCategory::ApiPriorTo17,
            confidence: Confidence::High,
            attribution: None,
            evidence: Evidence::Manifest {
                target_api: manifest.target_api,
                interface_classes: map.interface_classes().into_iter().collect(),
            },
        });
    }
    let mut covered = BTreeSet::new();
    for leak in pref_leaks {
        let attribution = leak
            .get
            .attribution
            .clone()
            .or(leak.put.attribution.clone());
        if attribution.is_none() {
            continue;
        }
        covered.insert(leak.put.key());
        covered.insert(leak.get.key());
        alarms.insert(Alarm {
            category: preference_category(&leak.put.source),
            confidence: if leak.low_confidence {
                Confidence::Low
            } else {
                Confidence::High
            },
            attribution,
            evidence: Evidence::Preference {
                key: leak.key.clone(),
                value_type: leak.value_type.clone(),
                put_source: leak.put.source.clone(),
                put_site: leak.put.sink_site.clone(),
                get_site: leak.get.source_site.clone(),
                suspicious: leak.suspicious,
            },
        });
    }
    for finding in intents {
        if finding.flow.attribution.is_none() {
            continue;
        }
        covered.insert(finding.flow.key());
        alarms.insert(Alarm {
            category: intent_category(finding),
            confidence: if finding.stack_consistent {
                Confidence::High
            } else {
                Confidence::Low
            },
            attribution: finding.flow.attribution.clone(),
            evidence: Evidence::Intent {
                action: finding.action.clone(),
                package: finding.package.clone(),
                launches_app: finding.launches_app,
                sink_site: finding.flow.sink_site.clone(),
                stack_consistent: finding.stack_consistent,
            },
        });
    }
    let mut reported = BTreeSet::new();
    for f in flows {
        if f.attribution.is_none() || covered.contains(&f.key()) {
            continue;
        }
        let same = (&f.source, &f.sink, &f.sink_site, &f.attribution);
        if !reported.insert(same) {
            continue;
        }
        alarms.insert(Alarm {
            category: flow_category(&f.source, &f.sink),
            confidence: Confidence::High,
            attribution: f.attribution.clone(),
            evidence: flow_evidence(f),
        });
    }
    alarms.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn device_id_to_web_is_tm_leak() {
        assert_eq!(
            flow_category("tm-device-id", WEB_EXFILTRATION),
            AlarmCategory::TMLeaks
        );
        assert_eq!(
            flow_category(ATTACKER_INPUT, "webview-load-url"),
            AlarmCategory::FrameConfusion
        );
        assert_eq!(
            flow_category("tm-device-id", "sms-send"),
            AlarmCategory::Uncategorized
        );
    }

    #[test]
    fn no_flows_no_alarms() {
        let alarms = classify(
            &[],
            &[],
            &[],
            &Manifest::default(),
            &WebviewInterfaceMap::default(),
        );
        assert!(alarms.is_empty());
    }
}
