#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use babelview::air::{parse_program, MethodSig, Program};
use babelview::callgraph::build_callgraph;
use babelview::interface::{all_interface_methods, map_webviews};
use babelview::oracle::{explore, OracleTrace, DEFAULT_MAX_SEQUENCE, DEFAULT_MAX_STEPS};
use babelview::pipeline::{analyze_source, Analysis, AnalyzeOptions};
use babelview::taint::SourceSinkConfig;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
pub struct Labels {
    pub apps: Vec<AppLabel>,
}

#[derive(Debug, Deserialize)]
pub struct AppLabel {
    pub name: String,
    /// Expected alarms as (category, attributed interface method).
    pub alarms: Vec<(String, Option<String>)>,
    #[serde(default)]
    pub intent: Option<String>,
    #[serde(default)]
    pub http_urls: Vec<String>,
    /// (source, sink) pairs no execution can produce.
    #[serde(default)]
    pub impossible: Vec<(String, String)>,
}

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn app_path(name: &str) -> PathBuf {
    fixtures_dir().join("apps").join(format!("{name}.air"))
}

pub fn app_source(name: &str) -> String {
    std::fs::read_to_string(app_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn labels() -> Labels {
    let text = std::fs::read_to_string(fixtures_dir().join("labels.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn load(name: &str) -> Program {
    parse_program(&app_source(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn analyze(name: &str) -> Analysis {
    analyze_source(name, &app_source(name), &AnalyzeOptions::default())
        .unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Interface methods the attacker may call, by declaring class.
pub fn attacker_methods(program: &Program) -> Vec<MethodSig> {
    let graph = build_callgraph(program).unwrap();
    let map = map_webviews(program, &graph);
    all_interface_methods(program, &map)
        .iter()
        .map(|m| m.owner_sig())
        .collect()
}

pub fn oracle_traces(program: &Program) -> Vec<OracleTrace> {
    let config = SourceSinkConfig::default_config().resolve(program).unwrap();
    explore(
        program,
        &config,
        &attacker_methods(program),
        DEFAULT_MAX_SEQUENCE,
        DEFAULT_MAX_STEPS,
    )
    .unwrap()
}

pub fn oracle_pairs(traces: &[OracleTrace]) -> BTreeSet<(String, String)> {
    traces
        .iter()
        .flat_map(|t| t.leaks.iter().cloned())
        .collect()
}

pub fn engine_pairs(analysis: &Analysis) -> BTreeSet<(String, String)> {
    analysis
        .flows
        .iter()
        .map(|f| (f.source.clone(), f.sink.clone()))
        .collect()
}

pub fn alarm_pairs(analysis: &Analysis) -> Vec<(String, Option<String>)> {
    let mut out: Vec<_> = analysis
        .report
        .alarms
        .iter()
        .map(|a| {
            (
                format!("{:?}", a.category),
                a.attribution.as_ref().map(|s| s.to_string()),
            )
        })
        .collect();
    out.sort();
    out
}
