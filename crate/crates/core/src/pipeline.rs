//! End-to-end analysis of one app: interface discovery, instrumentation,
//! taint analysis, refinement, classification and feasibility.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::air::{parse_program_with_stubs, AirError, Program};
use crate::alarms::{classify, AlarmReport, InterfaceInventory, ReportStats};
use crate::callgraph::{build_callgraph, CallGraphError};
use crate::feasibility::feasibility;
use crate::instrument::{instrument, InstrumentError};
use crate::interface::{all_interface_methods, map_webviews, WebviewInterfaceMap};
use crate::refine::{
    flag_suspicious_interface_names, match_preference_flows, report_preference_keys,
    resolve_intent_action, Folds, IntentFinding, PreferenceLeak, RefineError, START_ACTIVITY,
};
use crate::taint::{run_taint, ConfigError, Flow, RunOptions, SourceSinkConfig};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_ALARMS: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Air(#[from] AirError),
    #[error(transparent)]
    CallGraph(#[from] CallGraphError),
    #[error(transparent)]
    Instrument(#[from] InstrumentError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Refine(#[from] RefineError),
}

#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    /// Additional stub documents merged with the platform stubs.
    pub extra_stubs: Vec<String>,
    /// Replaces the bundled source and sink configuration.
    pub config: Option<SourceSinkConfig>,
    pub run: RunOptions,
    /// Record phase durations in the report.
    pub timings: bool,
}

/// Report plus the intermediate results it was built from.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: AlarmReport,
    pub program: Program,
    pub instrumented: Program,
    pub map: WebviewInterfaceMap,
    pub flows: Vec<Flow>,
    pub pref_leaks: Vec<PreferenceLeak>,
    pub intents: Vec<IntentFinding>,
}

pub fn analyze_source(
    app: &str,
    text: &str,
    opts: &AnalyzeOptions,
) -> Result<Analysis, PipelineError> {
    let stubs: Vec<&str> = opts.extra_stubs.iter().map(String::as_str).collect();
    let program = parse_program_with_stubs(text, &stubs)?;
    analyze_program(app, program, opts)
}

pub fn analyze_program(
    app: &str,
    program: Program,
    opts: &AnalyzeOptions,
) -> Result<Analysis, PipelineError> {
    let start = Instant::now();
    let mut durations = BTreeMap::new();
    let mut lap = |name: &str, since: Instant| {
        durations.insert(name.to_string(), since.elapsed().as_millis() as u64);
    };
    let config = opts
        .config
        .clone()
        .unwrap_or_else(SourceSinkConfig::default_config);

    let t = Instant::now();
    let graph = build_callgraph(&program)?;
    let map = map_webviews(&program, &graph);
    lap("interface", t);

    let t = Instant::now();
    let inst = instrument(&program, &map)?;
    let instrumented = inst.program;
    let graph = build_callgraph(&instrumented)?;
    lap("instrument", t);

    let t = Instant::now();
    let resolved = config.resolve(&instrumented)?;
    let taint = run_taint(&instrumented, &resolved, &opts.run);
    lap("taint", t);

    let t = Instant::now();
    let folds = Folds::new(&instrumented);
    let pref_leaks = match_preference_flows(
        &instrumented,
        &taint.flows,
        &folds,
        &resolved.suspicious_keys,
    );
    let intents = taint
        .flows
        .iter()
        .filter(|f| f.sink == START_ACTIVITY)
        .map(|f| resolve_intent_action(f, &instrumented, &graph, &taint.pts, &folds))
        .collect::<Result<Vec<_>, _>>()?;
    let preference_keys = report_preference_keys(
        &instrumented,
        &graph,
        &map,
        &folds,
        &resolved.suspicious_keys,
    );
    let methods = all_interface_methods(&program, &map);
    let suspicious = flag_suspicious_interface_names(&methods, &resolved.suspicious_methods);
    lap("refine", t);

    let alarms = classify(&taint.flows, &pref_leaks, &intents, &program.manifest, &map);
    lap("total", start);

    let report = AlarmReport {
        alarms,
        interfaces: InterfaceInventory {
            webviews: map
                .entries
                .iter()
                .map(|(w, cs)| (w.clone(), cs.iter().cloned().collect()))
                .collect(),
            methods: methods.iter().map(|m| m.owner_sig().to_string()).collect(),
            suspicious_methods: suspicious
                .iter()
                .map(|m| m.owner_sig().to_string())
                .collect(),
        },
        preference_keys,
        feasibility: feasibility(&program, &map),
        stats: ReportStats {
            timed_out: taint.timed_out,
            iterations: taint.stats.iterations,
            units: taint.stats.units,
            facts: taint.stats.facts,
            flows: taint.flows.len(),
            durations_ms: opts.timings.then_some(durations),
        },
        notes: inst.notes,
        ..AlarmReport::empty(app)
    };
    Ok(Analysis {
        report,
        program,
        instrumented,
        map,
        flows: taint.flows,
        pref_leaks,
        intents,
    })
}

/// 0 when clean, 1 when alarms were raised, 2 when the analysis timed out.
pub fn exit_code(report: &AlarmReport) -> i32 {
    if report.stats.timed_out {
        EXIT_ERROR
    } else if report.alarms.is_empty() {
        EXIT_CLEAN
    } else {
        EXIT_ALARMS
    }
}
