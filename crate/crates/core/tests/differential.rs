mod common;

use std::collections::BTreeSet;

use babelview::air::Site;
use babelview::callgraph::build_callgraph;
use babelview::interface::map_webviews;
use babelview::refine::Folds;
use babelview::taint::{run_taint, RunOptions, SourceSinkConfig};
use common::*;

const ATTACKER_INPUT: &str = "attacker-input";

#[test]
fn oracle_leaks_are_engine_flows() {
    for app in labels().apps {
        let analysis = analyze(&app.name);
        let traces = oracle_traces(&analysis.program);
        assert!(
            traces.iter().all(|t| !t.partial),
            "{}: partial oracle trace",
            app.name
        );
        let reported = engine_pairs(&analysis);
        let missed: Vec<_> = oracle_pairs(&traces)
            .into_iter()
            .filter(|p| !reported.contains(p))
            .collect();
        assert!(missed.is_empty(), "{}: engine missed {missed:?}", app.name);
    }
}

/// Attacker input is identified by the interface method it entered; every
/// other source by its call site.
#[test]
fn oracle_leaks_match_engine_source_sites() {
    for app in labels().apps {
        let analysis = analyze(&app.name);
        let reported: BTreeSet<(String, Site, String)> = analysis
            .flows
            .iter()
            .map(|f| {
                let site = match (&f.attribution, f.source.as_str()) {
                    (Some(m), ATTACKER_INPUT) => Site::new(m.clone(), 0),
                    _ => f.source_site.clone(),
                };
                (f.source.clone(), site, f.sink.clone())
            })
            .collect();
        for trace in oracle_traces(&analysis.program) {
            for leak in &trace.leak_details {
                let site = match leak.source.as_str() {
                    ATTACKER_INPUT => Site::new(leak.source_site.method.clone(), 0),
                    _ => leak.source_site.clone(),
                };
                let key = (leak.source.clone(), site, leak.sink.clone());
                assert!(
                    reported.contains(&key),
                    "{}: engine missed {key:?}",
                    app.name
                );
            }
        }
    }
}

#[test]
fn impossible_pairs_are_never_reported() {
    for app in labels().apps {
        let analysis = analyze(&app.name);
        let reported = engine_pairs(&analysis);
        for pair in &app.impossible {
            assert!(
                !reported.contains(pair),
                "{}: reported impossible {pair:?}",
                app.name
            );
        }
    }
}

#[test]
fn impossible_labels_agree_with_oracle() {
    for app in labels().apps {
        let observed = oracle_pairs(&oracle_traces(&load(&app.name)));
        for pair in &app.impossible {
            assert!(
                !observed.contains(pair),
                "{}: label contradicts execution {pair:?}",
                app.name
            );
        }
    }
}

#[test]
fn observed_registrations_are_mapped() {
    for app in labels().apps {
        let program = load(&app.name);
        let map = map_webviews(&program, &build_callgraph(&program).unwrap());
        for trace in oracle_traces(&program) {
            for (webview, iface) in &trace.registrations {
                let mapped = map.entries.get(webview).is_some_and(|s| s.contains(iface));
                assert!(mapped, "{}: {webview} -> {iface} not mapped", app.name);
            }
        }
    }
}

#[test]
fn observed_calls_are_callgraph_edges() {
    for app in labels().apps {
        let program = load(&app.name);
        let graph = build_callgraph(&program).unwrap();
        for trace in oracle_traces(&program) {
            for (caller, callee) in &trace.call_edges {
                assert!(
                    graph.callees(caller).any(|c| c == callee),
                    "{}: missing edge {caller} -> {callee}",
                    app.name
                );
            }
        }
    }
}

#[test]
fn instrumentation_preserves_flows_without_attacker() {
    let opts = RunOptions {
        disable_attacker: true,
        ..RunOptions::default()
    };
    for app in labels().apps {
        let analysis = analyze(&app.name);
        let config = SourceSinkConfig::default_config();
        let keys = |p| -> BTreeSet<_> {
            let resolved = config.resolve(p).unwrap();
            run_taint(p, &resolved, &opts)
                .flows
                .iter()
                .map(|f| f.key())
                .collect()
        };
        assert_eq!(
            keys(&analysis.program),
            keys(&analysis.instrumented),
            "{}",
            app.name
        );
    }
}

#[test]
fn folded_arguments_match_every_execution() {
    for app in labels().apps {
        let program = load(&app.name);
        let folds = Folds::new(&program);
        for trace in oracle_traces(&program) {
            for ((site, index), values) in &trace.observed {
                let Some(folded) = folds.arg(&program, site, *index) else {
                    continue;
                };
                let expected = BTreeSet::from([Some(folded.clone())]);
                assert_eq!(values, &expected, "{}: {site:?} arg {index}", app.name);
            }
        }
    }
}

#[test]
fn observed_preference_leaks_are_paired() {
    for app in labels().apps {
        let analysis = analyze(&app.name);
        let paired: BTreeSet<(String, String)> = analysis
            .pref_leaks
            .iter()
            .filter_map(|l| Some((l.key.clone()?, l.value_type.clone())))
            .collect();
        let unresolved = analysis.pref_leaks.iter().any(|l| l.key.is_none());
        for trace in oracle_traces(&analysis.program) {
            for leak in &trace.pref_leaks {
                assert!(
                    paired.contains(leak) || unresolved,
                    "{}: unpaired {leak:?}",
                    app.name
                );
            }
        }
    }
}
