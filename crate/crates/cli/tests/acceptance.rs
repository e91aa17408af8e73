use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use babelview::air::{parse_program, Instr, MethodSig, Program};
use babelview::alarms::{
    aggregate_corpus, Alarm, AlarmCategory, AlarmReport, Confidence, Evidence,
};
use babelview::callgraph::build_callgraph;
use babelview::interface::{all_interface_methods, map_webviews};
use babelview::oracle::{explore, DEFAULT_MAX_SEQUENCE, DEFAULT_MAX_STEPS};
use babelview::pipeline::{analyze_program, Analysis, AnalyzeOptions};
use babelview::taint::{run_taint, RunOptions, SourceSinkConfig};
use serde::Deserialize;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

#[derive(Deserialize)]
struct Labels {
    apps: Vec<AppLabel>,
}

#[derive(Deserialize)]
struct AppLabel {
    name: String,
    #[serde(default)]
    intent: Option<String>,
    #[serde(default)]
    impossible: Vec<(String, String)>,
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn app_path(name: &str) -> PathBuf {
    fixtures().join("apps").join(format!("{name}.air"))
}

fn labels() -> Labels {
    let text = std::fs::read_to_string(fixtures().join("labels.json")).expect("labels.json");
    serde_json::from_str(&text).expect("labels.json")
}

fn load(name: &str) -> Result<Program, String> {
    let text = std::fs::read_to_string(app_path(name)).map_err(|e| format!("{name}: {e}"))?;
    parse_program(&text).map_err(|e| format!("{name}: {e}"))
}

fn run(name: &str, program: Program) -> Result<Analysis, String> {
    analyze_program(name, program, &AnalyzeOptions::default()).map_err(|e| format!("{name}: {e}"))
}

fn analyze(name: &str) -> Result<Analysis, String> {
    run(name, load(name)?)
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn names(set: &[&str]) -> BTreeSet<String> {
    set.iter().map(|s| s.to_string()).collect()
}

fn phase_one_exactness() -> Outcome {
    let program = load("framework_bridge")?;
    let graph = build_callgraph(&program).map_err(|e| e.to_string())?;
    let map = map_webviews(&program, &graph);
    let ifaces = names(&["FrameworkBridge", "MyBridge"]);
    let want = BTreeMap::from([
        ("MyWebView".to_string(), ifaces.clone()),
        ("WebView".to_string(), ifaces),
    ]);
    check(map.entries == want, || format!("got {:?}", map.entries))?;
    Ok("WebView and MyWebView each map to {FrameworkBridge, MyBridge}".into())
}

fn ordering_sensitive_leak() -> Outcome {
    let start = Instant::now();
    let analysis = analyze("ordering")?;
    let elapsed = start.elapsed();
    let alarms = &analysis.report.alarms;
    check(
        alarms.len() == 1
            && alarms[0].category == AlarmCategory::TMLeaks
            && alarms[0]
                .attribution
                .as_ref()
                .is_some_and(|m| m.name == "getId"),
        || format!("got {alarms:?}"),
    )?;
    let mut program = load("ordering")?;
    let bridge = program
        .classes
        .get_mut("DeviceBridge")
        .ok_or("no DeviceBridge")?;
    let init = bridge
        .methods
        .iter_mut()
        .find(|m| m.name == "initialize")
        .ok_or("no initialize")?;
    init.body = vec![Instr::Return { value: None }];
    let emptied = run("ordering", program)?;
    check(emptied.report.alarms.is_empty(), || {
        format!("empty initialize still raises {:?}", emptied.report.alarms)
    })?;
    check(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "one TMLeaks on getId, none without initialize, {} ms",
        elapsed.as_millis()
    ))
}

fn differential_soundness() -> Outcome {
    let apps = labels().apps;
    check(apps.len() >= 12, || format!("only {} fixtures", apps.len()))?;
    let mut observed_total = 0;
    let mut missed = Vec::new();
    for app in &apps {
        let analysis = analyze(&app.name)?;
        let program = &analysis.program;
        let graph = build_callgraph(program).map_err(|e| e.to_string())?;
        let map = map_webviews(program, &graph);
        let methods: Vec<MethodSig> = all_interface_methods(program, &map)
            .iter()
            .map(|m| m.owner_sig())
            .collect();
        let config = SourceSinkConfig::default_config()
            .resolve(program)
            .map_err(|e| e.to_string())?;
        let traces = explore(
            program,
            &config,
            &methods,
            DEFAULT_MAX_SEQUENCE,
            DEFAULT_MAX_STEPS,
        )
        .map_err(|e| e.to_string())?;
        check(traces.iter().all(|t| !t.partial), || {
            format!("{}: partial oracle trace", app.name)
        })?;
        let observed: BTreeSet<(String, String)> = traces
            .iter()
            .flat_map(|t| t.leaks.iter().cloned())
            .collect();
        let reported: BTreeSet<(String, String)> = analysis
            .flows
            .iter()
            .map(|f| (f.source.clone(), f.sink.clone()))
            .collect();
        observed_total += observed.len();
        missed.extend(
            observed
                .difference(&reported)
                .map(|p| format!("{}: {p:?}", app.name)),
        );
    }
    check(missed.is_empty(), || format!("missed {missed:?}"))?;
    Ok(format!(
        "{} fixtures, {observed_total} observed pairs, 0 missed",
        apps.len()
    ))
}

fn differential_precision() -> Outcome {
    let mut labeled = 0;
    let mut wrong = Vec::new();
    for app in labels().apps.iter().filter(|a| !a.impossible.is_empty()) {
        let analysis = analyze(&app.name)?;
        let reported: BTreeSet<(String, String)> = analysis
            .flows
            .iter()
            .map(|f| (f.source.clone(), f.sink.clone()))
            .collect();
        labeled += app.impossible.len();
        wrong.extend(
            app.impossible
                .iter()
                .filter(|p| reported.contains(*p))
                .map(|p| format!("{}: {p:?}", app.name)),
        );
    }
    check(wrong.is_empty(), || format!("contradicted {wrong:?}"))?;
    Ok(format!("{labeled} impossible pairs, 0 reported"))
}

fn semantics_preservation() -> Outcome {
    let opts = RunOptions {
        disable_attacker: true,
        ..RunOptions::default()
    };
    let config = SourceSinkConfig::default_config();
    let apps = labels().apps;
    for app in &apps {
        let analysis = analyze(&app.name)?;
        let keys = |p: &Program| -> Result<BTreeSet<_>, String> {
            let resolved = config.resolve(p).map_err(|e| e.to_string())?;
            Ok(run_taint(p, &resolved, &opts)
                .flows
                .iter()
                .map(|f| f.key())
                .collect())
        };
        let (before, after) = (keys(&analysis.program)?, keys(&analysis.instrumented)?);
        check(before == after, || {
            format!("{}: {before:?} != {after:?}", app.name)
        })?;
    }
    Ok(format!("{} fixtures, identical flow sets", apps.len()))
}

fn preference_refinement() -> Outcome {
    let analysis = analyze("login_pwd")?;
    let leaks = &analysis.pref_leaks;
    check(
        leaks.len() == 1 && leaks[0].key.as_deref() == Some("loginPwd") && leaks[0].suspicious,
        || format!("got {leaks:?}"),
    )?;
    for variant in ["login_pwd_key_mismatch", "login_pwd_type_mismatch"] {
        let a = analyze(variant)?;
        check(a.pref_leaks.is_empty(), || {
            format!("{variant}: {:?}", a.pref_leaks)
        })?;
    }
    Ok("loginPwd paired and suspicious, mismatched variants unpaired".into())
}

fn intent_resolution() -> Outcome {
    let call = analyze("intent_call")?;
    let actions: Vec<Option<&str>> = call.intents.iter().map(|i| i.action.as_deref()).collect();
    check(actions == [Some("android.intent.action.CALL")], || {
        format!("actions {actions:?}")
    })?;
    let mut classified = 0;
    let intent_apps: Vec<AppLabel> = labels()
        .apps
        .into_iter()
        .filter(|a| a.intent.is_some())
        .collect();
    for app in &intent_apps {
        let analysis = analyze(&app.name)?;
        let got: Vec<String> = analysis
            .report
            .alarms
            .iter()
            .filter(|a| matches!(a.evidence, Evidence::Intent { .. }))
            .map(|a| format!("{:?}", a.category))
            .collect();
        check(got == [app.intent.clone().unwrap_or_default()], || {
            format!("{}: {got:?}", app.name)
        })?;
        classified += 1;
    }
    check(intent_apps.len() == 3, || {
        format!("{} intent fixtures", intent_apps.len())
    })?;
    Ok(format!(
        "{classified}/{} intent fixtures classified as labeled",
        intent_apps.len()
    ))
}

fn api_prior_to_17() -> Outcome {
    let has = |a: &Analysis| {
        a.report
            .alarms
            .iter()
            .any(|x| x.category == AlarmCategory::ApiPriorTo17)
    };
    let legacy = analyze("legacy_api")?;
    check(legacy.map.interface_classes().len() == 1, || {
        "expected one interface class".into()
    })?;
    check(has(&legacy), || "target_api 16 not flagged".into())?;
    let mut program = load("legacy_api")?;
    program.manifest.target_api = 17;
    check(!has(&run("legacy_api", program)?), || {
        "target_api 17 flagged".into()
    })?;
    Ok("flagged at 16, clean at 17".into())
}

/// Sample Pearson correlation from means and deviations.
fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

fn corpus_aggregation() -> Outcome {
    use AlarmCategory::*;
    let rows: [(&str, &[AlarmCategory]); 4] = [
        ("a", &[OpenFile, WriteFile, TMLeaks, CallViaIntent]),
        ("b", &[OpenFile, WriteFile]),
        ("c", &[GPSLeaks, TMLeaks]),
        ("d", &[GPSLeaks]),
    ];
    let reports: Vec<AlarmReport> = rows
        .iter()
        .map(|(app, cats)| AlarmReport {
            alarms: cats
                .iter()
                .map(|&category| Alarm {
                    category,
                    confidence: Confidence::High,
                    attribution: None,
                    evidence: Evidence::Manifest {
                        target_api: 19,
                        interface_classes: Vec::new(),
                    },
                })
                .collect(),
            ..AlarmReport::empty(app)
        })
        .collect();
    let summary = aggregate_corpus(&reports).map_err(|e| e.to_string())?;
    let hand = [
        (OpenFile, WriteFile, Some(1.0)),
        (OpenFile, GPSLeaks, Some(-1.0)),
        (OpenFile, TMLeaks, Some(0.0)),
        (OpenFile, CallViaIntent, Some(1.0 / 3f64.sqrt())),
        (OpenFile, SQLiteLeaks, None),
    ];
    for (a, b, want) in hand {
        let got = summary.coefficient(a, b);
        let ok = match (got, want) {
            (Some(g), Some(w)) => (g - w).abs() < 1e-9,
            (None, None) => true,
            _ => false,
        };
        check(ok, || format!("phi({a:?},{b:?}) = {got:?}, want {want:?}"))?;
    }
    let indicator = |c: AlarmCategory| -> Vec<f64> {
        rows.iter()
            .map(|(_, cats)| f64::from(u8::from(cats.contains(&c))))
            .collect()
    };
    let n = summary.categories.len();
    for i in 0..n {
        for j in 0..n {
            let (ci, cj) = (summary.categories[i], summary.categories[j]);
            let (got, want) = (
                summary.correlation[i][j],
                pearson(&indicator(ci), &indicator(cj)),
            );
            let ok = match (got, want) {
                (Some(g), Some(w)) => (g - w).abs() < 1e-9,
                (None, None) => true,
                _ => false,
            };
            check(ok, || {
                format!("({ci:?},{cj:?}) = {got:?}, pearson {want:?}")
            })?;
            check(got == summary.correlation[j][i], || {
                format!("asymmetric at ({ci:?},{cj:?})")
            })?;
        }
    }
    Ok(format!(
        "{n}x{n} matrix symmetric and within 1e-9 of hand and Pearson values"
    ))
}

fn cli(args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(env!("CARGO_BIN_EXE_babelview"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())
}

fn determinism_and_performance() -> Outcome {
    for app in labels().apps {
        let path = app_path(&app.name);
        let path = path.to_str().ok_or("non-utf8 path")?;
        let (a, b) = (cli(&["analyze", path])?, cli(&["analyze", path])?);
        check(a.stdout == b.stdout && !a.stdout.is_empty(), || {
            format!("{}: reports differ", app.name)
        })?;
    }
    let out = std::env::temp_dir().join(format!("acceptance-corpus-{}.json", std::process::id()));
    let apps = fixtures().join("apps");
    let start = Instant::now();
    let corpus = cli(&[
        "corpus",
        apps.to_str().ok_or("path")?,
        "--out",
        out.to_str().ok_or("path")?,
    ])?;
    let corpus_time = start.elapsed();
    let _ = std::fs::remove_file(&out);
    check(corpus.status.code() == Some(1), || {
        format!("corpus exit {:?}", corpus.status.code())
    })?;
    check(corpus_time < Duration::from_secs(60), || {
        format!("corpus took {corpus_time:?}")
    })?;
    let blowup = fixtures().join("stress/blowup.air");
    let start = Instant::now();
    let timed = cli(&[
        "analyze",
        blowup.to_str().ok_or("path")?,
        "--timeout-secs",
        "1",
    ])?;
    let timeout_time = start.elapsed();
    check(timed.status.code() == Some(2), || {
        format!("blowup exit {:?}", timed.status.code())
    })?;
    let report: serde_json::Value =
        serde_json::from_slice(&timed.stdout).map_err(|e| e.to_string())?;
    check(report["stats"]["timed_out"] == true, || {
        "timed_out not set".into()
    })?;
    check(timeout_time < Duration::from_secs(10), || {
        format!("1 s limit took {timeout_time:?}")
    })?;
    Ok(format!(
        "byte-identical reports, corpus in {} ms, blowup stopped after {} ms with exit 2",
        corpus_time.as_millis(),
        timeout_time.as_millis()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("interface map exactness", phase_one_exactness),
        ("ordering-sensitive leak", ordering_sensitive_leak),
        ("differential soundness", differential_soundness),
        ("differential precision", differential_precision),
        ("semantics preservation", semantics_preservation),
        ("preference refinement", preference_refinement),
        ("intent resolution", intent_resolution),
        ("API level below 17", api_prior_to_17),
        ("corpus aggregation", corpus_aggregation),
        ("determinism and performance", determinism_and_performance),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
