mod common;

use std::collections::BTreeSet;

use babelview::air::{parse_program, render_program, MethodSig, Site};
use babelview::alarms::{
    aggregate_corpus, emit_report, Alarm, AlarmCategory, AlarmReport, Confidence, Evidence,
};
use babelview::oracle::{enumerate_sequences, interpret, DEFAULT_MAX_STEPS};
use babelview::refine::Folds;
use common::*;
use proptest::prelude::*;

fn category() -> impl Strategy<Value = AlarmCategory> {
    proptest::sample::select(AlarmCategory::ALL.to_vec())
}

fn report(app: String) -> impl Strategy<Value = AlarmReport> {
    proptest::collection::vec(
        (
            category(),
            any::<bool>(),
            proptest::option::of("[a-z]{1,6}"),
        ),
        0..5,
    )
    .prop_map(move |alarms| AlarmReport {
        alarms: alarms
            .into_iter()
            .map(|(category, high, method)| Alarm {
                category,
                confidence: if high {
                    Confidence::High
                } else {
                    Confidence::Low
                },
                attribution: method.map(|m| MethodSig::new("Bridge", m, 1)),
                evidence: Evidence::Manifest {
                    target_api: 16,
                    interface_classes: vec!["Bridge".into()],
                },
            })
            .collect(),
        ..AlarmReport::empty(&app)
    })
}

fn corpus() -> impl Strategy<Value = Vec<AlarmReport>> {
    (1usize..8).prop_flat_map(|n| {
        (0..n)
            .map(|i| report(format!("app{i}")))
            .collect::<Vec<_>>()
    })
}

#[derive(Debug, Clone)]
enum Op {
    Const(usize, String),
    Copy(usize, usize),
    Append(usize),
    Render(usize),
    Clear,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0..3usize, "[a-z/:.]{0,6}").prop_map(|(d, s)| Op::Const(d, s)),
        (0..3usize, 0..3usize).prop_map(|(d, s)| Op::Copy(d, s)),
        (0..3usize).prop_map(Op::Append),
        (0..3usize).prop_map(Op::Render),
        Just(Op::Clear),
    ]
}

fn render_ops(ops: &[Op], out: &mut Vec<String>) {
    for op in ops {
        out.push(match op {
            Op::Const(d, s) => format!("s{d} = \"{s}\";"),
            Op::Copy(d, s) => format!("s{d} = s{s};"),
            Op::Append(s) => format!("t = vcall StringBuilder.append/2(sb, s{s});"),
            Op::Render(d) => format!("s{d} = vcall StringBuilder.toString/1(sb);"),
            Op::Clear => "vcall StringBuilder.setLength/2(sb, zero);".to_string(),
        });
    }
}

/// An entry method running `head`, optionally `branch`, then logging two locals.
fn string_program(head: &[Op], branch: &[Op]) -> String {
    let mut body = vec![
        "s0 = \"\";".to_string(),
        "s1 = \"\";".to_string(),
        "s2 = \"\";".to_string(),
        "zero = 0;".to_string(),
        "sb = new StringBuilder;".to_string(),
        "kcall StringBuilder.<init>/1(sb);".to_string(),
    ];
    render_ops(head, &mut body);
    body.push("ifnd skip;".to_string());
    render_ops(branch, &mut body);
    body.push("skip:".to_string());
    body.push("r = scall Log.d/2(s0, s1);".to_string());
    body.push("return;".to_string());
    format!(
        "manifest {{ target_api = 19; entry Main.onCreate/2; }}\n\
         class Main extends Activity {{\n  method onCreate(b : Bundle) : void {{\n    {}\n  }}\n}}\n",
        body.join("\n    ")
    )
}

proptest! {
    #[test]
    fn phi_matrix_is_symmetric_and_bounded(reports in corpus()) {
        let s = aggregate_corpus(&reports).unwrap();
        for (i, row) in s.correlation.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                prop_assert_eq!(*v, s.correlation[j][i]);
                if let Some(x) = v {
                    prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(x));
                }
            }
            if let Some(d) = row[i] {
                prop_assert!((d - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn report_order_does_not_matter(reports in corpus(), seed in any::<u64>()) {
        let mut shuffled = reports.clone();
        let n = shuffled.len();
        shuffled.rotate_left((seed as usize) % n);
        if seed % 2 == 0 {
            shuffled.reverse();
        }
        prop_assert_eq!(aggregate_corpus(&reports).unwrap(), aggregate_corpus(&shuffled).unwrap());
    }

    #[test]
    fn counts_are_apps_with_category(reports in corpus()) {
        let s = aggregate_corpus(&reports).unwrap();
        for c in AlarmCategory::ALL {
            let want = reports.iter().filter(|r| r.alarms.iter().any(|a| a.category == c)).count();
            prop_assert_eq!(s.counts[&c], want);
        }
    }

    #[test]
    fn report_json_round_trips(r in report("app".into())) {
        let json = emit_report(&r);
        let back: AlarmReport = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(emit_report(&back), json);
        prop_assert_eq!(back, r);
    }

    #[test]
    fn escaped_strings_round_trip(value in "[ -~\n\t\"\\\\]{0,12}") {
        let escaped = value.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n").replace('\t', "\\t");
        let text = format!("class A {{ method f() : void {{ s = \"{escaped}\"; return; }} }}");
        let p = parse_program(&text).unwrap();
        let again = parse_program(&render_program(&p)).unwrap();
        prop_assert_eq!(p.classes, again.classes);
    }

    #[test]
    fn sequence_count_is_geometric(k in 0usize..4, len in 0usize..4) {
        let methods: Vec<MethodSig> = (0..k).map(|i| MethodSig::new("B", format!("m{i}"), 1)).collect();
        let seqs = enumerate_sequences(&methods, len);
        let want: usize = (0..=len).map(|i| k.pow(i as u32)).sum();
        prop_assert_eq!(seqs.len(), want);
        prop_assert_eq!(seqs.iter().collect::<BTreeSet<_>>().len(), want);
        prop_assert!(seqs.windows(2).all(|w| w[0].len() <= w[1].len()));
    }

    #[test]
    fn folded_strings_agree_with_execution(
        head in proptest::collection::vec(op(), 0..8),
        branch in proptest::collection::vec(op(), 0..4),
    ) {
        let program = parse_program(&string_program(&head, &branch)).unwrap();
        let trace = interpret(&program, &[], DEFAULT_MAX_STEPS).unwrap();
        let folds = Folds::new(&program);
        let sig = MethodSig::new("Main", "onCreate", 2);
        let log = program.method(&sig).unwrap().body.len() - 2;
        for i in 0..2 {
            let site = Site::new(sig.clone(), log);
            let seen = &trace.observed[&(site.clone(), i)];
            if let Some(c) = folds.arg(&program, &site, i) {
                prop_assert_eq!(seen, &BTreeSet::from([Some(c)]));
            }
        }
    }
}

#[test]
fn fixtures_print_and_parse_to_a_fixpoint() {
    for app in labels().apps {
        let p = load(&app.name);
        let printed = render_program(&p);
        let again = parse_program(&printed).unwrap_or_else(|e| panic!("{}: {e}", app.name));
        assert_eq!(p.classes, again.classes, "{}", app.name);
        assert_eq!(p.manifest, again.manifest, "{}", app.name);
        assert_eq!(render_program(&again), printed, "{}", app.name);
    }
}

#[test]
fn zero_variance_is_null() {
    let both = |app: &str| AlarmReport {
        alarms: [AlarmCategory::OpenFile, AlarmCategory::WriteFile]
            .into_iter()
            .map(|category| Alarm {
                category,
                confidence: Confidence::High,
                attribution: None,
                evidence: Evidence::Manifest {
                    target_api: 16,
                    interface_classes: Vec::new(),
                },
            })
            .collect(),
        ..AlarmReport::empty(app)
    };
    let s = aggregate_corpus(&[both("a"), both("b")]).unwrap();
    assert_eq!(
        s.coefficient(AlarmCategory::OpenFile, AlarmCategory::WriteFile),
        None
    );
    let json = serde_json::to_value(&s).unwrap();
    assert!(json["correlation"][0][0].is_null());
    assert!(aggregate_corpus(&[]).is_err());
}

#[test]
fn builder_text_folds_across_a_branch() {
    let head = [
        Op::Const(0, "a".into()),
        Op::Append(0),
        Op::Append(0),
        Op::Render(1),
    ];
    let program = parse_program(&string_program(&head, &[Op::Const(2, "x".into())])).unwrap();
    let sig = MethodSig::new("Main", "onCreate", 2);
    let site = Site::new(sig.clone(), program.method(&sig).unwrap().body.len() - 2);
    let folds = Folds::new(&program);
    assert_eq!(folds.arg(&program, &site, 0).as_deref(), Some("a"));
    assert_eq!(folds.arg(&program, &site, 1).as_deref(), Some("aa"));
    let trace = interpret(&program, &[], DEFAULT_MAX_STEPS).unwrap();
    assert_eq!(
        trace.observed[&(site, 1)],
        BTreeSet::from([Some("aa".to_string())])
    );
}
