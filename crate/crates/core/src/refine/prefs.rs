//! Pairing of flows into and out of SharedPreferences by key and type.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{call_at, is_suspicious, Folds, UNRESOLVED};
use crate::air::{Instr, MethodSig, Program, Site};
use crate::callgraph::CallGraph;
use crate::interface::{all_interface_methods, WebviewInterfaceMap};
use crate::taint::Flow;

pub const PREFERENCES: &str = "SharedPreferences";
pub const EDITOR: &str = "SharedPreferences$Editor";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PreferenceLeak {
    pub put: Flow,
    pub get: Flow,
    /// `None` when either key does not fold to a constant.
    pub key: Option<String>,
    pub value_type: String,
    pub suspicious: bool,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PreferenceKey {
    pub key: String,
    pub suspicious: bool,
}

/// Key and value type of a preference write at `site`.
fn put_at(program: &Program, folds: &Folds, site: &Site) -> Option<(Option<String>, String)> {
    let (sig, _) = call_at(program, site)?;
    if sig.class != EDITOR || !sig.name.starts_with("put") {
        return None;
    }
    let ty = program.method(&sig)?.params.get(1)?.ty.clone();
    Some((folds.arg(program, site, 1), ty))
}

/// Key and value type of a preference read at `site`.
fn get_at(program: &Program, folds: &Folds, site: &Site) -> Option<(Option<String>, String)> {
    let (sig, _) = call_at(program, site)?;
    if sig.class != PREFERENCES || !sig.name.starts_with("get") {
        return None;
    }
    let ty = program.method(&sig)?.ret.clone();
    Some((folds.arg(program, site, 1), ty))
}

pub fn match_preference_flows(
    program: &Program,
    flows: &[Flow],
    folds: &Folds,
    suspicious_keys: &[String],
) -> Vec<PreferenceLeak> {
    let puts: Vec<(&Flow, Option<String>, String)> = flows
        .iter()
        .filter_map(|f| put_at(program, folds, &f.sink_site).map(|(k, t)| (f, k, t)))
        .collect();
    let gets: Vec<(&Flow, Option<String>, String)> = flows
        .iter()
        .filter_map(|f| get_at(program, folds, &f.source_site).map(|(k, t)| (f, k, t)))
        .collect();
    let mut out = BTreeSet::new();
    for (put, pk, pt) in &puts {
        for (get, gk, gt) in &gets {
            if pt != gt {
                continue;
            }
            let (key, low_confidence) = match (pk, gk) {
                (Some(a), Some(b)) if a == b => (Some(a.clone()), false),
                (Some(_), Some(_)) => continue,
                (Some(k), None) | (None, Some(k)) => (Some(k.clone()), true),
                (None, None) => (None, true),
            };
            let suspicious = !low_confidence
                && key
                    .as_deref()
                    .is_some_and(|k| is_suspicious(k, suspicious_keys));
            out.insert(PreferenceLeak {
                put: (*put).clone(),
                get: (*get).clone(),
                key,
                value_type: pt.clone(),
                suspicious,
                low_confidence,
            });
        }
    }
    out.into_iter().collect()
}

fn is_preference_call(sig: &MethodSig) -> bool {
    (sig.class == PREFERENCES && sig.name.starts_with("get"))
        || (sig.class == EDITOR && (sig.name.starts_with("put") || sig.name == "remove"))
}

/// Keys of every preference access reachable from an interface method.
pub fn report_preference_keys(
    program: &Program,
    graph: &CallGraph,
    map: &WebviewInterfaceMap,
    folds: &Folds,
    suspicious_keys: &[String],
) -> Vec<PreferenceKey> {
    let roots: Vec<MethodSig> = all_interface_methods(program, map)
        .into_iter()
        .map(|m| m.sig)
        .collect();
    let mut out = BTreeSet::new();
    for sig in graph.reachable_set(&roots) {
        let Some(m) = program
            .classes
            .get(&sig.class)
            .and_then(|c| c.method(&sig.name, sig.arity))
        else {
            continue;
        };
        for (pc, instr) in m.body.iter().enumerate() {
            let Instr::Invoke { target, .. } = instr else {
                continue;
            };
            let Some(resolved) = program.resolve_sig(target) else {
                continue;
            };
            if !is_preference_call(&resolved) {
                continue;
            }
            let site = Site::new(sig.clone(), pc);
            out.insert(match folds.arg(program, &site, 1) {
                Some(key) => PreferenceKey {
                    suspicious: is_suspicious(&key, suspicious_keys),
                    key,
                },
                None => PreferenceKey {
                    key: UNRESOLVED.to_string(),
                    suspicious: false,
                },
            });
        }
    }
    out.into_iter().collect()
}
