//! Recovering the action of Intents that reach `startActivity`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{call_at, Folds, RefineError};
use crate::air::{Instr, InvokeKind, MethodSig, Program, Site};
use crate::callgraph::{reachable, CallGraph};
use crate::generate::is_attacker_method;
use crate::taint::{AbstractObject, Flow, ObjId, PointsTo};

pub const START_ACTIVITY: &str = "start-activity";
pub const INTENT: &str = "Intent";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntentFinding {
    pub flow: Flow,
    /// Resolved action, `None` when unknown.
    pub action: Option<String>,
    pub constructor_site: Option<Site>,
    pub set_action_site: Option<Site>,
    /// Target package when set from a constant.
    pub package: Option<String>,
    /// The Intent launches another application by package.
    pub launches_app: bool,
    pub stack_consistent: bool,
}

/// Calls in application code whose receiver may be `obj`.
fn calls_on(program: &Program, pts: &PointsTo, obj: ObjId, name: &str, arity: usize) -> Vec<Site> {
    let mut out = Vec::new();
    for (sig, m) in program.app_methods() {
        for (pc, instr) in m.body.iter().enumerate() {
            let Instr::Invoke { target, args, .. } = instr else {
                continue;
            };
            if target.name != name || target.arity != arity {
                continue;
            }
            let Some(resolved) = program.resolve_sig(target) else {
                continue;
            };
            if resolved.class != INTENT {
                continue;
            }
            if args
                .first()
                .is_some_and(|r| pts.var(&sig, r).contains(&obj))
            {
                out.push(Site::new(sig.clone(), pc));
            }
        }
    }
    out
}

/// The constructor call initializing the object allocated at `new_site`.
fn constructor_of(program: &Program, new_site: &Site) -> Option<(Site, usize)> {
    let m = program.method(&new_site.method)?;
    let Instr::New { dst, .. } = m.body.get(new_site.index)? else {
        return None;
    };
    for (pc, instr) in m.body.iter().enumerate().skip(new_site.index + 1) {
        if let Instr::Invoke {
            kind: InvokeKind::Special,
            target,
            args,
            ..
        } = instr
        {
            if target.is_constructor() && args.first() == Some(dst) {
                return Some((Site::new(new_site.method.clone(), pc), target.arity));
            }
        }
        if instr.def() == Some(dst.as_str()) {
            return None;
        }
    }
    None
}

#[derive(Default)]
struct Resolution {
    action: Option<String>,
    constructor_site: Option<Site>,
    set_action_site: Option<Site>,
    package: Option<String>,
    launches_app: bool,
}

fn resolve_object(
    program: &Program,
    pts: &PointsTo,
    folds: &Folds,
    obj: ObjId,
) -> Option<Resolution> {
    let mut r = Resolution::default();
    match pts.object(obj) {
        AbstractObject::Alloc { site, class } => {
            if !program.is_subtype_lenient(class, INTENT) {
                return None;
            }
            if let Some((ctor, arity)) = constructor_of(program, site) {
                if arity >= 2 {
                    r.action = folds.arg(program, &ctor, 1);
                }
                r.constructor_site = Some(ctor);
            }
            if r.action.is_none() {
                let sets = calls_on(program, pts, obj, "setAction", 2);
                let values: BTreeSet<Option<String>> =
                    sets.iter().map(|s| folds.arg(program, s, 1)).collect();
                r.set_action_site = sets.first().cloned();
                if values.len() == 1 {
                    r.action = values.into_iter().next().flatten();
                }
            }
            let pkgs: Vec<Site> = calls_on(program, pts, obj, "setPackage", 2)
                .into_iter()
                .chain(calls_on(program, pts, obj, "setClassName", 3))
                .collect();
            r.launches_app = !pkgs.is_empty();
            r.package = pkgs.first().and_then(|s| folds.arg(program, s, 1));
        }
        AbstractObject::Opaque { site, .. } => {
            let (sig, _) = call_at(program, site)?;
            if sig.class == INTENT {
                return None;
            }
            if sig.name == "getLaunchIntentForPackage" {
                r.launches_app = true;
                r.package = folds.arg(program, site, 1);
            }
        }
        AbstractObject::Entry { .. } => {}
    }
    Some(r)
}

pub fn resolve_intent_action(
    flow: &Flow,
    program: &Program,
    graph: &CallGraph,
    pts: &PointsTo,
    folds: &Folds,
) -> Result<IntentFinding, RefineError> {
    let malformed = || RefineError::MalformedWitness(flow.sink_site.clone());
    let (sig, args) = call_at(program, &flow.sink_site).ok_or_else(malformed)?;
    if sig.name != "startActivity" || args.len() != 2 {
        return Err(malformed());
    }
    let objs = pts.var(&flow.sink_site.method, &args[1]);
    let resolutions: Vec<Resolution> = objs
        .iter()
        .filter_map(|&o| resolve_object(program, pts, folds, o))
        .collect();
    let actions: BTreeSet<Option<String>> = resolutions.iter().map(|r| r.action.clone()).collect();
    let action = if actions.len() == 1 {
        actions.into_iter().next().flatten()
    } else {
        None
    };
    let attackers: Vec<MethodSig> = graph
        .entries
        .iter()
        .filter(|m| is_attacker_method(m))
        .cloned()
        .collect();
    let stack_consistent = flow
        .attribution
        .as_ref()
        .and_then(|a| program.resolve_sig(a))
        .is_some_and(|a| reachable(graph, &attackers, &a));
    Ok(IntentFinding {
        flow: flow.clone(),
        action,
        constructor_site: resolutions.iter().find_map(|r| r.constructor_site.clone()),
        set_action_site: resolutions.iter().find_map(|r| r.set_action_site.clone()),
        package: resolutions.iter().find_map(|r| r.package.clone()),
        launches_app: resolutions.iter().any(|r| r.launches_app),
        stack_consistent,
    })
}
