//! Post-processing of raw flows: preference pairing, key and name
//! highlighting and intent action resolution.

pub mod fold;
pub mod intent;
pub mod prefs;
pub mod suspicious;

use std::collections::BTreeMap;

use crate::air::{Instr, MethodSig, Program, Site};

pub use fold::{fold_strings, ConstValue, StringConstMap};
pub use intent::{resolve_intent_action, IntentFinding, START_ACTIVITY};
pub use prefs::{match_preference_flows, report_preference_keys, PreferenceKey, PreferenceLeak};
pub use suspicious::{flag_suspicious_interface_names, is_suspicious};

/// Placeholder shown for keys that do not fold to a constant.
pub const UNRESOLVED: &str = "<unresolved>";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RefineError {
    #[error("flow witness is malformed at {0}")]
    MalformedWitness(Site),
}

/// String folding results for every application method.
#[derive(Debug, Clone, Default)]
pub struct Folds {
    maps: BTreeMap<MethodSig, StringConstMap>,
}

impl Folds {
    pub fn new(program: &Program) -> Folds {
        Folds {
            maps: program
                .app_methods()
                .map(|(sig, m)| (sig, fold_strings(m)))
                .collect(),
        }
    }

    pub fn method(&self, sig: &MethodSig) -> Option<&StringConstMap> {
        self.maps.get(sig)
    }

    /// Constant passed as argument `index` of the call at `site`.
    pub fn arg(&self, program: &Program, site: &Site, index: usize) -> Option<String> {
        let local = call_args(program, site)?.get(index)?.clone();
        self.maps
            .get(&site.method)?
            .get(site.index, &local)
            .map(str::to_string)
    }
}

/// The invocation at `site`: resolved target and argument locals.
pub(crate) fn call_at(program: &Program, site: &Site) -> Option<(MethodSig, Vec<String>)> {
    match program.method(&site.method)?.body.get(site.index)? {
        Instr::Invoke { target, args, .. } => Some((program.resolve_sig(target)?, args.clone())),
        _ => None,
    }
}

fn call_args(program: &Program, site: &Site) -> Option<Vec<String>> {
    call_at(program, site).map(|(_, a)| a)
}
