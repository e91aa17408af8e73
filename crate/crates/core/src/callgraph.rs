//! Class hierarchy analysis call graph.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write;

use crate::air::{Instr, InvokeKind, MethodSig, Program, Site};
use crate::generate::is_attacker_method;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CallGraphError {
    #[error("{site}: call to unresolved method `{sig}`")]
    Unresolved { site: Site, sig: MethodSig },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CallEdge {
    pub site: Site,
    pub caller: MethodSig,
    pub callee: MethodSig,
}

#[derive(Debug, Clone, Default)]
pub struct CallGraph {
    pub nodes: BTreeSet<MethodSig>,
    pub edges: BTreeSet<CallEdge>,
    pub entries: BTreeSet<MethodSig>,
    succ: BTreeMap<MethodSig, BTreeSet<MethodSig>>,
    by_site: BTreeMap<Site, BTreeSet<MethodSig>>,
}

/// Possible targets of one call instruction under CHA.
pub fn cha_targets(
    program: &Program,
    kind: InvokeKind,
    target: &MethodSig,
) -> Option<BTreeSet<MethodSig>> {
    match kind {
        InvokeKind::Static | InvokeKind::Special => {
            program.resolve_sig(target).map(|s| BTreeSet::from([s]))
        }
        InvokeKind::Virtual => {
            program.resolve_sig(target)?;
            let subs = program.subclasses(&target.class).ok()?;
            Some(
                subs.iter()
                    .filter_map(|s| program.dispatch(s, &target.name, target.arity))
                    .collect(),
            )
        }
    }
}

pub fn build_callgraph(program: &Program) -> Result<CallGraph, CallGraphError> {
    let mut g = CallGraph::default();
    for class in program.all_classes() {
        for m in &class.methods {
            g.nodes.insert(m.sig(&class.name));
        }
    }
    for (caller, method) in program.app_methods() {
        if is_attacker_method(&caller) {
            g.entries.insert(caller.clone());
        }
        for (pc, instr) in method.body.iter().enumerate() {
            let Instr::Invoke { kind, target, .. } = instr else {
                continue;
            };
            let site = Site::new(caller.clone(), pc);
            let targets =
                cha_targets(program, *kind, target).ok_or_else(|| CallGraphError::Unresolved {
                    site: site.clone(),
                    sig: target.clone(),
                })?;
            for callee in &targets {
                g.succ
                    .entry(caller.clone())
                    .or_default()
                    .insert(callee.clone());
                g.edges.insert(CallEdge {
                    site: site.clone(),
                    caller: caller.clone(),
                    callee: callee.clone(),
                });
            }
            g.by_site.insert(site, targets);
        }
    }
    g.entries
        .extend(program.manifest.entry_points.iter().cloned());
    Ok(g)
}

impl CallGraph {
    /// Callees of one call site, empty for unknown sites.
    pub fn callees_at(&self, site: &Site) -> impl Iterator<Item = &MethodSig> {
        self.by_site.get(site).into_iter().flatten()
    }

    pub fn callees(&self, caller: &MethodSig) -> impl Iterator<Item = &MethodSig> {
        self.succ.get(caller).into_iter().flatten()
    }

    /// Every method reachable from `from`, including `from` itself.
    pub fn reachable_set<'a>(
        &self,
        from: impl IntoIterator<Item = &'a MethodSig>,
    ) -> BTreeSet<MethodSig> {
        let mut seen: BTreeSet<MethodSig> = BTreeSet::new();
        let mut queue: VecDeque<MethodSig> = VecDeque::new();
        for f in from {
            if self.nodes.contains(f) && seen.insert(f.clone()) {
                queue.push_back(f.clone());
            }
        }
        while let Some(m) = queue.pop_front() {
            for c in self.callees(&m) {
                if seen.insert(c.clone()) {
                    queue.push_back(c.clone());
                }
            }
        }
        seen
    }

    /// Text edge list, one `caller -> callee @site` per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let _ = writeln!(out, "{} -> {} @{}", e.caller, e.callee, e.site);
        }
        out
    }
}

/// True iff some method in `from` reaches `to` along call edges.
pub fn reachable<'a>(
    graph: &CallGraph,
    from: impl IntoIterator<Item = &'a MethodSig>,
    to: &MethodSig,
) -> bool {
    graph.reachable_set(from).contains(to)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::air::parse_program;

    #[test]
    fn empty_program_has_no_edges() {
        let p = parse_program("").unwrap();
        let g = build_callgraph(&p).unwrap();
        assert!(g.edges.is_empty());
        assert!(g.nodes.len() > 10);
    }

    #[test]
    fn unknown_signature_is_unreachable() {
        let p = parse_program("").unwrap();
        let g = build_callgraph(&p).unwrap();
        let ghost = MethodSig::new("Nope", "x", 1);
        assert!(!reachable(&g, [&ghost], &ghost));
    }
}
