//! Flow- and context-insensitive inclusion-based points-to analysis.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::config::{Effect, ResolvedConfig};
use crate::air::{is_primitive, Instr, InvokeKind, MethodSig, Program, Site, THIS};
use crate::callgraph::cha_targets;

pub type ObjId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AbstractObject {
    /// Objects created by `new` at a site; their class is exact.
    Alloc { site: Site, class: String },
    /// Objects produced by a modeled call; their class is unknown.
    Opaque { site: Site, ty: String },
    /// Receiver and parameters of an entry method.
    Entry {
        method: MethodSig,
        index: usize,
        ty: String,
    },
}

impl AbstractObject {
    pub fn exact_class(&self) -> Option<&str> {
        match self {
            AbstractObject::Alloc { class, .. } => Some(class),
            _ => None,
        }
    }
}

static EMPTY: BTreeSet<ObjId> = BTreeSet::new();

#[derive(Debug, Clone, Default)]
pub struct PointsTo {
    objects: Vec<AbstractObject>,
    ids: HashMap<AbstractObject, ObjId>,
    vars: HashMap<(MethodSig, String), BTreeSet<ObjId>>,
    fields: HashMap<(ObjId, String), BTreeSet<ObjId>>,
    statics: HashMap<(String, String), BTreeSet<ObjId>>,
    rets: HashMap<MethodSig, BTreeSet<ObjId>>,
}

fn is_reference(ty: &str) -> bool {
    !is_primitive(ty)
}

/// Class that declares static field `field` as seen from `class`.
pub fn static_owner(program: &Program, class: &str, field: &str) -> String {
    program
        .ancestors(class)
        .into_iter()
        .find(|a| {
            program
                .class(a)
                .and_then(|c| c.field(field))
                .is_some_and(|f| f.is_static)
        })
        .unwrap_or_else(|| class.to_string())
}

impl PointsTo {
    pub fn object(&self, id: ObjId) -> &AbstractObject {
        &self.objects[id as usize]
    }

    pub fn var(&self, method: &MethodSig, local: &str) -> &BTreeSet<ObjId> {
        self.vars
            .get(&(method.clone(), local.to_string()))
            .unwrap_or(&EMPTY)
    }

    pub fn field(&self, obj: ObjId, field: &str) -> &BTreeSet<ObjId> {
        self.fields.get(&(obj, field.to_string())).unwrap_or(&EMPTY)
    }

    /// Objects reachable from `roots` through fields, roots included.
    pub fn reach(&self, roots: &BTreeSet<ObjId>) -> BTreeSet<ObjId> {
        let mut seen = roots.clone();
        let mut stack: Vec<ObjId> = roots.iter().copied().collect();
        while let Some(o) = stack.pop() {
            for ((src, _), targets) in &self.fields {
                if *src == o {
                    for &t in targets {
                        if seen.insert(t) {
                            stack.push(t);
                        }
                    }
                }
            }
        }
        seen
    }

    fn intern(&mut self, obj: AbstractObject) -> ObjId {
        if let Some(&id) = self.ids.get(&obj) {
            return id;
        }
        let id = self.objects.len() as ObjId;
        self.objects.push(obj.clone());
        self.ids.insert(obj, id);
        id
    }

    /// Targets of a call given the receiver's points-to set: CHA targets,
    /// narrowed by the exact classes of receiver objects when every object
    /// has a known class.
    pub fn call_targets(
        &self,
        program: &Program,
        caller: &MethodSig,
        kind: InvokeKind,
        target: &MethodSig,
        args: &[String],
    ) -> BTreeSet<MethodSig> {
        let cha = cha_targets(program, kind, target).unwrap_or_default();
        if kind != InvokeKind::Virtual {
            return cha;
        }
        let Some(recv) = args.first() else { return cha };
        let objs = self.var(caller, recv);
        if objs.is_empty() || objs.iter().any(|&o| self.object(o).exact_class().is_none()) {
            return cha;
        }
        objs.iter()
            .filter_map(|&o| {
                let class = self.object(o).exact_class()?;
                program.dispatch(class, &target.name, target.arity)
            })
            .filter(|t| cha.contains(t))
            .collect()
    }

    /// Receiver objects of `caller`'s call that may run `callee`.
    fn receivers_for(
        &self,
        program: &Program,
        caller: &MethodSig,
        recv: &str,
        callee: &MethodSig,
    ) -> BTreeSet<ObjId> {
        self.var(caller, recv)
            .iter()
            .copied()
            .filter(|&o| match self.object(o).exact_class() {
                None => true,
                Some(c) => program.dispatch(c, &callee.name, callee.arity).as_ref() == Some(callee),
            })
            .collect()
    }
}

fn add_all(set: &mut BTreeSet<ObjId>, more: &BTreeSet<ObjId>) -> bool {
    let before = set.len();
    set.extend(more.iter().copied());
    set.len() != before
}

pub fn analyze(program: &Program, config: &ResolvedConfig) -> PointsTo {
    let mut pt = PointsTo::default();
    for entry in &program.manifest.entry_points {
        let Some(m) = program.method(entry) else {
            continue;
        };
        let mut locals = Vec::new();
        if !m.is_static {
            locals.push((THIS.to_string(), entry.class.clone()));
        }
        locals.extend(m.params.iter().map(|p| (p.name.clone(), p.ty.clone())));
        for (index, (name, ty)) in locals.into_iter().enumerate() {
            if is_reference(&ty) {
                let id = pt.intern(AbstractObject::Entry {
                    method: entry.clone(),
                    index,
                    ty,
                });
                pt.vars.entry((entry.clone(), name)).or_default().insert(id);
            }
        }
    }
    let methods: Vec<(MethodSig, &crate::air::MethodDef)> = program.app_methods().collect();
    loop {
        let mut changed = false;
        for (sig, m) in &methods {
            for (pc, instr) in m.body.iter().enumerate() {
                changed |= step(&mut pt, program, config, sig, pc, instr);
            }
        }
        if !changed {
            return pt;
        }
    }
}

fn var_mut<'a>(pt: &'a mut PointsTo, m: &MethodSig, l: &str) -> &'a mut BTreeSet<ObjId> {
    pt.vars.entry((m.clone(), l.to_string())).or_default()
}

fn step(
    pt: &mut PointsTo,
    program: &Program,
    config: &ResolvedConfig,
    sig: &MethodSig,
    pc: usize,
    instr: &Instr,
) -> bool {
    let site = || Site::new(sig.clone(), pc);
    match instr {
        Instr::New { dst, class } => {
            let id = pt.intern(AbstractObject::Alloc {
                site: site(),
                class: class.clone(),
            });
            var_mut(pt, sig, dst).insert(id)
        }
        Instr::Assign { dst, src } => {
            let s = pt.var(sig, src).clone();
            add_all(var_mut(pt, sig, dst), &s)
        }
        Instr::Cast { dst, ty, src } => {
            let s: BTreeSet<ObjId> = pt
                .var(sig, src)
                .iter()
                .copied()
                .filter(|&o| match pt.object(o).exact_class() {
                    Some(c) => program.is_subtype_lenient(c, ty),
                    None => true,
                })
                .collect();
            add_all(var_mut(pt, sig, dst), &s)
        }
        Instr::InstanceGet { dst, base, field } => {
            let mut s = BTreeSet::new();
            for &o in pt.var(sig, base) {
                s.extend(pt.field(o, field).iter().copied());
            }
            add_all(var_mut(pt, sig, dst), &s)
        }
        Instr::InstancePut { base, field, src } => {
            let s = pt.var(sig, src).clone();
            let bases: Vec<ObjId> = pt.var(sig, base).iter().copied().collect();
            let mut changed = false;
            for o in bases {
                changed |= add_all(pt.fields.entry((o, field.clone())).or_default(), &s);
            }
            changed
        }
        Instr::StaticGet { dst, class, field } => {
            let owner = static_owner(program, class, field);
            let s = pt
                .statics
                .get(&(owner, field.clone()))
                .cloned()
                .unwrap_or_default();
            add_all(var_mut(pt, sig, dst), &s)
        }
        Instr::StaticPut { class, field, src } => {
            let owner = static_owner(program, class, field);
            let s = pt.var(sig, src).clone();
            add_all(pt.statics.entry((owner, field.clone())).or_default(), &s)
        }
        Instr::Return { value: Some(v) } => {
            let s = pt.var(sig, v).clone();
            add_all(pt.rets.entry(sig.clone()).or_default(), &s)
        }
        Instr::Invoke {
            dst,
            kind,
            target,
            args,
        } => {
            let mut changed = false;
            for callee in pt.call_targets(program, sig, *kind, target, args) {
                let Some(def) = program.method(&callee) else {
                    continue;
                };
                let (_, effect) = config.rules_for(program, &callee);
                if effect != Effect::Descend {
                    if let Some(d) = dst {
                        if is_reference(&def.ret) {
                            let id = pt.intern(AbstractObject::Opaque {
                                site: site(),
                                ty: def.ret.clone(),
                            });
                            changed |= var_mut(pt, sig, d).insert(id);
                        }
                        if !def.is_static && def.ret == callee.class {
                            let r = pt.var(sig, &args[0]).clone();
                            changed |= add_all(var_mut(pt, sig, d), &r);
                        }
                    }
                    continue;
                }
                let locals = def.entry_locals();
                for (i, (param, arg)) in locals.iter().zip(args).enumerate() {
                    let s = if i == 0 && !def.is_static {
                        pt.receivers_for(program, sig, arg, &callee)
                    } else {
                        pt.var(sig, arg).clone()
                    };
                    changed |= add_all(var_mut(pt, &callee, param), &s);
                }
                if let Some(d) = dst {
                    let r = pt.rets.get(&callee).cloned().unwrap_or_default();
                    changed |= add_all(var_mut(pt, sig, d), &r);
                }
            }
            changed
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::air::parse_program;
    use crate::taint::config::SourceSinkConfig;

    #[test]
    fn field_flow_and_cast_filter() {
        let p = parse_program(
            "manifest { target_api = 19; entry A.run/1; }
             class B { method <init>() : void { return; } }
             class C { method <init>() : void { return; } }
             class A {
               field f : Object;
               method run() : void {
                 b = new B; put this.f = b;
                 x = get this.f; y = cast C x; z = cast B x;
                 return;
               }
             }",
        )
        .unwrap();
        let cfg = SourceSinkConfig::default_config().resolve(&p).unwrap();
        let pt = analyze(&p, &cfg);
        let run = MethodSig::new("A", "run", 1);
        assert_eq!(pt.var(&run, "x").len(), 1);
        assert!(pt.var(&run, "y").is_empty());
        assert_eq!(pt.var(&run, "z").len(), 1);
    }
}
