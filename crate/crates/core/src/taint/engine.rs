//! Per-fact worklist taint propagation with call-string contexts.
//!
//! Facts on locals follow def-use chains inside a method. Facts on heap
//! locations are rooted at abstract objects from the points-to pre-pass and
//! travel along control flow, into callees and back, so the heap is
//! flow-sensitive with weak updates. A distinguished zero fact reaches every
//! reachable point and generates source facts.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::access_path::{AccessPath, Root};
use super::config::{Effect, Model, Position, ResolvedConfig, WrapKind};
use super::pointsto::{self, static_owner, ObjId, PointsTo};
use crate::air::{Instr, MethodDef, MethodSig, Program, Site};
use crate::generate::{is_attacker_method, is_generated_class};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub max_access_path: usize,
    pub call_depth: usize,
    pub timeout: Option<Duration>,
    /// Treat calls to generated attacker methods as no-ops.
    pub disable_attacker: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            max_access_path: 3,
            call_depth: 2,
            timeout: Some(Duration::from_secs(900)),
            disable_attacker: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaintFact {
    pub path: AccessPath,
    pub label: String,
    pub source_site: Site,
    pub attribution: Option<MethodSig>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Flow {
    pub source: String,
    pub source_site: Site,
    pub sink: String,
    pub sink_site: Site,
    /// Interface method whose invocation by the attacker enabled the flow.
    pub attribution: Option<MethodSig>,
    pub witness: Vec<Site>,
    /// Call string at the sink, innermost call last.
    pub context: Vec<Site>,
}

impl Flow {
    /// Identity of a flow, ignoring how it was witnessed.
    pub fn key(&self) -> (String, Site, String, Site, Option<MethodSig>) {
        (
            self.source.clone(),
            self.source_site.clone(),
            self.sink.clone(),
            self.sink_site.clone(),
            self.attribution.clone(),
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaintStats {
    pub iterations: u64,
    pub units: usize,
    pub facts: usize,
}

#[derive(Debug, Clone)]
pub struct TaintResult {
    pub flows: Vec<Flow>,
    /// The fixpoint was cut short; `flows` may be incomplete.
    pub timed_out: bool,
    pub stats: TaintStats,
    pub pts: PointsTo,
}

pub fn flows_to_sink<'a>(flows: &'a [Flow], sink: &str) -> Vec<&'a Flow> {
    flows.iter().filter(|f| f.sink == sink).collect()
}

type UnitId = u32;
type FactId = u32;
const ZERO: FactId = FactId::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct UnitKey {
    method: MethodSig,
    context: Vec<Site>,
    attribution: Option<MethodSig>,
}

struct Unit<'p> {
    key: UnitKey,
    def: &'p MethodDef,
    reached: Vec<HashSet<FactId>>,
    callers: BTreeSet<(UnitId, u32)>,
}

type Node = (UnitId, u32, FactId);

struct Engine<'p> {
    program: &'p Program,
    config: &'p ResolvedConfig,
    opts: &'p RunOptions,
    pts: PointsTo,
    units: Vec<Unit<'p>>,
    unit_ids: HashMap<UnitKey, UnitId>,
    facts: Vec<TaintFact>,
    fact_ids: HashMap<TaintFact, FactId>,
    worklist: VecDeque<Node>,
    preds: HashMap<Node, Node>,
    flows: BTreeMap<(String, Site, String, Site, Option<MethodSig>), Flow>,
    targets: HashMap<Site, Vec<(MethodSig, Model, Effect, bool)>>,
    reach: HashMap<(MethodSig, String), BTreeSet<ObjId>>,
    iterations: u64,
}

pub fn run_taint(program: &Program, config: &ResolvedConfig, opts: &RunOptions) -> TaintResult {
    let start = Instant::now();
    let pts = pointsto::analyze(program, config);
    let mut engine = Engine {
        program,
        config,
        opts,
        pts,
        units: Vec::new(),
        unit_ids: HashMap::new(),
        facts: Vec::new(),
        fact_ids: HashMap::new(),
        worklist: VecDeque::new(),
        preds: HashMap::new(),
        flows: BTreeMap::new(),
        targets: HashMap::new(),
        reach: HashMap::new(),
        iterations: 0,
    };
    for entry in &program.manifest.entry_points {
        let key = UnitKey {
            method: entry.clone(),
            context: Vec::new(),
            attribution: None,
        };
        if let Some(u) = engine.unit(key) {
            engine.propagate(u, 0, ZERO, None);
        }
    }
    let mut timed_out = false;
    while let Some(node) = engine.worklist.pop_front() {
        engine.iterations += 1;
        if engine.iterations.is_multiple_of(256) {
            if let Some(limit) = opts.timeout {
                if start.elapsed() >= limit {
                    timed_out = true;
                    break;
                }
            }
        }
        engine.process(node);
    }
    TaintResult {
        flows: engine.flows.into_values().collect(),
        timed_out,
        stats: TaintStats {
            iterations: engine.iterations,
            units: engine.units.len(),
            facts: engine.facts.len(),
        },
        pts: engine.pts,
    }
}

impl<'p> Engine<'p> {
    fn unit(&mut self, key: UnitKey) -> Option<UnitId> {
        if let Some(&id) = self.unit_ids.get(&key) {
            return Some(id);
        }
        let def = self.program.method(&key.method)?;
        let id = self.units.len() as UnitId;
        self.units.push(Unit {
            key: key.clone(),
            def,
            reached: vec![HashSet::new(); def.body.len() + 1],
            callers: BTreeSet::new(),
        });
        self.unit_ids.insert(key, id);
        Some(id)
    }

    fn fact(&mut self, fact: TaintFact) -> FactId {
        if let Some(&id) = self.fact_ids.get(&fact) {
            return id;
        }
        let id = self.facts.len() as FactId;
        self.facts.push(fact.clone());
        self.fact_ids.insert(fact, id);
        id
    }

    fn propagate(&mut self, unit: UnitId, pc: usize, fact: FactId, pred: Option<Node>) {
        let u = &mut self.units[unit as usize];
        if pc >= u.reached.len() || !u.reached[pc].insert(fact) {
            return;
        }
        let node = (unit, pc as u32, fact);
        if let Some(p) = pred {
            self.preds.insert(node, p);
        }
        self.worklist.push_back(node);
    }

    fn derive(
        &mut self,
        from: &TaintFact,
        path: AccessPath,
        attribution: Option<MethodSig>,
    ) -> FactId {
        let k = self.opts.max_access_path;
        self.fact(TaintFact {
            path: path.truncate(k),
            label: from.label.clone(),
            source_site: from.source_site.clone(),
            attribution,
        })
    }

    fn var(&self, unit: UnitId, local: &str) -> BTreeSet<ObjId> {
        self.pts
            .var(&self.units[unit as usize].key.method, local)
            .clone()
    }

    fn reach_of(&mut self, unit: UnitId, local: &str) -> &BTreeSet<ObjId> {
        let method = self.units[unit as usize].key.method.clone();
        let key = (method, local.to_string());
        if !self.reach.contains_key(&key) {
            let roots = self.pts.var(&key.0, local).clone();
            let r = self.pts.reach(&roots);
            self.reach.insert(key.clone(), r);
        }
        &self.reach[&key]
    }

    /// Does the fact taint the value held in `local` itself?
    fn shallow(&self, unit: UnitId, fact: &TaintFact, local: &str) -> bool {
        match &fact.path.root {
            Root::Local(l) => l == local,
            Root::Object(o) => fact.path.fields.is_empty() && self.var(unit, local).contains(o),
            _ => false,
        }
    }

    /// Does the fact taint anything reachable from `local`?
    fn deep(&mut self, unit: UnitId, fact: &TaintFact, local: &str) -> bool {
        match &fact.path.root {
            Root::Local(l) => l == local,
            Root::Object(o) => {
                let o = *o;
                self.reach_of(unit, local).contains(&o)
            }
            _ => false,
        }
    }

    /// Facts marking `local` and the objects it may point to as tainted.
    fn taint_local(
        &mut self,
        unit: UnitId,
        from: &TaintFact,
        local: &str,
        attr: Option<MethodSig>,
    ) -> Vec<FactId> {
        let mut out = vec![self.derive(from, AccessPath::local(local), attr.clone())];
        for o in self.var(unit, local) {
            out.push(self.derive(from, AccessPath::new(Root::Object(o)), attr.clone()));
        }
        out
    }

    fn call_targets(&mut self, unit: UnitId, pc: usize) -> Vec<(MethodSig, Model, Effect, bool)> {
        let u = &self.units[unit as usize];
        let site = Site::new(u.key.method.clone(), pc);
        if let Some(t) = self.targets.get(&site) {
            return t.clone();
        }
        let Instr::Invoke {
            kind, target, args, ..
        } = &u.def.body[pc]
        else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for callee in self
            .pts
            .call_targets(self.program, &u.key.method, *kind, target, args)
        {
            if self.opts.disable_attacker && is_attacker_method(&callee) {
                continue;
            }
            let Some(def) = self.program.method(&callee) else {
                continue;
            };
            let (model, effect) = self.config.rules_for(self.program, &callee);
            out.push((callee, model, effect, def.is_static));
        }
        self.targets.insert(site, out.clone());
        out
    }

    fn process(&mut self, node: Node) {
        let (unit, pc, d) = node;
        let pc = pc as usize;
        let def = self.units[unit as usize].def;
        if pc == def.body.len() {
            self.exit(unit, d, node);
            return;
        }
        let fact = (d != ZERO).then(|| self.facts[d as usize].clone());
        let instr = &def.body[pc];
        let succs = def.successors(pc);
        let mut out: Vec<FactId> = Vec::new();
        let mut to_next_only: Vec<FactId> = Vec::new();
        let local = |f: &TaintFact, l: &str| f.path.is_local(l);
        match (instr, &fact) {
            (Instr::Invoke { dst, args, .. }, _) => {
                self.invoke(
                    unit,
                    pc,
                    d,
                    fact.as_ref(),
                    dst.as_deref(),
                    args,
                    &mut to_next_only,
                );
            }
            (_, None) => out.push(ZERO),
            (
                Instr::ConstString { dst, .. }
                | Instr::ConstInt { dst, .. }
                | Instr::New { dst, .. },
                Some(f),
            ) => {
                if !local(f, dst) {
                    out.push(d);
                }
            }
            (Instr::Assign { dst, src } | Instr::Cast { dst, src, .. }, Some(f)) => {
                if local(f, src) {
                    out.push(self.derive(
                        f,
                        f.path.rebase(Root::Local(dst.clone())),
                        f.attribution.clone(),
                    ));
                }
                if !local(f, dst) || dst == src {
                    out.push(d);
                }
            }
            (Instr::InstanceGet { dst, base, field }, Some(f)) => {
                let covers = match &f.path.root {
                    Root::Local(l) => l == base,
                    Root::Object(o) => self.var(unit, base).contains(o),
                    _ => false,
                };
                if covers {
                    if let Some(p) = f.path.read(field, Root::Local(dst.clone())) {
                        out.push(self.derive(f, p, f.attribution.clone()));
                    }
                }
                if !local(f, dst) {
                    out.push(d);
                }
            }
            (Instr::InstancePut { base, field, src }, Some(f)) => {
                out.push(d);
                if local(f, src) {
                    let attr = f
                        .attribution
                        .clone()
                        .or(self.units[unit as usize].key.attribution.clone());
                    let objs = self.var(unit, base);
                    if objs.is_empty() {
                        let p = f.path.prepend(
                            Root::Local(base.clone()),
                            field,
                            self.opts.max_access_path,
                        );
                        out.push(self.derive(f, p, attr.clone()));
                    }
                    for o in objs {
                        let p = f
                            .path
                            .prepend(Root::Object(o), field, self.opts.max_access_path);
                        out.push(self.derive(f, p, attr.clone()));
                    }
                }
            }
            (Instr::StaticGet { dst, class, field }, Some(f)) => {
                let owner = static_owner(self.program, class, field);
                if f.path.root == Root::Static(owner) {
                    if let Some(p) = f.path.read(field, Root::Local(dst.clone())) {
                        out.push(self.derive(f, p, f.attribution.clone()));
                    }
                }
                if !local(f, dst) {
                    out.push(d);
                }
            }
            (Instr::StaticPut { class, field, src }, Some(f)) => {
                out.push(d);
                if local(f, src) {
                    let owner = static_owner(self.program, class, field);
                    let attr = f
                        .attribution
                        .clone()
                        .or(self.units[unit as usize].key.attribution.clone());
                    let p = f
                        .path
                        .prepend(Root::Static(owner), field, self.opts.max_access_path);
                    out.push(self.derive(f, p, attr));
                }
            }
            (Instr::Return { value }, Some(f)) => match &f.path.root {
                Root::Local(l) if Some(l) == value.as_ref() => {
                    out.push(self.derive(f, f.path.rebase(Root::Return), f.attribution.clone()));
                }
                Root::Object(_) | Root::Static(_) => out.push(d),
                _ => {}
            },
            (_, Some(_)) => out.push(d),
        }
        for s in succs {
            for &f in &out {
                self.propagate(unit, s, f, Some(node));
            }
        }
        for f in to_next_only {
            self.propagate(unit, pc + 1, f, Some(node));
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn invoke(
        &mut self,
        unit: UnitId,
        pc: usize,
        d: FactId,
        fact: Option<&TaintFact>,
        dst: Option<&str>,
        args: &[String],
        out: &mut Vec<FactId>,
    ) {
        let targets = self.call_targets(unit, pc);
        let key = self.units[unit as usize].key.clone();
        let site = Site::new(key.method.clone(), pc);
        let mut around = fact.is_none_or(|f| dst.is_none_or(|x| !f.path.is_local(x)));
        for (callee, model, effect, is_static) in &targets {
            if let Some(f) = fact {
                for (label, positions) in &model.sinks {
                    let observed = positions
                        .iter()
                        .filter_map(|p| p.arg_index(*is_static))
                        .filter_map(|i| args.get(i));
                    let mut hit = false;
                    for a in observed {
                        hit |= self.deep(unit, f, a);
                    }
                    if hit {
                        self.record_flow(unit, pc, d, f, label);
                    }
                }
            } else {
                for (label, positions) in &model.sources {
                    let seed = TaintFact {
                        path: AccessPath::local("$"),
                        label: label.clone(),
                        source_site: site.clone(),
                        attribution: key.attribution.clone(),
                    };
                    for p in positions {
                        match p {
                            Position::Return => {
                                if let Some(x) = dst {
                                    out.push(self.derive(
                                        &seed,
                                        AccessPath::local(x),
                                        seed.attribution.clone(),
                                    ));
                                }
                            }
                            _ => {
                                if let Some(a) = p.arg_index(*is_static).and_then(|i| args.get(i)) {
                                    out.extend(self.taint_local(
                                        unit,
                                        &seed,
                                        a,
                                        seed.attribution.clone(),
                                    ));
                                }
                            }
                        }
                    }
                }
            }
            match effect {
                Effect::Descend => self.enter(unit, pc, d, fact, callee, args),
                Effect::Wrap(WrapKind::Propagate) => {
                    let Some(f) = fact else { continue };
                    if args.iter().any(|a| self.shallow(unit, f, a)) {
                        if !is_static {
                            out.extend(self.taint_local(unit, f, &args[0], f.attribution.clone()));
                        }
                        if let Some(x) = dst {
                            out.push(self.derive(f, AccessPath::local(x), f.attribution.clone()));
                        }
                    }
                }
                Effect::Wrap(WrapKind::Clear) => {
                    let Some(f) = fact else { continue };
                    if targets.len() == 1 && !is_static {
                        let recv = &args[0];
                        let objs = self.var(unit, recv);
                        let cleared = match &f.path.root {
                            Root::Local(l) => l == recv,
                            Root::Object(o) => {
                                f.path.fields.is_empty() && objs.len() == 1 && objs.contains(o)
                            }
                            _ => false,
                        };
                        if cleared {
                            around = false;
                        }
                    }
                }
                Effect::Wrap(WrapKind::Ignore) | Effect::Rules => {}
            }
        }
        if around {
            out.push(d);
        }
    }

    fn enter(
        &mut self,
        unit: UnitId,
        pc: usize,
        d: FactId,
        fact: Option<&TaintFact>,
        callee: &MethodSig,
        args: &[String],
    ) {
        let key = self.units[unit as usize].key.clone();
        let site = Site::new(key.method.clone(), pc);
        let iface_call = is_attacker_method(&key.method) && !is_generated_class(&callee.class);
        let attribution = if iface_call {
            match &self.units[unit as usize].def.body[pc] {
                Instr::Invoke { target, .. } => Some(target.clone()),
                _ => None,
            }
        } else if is_attacker_method(callee) {
            None
        } else {
            key.attribution.clone()
        };
        let mut context = key.context.clone();
        if self.opts.call_depth > 0 {
            context.push(site);
            if context.len() > self.opts.call_depth {
                context.remove(0);
            }
        }
        let Some(v) = self.unit(UnitKey {
            method: callee.clone(),
            context,
            attribution: attribution.clone(),
        }) else {
            return;
        };
        let node = (unit, pc as u32, d);
        let mut entry = Vec::new();
        match fact {
            None => entry.push(ZERO),
            Some(f) => match &f.path.root {
                Root::Local(l) => {
                    let params: Vec<String> = self.units[v as usize]
                        .def
                        .entry_locals()
                        .into_iter()
                        .map(str::to_string)
                        .collect();
                    for (param, arg) in params.iter().zip(args) {
                        if arg == l {
                            let attr = if iface_call {
                                f.attribution.clone().or(attribution.clone())
                            } else {
                                f.attribution.clone()
                            };
                            entry.push(self.derive(
                                f,
                                f.path.rebase(Root::Local(param.clone())),
                                attr,
                            ));
                        }
                    }
                }
                Root::Object(_) | Root::Static(_) => entry.push(d),
                Root::Return => {}
            },
        }
        for e in entry {
            self.propagate(v, 0, e, Some(node));
        }
        if self.units[v as usize].callers.insert((unit, pc as u32)) {
            let exit = self.units[v as usize].def.body.len();
            let done: Vec<FactId> = self.units[v as usize].reached[exit]
                .iter()
                .copied()
                .collect();
            for f in done {
                self.return_to(v, f, (v, exit as u32, f), unit, pc);
            }
        }
    }

    fn exit(&mut self, unit: UnitId, d: FactId, node: Node) {
        if d == ZERO {
            return;
        }
        let callers: Vec<(UnitId, u32)> =
            self.units[unit as usize].callers.iter().copied().collect();
        for (caller, pc) in callers {
            self.return_to(unit, d, node, caller, pc as usize);
        }
    }

    fn return_to(&mut self, callee: UnitId, d: FactId, node: Node, caller: UnitId, pc: usize) {
        if d == ZERO {
            return;
        }
        let f = self.facts[d as usize].clone();
        let Instr::Invoke { dst, .. } = &self.units[caller as usize].def.body[pc] else {
            return;
        };
        let dst = dst.clone();
        let iface_return = is_attacker_method(&self.units[caller as usize].key.method)
            && !is_generated_class(&self.units[callee as usize].key.method.class);
        let out = match &f.path.root {
            Root::Return => {
                let Some(x) = dst else { return };
                let attr = if iface_return {
                    self.units[callee as usize].key.attribution.clone()
                } else {
                    f.attribution.clone()
                };
                self.derive(&f, f.path.rebase(Root::Local(x)), attr)
            }
            Root::Object(_) | Root::Static(_) => d,
            Root::Local(_) => return,
        };
        self.propagate(caller, pc + 1, out, Some(node));
    }

    fn record_flow(&mut self, unit: UnitId, pc: usize, d: FactId, f: &TaintFact, sink: &str) {
        let u = &self.units[unit as usize];
        let here = Site::new(u.key.method.clone(), pc);
        let remap = is_generated_class(&u.key.method.class) && !is_attacker_method(&u.key.method);
        let sink_site = match u.key.context.last() {
            Some(caller) if remap => caller.clone(),
            _ => here.clone(),
        };
        let attribution = u.key.attribution.clone().or(f.attribution.clone());
        let key = (
            f.label.clone(),
            f.source_site.clone(),
            sink.to_string(),
            sink_site.clone(),
            attribution.clone(),
        );
        if self.flows.contains_key(&key) {
            return;
        }
        let context = u.key.context.clone();
        let witness = self.witness((unit, pc as u32, d), here);
        self.flows.insert(
            key,
            Flow {
                source: f.label.clone(),
                source_site: f.source_site.clone(),
                sink: sink.to_string(),
                sink_site,
                attribution,
                witness,
                context,
            },
        );
    }

    /// Sites where the fact changed along its derivation, source first.
    fn witness(&self, mut node: Node, sink: Site) -> Vec<Site> {
        let mut out = vec![sink];
        let mut steps = 0;
        while let Some(&pred) = self.preds.get(&node) {
            steps += 1;
            if steps > 100_000 {
                break;
            }
            if pred.2 != node.2 {
                let u = &self.units[pred.0 as usize];
                let site = Site::new(u.key.method.clone(), pred.1 as usize);
                if out.last() != Some(&site) {
                    out.push(site);
                }
            }
            if pred.2 == ZERO {
                break;
            }
            node = pred;
        }
        out.reverse();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::air::parse_program;
    use crate::taint::config::SourceSinkConfig;

    fn run(text: &str) -> Vec<Flow> {
        let p = parse_program(text).unwrap();
        let cfg = SourceSinkConfig::default_config().resolve(&p).unwrap();
        run_taint(&p, &cfg, &RunOptions::default()).flows
    }

    #[test]
    fn field_write_after_read_is_not_a_flow() {
        let flows = run("manifest { target_api = 19; entry A.run/2; }
             class A {
               field s : String;
               method run(wv : WebView) : void {
                 x = get this.s;
                 vcall WebView.loadUrl/2(wv, x);
                 tm = new TelephonyManager;
                 id = vcall TelephonyManager.getDeviceId/1(tm);
                 put this.s = id;
                 return;
               }
             }");
        assert!(flows.is_empty());
    }

    #[test]
    fn source_through_callee_return() {
        let flows = run("manifest { target_api = 19; entry A.run/2; }
             class A {
               method id() : String {
                 tm = new TelephonyManager;
                 r = vcall TelephonyManager.getDeviceId/1(tm);
                 return r;
               }
               method run(wv : WebView) : void {
                 x = vcall A.id/1(this);
                 vcall WebView.loadUrl/2(wv, x);
                 return;
               }
             }");
        assert_eq!(flows.len(), 1);
        assert_eq!(flows[0].source, "tm-device-id");
        assert_eq!(flows[0].sink, "webview-load-url");
        assert_eq!(flows[0].witness.last(), Some(&flows[0].sink_site));
    }

    #[test]
    fn clear_rule_kills_receiver_taint() {
        let flows = run("manifest { target_api = 19; entry A.run/2; }
             class A {
               method run(wv : WebView) : void {
                 tm = new TelephonyManager;
                 id = vcall TelephonyManager.getDeviceId/1(tm);
                 b = new StringBuilder;
                 kcall StringBuilder.<init>/1(b);
                 vcall StringBuilder.append/2(b, id);
                 n = 0;
                 vcall StringBuilder.setLength/2(b, n);
                 s = vcall StringBuilder.toString/1(b);
                 vcall WebView.loadUrl/2(wv, s);
                 return;
               }
             }");
        assert!(flows.is_empty());
    }
}
