//! Concrete interpreter over AIR used as ground truth for the taint engine.
//!
//! Values carry taint tags. Nondeterministic branches and the choice of
//! registered object are explored depth first by re-executing from the
//! start with a recorded choice prefix. The attacker is native: whenever a
//! content-loading method runs on a Webview holding registered objects, the
//! given sequence of interface methods is invoked on those objects with
//! fresh tainted arguments and every result is leaked.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::air::{is_primitive, Instr, InvokeKind, MethodDef, MethodSig, Program, Site, OBJECT};
use crate::generate::{is_attacker_method, LOAD_METHODS, SUFFIX};
use crate::interface::{ADD_INTERFACE, ANNOTATION_API, WEBVIEW};
use crate::refine::prefs::{EDITOR, PREFERENCES};
use crate::taint::config::{Effect, Model};
use crate::taint::{
    static_owner, ConfigError, Position, ResolvedConfig, SourceSinkConfig, WrapKind,
    ATTACKER_INPUT, WEB_EXFILTRATION,
};

pub const DEFAULT_MAX_STEPS: u64 = 100_000;
pub const DEFAULT_MAX_SEQUENCE: usize = 3;
/// Times one branch instruction may run within a single activation.
pub const LOOP_UNROLL: usize = 3;
pub const MAX_CALL_DEPTH: usize = 64;
const STRING_BUILDER: &str = "StringBuilder";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("attacker sequence names unknown method {0}")]
    UnknownMethod(MethodSig),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

type Tag = (String, Site);
type Tags = BTreeSet<Tag>;

#[derive(Debug, Clone, PartialEq)]
enum Val {
    Null,
    Int(i64),
    Str(String),
    Ref(usize),
}

#[derive(Debug, Clone, PartialEq)]
struct Tagged {
    v: Val,
    tags: Tags,
}

impl Tagged {
    fn plain(v: Val) -> Tagged {
        Tagged {
            v,
            tags: Tags::new(),
        }
    }
}

#[derive(Debug, Clone)]
struct Obj {
    class: String,
    fields: BTreeMap<String, Tagged>,
    tags: Tags,
    text: String,
    registered: Vec<usize>,
    /// Stands for an unknown instance of `class` or any subtype.
    opaque: bool,
}

/// Result of a call plus extra tags for argument locals by position.
type CallOutcome = (Option<Tagged>, Vec<(usize, Tags)>);

/// A concrete flow from a tagged source into a sink.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObservedLeak {
    pub source: String,
    pub source_site: Site,
    pub sink: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleTrace {
    pub sequence: Vec<MethodSig>,
    /// `(source label, sink label)` pairs realized concretely.
    pub leaks: BTreeSet<(String, String)>,
    pub leak_details: BTreeSet<ObservedLeak>,
    /// `(webview class, interface class)` pairs registered at run time.
    pub registrations: BTreeSet<(String, String)>,
    pub call_edges: BTreeSet<(MethodSig, MethodSig)>,
    /// `(key, value type)` of tainted preference writes whose reads leaked.
    pub pref_leaks: BTreeSet<(String, String)>,
    /// Values of string arguments seen at call sites, `None` for non-strings.
    #[serde(skip)]
    pub observed: BTreeMap<(Site, usize), BTreeSet<Option<String>>>,
    /// The step budget ran out before every path was explored.
    pub partial: bool,
}

/// Every sequence over `methods` of length at most `max_len`, shortest first
/// and lexicographic by index within a length.
pub fn enumerate_sequences(methods: &[MethodSig], max_len: usize) -> Vec<Vec<MethodSig>> {
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<MethodSig>> = vec![Vec::new()];
    for _ in 0..max_len {
        if methods.is_empty() {
            break;
        }
        let next: Vec<Vec<MethodSig>> = layer
            .iter()
            .flat_map(|s| {
                methods.iter().map(move |m| {
                    let mut t = s.clone();
                    t.push(m.clone());
                    t
                })
            })
            .collect();
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

enum Stop {
    /// The path cannot continue: a failed cast, a null receiver or an
    /// exhausted unrolling bound.
    Dead,
    Budget,
}

/// Observations shared by every path of one interpretation.
#[derive(Default)]
struct Shared {
    trace: OracleTrace,
    leaked_tags: Tags,
    pref_puts: BTreeSet<(String, String)>,
    pref_gets: BTreeMap<Tag, (String, String)>,
    steps: u64,
}

struct Machine<'a> {
    program: &'a Program,
    config: &'a ResolvedConfig,
    sequence: &'a [MethodSig],
    max_steps: u64,
    shared: &'a mut Shared,
    prefix: Vec<usize>,
    choices: Vec<(usize, usize)>,
    heap: Vec<Obj>,
    statics: BTreeMap<(String, String), Tagged>,
    in_attacker: bool,
}

fn default_value(ty: &str) -> Val {
    if ty == "String" {
        Val::Str(String::new())
    } else if is_primitive(ty) {
        Val::Int(0)
    } else {
        Val::Null
    }
}

impl<'a> Machine<'a> {
    fn choose(&mut self, options: usize) -> usize {
        let i = self.choices.len();
        let taken = self.prefix.get(i).copied().unwrap_or(0).min(options - 1);
        self.choices.push((taken, options));
        taken
    }

    fn alloc(&mut self, class: &str) -> usize {
        self.heap.push(Obj {
            class: class.to_string(),
            fields: BTreeMap::new(),
            tags: Tags::new(),
            text: String::new(),
            registered: Vec::new(),
            opaque: false,
        });
        self.heap.len() - 1
    }

    /// A fresh value of type `ty` carrying `tags`.
    fn fresh(&mut self, ty: &str, tags: Tags) -> Tagged {
        let v = match default_value(ty) {
            Val::Null => {
                let class = if self.program.has_class(ty) {
                    ty
                } else {
                    OBJECT
                };
                let o = self.alloc(class);
                self.heap[o].tags = tags.clone();
                self.heap[o].opaque = true;
                Val::Ref(o)
            }
            v => v,
        };
        Tagged { v, tags }
    }

    fn shallow(&self, t: &Tagged) -> Tags {
        let mut out = t.tags.clone();
        if let Val::Ref(o) = t.v {
            out.extend(self.heap[o].tags.iter().cloned());
        }
        out
    }

    fn deep(&self, t: &Tagged) -> Tags {
        let mut out = t.tags.clone();
        let mut stack: Vec<usize> = match t.v {
            Val::Ref(o) => vec![o],
            _ => Vec::new(),
        };
        let mut seen = BTreeSet::new();
        while let Some(o) = stack.pop() {
            if !seen.insert(o) {
                continue;
            }
            let obj = &self.heap[o];
            out.extend(obj.tags.iter().cloned());
            for f in obj.fields.values() {
                out.extend(f.tags.iter().cloned());
                if let Val::Ref(n) = f.v {
                    stack.push(n);
                }
            }
        }
        out
    }

    fn render(&self, t: &Tagged) -> String {
        match &t.v {
            Val::Null => "null".to_string(),
            Val::Int(n) => n.to_string(),
            Val::Str(s) => s.clone(),
            Val::Ref(o) if self.heap[*o].class == STRING_BUILDER => self.heap[*o].text.clone(),
            Val::Ref(o) => format!("{}@{o}", self.heap[*o].class),
        }
    }

    fn leak(&mut self, tags: &Tags, sink: &str) {
        for (label, site) in tags {
            self.shared
                .trace
                .leaks
                .insert((label.clone(), sink.to_string()));
            self.shared.trace.leak_details.insert(ObservedLeak {
                source: label.clone(),
                source_site: site.clone(),
                sink: sink.to_string(),
            });
            self.shared
                .leaked_tags
                .insert((label.clone(), site.clone()));
        }
    }

    fn step(&mut self) -> Result<(), Stop> {
        self.shared.steps += 1;
        if self.shared.steps > self.max_steps {
            Err(Stop::Budget)
        } else {
            Ok(())
        }
    }

    fn run_entry(&mut self, entry: &MethodSig) -> Result<(), Stop> {
        let Some(def) = self.program.method(entry) else {
            return Ok(());
        };
        let mut args = Vec::new();
        if !def.is_static {
            let o = self.alloc(&entry.class);
            args.push(Tagged::plain(Val::Ref(o)));
        }
        for p in &def.params {
            let t = self.fresh(&p.ty, Tags::new());
            args.push(t);
        }
        self.call(entry, args, 0).map(|_| ())
    }

    /// Runs an application method body.
    fn call(
        &mut self,
        sig: &MethodSig,
        args: Vec<Tagged>,
        depth: usize,
    ) -> Result<Option<Tagged>, Stop> {
        if depth > MAX_CALL_DEPTH {
            return Err(Stop::Dead);
        }
        let program = self.program;
        let def = program.method(sig).ok_or(Stop::Dead)?;
        let mut locals: BTreeMap<String, Tagged> = def
            .entry_locals()
            .into_iter()
            .map(String::from)
            .zip(args)
            .collect();
        let mut visits: BTreeMap<usize, usize> = BTreeMap::new();
        let get = |locals: &BTreeMap<String, Tagged>, l: &str| {
            locals.get(l).cloned().unwrap_or(Tagged::plain(Val::Null))
        };
        let mut pc = 0;
        while pc < def.body.len() {
            self.step()?;
            let mut next = pc + 1;
            match &def.body[pc] {
                Instr::ConstString { dst, value } => {
                    locals.insert(dst.clone(), Tagged::plain(Val::Str(value.clone())));
                }
                Instr::ConstInt { dst, value } => {
                    locals.insert(dst.clone(), Tagged::plain(Val::Int(*value)));
                }
                Instr::Assign { dst, src } => {
                    let v = get(&locals, src);
                    locals.insert(dst.clone(), v);
                }
                Instr::New { dst, class } => {
                    let o = self.alloc(class);
                    locals.insert(dst.clone(), Tagged::plain(Val::Ref(o)));
                }
                Instr::Cast { dst, ty, src } => {
                    let v = get(&locals, src);
                    if let Val::Ref(o) = v.v {
                        let obj = &mut self.heap[o];
                        if obj.opaque && program.is_subtype_lenient(ty, &obj.class) {
                            obj.class = ty.clone();
                        } else if !program.is_subtype_lenient(&obj.class, ty) {
                            return Err(Stop::Dead);
                        }
                    }
                    locals.insert(dst.clone(), v);
                }
                Instr::InstanceGet { dst, base, field } => {
                    let Val::Ref(o) = get(&locals, base).v else {
                        return Err(Stop::Dead);
                    };
                    let obj = &self.heap[o];
                    let mut v = obj.fields.get(field).cloned().unwrap_or_else(|| {
                        let ty = program
                            .field_type(Some(&obj.class), field)
                            .unwrap_or_default();
                        Tagged::plain(default_value(&ty))
                    });
                    v.tags.extend(obj.tags.iter().cloned());
                    locals.insert(dst.clone(), v);
                }
                Instr::InstancePut { base, field, src } => {
                    let Val::Ref(o) = get(&locals, base).v else {
                        return Err(Stop::Dead);
                    };
                    let v = get(&locals, src);
                    self.heap[o].fields.insert(field.clone(), v);
                }
                Instr::StaticGet { dst, class, field } => {
                    let key = (static_owner(program, class, field), field.clone());
                    let v = self.statics.get(&key).cloned().unwrap_or_else(|| {
                        let ty = program.field_type(Some(class), field).unwrap_or_default();
                        Tagged::plain(default_value(&ty))
                    });
                    locals.insert(dst.clone(), v);
                }
                Instr::StaticPut { class, field, src } => {
                    let key = (static_owner(program, class, field), field.clone());
                    let v = get(&locals, src);
                    self.statics.insert(key, v);
                }
                Instr::Invoke {
                    dst,
                    kind,
                    target,
                    args,
                } => {
                    let site = Site::new(sig.clone(), pc);
                    let vals: Vec<Tagged> = args.iter().map(|a| get(&locals, a)).collect();
                    for (i, v) in vals.iter().enumerate() {
                        let s = match &v.v {
                            Val::Str(s) => Some(s.clone()),
                            _ => None,
                        };
                        self.shared
                            .trace
                            .observed
                            .entry((site.clone(), i))
                            .or_default()
                            .insert(s);
                    }
                    let callee = match kind {
                        InvokeKind::Virtual => {
                            let Some(Val::Ref(o)) = vals.first().map(|v| &v.v) else {
                                return Err(Stop::Dead);
                            };
                            program.dispatch(&self.heap[*o].class, &target.name, target.arity)
                        }
                        _ => program.resolve_sig(target),
                    }
                    .ok_or(Stop::Dead)?;
                    if !self.in_attacker {
                        self.shared
                            .trace
                            .call_edges
                            .insert((sig.clone(), callee.clone()));
                    }
                    let (result, extra) = self.invoke(&callee, &site, vals, depth)?;
                    for (i, tags) in extra {
                        if let Some(t) = locals.get_mut(&args[i]) {
                            t.tags.extend(tags);
                        }
                    }
                    if let Some(d) = dst {
                        let v = result.unwrap_or(Tagged::plain(Val::Null));
                        locals.insert(d.clone(), v);
                    }
                }
                Instr::Return { value } => {
                    return Ok(value.as_ref().map(|v| get(&locals, v)));
                }
                Instr::Goto { label } => {
                    next = def.label_index(label).unwrap_or(def.body.len());
                }
                Instr::IfNondet { label } => {
                    let n = visits.entry(pc).or_default();
                    *n += 1;
                    if *n > LOOP_UNROLL {
                        return Err(Stop::Dead);
                    }
                    if self.choose(2) == 1 {
                        next = def.label_index(label).unwrap_or(def.body.len());
                    }
                }
                Instr::Label { .. } => {}
            }
            pc = next;
        }
        Ok(None)
    }

    /// Performs a resolved call. Returns the result and extra tags for
    /// argument locals.
    fn invoke(
        &mut self,
        callee: &MethodSig,
        site: &Site,
        vals: Vec<Tagged>,
        depth: usize,
    ) -> Result<CallOutcome, Stop> {
        if is_attacker_method(callee) {
            return Ok((None, Vec::new()));
        }
        let program = self.program;
        let def = program.method(callee).ok_or(Stop::Dead)?;
        let (model, effect) = self.config.rules_for(program, callee);
        if effect == Effect::Descend {
            return Ok((self.call(callee, vals, depth + 1)?, Vec::new()));
        }
        self.external(callee, def, site, vals, &model, effect, depth)
    }

    #[allow(clippy::too_many_arguments)]
    fn external(
        &mut self,
        callee: &MethodSig,
        def: &MethodDef,
        site: &Site,
        vals: Vec<Tagged>,
        model: &Model,
        effect: Effect,
        depth: usize,
    ) -> Result<CallOutcome, Stop> {
        let is_static = def.is_static;
        let receiver = match (is_static, vals.first().map(|v| &v.v)) {
            (false, Some(Val::Ref(o))) => Some(*o),
            _ => None,
        };
        let mut extra = Vec::new();

        for (label, positions) in &model.sinks {
            let mut tags = Tags::new();
            for p in positions {
                if let Some(v) = p.arg_index(is_static).and_then(|i| vals.get(i)) {
                    tags.extend(self.deep(v));
                }
            }
            self.leak(&tags, label);
        }
        self.preference_call(callee, def, site, &vals);

        let mut result_tags = Tags::new();
        for (label, positions) in &model.sources {
            let tag = (label.clone(), site.clone());
            for p in positions {
                match p {
                    Position::Return => {
                        result_tags.insert(tag.clone());
                    }
                    _ => {
                        if let Some(i) = p.arg_index(is_static).filter(|&i| i < vals.len()) {
                            if let Val::Ref(o) = vals[i].v {
                                self.heap[o].tags.insert(tag.clone());
                            }
                            extra.push((i, Tags::from([tag.clone()])));
                        }
                    }
                }
            }
        }

        let mut text = None;
        if let Some(o) = receiver.filter(|&o| self.heap[o].class == STRING_BUILDER) {
            match (callee.name.as_str(), vals.get(1)) {
                ("<init>", Some(s)) | ("append", Some(s)) => {
                    let piece = self.render(s);
                    self.heap[o].text.push_str(&piece);
                }
                ("setLength", _) => self.heap[o].text.clear(),
                ("toString", _) => text = Some(self.heap[o].text.clone()),
                _ => {}
            }
        }

        match effect {
            Effect::Wrap(WrapKind::Propagate) => {
                let tags: Tags = vals.iter().flat_map(|v| self.shallow(v)).collect();
                if !tags.is_empty() {
                    if let Some(o) = receiver {
                        self.heap[o].tags.extend(tags.iter().cloned());
                    }
                    result_tags.extend(tags);
                }
            }
            Effect::Wrap(WrapKind::Clear) => {
                if let Some(o) = receiver {
                    self.heap[o].tags.clear();
                }
            }
            _ => {}
        }

        if callee.class == WEBVIEW {
            if let Some(w) = receiver {
                if callee.name == ADD_INTERFACE {
                    if let Some(Val::Ref(obj)) = vals.get(1).map(|v| &v.v) {
                        self.heap[w].registered.push(*obj);
                        let wv = self.heap[w].class.trim_end_matches(SUFFIX).to_string();
                        let iface = self.heap[*obj].class.clone();
                        self.shared.trace.registrations.insert((wv, iface));
                    }
                }
                if LOAD_METHODS.contains(&callee.name.as_str())
                    && !self.in_attacker
                    && !self.heap[w].registered.is_empty()
                {
                    self.in_attacker = true;
                    let r = self.attack(w, depth);
                    self.in_attacker = false;
                    r?;
                }
            }
        }

        if def.ret == "void" {
            return Ok((None, extra));
        }
        let builder = receiver.filter(|_| def.ret == callee.class);
        let result = match (builder, text) {
            (_, Some(s)) => Tagged {
                v: Val::Str(s),
                tags: result_tags,
            },
            (Some(o), None) => Tagged {
                v: Val::Ref(o),
                tags: result_tags,
            },
            (None, None) => self.fresh(&def.ret, result_tags),
        };
        if let Some((label, _)) = model.sources.first() {
            let tag = (label.clone(), site.clone());
            if let Some(key) = self.preference_key(callee, &vals, PREFERENCES, "get") {
                self.shared.pref_gets.insert(tag, (key, def.ret.clone()));
            }
        }
        Ok((Some(result), extra))
    }

    fn preference_key(
        &self,
        callee: &MethodSig,
        vals: &[Tagged],
        class: &str,
        prefix: &str,
    ) -> Option<String> {
        if callee.class != class || !callee.name.starts_with(prefix) {
            return None;
        }
        match vals.get(1).map(|v| &v.v) {
            Some(Val::Str(k)) => Some(k.clone()),
            _ => None,
        }
    }

    fn preference_call(
        &mut self,
        callee: &MethodSig,
        def: &MethodDef,
        _site: &Site,
        vals: &[Tagged],
    ) {
        let Some(key) = self.preference_key(callee, vals, EDITOR, "put") else {
            return;
        };
        let Some(value) = vals.get(2) else { return };
        if !self.deep(value).is_empty() {
            let ty = def.params.get(1).map(|p| p.ty.clone()).unwrap_or_default();
            self.shared.pref_puts.insert((key, ty));
        }
    }

    /// Is `name/arity` callable from JavaScript on an object of `class`?
    fn exported(&self, class: &str, name: &str, arity: usize) -> bool {
        let legacy = self.program.manifest.target_api < ANNOTATION_API;
        for a in self.program.ancestors(class) {
            let Some(cd) = self.program.class(&a) else {
                continue;
            };
            if let Some(m) = cd.method(name, arity) {
                if m.is_static || m.is_constructor {
                    return false;
                }
                return if legacy {
                    !cd.is_external
                } else {
                    m.is_js_interface()
                };
            }
        }
        false
    }

    fn attack(&mut self, webview: usize, depth: usize) -> Result<(), Stop> {
        let sequence = self.sequence;
        for sig in sequence {
            let candidates: Vec<usize> = self.heap[webview]
                .registered
                .iter()
                .copied()
                .filter(|&o| {
                    let class = &self.heap[o].class;
                    self.program.is_subtype_lenient(class, &sig.class)
                        && self.exported(class, &sig.name, sig.arity)
                })
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let obj = candidates[self.choose(candidates.len())];
            let class = self.heap[obj].class.clone();
            let Some(target) = self.program.dispatch(&class, &sig.name, sig.arity) else {
                continue;
            };
            let Some(def) = self.program.method(&target) else {
                continue;
            };
            let mut args = vec![Tagged::plain(Val::Ref(obj))];
            for (i, p) in def.params.iter().enumerate() {
                let tag = (ATTACKER_INPUT.to_string(), Site::new(target.clone(), i));
                let t = self.fresh(&p.ty, Tags::from([tag]));
                args.push(t);
            }
            let (model, effect) = self.config.rules_for(self.program, &target);
            let result = if effect == Effect::Descend {
                self.call(&target, args, depth + 1)?
            } else {
                let site = Site::new(target.clone(), 0);
                self.external(&target, def, &site, args, &model, effect, depth)?
                    .0
            };
            if let Some(r) = result {
                let tags = self.deep(&r);
                self.leak(&tags, WEB_EXFILTRATION);
            }
        }
        Ok(())
    }
}

/// Interprets every manifest entry under `sequence` with the bundled
/// source and sink configuration.
pub fn interpret(
    program: &Program,
    sequence: &[MethodSig],
    max_steps: u64,
) -> Result<OracleTrace, OracleError> {
    let config = SourceSinkConfig::default_config().resolve(program)?;
    interpret_with(program, &config, sequence, max_steps)
}

pub fn interpret_with(
    program: &Program,
    config: &ResolvedConfig,
    sequence: &[MethodSig],
    max_steps: u64,
) -> Result<OracleTrace, OracleError> {
    if let Some(missing) = sequence.iter().find(|s| program.resolve_sig(s).is_none()) {
        return Err(OracleError::UnknownMethod(missing.clone()));
    }
    let mut shared = Shared::default();
    'entries: for entry in &program.manifest.entry_points {
        let mut prefix = Vec::new();
        loop {
            let mut m = Machine {
                program,
                config,
                sequence,
                max_steps,
                shared: &mut shared,
                prefix,
                choices: Vec::new(),
                heap: Vec::new(),
                statics: BTreeMap::new(),
                in_attacker: false,
            };
            let outcome = m.run_entry(entry);
            let mut choices = std::mem::take(&mut m.choices);
            if let Err(Stop::Budget) = outcome {
                shared.trace.partial = true;
                break 'entries;
            }
            while let Some((taken, options)) = choices.pop() {
                if taken + 1 < options {
                    choices.push((taken + 1, options));
                    break;
                }
            }
            if choices.is_empty() {
                break;
            }
            prefix = choices.into_iter().map(|c| c.0).collect();
        }
    }
    let Shared {
        mut trace,
        leaked_tags,
        pref_puts,
        pref_gets,
        ..
    } = shared;
    let leaked_gets: BTreeSet<(String, String)> = pref_gets
        .into_iter()
        .filter(|(tag, _)| leaked_tags.contains(tag))
        .map(|(_, kt)| kt)
        .collect();
    trace.pref_leaks = pref_puts.intersection(&leaked_gets).cloned().collect();
    trace.sequence = sequence.to_vec();
    Ok(trace)
}

/// Union of traces over every sequence of `methods` up to `max_len`.
pub fn explore(
    program: &Program,
    config: &ResolvedConfig,
    methods: &[MethodSig],
    max_len: usize,
    max_steps: u64,
) -> Result<Vec<OracleTrace>, OracleError> {
    enumerate_sequences(methods, max_len)
        .iter()
        .map(|s| interpret_with(program, config, s, max_steps))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::air::parse_program;

    fn sig(s: &str) -> MethodSig {
        MethodSig::parse(s).unwrap()
    }

    #[test]
    fn sequence_counts() {
        let ms = [sig("A.a/1"), sig("A.b/1")];
        assert_eq!(enumerate_sequences(&ms, 1).len(), 3);
        assert_eq!(enumerate_sequences(&ms, 2).len(), 7);
        assert_eq!(enumerate_sequences(&[], 3), vec![Vec::<MethodSig>::new()]);
    }

    #[test]
    fn both_branches_are_explored() {
        let p = parse_program(
            "manifest { target_api = 19; entry A.run/1; }
             class A extends Activity {
               method run() : void {
                 t = new TelephonyManager;
                 ifnd skip;
                 id = vcall TelephonyManager.getDeviceId/1(t);
                 n = \"0\";
                 goto send;
                 skip:
                 id = \"none\";
                 send:
                 w = new WebView;
                 vcall WebView.loadUrl/2(w, id);
                 return;
               }
             }",
        )
        .unwrap();
        let t = interpret(&p, &[], DEFAULT_MAX_STEPS).unwrap();
        assert_eq!(
            t.leaks,
            BTreeSet::from([("tm-device-id".to_string(), "webview-load-url".to_string())])
        );
        let site = (Site::new(sig("A.run/1"), 9), 1);
        assert_eq!(
            t.observed[&site],
            BTreeSet::from([Some(String::new()), Some("none".to_string())])
        );
        assert!(!t.partial);
    }

    #[test]
    fn infinite_loop_exhausts_budget() {
        let p = parse_program(
            "manifest { target_api = 19; entry A.run/1; }
             class A extends Activity {
               method run() : void { top: goto top; }
             }",
        )
        .unwrap();
        assert!(interpret(&p, &[], 1000).unwrap().partial);
    }
}
