//! Intra-procedural string constant propagation with a StringBuilder model.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::air::{Instr, MethodDef, CONSTRUCTOR};

pub const STRING_BUILDER: &str = "StringBuilder";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstValue {
    Str(String),
    /// Not a single known string.
    Top,
}

/// Value of every string operand at every instruction of one method.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StringConstMap {
    pub values: BTreeMap<(usize, String), ConstValue>,
}

impl StringConstMap {
    /// The constant held by `local` just before instruction `pc`.
    pub fn get(&self, pc: usize, local: &str) -> Option<&str> {
        match self.values.get(&(pc, local.to_string())) {
            Some(ConstValue::Str(s)) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Val {
    Str(String),
    Int(i64),
    /// A builder allocated at the given instruction.
    Builder(usize),
    Top,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct State {
    locals: BTreeMap<String, Val>,
    builders: BTreeMap<usize, Val>,
}

fn join_map<K: Ord + Clone>(a: &mut BTreeMap<K, Val>, b: &BTreeMap<K, Val>) -> bool {
    let mut changed = false;
    for (k, v) in b {
        match a.get(k) {
            None => {
                a.insert(k.clone(), v.clone());
                changed = true;
            }
            Some(old) if old != v && *old != Val::Top => {
                a.insert(k.clone(), Val::Top);
                changed = true;
            }
            _ => {}
        }
    }
    changed
}

impl State {
    fn join(&mut self, other: &State) -> bool {
        let a = join_map(&mut self.locals, &other.locals);
        let b = join_map(&mut self.builders, &other.builders);
        a || b
    }

    fn get(&self, local: &str) -> Val {
        self.locals.get(local).cloned().unwrap_or(Val::Top)
    }

    fn set(&mut self, local: &str, v: Val) {
        self.locals.insert(local.to_string(), v);
    }
}

fn text(v: &Val) -> Option<String> {
    match v {
        Val::Str(s) => Some(s.clone()),
        Val::Int(i) => Some(i.to_string()),
        _ => None,
    }
}

fn concat(buf: &Val, piece: &Val) -> Val {
    match (buf, text(piece)) {
        (Val::Str(a), Some(b)) => Val::Str(format!("{a}{b}")),
        _ => Val::Top,
    }
}

fn transfer(state: &mut State, pc: usize, instr: &Instr) {
    match instr {
        Instr::ConstString { dst, value } => state.set(dst, Val::Str(value.clone())),
        Instr::ConstInt { dst, value } => state.set(dst, Val::Int(*value)),
        Instr::Assign { dst, src } | Instr::Cast { dst, src, .. } => {
            let v = state.get(src);
            state.set(dst, v);
        }
        Instr::New { dst, class } if class == STRING_BUILDER => {
            for v in state.locals.values_mut() {
                if *v == Val::Builder(pc) {
                    *v = Val::Top;
                }
            }
            state.builders.insert(pc, Val::Str(String::new()));
            state.set(dst, Val::Builder(pc));
        }
        Instr::Invoke {
            dst, target, args, ..
        } => {
            let builder = |s: &State, i: usize| match args.get(i).map(|a| s.get(a)) {
                Some(Val::Builder(id)) => Some(id),
                _ => None,
            };
            let mut result = Val::Top;
            let on_builder = target.class == STRING_BUILDER;
            match (on_builder, target.name.as_str(), target.arity) {
                (true, CONSTRUCTOR, 1) => {
                    if let Some(id) = builder(state, 0) {
                        state.builders.insert(id, Val::Str(String::new()));
                    }
                }
                (true, CONSTRUCTOR, 2) => {
                    if let Some(id) = builder(state, 0) {
                        let init = text(&state.get(&args[1])).map_or(Val::Top, Val::Str);
                        state.builders.insert(id, init);
                    }
                }
                (true, "append", 2) => {
                    if let Some(id) = builder(state, 0) {
                        let buf = state.builders.get(&id).cloned().unwrap_or(Val::Top);
                        let next = concat(&buf, &state.get(&args[1]));
                        state.builders.insert(id, next);
                        result = Val::Builder(id);
                    }
                    if let Some(other) = builder(state, 1) {
                        state.builders.insert(other, Val::Top);
                    }
                }
                (true, "toString", 1) => {
                    if let Some(id) = builder(state, 0) {
                        result = state.builders.get(&id).cloned().unwrap_or(Val::Top);
                    }
                }
                _ => {
                    for i in 0..args.len() {
                        if let Some(id) = builder(state, i) {
                            state.builders.insert(id, Val::Top);
                        }
                    }
                }
            }
            if let Some(d) = dst {
                state.set(d, result);
            }
        }
        other => {
            if let Some(d) = other.def() {
                state.set(d, Val::Top);
            }
        }
    }
}

pub fn fold_strings(method: &MethodDef) -> StringConstMap {
    let n = method.body.len();
    let mut states: Vec<Option<State>> = vec![None; n + 1];
    let mut out = StringConstMap::default();
    if n == 0 {
        return out;
    }
    states[0] = Some(State::default());
    let mut queue = VecDeque::from([0usize]);
    let mut queued = vec![false; n + 1];
    queued[0] = true;
    while let Some(pc) = queue.pop_front() {
        queued[pc] = false;
        if pc == n {
            continue;
        }
        let mut s = states[pc].clone().unwrap_or_default();
        transfer(&mut s, pc, &method.body[pc]);
        for succ in method.successors(pc) {
            let changed = match &mut states[succ] {
                Some(old) => old.join(&s),
                slot @ None => {
                    *slot = Some(s.clone());
                    true
                }
            };
            if changed && !queued[succ] {
                queued[succ] = true;
                queue.push_back(succ);
            }
        }
    }
    for (pc, instr) in method.body.iter().enumerate() {
        let Some(s) = &states[pc] else { continue };
        for local in instr.uses() {
            let v = match s.get(local) {
                Val::Str(x) => ConstValue::Str(x),
                _ => ConstValue::Top,
            };
            out.values.insert((pc, local.to_string()), v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::air::{parse_program, MethodSig};

    fn fold(body: &str) -> (StringConstMap, usize) {
        let p = parse_program(&format!(
            "class A {{ method m(s : String) : String {{ {body} }} }}"
        ))
        .unwrap();
        let m = p.method(&MethodSig::new("A", "m", 2)).unwrap();
        (fold_strings(m), m.body.len() - 1)
    }

    #[test]
    fn builder_concatenation() {
        let (map, ret) = fold(
            "a = \"login\"; b = new StringBuilder; kcall StringBuilder.<init>/1(b);
             vcall StringBuilder.append/2(b, a); c = \"Pwd\"; vcall StringBuilder.append/2(b, c);
             k = vcall StringBuilder.toString/1(b); return k;",
        );
        assert_eq!(map.get(ret, "k"), Some("loginPwd"));
    }

    #[test]
    fn unequal_merge_is_top() {
        let (map, ret) = fold("ifnd l; k = \"a\"; goto e; l: k = \"b\"; e: return k;");
        assert_eq!(map.get(ret, "k"), None);
        assert_eq!(map.values[&(ret, "k".to_string())], ConstValue::Top);
    }

    #[test]
    fn self_assignment_keeps_constant() {
        let (map, ret) = fold("k = \"x\"; k = k; return k;");
        assert_eq!(map.get(ret, "k"), Some("x"));
    }

    #[test]
    fn parameter_is_top_and_taints_builder() {
        let (map, ret) = fold(
            "b = new StringBuilder; kcall StringBuilder.<init>/1(b);
             vcall StringBuilder.append/2(b, s); k = vcall StringBuilder.toString/1(b); return k;",
        );
        assert_eq!(map.get(ret, "k"), None);
    }

    #[test]
    fn builder_loop_widens() {
        let (map, ret) = fold(
            "b = new StringBuilder; kcall StringBuilder.<init>/1(b); a = \"x\";
             l: ifnd e; vcall StringBuilder.append/2(b, a); goto l;
             e: k = vcall StringBuilder.toString/1(b); return k;",
        );
        assert_eq!(map.get(ret, "k"), None);
    }
}
