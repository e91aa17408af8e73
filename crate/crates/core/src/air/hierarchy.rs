use std::collections::{BTreeMap, BTreeSet};

use super::{AirError, ClassDef, Instr, MethodDef, MethodSig, Program, OBJECT, THIS};

const PRIMITIVES: &[&str] = &[
    "void", "int", "long", "short", "byte", "char", "boolean", "float", "double",
];

pub fn is_primitive(ty: &str) -> bool {
    PRIMITIVES.contains(&ty)
}

/// Strips array suffixes: `byte[][]` -> `byte`.
pub(crate) fn element_type(ty: &str) -> &str {
    ty.trim_end_matches("[]")
}

impl Program {
    pub fn type_resolves(&self, ty: &str) -> bool {
        let base = element_type(ty);
        is_primitive(base) || self.has_class(base)
    }

    fn require(&self, name: &str) -> Result<&ClassDef, AirError> {
        self.class(name)
            .ok_or_else(|| AirError::UnknownType(name.to_string()))
    }

    /// `name` followed by its superclasses, nearest first.
    pub fn ancestors(&self, name: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = self.class(name);
        while let Some(c) = cur {
            if out.contains(&c.name) {
                break;
            }
            out.push(c.name.clone());
            cur = c.superclass.as_deref().and_then(|s| self.class(s));
        }
        out
    }

    /// True iff `a = b` or `a` transitively extends `b`.
    pub fn is_subtype(&self, a: &str, b: &str) -> Result<bool, AirError> {
        self.require(a)?;
        self.require(b)?;
        Ok(self.ancestors(a).iter().any(|x| x == b))
    }

    /// Subtype test that treats unknown or primitive names as unrelated.
    pub(crate) fn is_subtype_lenient(&self, a: &str, b: &str) -> bool {
        a == b || self.ancestors(a).iter().any(|x| x == b)
    }

    /// Reflexive-transitive subtypes of `ty` across application and stub classes.
    pub fn subclasses(&self, ty: &str) -> Result<BTreeSet<String>, AirError> {
        self.require(ty)?;
        Ok(self
            .all_classes()
            .filter(|c| self.ancestors(&c.name).iter().any(|x| x == ty))
            .map(|c| c.name.clone())
            .collect())
    }

    /// Finds the class declaring `name/arity` visible from `class`, walking up
    /// the hierarchy. Constructors are never inherited.
    pub fn resolve_method(&self, class: &str, name: &str, arity: usize) -> Option<MethodSig> {
        if name == super::CONSTRUCTOR {
            return self.class(class)?.method(name, arity).map(|m| m.sig(class));
        }
        self.ancestors(class).into_iter().find_map(|c| {
            self.class(&c)
                .and_then(|cd| cd.method(name, arity))
                .map(|m| m.sig(&c))
        })
    }

    pub fn resolve_sig(&self, sig: &MethodSig) -> Option<MethodSig> {
        self.resolve_method(&sig.class, &sig.name, sig.arity)
    }

    /// Runtime dispatch of an instance method on an object of class `class`.
    pub fn dispatch(&self, class: &str, name: &str, arity: usize) -> Option<MethodSig> {
        self.resolve_method(class, name, arity)
            .filter(|s| self.method(s).is_some_and(|m| !m.is_static))
    }

    /// Declared type of a field looked up through `class` and its ancestors,
    /// falling back to any class declaring a field of that name.
    pub fn field_type(&self, class: Option<&str>, field: &str) -> Option<String> {
        if let Some(c) = class {
            for a in self.ancestors(c) {
                if let Some(f) = self.class(&a).and_then(|cd| cd.field(field)) {
                    return Some(f.ty.clone());
                }
            }
        }
        self.all_classes()
            .find_map(|c| c.field(field))
            .map(|f| f.ty.clone())
    }

    /// Does `class` carry a method with the interface annotation, either
    /// declared or inherited?
    pub fn has_js_interface_method(&self, class: &str) -> bool {
        self.ancestors(class).iter().any(|a| {
            self.class(a)
                .is_some_and(|c| c.methods.iter().any(MethodDef::is_js_interface))
        })
    }

    /// Least common supertype of two reference types; primitives that differ
    /// collapse to `Object`.
    pub fn join_types(&self, a: &str, b: &str) -> String {
        if a == b {
            return a.to_string();
        }
        let up = self.ancestors(a);
        let other = self.ancestors(b);
        up.into_iter()
            .find(|x| other.contains(x))
            .unwrap_or_else(|| OBJECT.to_string())
    }
}

/// Declared type of every local of `method`: parameters and `this` from the
/// signature, other locals from the join of their definitions.
pub fn local_types(program: &Program, class: &str, method: &MethodDef) -> BTreeMap<String, String> {
    let mut types: BTreeMap<String, String> = BTreeMap::new();
    if !method.is_static {
        types.insert(THIS.to_string(), class.to_string());
    }
    for p in &method.params {
        types.insert(p.name.clone(), p.ty.clone());
    }
    let fixed: BTreeSet<String> = types.keys().cloned().collect();
    loop {
        let mut changed = false;
        for instr in &method.body {
            let Some(dst) = instr.def() else { continue };
            if fixed.contains(dst) {
                continue;
            }
            let ty = match instr {
                Instr::ConstString { .. } => Some("String".to_string()),
                Instr::ConstInt { .. } => Some("int".to_string()),
                Instr::Assign { src, .. } => types.get(src).cloned(),
                Instr::New { class, .. } => Some(class.clone()),
                Instr::Cast { ty, .. } => Some(ty.clone()),
                Instr::InstanceGet { base, field, .. } => {
                    program.field_type(types.get(base).map(String::as_str), field)
                }
                Instr::StaticGet { class, field, .. } => program.field_type(Some(class), field),
                Instr::Invoke { target, .. } => program
                    .resolve_sig(target)
                    .and_then(|s| program.method(&s).map(|m| m.ret.clone())),
                _ => None,
            };
            let Some(ty) = ty else { continue };
            let merged = match types.get(dst) {
                Some(old) => program.join_types(old, &ty),
                None => ty,
            };
            if types.get(dst) != Some(&merged) {
                types.insert(dst.to_string(), merged);
                changed = true;
            }
        }
        if !changed {
            return types;
        }
    }
}
