use std::collections::{BTreeSet, VecDeque};

use super::hierarchy::element_type;
use super::{is_primitive, AirError, ClassDef, Instr, InvokeKind, MethodDef, Program, Span, THIS};

/// Checks every structural invariant of a merged program.
pub fn validate(program: &Program, manifest_span: Span) -> Result<(), AirError> {
    check_hierarchy(program)?;
    for class in program.all_classes() {
        check_class_types(program, class)?;
    }
    for class in program.classes.values() {
        for method in &class.methods {
            check_body(program, class, method)?;
        }
    }
    check_manifest(program, manifest_span)
}

fn check_hierarchy(program: &Program) -> Result<(), AirError> {
    for class in program.all_classes() {
        if let Some(sup) = &class.superclass {
            if !program.has_class(sup) {
                return Err(AirError::UnresolvedType {
                    name: sup.clone(),
                    span: class.span,
                });
            }
        }
        let mut seen = BTreeSet::new();
        let mut cur = Some(class);
        while let Some(c) = cur {
            if !seen.insert(c.name.as_str()) {
                return Err(AirError::InheritanceCycle {
                    name: class.name.clone(),
                    span: class.span,
                });
            }
            cur = c.superclass.as_deref().and_then(|s| program.class(s));
        }
    }
    Ok(())
}

fn resolve_type(program: &Program, ty: &str, span: Span) -> Result<(), AirError> {
    if program.type_resolves(ty) {
        Ok(())
    } else {
        Err(AirError::UnresolvedType {
            name: element_type(ty).to_string(),
            span,
        })
    }
}

fn check_class_types(program: &Program, class: &ClassDef) -> Result<(), AirError> {
    for f in &class.fields {
        resolve_type(program, &f.ty, class.span)?;
    }
    let mut sigs = BTreeSet::new();
    for m in &class.methods {
        for p in &m.params {
            resolve_type(program, &p.ty, m.span)?;
        }
        resolve_type(program, &m.ret, m.span)?;
        if !sigs.insert((m.name.as_str(), m.arity())) {
            return Err(invalid(class, m, m.span, "duplicate method signature"));
        }
        if m.is_constructor && m.is_static {
            return Err(invalid(class, m, m.span, "constructors cannot be static"));
        }
        let mut names = BTreeSet::new();
        for p in &m.params {
            if p.name == THIS || !names.insert(p.name.as_str()) {
                return Err(invalid(
                    class,
                    m,
                    m.span,
                    format!("invalid parameter name `{}`", p.name),
                ));
            }
        }
    }
    Ok(())
}

fn invalid(class: &ClassDef, m: &MethodDef, span: Span, message: impl Into<String>) -> AirError {
    AirError::Invalid {
        method: m.sig(&class.name).to_string(),
        message: message.into(),
        span,
    }
}

fn field_exists(program: &Program, field: &str, is_static: bool) -> bool {
    program
        .all_classes()
        .any(|c| c.field(field).is_some_and(|f| f.is_static == is_static))
}

fn check_body(program: &Program, class: &ClassDef, m: &MethodDef) -> Result<(), AirError> {
    let span_at = |pc: usize| m.instr_spans.get(pc).copied().unwrap_or(m.span);
    let mut labels = BTreeSet::new();
    for (pc, instr) in m.body.iter().enumerate() {
        if let Instr::Label { name } = instr {
            if !labels.insert(name.as_str()) {
                return Err(invalid(
                    class,
                    m,
                    span_at(pc),
                    format!("duplicate label `{name}`"),
                ));
            }
        }
    }
    for (pc, instr) in m.body.iter().enumerate() {
        let span = span_at(pc);
        if instr.def() == Some(THIS) {
            return Err(invalid(class, m, span, "`this` cannot be assigned"));
        }
        match instr {
            Instr::Goto { label } | Instr::IfNondet { label }
                if !labels.contains(label.as_str()) =>
            {
                return Err(invalid(class, m, span, format!("unknown label `{label}`")));
            }
            Instr::New { class: ty, .. } => {
                if is_primitive(element_type(ty)) {
                    return Err(invalid(
                        class,
                        m,
                        span,
                        format!("cannot instantiate `{ty}`"),
                    ));
                }
                resolve_type(program, ty, span)?;
            }
            Instr::Cast { ty, .. } => resolve_type(program, ty, span)?,
            Instr::InstanceGet { field, .. } | Instr::InstancePut { field, .. } => {
                if !field_exists(program, field, false) {
                    return Err(AirError::UnknownField {
                        field: field.clone(),
                        span,
                    });
                }
            }
            Instr::StaticGet {
                class: owner,
                field,
                ..
            }
            | Instr::StaticPut {
                class: owner,
                field,
                ..
            } => {
                resolve_type(program, owner, span)?;
                let found = program.ancestors(owner).iter().any(|a| {
                    program
                        .class(a)
                        .and_then(|c| c.field(field))
                        .is_some_and(|f| f.is_static)
                });
                if !found {
                    return Err(AirError::UnknownField {
                        field: format!("{owner}.{field}"),
                        span,
                    });
                }
            }
            Instr::Invoke {
                kind, target, args, ..
            } => {
                if !program.has_class(&target.class) {
                    return Err(AirError::UnresolvedType {
                        name: target.class.clone(),
                        span,
                    });
                }
                let unresolved = || AirError::UnresolvedMethod {
                    sig: target.to_string(),
                    span,
                };
                let resolved = program.resolve_sig(target).ok_or_else(unresolved)?;
                let callee = program.method(&resolved).ok_or_else(unresolved)?;
                if args.len() != target.arity {
                    return Err(invalid(
                        class,
                        m,
                        span,
                        format!(
                            "call to {target} passes {} arguments, expected {}",
                            args.len(),
                            target.arity
                        ),
                    ));
                }
                let kind_ok = match kind {
                    InvokeKind::Static => callee.is_static,
                    InvokeKind::Virtual => !callee.is_static && !callee.is_constructor,
                    InvokeKind::Special => !callee.is_static,
                };
                if !kind_ok {
                    return Err(invalid(
                        class,
                        m,
                        span,
                        format!("`{}` cannot invoke {resolved}", kind.keyword()),
                    ));
                }
            }
            Instr::Return { value } => {
                let void = m.ret == "void";
                if void == value.is_some() {
                    return Err(invalid(
                        class,
                        m,
                        span,
                        if void {
                            "void method returns a value"
                        } else {
                            "missing return value"
                        },
                    ));
                }
            }
            _ => {}
        }
    }
    check_definite_assignment(class, m)
}

/// Every local must be assigned on all paths before it is read, and non-void
/// methods may not fall off the end of their body.
fn check_definite_assignment(class: &ClassDef, m: &MethodDef) -> Result<(), AirError> {
    let n = m.body.len();
    let span_at = |pc: usize| m.instr_spans.get(pc).copied().unwrap_or(m.span);
    let entry: BTreeSet<String> = m.entry_locals().into_iter().map(String::from).collect();
    if n == 0 {
        if m.ret != "void" {
            return Err(invalid(class, m, m.span, "missing return value"));
        }
        return Ok(());
    }
    let mut state: Vec<Option<BTreeSet<String>>> = vec![None; n];
    state[0] = Some(entry);
    let mut queue = VecDeque::from([0usize]);
    while let Some(pc) = queue.pop_front() {
        let Some(inset) = state[pc].clone() else {
            continue;
        };
        let instr = &m.body[pc];
        for u in instr.uses() {
            if !inset.contains(u) {
                return Err(invalid(
                    class,
                    m,
                    span_at(pc),
                    format!("local `{u}` may be used before assignment"),
                ));
            }
        }
        let mut out = inset;
        if let Some(d) = instr.def() {
            out.insert(d.to_string());
        }
        for succ in m.successors(pc) {
            if succ >= n {
                if !matches!(instr, Instr::Return { .. }) && m.ret != "void" {
                    return Err(invalid(class, m, span_at(pc), "missing return value"));
                }
                continue;
            }
            let merged = match &state[succ] {
                None => out.clone(),
                Some(old) => old.intersection(&out).cloned().collect(),
            };
            if state[succ].as_ref() != Some(&merged) {
                state[succ] = Some(merged);
                queue.push_back(succ);
            }
        }
    }
    Ok(())
}

fn check_manifest(program: &Program, span: Span) -> Result<(), AirError> {
    if program.manifest.target_api < 1 {
        return Err(AirError::Invalid {
            method: "manifest".into(),
            message: "target_api must be at least 1".into(),
            span,
        });
    }
    for entry in &program.manifest.entry_points {
        let concrete = program
            .classes
            .get(&entry.class)
            .and_then(|c| c.method(&entry.name, entry.arity))
            .is_some();
        if !concrete {
            return Err(AirError::UnresolvedMethod {
                sig: entry.to_string(),
                span,
            });
        }
    }
    Ok(())
}
