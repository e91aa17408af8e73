//! Rewriting Webview instantiations to their BabelView subclasses.

use std::collections::BTreeMap;

use crate::air::{
    is_primitive, local_types, validate, AirError, Instr, InvokeKind, MethodDef, MethodSig,
    Program, Site, Span, CONSTRUCTOR,
};
use crate::generate::{
    babelview_name, generate_babelview, is_generated_class, BabelViewClass, GenError,
};
use crate::interface::WebviewInterfaceMap;

pub const FIND_VIEW: &str = "findViewById";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum InstrumentError {
    #[error("{site}: `{class}` has no constructor of arity {arity}")]
    MissingConstructor {
        site: Site,
        class: String,
        arity: usize,
    },
    #[error(transparent)]
    Generate(#[from] GenError),
    #[error("instrumented program is invalid: {0}")]
    Invalid(#[from] AirError),
}

#[derive(Debug, Clone)]
pub struct Instrumented {
    pub program: Program,
    pub generated: Vec<BabelViewClass>,
    /// Webview class to BabelView class.
    pub mapping: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

/// Generates a BabelView for every mapped Webview, adds them to the program
/// and rewrites constructions. A program that already carries generated
/// classes is returned unchanged.
pub fn instrument(
    program: &Program,
    map: &WebviewInterfaceMap,
) -> Result<Instrumented, InstrumentError> {
    let mut mapping = BTreeMap::new();
    let mut generated = Vec::new();
    if program.classes.keys().any(|c| is_generated_class(c)) {
        for name in program.classes.keys().filter(|c| is_generated_class(c)) {
            if let Some(parent) = program.classes[name].superclass.clone() {
                mapping.insert(parent, name.clone());
            }
        }
        return Ok(Instrumented {
            program: program.clone(),
            generated,
            mapping,
            notes: Vec::new(),
        });
    }
    let mut out = program.clone();
    for (webview, ifaces) in &map.entries {
        let bv = generate_babelview(program, webview, ifaces)?;
        if let Some(parent) = out.classes.get_mut(webview) {
            parent.is_final = false;
        }
        out.classes.insert(bv.class.name.clone(), bv.class.clone());
        mapping.insert(webview.clone(), bv.class.name.clone());
        generated.push(bv);
    }
    let out = rewrite_constructors(&out, &mapping)?;
    let (out, notes) = rewrite_findviewbyid(&out, &mapping);
    validate(&out, Span::default())?;
    Ok(Instrumented {
        program: out,
        generated,
        mapping,
        notes,
    })
}

fn rewritable_methods(program: &Program) -> Vec<(String, usize)> {
    program
        .classes
        .values()
        .filter(|c| !is_generated_class(&c.name))
        .flat_map(|c| (0..c.methods.len()).map(move |i| (c.name.clone(), i)))
        .collect()
}

/// Retargets every `x = new W` together with the following
/// `kcall W.<init>/n(x, ..)` to the BabelView subclass of `W`.
pub fn rewrite_constructors(
    program: &Program,
    mapping: &BTreeMap<String, String>,
) -> Result<Program, InstrumentError> {
    let mut out = program.clone();
    for (class, idx) in rewritable_methods(program) {
        let method = &program.classes[&class].methods[idx];
        let sig = method.sig(&class);
        let mut body = method.body.clone();
        for pc in 0..body.len() {
            let Instr::New { dst, class: ty } = &body[pc] else {
                continue;
            };
            let Some(bv) = mapping.get(ty) else { continue };
            let Some(init_pc) = constructor_call(&body, pc, dst, ty) else {
                continue;
            };
            let Instr::Invoke { target, .. } = &body[init_pc] else {
                unreachable!()
            };
            let arity = target.arity;
            if program
                .class(bv)
                .and_then(|c| c.method(CONSTRUCTOR, arity))
                .is_none()
            {
                return Err(InstrumentError::MissingConstructor {
                    site: Site::new(sig.clone(), init_pc),
                    class: bv.clone(),
                    arity,
                });
            }
            let (dst, bv) = (dst.clone(), bv.clone());
            body[pc] = Instr::New {
                dst,
                class: bv.clone(),
            };
            if let Instr::Invoke { target, .. } = &mut body[init_pc] {
                *target = MethodSig::new(bv, CONSTRUCTOR, arity);
            }
        }
        out.classes.get_mut(&class).unwrap().methods[idx].body = body;
    }
    Ok(out)
}

/// Index of the constructor call initializing the object allocated at `pc`.
fn constructor_call(body: &[Instr], pc: usize, local: &str, class: &str) -> Option<usize> {
    for (i, instr) in body.iter().enumerate().skip(pc + 1) {
        if let Instr::Invoke {
            kind: InvokeKind::Special,
            target,
            args,
            ..
        } = instr
        {
            if target.is_constructor()
                && target.class == class
                && args.first().map(String::as_str) == Some(local)
            {
                return Some(i);
            }
        }
        if instr.def() == Some(local) {
            return None;
        }
    }
    None
}

fn is_block_boundary(instr: &Instr) -> bool {
    matches!(
        instr,
        Instr::Label { .. } | Instr::Goto { .. } | Instr::IfNondet { .. } | Instr::Return { .. }
    )
}

/// Replaces `r = vcall ..findViewById(..); w = cast W r` by a construction of
/// `W`'s BabelView. Returns the rewritten program and lint notes for results
/// that are used without a cast.
pub fn rewrite_findviewbyid(
    program: &Program,
    mapping: &BTreeMap<String, String>,
) -> (Program, Vec<String>) {
    let mut out = program.clone();
    let mut notes = Vec::new();
    for (class, idx) in rewritable_methods(program) {
        let method = &program.classes[&class].methods[idx];
        let sig = method.sig(&class);
        let types = local_types(program, &class, method);
        let mut body = method.body.clone();
        let mut spans = method.instr_spans.clone();
        let mut pc = 0;
        while pc < body.len() {
            let Instr::Invoke {
                dst: Some(r),
                target,
                args,
                ..
            } = &body[pc]
            else {
                pc += 1;
                continue;
            };
            let is_find = target.name == FIND_VIEW
                && program
                    .resolve_sig(target)
                    .and_then(|s| program.class(&s.class))
                    .is_some_and(|c| c.is_external);
            if !is_find {
                pc += 1;
                continue;
            }
            let (r, receiver) = (r.clone(), args.first().cloned());
            let uses: Vec<usize> = body
                .iter()
                .enumerate()
                .filter(|(_, i)| i.uses().contains(&r.as_str()))
                .map(|(i, _)| i)
                .collect();
            let casts = uses
                .iter()
                .any(|&u| matches!(&body[u], Instr::Cast { src, .. } if *src == r));
            if !casts {
                notes.push(format!(
                    "{}: {FIND_VIEW} result `{r}` is not cast to a Webview class; left unchanged",
                    Site::new(sig.clone(), pc)
                ));
                pc += 1;
                continue;
            }
            let &[cast_pc] = uses.as_slice() else {
                pc += 1;
                continue;
            };
            let Instr::Cast { dst: w, ty, .. } = &body[cast_pc] else {
                pc += 1;
                continue;
            };
            let Some(bv) = mapping.get(ty) else {
                pc += 1;
                continue;
            };
            let between = &body[pc + 1..cast_pc.max(pc + 1)];
            let same_block = cast_pc > pc
                && between.iter().all(|i| {
                    !is_block_boundary(i)
                        && i.def() != Some(w.as_str())
                        && i.def() != Some(r.as_str())
                        && !i.uses().contains(&w.as_str())
                });
            if !same_block {
                pc += 1;
                continue;
            }
            let (w, bv) = (w.clone(), bv.clone());
            let Some(bv_class) = program.class(&bv) else {
                pc += 1;
                continue;
            };
            let mut ctors: Vec<&MethodDef> = bv_class.constructors().collect();
            ctors.sort_by_key(|m| (m.arity(), m.sig(&bv)));
            let receiver_ty = receiver.as_ref().and_then(|r| types.get(r));
            let satisfiable = |m: &MethodDef| {
                m.params
                    .iter()
                    .all(|p| receiver_ty.is_some_and(|t| program.is_subtype_lenient(t, &p.ty)))
            };
            let chosen = ctors
                .iter()
                .find(|m| satisfiable(m))
                .or(ctors.first())
                .copied();
            let Some(ctor) = chosen else {
                pc += 1;
                continue;
            };
            let mut call_args = vec![w.clone()];
            let mut prelude = Vec::new();
            for (i, p) in ctor.params.iter().enumerate() {
                if receiver_ty.is_some_and(|t| program.is_subtype_lenient(t, &p.ty)) {
                    call_args.push(receiver.clone().unwrap());
                    continue;
                }
                let dummy = format!("bv$arg{i}");
                prelude.push(dummy_value(&dummy, &p.ty));
                call_args.push(dummy);
            }
            body[pc] = Instr::New {
                dst: w.clone(),
                class: bv.clone(),
            };
            body[cast_pc] = Instr::Invoke {
                dst: None,
                kind: InvokeKind::Special,
                target: ctor.sig(&bv),
                args: call_args,
            };
            let shift = prelude.len();
            for (k, instr) in prelude.into_iter().enumerate() {
                body.insert(pc + k, instr);
                spans.insert(pc + k, Span::default());
            }
            pc += shift + 1;
        }
        let m = &mut out.classes.get_mut(&class).unwrap().methods[idx];
        m.body = body;
        m.instr_spans = spans;
    }
    (out, notes)
}

fn dummy_value(dst: &str, ty: &str) -> Instr {
    let dst = dst.to_string();
    if is_primitive(ty) {
        Instr::ConstInt { dst, value: 0 }
    } else if ty == "String" {
        Instr::ConstString {
            dst,
            value: String::new(),
        }
    } else {
        Instr::New {
            dst,
            class: ty.to_string(),
        }
    }
}

/// Names of the BabelView classes for every mapped Webview.
pub fn babelview_mapping(map: &WebviewInterfaceMap) -> BTreeMap<String, String> {
    map.entries
        .keys()
        .map(|w| (w.clone(), babelview_name(w)))
        .collect()
}
