//! Synthesis of BabelView subclasses carrying the attacker model.
//!
//! For a Webview class `W` with registered interface classes `X1..Xn` the
//! generated `W$BabelView` extends `W`, mirrors its constructors, captures
//! registered objects in one field per interface class and overrides the
//! four content-loading methods so that each load runs the attacker after
//! the parent implementation. The attacker method loops, and on each
//! iteration picks one interface method, calls it with fresh tainted
//! arguments and hands any result to `leak`.

use std::collections::BTreeSet;

use crate::air::{
    render_class, ClassDef, FieldDef, Instr, InvokeKind, MethodDef, MethodSig, Param, Program,
    Span, CONSTRUCTOR, OBJECT, THIS,
};
use crate::interface::{candidate_methods, InterfaceMethod, ADD_INTERFACE, WEBVIEW};

pub const SUFFIX: &str = "$BabelView";
pub const ATTACKER: &str = "attacker";
pub const LEAK: &str = "leak";
pub const TAINT_SOURCE: &str = "taintSource";
pub const FIELD_PREFIX: &str = "iface$";
/// Platform methods that load web content and so may run injected script.
pub const LOAD_METHODS: [&str; 4] = ["loadUrl", "postUrl", "loadData", "loadDataWithBaseURL"];

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GenError {
    #[error("Webview class `{0}` not found")]
    UnknownWebview(String),
    #[error("no interface classes for `{0}`")]
    NoInterfaces(String),
    #[error("interface class `{0}` not found")]
    UnknownInterface(String),
}

pub fn is_generated_class(name: &str) -> bool {
    name.ends_with(SUFFIX)
}

pub fn babelview_name(webview: &str) -> String {
    format!("{webview}{SUFFIX}")
}

pub fn is_attacker_method(sig: &MethodSig) -> bool {
    is_generated_class(&sig.class) && sig.name == ATTACKER && sig.arity == 1
}

pub fn interface_field(class: &str) -> String {
    format!("{FIELD_PREFIX}{class}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BabelViewClass {
    pub class: ClassDef,
    pub parent: String,
    /// `(field name, interface class)` pairs in declaration order.
    pub interface_fields: Vec<(String, String)>,
    /// One entry per attacker branch, in branch order.
    pub branches: Vec<InterfaceMethod>,
}

fn method(name: &str, params: Vec<Param>, ret: &str, body: Vec<Instr>) -> MethodDef {
    MethodDef {
        is_constructor: name == CONSTRUCTOR,
        name: name.to_string(),
        params,
        ret: ret.to_string(),
        is_static: false,
        annotations: BTreeSet::new(),
        instr_spans: vec![Span::default(); body.len()],
        body,
        span: Span::default(),
    }
}

fn call(dst: Option<String>, kind: InvokeKind, target: MethodSig, args: Vec<String>) -> Instr {
    Instr::Invoke {
        dst,
        kind,
        target,
        args,
    }
}

fn label(name: impl Into<String>) -> Instr {
    Instr::Label { name: name.into() }
}

fn numbered_params(types: &[String]) -> Vec<Param> {
    types
        .iter()
        .enumerate()
        .map(|(i, ty)| Param {
            name: format!("p{i}"),
            ty: ty.clone(),
        })
        .collect()
}

/// A call of `target` forwarding `this` followed by every parameter.
fn forward(kind: InvokeKind, target: MethodSig, params: &[Param]) -> Instr {
    let mut args = vec![THIS.to_string()];
    args.extend(params.iter().map(|p| p.name.clone()));
    call(None, kind, target, args)
}

/// Methods of the interface classes that the attacker may call, ordered by
/// owner class then signature.
fn attacker_methods(program: &Program, ifaces: &BTreeSet<String>) -> Vec<InterfaceMethod> {
    ifaces
        .iter()
        .flat_map(|owner| {
            let mut mine = candidate_methods(program, owner);
            mine.sort_by_key(InterfaceMethod::owner_sig);
            mine
        })
        .collect()
}

pub fn generate_babelview(
    program: &Program,
    webview: &str,
    ifaces: &BTreeSet<String>,
) -> Result<BabelViewClass, GenError> {
    let parent = program
        .class(webview)
        .ok_or_else(|| GenError::UnknownWebview(webview.to_string()))?;
    if ifaces.is_empty() {
        return Err(GenError::NoInterfaces(webview.to_string()));
    }
    if let Some(missing) = ifaces.iter().find(|c| !program.has_class(c)) {
        return Err(GenError::UnknownInterface(missing.clone()));
    }
    let name = babelview_name(webview);
    let me = |m: &str, arity: usize| MethodSig::new(&name, m, arity);
    let mut methods = Vec::new();

    let mut ctors: Vec<&MethodDef> = parent.constructors().collect();
    ctors.sort_by_key(|m| m.arity());
    if ctors.is_empty() {
        methods.push(method(
            CONSTRUCTOR,
            vec![],
            "void",
            vec![Instr::Return { value: None }],
        ));
    }
    for ctor in ctors {
        let params = numbered_params(&ctor.params.iter().map(|p| p.ty.clone()).collect::<Vec<_>>());
        let body = vec![
            forward(InvokeKind::Special, ctor.sig(webview), &params),
            Instr::Return { value: None },
        ];
        methods.push(method(CONSTRUCTOR, params, "void", body));
    }

    let interface_fields: Vec<(String, String)> = ifaces
        .iter()
        .map(|c| (interface_field(c), c.clone()))
        .collect();

    // addJavascriptInterface: register with the parent, then keep the object
    // in the field of whichever interface class it turns out to be.
    let reg_params = vec![
        Param {
            name: "obj".into(),
            ty: OBJECT.into(),
        },
        Param {
            name: "name".into(),
            ty: "String".into(),
        },
    ];
    let mut body = vec![forward(
        InvokeKind::Special,
        MethodSig::new(webview, ADD_INTERFACE, 3),
        &reg_params,
    )];
    for (i, (field, class)) in interface_fields.iter().enumerate() {
        let last = i + 1 == interface_fields.len();
        if !last {
            body.push(Instr::IfNondet {
                label: format!("store{}", i + 1),
            });
        }
        let local = format!("c{i}");
        body.push(Instr::Cast {
            dst: local.clone(),
            ty: class.clone(),
            src: "obj".into(),
        });
        body.push(Instr::InstancePut {
            base: THIS.into(),
            field: field.clone(),
            src: local,
        });
        if !last {
            body.push(Instr::Goto {
                label: "stored".into(),
            });
            body.push(label(format!("store{}", i + 1)));
        }
    }
    if interface_fields.len() > 1 {
        body.push(label("stored"));
    }
    body.push(Instr::Return { value: None });
    methods.push(method(ADD_INTERFACE, reg_params, "void", body));

    let webview_stub = program.class(WEBVIEW);
    for load in LOAD_METHODS {
        let Some(decl) = webview_stub.and_then(|c| c.methods.iter().find(|m| m.name == load))
        else {
            continue;
        };
        let params = numbered_params(&decl.params.iter().map(|p| p.ty.clone()).collect::<Vec<_>>());
        let body = vec![
            forward(
                InvokeKind::Special,
                MethodSig::new(webview, load, decl.arity()),
                &params,
            ),
            call(
                None,
                InvokeKind::Virtual,
                me(ATTACKER, 1),
                vec![THIS.into()],
            ),
            Instr::Return { value: None },
        ];
        methods.push(method(load, params, "void", body));
    }

    let branches = attacker_methods(program, ifaces);
    methods.push(method(
        ATTACKER,
        vec![],
        "void",
        attacker_body(&name, &branches),
    ));
    methods.push(method(
        LEAK,
        vec![Param {
            name: "v".into(),
            ty: OBJECT.into(),
        }],
        "void",
        vec![Instr::Return { value: None }],
    ));
    methods.push(method(
        TAINT_SOURCE,
        vec![],
        OBJECT,
        vec![
            Instr::New {
                dst: "r".into(),
                class: OBJECT.into(),
            },
            Instr::Return {
                value: Some("r".into()),
            },
        ],
    ));

    let class = ClassDef {
        name,
        superclass: Some(webview.to_string()),
        is_final: false,
        is_external: false,
        fields: interface_fields
            .iter()
            .map(|(f, c)| FieldDef {
                name: f.clone(),
                ty: c.clone(),
                is_static: false,
            })
            .collect(),
        methods,
        span: Span::default(),
    };
    Ok(BabelViewClass {
        class,
        parent: webview.to_string(),
        interface_fields,
        branches,
    })
}

/// Loop with a nondeterministic exit whose body picks one branch per
/// iteration.
fn attacker_body(class: &str, branches: &[InterfaceMethod]) -> Vec<Instr> {
    let source = MethodSig::new(class, TAINT_SOURCE, 1);
    let leak = MethodSig::new(class, LEAK, 2);
    let mut body = vec![
        label("loop"),
        Instr::IfNondet {
            label: "done".into(),
        },
    ];
    for (i, b) in branches.iter().enumerate() {
        if i + 1 < branches.len() {
            body.push(Instr::IfNondet {
                label: format!("branch{}", i + 1),
            });
        }
        let obj = format!("o{i}");
        body.push(Instr::InstanceGet {
            dst: obj.clone(),
            base: THIS.into(),
            field: interface_field(&b.owner),
        });
        let mut args = vec![obj];
        for j in 0..b.params.len() {
            let a = format!("a{i}_{j}");
            body.push(call(
                Some(a.clone()),
                InvokeKind::Virtual,
                source.clone(),
                vec![THIS.into()],
            ));
            args.push(a);
        }
        let target = b.owner_sig();
        if b.ret == "void" {
            body.push(call(None, InvokeKind::Virtual, target, args));
        } else {
            let r = format!("r{i}");
            body.push(call(Some(r.clone()), InvokeKind::Virtual, target, args));
            body.push(call(
                None,
                InvokeKind::Virtual,
                leak.clone(),
                vec![THIS.into(), r],
            ));
        }
        body.push(Instr::Goto {
            label: "loop".into(),
        });
        if i + 1 < branches.len() {
            body.push(label(format!("branch{}", i + 1)));
        }
    }
    if branches.is_empty() {
        body.push(Instr::Goto {
            label: "loop".into(),
        });
    }
    body.push(label("done"));
    body.push(Instr::Return { value: None });
    body
}

/// AIR text of the generated class.
pub fn render_airtext(bv: &BabelViewClass) -> String {
    render_class(&bv.class)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::air::parse_program;

    const APP: &str = "
        class Bridge {
          method <init>() : void { return; }
          @JavascriptInterface
          method ping() : void { return; }
        }";

    #[test]
    fn degenerate_branch_has_bare_call() {
        let p = parse_program(APP).unwrap();
        let bv =
            generate_babelview(&p, "WebView", &BTreeSet::from(["Bridge".to_string()])).unwrap();
        let attacker = bv.class.method(ATTACKER, 1).unwrap();
        let calls: Vec<&MethodSig> = attacker
            .body
            .iter()
            .filter_map(|i| match i {
                Instr::Invoke { target, .. } => Some(target),
                _ => None,
            })
            .collect();
        assert_eq!(calls, vec![&MethodSig::new("Bridge", "ping", 1)]);
    }

    #[test]
    fn empty_interface_set_is_rejected() {
        let p = parse_program(APP).unwrap();
        assert_eq!(
            generate_babelview(&p, "WebView", &BTreeSet::new()),
            Err(GenError::NoInterfaces("WebView".into()))
        );
    }

    #[test]
    fn loads_call_parent_then_attacker() {
        let p = parse_program(APP).unwrap();
        let bv =
            generate_babelview(&p, "WebView", &BTreeSet::from(["Bridge".to_string()])).unwrap();
        let text = render_airtext(&bv);
        assert!(text.starts_with("class WebView$BabelView extends WebView {"));
        assert!(text.contains(
            "method loadUrl(p0 : String) : void {\n    kcall WebView.loadUrl/2(this, p0);\n    vcall WebView$BabelView.attacker/1(this);"
        ));
    }
}
