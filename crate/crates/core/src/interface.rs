//! Discovery of Webview classes and the interface objects registered on them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::air::{local_types, Instr, MethodSig, Program, Site, OBJECT};
use crate::callgraph::CallGraph;
use crate::generate::is_generated_class;

pub const WEBVIEW: &str = "WebView";
pub const ADD_INTERFACE: &str = "addJavascriptInterface";
/// Lowest API level at which only annotated methods are exported.
pub const ANNOTATION_API: u32 = 17;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum InterfaceError {
    #[error("`{0}` is not a mapped Webview class")]
    UnknownWebview(String),
}

/// One `addJavascriptInterface` call that contributed to the map.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Registration {
    pub site: Site,
    pub receiver_type: String,
    pub object_type: String,
    /// JavaScript-side binding name, when it is a string constant.
    pub binding: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebviewInterfaceMap {
    pub entries: BTreeMap<String, BTreeSet<String>>,
    pub provenance: BTreeMap<String, BTreeSet<Registration>>,
}

impl WebviewInterfaceMap {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every interface class registered on any Webview.
    pub fn interface_classes(&self) -> BTreeSet<String> {
        self.entries.values().flatten().cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InterfaceMethod {
    /// Interface class the method is invoked on.
    pub owner: String,
    /// Signature of the declaration that runs, possibly in a superclass.
    pub sig: MethodSig,
    pub params: Vec<String>,
    pub ret: String,
}

impl InterfaceMethod {
    /// `owner.name/arity`, the signature as seen through the owner.
    pub fn owner_sig(&self) -> MethodSig {
        MethodSig::new(&self.owner, &self.sig.name, self.sig.arity)
    }
}

fn const_string_before(program: &Program, site: &Site, local: &str) -> Option<String> {
    let m = program.method(&site.method)?;
    m.body[..site.index].iter().rev().find_map(|i| match i {
        Instr::ConstString { dst, value } if dst == local => Some(Some(value.clone())),
        other if other.def() == Some(local) => Some(None),
        _ => None,
    })?
}

/// Can instances of `class` expose methods to JavaScript at this API level?
fn exposes_methods(program: &Program, class: &str) -> bool {
    if program.manifest.target_api >= ANNOTATION_API {
        program.has_js_interface_method(class)
    } else {
        !candidate_methods(program, class).is_empty()
    }
}

/// Visible non-static, non-constructor methods of `class`, by nearest
/// declaration, restricted to the exported set for the program's API level.
pub(crate) fn candidate_methods(program: &Program, class: &str) -> Vec<InterfaceMethod> {
    let legacy = program.manifest.target_api < ANNOTATION_API;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for ancestor in program.ancestors(class) {
        let Some(cd) = program.class(&ancestor) else {
            continue;
        };
        for m in &cd.methods {
            if m.is_static || m.is_constructor || !seen.insert((m.name.clone(), m.arity())) {
                continue;
            }
            let exported = if legacy {
                !cd.is_external
            } else {
                m.is_js_interface()
            };
            if exported {
                out.push(InterfaceMethod {
                    owner: class.to_string(),
                    sig: m.sig(&ancestor),
                    params: m.params.iter().map(|p| p.ty.clone()).collect(),
                    ret: m.ret.clone(),
                });
            }
        }
    }
    out
}

/// Sites whose CHA callees include the platform `addJavascriptInterface`.
pub fn registration_sites(graph: &CallGraph) -> Vec<Site> {
    let stub = MethodSig::new(WEBVIEW, ADD_INTERFACE, 3);
    graph
        .edges
        .iter()
        .filter(|e| e.callee == stub && !is_generated_class(&e.caller.class))
        .map(|e| e.site.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

pub fn map_webviews(program: &Program, graph: &CallGraph) -> WebviewInterfaceMap {
    let mut map = WebviewInterfaceMap::default();
    for site in registration_sites(graph) {
        let Some(method) = program.method(&site.method) else {
            continue;
        };
        let Instr::Invoke { args, .. } = &method.body[site.index] else {
            continue;
        };
        if args.len() != 3 {
            continue;
        }
        let types = local_types(program, &site.method.class, method);
        let ty = |l: &str| types.get(l).cloned().unwrap_or_else(|| OBJECT.to_string());
        let (recv_ty, obj_ty) = (ty(&args[0]), ty(&args[1]));
        let keys: BTreeSet<String> = program
            .subclasses(&recv_ty)
            .unwrap_or_default()
            .into_iter()
            .filter(|s| program.is_subtype_lenient(s, WEBVIEW) && !is_generated_class(s))
            .collect();
        let values: BTreeSet<String> = program
            .subclasses(&obj_ty)
            .unwrap_or_default()
            .into_iter()
            .filter(|s| !is_generated_class(s) && exposes_methods(program, s))
            .collect();
        if keys.is_empty() || values.is_empty() {
            continue;
        }
        let reg = Registration {
            binding: const_string_before(program, &site, &args[2]),
            site,
            receiver_type: recv_ty,
            object_type: obj_ty,
        };
        for k in keys {
            map.entries
                .entry(k.clone())
                .or_default()
                .extend(values.iter().cloned());
            map.provenance.entry(k).or_default().insert(reg.clone());
        }
    }
    map
}

/// Methods JavaScript may call on objects registered with `webview`.
pub fn interface_methods(
    program: &Program,
    map: &WebviewInterfaceMap,
    webview: &str,
) -> Result<BTreeSet<InterfaceMethod>, InterfaceError> {
    let classes = map
        .entries
        .get(webview)
        .ok_or_else(|| InterfaceError::UnknownWebview(webview.to_string()))?;
    Ok(classes
        .iter()
        .flat_map(|c| candidate_methods(program, c))
        .collect())
}

/// Every interface method across all mapped Webviews.
pub fn all_interface_methods(
    program: &Program,
    map: &WebviewInterfaceMap,
) -> BTreeSet<InterfaceMethod> {
    map.interface_classes()
        .iter()
        .flat_map(|c| candidate_methods(program, c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::air::parse_program;
    use crate::callgraph::build_callgraph;

    #[test]
    fn no_registration_gives_empty_map() {
        let p = parse_program(
            "manifest { target_api = 19; entry A.onCreate/2; }
             class A extends Activity {
               method onCreate(b : Bundle) : void {
                 w = new WebView; kcall WebView.<init>/1(w);
                 u = \"http://x\"; vcall WebView.loadUrl/2(w, u); return;
               }
             }",
        )
        .unwrap();
        let g = build_callgraph(&p).unwrap();
        assert!(map_webviews(&p, &g).is_empty());
    }

    #[test]
    fn unknown_key_is_an_error() {
        let p = parse_program("").unwrap();
        let map = WebviewInterfaceMap::default();
        assert_eq!(
            interface_methods(&p, &map, "WebView"),
            Err(InterfaceError::UnknownWebview("WebView".into()))
        );
    }
}
