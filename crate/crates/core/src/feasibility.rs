//! Static evidence that injected script could reach a Webview.

use std::collections::BTreeSet;

use crate::air::{Instr, Program};
use crate::alarms::{Feasibility, HttpUrl};
use crate::interface::WebviewInterfaceMap;

const INSECURE_SCHEME: &str = "http://";

/// Every string constant in application code that starts with `http://`,
/// matching the scheme case-insensitively.
pub fn scan_http_urls(program: &Program) -> Vec<HttpUrl> {
    let mut out = BTreeSet::new();
    for (sig, m) in program.app_methods() {
        for instr in &m.body {
            let Instr::ConstString { value, .. } = instr else {
                continue;
            };
            let insecure = value
                .get(..INSECURE_SCHEME.len())
                .is_some_and(|p| p.eq_ignore_ascii_case(INSECURE_SCHEME));
            if insecure {
                out.insert(HttpUrl {
                    class: sig.class.clone(),
                    method: sig.name.clone(),
                    url: value.clone(),
                });
            }
        }
    }
    out.into_iter().collect()
}

/// JavaScript names under which interface objects are registered.
pub fn interface_object_names(map: &WebviewInterfaceMap) -> Vec<String> {
    map.provenance
        .values()
        .flatten()
        .filter_map(|r| r.binding.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

pub fn feasibility(program: &Program, map: &WebviewInterfaceMap) -> Feasibility {
    Feasibility {
        http_urls: scan_http_urls(program),
        interface_objects: interface_object_names(map),
        ..Feasibility::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::air::parse_program;

    #[test]
    fn only_plain_http_is_reported() {
        let p = parse_program(
            "class A {
               method f() : void {
                 a = \"http://ads.example/init\";
                 b = \"https://secure.example\";
                 c = \"HTTP://LOUD.example\";
                 return;
               }
             }",
        )
        .unwrap();
        let urls: Vec<String> = scan_http_urls(&p).into_iter().map(|u| u.url).collect();
        assert_eq!(urls, ["HTTP://LOUD.example", "http://ads.example/init"]);
    }

    #[test]
    fn no_strings_no_urls() {
        assert!(scan_http_urls(&parse_program("").unwrap()).is_empty());
    }
}
