//! Source, sink and wrapper configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::air::{MethodSig, Program};
use crate::generate::{is_generated_class, LEAK, TAINT_SOURCE};

pub const DEFAULT_CONFIG: &str = include_str!("default.cfg");
pub const ATTACKER_INPUT: &str = "attacker-input";
pub const WEB_EXFILTRATION: &str = "web-exfiltration";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("config line {line}: duplicate {kind} label `{label}`")]
    DuplicateLabel {
        line: usize,
        kind: &'static str,
        label: String,
    },
    #[error("config line {line}: signature `{sig}` does not resolve")]
    Unresolved { line: usize, sig: MethodSig },
}

/// A value position at a call: the result, the receiver, or a declared
/// parameter counted from 0 without the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Position {
    Return,
    Receiver,
    Arg(usize),
}

impl Position {
    fn parse(text: &str) -> Option<Position> {
        match text {
            "return" => Some(Position::Return),
            "receiver" => Some(Position::Receiver),
            _ => text.strip_prefix("arg")?.parse().ok().map(Position::Arg),
        }
    }

    /// Index into the argument list of a call, which starts with the
    /// receiver for instance methods.
    pub fn arg_index(self, is_static: bool) -> Option<usize> {
        match self {
            Position::Return => None,
            Position::Receiver => (!is_static).then_some(0),
            Position::Arg(n) => Some(n + usize::from(!is_static)),
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::Return => f.write_str("return"),
            Position::Receiver => f.write_str("receiver"),
            Position::Arg(n) => write!(f, "arg{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WrapKind {
    Propagate,
    Clear,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceRule {
    pub sig: MethodSig,
    pub label: String,
    pub taints: Vec<Position>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SinkRule {
    pub sig: MethodSig,
    pub label: String,
    pub observes: Vec<Position>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrapRule {
    pub sig: MethodSig,
    pub kind: WrapKind,
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceSinkConfig {
    pub sources: Vec<SourceRule>,
    pub sinks: Vec<SinkRule>,
    pub wrappers: Vec<WrapRule>,
    pub suspicious_keys: Vec<String>,
    pub suspicious_methods: Vec<String>,
}

fn key_values<'a>(
    line: usize,
    parts: &[&'a str],
) -> Result<BTreeMap<&'a str, &'a str>, ConfigError> {
    parts
        .iter()
        .map(|p| {
            p.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected key=value, found `{p}`"),
            })
        })
        .collect()
}

fn positions(line: usize, text: &str, allow_return: bool) -> Result<Vec<Position>, ConfigError> {
    text.split(',')
        .map(|t| match Position::parse(t.trim()) {
            Some(Position::Return) if !allow_return => Err(ConfigError::Syntax {
                line,
                message: "a sink cannot observe the return value".into(),
            }),
            Some(p) => Ok(p),
            None => Err(ConfigError::Syntax {
                line,
                message: format!("bad position `{t}`"),
            }),
        })
        .collect()
}

impl SourceSinkConfig {
    pub fn parse(text: &str) -> Result<SourceSinkConfig, ConfigError> {
        let mut cfg = SourceSinkConfig::default();
        let mut source_labels = BTreeSet::new();
        let mut sink_labels = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let parts: Vec<&str> = content.split_whitespace().collect();
            let syntax = |message: String| ConfigError::Syntax { line, message };
            match parts[0] {
                "suspicious" => {
                    let kv = key_values(line, &parts[1..])?;
                    for (k, v) in kv {
                        let terms = v
                            .split(',')
                            .map(|t| t.trim().to_string())
                            .filter(|t| !t.is_empty());
                        match k {
                            "key" => cfg.suspicious_keys.extend(terms),
                            "method" => cfg.suspicious_methods.extend(terms),
                            other => {
                                return Err(syntax(format!("unknown suspicious list `{other}`")))
                            }
                        }
                    }
                }
                kind @ ("source" | "sink" | "wrap") => {
                    let sig_text = parts
                        .get(1)
                        .ok_or_else(|| syntax("missing signature".into()))?;
                    let sig = MethodSig::parse(sig_text)
                        .ok_or_else(|| syntax(format!("bad signature `{sig_text}`")))?;
                    let kv = key_values(line, &parts[2..])?;
                    let get = |k: &str| {
                        kv.get(k)
                            .copied()
                            .ok_or_else(|| syntax(format!("missing `{k}=`")))
                    };
                    match kind {
                        "source" => {
                            let label = get("label")?.to_string();
                            if !source_labels.insert(label.clone()) {
                                return Err(ConfigError::DuplicateLabel {
                                    line,
                                    kind: "source",
                                    label,
                                });
                            }
                            let taints = positions(line, get("taints")?, true)?;
                            cfg.sources.push(SourceRule {
                                sig,
                                label,
                                taints,
                                line,
                            });
                        }
                        "sink" => {
                            let label = get("label")?.to_string();
                            if !sink_labels.insert(label.clone()) {
                                return Err(ConfigError::DuplicateLabel {
                                    line,
                                    kind: "sink",
                                    label,
                                });
                            }
                            let observes = positions(line, get("observes")?, false)?;
                            cfg.sinks.push(SinkRule {
                                sig,
                                label,
                                observes,
                                line,
                            });
                        }
                        _ => {
                            let kind = match get("rule")? {
                                "propagate" => WrapKind::Propagate,
                                "clear" => WrapKind::Clear,
                                "ignore" => WrapKind::Ignore,
                                other => return Err(syntax(format!("unknown rule `{other}`"))),
                            };
                            cfg.wrappers.push(WrapRule { sig, kind, line });
                        }
                    }
                }
                other => return Err(syntax(format!("unknown directive `{other}`"))),
            }
        }
        Ok(cfg)
    }

    pub fn default_config() -> SourceSinkConfig {
        SourceSinkConfig::parse(DEFAULT_CONFIG).expect("bundled configuration parses")
    }

    /// Suspicious terms for interface method names: the key list plus the
    /// method-specific list.
    pub fn suspicious_method_terms(&self) -> Vec<String> {
        let mut terms = self.suspicious_keys.clone();
        terms.extend(self.suspicious_methods.iter().cloned());
        terms
    }

    /// Binds every rule to the declaration its signature resolves to.
    pub fn resolve(&self, program: &Program) -> Result<ResolvedConfig, ConfigError> {
        let mut models: BTreeMap<MethodSig, Model> = BTreeMap::new();
        let resolve = |sig: &MethodSig, line: usize| {
            program
                .resolve_sig(sig)
                .ok_or_else(|| ConfigError::Unresolved {
                    line,
                    sig: sig.clone(),
                })
        };
        for s in &self.sources {
            let sig = resolve(&s.sig, s.line)?;
            models
                .entry(sig)
                .or_default()
                .sources
                .push((s.label.clone(), s.taints.clone()));
        }
        for s in &self.sinks {
            let sig = resolve(&s.sig, s.line)?;
            models
                .entry(sig)
                .or_default()
                .sinks
                .push((s.label.clone(), s.observes.clone()));
        }
        for w in &self.wrappers {
            let sig = resolve(&w.sig, w.line)?;
            models.entry(sig).or_default().wrap = Some(w.kind);
        }
        Ok(ResolvedConfig {
            models,
            suspicious_keys: self.suspicious_keys.clone(),
            suspicious_methods: self.suspicious_method_terms(),
        })
    }
}

/// How calls to one method are treated.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Model {
    pub sources: Vec<(String, Vec<Position>)>,
    pub sinks: Vec<(String, Vec<Position>)>,
    pub wrap: Option<WrapKind>,
}

/// Effect of a call on taint beyond its source and sink rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Effect {
    /// Analyze the callee body.
    Descend,
    /// Apply a wrapper rule instead of the body.
    Wrap(WrapKind),
    /// Only the source and sink rules apply.
    Rules,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResolvedConfig {
    pub models: BTreeMap<MethodSig, Model>,
    pub suspicious_keys: Vec<String>,
    pub suspicious_methods: Vec<String>,
}

impl ResolvedConfig {
    /// Rules for a resolved callee. Generated `taintSource`/`leak` methods
    /// carry built-in rules; platform methods without rules propagate.
    pub fn rules_for(&self, program: &Program, sig: &MethodSig) -> (Model, Effect) {
        if is_generated_class(&sig.class) {
            if sig.name == TAINT_SOURCE && sig.arity == 1 {
                return (
                    Model {
                        sources: vec![(ATTACKER_INPUT.to_string(), vec![Position::Return])],
                        ..Model::default()
                    },
                    Effect::Rules,
                );
            }
            if sig.name == LEAK && sig.arity == 2 {
                return (
                    Model {
                        sinks: vec![(WEB_EXFILTRATION.to_string(), vec![Position::Arg(0)])],
                        ..Model::default()
                    },
                    Effect::Rules,
                );
            }
        }
        let external = program.class(&sig.class).is_some_and(|c| c.is_external);
        match self.models.get(sig) {
            Some(m) => {
                let effect = match m.wrap {
                    Some(w) => Effect::Wrap(w),
                    None if external && m.sources.is_empty() && m.sinks.is_empty() => {
                        Effect::Wrap(WrapKind::Propagate)
                    }
                    None => Effect::Rules,
                };
                (m.clone(), effect)
            }
            None if external => (Model::default(), Effect::Wrap(WrapKind::Propagate)),
            None => (Model::default(), Effect::Descend),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::air::parse_program;

    #[test]
    fn every_default_signature_resolves() {
        let p = parse_program("").unwrap();
        let cfg = SourceSinkConfig::default_config();
        let resolved = cfg.resolve(&p).unwrap();
        assert!(resolved.models.len() > 40);
    }

    #[test]
    fn duplicate_labels_rejected() {
        let e = SourceSinkConfig::parse(
            "sink WebView.loadUrl/2 label=x observes=arg0\nsink WebView.postUrl/3 label=x observes=arg0",
        )
        .unwrap_err();
        assert!(matches!(e, ConfigError::DuplicateLabel { line: 2, .. }));
    }

    #[test]
    fn unresolved_signature_rejected() {
        let p = parse_program("").unwrap();
        let cfg = SourceSinkConfig::parse("source Nope.x/1 label=a taints=return").unwrap();
        assert!(matches!(
            cfg.resolve(&p),
            Err(ConfigError::Unresolved { line: 1, .. })
        ));
    }

    #[test]
    fn argument_positions_skip_receiver() {
        assert_eq!(Position::Arg(1).arg_index(false), Some(2));
        assert_eq!(Position::Arg(1).arg_index(true), Some(1));
        assert_eq!(Position::Receiver.arg_index(true), None);
    }
}
