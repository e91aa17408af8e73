//! App Intermediate Representation.
//!
//! AIR is a small textual three-address form: classes with fields and
//! annotated methods, instruction bodies, and a manifest block carrying the
//! target API level and life-cycle entry points. Platform classes are loaded
//! from a bundled stub file and flagged external.

mod hierarchy;
mod lexer;
mod parser;
mod printer;
pub mod stubs;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use hierarchy::{is_primitive, local_types};
pub use parser::{parse_document, parse_program, parse_program_with_stubs, RawDocument};
pub use printer::{render_class, render_program};
pub use validate::validate;

/// Name of the annotation that exports a method to JavaScript.
pub const JS_INTERFACE: &str = "JavascriptInterface";
/// Method name used for constructors.
pub const CONSTRUCTOR: &str = "<init>";
/// Implicit receiver local of instance methods.
pub const THIS: &str = "this";
/// Root of the class hierarchy.
pub const OBJECT: &str = "Object";
/// Target API assumed when a document has no manifest block.
pub const DEFAULT_TARGET_API: u32 = 17;

/// Source position. Positions never take part in equality so that a
/// re-parsed document compares equal to the original.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// `Class.name/arity`. Arity counts the receiver for instance methods.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MethodSig {
    pub class: String,
    pub name: String,
    pub arity: usize,
}

impl MethodSig {
    pub fn new(class: impl Into<String>, name: impl Into<String>, arity: usize) -> Self {
        MethodSig {
            class: class.into(),
            name: name.into(),
            arity,
        }
    }

    /// Parses the `Class.name/arity` notation.
    pub fn parse(text: &str) -> Option<MethodSig> {
        let (head, arity) = text.trim().rsplit_once('/')?;
        let (class, name) = head.rsplit_once('.')?;
        if class.is_empty() || name.is_empty() {
            return None;
        }
        Some(MethodSig::new(class, name, arity.parse().ok()?))
    }

    pub fn is_constructor(&self) -> bool {
        self.name == CONSTRUCTOR
    }
}

impl fmt::Display for MethodSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}/{}", self.class, self.name, self.arity)
    }
}

/// A program location: method plus instruction index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Site {
    pub method: MethodSig,
    pub index: usize,
}

impl Site {
    pub fn new(method: MethodSig, index: usize) -> Self {
        Site { method, index }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.method, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InvokeKind {
    Virtual,
    Static,
    Special,
}

impl InvokeKind {
    pub fn keyword(self) -> &'static str {
        match self {
            InvokeKind::Virtual => "vcall",
            InvokeKind::Static => "scall",
            InvokeKind::Special => "kcall",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Instr {
    ConstString {
        dst: String,
        value: String,
    },
    ConstInt {
        dst: String,
        value: i64,
    },
    Assign {
        dst: String,
        src: String,
    },
    New {
        dst: String,
        class: String,
    },
    Cast {
        dst: String,
        ty: String,
        src: String,
    },
    InstanceGet {
        dst: String,
        base: String,
        field: String,
    },
    InstancePut {
        base: String,
        field: String,
        src: String,
    },
    StaticGet {
        dst: String,
        class: String,
        field: String,
    },
    StaticPut {
        class: String,
        field: String,
        src: String,
    },
    Invoke {
        dst: Option<String>,
        kind: InvokeKind,
        target: MethodSig,
        args: Vec<String>,
    },
    Return {
        value: Option<String>,
    },
    Goto {
        label: String,
    },
    IfNondet {
        label: String,
    },
    Label {
        name: String,
    },
}

impl Instr {
    /// Local defined by this instruction, if any.
    pub fn def(&self) -> Option<&str> {
        match self {
            Instr::ConstString { dst, .. }
            | Instr::ConstInt { dst, .. }
            | Instr::Assign { dst, .. }
            | Instr::New { dst, .. }
            | Instr::Cast { dst, .. }
            | Instr::InstanceGet { dst, .. }
            | Instr::StaticGet { dst, .. } => Some(dst),
            Instr::Invoke { dst, .. } => dst.as_deref(),
            _ => None,
        }
    }

    /// Locals read by this instruction.
    pub fn uses(&self) -> Vec<&str> {
        match self {
            Instr::Assign { src, .. } | Instr::Cast { src, .. } | Instr::StaticPut { src, .. } => {
                vec![src]
            }
            Instr::InstanceGet { base, .. } => vec![base],
            Instr::InstancePut { base, src, .. } => vec![base, src],
            Instr::Invoke { args, .. } => args.iter().map(String::as_str).collect(),
            Instr::Return { value: Some(v) } => vec![v],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodDef {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: String,
    pub is_static: bool,
    pub is_constructor: bool,
    pub annotations: BTreeSet<String>,
    pub body: Vec<Instr>,
    pub span: Span,
    /// Position of each instruction in `body`.
    pub instr_spans: Vec<Span>,
}

impl MethodDef {
    pub fn arity(&self) -> usize {
        self.params.len() + usize::from(!self.is_static)
    }

    pub fn sig(&self, class: &str) -> MethodSig {
        MethodSig::new(class, &self.name, self.arity())
    }

    pub fn is_js_interface(&self) -> bool {
        self.annotations.contains(JS_INTERFACE)
    }

    /// Parameter types in call-argument order, receiver excluded.
    pub fn param_types(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.ty.as_str()).collect()
    }

    /// Local names bound on entry, in call-argument order.
    pub fn entry_locals(&self) -> Vec<&str> {
        let mut out = Vec::with_capacity(self.arity());
        if !self.is_static {
            out.push(THIS);
        }
        out.extend(self.params.iter().map(|p| p.name.as_str()));
        out
    }

    /// Index of the instruction labelled `name`.
    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.body
            .iter()
            .position(|i| matches!(i, Instr::Label { name: n } if n == name))
    }

    /// Successor instruction indices; `body.len()` stands for method exit.
    pub fn successors(&self, pc: usize) -> Vec<usize> {
        let exit = self.body.len();
        match &self.body[pc] {
            Instr::Return { .. } => vec![exit],
            Instr::Goto { label } => vec![self.label_index(label).unwrap_or(exit)],
            Instr::IfNondet { label } => {
                let target = self.label_index(label).unwrap_or(exit);
                if target == pc + 1 {
                    vec![pc + 1]
                } else {
                    vec![pc + 1, target]
                }
            }
            _ => vec![pc + 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDef {
    pub name: String,
    pub ty: String,
    pub is_static: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDef {
    pub name: String,
    pub superclass: Option<String>,
    pub is_final: bool,
    pub is_external: bool,
    pub fields: Vec<FieldDef>,
    pub methods: Vec<MethodDef>,
    pub span: Span,
}

impl ClassDef {
    pub fn method(&self, name: &str, arity: usize) -> Option<&MethodDef> {
        self.methods
            .iter()
            .find(|m| m.name == name && m.arity() == arity)
    }

    pub fn field(&self, name: &str) -> Option<&FieldDef> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn constructors(&self) -> impl Iterator<Item = &MethodDef> {
        self.methods.iter().filter(|m| m.is_constructor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub target_api: u32,
    pub entry_points: Vec<MethodSig>,
    pub permissions: Vec<String>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            target_api: DEFAULT_TARGET_API,
            entry_points: Vec::new(),
            permissions: Vec::new(),
        }
    }
}

/// A validated application together with the platform stubs it links against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub classes: BTreeMap<String, ClassDef>,
    pub manifest: Manifest,
    pub stub_classes: BTreeMap<String, ClassDef>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AirError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{span}: unresolved type `{name}`")]
    UnresolvedType { name: String, span: Span },
    #[error("{span}: duplicate class `{name}`")]
    DuplicateClass { name: String, span: Span },
    #[error("{span}: inheritance cycle through `{name}`")]
    InheritanceCycle { name: String, span: Span },
    #[error("{span}: unresolved method `{sig}`")]
    UnresolvedMethod { sig: String, span: Span },
    #[error("{span}: unknown field `{field}`")]
    UnknownField { field: String, span: Span },
    #[error("{span}: in {method}: {message}")]
    Invalid {
        method: String,
        message: String,
        span: Span,
    },
    #[error("unknown type `{0}`")]
    UnknownType(String),
}

impl AirError {
    /// Line and column of the diagnostic, when one is attached.
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            AirError::Syntax { line, col, .. } => Some((*line, *col)),
            AirError::UnresolvedType { span, .. }
            | AirError::DuplicateClass { span, .. }
            | AirError::InheritanceCycle { span, .. }
            | AirError::UnresolvedMethod { span, .. }
            | AirError::UnknownField { span, .. }
            | AirError::Invalid { span, .. } => Some((span.line, span.col)),
            AirError::UnknownType(_) => None,
        }
    }
}

impl Program {
    /// A program with no application classes.
    pub fn empty_with_stubs() -> Program {
        Program {
            classes: BTreeMap::new(),
            manifest: Manifest::default(),
            stub_classes: stubs::platform_stubs().clone(),
        }
    }

    pub fn class(&self, name: &str) -> Option<&ClassDef> {
        self.classes
            .get(name)
            .or_else(|| self.stub_classes.get(name))
    }

    /// Every class, application classes first, each group sorted by name.
    pub fn all_classes(&self) -> impl Iterator<Item = &ClassDef> {
        self.classes.values().chain(self.stub_classes.values())
    }

    pub fn has_class(&self, name: &str) -> bool {
        self.class(name).is_some()
    }

    pub fn method(&self, sig: &MethodSig) -> Option<&MethodDef> {
        self.class(&sig.class)?.method(&sig.name, sig.arity)
    }

    /// Application methods with their signatures, in stable order.
    pub fn app_methods(&self) -> impl Iterator<Item = (MethodSig, &MethodDef)> {
        self.classes
            .values()
            .flat_map(|c| c.methods.iter().map(move |m| (m.sig(&c.name), m)))
    }
}
