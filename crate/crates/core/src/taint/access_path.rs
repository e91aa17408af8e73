use std::fmt;

use serde::{Deserialize, Serialize};

use super::pointsto::ObjId;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Root {
    Local(String),
    /// An abstract heap object from the points-to pre-pass.
    Object(ObjId),
    /// Static fields of a class; the first field of the path names the field.
    Static(String),
    /// Return value at a method exit.
    Return,
}

/// A root plus a bounded field chain. A path denotes its own location and
/// every location below it, so truncation only loses precision.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AccessPath {
    pub root: Root,
    pub fields: Vec<String>,
    /// Set when fields beyond the depth bound were dropped.
    pub truncated: bool,
}

impl AccessPath {
    pub fn new(root: Root) -> Self {
        AccessPath {
            root,
            fields: Vec::new(),
            truncated: false,
        }
    }

    pub fn local(name: &str) -> Self {
        AccessPath::new(Root::Local(name.to_string()))
    }

    pub fn is_local(&self, name: &str) -> bool {
        matches!(&self.root, Root::Local(l) if l == name)
    }

    /// Same field chain under a different root.
    pub fn rebase(&self, root: Root) -> Self {
        AccessPath {
            root,
            fields: self.fields.clone(),
            truncated: self.truncated,
        }
    }

    /// `root.field.<self.fields>`, cut to `k` fields.
    pub fn prepend(&self, root: Root, field: &str, k: usize) -> Self {
        let mut fields = Vec::with_capacity(self.fields.len() + 1);
        fields.push(field.to_string());
        fields.extend(self.fields.iter().cloned());
        AccessPath {
            root,
            fields,
            truncated: self.truncated,
        }
        .truncate(k)
    }

    /// The path reached by reading `field` from this path's location, when
    /// this path covers it.
    pub fn read(&self, field: &str, root: Root) -> Option<Self> {
        match self.fields.split_first() {
            None => Some(AccessPath {
                root,
                fields: Vec::new(),
                truncated: self.truncated,
            }),
            Some((f, rest)) if f == field => Some(AccessPath {
                root,
                fields: rest.to_vec(),
                truncated: self.truncated,
            }),
            _ => None,
        }
    }

    pub fn truncate(mut self, k: usize) -> Self {
        if self.fields.len() > k {
            self.fields.truncate(k);
            self.truncated = true;
        }
        self
    }
}

impl fmt::Display for AccessPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.root {
            Root::Local(l) => write!(f, "{l}")?,
            Root::Object(o) => write!(f, "obj#{o}")?,
            Root::Static(c) => write!(f, "{c}")?,
            Root::Return => write!(f, "$ret")?,
        }
        for field in &self.fields {
            write!(f, ".{field}")?;
        }
        if self.truncated {
            write!(f, ".*")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_marks_any_suffix() {
        let p = AccessPath::local("x")
            .prepend(Root::Local("y".into()), "a", 3)
            .prepend(Root::Local("z".into()), "b", 1);
        assert_eq!(p.fields, vec!["b".to_string()]);
        assert!(p.truncated);
        assert_eq!(p.to_string(), "z.b.*");
    }

    #[test]
    fn read_strips_matching_field() {
        let p = AccessPath::local("x").prepend(Root::Local("o".into()), "f", 3);
        assert_eq!(
            p.read("f", Root::Local("d".into())),
            Some(AccessPath::local("d"))
        );
        assert_eq!(p.read("g", Root::Local("d".into())), None);
        assert!(AccessPath::local("o")
            .read("g", Root::Local("d".into()))
            .is_some());
    }
}
