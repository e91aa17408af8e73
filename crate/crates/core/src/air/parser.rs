use std::collections::{BTreeMap, BTreeSet};

use super::lexer::{tokenize, Tok, Token};
use super::{
    stubs, validate, AirError, ClassDef, FieldDef, Instr, InvokeKind, Manifest, MethodDef,
    MethodSig, Param, Program, Span, CONSTRUCTOR, OBJECT,
};

/// A parsed but unvalidated AIR document.
#[derive(Debug, Clone)]
pub struct RawDocument {
    pub manifest: Option<Manifest>,
    pub manifest_span: Span,
    pub classes: Vec<ClassDef>,
}

/// Parses and validates an application document against the platform stubs.
pub fn parse_program(text: &str) -> Result<Program, AirError> {
    parse_program_with_stubs(text, &[])
}

/// Like [`parse_program`], with additional stub documents whose classes are
/// merged into the platform library.
pub fn parse_program_with_stubs(text: &str, extra_stubs: &[&str]) -> Result<Program, AirError> {
    let doc = parse_document(text, false)?;
    let mut stub_classes = stubs::platform_stubs().clone();
    for extra in extra_stubs {
        let sdoc = parse_document(extra, true)?;
        for class in sdoc.classes {
            if stub_classes.contains_key(&class.name) {
                return Err(AirError::DuplicateClass {
                    name: class.name.clone(),
                    span: class.span,
                });
            }
            stub_classes.insert(class.name.clone(), class);
        }
    }
    let mut classes = BTreeMap::new();
    for class in doc.classes {
        if classes.contains_key(&class.name) || stub_classes.contains_key(&class.name) {
            return Err(AirError::DuplicateClass {
                name: class.name.clone(),
                span: class.span,
            });
        }
        classes.insert(class.name.clone(), class);
    }
    let program = Program {
        classes,
        manifest: doc.manifest.unwrap_or_default(),
        stub_classes,
    };
    validate(&program, doc.manifest_span)?;
    Ok(program)
}

/// Parses a document without validation. `external` marks every class as a
/// platform stub.
pub fn parse_document(text: &str, external: bool) -> Result<RawDocument, AirError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        external,
    };
    p.document()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    external: bool,
}

type PResult<T> = Result<T, AirError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn span(&self) -> Span {
        let t = &self.tokens[self.pos];
        Span {
            line: t.line,
            col: t.col,
        }
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        let t = &self.tokens[self.pos];
        Err(AirError::Syntax {
            line: t.line,
            col: t.col,
            message: message.into(),
        })
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Int(i) => format!("integer {i}"),
            Tok::Annotation(a) => format!("`@{a}`"),
            Tok::Punct(c) => format!("`{c}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn expect_punct(&mut self, c: char) -> PResult<()> {
        if *self.peek() == Tok::Punct(c) {
            self.bump();
            Ok(())
        } else {
            self.error(format!(
                "expected `{c}`, found {}",
                Self::describe(self.peek())
            ))
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Punct(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            self.error(format!(
                "expected `{kw}`, found {}",
                Self::describe(self.peek())
            ))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.error(format!("expected {what}, found {}", Self::describe(&other))),
        }
    }

    fn int(&mut self) -> PResult<i64> {
        match *self.peek() {
            Tok::Int(i) => {
                self.bump();
                Ok(i)
            }
            ref other => self.error(format!("expected integer, found {}", Self::describe(other))),
        }
    }

    fn string(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            other => self.error(format!("expected string, found {}", Self::describe(&other))),
        }
    }

    fn document(&mut self) -> PResult<RawDocument> {
        let mut manifest = None;
        let mut manifest_span = Span::default();
        if self.is_keyword("manifest") {
            manifest_span = self.span();
            manifest = Some(self.manifest()?);
        }
        let mut classes = Vec::new();
        while *self.peek() != Tok::Eof {
            classes.push(self.class()?);
        }
        Ok(RawDocument {
            manifest,
            manifest_span,
            classes,
        })
    }

    fn sig(&mut self) -> PResult<MethodSig> {
        let class = self.ident("class name")?;
        self.expect_punct('.')?;
        let name = self.ident("method name")?;
        self.expect_punct('/')?;
        let arity = self.int()?;
        if arity < 0 {
            return self.error("negative arity");
        }
        Ok(MethodSig::new(class, name, arity as usize))
    }

    fn manifest(&mut self) -> PResult<Manifest> {
        self.expect_keyword("manifest")?;
        self.expect_punct('{')?;
        self.expect_keyword("target_api")?;
        self.expect_punct('=')?;
        let api = self.int()?;
        if api < 1 || api > u32::MAX as i64 {
            return self.error("target_api must be a positive integer");
        }
        self.expect_punct(';')?;
        let mut m = Manifest {
            target_api: api as u32,
            ..Manifest::default()
        };
        loop {
            if self.is_keyword("entry") {
                self.bump();
                m.entry_points.push(self.sig()?);
                self.expect_punct(';')?;
            } else if self.is_keyword("permission") {
                self.bump();
                m.permissions.push(self.string()?);
                self.expect_punct(';')?;
            } else {
                break;
            }
        }
        self.expect_punct('}')?;
        Ok(m)
    }

    fn class(&mut self) -> PResult<ClassDef> {
        let span = self.span();
        let is_final = self.is_keyword("final");
        if is_final {
            self.bump();
        }
        self.expect_keyword("class")?;
        let name = self.ident("class name")?;
        let superclass = if self.is_keyword("extends") {
            self.bump();
            Some(self.ident("superclass name")?)
        } else if name == OBJECT {
            None
        } else {
            Some(OBJECT.to_string())
        };
        self.expect_punct('{')?;
        let mut fields = Vec::new();
        let mut methods = Vec::new();
        while !self.eat_punct('}') {
            let start = self.pos;
            let mut is_static = false;
            if self.is_keyword("static") {
                self.bump();
                is_static = true;
            }
            if self.is_keyword("field") {
                self.bump();
                let fname = self.ident("field name")?;
                self.expect_punct(':')?;
                let ty = self.ident("type")?;
                self.expect_punct(';')?;
                fields.push(FieldDef {
                    name: fname,
                    ty,
                    is_static,
                });
            } else {
                self.pos = start;
                methods.push(self.method()?);
            }
        }
        Ok(ClassDef {
            name,
            superclass,
            is_final,
            is_external: self.external,
            fields,
            methods,
            span,
        })
    }

    fn method(&mut self) -> PResult<MethodDef> {
        let span = self.span();
        let mut annotations = BTreeSet::new();
        while let Tok::Annotation(a) = self.peek().clone() {
            self.bump();
            annotations.insert(a);
        }
        let is_static = self.is_keyword("static");
        if is_static {
            self.bump();
        }
        if !self.is_keyword("method") {
            return self.error(format!(
                "expected `field` or `method`, found {}",
                Self::describe(self.peek())
            ));
        }
        self.bump();
        let name = self.ident("method name")?;
        self.expect_punct('(')?;
        let mut params = Vec::new();
        if !self.eat_punct(')') {
            loop {
                let pname = self.ident("parameter name")?;
                self.expect_punct(':')?;
                let ty = self.ident("parameter type")?;
                params.push(Param { name: pname, ty });
                if self.eat_punct(')') {
                    break;
                }
                self.expect_punct(',')?;
            }
        }
        self.expect_punct(':')?;
        let ret = self.ident("return type")?;
        self.expect_punct('{')?;
        let mut body = Vec::new();
        let mut instr_spans = Vec::new();
        while !self.eat_punct('}') {
            instr_spans.push(self.span());
            body.push(self.instr()?);
        }
        Ok(MethodDef {
            is_constructor: name == CONSTRUCTOR,
            name,
            params,
            ret,
            is_static,
            annotations,
            body,
            span,
            instr_spans,
        })
    }

    fn call(&mut self, dst: Option<String>) -> PResult<Instr> {
        let kind = match self.peek() {
            Tok::Ident(s) if s == "vcall" => InvokeKind::Virtual,
            Tok::Ident(s) if s == "scall" => InvokeKind::Static,
            Tok::Ident(s) if s == "kcall" => InvokeKind::Special,
            other => return self.error(format!("expected call, found {}", Self::describe(other))),
        };
        self.bump();
        let target = self.sig()?;
        self.expect_punct('(')?;
        let mut args = Vec::new();
        if !self.eat_punct(')') {
            loop {
                args.push(self.ident("argument local")?);
                if self.eat_punct(')') {
                    break;
                }
                self.expect_punct(',')?;
            }
        }
        Ok(Instr::Invoke {
            dst,
            kind,
            target,
            args,
        })
    }

    fn field_ref(&mut self) -> PResult<(String, String)> {
        let base = self.ident("local or class")?;
        self.expect_punct('.')?;
        let field = self.ident("field name")?;
        Ok((base, field))
    }

    fn instr(&mut self) -> PResult<Instr> {
        let Tok::Ident(head) = self.peek().clone() else {
            return self.error(format!(
                "expected instruction, found {}",
                Self::describe(self.peek())
            ));
        };
        match self.peek_at(1) {
            Tok::Punct(':') => {
                self.bump();
                self.bump();
                return Ok(Instr::Label { name: head });
            }
            Tok::Punct('=') => {
                self.bump();
                self.bump();
                let instr = self.rhs(head)?;
                self.expect_punct(';')?;
                return Ok(instr);
            }
            _ => {}
        }
        let instr = match head.as_str() {
            "put" => {
                self.bump();
                let (base, field) = self.field_ref()?;
                self.expect_punct('=')?;
                let src = self.ident("local")?;
                Instr::InstancePut { base, field, src }
            }
            "sput" => {
                self.bump();
                let (class, field) = self.field_ref()?;
                self.expect_punct('=')?;
                let src = self.ident("local")?;
                Instr::StaticPut { class, field, src }
            }
            "return" => {
                self.bump();
                let value = match self.peek().clone() {
                    Tok::Ident(v) => {
                        self.bump();
                        Some(v)
                    }
                    _ => None,
                };
                Instr::Return { value }
            }
            "goto" => {
                self.bump();
                Instr::Goto {
                    label: self.ident("label")?,
                }
            }
            "ifnd" => {
                self.bump();
                Instr::IfNondet {
                    label: self.ident("label")?,
                }
            }
            "vcall" | "scall" | "kcall" => self.call(None)?,
            _ => {
                self.bump();
                return self.error(format!(
                    "expected `=` or `:` after `{head}`, found {}",
                    Self::describe(self.peek())
                ));
            }
        };
        self.expect_punct(';')?;
        Ok(instr)
    }

    fn rhs(&mut self, dst: String) -> PResult<Instr> {
        match self.peek().clone() {
            Tok::Str(value) => {
                self.bump();
                Ok(Instr::ConstString { dst, value })
            }
            Tok::Int(value) => {
                self.bump();
                Ok(Instr::ConstInt { dst, value })
            }
            Tok::Ident(word) => {
                if *self.peek_at(1) == Tok::Punct(';') {
                    self.bump();
                    return Ok(Instr::Assign { dst, src: word });
                }
                match word.as_str() {
                    "new" => {
                        self.bump();
                        Ok(Instr::New {
                            dst,
                            class: self.ident("class name")?,
                        })
                    }
                    "cast" => {
                        self.bump();
                        let ty = self.ident("type")?;
                        let src = self.ident("local")?;
                        Ok(Instr::Cast { dst, ty, src })
                    }
                    "get" => {
                        self.bump();
                        let (base, field) = self.field_ref()?;
                        Ok(Instr::InstanceGet { dst, base, field })
                    }
                    "sget" => {
                        self.bump();
                        let (class, field) = self.field_ref()?;
                        Ok(Instr::StaticGet { dst, class, field })
                    }
                    "vcall" | "scall" | "kcall" => self.call(Some(dst)),
                    _ => self.error(format!("unexpected `{word}` in right-hand side")),
                }
            }
            other => self.error(format!(
                "expected right-hand side, found {}",
                Self::describe(&other)
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_instruction_forms() {
        let doc = parse_document(
            r#"
            class A extends Object {
              field f : String;
              static field s : int;
              @JavascriptInterface
              method m(p : String) : String {
                a = "x";
                b = 3;
                c = a;
                d = new A;
                e = cast A d;
                g = get d.f;
                put d.f = a;
                h = sget A.s;
                sput A.s = b;
                kcall A.<init>/1(d);
                r = vcall A.m/2(d, a);
                top:
                ifnd top;
                goto done;
                done:
                return r;
              }
            }"#,
            false,
        )
        .unwrap();
        let m = &doc.classes[0].methods[0];
        assert!(m.is_js_interface());
        assert_eq!(m.body.len(), 16);
        assert!(matches!(
            &m.body[9],
            Instr::Invoke {
                kind: InvokeKind::Special,
                dst: None,
                ..
            }
        ));
        assert!(matches!(&m.body[11], Instr::Label { name } if name == "top"));
        assert_eq!(m.instr_spans.len(), m.body.len());
    }

    #[test]
    fn syntax_error_has_line_and_column() {
        let e = parse_document("class A {\n  method m() : void { x = ; }\n}", false).unwrap_err();
        match e {
            AirError::Syntax { line, col, .. } => {
                assert_eq!(line, 2);
                assert_eq!(col, 27);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn local_named_like_keyword() {
        let doc = parse_document(
            "class A { static method m() : void { get = \"a\"; new = get; return; } }",
            false,
        )
        .unwrap();
        assert!(matches!(
            &doc.classes[0].methods[0].body[1],
            Instr::Assign { .. }
        ));
    }
}
