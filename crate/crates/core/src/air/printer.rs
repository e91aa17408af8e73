use std::fmt::Write;

use super::{ClassDef, Instr, Manifest, MethodDef, Program};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn render_manifest(m: &Manifest, out: &mut String) {
    out.push_str("manifest {\n");
    let _ = writeln!(out, "  target_api = {};", m.target_api);
    for e in &m.entry_points {
        let _ = writeln!(out, "  entry {e};");
    }
    for p in &m.permissions {
        let _ = writeln!(out, "  permission {};", quote(p));
    }
    out.push_str("}\n");
}

/// Canonical text of the manifest and every application class.
pub fn render_program(program: &Program) -> String {
    let mut out = String::new();
    render_manifest(&program.manifest, &mut out);
    for class in program.classes.values() {
        out.push('\n');
        out.push_str(&render_class(class));
    }
    out
}

pub fn render_class(class: &ClassDef) -> String {
    let mut out = String::new();
    if class.is_final {
        out.push_str("final ");
    }
    let _ = write!(out, "class {}", class.name);
    if let Some(sup) = &class.superclass {
        let _ = write!(out, " extends {sup}");
    }
    out.push_str(" {\n");
    for f in &class.fields {
        let kw = if f.is_static { "static field" } else { "field" };
        let _ = writeln!(out, "  {kw} {} : {};", f.name, f.ty);
    }
    for (i, m) in class.methods.iter().enumerate() {
        if i > 0 || !class.fields.is_empty() {
            out.push('\n');
        }
        render_method(m, &mut out);
    }
    out.push_str("}\n");
    out
}

fn render_method(m: &MethodDef, out: &mut String) {
    for a in &m.annotations {
        let _ = writeln!(out, "  @{a}");
    }
    out.push_str("  ");
    if m.is_static {
        out.push_str("static ");
    }
    let params: Vec<String> = m
        .params
        .iter()
        .map(|p| format!("{} : {}", p.name, p.ty))
        .collect();
    let _ = writeln!(
        out,
        "method {}({}) : {} {{",
        m.name,
        params.join(", "),
        m.ret
    );
    for instr in &m.body {
        let _ = writeln!(out, "    {}", render_instr(instr));
    }
    out.push_str("  }\n");
}

pub(crate) fn render_instr(instr: &Instr) -> String {
    match instr {
        Instr::ConstString { dst, value } => format!("{dst} = {};", quote(value)),
        Instr::ConstInt { dst, value } => format!("{dst} = {value};"),
        Instr::Assign { dst, src } => format!("{dst} = {src};"),
        Instr::New { dst, class } => format!("{dst} = new {class};"),
        Instr::Cast { dst, ty, src } => format!("{dst} = cast {ty} {src};"),
        Instr::InstanceGet { dst, base, field } => format!("{dst} = get {base}.{field};"),
        Instr::InstancePut { base, field, src } => format!("put {base}.{field} = {src};"),
        Instr::StaticGet { dst, class, field } => format!("{dst} = sget {class}.{field};"),
        Instr::StaticPut { class, field, src } => format!("sput {class}.{field} = {src};"),
        Instr::Invoke {
            dst,
            kind,
            target,
            args,
        } => {
            let call = format!("{} {target}({})", kind.keyword(), args.join(", "));
            match dst {
                Some(d) => format!("{d} = {call};"),
                None => format!("{call};"),
            }
        }
        Instr::Return { value: Some(v) } => format!("return {v};"),
        Instr::Return { value: None } => "return;".to_string(),
        Instr::Goto { label } => format!("goto {label};"),
        Instr::IfNondet { label } => format!("ifnd {label};"),
        Instr::Label { name } => format!("{name}:"),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_program;
    use super::*;

    #[test]
    fn round_trips_escaped_strings() {
        let src = "manifest { target_api = 19; entry A.run/1; }\n\
                   class A { method run() : void { s = \"a\\\"b\\\\c\\n\"; return; } }";
        let p = parse_program(src).unwrap();
        let text = render_program(&p);
        let q = parse_program(&text).unwrap();
        assert_eq!(p, q);
        assert!(text.contains("extends Object"));
    }
}
