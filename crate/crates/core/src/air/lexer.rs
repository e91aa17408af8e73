use super::AirError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Annotation(String),
    Punct(char),
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

fn ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '$' || c == '<'
}

fn ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, AirError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    let err = |line, col, message: String| AirError::Syntax { line, col, message };

    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '"' {
            i += 1;
            col += 1;
            let mut s = String::new();
            loop {
                let Some(&ch) = chars.get(i) else {
                    return Err(err(tl, tc, "unterminated string literal".into()));
                };
                i += 1;
                col += 1;
                match ch {
                    '"' => break,
                    '\n' => return Err(err(tl, tc, "newline in string literal".into())),
                    '\\' => {
                        let esc = chars.get(i).copied();
                        i += 1;
                        col += 1;
                        s.push(match esc {
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some('r') => '\r',
                            Some('"') => '"',
                            Some('\\') => '\\',
                            other => {
                                return Err(err(
                                    line,
                                    col - 1,
                                    format!("unknown escape `\\{}`", other.unwrap_or(' ')),
                                ))
                            }
                        });
                    }
                    ch => s.push(ch),
                }
            }
            out.push(Token {
                tok: Tok::Str(s),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let value = text
                .parse::<i64>()
                .map_err(|_| err(tl, tc, format!("integer out of range `{text}`")))?;
            out.push(Token {
                tok: Tok::Int(value),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c == '@' {
            let start = i + 1;
            i += 1;
            while i < chars.len() && ident_char(chars[i]) {
                i += 1;
            }
            if i == start {
                return Err(err(tl, tc, "expected annotation name after `@`".into()));
            }
            col += i - start + 1;
            out.push(Token {
                tok: Tok::Annotation(chars[start..i].iter().collect()),
                line: tl,
                col: tc,
            });
            continue;
        }
        if ident_start(c) {
            let start = i;
            if c == '<' {
                // only `<init>` / `<clinit>` are identifiers starting with `<`
                let rest: String = chars[i..chars.len().min(i + 8)].iter().collect();
                let word = if rest.starts_with("<clinit>") {
                    "<clinit>"
                } else if rest.starts_with("<init>") {
                    "<init>"
                } else {
                    return Err(err(tl, tc, "unexpected `<`".into()));
                };
                i += word.len();
                col += word.len();
                out.push(Token {
                    tok: Tok::Ident(word.to_string()),
                    line: tl,
                    col: tc,
                });
                continue;
            }
            i += 1;
            while i < chars.len() && ident_char(chars[i]) {
                i += 1;
            }
            // array suffixes belong to the type name
            while chars.get(i) == Some(&'[') && chars.get(i + 1) == Some(&']') {
                i += 2;
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                col: tc,
            });
            continue;
        }
        if "{}();:,.=/".contains(c) {
            out.push(Token {
                tok: Tok::Punct(c),
                line: tl,
                col: tc,
            });
            i += 1;
            col += 1;
            continue;
        }
        return Err(err(tl, tc, format!("unexpected character `{c}`")));
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}
