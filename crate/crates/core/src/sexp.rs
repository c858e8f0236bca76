//! Minimal s-expressions: lists, bare atoms and double-quoted strings.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Sexp {
    Atom(String),
    Str(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn atom(s: impl ToString) -> Sexp {
        Sexp::Atom(s.to_string())
    }

    pub fn list(items: Vec<Sexp>) -> Sexp {
        Sexp::List(items)
    }

    pub fn as_list(&self) -> Result<&[Sexp]> {
        match self {
            Sexp::List(v) => Ok(v),
            _ => Err(bad("expected a list")),
        }
    }

    pub fn as_atom(&self) -> Result<&str> {
        match self {
            Sexp::Atom(a) => Ok(a),
            _ => Err(bad("expected an atom")),
        }
    }

    pub fn as_str(&self) -> Result<&str> {
        match self {
            Sexp::Str(s) => Ok(s),
            _ => Err(bad("expected a string")),
        }
    }

    /// A list whose head atom is `name`; returns the tail.
    pub fn tagged(&self, name: &str) -> Result<&[Sexp]> {
        let items = self.as_list()?;
        match items.first() {
            Some(Sexp::Atom(a)) if a == name => Ok(&items[1..]),
            _ => Err(bad(&format!("expected ({name} ...)"))),
        }
    }

    pub fn parse_num<T: std::str::FromStr>(&self) -> Result<T> {
        let a = self.as_atom()?;
        a.parse().map_err(|_| bad(&format!("bad number {a:?}")))
    }

    /// Pretty-prints, breaking lines before sublists that themselves nest.
    pub fn write(&self, out: &mut String, indent: usize) {
        match self {
            Sexp::Atom(a) => out.push_str(a),
            Sexp::Str(s) => {
                out.push('"');
                for c in s.chars() {
                    match c {
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        c => out.push(c),
                    }
                }
                out.push('"');
            }
            Sexp::List(items) => {
                let nested = items.iter().any(|i| matches!(i, Sexp::List(v) if v.iter().any(|j| matches!(j, Sexp::List(_)))));
                out.push('(');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        if nested && matches!(item, Sexp::List(_)) {
                            out.push('\n');
                            let _ = write!(out, "{:width$}", "", width = indent + 1);
                        } else {
                            out.push(' ');
                        }
                    }
                    item.write(out, indent + 1);
                }
                out.push(')');
            }
        }
    }
}

fn bad(msg: &str) -> Error {
    Error::parse(0, format!("s-expression: {msg}"))
}

pub(crate) fn parse(text: &str) -> Result<Sexp> {
    let chars: Vec<char> = text.chars().collect();
    let mut pos = 0;
    let value = parse_value(&chars, &mut pos)?;
    skip_ws(&chars, &mut pos);
    if pos != chars.len() {
        return Err(bad("trailing input"));
    }
    Ok(value)
}

fn skip_ws(c: &[char], pos: &mut usize) {
    while *pos < c.len() {
        if c[*pos].is_whitespace() {
            *pos += 1;
        } else if c[*pos] == ';' {
            while *pos < c.len() && c[*pos] != '\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
}

fn parse_value(c: &[char], pos: &mut usize) -> Result<Sexp> {
    skip_ws(c, pos);
    match c.get(*pos) {
        None => Err(bad("unexpected end of input")),
        Some('(') => {
            *pos += 1;
            let mut items = Vec::new();
            loop {
                skip_ws(c, pos);
                match c.get(*pos) {
                    None => return Err(bad("unclosed list")),
                    Some(')') => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    _ => items.push(parse_value(c, pos)?),
                }
            }
        }
        Some(')') => Err(bad("unexpected ')'")),
        Some('"') => {
            *pos += 1;
            let mut s = String::new();
            loop {
                match c.get(*pos) {
                    None => return Err(bad("unterminated string")),
                    Some('"') => {
                        *pos += 1;
                        return Ok(Sexp::Str(s));
                    }
                    Some('\\') => {
                        let esc = c.get(*pos + 1).ok_or_else(|| bad("dangling escape"))?;
                        s.push(*esc);
                        *pos += 2;
                    }
                    Some(ch) => {
                        s.push(*ch);
                        *pos += 1;
                    }
                }
            }
        }
        Some(_) => {
            let start = *pos;
            while *pos < c.len() && !c[*pos].is_whitespace() && !matches!(c[*pos], '(' | ')' | '"') {
                *pos += 1;
            }
            Ok(Sexp::Atom(c[start..*pos].iter().collect()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let e = Sexp::list(vec![
            Sexp::atom("tree"),
            Sexp::Str("a \"q\" \\ b".into()),
            Sexp::list(vec![Sexp::atom("leaf"), Sexp::atom(1.5), Sexp::list(vec![Sexp::atom("x")])]),
        ]);
        let mut s = String::new();
        e.write(&mut s, 0);
        assert_eq!(parse(&s).unwrap(), e);
    }

    #[test]
    fn errors() {
        assert!(parse("(a (b)").is_err());
        assert!(parse("(a) b").is_err());
        assert!(parse("\"abc").is_err());
    }
}
