//! Generic s-expression reader used by the theory, relation, program and
//! script syntaxes. A standalone `.` is read as an ordinary atom so that
//! dotted expression literals survive until the caller interprets them.

use std::fmt;

use thiserror::Error;

use crate::term::Expr;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SexpError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom { text: String, pos: usize },
    List { items: Vec<Sexp>, pos: usize },
}

impl Sexp {
    pub fn pos(&self) -> usize {
        match self {
            Sexp::Atom { pos, .. } | Sexp::List { pos, .. } => *pos,
        }
    }

    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom { text, .. } => Some(text),
            Sexp::List { .. } => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List { items, .. } => Some(items),
            Sexp::Atom { .. } => None,
        }
    }

    /// The head atom of a nonempty list.
    pub fn head(&self) -> Option<&str> {
        self.list().and_then(|l| l.first()).and_then(Sexp::atom)
    }

    /// Interprets the s-expression as a symbolic expression, honouring
    /// `(a . b)` and list sugar.
    pub fn to_expr(&self) -> Result<Expr, SexpError> {
        match self {
            Sexp::Atom { text, pos } => {
                if text == "." {
                    return Err(err(*pos, "unexpected '.'"));
                }
                if !valid_expr_atom(text) {
                    return Err(err(*pos, format!("invalid expression atom '{text}'")));
                }
                Ok(Expr::atom(text))
            }
            Sexp::List { items, pos } => {
                if items.is_empty() {
                    return Err(err(*pos, "empty list is not an expression"));
                }
                let dotted = items.len() >= 3 && items[items.len() - 2].atom() == Some(".");
                let (elems, mut tail) = if dotted {
                    (&items[..items.len() - 2], items[items.len() - 1].to_expr()?)
                } else {
                    (&items[..], Expr::nil())
                };
                for item in elems.iter().rev() {
                    tail = Expr::cons(item.to_expr()?, tail);
                }
                Ok(tail)
            }
        }
    }
}

fn valid_expr_atom(text: &str) -> bool {
    if text == "*" {
        return true;
    }
    let mut chars = text.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '#')
}

fn err(pos: usize, msg: impl Into<String>) -> SexpError {
    SexpError::Syntax { pos, msg: msg.into() }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom { text, .. } => f.write_str(text),
            Sexp::List { items, .. } => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Reads every top-level s-expression in `text`. `;` starts a comment that
/// runs to the end of the line.
pub fn read_all(text: &str) -> Result<Vec<Sexp>, SexpError> {
    let mut reader = Reader {
        bytes: text.as_bytes(),
        text,
        pos: 0,
    };
    let mut out = Vec::new();
    loop {
        reader.skip_blank();
        if reader.pos >= reader.bytes.len() {
            return Ok(out);
        }
        out.push(reader.read()?);
    }
}

/// Reads exactly one s-expression.
pub fn read_one(text: &str) -> Result<Sexp, SexpError> {
    let mut all = read_all(text)?;
    match all.len() {
        1 => Ok(all.pop().unwrap()),
        0 => Err(err(text.len(), "empty input")),
        _ => Err(err(all[1].pos(), "trailing input")),
    }
}

/// Net parenthesis depth of `text`, ignoring comments.
pub fn paren_balance(text: &str) -> i64 {
    let mut depth = 0;
    for line in text.lines() {
        for c in line.split(';').next().unwrap_or("").chars() {
            match c {
                '(' => depth += 1,
                ')' => depth -= 1,
                _ => {}
            }
        }
    }
    depth
}

struct Reader<'a> {
    bytes: &'a [u8],
    text: &'a str,
    pos: usize,
}

impl Reader<'_> {
    fn skip_blank(&mut self) {
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            if c == b';' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn read(&mut self) -> Result<Sexp, SexpError> {
        self.skip_blank();
        let start = self.pos;
        match self.bytes.get(self.pos) {
            None => Err(err(start, "unexpected end of input")),
            Some(b')') => Err(err(start, "unexpected ')'")),
            Some(b'(') => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_blank();
                    match self.bytes.get(self.pos) {
                        None => return Err(err(start, "unclosed '('")),
                        Some(b')') => {
                            self.pos += 1;
                            return Ok(Sexp::List { items, pos: start });
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
            Some(_) => {
                while self.pos < self.bytes.len() {
                    let c = self.bytes[self.pos];
                    if c.is_ascii_whitespace() || c == b'(' || c == b')' || c == b';' {
                        break;
                    }
                    self.pos += 1;
                }
                Ok(Sexp::Atom {
                    text: self.text[start..self.pos].to_string(),
                    pos: start,
                })
            }
        }
    }
}
