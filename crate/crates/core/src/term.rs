//! Symbolic expressions: constants, variables and cons pairs.
//!
//! Identifiers beginning with an uppercase letter are variables; everything
//! else (including `nil` and the black hole `*`) is a constant.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// A finite set of variable names, ordered for deterministic output.
pub type VarSet = BTreeSet<String>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("left/right of atomic expression {0}")]
    AtomicExpression(String),
    #[error("not a nil-terminated tuple: {0}")]
    NotATuple(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Const(String),
    Var(String),
    Cons(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Const,
    Var,
    Cons,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Occurrence {
    /// `d ε e`: d is a proper subexpression of e.
    Proper,
    /// `d ⊴ e`: proper occurrence or equality.
    Reflexive,
}

pub const NIL: &str = "nil";
pub const BLACK_HOLE: &str = "*";

/// True when `name` lexes as a variable.
pub fn is_var_name(name: &str) -> bool {
    name.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

impl Expr {
    /// Builds an atom, choosing constant or variable by the case convention.
    pub fn atom(name: &str) -> Expr {
        if is_var_name(name) {
            Expr::Var(name.to_string())
        } else {
            Expr::Const(name.to_string())
        }
    }

    pub fn constant(name: &str) -> Expr {
        Expr::Const(name.to_string())
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn cons(left: Expr, right: Expr) -> Expr {
        Expr::Cons(Box::new(left), Box::new(right))
    }

    pub fn nil() -> Expr {
        Expr::constant(NIL)
    }

    pub fn black_hole() -> Expr {
        Expr::constant(BLACK_HOLE)
    }

    pub fn classify(&self) -> Kind {
        match self {
            Expr::Const(_) => Kind::Const,
            Expr::Var(_) => Kind::Var,
            Expr::Cons(..) => Kind::Cons,
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Expr::Const(_))
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Expr::Var(_))
    }

    pub fn is_atom(&self) -> bool {
        !matches!(self, Expr::Cons(..))
    }

    /// Splits a cons into `(left, right)`.
    pub fn destructure(&self) -> Result<(&Expr, &Expr), TermError> {
        match self {
            Expr::Cons(l, r) => Ok((l, r)),
            _ => Err(TermError::AtomicExpression(self.to_string())),
        }
    }

    pub fn left(&self) -> Result<&Expr, TermError> {
        self.destructure().map(|(l, _)| l)
    }

    pub fn right(&self) -> Result<&Expr, TermError> {
        self.destructure().map(|(_, r)| r)
    }

    /// Number of nonvariable symbols, conses included.
    pub fn size(&self) -> u64 {
        match self {
            Expr::Const(_) => 1,
            Expr::Var(_) => 0,
            Expr::Cons(l, r) => 1 + l.size() + r.size(),
        }
    }

    pub fn vars(&self) -> VarSet {
        let mut out = VarSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut VarSet) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Cons(l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    /// Variables in first-occurrence order (left to right).
    pub fn vars_in_order(&self, out: &mut Vec<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Expr::Cons(l, r) => {
                l.vars_in_order(out);
                r.vars_in_order(out);
            }
        }
    }

    pub fn contains_var(&self, name: &str) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => v == name,
            Expr::Cons(l, r) => l.contains_var(name) || r.contains_var(name),
        }
    }
}

/// Decides `d ε e` or `d ⊴ e`.
pub fn occurs_in(d: &Expr, e: &Expr, mode: Occurrence) -> bool {
    match mode {
        Occurrence::Reflexive => d == e || occurs_in(d, e, Occurrence::Proper),
        Occurrence::Proper => match e {
            Expr::Cons(l, r) => occurs_in(d, l, Occurrence::Reflexive) || occurs_in(d, r, Occurrence::Reflexive),
            _ => false,
        },
    }
}

/// Encodes `⟨e1, …, en⟩` as a nil-terminated right spine.
pub fn encode_tuple(items: &[Expr]) -> Expr {
    items
        .iter()
        .rev()
        .fold(Expr::nil(), |acc, e| Expr::cons(e.clone(), acc))
}

pub fn decode_tuple(e: &Expr) -> Result<Vec<Expr>, TermError> {
    let mut out = Vec::new();
    let mut cur = e;
    loop {
        match cur {
            Expr::Const(c) if c == NIL => return Ok(out),
            Expr::Cons(l, r) => {
                out.push((**l).clone());
                cur = r;
            }
            _ => return Err(TermError::NotATuple(e.to_string())),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(n) | Expr::Var(n) => f.write_str(n),
            Expr::Cons(l, r) => write!(f, "({l} . {r})"),
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = TermError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expr(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Open,
    Close,
    Dot,
    Ident(String),
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '#'
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, TermError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                out.push((pos, Tok::Open));
                i += 1;
            }
            ')' => {
                out.push((pos, Tok::Close));
                i += 1;
            }
            '.' => {
                out.push((pos, Tok::Dot));
                i += 1;
            }
            '*' => {
                out.push((pos, Tok::Ident(BLACK_HOLE.to_string())));
                i += 1;
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < chars.len() && is_ident_char(chars[i].1) {
                    i += 1;
                }
                let s: String = chars[start..i].iter().map(|(_, c)| c).collect();
                out.push((pos, Tok::Ident(s)));
            }
            other => {
                return Err(TermError::Syntax {
                    pos,
                    msg: format!("unexpected character {other:?}"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    i: usize,
    end: usize,
}

impl Parser {
    fn pos(&self) -> usize {
        self.toks.get(self.i).map_or(self.end, |t| t.0)
    }

    fn err<T>(&self, msg: &str) -> Result<T, TermError> {
        Err(TermError::Syntax {
            pos: self.pos(),
            msg: msg.to_string(),
        })
    }

    fn expr(&mut self) -> Result<Expr, TermError> {
        match self.toks.get(self.i).map(|t| t.1.clone()) {
            None => self.err("unexpected end of input"),
            Some(Tok::Ident(name)) => {
                self.i += 1;
                Ok(Expr::atom(&name))
            }
            Some(Tok::Open) => {
                self.i += 1;
                let first = self.expr()?;
                if self.toks.get(self.i).map(|t| &t.1) == Some(&Tok::Dot) {
                    self.i += 1;
                    let second = self.expr()?;
                    self.close()?;
                    return Ok(Expr::cons(first, second));
                }
                let mut items = vec![first];
                loop {
                    match self.toks.get(self.i).map(|t| &t.1) {
                        Some(Tok::Close) => {
                            self.i += 1;
                            return Ok(encode_tuple(&items));
                        }
                        Some(Tok::Dot) => return self.err("dot allowed only in a pair"),
                        None => return self.err("unclosed parenthesis"),
                        _ => items.push(self.expr()?),
                    }
                }
            }
            Some(Tok::Close) => self.err("unexpected ')'"),
            Some(Tok::Dot) => self.err("unexpected '.'"),
        }
    }

    fn close(&mut self) -> Result<(), TermError> {
        match self.toks.get(self.i).map(|t| &t.1) {
            Some(Tok::Close) => {
                self.i += 1;
                Ok(())
            }
            _ => self.err("expected ')'"),
        }
    }
}

/// Parses the expression grammar; `(e1 … en)` is list sugar.
pub fn parse_expr(text: &str) -> Result<Expr, TermError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        i: 0,
        end: text.len(),
    };
    let e = p.expr()?;
    if p.i != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}
