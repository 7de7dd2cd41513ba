//! Sorts of the logic signature and the runtime values that inhabit them.

use std::fmt;

use crate::subst::Subst;
use crate::term::{Expr, VarSet};

/// Sorts of the logic signature. `Rel` names a registered well-founded
/// relation and only appears as the first argument of `wf-ordered`; `Pair`
/// is produced by relation projections and has no logic syntax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Expr,
    Subst,
    VarSet,
    Nat,
    Triple,
    Rel,
    Pair,
}

impl Sort {
    pub fn name(self) -> &'static str {
        match self {
            Sort::Expr => "expr",
            Sort::Subst => "subst",
            Sort::VarSet => "varset",
            Sort::Nat => "nat",
            Sort::Triple => "triple",
            Sort::Rel => "rel",
            Sort::Pair => "pair",
        }
    }

    pub fn from_name(name: &str) -> Option<Sort> {
        Some(match name {
            "expr" => Sort::Expr,
            "subst" => Sort::Subst,
            "varset" => Sort::VarSet,
            "nat" => Sort::Nat,
            "triple" => Sort::Triple,
            "rel" => Sort::Rel,
            "pair" => Sort::Pair,
            _ => return None,
        })
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The three inputs of the unification program, ordered as a single value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InputTriple {
    pub env: Subst,
    pub e1: Expr,
    pub e2: Expr,
}

impl InputTriple {
    pub fn new(env: Subst, e1: Expr, e2: Expr) -> Self {
        InputTriple { env, e1, e2 }
    }
}

impl fmt::Display for InputTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}, {}>", self.env, self.e1, self.e2)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Expr(Expr),
    Subst(Subst),
    Set(VarSet),
    Nat(u64),
    Triple(Box<InputTriple>),
    Rel(String),
    /// Intermediate measure built by projections such as `vars-size`.
    Pair(Box<Value>, Box<Value>),
}

impl Value {
    pub fn sort(&self) -> Sort {
        match self {
            Value::Expr(_) => Sort::Expr,
            Value::Subst(_) => Sort::Subst,
            Value::Set(_) => Sort::VarSet,
            Value::Nat(_) => Sort::Nat,
            Value::Triple(_) => Sort::Triple,
            Value::Rel(_) => Sort::Rel,
            Value::Pair(..) => Sort::Pair,
        }
    }

    pub fn as_expr(&self) -> Option<&Expr> {
        match self {
            Value::Expr(e) => Some(e),
            _ => None,
        }
    }

    pub fn as_subst(&self) -> Option<&Subst> {
        match self {
            Value::Subst(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_set(&self) -> Option<&VarSet> {
        match self {
            Value::Set(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_nat(&self) -> Option<u64> {
        match self {
            Value::Nat(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_triple(&self) -> Option<&InputTriple> {
        match self {
            Value::Triple(t) => Some(t),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Expr(e) => write!(f, "{e}"),
            Value::Subst(s) => write!(f, "{s}"),
            Value::Set(s) => {
                f.write_str("{")?;
                for (i, v) in s.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str(v)?;
                }
                f.write_str("}")
            }
            Value::Nat(n) => write!(f, "{n}"),
            Value::Triple(t) => write!(f, "{t}"),
            Value::Rel(r) => f.write_str(r),
            Value::Pair(a, b) => write!(f, "<{a}, {b}>"),
        }
    }
}
