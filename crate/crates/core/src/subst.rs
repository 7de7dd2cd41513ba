//! Substitutions: proper finite maps from variables to expressions, plus the
//! failure substitution ⊥.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::term::{is_var_name, parse_expr, Expr, TermError, VarSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubstError {
    #[error("variable {0} bound twice")]
    DuplicateVariable(String),
    #[error("addition is defined only for proper substitutions")]
    ImproperOperand,
    #[error("{0} is not a permutation")]
    NotAPermutation(String),
    #[error("{0} is not a variable")]
    NotAVariable(String),
    #[error("substitution syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error(transparent)]
    Term(#[from] TermError),
}

/// A substitution in canonical form: identity bindings never stored.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Subst {
    Proper(BTreeMap<String, Expr>),
    Failure,
}

impl Default for Subst {
    fn default() -> Self {
        Subst::empty()
    }
}

/// Monotonic source of fresh `name#k` variables. Callers own their supply.
#[derive(Debug, Clone, Default)]
pub struct FreshSupply {
    next: u64,
}

impl FreshSupply {
    pub fn new() -> Self {
        FreshSupply { next: 1 }
    }

    pub fn starting_at(next: u64) -> Self {
        FreshSupply { next }
    }

    /// Returns `base#k` for the next k, skipping names in `avoid`.
    pub fn fresh(&mut self, base: &str, avoid: &BTreeSet<String>) -> String {
        let stem = base.split('#').next().unwrap_or(base);
        loop {
            let k = self.next.max(1);
            self.next = k + 1;
            let name = format!("{stem}#{k}");
            if !avoid.contains(&name) {
                return name;
            }
        }
    }
}

impl Subst {
    pub fn empty() -> Subst {
        Subst::Proper(BTreeMap::new())
    }

    pub fn bot() -> Subst {
        Subst::Failure
    }

    pub fn is_proper(&self) -> bool {
        matches!(self, Subst::Proper(_))
    }

    /// Builds a substitution, dropping identity pairs.
    pub fn make<I>(pairs: I) -> Result<Subst, SubstError>
    where
        I: IntoIterator<Item = (String, Expr)>,
    {
        let mut map = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for (x, e) in pairs {
            if !is_var_name(&x) {
                return Err(SubstError::NotAVariable(x));
            }
            if !seen.insert(x.clone()) {
                return Err(SubstError::DuplicateVariable(x));
            }
            if e != Expr::Var(x.clone()) {
                map.insert(x, e);
            }
        }
        Ok(Subst::Proper(map))
    }

    /// `{x ↦ e}`; the empty substitution when `e` is `x` itself.
    pub fn replacement(x: &str, e: &Expr) -> Subst {
        let mut map = BTreeMap::new();
        if *e != Expr::Var(x.to_string()) {
            map.insert(x.to_string(), e.clone());
        }
        Subst::Proper(map)
    }

    pub fn bindings(&self) -> Option<&BTreeMap<String, Expr>> {
        match self {
            Subst::Proper(m) => Some(m),
            Subst::Failure => None,
        }
    }

    /// Simultaneous replacement; everything maps to `*` under ⊥.
    pub fn apply(&self, e: &Expr) -> Expr {
        match self {
            Subst::Failure => Expr::black_hole(),
            Subst::Proper(m) if m.is_empty() => e.clone(),
            Subst::Proper(m) => apply_map(m, e),
        }
    }

    /// `self ⋄ other`: applying the result equals applying `self` then `other`.
    pub fn compose(&self, other: &Subst) -> Subst {
        let (m1, m2) = match (self, other) {
            (Subst::Proper(a), Subst::Proper(b)) => (a, b),
            _ => return Subst::Failure,
        };
        let mut out = BTreeMap::new();
        for (x, e) in m1 {
            let img = apply_map(m2, e);
            if img != Expr::Var(x.clone()) {
                out.insert(x.clone(), img);
            }
        }
        for (y, e) in m2 {
            if !m1.contains_key(y) {
                out.insert(y.clone(), e.clone());
            }
        }
        Subst::Proper(out)
    }

    /// Parallel addition; bindings of `self` win on shared variables.
    pub fn add(&self, other: &Subst) -> Result<Subst, SubstError> {
        match (self, other) {
            (Subst::Proper(a), Subst::Proper(b)) => {
                let mut out = b.clone();
                for (x, e) in a {
                    out.insert(x.clone(), e.clone());
                }
                Ok(Subst::Proper(out))
            }
            _ => Err(SubstError::ImproperOperand),
        }
    }

    pub fn dom(&self) -> VarSet {
        match self {
            Subst::Proper(m) => m.keys().cloned().collect(),
            Subst::Failure => VarSet::new(),
        }
    }

    pub fn range(&self) -> VarSet {
        let mut out = VarSet::new();
        if let Subst::Proper(m) = self {
            for e in m.values() {
                e.collect_vars(&mut out);
            }
        }
        out
    }

    pub fn vars(&self) -> VarSet {
        let mut out = self.dom();
        out.extend(self.range());
        out
    }

    /// `(dom, range, vars)`.
    pub fn support(&self) -> (VarSet, VarSet, VarSet) {
        (self.dom(), self.range(), self.vars())
    }

    /// True when applying `self` leaves `e` unchanged.
    pub fn misses(&self, e: &Expr) -> bool {
        self.apply(e) == *e
    }

    pub fn is_idempotent(&self) -> bool {
        match self {
            Subst::Failure => true,
            Subst::Proper(_) => self.dom().is_disjoint(&self.range()),
        }
    }

    /// Strong generality: `self ⋄ other = other`.
    pub fn more_general(&self, other: &Subst) -> bool {
        self.compose(other) == *other
    }

    /// Finds δ with `self ⋄ δ = other` by simultaneous matching.
    pub fn weakly_more_general(&self, other: &Subst) -> Option<Subst> {
        let (m1, m2) = match (self, other) {
            (Subst::Proper(a), Subst::Proper(b)) => (a, b),
            (_, Subst::Failure) => return Some(Subst::Failure),
            (Subst::Failure, Subst::Proper(_)) => return None,
        };
        let mut keys: VarSet = m1.keys().cloned().collect();
        keys.extend(m2.keys().cloned());
        let mut delta: BTreeMap<String, Expr> = BTreeMap::new();
        for x in &keys {
            let pattern = m1.get(x).cloned().unwrap_or_else(|| Expr::Var(x.clone()));
            let target = m2.get(x).cloned().unwrap_or_else(|| Expr::Var(x.clone()));
            if !match_into(&pattern, &target, &mut delta) {
                return None;
            }
        }
        // Range variables outside both domains must stay fixed.
        for v in self.range() {
            if !keys.contains(&v) && !match_into(&Expr::Var(v.clone()), &Expr::Var(v), &mut delta) {
                return None;
            }
        }
        let delta = Subst::make(delta).ok()?;
        (self.compose(&delta) == *other).then_some(delta)
    }

    pub fn is_permutation(&self) -> bool {
        match self {
            Subst::Failure => false,
            Subst::Proper(m) => {
                let mut images = BTreeSet::new();
                for e in m.values() {
                    match e {
                        Expr::Var(v) if images.insert(v.clone()) => {}
                        _ => return false,
                    }
                }
                images == m.keys().cloned().collect()
            }
        }
    }

    pub fn permutation_inverse(&self) -> Result<Subst, SubstError> {
        if !self.is_permutation() {
            return Err(SubstError::NotAPermutation(self.to_string()));
        }
        let m = self.bindings().expect("permutation is proper");
        let inv = m
            .iter()
            .map(|(x, e)| match e {
                Expr::Var(v) => (v.clone(), Expr::Var(x.clone())),
                _ => unreachable!(),
            })
            .collect();
        Ok(Subst::Proper(inv))
    }
}

fn apply_map(m: &BTreeMap<String, Expr>, e: &Expr) -> Expr {
    match e {
        Expr::Const(_) => e.clone(),
        Expr::Var(v) => m.get(v).cloned().unwrap_or_else(|| e.clone()),
        Expr::Cons(l, r) => Expr::cons(apply_map(m, l), apply_map(m, r)),
    }
}

/// One-way matching: extends `delta` so that `pattern ⊲ delta = target`.
fn match_into(pattern: &Expr, target: &Expr, delta: &mut BTreeMap<String, Expr>) -> bool {
    match (pattern, target) {
        (Expr::Var(v), _) => match delta.get(v) {
            Some(bound) => bound == target,
            None => {
                delta.insert(v.clone(), target.clone());
                true
            }
        },
        (Expr::Const(a), Expr::Const(b)) => a == b,
        (Expr::Cons(l1, r1), Expr::Cons(l2, r2)) => match_into(l1, l2, delta) && match_into(r1, r2, delta),
        _ => false,
    }
}

/// Structural equality of canonical forms.
pub fn subst_equal(s1: &Subst, s2: &Subst) -> bool {
    s1 == s2
}

/// Renames every variable of `e2` to a fresh name, in first-occurrence order.
/// Returns the renamed expression and the renaming `{v ↦ v#k}` restricted to
/// `vars(e2)`; [`close_permutation`] extends it to a true permutation.
pub fn standardize_apart(e1: &Expr, e2: &Expr, supply: &mut FreshSupply) -> (Expr, Subst) {
    let mut order = Vec::new();
    e2.vars_in_order(&mut order);
    let mut avoid = e1.vars();
    avoid.extend(e2.vars());
    let mut map = BTreeMap::new();
    for v in order {
        let fresh = supply.fresh(&v, &avoid);
        avoid.insert(fresh.clone());
        map.insert(v, Expr::Var(fresh));
    }
    let renamed = apply_map(&map, e2);
    (renamed, Subst::Proper(map))
}

/// Adds the reverse pair for every fresh target of a variable-to-variable
/// renaming, so the result swaps old and new names.
pub fn close_permutation(renaming: &Subst) -> Result<Subst, SubstError> {
    let m = renaming
        .bindings()
        .ok_or_else(|| SubstError::NotAPermutation(renaming.to_string()))?;
    let mut out = m.clone();
    for (x, e) in m {
        match e {
            Expr::Var(v) if !m.contains_key(v) => {
                out.insert(v.clone(), Expr::Var(x.clone()));
            }
            Expr::Var(_) => {}
            _ => return Err(SubstError::NotAPermutation(renaming.to_string())),
        }
    }
    let p = Subst::Proper(out);
    if p.is_permutation() {
        Ok(p)
    } else {
        Err(SubstError::NotAPermutation(renaming.to_string()))
    }
}

impl fmt::Display for Subst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subst::Failure => f.write_str("bot"),
            Subst::Proper(m) => {
                f.write_str("{")?;
                for (i, (x, e)) in m.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x} -> {e}")?;
                }
                f.write_str("}")
            }
        }
    }
}

impl std::str::FromStr for Subst {
    type Err = SubstError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_subst(s)
    }
}

/// Parses `{}`, `bot`, or `{X -> a, Y -> (b . Z)}`.
pub fn parse_subst(text: &str) -> Result<Subst, SubstError> {
    let t = text.trim();
    if t == "bot" {
        return Ok(Subst::Failure);
    }
    let offset = text.len() - text.trim_start().len();
    let syntax = |pos: usize, msg: &str| SubstError::Syntax {
        pos: offset + pos,
        msg: msg.to_string(),
    };
    let inner = t
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| syntax(0, "expected '{' … '}' or 'bot'"))?;
    if inner.trim().is_empty() {
        return Ok(Subst::empty());
    }
    let mut pairs = Vec::new();
    let mut pos = 1;
    for part in split_top_level(inner) {
        let (lhs, rhs) = part.split_once("->").ok_or_else(|| syntax(pos, "expected 'X -> e'"))?;
        let x = lhs.trim();
        if !is_var_name(x) || parse_expr(x).is_err() {
            return Err(SubstError::NotAVariable(x.to_string()));
        }
        let e = parse_expr(rhs).map_err(|err| match err {
            TermError::Syntax { pos: p, msg } => syntax(pos + lhs.len() + 2 + p, &msg),
            other => SubstError::Term(other),
        })?;
        pairs.push((x.to_string(), e));
        pos += part.len() + 1;
    }
    Subst::make(pairs)
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}
