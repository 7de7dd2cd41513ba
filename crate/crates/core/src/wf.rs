//! Well-founded relation combinators: base orders, induced relations,
//! lexicographic combinations and reflexive closures, plus the measure used
//! to justify termination of the unification program.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::sexp::{read_one, Sexp, SexpError};
use crate::term::{Expr, VarSet};
use crate::value::Value;

pub use crate::value::InputTriple;

/// Name under which the unification measure is registered.
pub const U_REL: &str = "u-rel";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WfError {
    #[error("relation {rel} cannot compare {found}")]
    SortMismatch { rel: String, found: String },
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("bad relation syntax at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
}

impl From<SexpError> for WfError {
    fn from(e: SexpError) -> Self {
        let SexpError::Syntax { pos, msg } = e;
        WfError::Syntax { pos, msg }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Base {
    /// `<` on naturals; on expressions it compares sizes.
    SizeLt,
    /// `⊂` on variable sets; on expressions it compares their variables.
    StrictSubset,
    /// Lexicographic `⊂` then `<` on (set, natural) pairs, reflexive first part.
    SubsetIntLex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Projection {
    /// First component of a pair or triple.
    First,
    Vars,
    Size,
    Range,
    /// `e ↦ (vars(e), size(e))`.
    VarsSize,
    /// 1-based component of an input triple.
    Component(usize),
    /// `⟨θ0, e1, e2⟩ ↦ range(θ0) ∪ vars(e1) ∪ vars(e2)`.
    RangeVars,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RelSpec {
    Base(Base),
    InducedBy(Projection, Box<RelSpec>),
    Lex(Vec<RelSpec>),
    ReflexiveClosure(Box<RelSpec>),
}

impl RelSpec {
    pub fn induced(p: Projection, inner: RelSpec) -> RelSpec {
        RelSpec::InducedBy(p, Box::new(inner))
    }

    pub fn lex(children: Vec<RelSpec>) -> Result<RelSpec, WfError> {
        if children.len() < 2 {
            return Err(WfError::Syntax {
                pos: 0,
                msg: "lex needs at least two relations".into(),
            });
        }
        Ok(RelSpec::Lex(children))
    }

    /// Strict shrinking of `range(θ0) ∪ vars⟨e1, e2⟩`.
    pub fn range_vars() -> RelSpec {
        RelSpec::induced(Projection::RangeVars, RelSpec::Base(Base::StrictSubset))
    }

    /// Strict shrinking of the size of the second triple component.
    pub fn size_first() -> RelSpec {
        RelSpec::induced(Projection::Component(2), RelSpec::Base(Base::SizeLt))
    }

    /// The unification measure: range-vars, then size-first.
    pub fn u_rel() -> RelSpec {
        RelSpec::Lex(vec![RelSpec::range_vars(), RelSpec::size_first()])
    }
}

impl fmt::Display for Projection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Projection::First => f.write_str("first"),
            Projection::Vars => f.write_str("vars"),
            Projection::Size => f.write_str("size"),
            Projection::Range => f.write_str("range"),
            Projection::VarsSize => f.write_str("vars-size"),
            Projection::Component(k) => write!(f, "(component {k})"),
            Projection::RangeVars => f.write_str("range-vars"),
        }
    }
}

impl fmt::Display for RelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelSpec::Base(b) => {
                let name = match b {
                    Base::SizeLt => "size-lt",
                    Base::StrictSubset => "strict-subset",
                    Base::SubsetIntLex => "subset-int-lex",
                };
                write!(f, "(base {name})")
            }
            RelSpec::InducedBy(p, r) => write!(f, "(induced {p} {r})"),
            RelSpec::Lex(cs) => {
                f.write_str("(lex")?;
                for c in cs {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
            RelSpec::ReflexiveClosure(r) => write!(f, "(refl {r})"),
        }
    }
}

pub fn parse_relspec(text: &str) -> Result<RelSpec, WfError> {
    relspec_from_sexp(&read_one(text)?)
}

pub fn relspec_from_sexp(s: &Sexp) -> Result<RelSpec, WfError> {
    let bad = |msg: &str| WfError::Syntax {
        pos: s.pos(),
        msg: msg.to_string(),
    };
    let items = s.list().ok_or_else(|| bad("relation must be a list"))?;
    let head = s.head().ok_or_else(|| bad("relation needs a head symbol"))?;
    let args = &items[1..];
    match (head, args.len()) {
        ("range-vars", 0) => Ok(RelSpec::range_vars()),
        ("size-first", 0) => Ok(RelSpec::size_first()),
        ("base", 1) => match args[0].atom() {
            Some("size-lt") => Ok(RelSpec::Base(Base::SizeLt)),
            Some("strict-subset") => Ok(RelSpec::Base(Base::StrictSubset)),
            Some("subset-int-lex") => Ok(RelSpec::Base(Base::SubsetIntLex)),
            _ => Err(bad("unknown base relation")),
        },
        ("induced", 2) => {
            let p = projection_from_sexp(&args[0])?;
            Ok(RelSpec::induced(p, relspec_from_sexp(&args[1])?))
        }
        ("lex", n) if n >= 2 => {
            let cs = args.iter().map(relspec_from_sexp).collect::<Result<_, _>>()?;
            Ok(RelSpec::Lex(cs))
        }
        ("refl", 1) => Ok(RelSpec::ReflexiveClosure(Box::new(relspec_from_sexp(&args[0])?))),
        _ => Err(bad("malformed relation")),
    }
}

fn projection_from_sexp(s: &Sexp) -> Result<Projection, WfError> {
    let bad = || WfError::Syntax {
        pos: s.pos(),
        msg: format!("unknown projection {s}"),
    };
    match s.atom() {
        Some("first") => Ok(Projection::First),
        Some("vars") => Ok(Projection::Vars),
        Some("size") => Ok(Projection::Size),
        Some("range") => Ok(Projection::Range),
        Some("vars-size") => Ok(Projection::VarsSize),
        Some("range-vars") => Ok(Projection::RangeVars),
        Some(_) => Err(bad()),
        None => match s.list() {
            Some([h, k]) if h.atom() == Some("component") => {
                let k: usize = k.atom().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
                if (1..=3).contains(&k) {
                    Ok(Projection::Component(k))
                } else {
                    Err(bad())
                }
            }
            _ => Err(bad()),
        },
    }
}

fn mismatch(spec: &RelSpec, v: &Value) -> WfError {
    WfError::SortMismatch {
        rel: spec.to_string(),
        found: v.sort().to_string(),
    }
}

/// Applies a projection to a value.
pub fn project(p: Projection, v: &Value) -> Option<Value> {
    Some(match (p, v) {
        (Projection::First, Value::Pair(a, _)) => (**a).clone(),
        (Projection::First, Value::Triple(t)) => Value::Subst(t.env.clone()),
        (Projection::Vars, Value::Expr(e)) => Value::Set(e.vars()),
        (Projection::Size, Value::Expr(e)) => Value::Nat(e.size()),
        (Projection::Range, Value::Subst(s)) => Value::Set(s.range()),
        (Projection::VarsSize, Value::Expr(e)) => {
            Value::Pair(Box::new(Value::Set(e.vars())), Box::new(Value::Nat(e.size())))
        }
        (Projection::Component(1), Value::Triple(t)) => Value::Subst(t.env.clone()),
        (Projection::Component(2), Value::Triple(t)) => Value::Expr(t.e1.clone()),
        (Projection::Component(3), Value::Triple(t)) => Value::Expr(t.e2.clone()),
        (Projection::RangeVars, Value::Triple(t)) => Value::Set(range_vars(t)),
        _ => return None,
    })
}

fn range_vars(t: &InputTriple) -> VarSet {
    let mut s = t.env.range();
    t.e1.collect_vars(&mut s);
    t.e2.collect_vars(&mut s);
    s
}

fn base_less(b: Base, spec: &RelSpec, a: &Value, c: &Value) -> Result<bool, WfError> {
    match (b, a, c) {
        (Base::SizeLt, Value::Nat(x), Value::Nat(y)) => Ok(x < y),
        (Base::SizeLt, Value::Expr(x), Value::Expr(y)) => Ok(x.size() < y.size()),
        (Base::StrictSubset, Value::Set(x), Value::Set(y)) => Ok(strict_subset(x, y)),
        (Base::StrictSubset, Value::Expr(x), Value::Expr(y)) => Ok(strict_subset(&x.vars(), &y.vars())),
        (Base::SubsetIntLex, Value::Pair(x1, x2), Value::Pair(y1, y2)) => match (&**x1, &**x2, &**y1, &**y2) {
            (Value::Set(s1), Value::Nat(n1), Value::Set(s2), Value::Nat(n2)) => {
                Ok(strict_subset(s1, s2) || (s1.is_subset(s2) && n1 < n2))
            }
            _ => Err(mismatch(spec, a)),
        },
        _ => Err(mismatch(spec, if sort_ok(b, a) { c } else { a })),
    }
}

fn sort_ok(b: Base, v: &Value) -> bool {
    matches!(
        (b, v),
        (Base::SizeLt, Value::Nat(_) | Value::Expr(_))
            | (Base::StrictSubset, Value::Set(_) | Value::Expr(_))
            | (Base::SubsetIntLex, Value::Pair(..))
    )
}

fn strict_subset(x: &VarSet, y: &VarSet) -> bool {
    x.len() < y.len() && x.is_subset(y)
}

/// Equality of the measures compared by `spec`.
pub fn rel_equiv(spec: &RelSpec, a: &Value, b: &Value) -> Result<bool, WfError> {
    match spec {
        RelSpec::Base(base) => {
            if !sort_ok(*base, a) || !sort_ok(*base, b) {
                return Err(mismatch(spec, a));
            }
            Ok(match (base, a, b) {
                (Base::SizeLt, Value::Expr(x), Value::Expr(y)) => x.size() == y.size(),
                (Base::StrictSubset, Value::Expr(x), Value::Expr(y)) => x.vars() == y.vars(),
                _ => a == b,
            })
        }
        RelSpec::InducedBy(p, inner) => {
            let (pa, pb) = project_both(spec, *p, a, b)?;
            rel_equiv(inner, &pa, &pb)
        }
        RelSpec::Lex(cs) => {
            for c in cs {
                if !rel_equiv(c, a, b)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        RelSpec::ReflexiveClosure(inner) => rel_equiv(inner, a, b),
    }
}

fn project_both(spec: &RelSpec, p: Projection, a: &Value, b: &Value) -> Result<(Value, Value), WfError> {
    let pa = project(p, a).ok_or_else(|| mismatch(spec, a))?;
    let pb = project(p, b).ok_or_else(|| mismatch(spec, b))?;
    Ok((pa, pb))
}

/// `a ≼ b`: strictly less or equivalent.
pub fn rel_leq(spec: &RelSpec, a: &Value, b: &Value) -> Result<bool, WfError> {
    Ok(rel_less(spec, a, b)? || rel_equiv(spec, a, b)?)
}

/// `a ≺ b`. Lexicographic combinations use the reflexive form: some child is
/// strict and every earlier child is weakly decreasing.
pub fn rel_less(spec: &RelSpec, a: &Value, b: &Value) -> Result<bool, WfError> {
    match spec {
        RelSpec::Base(base) => base_less(*base, spec, a, b),
        RelSpec::InducedBy(p, inner) => {
            let (pa, pb) = project_both(spec, *p, a, b)?;
            rel_less(inner, &pa, &pb)
        }
        RelSpec::Lex(cs) => {
            for c in cs {
                if rel_less(c, a, b)? {
                    return Ok(true);
                }
                if !rel_leq(c, a, b)? {
                    return Ok(false);
                }
            }
            Ok(false)
        }
        RelSpec::ReflexiveClosure(inner) => rel_leq(inner, a, b),
    }
}

/// Lexicographic comparison by the plain definition: strict, or equivalent
/// and strict in the next component. Agrees with [`rel_less`].
pub fn rel_less_plain(spec: &RelSpec, a: &Value, b: &Value) -> Result<bool, WfError> {
    match spec {
        RelSpec::Lex(cs) => {
            for c in cs {
                if rel_less_plain(c, a, b)? {
                    return Ok(true);
                }
                if !rel_equiv(c, a, b)? {
                    return Ok(false);
                }
            }
            Ok(false)
        }
        RelSpec::InducedBy(p, inner) => {
            let (pa, pb) = project_both(spec, *p, a, b)?;
            rel_less_plain(inner, &pa, &pb)
        }
        _ => rel_less(spec, a, b),
    }
}

/// The unification measure computed directly from its definition.
pub fn u_less(t1: &InputTriple, t2: &InputTriple) -> bool {
    let s1 = range_vars(t1);
    let s2 = range_vars(t2);
    strict_subset(&s1, &s2) || (s1.is_subset(&s2) && t1.e1.size() < t2.e1.size())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProbeReport {
    pub checked: usize,
    pub violations: Vec<String>,
}

impl ProbeReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks irreflexivity and antisymmetry over the sampled pairs.
pub fn strictness_probe(spec: &RelSpec, samples: &[(Value, Value)]) -> ProbeReport {
    let mut report = ProbeReport::default();
    for (a, b) in samples {
        report.checked += 1;
        for x in [a, b] {
            match rel_less(spec, x, x) {
                Ok(false) => {}
                Ok(true) => report.violations.push(format!("{x} < {x}")),
                Err(e) => report.violations.push(e.to_string()),
            }
        }
        match (rel_less(spec, a, b), rel_less(spec, b, a)) {
            (Ok(true), Ok(true)) => report.violations.push(format!("{a} < {b} < {a}")),
            (Err(e), _) | (_, Err(e)) => report.violations.push(e.to_string()),
            _ => {}
        }
    }
    report
}

/// Named relations available to induction and decrease checking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelRegistry {
    rels: BTreeMap<String, RelSpec>,
}

impl Default for RelRegistry {
    fn default() -> Self {
        let mut rels = BTreeMap::new();
        rels.insert(U_REL.to_string(), RelSpec::u_rel());
        RelRegistry { rels }
    }
}

impl RelRegistry {
    pub fn empty() -> Self {
        RelRegistry { rels: BTreeMap::new() }
    }

    pub fn insert(&mut self, name: &str, spec: RelSpec) {
        self.rels.insert(name.to_string(), spec);
    }

    pub fn get(&self, name: &str) -> Result<&RelSpec, WfError> {
        self.rels
            .get(name)
            .ok_or_else(|| WfError::UnknownRelation(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.rels.contains_key(name)
    }
}

/// Convenience wrapper comparing two input triples under a named relation.
pub fn triple_less(reg: &RelRegistry, name: &str, t1: &InputTriple, t2: &InputTriple) -> Result<bool, WfError> {
    let spec = reg.get(name)?;
    rel_less(
        spec,
        &Value::Triple(Box::new(t1.clone())),
        &Value::Triple(Box::new(t2.clone())),
    )
}

pub fn expr_value(e: &Expr) -> Value {
    Value::Expr(e.clone())
}
