//! Sorted quantifier-free formulas and terms over the expression and
//! substitution signature: parsing with sort inference, meta-substitutions,
//! syntactic unification, simplification, subformula paths and a ground
//! evaluator.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::sexp::{read_one, Sexp, SexpError};
use crate::subst::{FreshSupply, Subst};
use crate::term::{encode_tuple, is_var_name, occurs_in, Expr, Occurrence, VarSet};
use crate::unify::{mgi_decide, mgiu_check, reduce_holds};
use crate::value::{InputTriple, Sort, Value};
use crate::wf::{rel_less, RelRegistry};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("sort error in {term}: {msg}")]
    Sort { term: String, msg: String },
    #[error("unknown symbol {0}")]
    UnknownSymbol(String),
    #[error("{name} expects {expected} arguments, found {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
}

impl From<SexpError> for LogicError {
    fn from(e: SexpError) -> Self {
        let SexpError::Syntax { pos, msg } = e;
        LogicError::Syntax { pos, msg }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LTerm {
    Meta {
        name: String,
        sort: Sort,
    },
    Lit(Value),
    /// Function application; constants are nullary applications.
    App {
        f: String,
        args: Vec<LTerm>,
        sort: Sort,
    },
    Cond {
        test: Box<Formula>,
        then: Box<LTerm>,
        els: Box<LTerm>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Atom { pred: String, args: Vec<LTerm> },
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Eq(LTerm, LTerm),
}

impl LTerm {
    pub fn meta(name: &str, sort: Sort) -> LTerm {
        LTerm::Meta {
            name: name.to_string(),
            sort,
        }
    }

    pub fn constant(name: &str, sort: Sort) -> LTerm {
        LTerm::App {
            f: name.to_string(),
            args: Vec::new(),
            sort,
        }
    }

    pub fn app(f: &str, args: Vec<LTerm>, sort: Sort) -> LTerm {
        LTerm::App {
            f: f.to_string(),
            args,
            sort,
        }
    }

    pub fn cond(test: Formula, then: LTerm, els: LTerm) -> LTerm {
        LTerm::Cond {
            test: Box::new(test),
            then: Box::new(then),
            els: Box::new(els),
        }
    }

    pub fn sort(&self) -> Sort {
        match self {
            LTerm::Meta { sort, .. } | LTerm::App { sort, .. } => *sort,
            LTerm::Lit(v) => v.sort(),
            LTerm::Cond { then, .. } => then.sort(),
        }
    }

    pub fn is_meta(&self) -> bool {
        matches!(self, LTerm::Meta { .. })
    }

    pub fn metas(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_metas(&mut out);
        out
    }

    pub fn collect_metas(&self, out: &mut BTreeSet<String>) {
        match self {
            LTerm::Meta { name, .. } => {
                out.insert(name.clone());
            }
            LTerm::Lit(_) => {}
            LTerm::App { args, .. } => args.iter().for_each(|a| a.collect_metas(out)),
            LTerm::Cond { test, then, els } => {
                test.collect_metas(out);
                then.collect_metas(out);
                els.collect_metas(out);
            }
        }
    }

    /// Function symbols in first-occurrence order, with repetition.
    pub fn symbols(&self, out: &mut Vec<String>) {
        match self {
            LTerm::Meta { .. } => {}
            LTerm::Lit(_) => out.push("quote".to_string()),
            LTerm::App { f, args, .. } => {
                out.push(f.clone());
                args.iter().for_each(|a| a.symbols(out));
            }
            LTerm::Cond { test, then, els } => {
                out.push("if".to_string());
                test.symbols(out);
                then.symbols(out);
                els.symbols(out);
            }
        }
    }
}

impl Formula {
    pub fn atom(pred: &str, args: Vec<LTerm>) -> Formula {
        Formula::Atom {
            pred: pred.to_string(),
            args,
        }
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn metas(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_metas(&mut out);
        out
    }

    pub fn collect_metas(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom { args, .. } => args.iter().for_each(|a| a.collect_metas(out)),
            Formula::Not(f) => f.collect_metas(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_metas(out)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.collect_metas(out);
                b.collect_metas(out);
            }
            Formula::Eq(a, b) => {
                a.collect_metas(out);
                b.collect_metas(out);
            }
        }
    }

    pub fn symbols(&self, out: &mut Vec<String>) {
        match self {
            Formula::True => out.push("true".into()),
            Formula::False => out.push("false".into()),
            Formula::Atom { pred, args } => {
                out.push(pred.clone());
                args.iter().for_each(|a| a.symbols(out));
            }
            Formula::Not(f) => {
                out.push("not".into());
                f.symbols(out);
            }
            Formula::And(fs) | Formula::Or(fs) => {
                out.push(if matches!(self, Formula::And(_)) { "and" } else { "or" }.into());
                fs.iter().for_each(|f| f.symbols(out));
            }
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                out.push(
                    if matches!(self, Formula::Implies(..)) {
                        "implies"
                    } else {
                        "iff"
                    }
                    .into(),
                );
                a.symbols(out);
                b.symbols(out);
            }
            Formula::Eq(a, b) => {
                out.push("=".into());
                a.symbols(out);
                b.symbols(out);
            }
        }
    }

    /// True for atoms and equations, the literals resolution may select.
    pub fn is_atomic(&self) -> bool {
        matches!(self, Formula::Atom { .. } | Formula::Eq(..))
    }
}

// ---------------------------------------------------------------------------
// Printing

fn write_args(f: &mut fmt::Formatter<'_>, args: &[LTerm]) -> fmt::Result {
    for a in args {
        write!(f, " {a}")?;
    }
    Ok(())
}

impl fmt::Display for LTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LTerm::Meta { name, .. } => f.write_str(name),
            LTerm::Lit(v) => write_literal(f, v),
            LTerm::App { f: name, args, .. } if args.is_empty() => f.write_str(name),
            LTerm::App { f: name, args, .. } => {
                write!(f, "({name}")?;
                write_args(f, args)?;
                f.write_str(")")
            }
            LTerm::Cond { test, then, els } => write!(f, "(if {test} {then} {els})"),
        }
    }
}

fn write_literal(f: &mut fmt::Formatter<'_>, v: &Value) -> fmt::Result {
    match v {
        Value::Expr(e) => write!(f, "(quote {e})"),
        Value::Subst(Subst::Failure) => f.write_str("bot"),
        Value::Subst(Subst::Proper(m)) => {
            f.write_str("(subst-lit")?;
            for (k, e) in m {
                write!(f, " ({k} {e})")?;
            }
            f.write_str(")")
        }
        Value::Set(s) => {
            f.write_str("(varset")?;
            for x in s {
                write!(f, " {x}")?;
            }
            f.write_str(")")
        }
        other => write!(f, "{other}"),
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Atom { pred, args } => {
                write!(f, "({pred}")?;
                write_args(f, args)?;
                f.write_str(")")
            }
            Formula::Not(g) => write!(f, "(not {g})"),
            Formula::And(fs) | Formula::Or(fs) => {
                f.write_str(if matches!(self, Formula::And(_)) { "(and" } else { "(or" })?;
                for g in fs {
                    write!(f, " {g}")?;
                }
                f.write_str(")")
            }
            Formula::Implies(a, b) => write!(f, "(implies {a} {b})"),
            Formula::Iff(a, b) => write!(f, "(iff {a} {b})"),
            Formula::Eq(a, b) => write!(f, "(= {a} {b})"),
        }
    }
}

// ---------------------------------------------------------------------------
// Signature and parsing

#[derive(Debug, Clone, PartialEq, Eq)]
enum Arity {
    Fixed(Vec<Sort>),
    Variadic(Sort),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct FnSig {
    args: Arity,
    result: Sort,
}

/// Function, predicate and constant symbols available to the parser.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    fns: BTreeMap<String, FnSig>,
    preds: BTreeMap<String, Vec<Sort>>,
    consts: BTreeMap<String, Sort>,
}

/// Predicates whose second and third arguments share an arbitrary sort.
const WF_ORDERED: &str = "wf-ordered";

impl Default for Signature {
    fn default() -> Self {
        Signature::standard()
    }
}

impl Signature {
    pub fn standard() -> Self {
        use Sort::*;
        let mut sig = Signature {
            fns: BTreeMap::new(),
            preds: BTreeMap::new(),
            consts: BTreeMap::new(),
        };
        let fixed = |args: &[Sort], result| FnSig {
            args: Arity::Fixed(args.to_vec()),
            result,
        };
        for (name, s) in [
            ("cons", fixed(&[Expr, Expr], Expr)),
            ("left", fixed(&[Expr], Expr)),
            ("right", fixed(&[Expr], Expr)),
            ("apply", fixed(&[Expr, Subst], Expr)),
            ("compose", fixed(&[Subst, Subst], Subst)),
            ("replace", fixed(&[Expr, Expr], Subst)),
            ("empty", fixed(&[], Subst)),
            ("bot", fixed(&[], Subst)),
            ("vars", fixed(&[Expr], VarSet)),
            ("dom", fixed(&[Subst], VarSet)),
            ("range", fixed(&[Subst], VarSet)),
            ("size", fixed(&[Expr], Nat)),
            (
                "union",
                FnSig {
                    args: Arity::Variadic(VarSet),
                    result: VarSet,
                },
            ),
            (
                "tuple",
                FnSig {
                    args: Arity::Variadic(Expr),
                    result: Expr,
                },
            ),
            ("triple", fixed(&[Subst, Expr, Expr], Triple)),
        ] {
            sig.fns.insert(name.to_string(), s);
        }
        for (name, args) in [
            ("is-atom", vec![Expr]),
            ("is-const", vec![Expr]),
            ("is-var", vec![Expr]),
            ("is-proper", vec![Subst]),
            ("occurs-proper", vec![Expr, Expr]),
            ("occurs-refl", vec![Expr, Expr]),
            ("misses", vec![Subst, Expr]),
            ("idem", vec![Subst]),
            ("more-genid", vec![Subst, Subst]),
            ("mgi", vec![Subst, Expr, Expr, Subst]),
            ("mgiu", vec![Subst, Expr, Expr, Subst]),
            ("reduce", vec![Subst, VarSet, Subst]),
            ("subset", vec![VarSet, VarSet]),
            ("proper-subset", vec![VarSet, VarSet]),
            ("size-lt", vec![Nat, Nat]),
        ] {
            sig.preds.insert(name.to_string(), args);
        }
        sig
    }

    pub fn add_const(&mut self, name: &str, sort: Sort) {
        self.consts.insert(name.to_string(), sort);
    }

    pub fn add_fn(&mut self, name: &str, args: Vec<Sort>, result: Sort) {
        self.fns.insert(
            name.to_string(),
            FnSig {
                args: Arity::Fixed(args),
                result,
            },
        );
    }

    pub fn const_sort(&self, name: &str) -> Option<Sort> {
        self.consts.get(name).copied()
    }

    pub fn fn_result(&self, name: &str) -> Option<Sort> {
        self.fns.get(name).map(|s| s.result)
    }

    pub fn is_pred(&self, name: &str) -> bool {
        self.preds.contains_key(name) || name == WF_ORDERED
    }

    /// Parses a formula. With `open`, unknown lowercase atoms become new
    /// constants whose sorts are inferred and returned.
    pub fn parse_formula(&self, text: &str, open: bool) -> Result<(Formula, BTreeMap<String, Sort>), LogicError> {
        let sexp = read_one(text)?;
        self.formula_from_sexp(&sexp, open)
    }

    pub fn formula_from_sexp(&self, sexp: &Sexp, open: bool) -> Result<(Formula, BTreeMap<String, Sort>), LogicError> {
        let mut inf = Infer::new(self, open);
        let mut f = inf.formula(sexp)?;
        inf.finish_formula(&mut f)?;
        Ok((f, inf.new_consts()))
    }

    /// Parses a term; see [`Signature::parse_formula`].
    pub fn parse_term(&self, text: &str, open: bool) -> Result<LTerm, LogicError> {
        let sexp = read_one(text)?;
        self.term_from_sexp(&sexp, open)
    }

    pub fn term_from_sexp(&self, sexp: &Sexp, open: bool) -> Result<LTerm, LogicError> {
        let mut inf = Infer::new(self, open);
        let (mut t, _) = inf.term(sexp)?;
        inf.finish_term(&mut t)?;
        Ok(t)
    }

    /// Parses the body of `name(params) = body`, inferring the parameter
    /// sorts and the result sort. Self-calls share those sorts.
    pub fn parse_definition(
        &self,
        name: &str,
        params: &[String],
        body: &Sexp,
    ) -> Result<(Vec<(String, Sort)>, Sort, LTerm), LogicError> {
        let mut inf = Infer::new(self, false);
        let vars: Vec<usize> = params
            .iter()
            .map(|p| {
                let v = inf.fresh();
                inf.consts.insert(p.clone(), v);
                v
            })
            .collect();
        let result = inf.fresh();
        inf.self_fn = Some((name.to_string(), vars.clone(), result));
        let (mut t, ty) = inf.term(body)?;
        inf.unify(ty, Ty::Var(result), body)?;
        inf.finish_term(&mut t)?;
        let mut sorts = Vec::new();
        for p in params {
            let sort = inf.sort_of_const(p)?.expect("parameter registered");
            sorts.push((p.clone(), sort));
        }
        let out = match inf.resolve(Ty::Var(result)) {
            Ty::Known(s) => s,
            Ty::Var(_) => {
                return Err(LogicError::Sort {
                    term: name.to_string(),
                    msg: "cannot infer result sort".into(),
                })
            }
        };
        Ok((sorts, out, t))
    }

    /// Parses several formulas sharing one inference scope, so that a
    /// metavariable or open constant gets one sort across all of them.
    pub fn parse_joint(
        &self,
        formulas: &[&Sexp],
        terms: &[&Sexp],
        open: bool,
    ) -> Result<(Vec<Formula>, Vec<LTerm>, BTreeMap<String, Sort>), LogicError> {
        let mut inf = Infer::new(self, open);
        let mut fs = formulas.iter().map(|s| inf.formula(s)).collect::<Result<Vec<_>, _>>()?;
        let mut ts = Vec::new();
        for s in terms {
            ts.push(inf.term(s)?.0);
        }
        for f in &mut fs {
            inf.finish_formula(f)?;
        }
        for t in &mut ts {
            inf.finish_term(t)?;
        }
        Ok((fs, ts, inf.new_consts()))
    }
}

/// Parses a formula over the standard signature, treating unknown lowercase
/// atoms as constants of inferred sort.
pub fn parse_formula(text: &str) -> Result<Formula, LogicError> {
    Ok(Signature::standard().parse_formula(text, true)?.0)
}

pub fn parse_term(text: &str) -> Result<LTerm, LogicError> {
    Signature::standard().parse_term(text, true)
}

/// Metavariables start with an uppercase letter and may carry primes and
/// `#k` suffixes.
pub fn is_meta_name(name: &str) -> bool {
    is_var_name(name.split(['\'', '#']).next().unwrap_or(""))
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '#' | '\''))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Known(Sort),
    Var(usize),
}

struct Infer<'a> {
    sig: &'a Signature,
    open: bool,
    parent: Vec<usize>,
    bound: Vec<Option<Sort>>,
    metas: HashMap<String, usize>,
    consts: BTreeMap<String, usize>,
    /// A function being defined: name, argument sort variables, result.
    self_fn: Option<(String, Vec<usize>, usize)>,
}

impl<'a> Infer<'a> {
    fn new(sig: &'a Signature, open: bool) -> Self {
        Infer {
            sig,
            open,
            parent: Vec::new(),
            bound: Vec::new(),
            metas: HashMap::new(),
            consts: BTreeMap::new(),
            self_fn: None,
        }
    }

    fn fresh(&mut self) -> usize {
        self.parent.push(self.parent.len());
        self.bound.push(None);
        self.parent.len() - 1
    }

    fn find(&mut self, v: usize) -> usize {
        let p = self.parent[v];
        if p == v {
            return v;
        }
        let r = self.find(p);
        self.parent[v] = r;
        r
    }

    fn resolve(&mut self, t: Ty) -> Ty {
        match t {
            Ty::Known(_) => t,
            Ty::Var(v) => {
                let r = self.find(v);
                match self.bound[r] {
                    Some(s) => Ty::Known(s),
                    None => Ty::Var(r),
                }
            }
        }
    }

    fn unify(&mut self, a: Ty, b: Ty, at: &Sexp) -> Result<(), LogicError> {
        match (self.resolve(a), self.resolve(b)) {
            (Ty::Known(x), Ty::Known(y)) if x == y => Ok(()),
            (Ty::Known(x), Ty::Known(y)) => Err(LogicError::Sort {
                term: at.to_string(),
                msg: format!("expected {y}, found {x}"),
            }),
            (Ty::Var(v), Ty::Known(s)) | (Ty::Known(s), Ty::Var(v)) => {
                self.bound[v] = Some(s);
                Ok(())
            }
            (Ty::Var(v), Ty::Var(w)) => {
                if v != w {
                    self.parent[v] = w;
                }
                Ok(())
            }
        }
    }

    fn formula(&mut self, s: &Sexp) -> Result<Formula, LogicError> {
        if let Some(a) = s.atom() {
            return match a {
                "true" => Ok(Formula::True),
                "false" => Ok(Formula::False),
                _ if self.sig.preds.get(a).is_some_and(|p| p.is_empty()) => Ok(Formula::atom(a, vec![])),
                _ => Err(syntax(s, format!("expected a formula, found {a}"))),
            };
        }
        let items = s.list().unwrap();
        let head = s.head().ok_or_else(|| syntax(s, "formula needs a head symbol"))?;
        let args = &items[1..];
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(LogicError::Arity {
                    name: head.to_string(),
                    expected: n,
                    found: args.len(),
                })
            }
        };
        match head {
            "not" => {
                arity(1)?;
                Ok(Formula::not(self.formula(&args[0])?))
            }
            "and" | "or" => {
                if args.is_empty() {
                    return Err(syntax(s, format!("{head} needs operands")));
                }
                let fs = args.iter().map(|a| self.formula(a)).collect::<Result<Vec<_>, _>>()?;
                Ok(if head == "and" {
                    Formula::And(fs)
                } else {
                    Formula::Or(fs)
                })
            }
            "implies" | "iff" => {
                arity(2)?;
                let a = self.formula(&args[0])?;
                let b = self.formula(&args[1])?;
                Ok(if head == "implies" {
                    Formula::implies(a, b)
                } else {
                    Formula::iff(a, b)
                })
            }
            "=" => {
                arity(2)?;
                let (a, ta) = self.term(&args[0])?;
                let (b, tb) = self.term(&args[1])?;
                self.unify(ta, tb, s)?;
                Ok(Formula::Eq(a, b))
            }
            WF_ORDERED => {
                arity(3)?;
                let rel = args[0]
                    .atom()
                    .ok_or_else(|| syntax(&args[0], "relation name expected"))?;
                let (a, ta) = self.term(&args[1])?;
                let (b, tb) = self.term(&args[2])?;
                self.unify(ta, tb, s)?;
                Ok(Formula::atom(
                    WF_ORDERED,
                    vec![LTerm::Lit(Value::Rel(rel.to_string())), a, b],
                ))
            }
            _ => {
                let sorts = self
                    .sig
                    .preds
                    .get(head)
                    .cloned()
                    .ok_or_else(|| LogicError::UnknownSymbol(head.to_string()))?;
                arity(sorts.len())?;
                let mut out = Vec::new();
                for (a, sort) in args.iter().zip(sorts) {
                    let (t, ty) = self.term(a)?;
                    self.unify(ty, Ty::Known(sort), a)?;
                    out.push(t);
                }
                Ok(Formula::atom(head, out))
            }
        }
    }

    fn term(&mut self, s: &Sexp) -> Result<(LTerm, Ty), LogicError> {
        if let Some(a) = s.atom() {
            return self.atom_term(s, a);
        }
        let items = s.list().unwrap();
        let head = s.head().ok_or_else(|| syntax(s, "term needs a head symbol"))?;
        let args = &items[1..];
        match head {
            "quote" => {
                if args.len() != 1 {
                    return Err(syntax(s, "quote takes one expression"));
                }
                let e = args[0].to_expr()?;
                Ok((LTerm::Lit(Value::Expr(e)), Ty::Known(Sort::Expr)))
            }
            "subst-lit" => {
                let mut pairs = Vec::new();
                for b in args {
                    match b.list() {
                        Some([x, e]) => {
                            let x = x.to_expr()?;
                            let Expr::Var(name) = x else {
                                return Err(syntax(b, "binding must start with a variable"));
                            };
                            pairs.push((name, e.to_expr()?));
                        }
                        _ => return Err(syntax(b, "binding must be (X e)")),
                    }
                }
                let sub = Subst::make(pairs).map_err(|e| syntax(s, e.to_string()))?;
                Ok((LTerm::Lit(Value::Subst(sub)), Ty::Known(Sort::Subst)))
            }
            "varset" => {
                let mut set = VarSet::new();
                for x in args {
                    match x.atom() {
                        Some(n) if is_var_name(n) => {
                            set.insert(n.to_string());
                        }
                        _ => return Err(syntax(x, "variable name expected")),
                    }
                }
                Ok((LTerm::Lit(Value::Set(set)), Ty::Known(Sort::VarSet)))
            }
            "if" => {
                if args.len() != 3 {
                    return Err(LogicError::Arity {
                        name: "if".into(),
                        expected: 3,
                        found: args.len(),
                    });
                }
                let test = self.formula(&args[0])?;
                let (a, ta) = self.term(&args[1])?;
                let (b, tb) = self.term(&args[2])?;
                self.unify(ta, tb, s)?;
                Ok((LTerm::cond(test, a, b), ta))
            }
            _ if self.self_fn.as_ref().is_some_and(|(n, _, _)| n == head) => {
                let (_, vars, result) = self.self_fn.clone().unwrap();
                if vars.len() != args.len() {
                    return Err(LogicError::Arity {
                        name: head.to_string(),
                        expected: vars.len(),
                        found: args.len(),
                    });
                }
                let mut out = Vec::new();
                for (a, v) in args.iter().zip(vars) {
                    let (t, ty) = self.term(a)?;
                    self.unify(ty, Ty::Var(v), a)?;
                    out.push(t);
                }
                // Sort is fixed up once inference is complete.
                Ok((LTerm::app(head, out, Sort::Expr), Ty::Var(result)))
            }
            _ => {
                let sig = self
                    .sig
                    .fns
                    .get(head)
                    .cloned()
                    .ok_or_else(|| LogicError::UnknownSymbol(head.to_string()))?;
                let sorts = match &sig.args {
                    Arity::Fixed(v) => {
                        if v.len() != args.len() {
                            return Err(LogicError::Arity {
                                name: head.to_string(),
                                expected: v.len(),
                                found: args.len(),
                            });
                        }
                        v.clone()
                    }
                    Arity::Variadic(s) => vec![*s; args.len()],
                };
                let mut out = Vec::new();
                for (a, sort) in args.iter().zip(sorts) {
                    let (t, ty) = self.term(a)?;
                    self.unify(ty, Ty::Known(sort), a)?;
                    out.push(t);
                }
                Ok((LTerm::app(head, out, sig.result), Ty::Known(sig.result)))
            }
        }
    }

    fn atom_term(&mut self, s: &Sexp, a: &str) -> Result<(LTerm, Ty), LogicError> {
        if let Ok(n) = a.parse::<u64>() {
            return Ok((LTerm::Lit(Value::Nat(n)), Ty::Known(Sort::Nat)));
        }
        let (name, ann) = match a.split_once(':') {
            Some((n, sort)) => {
                let sort = Sort::from_name(sort).ok_or_else(|| syntax(s, format!("unknown sort {sort}")))?;
                (n, Some(sort))
            }
            None => (a, None),
        };
        if is_meta_name(name) {
            let v = match self.metas.get(name) {
                Some(v) => *v,
                None => {
                    let v = self.fresh();
                    self.metas.insert(name.to_string(), v);
                    v
                }
            };
            if let Some(sort) = ann {
                self.unify(Ty::Var(v), Ty::Known(sort), s)?;
            }
            // Sort is fixed up once inference is complete.
            return Ok((LTerm::meta(name, Sort::Expr), Ty::Var(v)));
        }
        if ann.is_some() {
            return Err(syntax(s, "only metavariables take sort annotations"));
        }
        if let Some(sig) = self.sig.fns.get(name) {
            if sig.args == Arity::Fixed(vec![]) {
                return Ok((LTerm::constant(name, sig.result), Ty::Known(sig.result)));
            }
            return Err(LogicError::Arity {
                name: name.to_string(),
                expected: 1,
                found: 0,
            });
        }
        if let Some(sort) = self.sig.consts.get(name) {
            return Ok((LTerm::constant(name, *sort), Ty::Known(*sort)));
        }
        if let Some(v) = self.consts.get(name) {
            return Ok((LTerm::constant(name, Sort::Expr), Ty::Var(*v)));
        }
        if self.open && name.chars().next().is_some_and(|c| c.is_ascii_lowercase()) {
            let v = match self.consts.get(name) {
                Some(v) => *v,
                None => {
                    let v = self.fresh();
                    self.consts.insert(name.to_string(), v);
                    v
                }
            };
            return Ok((LTerm::constant(name, Sort::Expr), Ty::Var(v)));
        }
        Err(LogicError::UnknownSymbol(name.to_string()))
    }

    fn sort_of_meta(&mut self, name: &str) -> Result<Sort, LogicError> {
        let v = self.metas[name];
        match self.resolve(Ty::Var(v)) {
            Ty::Known(s) => Ok(s),
            Ty::Var(_) => Err(LogicError::Sort {
                term: name.to_string(),
                msg: "cannot infer sort; annotate it as NAME:sort".into(),
            }),
        }
    }

    fn sort_of_const(&mut self, name: &str) -> Result<Option<Sort>, LogicError> {
        let Some(v) = self.consts.get(name).copied() else {
            return Ok(None);
        };
        match self.resolve(Ty::Var(v)) {
            Ty::Known(s) => Ok(Some(s)),
            Ty::Var(_) => Err(LogicError::Sort {
                term: name.to_string(),
                msg: "cannot infer sort".into(),
            }),
        }
    }

    fn finish_term(&mut self, t: &mut LTerm) -> Result<(), LogicError> {
        match t {
            LTerm::Meta { name, sort } => *sort = self.sort_of_meta(name)?,
            LTerm::Lit(_) => {}
            LTerm::App { f, args, sort } => {
                if args.is_empty() {
                    if let Some(s) = self.sort_of_const(f)? {
                        *sort = s;
                    }
                }
                if let Some((_, _, result)) = self.self_fn.clone().filter(|(n, _, _)| n == f) {
                    if let Ty::Known(s) = self.resolve(Ty::Var(result)) {
                        *sort = s;
                    }
                }
                for a in args {
                    self.finish_term(a)?;
                }
            }
            LTerm::Cond { test, then, els } => {
                self.finish_formula(test)?;
                self.finish_term(then)?;
                self.finish_term(els)?;
            }
        }
        Ok(())
    }

    fn finish_formula(&mut self, f: &mut Formula) -> Result<(), LogicError> {
        match f {
            Formula::True | Formula::False => Ok(()),
            Formula::Atom { args, .. } => args.iter_mut().try_for_each(|a| self.finish_term(a)),
            Formula::Not(g) => self.finish_formula(g),
            Formula::And(fs) | Formula::Or(fs) => fs.iter_mut().try_for_each(|g| self.finish_formula(g)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                self.finish_formula(a)?;
                self.finish_formula(b)
            }
            Formula::Eq(a, b) => {
                self.finish_term(a)?;
                self.finish_term(b)
            }
        }
    }

    fn new_consts(&mut self) -> BTreeMap<String, Sort> {
        let names: Vec<String> = self.consts.keys().cloned().collect();
        names
            .into_iter()
            .filter_map(|n| self.sort_of_const(&n).ok().flatten().map(|s| (n, s)))
            .collect()
    }
}

fn syntax(s: &Sexp, msg: impl Into<String>) -> LogicError {
    LogicError::Syntax {
        pos: s.pos(),
        msg: msg.into(),
    }
}

// ---------------------------------------------------------------------------
// Meta-substitutions

/// A finite map from metavariable names to terms.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MSubst(pub BTreeMap<String, LTerm>);

impl MSubst {
    pub fn new() -> Self {
        MSubst(BTreeMap::new())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&LTerm> {
        self.0.get(name)
    }

    pub fn insert(&mut self, name: &str, t: LTerm) {
        self.0.insert(name.to_string(), t);
    }

    pub fn term(&self, t: &LTerm) -> LTerm {
        match t {
            LTerm::Meta { name, .. } => self.0.get(name).cloned().unwrap_or_else(|| t.clone()),
            LTerm::Lit(_) => t.clone(),
            LTerm::App { f, args, sort } => LTerm::App {
                f: f.clone(),
                args: args.iter().map(|a| self.term(a)).collect(),
                sort: *sort,
            },
            LTerm::Cond { test, then, els } => LTerm::cond(self.formula(test), self.term(then), self.term(els)),
        }
    }

    pub fn formula(&self, f: &Formula) -> Formula {
        if self.is_empty() {
            return f.clone();
        }
        match f {
            Formula::True | Formula::False => f.clone(),
            Formula::Atom { pred, args } => Formula::Atom {
                pred: pred.clone(),
                args: args.iter().map(|a| self.term(a)).collect(),
            },
            Formula::Not(g) => Formula::not(self.formula(g)),
            Formula::And(fs) => Formula::And(fs.iter().map(|g| self.formula(g)).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|g| self.formula(g)).collect()),
            Formula::Implies(a, b) => Formula::implies(self.formula(a), self.formula(b)),
            Formula::Iff(a, b) => Formula::iff(self.formula(a), self.formula(b)),
            Formula::Eq(a, b) => Formula::Eq(self.term(a), self.term(b)),
        }
    }

    /// `self` followed by `other`.
    pub fn compose(&self, other: &MSubst) -> MSubst {
        let mut out = BTreeMap::new();
        for (k, v) in &self.0 {
            let t = other.term(v);
            if !matches!(&t, LTerm::Meta { name, .. } if name == k) {
                out.insert(k.clone(), t);
            }
        }
        for (k, v) in &other.0 {
            if !self.0.contains_key(k) {
                out.insert(k.clone(), v.clone());
            }
        }
        MSubst(out)
    }

    pub fn is_idempotent(&self) -> bool {
        let mut range = BTreeSet::new();
        self.0.values().for_each(|t| t.collect_metas(&mut range));
        self.0.keys().all(|k| !range.contains(k))
    }
}

impl fmt::Display for MSubst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k} -> {v}")?;
        }
        f.write_str("}")
    }
}

/// Renames every metavariable of `names` to a fresh `name#k`, avoiding
/// `avoid`.
pub fn renaming_for(
    names: &BTreeSet<String>,
    sorts: &BTreeMap<String, Sort>,
    avoid: &BTreeSet<String>,
    supply: &mut FreshSupply,
) -> MSubst {
    let mut taken = avoid.clone();
    taken.extend(names.iter().cloned());
    let mut out = MSubst::new();
    for n in names {
        let fresh = supply.fresh(n, &taken);
        taken.insert(fresh.clone());
        out.insert(n, LTerm::meta(&fresh, sorts[n]));
    }
    out
}

/// Metavariable sorts occurring in a formula.
pub fn meta_sorts(f: &Formula, out: &mut BTreeMap<String, Sort>) {
    walk_terms(f, &mut |t| {
        if let LTerm::Meta { name, sort } = t {
            out.insert(name.clone(), *sort);
        }
    });
}

pub fn term_meta_sorts(t: &LTerm, out: &mut BTreeMap<String, Sort>) {
    walk_term(t, &mut |u| {
        if let LTerm::Meta { name, sort } = u {
            out.insert(name.clone(), *sort);
        }
    });
}

fn walk_terms(f: &Formula, visit: &mut dyn FnMut(&LTerm)) {
    match f {
        Formula::True | Formula::False => {}
        Formula::Atom { args, .. } => args.iter().for_each(|a| walk_term(a, visit)),
        Formula::Not(g) => walk_terms(g, visit),
        Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|g| walk_terms(g, visit)),
        Formula::Implies(a, b) | Formula::Iff(a, b) => {
            walk_terms(a, visit);
            walk_terms(b, visit);
        }
        Formula::Eq(a, b) => {
            walk_term(a, visit);
            walk_term(b, visit);
        }
    }
}

fn walk_term(t: &LTerm, visit: &mut dyn FnMut(&LTerm)) {
    visit(t);
    match t {
        LTerm::Meta { .. } | LTerm::Lit(_) => {}
        LTerm::App { args, .. } => args.iter().for_each(|a| walk_term(a, visit)),
        LTerm::Cond { test, then, els } => {
            walk_terms(test, visit);
            walk_term(then, visit);
            walk_term(els, visit);
        }
    }
}

// ---------------------------------------------------------------------------
// Unification

/// A formula or a term, for operations that apply to both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    F(Formula),
    T(LTerm),
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::F(x) => write!(f, "{x}"),
            Node::T(x) => write!(f, "{x}"),
        }
    }
}

pub fn term_unify(a: &LTerm, b: &LTerm) -> Option<MSubst> {
    let mut u = MSubst::new();
    unify_terms(a, b, &mut u).then_some(u)
}

pub fn formula_unify(a: &Formula, b: &Formula) -> Option<MSubst> {
    let mut u = MSubst::new();
    unify_formulas(a, b, &mut u).then_some(u)
}

pub fn node_unify(a: &Node, b: &Node) -> Option<MSubst> {
    match (a, b) {
        (Node::F(x), Node::F(y)) => formula_unify(x, y),
        (Node::T(x), Node::T(y)) => term_unify(x, y),
        _ => None,
    }
}

fn unify_terms(a: &LTerm, b: &LTerm, u: &mut MSubst) -> bool {
    let a = u.term(a);
    let b = u.term(b);
    if a == b {
        return true;
    }
    match (&a, &b) {
        (LTerm::Meta { name, sort }, t) | (t, LTerm::Meta { name, sort }) => {
            if t.sort() != *sort || t.metas().contains(name) {
                return false;
            }
            let single = MSubst([(name.clone(), t.clone())].into_iter().collect());
            *u = u.compose(&single);
            true
        }
        (LTerm::App { f, args, .. }, LTerm::App { f: g, args: brgs, .. }) => {
            f == g && args.len() == brgs.len() && args.iter().zip(brgs).all(|(x, y)| unify_terms(x, y, u))
        }
        (
            LTerm::Cond {
                test: t1,
                then: a1,
                els: b1,
            },
            LTerm::Cond {
                test: t2,
                then: a2,
                els: b2,
            },
        ) => unify_formulas(t1, t2, u) && unify_terms(a1, a2, u) && unify_terms(b1, b2, u),
        _ => false,
    }
}

fn unify_formulas(a: &Formula, b: &Formula, u: &mut MSubst) -> bool {
    match (a, b) {
        (Formula::True, Formula::True) | (Formula::False, Formula::False) => true,
        (Formula::Atom { pred: p, args: xs }, Formula::Atom { pred: q, args: ys }) => {
            p == q && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| unify_terms(x, y, u))
        }
        (Formula::Not(x), Formula::Not(y)) => unify_formulas(x, y, u),
        (Formula::And(xs), Formula::And(ys)) | (Formula::Or(xs), Formula::Or(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| unify_formulas(x, y, u))
        }
        (Formula::Implies(x1, x2), Formula::Implies(y1, y2)) | (Formula::Iff(x1, x2), Formula::Iff(y1, y2)) => {
            unify_formulas(x1, y1, u) && unify_formulas(x2, y2, u)
        }
        (Formula::Eq(x1, x2), Formula::Eq(y1, y2)) => unify_terms(x1, y1, u) && unify_terms(x2, y2, u),
        _ => false,
    }
}

/// One-sided matching: a substitution over the metavariables of `pattern`
/// mapping it onto `target`.
pub fn formula_match(pattern: &Formula, target: &Formula) -> Option<MSubst> {
    let frozen = target.metas();
    let u = formula_unify(pattern, target)?;
    u.0.keys().all(|k| !frozen.contains(k)).then_some(u)
}

// ---------------------------------------------------------------------------
// Simplification

/// Propositional simplification applied after every rule: constants are
/// eliminated, negation is pushed through `and`, `or` and `implies`, double
/// negation is removed, nested connectives are flattened and repeated
/// operands dropped. Conditional terms are simplified as well.
pub fn simplify(f: &Formula) -> Formula {
    match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Atom { pred, args } => Formula::Atom {
            pred: pred.clone(),
            args: args.iter().map(simplify_term).collect(),
        },
        Formula::Eq(a, b) => Formula::Eq(simplify_term(a), simplify_term(b)),
        Formula::Not(g) => negate(&simplify(g)),
        Formula::And(fs) => make_and(fs.iter().map(simplify).collect()),
        Formula::Or(fs) => make_or(fs.iter().map(simplify).collect()),
        Formula::Implies(a, b) => {
            let a = simplify(a);
            let b = simplify(b);
            match (&a, &b) {
                (Formula::True, _) => b,
                (Formula::False, _) | (_, Formula::True) => Formula::True,
                (_, Formula::False) => negate(&a),
                _ => Formula::implies(a, b),
            }
        }
        Formula::Iff(a, b) => {
            let a = simplify(a);
            let b = simplify(b);
            match (&a, &b) {
                (Formula::True, _) => b,
                (_, Formula::True) => a,
                (Formula::False, _) => negate(&b),
                (_, Formula::False) => negate(&a),
                _ => Formula::iff(a, b),
            }
        }
    }
}

/// Negation of an already simplified formula, kept simplified.
fn negate(f: &Formula) -> Formula {
    match f {
        Formula::True => Formula::False,
        Formula::False => Formula::True,
        Formula::Not(g) => (**g).clone(),
        Formula::And(fs) => make_or(fs.iter().map(negate).collect()),
        Formula::Or(fs) => make_and(fs.iter().map(negate).collect()),
        Formula::Implies(a, b) => make_and(vec![(**a).clone(), negate(b)]),
        _ => Formula::not(f.clone()),
    }
}

fn make_and(fs: Vec<Formula>) -> Formula {
    let mut out: Vec<Formula> = Vec::new();
    for f in fs {
        match f {
            Formula::True => {}
            Formula::False => return Formula::False,
            Formula::And(gs) => {
                for g in gs {
                    if !out.contains(&g) {
                        out.push(g);
                    }
                }
            }
            g => {
                if !out.contains(&g) {
                    out.push(g);
                }
            }
        }
    }
    match out.len() {
        0 => Formula::True,
        1 => out.pop().unwrap(),
        _ => Formula::And(out),
    }
}

fn make_or(fs: Vec<Formula>) -> Formula {
    let mut out: Vec<Formula> = Vec::new();
    for f in fs {
        match f {
            Formula::False => {}
            Formula::True => return Formula::True,
            Formula::Or(gs) => {
                for g in gs {
                    if !out.contains(&g) {
                        out.push(g);
                    }
                }
            }
            g => {
                if !out.contains(&g) {
                    out.push(g);
                }
            }
        }
    }
    match out.len() {
        0 => Formula::False,
        1 => out.pop().unwrap(),
        _ => Formula::Or(out),
    }
}

/// Simplifies the formulas inside a term and collapses conditionals with a
/// constant test or identical branches.
pub fn simplify_term(t: &LTerm) -> LTerm {
    match t {
        LTerm::Meta { .. } | LTerm::Lit(_) => t.clone(),
        LTerm::App { f, args, sort } => LTerm::App {
            f: f.clone(),
            args: args.iter().map(simplify_term).collect(),
            sort: *sort,
        },
        LTerm::Cond { test, then, els } => {
            let test = simplify(test);
            let then = simplify_term(then);
            let els = simplify_term(els);
            match test {
                Formula::True => then,
                Formula::False => els,
                _ if then == els => then,
                Formula::Not(inner) => LTerm::cond(*inner, els, then),
                _ => LTerm::cond(test, then, els),
            }
        }
    }
}

/// Negation normal form: implications become disjunctions and negation is
/// pushed down to atoms; equivalences are kept intact.
pub fn normalize(f: &Formula) -> Formula {
    fn nnf(f: &Formula, positive: bool) -> Formula {
        match f {
            Formula::True => {
                if positive {
                    Formula::True
                } else {
                    Formula::False
                }
            }
            Formula::False => {
                if positive {
                    Formula::False
                } else {
                    Formula::True
                }
            }
            Formula::Not(g) => nnf(g, !positive),
            Formula::And(fs) | Formula::Or(fs) => {
                let parts = fs.iter().map(|g| nnf(g, positive)).collect();
                if matches!(f, Formula::And(_)) == positive {
                    make_and(parts)
                } else {
                    make_or(parts)
                }
            }
            Formula::Implies(a, b) => {
                let parts = vec![nnf(a, !positive), nnf(b, positive)];
                if positive {
                    make_or(parts)
                } else {
                    make_and(parts)
                }
            }
            Formula::Iff(a, b) => {
                let g = Formula::iff(normalize(a), normalize(b));
                if positive {
                    g
                } else {
                    Formula::not(g)
                }
            }
            atom => {
                if positive {
                    atom.clone()
                } else {
                    Formula::not(atom.clone())
                }
            }
        }
    }
    nnf(f, true)
}

// ---------------------------------------------------------------------------
// Paths

/// A position inside a formula: 1-based child indices. Children are the
/// operands of `and`/`or`, the operand of `not` (1), the sides of
/// `implies`/`iff`/`=` (1, 2), the arguments of atoms and applications, and
/// test/then/else (1, 2, 3) of conditionals.
pub type Path = Vec<usize>;

pub fn parse_path(text: &str) -> Option<Path> {
    if text == "0" {
        return Some(Vec::new());
    }
    text.split('.')
        .map(|p| p.parse::<usize>().ok().filter(|&k| k >= 1))
        .collect()
}

pub fn path_to_string(p: &[usize]) -> String {
    if p.is_empty() {
        return "0".to_string();
    }
    p.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(".")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRef<'a> {
    F(&'a Formula),
    T(&'a LTerm),
}

impl NodeRef<'_> {
    pub fn to_node(self) -> Node {
        match self {
            NodeRef::F(f) => Node::F(f.clone()),
            NodeRef::T(t) => Node::T(t.clone()),
        }
    }
}

fn child(n: NodeRef<'_>, k: usize) -> Option<NodeRef<'_>> {
    let i = k.checked_sub(1)?;
    match n {
        NodeRef::F(f) => match f {
            Formula::And(fs) | Formula::Or(fs) => fs.get(i).map(NodeRef::F),
            Formula::Not(g) if i == 0 => Some(NodeRef::F(g)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => match i {
                0 => Some(NodeRef::F(a)),
                1 => Some(NodeRef::F(b)),
                _ => None,
            },
            Formula::Atom { args, .. } => args.get(i).map(NodeRef::T),
            Formula::Eq(a, b) => match i {
                0 => Some(NodeRef::T(a)),
                1 => Some(NodeRef::T(b)),
                _ => None,
            },
            _ => None,
        },
        NodeRef::T(t) => match t {
            LTerm::App { args, .. } => args.get(i).map(NodeRef::T),
            LTerm::Cond { test, then, els } => match i {
                0 => Some(NodeRef::F(test)),
                1 => Some(NodeRef::T(then)),
                2 => Some(NodeRef::T(els)),
                _ => None,
            },
            _ => None,
        },
    }
}

pub fn node_at<'a>(f: &'a Formula, path: &[usize]) -> Option<NodeRef<'a>> {
    let mut cur = NodeRef::F(f);
    for &k in path {
        cur = child(cur, k)?;
    }
    Some(cur)
}

/// Polarity of the occurrence at `path`: 1 positive, -1 negative, 0 both.
pub fn polarity_at(f: &Formula, path: &[usize]) -> Option<i8> {
    let mut pol: i8 = 1;
    let mut cur = NodeRef::F(f);
    for &k in path {
        match cur {
            NodeRef::F(Formula::Not(_)) => pol = -pol,
            NodeRef::F(Formula::Implies(..)) if k == 1 => pol = -pol,
            NodeRef::F(Formula::Iff(..)) => pol = 0,
            NodeRef::F(Formula::Atom { .. } | Formula::Eq(..)) | NodeRef::T(_) => pol = 0,
            _ => {}
        }
        cur = child(cur, k)?;
    }
    Some(pol)
}

/// Replaces the node at `path`; the replacement must be of the same kind.
pub fn replace_at(f: &Formula, path: &[usize], with: &Node) -> Option<Formula> {
    match replace_in(NodeRef::F(f), path, with)? {
        Node::F(g) => Some(g),
        Node::T(_) => None,
    }
}

fn replace_in(n: NodeRef<'_>, path: &[usize], with: &Node) -> Option<Node> {
    let Some((&k, rest)) = path.split_first() else {
        return match (n, with) {
            (NodeRef::F(_), Node::F(_)) | (NodeRef::T(_), Node::T(_)) => Some(with.clone()),
            _ => None,
        };
    };
    let sub = replace_in(child(n, k)?, rest, with)?;
    let i = k - 1;
    Some(match n {
        NodeRef::F(f) => Node::F(match (f, sub) {
            (Formula::And(fs), Node::F(g)) => Formula::And(set_nth(fs, i, g)),
            (Formula::Or(fs), Node::F(g)) => Formula::Or(set_nth(fs, i, g)),
            (Formula::Not(_), Node::F(g)) => Formula::not(g),
            (Formula::Implies(a, b), Node::F(g)) => {
                if i == 0 {
                    Formula::implies(g, (**b).clone())
                } else {
                    Formula::implies((**a).clone(), g)
                }
            }
            (Formula::Iff(a, b), Node::F(g)) => {
                if i == 0 {
                    Formula::iff(g, (**b).clone())
                } else {
                    Formula::iff((**a).clone(), g)
                }
            }
            (Formula::Atom { pred, args }, Node::T(t)) => Formula::Atom {
                pred: pred.clone(),
                args: set_nth(args, i, t),
            },
            (Formula::Eq(a, b), Node::T(t)) => {
                if i == 0 {
                    Formula::Eq(t, b.clone())
                } else {
                    Formula::Eq(a.clone(), t)
                }
            }
            _ => return None,
        }),
        NodeRef::T(t) => Node::T(match (t, sub) {
            (LTerm::App { f, args, sort }, Node::T(u)) => LTerm::App {
                f: f.clone(),
                args: set_nth(args, i, u),
                sort: *sort,
            },
            (LTerm::Cond { then, els, .. }, Node::F(g)) => LTerm::cond(g, (**then).clone(), (**els).clone()),
            (LTerm::Cond { test, els, .. }, Node::T(u)) if i == 1 => LTerm::cond((**test).clone(), u, (**els).clone()),
            (LTerm::Cond { test, then, .. }, Node::T(u)) => LTerm::cond((**test).clone(), (**then).clone(), u),
            _ => return None,
        }),
    })
}

fn set_nth<T: Clone>(v: &[T], i: usize, x: T) -> Vec<T> {
    let mut out = v.to_vec();
    out[i] = x;
    out
}

/// Replaces every subformula occurrence equal to `target`, including those
/// inside conditional tests.
pub fn replace_formula_all(f: &Formula, target: &Formula, with: &Formula) -> Formula {
    if f == target {
        return with.clone();
    }
    let rf = |g: &Formula| replace_formula_all(g, target, with);
    let rt = |t: &LTerm| replace_formula_in_term(t, target, with);
    match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Atom { pred, args } => Formula::Atom {
            pred: pred.clone(),
            args: args.iter().map(rt).collect(),
        },
        Formula::Eq(a, b) => Formula::Eq(rt(a), rt(b)),
        Formula::Not(g) => Formula::not(rf(g)),
        Formula::And(fs) => Formula::And(fs.iter().map(rf).collect()),
        Formula::Or(fs) => Formula::Or(fs.iter().map(rf).collect()),
        Formula::Implies(a, b) => Formula::implies(rf(a), rf(b)),
        Formula::Iff(a, b) => Formula::iff(rf(a), rf(b)),
    }
}

fn replace_formula_in_term(t: &LTerm, target: &Formula, with: &Formula) -> LTerm {
    match t {
        LTerm::Meta { .. } | LTerm::Lit(_) => t.clone(),
        LTerm::App { f, args, sort } => LTerm::App {
            f: f.clone(),
            args: args.iter().map(|a| replace_formula_in_term(a, target, with)).collect(),
            sort: *sort,
        },
        LTerm::Cond { test, then, els } => LTerm::cond(
            replace_formula_all(test, target, with),
            replace_formula_in_term(then, target, with),
            replace_formula_in_term(els, target, with),
        ),
    }
}

// ---------------------------------------------------------------------------
// Ground evaluation

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound symbol {0}")]
    Unbound(String),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("ill-sorted operand for {0}")]
    Sort(String),
    #[error("unknown symbol {0}")]
    UnknownSymbol(String),
}

/// Ground evaluation context: values for constants and metavariables, the
/// relation registry used by `wf-ordered`, and nothing else. Calls to
/// program functions are delegated to the caller.
pub struct Evaluator<'a> {
    pub bindings: &'a BTreeMap<String, Value>,
    pub registry: &'a RelRegistry,
}

pub type CallFn<'c, E> = dyn FnMut(&str, Vec<Value>) -> Result<Value, E> + 'c;

impl Evaluator<'_> {
    pub fn formula<E: From<EvalError>>(&self, f: &Formula, calls: &mut CallFn<'_, E>) -> Result<bool, E> {
        Ok(match f {
            Formula::True => true,
            Formula::False => false,
            Formula::Not(g) => !self.formula(g, calls)?,
            Formula::And(fs) => {
                for g in fs {
                    if !self.formula(g, calls)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::Or(fs) => {
                for g in fs {
                    if self.formula(g, calls)? {
                        return Ok(true);
                    }
                }
                false
            }
            Formula::Implies(a, b) => !self.formula(a, calls)? || self.formula(b, calls)?,
            Formula::Iff(a, b) => self.formula(a, calls)? == self.formula(b, calls)?,
            Formula::Eq(a, b) => self.term(a, calls)? == self.term(b, calls)?,
            Formula::Atom { pred, args } => {
                if pred == WF_ORDERED {
                    let Some(LTerm::Lit(Value::Rel(name))) = args.first() else {
                        return Err(EvalError::Sort(pred.clone()).into());
                    };
                    let spec = self
                        .registry
                        .get(name)
                        .map_err(|_| EvalError::UnknownSymbol(name.clone()))?;
                    let a = self.term(&args[1], calls)?;
                    let b = self.term(&args[2], calls)?;
                    return rel_less(spec, &a, &b).map_err(|_| EvalError::Sort(pred.clone()).into());
                }
                let vals = args
                    .iter()
                    .map(|a| self.term(a, calls))
                    .collect::<Result<Vec<_>, E>>()?;
                eval_pred(pred, &vals)?
            }
        })
    }

    pub fn term<E: From<EvalError>>(&self, t: &LTerm, calls: &mut CallFn<'_, E>) -> Result<Value, E> {
        match t {
            LTerm::Meta { name, .. } => self
                .bindings
                .get(name)
                .cloned()
                .ok_or_else(|| EvalError::Unbound(name.clone()).into()),
            LTerm::Lit(v) => Ok(v.clone()),
            LTerm::Cond { test, then, els } => {
                if self.formula(test, calls)? {
                    self.term(then, calls)
                } else {
                    self.term(els, calls)
                }
            }
            LTerm::App { f, args, .. } => {
                if args.is_empty() {
                    if let Some(v) = self.bindings.get(f) {
                        return Ok(v.clone());
                    }
                }
                let vals = args
                    .iter()
                    .map(|a| self.term(a, calls))
                    .collect::<Result<Vec<_>, E>>()?;
                match eval_fn(f, &vals) {
                    Err(EvalError::UnknownSymbol(_)) => calls(f, vals),
                    other => Ok(other?),
                }
            }
        }
    }

    /// Evaluates a formula with no program calls.
    pub fn holds(&self, f: &Formula) -> Result<bool, EvalError> {
        self.formula(f, &mut |name: &str, _| Err(EvalError::UnknownSymbol(name.to_string())))
    }

    pub fn value(&self, t: &LTerm) -> Result<Value, EvalError> {
        self.term(t, &mut |name: &str, _| Err(EvalError::UnknownSymbol(name.to_string())))
    }
}

fn expr_arg<'v>(name: &str, v: &'v Value) -> Result<&'v Expr, EvalError> {
    v.as_expr().ok_or_else(|| EvalError::Sort(name.to_string()))
}

fn subst_arg<'v>(name: &str, v: &'v Value) -> Result<&'v Subst, EvalError> {
    v.as_subst().ok_or_else(|| EvalError::Sort(name.to_string()))
}

fn set_arg<'v>(name: &str, v: &'v Value) -> Result<&'v VarSet, EvalError> {
    v.as_set().ok_or_else(|| EvalError::Sort(name.to_string()))
}

fn need(name: &str, vals: &[Value], n: usize) -> Result<(), EvalError> {
    if vals.len() == n {
        Ok(())
    } else {
        Err(EvalError::Sort(name.to_string()))
    }
}

/// Evaluates a primitive function symbol on ground values.
pub fn eval_fn(f: &str, vals: &[Value]) -> Result<Value, EvalError> {
    let e = |i: usize| expr_arg(f, &vals[i]);
    let s = |i: usize| subst_arg(f, &vals[i]);
    Ok(match f {
        "empty" => Value::Subst(Subst::empty()),
        "bot" => Value::Subst(Subst::bot()),
        "cons" => {
            need(f, vals, 2)?;
            Value::Expr(Expr::cons(e(0)?.clone(), e(1)?.clone()))
        }
        "left" | "right" => {
            need(f, vals, 1)?;
            let x = e(0)?;
            let part = if f == "left" { x.left() } else { x.right() };
            Value::Expr(part.map_err(|err| EvalError::Undefined(err.to_string()))?.clone())
        }
        "apply" => {
            need(f, vals, 2)?;
            Value::Expr(s(1)?.apply(e(0)?))
        }
        "compose" => {
            need(f, vals, 2)?;
            Value::Subst(s(0)?.compose(s(1)?))
        }
        "replace" => {
            need(f, vals, 2)?;
            match e(0)? {
                Expr::Var(x) => Value::Subst(Subst::replacement(x, e(1)?)),
                other => return Err(EvalError::Undefined(format!("replacement of non-variable {other}"))),
            }
        }
        "vars" => {
            need(f, vals, 1)?;
            Value::Set(e(0)?.vars())
        }
        "dom" | "range" => {
            need(f, vals, 1)?;
            Value::Set(if f == "dom" { s(0)?.dom() } else { s(0)?.range() })
        }
        "size" => {
            need(f, vals, 1)?;
            Value::Nat(e(0)?.size())
        }
        "union" => {
            let mut out = VarSet::new();
            for v in vals {
                out.extend(set_arg(f, v)?.iter().cloned());
            }
            Value::Set(out)
        }
        "tuple" => {
            let items = vals
                .iter()
                .map(|v| expr_arg(f, v).cloned())
                .collect::<Result<Vec<_>, _>>()?;
            Value::Expr(encode_tuple(&items))
        }
        "triple" => {
            need(f, vals, 3)?;
            Value::Triple(Box::new(InputTriple::new(s(0)?.clone(), e(1)?.clone(), e(2)?.clone())))
        }
        _ => return Err(EvalError::UnknownSymbol(f.to_string())),
    })
}

/// Evaluates a predicate symbol on ground values.
pub fn eval_pred(p: &str, vals: &[Value]) -> Result<bool, EvalError> {
    let e = |i: usize| expr_arg(p, &vals[i]);
    let s = |i: usize| subst_arg(p, &vals[i]);
    let arity = |n| need(p, vals, n);
    let require_idem = |env: &Subst| {
        if env.is_idempotent() {
            Ok(())
        } else {
            Err(EvalError::Undefined(format!(
                "{p} with non-idempotent environment {env}"
            )))
        }
    };
    Ok(match p {
        "is-atom" => {
            arity(1)?;
            e(0)?.is_atom()
        }
        "is-const" => {
            arity(1)?;
            e(0)?.is_const()
        }
        "is-var" => {
            arity(1)?;
            e(0)?.is_var()
        }
        "is-proper" => {
            arity(1)?;
            s(0)?.is_proper()
        }
        "occurs-proper" | "occurs-refl" => {
            arity(2)?;
            let mode = if p == "occurs-proper" {
                Occurrence::Proper
            } else {
                Occurrence::Reflexive
            };
            occurs_in(e(0)?, e(1)?, mode)
        }
        "misses" => {
            arity(2)?;
            s(0)?.misses(e(1)?)
        }
        "idem" => {
            arity(1)?;
            s(0)?.is_idempotent()
        }
        "more-genid" => {
            arity(2)?;
            s(0)?.more_general(s(1)?)
        }
        "mgi" => {
            arity(4)?;
            require_idem(s(0)?)?;
            mgi_decide(s(0)?, e(1)?, e(2)?, s(3)?)
        }
        "mgiu" => {
            arity(4)?;
            require_idem(s(0)?)?;
            mgiu_check(s(0)?, e(1)?, e(2)?, s(3)?).verdict()
        }
        "reduce" => {
            arity(3)?;
            reduce_holds(s(0)?, set_arg(p, &vals[1])?, s(2)?)
        }
        "subset" | "proper-subset" => {
            arity(2)?;
            let a = set_arg(p, &vals[0])?;
            let b = set_arg(p, &vals[1])?;
            a.is_subset(b) && (p == "subset" || a.len() < b.len())
        }
        "size-lt" => {
            arity(2)?;
            match (&vals[0], &vals[1]) {
                (Value::Nat(a), Value::Nat(b)) => a < b,
                _ => return Err(EvalError::Sort(p.to_string())),
            }
        }
        _ => return Err(EvalError::UnknownSymbol(p.to_string())),
    })
}
