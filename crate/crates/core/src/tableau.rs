//! Deductive tableaux: assertion and goal rows with optional output entries,
//! the deduction rules, induction-hypothesis insertion and program
//! extraction. Every derived row records enough of its derivation (parents,
//! paths, renaming, unifier) to be re-derived independently by
//! [`Tableau::verify_row`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::logic::{
    formula_unify, meta_sorts, node_at, path_to_string, polarity_at, renaming_for, replace_at, replace_formula_all,
    simplify, simplify_term, term_meta_sorts, term_unify, Formula, LTerm, MSubst, Node, NodeRef, Path,
};
use crate::program::ProgramDef;
use crate::subst::FreshSupply;
use crate::value::{Sort, Value};
use crate::wf::RelRegistry;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableauError {
    #[error("no row #{0}")]
    UnknownRow(usize),
    #[error("path {path} does not address {want} in row #{row}")]
    BadPath {
        row: usize,
        path: String,
        want: &'static str,
    },
    #[error("selected subformulas are not unifiable: {0} and {1}")]
    NotUnifiable(String, String),
    #[error("row #{0} cannot be split")]
    NotSplittable(usize),
    #[error("row #{0} has no orphaned output entry")]
    NotOrphan(usize),
    #[error("unknown lemma {0}")]
    UnknownLemma(String),
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("induction applies only to the initial tableau")]
    NotInitial,
    #[error("ill-formed specification: {0}")]
    IllFormedSpec(String),
    #[error("no goal row matches the assumption {0}")]
    NoMatchingGoal(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("row #{row} failed verification: {msg}")]
    VerifyFailed { row: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Assertion,
    Goal,
}

impl Polarity {
    pub fn flip(self) -> Polarity {
        match self {
            Polarity::Assertion => Polarity::Goal,
            Polarity::Goal => Polarity::Assertion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Ltr,
    Rtl,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Ltr => "ltr",
            Direction::Rtl => "rtl",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    Spec,
    Lemma(String),
    Split(usize),
    Dualize,
    Orphan,
    Resolve,
    EqRepl(Direction),
    IffRepl(Direction),
    Induct(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Justification {
    pub rule: Rule,
    pub parents: Vec<usize>,
    pub paths: Vec<Path>,
    /// Renaming applied to the second parent before unification.
    pub renaming: MSubst,
    pub unifier: MSubst,
}

impl Justification {
    fn simple(rule: Rule, parents: Vec<usize>) -> Self {
        Justification {
            rule,
            parents,
            paths: Vec::new(),
            renaming: MSubst::new(),
            unifier: MSubst::new(),
        }
    }
}

impl fmt::Display for Justification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match &self.rule {
            Rule::Spec => "spec".to_string(),
            Rule::Lemma(n) => format!("lemma {n}"),
            Rule::Split(i) => format!("split/{i}"),
            Rule::Dualize => "dualize".into(),
            Rule::Orphan => "orphan".into(),
            Rule::Resolve => "resolve".into(),
            Rule::EqRepl(d) => format!("eqrepl {d}"),
            Rule::IffRepl(d) => format!("iffrepl {d}"),
            Rule::Induct(r) => format!("induct {r}"),
        };
        f.write_str(&name)?;
        for (i, p) in self.parents.iter().enumerate() {
            match self.paths.get(i) {
                Some(path) => write!(f, " #{p}@{}", path_to_string(path))?,
                None => write!(f, " #{p}")?,
            }
        }
        if !self.unifier.is_empty() {
            write!(f, " {}", self.unifier)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub id: usize,
    pub polarity: Polarity,
    pub formula: Formula,
    pub output: Option<LTerm>,
    pub justification: Justification,
}

impl Row {
    pub fn is_final(&self) -> bool {
        self.output.as_ref().is_some_and(|o| o.metas().is_empty())
            && match self.polarity {
                Polarity::Goal => self.formula == Formula::True,
                Polarity::Assertion => self.formula == Formula::False,
            }
    }

    pub fn metas(&self) -> BTreeSet<String> {
        let mut out = self.formula.metas();
        if let Some(t) = &self.output {
            t.collect_metas(&mut out);
        }
        out
    }

    pub fn meta_sorts(&self) -> BTreeMap<String, Sort> {
        let mut out = BTreeMap::new();
        meta_sorts(&self.formula, &mut out);
        if let Some(t) = &self.output {
            term_meta_sorts(t, &mut out);
        }
        out
    }

    /// Applies a meta-substitution to formula and output.
    pub fn instantiate(&self, s: &MSubst) -> Row {
        Row {
            id: self.id,
            polarity: self.polarity,
            formula: s.formula(&self.formula),
            output: self.output.as_ref().map(|t| s.term(t)),
            justification: self.justification.clone(),
        }
    }
}

impl fmt::Display for Row {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.polarity {
            Polarity::Assertion => "A",
            Polarity::Goal => "G",
        };
        write!(f, "#{} [{tag}] {} | ", self.id, self.formula)?;
        match &self.output {
            Some(t) => write!(f, "{t}")?,
            None => f.write_str("-")?,
        }
        write!(f, " | {}", self.justification)
    }
}

/// A synthesis problem: find `output` such that `condition` holds for the
/// parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecDef {
    pub name: String,
    pub params: Vec<(String, Sort)>,
    pub output: Option<(String, Sort)>,
    pub condition: Formula,
}

#[derive(Debug, Clone)]
pub struct Tableau {
    pub spec: SpecDef,
    pub rows: Vec<Row>,
    pub lemmas: BTreeMap<String, Formula>,
    pub registry: RelRegistry,
    /// When set, assertions must be registered lemmas.
    pub strict: bool,
    supply: FreshSupply,
}

/// Shape of a derived row before it is numbered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derived {
    pub polarity: Polarity,
    pub formula: Formula,
    pub output: Option<LTerm>,
}

/// Truth value a row must have for its output to be allowed: goals fire
/// when true, assertions when false. Expressed as a goal formula.
fn fire(p: Polarity, f: Formula) -> Formula {
    match p {
        Polarity::Goal => f,
        Polarity::Assertion => Formula::not(f),
    }
}

/// Combines two residues: a goal of both fired forms, or a disjunctive
/// assertion when both parents are assertions.
fn combine(p1: Polarity, f1: Formula, p2: Polarity, f2: Formula) -> (Polarity, Formula) {
    if p1 == Polarity::Assertion && p2 == Polarity::Assertion {
        (Polarity::Assertion, simplify(&Formula::Or(vec![f1, f2])))
    } else {
        (
            Polarity::Goal,
            simplify(&Formula::And(vec![fire(p1, f1), fire(p2, f2)])),
        )
    }
}

/// `if(test, a, b)` with the missing-output and same-branch conventions.
fn conditional_output(test: &Formula, a: Option<LTerm>, b: Option<LTerm>) -> Option<LTerm> {
    match (a, b) {
        (Some(a), Some(b)) => Some(simplify_term(&LTerm::cond(test.clone(), a, b))),
        (Some(t), None) | (None, Some(t)) => Some(simplify_term(&t)),
        (None, None) => None,
    }
}

fn bad_path(row: usize, path: &[usize], want: &'static str) -> TableauError {
    TableauError::BadPath {
        row,
        path: path_to_string(path),
        want,
    }
}

fn selected_formula<'a>(row: &'a Row, path: &[usize]) -> Result<&'a Formula, TableauError> {
    match node_at(&row.formula, path) {
        Some(NodeRef::F(f)) => Ok(f),
        _ => Err(bad_path(row.id, path, "a subformula")),
    }
}

fn selected_term<'a>(row: &'a Row, path: &[usize]) -> Result<&'a LTerm, TableauError> {
    match node_at(&row.formula, path) {
        Some(NodeRef::T(t)) => Ok(t),
        _ => Err(bad_path(row.id, path, "a term")),
    }
}

/// Resolution of `x` at `p1` with the already renamed `y` at `p2` under `u`.
pub fn derive_resolve(x: &Row, p1: &[usize], y: &Row, p2: &[usize], u: &MSubst) -> Result<Derived, TableauError> {
    let a = selected_formula(x, p1)?;
    let b = selected_formula(y, p2)?;
    if !a.is_atomic() {
        return Err(bad_path(x.id, p1, "an atom or equation"));
    }
    if !b.is_atomic() {
        return Err(bad_path(y.id, p2, "an atom or equation"));
    }
    let pa = u.formula(a);
    if pa != u.formula(b) {
        return Err(TableauError::NotUnifiable(a.to_string(), b.to_string()));
    }
    let sign = |row: &Row, path: &[usize]| {
        let pol = polarity_at(&row.formula, path).unwrap_or(0);
        if row.polarity == Polarity::Assertion {
            -pol
        } else {
            pol
        }
    };
    let (s1, s2) = (sign(x, p1), sign(y, p2));
    let second_true = s1 != 1 && (s2 == 1 || s1 == -1);
    let (v1, v2) = if second_true {
        (Formula::False, Formula::True)
    } else {
        (Formula::True, Formula::False)
    };
    let f1 = replace_formula_all(&u.formula(&x.formula), &pa, &v1);
    let f2 = replace_formula_all(&u.formula(&y.formula), &pa, &v2);
    let (polarity, formula) = combine(x.polarity, f1, y.polarity, f2);
    let o1 = x.output.as_ref().map(|t| u.term(t));
    let o2 = y.output.as_ref().map(|t| u.term(t));
    let output = if second_true {
        conditional_output(&pa, o2, o1)
    } else {
        conditional_output(&pa, o1, o2)
    };
    Ok(Derived {
        polarity,
        formula,
        output,
    })
}

/// Equality replacement: the equation in `e` at `ep` rewrites the term in
/// the renamed target `t` at `tp`.
pub fn derive_eqrepl(
    e: &Row,
    ep: &[usize],
    t: &Row,
    tp: &[usize],
    dir: Direction,
    u: &MSubst,
) -> Result<Derived, TableauError> {
    let Formula::Eq(l, r) = selected_formula(e, ep)? else {
        return Err(bad_path(e.id, ep, "an equation"));
    };
    let (from, to) = match dir {
        Direction::Ltr => (l, r),
        Direction::Rtl => (r, l),
    };
    let target = selected_term(t, tp)?;
    if u.term(from) != u.term(target) {
        return Err(TableauError::NotUnifiable(from.to_string(), target.to_string()));
    }
    let eq = u.formula(&Formula::Eq(l.clone(), r.clone()));
    let fe = replace_formula_all(&u.formula(&e.formula), &eq, &Formula::False);
    let ft = u.formula(&replace_at(&t.formula, tp, &Node::T(to.clone())).expect("path checked"));
    let (polarity, formula) = combine(e.polarity, fe, t.polarity, ft);
    let output = conditional_output(
        &eq,
        t.output.as_ref().map(|x| u.term(x)),
        e.output.as_ref().map(|x| u.term(x)),
    );
    Ok(Derived {
        polarity,
        formula,
        output,
    })
}

/// Equivalence replacement, analogous to [`derive_eqrepl`] on subformulas.
pub fn derive_iffrepl(
    e: &Row,
    ep: &[usize],
    t: &Row,
    tp: &[usize],
    dir: Direction,
    u: &MSubst,
) -> Result<Derived, TableauError> {
    let Formula::Iff(l, r) = selected_formula(e, ep)? else {
        return Err(bad_path(e.id, ep, "an equivalence"));
    };
    let (from, to) = match dir {
        Direction::Ltr => (l, r),
        Direction::Rtl => (r, l),
    };
    let target = selected_formula(t, tp)?;
    if u.formula(from) != u.formula(target) {
        return Err(TableauError::NotUnifiable(from.to_string(), target.to_string()));
    }
    let iff = u.formula(&Formula::Iff(l.clone(), r.clone()));
    let fe = replace_formula_all(&u.formula(&e.formula), &iff, &Formula::False);
    let ft = u.formula(&replace_at(&t.formula, tp, &Node::F((**to).clone())).expect("path checked"));
    let (polarity, formula) = combine(e.polarity, fe, t.polarity, ft);
    let output = conditional_output(
        &iff,
        t.output.as_ref().map(|x| u.term(x)),
        e.output.as_ref().map(|x| u.term(x)),
    );
    Ok(Derived {
        polarity,
        formula,
        output,
    })
}

/// Pieces of a splittable row.
pub fn derive_split(row: &Row) -> Option<Vec<Derived>> {
    let piece = |polarity, formula: &Formula| Derived {
        polarity,
        formula: simplify(formula),
        output: row.output.clone(),
    };
    match (row.polarity, &row.formula) {
        (Polarity::Goal, Formula::Implies(a, g)) => Some(vec![piece(Polarity::Assertion, a), piece(Polarity::Goal, g)]),
        (Polarity::Goal, Formula::Or(gs)) => Some(gs.iter().map(|g| piece(Polarity::Goal, g)).collect()),
        (Polarity::Assertion, Formula::And(fs)) => Some(fs.iter().map(|f| piece(Polarity::Assertion, f)).collect()),
        _ => None,
    }
}

pub fn derive_dualize(row: &Row) -> Derived {
    Derived {
        polarity: row.polarity.flip(),
        formula: simplify(&Formula::not(row.formula.clone())),
        output: row.output.clone(),
    }
}

pub fn derive_orphan(row: &Row) -> Option<Derived> {
    match &row.output {
        Some(LTerm::Meta { name, .. }) if !row.formula.metas().contains(name) => Some(Derived {
            polarity: row.polarity,
            formula: row.formula.clone(),
            output: None,
        }),
        _ => None,
    }
}

/// Replaces nullary applications named in `map` by the mapped terms.
pub fn replace_consts_formula(f: &Formula, map: &BTreeMap<String, LTerm>) -> Formula {
    let rt = |t: &LTerm| replace_consts_term(t, map);
    let rf = |g: &Formula| replace_consts_formula(g, map);
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

pub fn replace_consts_term(t: &LTerm, map: &BTreeMap<String, LTerm>) -> LTerm {
    match t {
        LTerm::App { f, args, .. } if args.is_empty() && map.contains_key(f) => map[f].clone(),
        LTerm::App { f, args, sort } => LTerm::App {
            f: f.clone(),
            args: args.iter().map(|a| replace_consts_term(a, map)).collect(),
            sort: *sort,
        },
        LTerm::Cond { test, then, els } => LTerm::cond(
            replace_consts_formula(test, map),
            replace_consts_term(then, map),
            replace_consts_term(els, map),
        ),
        LTerm::Meta { .. } | LTerm::Lit(_) => t.clone(),
    }
}

/// Metavariable standing for a primed parameter, e.g. `th0` becomes `TH0'`.
pub fn primed_name(param: &str) -> String {
    format!("{}'", param.to_uppercase())
}

/// The induction hypothesis for `spec` under the relation `rel`.
pub fn induction_hypothesis(spec: &SpecDef, rel: &str) -> Result<Formula, TableauError> {
    let consts: Vec<LTerm> = spec.params.iter().map(|(n, s)| LTerm::constant(n, *s)).collect();
    let primed: Vec<LTerm> = spec
        .params
        .iter()
        .map(|(n, s)| LTerm::meta(&primed_name(n), *s))
        .collect();
    let pack = |xs: Vec<LTerm>| -> Result<LTerm, TableauError> {
        match xs.len() {
            1 => Ok(xs.into_iter().next().unwrap()),
            3 if xs.iter().map(LTerm::sort).eq([Sort::Subst, Sort::Expr, Sort::Expr]) => {
                Ok(LTerm::app("triple", xs, Sort::Triple))
            }
            _ => Err(TableauError::Unsupported(
                "induction needs one input or a (subst, expr, expr) triple".into(),
            )),
        }
    };
    let order = Formula::atom(
        "wf-ordered",
        vec![
            LTerm::Lit(Value::Rel(rel.to_string())),
            pack(primed.clone())?,
            pack(consts)?,
        ],
    );
    let map: BTreeMap<String, LTerm> = spec
        .params
        .iter()
        .map(|(n, _)| n.clone())
        .zip(primed.iter().cloned())
        .collect();
    let mut body = replace_consts_formula(&spec.condition, &map);
    if let Some((out, sort)) = &spec.output {
        let mut s = MSubst::new();
        s.insert(out, LTerm::app(&spec.name, primed, *sort));
        body = s.formula(&body);
    }
    Ok(Formula::implies(order, body))
}

impl Tableau {
    /// Creates the initial tableau: a single goal row carrying the output.
    pub fn new(spec: SpecDef) -> Result<Tableau, TableauError> {
        let metas = spec.condition.metas();
        let allowed: BTreeSet<String> = spec.output.iter().map(|(n, _)| n.clone()).collect();
        if let Some(extra) = metas.difference(&allowed).next() {
            return Err(TableauError::IllFormedSpec(format!(
                "free metavariable {extra} besides the output"
            )));
        }
        let output = spec.output.as_ref().map(|(n, s)| LTerm::meta(n, *s));
        let row = Row {
            id: 1,
            polarity: Polarity::Goal,
            formula: spec.condition.clone(),
            output,
            justification: Justification::simple(Rule::Spec, vec![]),
        };
        Ok(Tableau {
            spec,
            rows: vec![row],
            lemmas: BTreeMap::new(),
            registry: RelRegistry::default(),
            strict: true,
            supply: FreshSupply::new(),
        })
    }

    pub fn with_lemmas(mut self, lemmas: BTreeMap<String, Formula>) -> Self {
        self.lemmas = lemmas;
        self
    }

    pub fn with_registry(mut self, registry: RelRegistry) -> Self {
        self.registry = registry;
        self
    }

    pub fn row(&self, id: usize) -> Result<&Row, TableauError> {
        id.checked_sub(1)
            .and_then(|i| self.rows.get(i))
            .ok_or(TableauError::UnknownRow(id))
    }

    pub fn last_id(&self) -> usize {
        self.rows.len()
    }

    fn push(&mut self, d: Derived, justification: Justification) -> usize {
        let id = self.rows.len() + 1;
        self.rows.push(Row {
            id,
            polarity: d.polarity,
            formula: d.formula,
            output: d.output,
            justification,
        });
        id
    }

    /// Adds a registered lemma as an assertion without output.
    pub fn add_lemma(&mut self, name: &str) -> Result<usize, TableauError> {
        let f = self
            .lemmas
            .get(name)
            .cloned()
            .ok_or_else(|| TableauError::UnknownLemma(name.to_string()))?;
        let d = Derived {
            polarity: Polarity::Assertion,
            formula: f,
            output: None,
        };
        Ok(self.push(d, Justification::simple(Rule::Lemma(name.to_string()), vec![])))
    }

    /// Adds an assertion; in strict mode it must be a registered lemma.
    pub fn add_assertion(&mut self, f: Formula, output: Option<LTerm>) -> Result<usize, TableauError> {
        let name = self.lemmas.iter().find(|(_, g)| **g == f).map(|(n, _)| n.clone());
        let name = match name {
            Some(n) => n,
            None if self.strict => return Err(TableauError::UnknownLemma(f.to_string())),
            None => "unchecked".to_string(),
        };
        let d = Derived {
            polarity: Polarity::Assertion,
            formula: f,
            output,
        };
        Ok(self.push(d, Justification::simple(Rule::Lemma(name), vec![])))
    }

    /// Renaming of `y`'s metavariables that clash with `x`'s.
    fn apart(&mut self, x: &Row, y: &Row) -> MSubst {
        let xs = x.metas();
        let clash: BTreeSet<String> = y.metas().intersection(&xs).cloned().collect();
        let mut avoid = xs;
        avoid.extend(y.metas());
        renaming_for(&clash, &y.meta_sorts(), &avoid, &mut self.supply)
    }

    pub fn resolve(&mut self, r1: usize, p1: &[usize], r2: usize, p2: &[usize]) -> Result<usize, TableauError> {
        let x = self.row(r1)?.clone();
        let y0 = self.row(r2)?.clone();
        let pi = self.apart(&x, &y0);
        let y = y0.instantiate(&pi);
        let a = selected_formula(&x, p1)?;
        let b = selected_formula(&y, p2)?;
        let u = formula_unify(a, b).ok_or_else(|| TableauError::NotUnifiable(a.to_string(), b.to_string()))?;
        let d = derive_resolve(&x, p1, &y, p2, &u)?;
        let j = Justification {
            rule: Rule::Resolve,
            parents: vec![r1, r2],
            paths: vec![p1.to_vec(), p2.to_vec()],
            renaming: pi,
            unifier: u,
        };
        Ok(self.push(d, j))
    }

    pub fn eqrepl(
        &mut self,
        r1: usize,
        p1: &[usize],
        r2: usize,
        p2: &[usize],
        dir: Direction,
    ) -> Result<usize, TableauError> {
        let e = self.row(r1)?.clone();
        let t0 = self.row(r2)?.clone();
        let pi = self.apart(&e, &t0);
        let t = t0.instantiate(&pi);
        let Formula::Eq(l, r) = selected_formula(&e, p1)? else {
            return Err(bad_path(r1, p1, "an equation"));
        };
        let from = if dir == Direction::Ltr { l } else { r };
        let target = selected_term(&t, p2)?;
        let u =
            term_unify(from, target).ok_or_else(|| TableauError::NotUnifiable(from.to_string(), target.to_string()))?;
        let d = derive_eqrepl(&e, p1, &t, p2, dir, &u)?;
        let j = Justification {
            rule: Rule::EqRepl(dir),
            parents: vec![r1, r2],
            paths: vec![p1.to_vec(), p2.to_vec()],
            renaming: pi,
            unifier: u,
        };
        Ok(self.push(d, j))
    }

    pub fn iffrepl(
        &mut self,
        r1: usize,
        p1: &[usize],
        r2: usize,
        p2: &[usize],
        dir: Direction,
    ) -> Result<usize, TableauError> {
        let e = self.row(r1)?.clone();
        let t0 = self.row(r2)?.clone();
        let pi = self.apart(&e, &t0);
        let t = t0.instantiate(&pi);
        let Formula::Iff(l, r) = selected_formula(&e, p1)? else {
            return Err(bad_path(r1, p1, "an equivalence"));
        };
        let from = if dir == Direction::Ltr { l } else { r };
        let target = selected_formula(&t, p2)?;
        let u = formula_unify(from, target)
            .ok_or_else(|| TableauError::NotUnifiable(from.to_string(), target.to_string()))?;
        let d = derive_iffrepl(&e, p1, &t, p2, dir, &u)?;
        let j = Justification {
            rule: Rule::IffRepl(dir),
            parents: vec![r1, r2],
            paths: vec![p1.to_vec(), p2.to_vec()],
            renaming: pi,
            unifier: u,
        };
        Ok(self.push(d, j))
    }

    pub fn split(&mut self, r: usize) -> Result<Vec<usize>, TableauError> {
        let row = self.row(r)?.clone();
        let parts = derive_split(&row).ok_or(TableauError::NotSplittable(r))?;
        Ok(parts
            .into_iter()
            .enumerate()
            .map(|(i, d)| self.push(d, Justification::simple(Rule::Split(i + 1), vec![r])))
            .collect())
    }

    pub fn dualize(&mut self, r: usize) -> Result<usize, TableauError> {
        let d = derive_dualize(self.row(r)?);
        Ok(self.push(d, Justification::simple(Rule::Dualize, vec![r])))
    }

    /// Adds the case assumption `f` with output `output`: allowed exactly
    /// when some goal row is the negation of `f` with the same output, so
    /// the new assertion is that goal's dual.
    pub fn assume(&mut self, f: &Formula, output: Option<&LTerm>) -> Result<usize, TableauError> {
        let want = simplify(f);
        let found = self.rows.iter().rev().find(|row| {
            row.polarity == Polarity::Goal && row.output.as_ref() == output && derive_dualize(row).formula == want
        });
        match found {
            Some(row) => {
                let id = row.id;
                self.dualize(id)
            }
            None => Err(TableauError::NoMatchingGoal(f.to_string())),
        }
    }

    pub fn orphan(&mut self, r: usize) -> Result<usize, TableauError> {
        let d = derive_orphan(self.row(r)?).ok_or(TableauError::NotOrphan(r))?;
        Ok(self.push(d, Justification::simple(Rule::Orphan, vec![r])))
    }

    /// Adds the induction hypothesis over `rel`. Only lemma assertions may
    /// have been added since the initial row.
    pub fn induct(&mut self, rel: &str) -> Result<usize, TableauError> {
        if !self.rows[1..]
            .iter()
            .all(|r| matches!(r.justification.rule, Rule::Lemma(_)))
        {
            return Err(TableauError::NotInitial);
        }
        if !self.registry.contains(rel) {
            return Err(TableauError::UnknownRelation(rel.to_string()));
        }
        let f = induction_hypothesis(&self.spec, rel)?;
        let d = Derived {
            polarity: Polarity::Assertion,
            formula: f,
            output: None,
        };
        Ok(self.push(d, Justification::simple(Rule::Induct(rel.to_string()), vec![1])))
    }

    /// The program read off the first final row, if any.
    pub fn extract_program(&self) -> Option<ProgramDef> {
        let row = self.rows.iter().find(|r| r.is_final())?;
        Some(ProgramDef {
            name: self.spec.name.clone(),
            params: self.spec.params.clone(),
            body: row.output.clone()?,
            decrease: None,
        })
    }

    /// Re-derives row `id` from its recorded justification.
    pub fn verify_row(&self, id: usize) -> Result<(), TableauError> {
        let row = self.row(id)?;
        let fail = |msg: String| TableauError::VerifyFailed { row: id, msg };
        let j = &row.justification;
        for &p in &j.parents {
            if p >= id {
                return Err(fail(format!("parent #{p} does not precede the row")));
            }
        }
        let parent = |k: usize| self.row(j.parents[k]);
        let derived = match &j.rule {
            Rule::Spec => {
                return if id == 1 {
                    Ok(())
                } else {
                    Err(fail("specification row must come first".into()))
                };
            }
            Rule::Lemma(name) => {
                let ok = match self.lemmas.get(name) {
                    Some(f) => row.polarity == Polarity::Assertion && *f == row.formula,
                    None => !self.strict,
                };
                return if ok {
                    Ok(())
                } else {
                    Err(fail(format!("not the lemma {name}")))
                };
            }
            Rule::Induct(rel) => Derived {
                polarity: Polarity::Assertion,
                formula: induction_hypothesis(&self.spec, rel)?,
                output: None,
            },
            Rule::Split(i) => derive_split(parent(0)?)
                .and_then(|ps| ps.into_iter().nth(i - 1))
                .ok_or_else(|| fail("parent does not split that way".into()))?,
            Rule::Dualize => derive_dualize(parent(0)?),
            Rule::Orphan => derive_orphan(parent(0)?).ok_or_else(|| fail("output is not orphaned".into()))?,
            Rule::Resolve | Rule::EqRepl(_) | Rule::IffRepl(_) => {
                let x = parent(0)?;
                let y = parent(1)?.instantiate(&j.renaming);
                if !j.renaming.0.values().all(LTerm::is_meta) {
                    return Err(fail("renaming is not a variable renaming".into()));
                }
                if !x.metas().is_disjoint(&y.metas()) {
                    return Err(fail("parents not standardized apart".into()));
                }
                if !j.unifier.is_idempotent() {
                    return Err(fail("unifier is not idempotent".into()));
                }
                let (p1, p2) = (&j.paths[0], &j.paths[1]);
                match &j.rule {
                    Rule::Resolve => derive_resolve(x, p1, &y, p2, &j.unifier),
                    Rule::EqRepl(d) => derive_eqrepl(x, p1, &y, p2, *d, &j.unifier),
                    Rule::IffRepl(d) => derive_iffrepl(x, p1, &y, p2, *d, &j.unifier),
                    _ => unreachable!(),
                }
                .map_err(|e| fail(e.to_string()))?
            }
        };
        if derived.polarity != row.polarity || derived.formula != row.formula || derived.output != row.output {
            return Err(fail("re-derivation does not reproduce the row".into()));
        }
        Ok(())
    }

    pub fn verify_all(&self) -> Result<(), TableauError> {
        (1..=self.rows.len()).try_for_each(|id| self.verify_row(id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_formula, parse_term, Signature};

    fn f(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    fn unify_spec() -> SpecDef {
        SpecDef {
            name: "unify".into(),
            params: vec![
                ("th0".into(), Sort::Subst),
                ("e1".into(), Sort::Expr),
                ("e2".into(), Sort::Expr),
            ],
            output: Some(("TH".into(), Sort::Subst)),
            condition: f("(implies (idem th0) (mgiu th0 e1 e2 TH))"),
        }
    }

    fn prop_spec() -> SpecDef {
        SpecDef {
            name: "p".into(),
            params: vec![],
            output: None,
            condition: Formula::True,
        }
    }

    fn bare(rows: Vec<(Polarity, &str, Option<&str>)>) -> Tableau {
        let mut t = Tableau::new(prop_spec()).unwrap();
        t.strict = false;
        for (p, fo, out) in rows {
            let d = Derived {
                polarity: p,
                formula: f(fo),
                output: out.map(|o| parse_term(o).unwrap()),
            };
            t.push(d, Justification::simple(Rule::Lemma("case".into()), vec![]));
        }
        t
    }

    #[test]
    fn initial_tableau_has_one_goal() {
        let t = Tableau::new(unify_spec()).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(
            t.rows[0].to_string(),
            "#1 [G] (implies (idem th0) (mgiu th0 e1 e2 TH)) | TH | spec"
        );
        let mut bad = unify_spec();
        bad.condition = f("(mgiu th0 e1 E TH)");
        assert!(matches!(Tableau::new(bad), Err(TableauError::IllFormedSpec(_))));
    }

    #[test]
    fn goal_goal_resolution_builds_conditional() {
        let mut t = bare(vec![
            (
                Polarity::Goal,
                "(and (is-var (quote X)) (idem empty))",
                Some("(quote a)"),
            ),
            (
                Polarity::Goal,
                "(and (not (is-var (quote X))) (is-proper empty))",
                Some("(quote b)"),
            ),
        ]);
        let id = t.resolve(2, &[1], 3, &[1, 1]).unwrap();
        let row = t.row(id).unwrap();
        assert_eq!(row.formula, f("(and (idem empty) (is-proper empty))"));
        assert_eq!(
            row.output.as_ref().unwrap().to_string(),
            "(if (is-var (quote X)) (quote a) (quote b))"
        );
        t.verify_all().unwrap();
    }

    #[test]
    fn missing_output_suppresses_conditional() {
        let mut t = bare(vec![
            (
                Polarity::Goal,
                "(and (is-var (quote X)) (idem empty))",
                Some("(quote a)"),
            ),
            (Polarity::Assertion, "(is-var (quote X))", None),
        ]);
        let id = t.resolve(2, &[1], 3, &[]).unwrap();
        let row = t.row(id).unwrap();
        assert_eq!(row.formula, f("(idem empty)"));
        assert_eq!(row.output.as_ref().unwrap().to_string(), "(quote a)");
    }

    #[test]
    fn split_dualize_orphan() {
        let mut t = Tableau::new(unify_spec()).unwrap();
        let ids = t.split(1).unwrap();
        assert_eq!(t.row(ids[0]).unwrap().polarity, Polarity::Assertion);
        assert_eq!(t.row(ids[1]).unwrap().formula, f("(mgiu th0 e1 e2 TH)"));
        let o = t.orphan(ids[0]).unwrap();
        assert_eq!(t.row(o).unwrap().output, None);
        assert!(matches!(t.orphan(ids[1]), Err(TableauError::NotOrphan(_))));
        assert!(matches!(t.orphan(o), Err(TableauError::NotOrphan(_))));
        let d = t.dualize(ids[1]).unwrap();
        assert_eq!(t.row(d).unwrap().formula, f("(not (mgiu th0 e1 e2 TH))"));
        let dd = t.dualize(d).unwrap();
        assert_eq!(t.row(dd).unwrap().formula, t.row(ids[1]).unwrap().formula);
        t.verify_all().unwrap();
    }

    #[test]
    fn induction_only_on_initial_tableau() {
        let mut t = Tableau::new(unify_spec()).unwrap();
        assert!(matches!(t.induct("nope"), Err(TableauError::UnknownRelation(_))));
        let ih = t.induct("u-rel").unwrap();
        assert_eq!(
            t.row(ih).unwrap().formula.to_string(),
            "(implies (wf-ordered u-rel (triple TH0' E1' E2') (triple th0 e1 e2)) \
             (implies (idem TH0') (mgiu TH0' E1' E2' (unify TH0' E1' E2'))))"
        );
        t.split(1).unwrap();
        assert_eq!(t.induct("u-rel"), Err(TableauError::NotInitial));
    }

    #[test]
    fn strict_mode_rejects_unregistered_assertions() {
        let mut lemmas = BTreeMap::new();
        lemmas.insert("idem-genid".to_string(), f("(iff (idem TH) (more-genid TH TH))"));
        let mut t = Tableau::new(unify_spec()).unwrap().with_lemmas(lemmas);
        assert!(t.add_assertion(f("(iff (idem TH) (more-genid TH TH))"), None).is_ok());
        assert!(matches!(
            t.add_assertion(f("(idem empty)"), None),
            Err(TableauError::UnknownLemma(_))
        ));
        assert!(t.add_lemma("idem-genid").is_ok());
    }

    #[test]
    fn equivalence_replacement_expands_definition() {
        let mut lemmas = BTreeMap::new();
        lemmas.insert("misses-def".to_string(), f("(iff (misses TH E) (= (apply E TH) E))"));
        let mut t = Tableau::new(unify_spec()).unwrap().with_lemmas(lemmas);
        let l = t.add_lemma("misses-def").unwrap();
        let mut sig = Signature::standard();
        sig.add_const("th0", Sort::Subst);
        sig.add_const("e1", Sort::Expr);
        let (g, _) = sig.parse_formula("(and (misses th0 e1) (idem th0))", false).unwrap();
        let d = Derived {
            polarity: Polarity::Goal,
            formula: g,
            output: None,
        };
        let gid = t.push(d, Justification::simple(Rule::Lemma("case".into()), vec![]));
        t.strict = false;
        let id = t.iffrepl(l, &[], gid, &[1], Direction::Ltr).unwrap();
        assert_eq!(
            t.row(id).unwrap().formula.to_string(),
            "(and (= (apply e1 th0) e1) (idem th0))"
        );
        let back = t.iffrepl(l, &[], id, &[1], Direction::Rtl).unwrap();
        assert_eq!(
            t.row(back).unwrap().formula.to_string(),
            "(and (misses th0 e1) (idem th0))"
        );
        t.verify_all().unwrap();
    }

    #[test]
    fn equality_replacement_rewrites_term() {
        let mut t = bare(vec![
            (Polarity::Assertion, "(= (apply E empty) E)", None),
            (Polarity::Goal, "(is-var (apply (quote X) empty))", Some("(quote a)")),
        ]);
        let id = t.eqrepl(2, &[], 3, &[1], Direction::Ltr).unwrap();
        assert_eq!(t.row(id).unwrap().formula, f("(is-var (quote X))"));
        assert!(t.eqrepl(2, &[], 3, &[1, 2], Direction::Ltr).is_err());
        t.verify_all().unwrap();
    }

    #[test]
    fn tampered_rows_fail_verification() {
        let mut t = bare(vec![
            (
                Polarity::Goal,
                "(and (is-var (quote X)) (idem empty))",
                Some("(quote a)"),
            ),
            (Polarity::Goal, "(not (is-var (quote X)))", Some("(quote b)")),
        ]);
        let id = t.resolve(2, &[1], 3, &[1]).unwrap();
        t.rows[id - 1].output = Some(parse_term("(quote c)").unwrap());
        assert!(matches!(t.verify_row(id), Err(TableauError::VerifyFailed { .. })));
    }

    #[test]
    fn extraction_accepts_final_rows() {
        let mut t = bare(vec![(Polarity::Goal, "true", Some("(quote a)"))]);
        assert_eq!(t.extract_program().unwrap().body.to_string(), "(quote a)");
        t = bare(vec![(Polarity::Assertion, "false", Some("(quote b)"))]);
        assert_eq!(t.extract_program().unwrap().body.to_string(), "(quote b)");
        t = bare(vec![(Polarity::Goal, "(idem empty)", Some("(quote b)"))]);
        assert!(t.extract_program().is_none());
    }
}
