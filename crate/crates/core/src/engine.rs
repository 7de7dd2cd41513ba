//! Derivation driver: theory files, scripted replay with independent
//! verification of every derived row, and a bounded best-first search.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashSet};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::logic::{
    is_meta_name, meta_sorts, node_at, parse_path, polarity_at, term_meta_sorts, Formula, LTerm, LogicError, MSubst,
    NodeRef, Path, Signature,
};
use crate::program::ProgramDef;
use crate::sexp::{read_all, Sexp, SexpError};
use crate::tableau::{Direction, Polarity, Row, SpecDef, Tableau, TableauError};
use crate::wf::{relspec_from_sexp, RelRegistry, WfError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("theory error at line {line}: {msg}")]
    Theory { line: usize, msg: String },
    #[error("script error at line {line}: {msg}")]
    Script { line: usize, msg: String },
    #[error("step {index} (line {line}) failed: {cause}")]
    StepFailed { index: usize, line: usize, cause: String },
    #[error("no final row to extract")]
    NoFinalRow,
}

fn line_of(text: &str, pos: usize) -> usize {
    text[..pos.min(text.len())].matches('\n').count() + 1
}

/// A loaded theory: the synthesis problem, its lemmas and relations.
#[derive(Debug, Clone)]
pub struct Theory {
    pub spec: SpecDef,
    pub lemmas: BTreeMap<String, Formula>,
    pub lemma_order: Vec<String>,
    pub registry: RelRegistry,
    pub signature: Signature,
}

impl Theory {
    /// Parses `lemma NAME FORMULA`, `spec NAME (PARAMS) [output META] FORMULA`
    /// and `relation NAME RELSPEC` declarations.
    pub fn parse(text: &str) -> Result<Theory, EngineError> {
        let terr = |pos: usize, msg: String| EngineError::Theory {
            line: line_of(text, pos),
            msg,
        };
        let items = read_all(text).map_err(|SexpError::Syntax { pos, msg }| terr(pos, msg))?;
        let mut i = 0;
        let mut spec_decl: Option<(&Sexp, &Sexp, Option<&Sexp>, &Sexp)> = None;
        let mut lemma_decls: Vec<(&Sexp, &Sexp)> = Vec::new();
        let mut registry = RelRegistry::default();
        let take = |i: &mut usize, what: &str, at: usize| -> Result<&Sexp, EngineError> {
            let s = items.get(*i).ok_or_else(|| terr(at, format!("missing {what}")))?;
            *i += 1;
            Ok(s)
        };
        while i < items.len() {
            let kw = &items[i];
            i += 1;
            match kw.atom() {
                Some("lemma") => {
                    let name = take(&mut i, "lemma name", kw.pos())?;
                    let body = take(&mut i, "lemma formula", kw.pos())?;
                    lemma_decls.push((name, body));
                }
                Some("spec") => {
                    if spec_decl.is_some() {
                        return Err(terr(kw.pos(), "more than one spec".into()));
                    }
                    let name = take(&mut i, "spec name", kw.pos())?;
                    let params = take(&mut i, "spec parameters", kw.pos())?;
                    let mut out = None;
                    if items.get(i).and_then(Sexp::atom) == Some("output") {
                        i += 1;
                        out = Some(take(&mut i, "output metavariable", kw.pos())?);
                    }
                    let body = take(&mut i, "spec formula", kw.pos())?;
                    spec_decl = Some((name, params, out, body));
                }
                Some("relation") => {
                    let name = take(&mut i, "relation name", kw.pos())?;
                    let body = take(&mut i, "relation", kw.pos())?;
                    let name = name
                        .atom()
                        .ok_or_else(|| terr(name.pos(), "relation name expected".into()))?;
                    let rel = relspec_from_sexp(body).map_err(|e: WfError| terr(body.pos(), e.to_string()))?;
                    registry.insert(name, rel);
                }
                _ => return Err(terr(kw.pos(), format!("expected lemma, spec or relation, found {kw}"))),
            }
        }
        let (name, params, out, body) = spec_decl.ok_or_else(|| terr(text.len(), "missing spec".into()))?;
        let name = name
            .atom()
            .ok_or_else(|| terr(name.pos(), "spec name expected".into()))?
            .to_string();
        let param_names = params
            .list()
            .ok_or_else(|| terr(params.pos(), "parameter list expected".into()))?
            .iter()
            .map(|p| {
                p.atom()
                    .map(str::to_string)
                    .ok_or_else(|| terr(p.pos(), "parameter name expected".into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let base = Signature::standard();
        let logic_err = |e: LogicError, at: &Sexp| terr(at.pos(), e.to_string());
        let (condition, consts) = base.formula_from_sexp(body, true).map_err(|e| logic_err(e, body))?;
        for c in consts.keys() {
            if !param_names.contains(c) {
                return Err(terr(body.pos(), format!("unknown constant {c}")));
            }
        }
        let mut ps = Vec::new();
        for p in &param_names {
            let sort = consts
                .get(p)
                .copied()
                .ok_or_else(|| terr(params.pos(), format!("cannot infer sort of {p}")))?;
            ps.push((p.clone(), sort));
        }
        let output = match out {
            None => None,
            Some(o) => {
                let m = o
                    .atom()
                    .filter(|m| is_meta_name(m))
                    .ok_or_else(|| terr(o.pos(), "metavariable expected".into()))?;
                let mut sorts = BTreeMap::new();
                meta_sorts(&condition, &mut sorts);
                let sort = sorts
                    .get(m)
                    .copied()
                    .ok_or_else(|| terr(o.pos(), format!("{m} does not occur")))?;
                Some((m.to_string(), sort))
            }
        };
        let mut signature = base;
        for (p, s) in &ps {
            signature.add_const(p, *s);
        }
        if let Some((_, sort)) = &output {
            signature.add_fn(&name, ps.iter().map(|(_, s)| *s).collect(), *sort);
        }
        let mut lemmas = BTreeMap::new();
        let mut lemma_order = Vec::new();
        for (n, body) in lemma_decls {
            let n = n
                .atom()
                .ok_or_else(|| terr(n.pos(), "lemma name expected".into()))?
                .to_string();
            let (f, _) = signature
                .formula_from_sexp(body, false)
                .map_err(|e| logic_err(e, body))?;
            if lemmas.insert(n.clone(), f).is_some() {
                return Err(terr(body.pos(), format!("duplicate lemma {n}")));
            }
            lemma_order.push(n);
        }
        let spec = SpecDef {
            name,
            params: ps,
            output,
            condition,
        };
        Ok(Theory {
            spec,
            lemmas,
            lemma_order,
            registry,
            signature,
        })
    }

    /// A copy keeping only the named lemmas.
    pub fn restricted(&self, names: &[&str]) -> Theory {
        let keep: BTreeSet<&str> = names.iter().copied().collect();
        let mut t = self.clone();
        t.lemmas.retain(|k, _| keep.contains(k.as_str()));
        t.lemma_order.retain(|k| keep.contains(k.as_str()));
        t
    }

    pub fn tableau(&self) -> Result<Tableau, TableauError> {
        Ok(Tableau::new(self.spec.clone())?
            .with_lemmas(self.lemmas.clone())
            .with_registry(self.registry.clone()))
    }
}

// ---------------------------------------------------------------------------
// Scripts

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowRef {
    Id(usize),
    Label(String, Option<usize>),
    Last,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Assert(String),
    Assume(Formula, Option<LTerm>),
    Split(RowRef),
    Dualize(RowRef),
    Orphan(RowRef),
    Resolve(RowRef, Path, RowRef, Path),
    EqRepl(RowRef, Path, RowRef, Path, Direction),
    IffRepl(RowRef, Path, RowRef, Path, Direction),
    Induct(String),
    Extract,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub line: usize,
    pub label: Option<String>,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Script {
    pub steps: Vec<Step>,
}

fn parse_ref(tok: &str) -> Option<RowRef> {
    if tok == "^" {
        return Some(RowRef::Last);
    }
    if let Some(rest) = tok.strip_prefix('@') {
        return Some(match rest.split_once('/') {
            Some((l, k)) => RowRef::Label(l.to_string(), Some(k.parse().ok().filter(|&k: &usize| k >= 1)?)),
            None => RowRef::Label(rest.to_string(), None),
        });
    }
    tok.parse().ok().map(RowRef::Id)
}

fn parse_dir(tok: &str) -> Option<Direction> {
    match tok {
        "ltr" => Some(Direction::Ltr),
        "rtl" => Some(Direction::Rtl),
        _ => None,
    }
}

impl Script {
    /// Parses one command per line; `;` starts a comment and `name:` labels
    /// the rows a command creates.
    pub fn parse(text: &str, sig: &Signature) -> Result<Script, EngineError> {
        let mut steps = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let err = |msg: String| EngineError::Script { line, msg };
            let code = raw.split(';').next().unwrap_or("").trim();
            if code.is_empty() {
                continue;
            }
            let (label, code) = match code.split_once(':') {
                Some((l, rest)) if !l.is_empty() && !l.contains(char::is_whitespace) && !l.contains('(') => {
                    (Some(l.to_string()), rest.trim())
                }
                _ => (None, code),
            };
            let (op, rest) = code.split_once(char::is_whitespace).unwrap_or((code, ""));
            let toks: Vec<&str> = rest.split_whitespace().collect();
            let want = |n: usize| {
                if toks.len() == n {
                    Ok(())
                } else {
                    Err(err(format!("{op} takes {n} arguments")))
                }
            };
            let r = |t: &str| parse_ref(t).ok_or_else(|| err(format!("bad row reference {t}")));
            let p = |t: &str| parse_path(t).ok_or_else(|| err(format!("bad path {t}")));
            let command = match op {
                "assert" => {
                    want(1)?;
                    Command::Assert(toks[0].to_string())
                }
                "assume" => {
                    let items = read_all(rest).map_err(|e| err(e.to_string()))?;
                    let (f, out) = match items.as_slice() {
                        [f] => (f, None),
                        [f, kw, t] if kw.atom() == Some("output") => (f, Some(t)),
                        _ => return Err(err("expected assume FORMULA [output TERM]".into())),
                    };
                    let terms: Vec<&Sexp> = out.into_iter().collect();
                    let (fs, ts, _) = sig.parse_joint(&[f], &terms, false).map_err(|e| err(e.to_string()))?;
                    Command::Assume(fs.into_iter().next().unwrap(), ts.into_iter().next())
                }
                "split" | "dualize" | "orphan" => {
                    want(1)?;
                    let row = r(toks[0])?;
                    match op {
                        "split" => Command::Split(row),
                        "dualize" => Command::Dualize(row),
                        _ => Command::Orphan(row),
                    }
                }
                "resolve" => {
                    want(4)?;
                    Command::Resolve(r(toks[0])?, p(toks[1])?, r(toks[2])?, p(toks[3])?)
                }
                "eqrepl" | "iffrepl" => {
                    want(5)?;
                    let d = parse_dir(toks[4]).ok_or_else(|| err(format!("bad direction {}", toks[4])))?;
                    let (a, pa, b, pb) = (r(toks[0])?, p(toks[1])?, r(toks[2])?, p(toks[3])?);
                    if op == "eqrepl" {
                        Command::EqRepl(a, pa, b, pb, d)
                    } else {
                        Command::IffRepl(a, pa, b, pb, d)
                    }
                }
                "induct" => {
                    want(1)?;
                    Command::Induct(toks[0].to_string())
                }
                "extract" => {
                    want(0)?;
                    Command::Extract
                }
                _ => return Err(err(format!("unknown command {op}"))),
            };
            steps.push(Step { line, label, command });
        }
        Ok(Script { steps })
    }
}

#[derive(Debug, Clone)]
pub struct Replay {
    pub tableau: Tableau,
    pub program: ProgramDef,
    /// Rows created by each step, in script order.
    pub step_rows: Vec<Vec<usize>>,
}

impl Replay {
    pub fn trace(&self) -> Vec<String> {
        self.tableau.rows.iter().map(Row::to_string).collect()
    }
}

/// Runs a script over a theory, verifying every derived row. Fails at the
/// first step that cannot be carried out.
pub fn replay(theory: &Theory, script: &Script) -> Result<Replay, EngineError> {
    replay_partial(theory, script).map_err(|(e, _)| e)
}

/// Like [`replay`], but a failure also returns the rows derived before it.
pub fn replay_partial(theory: &Theory, script: &Script) -> Result<Replay, (EngineError, Vec<String>)> {
    let mut t = theory.tableau().map_err(|e| {
        (
            EngineError::StepFailed {
                index: 0,
                line: 0,
                cause: e.to_string(),
            },
            Vec::new(),
        )
    })?;
    let partial = |t: &Tableau| t.rows.iter().map(Row::to_string).collect::<Vec<_>>();
    let mut labels: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut step_rows = Vec::new();
    let mut program = None;
    let mut decrease = None;
    for (k, step) in script.steps.iter().enumerate() {
        let fail = |cause: String| EngineError::StepFailed {
            index: k + 1,
            line: step.line,
            cause,
        };
        let resolve_ref = |r: &RowRef, t: &Tableau| -> Result<usize, String> {
            match r {
                RowRef::Id(id) => Ok(*id),
                RowRef::Last => Ok(t.last_id()),
                RowRef::Label(l, idx) => {
                    let ids = labels.get(l).ok_or_else(|| format!("unknown label {l}"))?;
                    match idx {
                        Some(i) => ids
                            .get(i - 1)
                            .copied()
                            .ok_or_else(|| format!("label {l} has no part {i}")),
                        None if ids.len() == 1 => Ok(ids[0]),
                        None => Err(format!("label {l} names {} rows; select one with @{l}/k", ids.len())),
                    }
                }
            }
        };
        let before = t.last_id();
        let res: Result<Vec<usize>, String> = (|| {
            let e = |x: TableauError| x.to_string();
            Ok(match &step.command {
                Command::Assert(n) => vec![t.add_lemma(n).map_err(e)?],
                Command::Assume(f, o) => vec![t.assume(f, o.as_ref()).map_err(e)?],
                Command::Split(r) => t.split(resolve_ref(r, &t)?).map_err(e)?,
                Command::Dualize(r) => vec![t.dualize(resolve_ref(r, &t)?).map_err(e)?],
                Command::Orphan(r) => vec![t.orphan(resolve_ref(r, &t)?).map_err(e)?],
                Command::Resolve(a, pa, b, pb) => {
                    let (a, b) = (resolve_ref(a, &t)?, resolve_ref(b, &t)?);
                    vec![t.resolve(a, pa, b, pb).map_err(e)?]
                }
                Command::EqRepl(a, pa, b, pb, d) => {
                    let (a, b) = (resolve_ref(a, &t)?, resolve_ref(b, &t)?);
                    vec![t.eqrepl(a, pa, b, pb, *d).map_err(e)?]
                }
                Command::IffRepl(a, pa, b, pb, d) => {
                    let (a, b) = (resolve_ref(a, &t)?, resolve_ref(b, &t)?);
                    vec![t.iffrepl(a, pa, b, pb, *d).map_err(e)?]
                }
                Command::Induct(rel) => {
                    decrease = Some(rel.clone());
                    vec![t.induct(rel).map_err(e)?]
                }
                Command::Extract => {
                    let p = t.extract_program().ok_or_else(|| EngineError::NoFinalRow.to_string())?;
                    program = Some(p);
                    vec![]
                }
            })
        })();
        let ids = res.map_err(|e| (fail(e), partial(&t)))?;
        for id in before + 1..=t.last_id() {
            t.verify_row(id).map_err(|e| (fail(e.to_string()), partial(&t)))?;
        }
        if let Some(l) = &step.label {
            labels.insert(l.clone(), ids.clone());
        }
        step_rows.push(ids);
    }
    let mut program = program
        .ok_or_else(|| (EngineError::NoFinalRow, partial(&t)))?
        .simplified();
    program.decrease = decrease;
    Ok(Replay {
        tableau: t,
        program,
        step_rows,
    })
}

// ---------------------------------------------------------------------------
// Search

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchConfig {
    pub max_rows: usize,
    /// Symbol weights; symbols not listed weigh `default_weight`.
    pub weights: BTreeMap<String, u64>,
    pub default_weight: u64,
    /// Predicates in decreasing precedence. When nonempty, only literals
    /// whose predicate is maximal in their row are selected for resolution.
    pub precedence: Vec<String>,
    /// Zero keeps ties in creation order; other values shuffle ties.
    pub seed: u64,
    /// Rows heavier than this are discarded.
    pub max_weight: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_rows: 200,
            weights: BTreeMap::new(),
            default_weight: 1,
            precedence: Vec::new(),
            seed: 0,
            max_weight: 40,
        }
    }
}

impl SearchConfig {
    /// Reads `symbol weight` pairs, one per line; `;` comments allowed.
    pub fn parse_weights(text: &str) -> Result<BTreeMap<String, u64>, String> {
        let mut out = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let code = line.split(';').next().unwrap_or("").trim();
            if code.is_empty() {
                continue;
            }
            let mut parts = code.split_whitespace();
            let (Some(sym), Some(w), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(format!("line {}: expected `symbol weight`", k + 1));
            };
            let w: u64 = w
                .parse()
                .ok()
                .filter(|&w| w > 0)
                .ok_or_else(|| format!("line {}: weight must be positive", k + 1))?;
            out.insert(sym.to_string(), w);
        }
        Ok(out)
    }

    fn weight(&self, row: &Row) -> u64 {
        let mut syms = Vec::new();
        row.formula.symbols(&mut syms);
        if let Some(o) = &row.output {
            o.symbols(&mut syms);
        }
        let metas = row.metas().len() as u64;
        metas
            + syms
                .iter()
                .map(|s| self.weights.get(s).copied().unwrap_or(self.default_weight))
                .sum::<u64>()
    }
}

/// Canonical text of a row with metavariables renamed by first occurrence.
/// Outputs only count as present or absent: a second goal with the same
/// formula and another output adds nothing to the search.
fn canonical_key(row: &Row) -> String {
    let mut order: Vec<String> = Vec::new();
    let mut sorts = BTreeMap::new();
    meta_sorts(&row.formula, &mut sorts);
    if let Some(o) = &row.output {
        term_meta_sorts(o, &mut sorts);
    }
    let text = format!(
        "{} {}",
        row.formula,
        row.output.as_ref().map(|o| o.to_string()).unwrap_or_default()
    );
    for tok in text.split(|c: char| c.is_whitespace() || c == '(' || c == ')') {
        if sorts.contains_key(tok) && !order.iter().any(|o| o == tok) {
            order.push(tok.to_string());
        }
    }
    let mut ren = MSubst::new();
    for (i, n) in order.iter().enumerate() {
        ren.insert(n, LTerm::meta(&format!("V{i}"), sorts[n]));
    }
    let r = row.instantiate(&ren);
    let tag = if r.polarity == Polarity::Goal { "G" } else { "A" };
    format!("{tag} {} | {}", r.formula, r.output.is_some())
}

fn paths_where(f: &Formula, pred: &dyn Fn(NodeRef<'_>) -> bool) -> Vec<Path> {
    let mut out = Vec::new();
    let mut stack: Vec<Path> = vec![Vec::new()];
    while let Some(p) = stack.pop() {
        let Some(n) = node_at(f, &p) else { continue };
        if pred(n) {
            out.push(p.clone());
        }
        let mut k = 1;
        loop {
            let mut q = p.clone();
            q.push(k);
            if node_at(f, &q).is_none() {
                break;
            }
            stack.push(q);
            k += 1;
        }
    }
    out.sort();
    out
}

/// Polarity restriction: resolving two occurrences that both have the same
/// strict sign, counted with assertions negated, only yields weaker rows.
fn same_sign(x: &Row, p: &Path, y: &Row, q: &Path) -> bool {
    let sign = |row: &Row, path: &Path| {
        let pol = polarity_at(&row.formula, path).unwrap_or(0);
        if row.polarity == Polarity::Assertion {
            -pol
        } else {
            pol
        }
    };
    let (s1, s2) = (sign(x, p), sign(y, q));
    s1 == s2 && s1 != 0
}

fn head_of(f: &Formula) -> Option<&str> {
    match f {
        Formula::Atom { pred, .. } => Some(pred),
        Formula::Eq(..) => Some("="),
        _ => None,
    }
}

/// The tableau a search ended with, and the program when it found one.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub tableau: Tableau,
    pub program: Option<ProgramDef>,
}

/// Best-first saturation: rows are selected lightest first and combined
/// with every previously selected row. Stops at the first final row or when
/// the tableau holds `max_rows` rows.
pub fn search(theory: &Theory, config: &SearchConfig) -> Result<SearchOutcome, TableauError> {
    let mut t = theory.tableau()?;
    let program = if config.max_rows == 0 {
        None
    } else {
        saturate(&mut t, theory, config)?
    };
    Ok(SearchOutcome { tableau: t, program })
}

fn saturate(t: &mut Tableau, theory: &Theory, config: &SearchConfig) -> Result<Option<ProgramDef>, TableauError> {
    // Set of support: two lemmas are never combined with each other.
    let mut lemma_ids = HashSet::new();
    for n in &theory.lemma_order {
        if t.last_id() >= config.max_rows {
            break;
        }
        lemma_ids.insert(t.add_lemma(n)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let tie = |rng: &mut ChaCha8Rng| if config.seed == 0 { 0 } else { rng.next_u64() };
    let mut seen: HashSet<String> = HashSet::new();
    let mut passive = BinaryHeap::new();
    for row in &t.rows {
        seen.insert(canonical_key(row));
        passive.push(Reverse((config.weight(row), tie(&mut rng), row.id)));
    }
    let mut active: Vec<usize> = Vec::new();
    while let Some(Reverse((_, _, given))) = passive.pop() {
        if let Some(p) = t.extract_program() {
            return Ok(Some(p.simplified()));
        }
        active.push(given);
        let mut fresh: Vec<usize> = Vec::new();
        let mut attempt = |t: &mut Tableau, r: Result<Vec<usize>, TableauError>| -> bool {
            let Ok(ids) = r else { return false };
            for id in ids {
                let row = t.row(id).unwrap();
                let useless = match row.polarity {
                    Polarity::Goal => row.formula == Formula::False,
                    Polarity::Assertion => row.formula == Formula::True && row.output.is_none(),
                };
                if useless || config.weight(row) > config.max_weight || !seen.insert(canonical_key(row)) {
                    // Only the newest row can be rejected, so the ids stay dense.
                    if id == t.last_id() {
                        t.rows.pop();
                    }
                    continue;
                }
                fresh.push(id);
                if row.is_final() {
                    return true;
                }
            }
            t.last_id() >= config.max_rows
        };
        let mut stop = false;
        let given_lemma = lemma_ids.contains(&given);
        if !given_lemma {
            for r in [t.split(given), t.orphan(given).map(|i| vec![i])] {
                stop |= attempt(t, r);
            }
        }
        for &other in &active {
            if stop {
                break;
            }
            if given_lemma && lemma_ids.contains(&other) {
                continue;
            }
            for (a, b) in [(given, other), (other, given)] {
                if stop {
                    break;
                }
                stop |= binary_inferences(t, a, b, config, &mut attempt);
            }
        }
        for id in fresh {
            let row = t.row(id).unwrap();
            passive.push(Reverse((config.weight(row), tie(&mut rng), id)));
        }
        if let Some(p) = t.extract_program() {
            return Ok(Some(p.simplified()));
        }
        if stop || t.last_id() >= config.max_rows {
            break;
        }
    }
    Ok(t.extract_program().map(|p| p.simplified()))
}

fn binary_inferences(
    t: &mut Tableau,
    a: usize,
    b: usize,
    config: &SearchConfig,
    attempt: &mut dyn FnMut(&mut Tableau, Result<Vec<usize>, TableauError>) -> bool,
) -> bool {
    let (ra, rb) = (t.row(a).unwrap().clone(), t.row(b).unwrap().clone());
    let selected = |row: &Row| -> Vec<Path> {
        let lits = paths_where(&row.formula, &|n| matches!(n, NodeRef::F(f) if f.is_atomic()));
        if config.precedence.is_empty() {
            return lits;
        }
        let rank = |p: &Path| match node_at(&row.formula, p) {
            Some(NodeRef::F(f)) => head_of(f)
                .and_then(|h| config.precedence.iter().position(|q| q == h))
                .unwrap_or(usize::MAX),
            _ => usize::MAX,
        };
        let best = lits.iter().map(rank).min().unwrap_or(usize::MAX);
        lits.into_iter().filter(|p| rank(p) == best).collect()
    };
    let heads = |row: &Row, p: &Path| match node_at(&row.formula, p) {
        Some(NodeRef::F(f)) => head_of(f).map(str::to_string),
        _ => None,
    };
    if a != b {
        for p in selected(&ra) {
            for q in selected(&rb) {
                if heads(&ra, &p) != heads(&rb, &q) || same_sign(&ra, &p, &rb, &q) {
                    continue;
                }
                let r = t.resolve(a, &p, b, &q).map(|i| vec![i]);
                if attempt(t, r) {
                    return true;
                }
            }
        }
    }
    let eqs = paths_where(&ra.formula, &|n| matches!(n, NodeRef::F(Formula::Eq(..))));
    let iffs = paths_where(&ra.formula, &|n| matches!(n, NodeRef::F(Formula::Iff(..))));
    if !eqs.is_empty() {
        let terms = paths_where(&rb.formula, &|n| matches!(n, NodeRef::T(_)));
        for p in &eqs {
            let Some(NodeRef::F(Formula::Eq(l, r))) = node_at(&ra.formula, p) else {
                continue;
            };
            for (dir, from) in [(Direction::Ltr, l), (Direction::Rtl, r)] {
                if from.is_meta() {
                    continue;
                }
                for q in &terms {
                    if a == b && q.starts_with(p) {
                        continue;
                    }
                    let r = t.eqrepl(a, p, b, q, dir).map(|i| vec![i]);
                    if attempt(t, r) {
                        return true;
                    }
                }
            }
        }
    }
    if !iffs.is_empty() {
        let subs = paths_where(&rb.formula, &|n| matches!(n, NodeRef::F(f) if f.is_atomic()));
        for p in &iffs {
            for dir in [Direction::Ltr, Direction::Rtl] {
                for q in &subs {
                    if a == b {
                        continue;
                    }
                    let r = t.iffrepl(a, p, b, q, dir).map(|i| vec![i]);
                    if attempt(t, r) {
                        return true;
                    }
                }
            }
        }
    }
    false
}
