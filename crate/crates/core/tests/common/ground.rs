//! Ground soundness checks for the tableau rules. Rows are built over at
//! most four propositional atoms with ground output entries; for every
//! truth assignment, each output a derived row allows must already be
//! allowed by one of its parents. Goals allow their output when true,
//! assertions when false, and a row without output (or with a bare
//! metavariable) allows any term.
//!
//! Each check returns the number of live comparisons, those where the
//! derived row allowed something, and fails on a violation or when a rule
//! form was not exercised.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unisynth::logic::{replace_at, Formula, LTerm, MSubst, Node, Path};
use unisynth::tableau::{
    derive_dualize, derive_eqrepl, derive_iffrepl, derive_orphan, derive_resolve, derive_split, Derived, Direction,
    Justification, Polarity, Row, Rule,
};
use unisynth::value::Sort;

type Assign = BTreeMap<String, bool>;

pub fn atom(name: &str) -> Formula {
    Formula::atom(name, vec![])
}

pub fn konst(name: &str) -> LTerm {
    LTerm::app(name, vec![], Sort::Expr)
}

fn eq_key(a: &LTerm, b: &LTerm) -> String {
    let (x, y) = (a.to_string(), b.to_string());
    let (x, y) = if x <= y { (x, y) } else { (y, x) };
    format!("(= {x} {y})")
}

/// Truth of a formula under an assignment to its atoms; an equation between
/// identical terms is true.
fn eval(f: &Formula, v: &Assign) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom { .. } => v[&f.to_string()],
        Formula::Eq(a, b) => a == b || v[&eq_key(a, b)],
        Formula::Not(g) => !eval(g, v),
        Formula::And(fs) => fs.iter().all(|g| eval(g, v)),
        Formula::Or(fs) => fs.iter().any(|g| eval(g, v)),
        Formula::Implies(a, b) => !eval(a, v) || eval(b, v),
        Formula::Iff(a, b) => eval(a, v) == eval(b, v),
    }
}

fn eval_term(t: &LTerm, v: &Assign) -> String {
    match t {
        LTerm::Cond { test, then, els } => {
            if eval(test, v) {
                eval_term(then, v)
            } else {
                eval_term(els, v)
            }
        }
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Allows {
    Nothing,
    Any,
    Only(String),
}

fn allows(polarity: Polarity, formula: &Formula, output: &Option<LTerm>, v: &Assign) -> Allows {
    let truth = eval(formula, v);
    let fires = match polarity {
        Polarity::Goal => truth,
        Polarity::Assertion => !truth,
    };
    match output {
        _ if !fires => Allows::Nothing,
        None | Some(LTerm::Meta { .. }) => Allows::Any,
        Some(t) => Allows::Only(eval_term(t, v)),
    }
}

fn covered(child: &Allows, parents: &[Allows]) -> bool {
    match child {
        Allows::Nothing => true,
        Allows::Any => parents.contains(&Allows::Any),
        Allows::Only(_) => parents.contains(&Allows::Any) || parents.contains(child),
    }
}

pub fn row(polarity: Polarity, formula: Formula, output: Option<LTerm>) -> Row {
    let justification = Justification {
        rule: Rule::Spec,
        parents: vec![],
        paths: vec![],
        renaming: MSubst::new(),
        unifier: MSubst::new(),
    };
    Row {
        id: 1,
        polarity,
        formula,
        output,
        justification,
    }
}

/// A small world of atoms and the assignments that respect it.
pub struct World {
    atoms: Vec<String>,
    admissible: fn(&Assign) -> bool,
}

impl World {
    fn assignments(&self) -> Vec<Assign> {
        (0..1u32 << self.atoms.len())
            .map(|bits| {
                self.atoms
                    .iter()
                    .enumerate()
                    .map(|(i, a)| (a.clone(), bits >> i & 1 == 1))
                    .collect()
            })
            .filter(|v| (self.admissible)(v))
            .collect()
    }
}

/// Counts checks where the derived row allowed something, so vacuous
/// passes are noticed.
#[derive(Default)]
pub struct Tally {
    pub live: usize,
}

impl Tally {
    pub fn check(&mut self, world: &World, parents: &[&Row], d: &Derived) -> Result<(), String> {
        for v in world.assignments() {
            let child = allows(d.polarity, &d.formula, &d.output, &v);
            let from: Vec<Allows> = parents
                .iter()
                .map(|p| allows(p.polarity, &p.formula, &p.output, &v))
                .collect();
            if !covered(&child, &from) {
                let rows: Vec<String> = parents.iter().map(|p| p.to_string()).collect();
                return Err(format!(
                    "{v:?}: derived {d:?} allows {child:?}; parents {rows:?} allow {from:?}"
                ));
            }
            if child != Allows::Nothing {
                self.live += 1;
            }
        }
        Ok(())
    }
}

pub fn prop_world() -> World {
    World {
        atoms: ["(p)", "(q)", "(r)", "(s)"].map(String::from).to_vec(),
        admissible: |_| true,
    }
}

fn prop_pool() -> Vec<Formula> {
    ["p", "q", "r", "s"].map(atom).to_vec()
}

/// Atoms `a = b`, `p(a)`, `p(b)` and `q`; assignments must respect the
/// equation.
fn eq_world() -> World {
    World {
        atoms: ["(= a b)", "(p a)", "(p b)", "(q)"].map(String::from).to_vec(),
        admissible: |v| !v["(= a b)"] || v["(p a)"] == v["(p b)"],
    }
}

fn eq_pool() -> Vec<Formula> {
    let (a, b) = (konst("a"), konst("b"));
    vec![
        Formula::Eq(a.clone(), b.clone()),
        Formula::atom("p", vec![a]),
        Formula::atom("p", vec![b]),
        atom("q"),
    ]
}

fn random_formula(rng: &mut ChaCha8Rng, pool: &[Formula], depth: u32) -> Formula {
    if depth == 0 || rng.gen_bool(0.3) {
        return pool.choose(rng).unwrap().clone();
    }
    let sub = |rng: &mut ChaCha8Rng| random_formula(rng, pool, depth - 1);
    match rng.gen_range(0..5) {
        0 => Formula::And((0..rng.gen_range(2..4)).map(|_| sub(rng)).collect()),
        1 => Formula::Or((0..rng.gen_range(2..4)).map(|_| sub(rng)).collect()),
        2 => Formula::not(sub(rng)),
        3 => Formula::implies(sub(rng), sub(rng)),
        _ => Formula::iff(sub(rng), sub(rng)),
    }
}

fn random_output(rng: &mut ChaCha8Rng, pool: &[Formula]) -> Option<LTerm> {
    match rng.gen_range(0..4) {
        0 => None,
        1 => Some(konst("o1")),
        2 => Some(konst("o2")),
        _ => Some(LTerm::cond(pool.choose(rng).unwrap().clone(), konst("o1"), konst("o3"))),
    }
}

fn random_polarity(rng: &mut ChaCha8Rng) -> Polarity {
    if rng.gen_bool(0.5) {
        Polarity::Goal
    } else {
        Polarity::Assertion
    }
}

fn random_row(rng: &mut ChaCha8Rng, pool: &[Formula]) -> Row {
    let f = random_formula(rng, pool, 3);
    let o = random_output(rng, pool);
    row(random_polarity(rng), f, o)
}

/// Paths to atoms and equations, and to terms directly under them.
fn positions(f: &Formula) -> (Vec<(Path, Formula)>, Vec<(Path, LTerm)>) {
    fn go(f: &Formula, at: &mut Path, fs: &mut Vec<(Path, Formula)>, ts: &mut Vec<(Path, LTerm)>) {
        let mut sub = |k: usize, g: &Formula, at: &mut Path| {
            at.push(k);
            go(g, at, fs, ts);
            at.pop();
        };
        match f {
            Formula::And(gs) | Formula::Or(gs) => gs.iter().enumerate().for_each(|(i, g)| sub(i + 1, g, at)),
            Formula::Not(g) => sub(1, g, at),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                sub(1, a, at);
                sub(2, b, at);
            }
            Formula::Atom { args, .. } => {
                fs.push((at.clone(), f.clone()));
                for (i, t) in args.iter().enumerate() {
                    let mut p = at.clone();
                    p.push(i + 1);
                    ts.push((p, t.clone()));
                }
            }
            Formula::Eq(a, b) => {
                fs.push((at.clone(), f.clone()));
                for (i, t) in [a, b].into_iter().enumerate() {
                    let mut p = at.clone();
                    p.push(i + 1);
                    ts.push((p, t.clone()));
                }
            }
            Formula::True | Formula::False => {}
        }
    }
    let (mut fs, mut ts) = (Vec::new(), Vec::new());
    go(f, &mut Vec::new(), &mut fs, &mut ts);
    (fs, ts)
}

/// A random formula with `g` planted at one of its atom positions.
fn planted(rng: &mut ChaCha8Rng, pool: &[Formula], g: &Formula) -> Formula {
    let f = random_formula(rng, pool, 2);
    let (atoms, _) = positions(&f);
    let (path, _) = atoms.choose(rng).unwrap();
    replace_at(&f, path, &Node::F(g.clone())).unwrap()
}

fn form(p: Polarity) -> &'static str {
    match p {
        Polarity::Goal => "G",
        Polarity::Assertion => "A",
    }
}

fn live_enough(tally: &Tally, trials: usize) -> Result<usize, String> {
    if tally.live >= trials {
        Ok(tally.live)
    } else {
        Err(format!("only {} live checks", tally.live))
    }
}

/// Resolution in its goal-goal, assertion-assertion and mixed forms, each
/// with every combination of present and absent outputs.
pub fn resolution(trials: usize, seed: u64) -> Result<usize, String> {
    let world = prop_world();
    let pool = prop_pool();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::default();
    let mut kinds: BTreeMap<String, usize> = BTreeMap::new();
    for i in 0..trials {
        let mut x = random_row(&mut rng, &pool);
        let mut y = random_row(&mut rng, &pool);
        // Cycle through the four output combinations.
        if i & 1 == 0 {
            x.output = None;
        }
        if i & 2 == 0 {
            y.output = None;
        }
        let (xs, _) = positions(&x.formula);
        let (ys, _) = positions(&y.formula);
        let pairs: Vec<(&Path, &Path)> = xs
            .iter()
            .flat_map(|(p, a)| ys.iter().filter(move |(_, b)| a == b).map(move |(q, _)| (p, q)))
            .collect();
        let Some((p1, p2)) = pairs.choose(&mut rng) else {
            continue;
        };
        let d = derive_resolve(&x, p1, &y, p2, &MSubst::new()).map_err(|e| e.to_string())?;
        tally.check(&world, &[&x, &y], &d)?;
        let key = format!(
            "{}{} out {}{}",
            form(x.polarity),
            form(y.polarity),
            u8::from(x.output.is_some()),
            u8::from(y.output.is_some())
        );
        *kinds.entry(key).or_default() += 1;
    }
    if kinds.len() != 16 || kinds.values().any(|&n| n < trials / 60) {
        return Err(format!("rule forms not all exercised: {kinds:?}"));
    }
    live_enough(&tally, trials)
}

pub fn equality_replacement(trials: usize, seed: u64) -> Result<usize, String> {
    let world = eq_world();
    let pool = eq_pool();
    let (a, b) = (konst("a"), konst("b"));
    let eq = Formula::Eq(a.clone(), b.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::default();
    let mut applied = 0;
    for _ in 0..trials {
        let e = row(
            random_polarity(&mut rng),
            planted(&mut rng, &pool, &eq),
            random_output(&mut rng, &pool),
        );
        let t = random_row(&mut rng, &pool);
        let (eqs, _) = positions(&e.formula);
        let ep: Vec<&Path> = eqs.iter().filter(|(_, f)| *f == eq).map(|(p, _)| p).collect();
        let ep = ep.choose(&mut rng).expect("the equation was planted");
        let dir = if rng.gen_bool(0.5) {
            Direction::Ltr
        } else {
            Direction::Rtl
        };
        let from = if dir == Direction::Ltr { &a } else { &b };
        let (_, terms) = positions(&t.formula);
        let targets: Vec<&Path> = terms.iter().filter(|(_, u)| u == from).map(|(p, _)| p).collect();
        let Some(tp) = targets.choose(&mut rng) else { continue };
        let d = derive_eqrepl(&e, ep, &t, tp, dir, &MSubst::new()).map_err(|e| e.to_string())?;
        tally.check(&world, &[&e, &t], &d)?;
        applied += 1;
    }
    if applied < trials / 2 {
        return Err(format!("only {applied} applications"));
    }
    live_enough(&tally, trials)
}

pub fn equivalence_replacement(trials: usize, seed: u64) -> Result<usize, String> {
    let world = prop_world();
    let pool = prop_pool();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::default();
    for _ in 0..trials {
        let l = random_formula(&mut rng, &pool, 1);
        let r = random_formula(&mut rng, &pool, 1);
        let iff = Formula::iff(l.clone(), r.clone());
        let e = row(
            random_polarity(&mut rng),
            planted(&mut rng, &pool, &iff),
            random_output(&mut rng, &pool),
        );
        let dir = if rng.gen_bool(0.5) {
            Direction::Ltr
        } else {
            Direction::Rtl
        };
        let from = if dir == Direction::Ltr { &l } else { &r };
        let t = row(
            random_polarity(&mut rng),
            planted(&mut rng, &pool, from),
            random_output(&mut rng, &pool),
        );
        let ep = find_formula(&e.formula, &iff);
        let tp = find_formula(&t.formula, from);
        let d = derive_iffrepl(&e, &ep, &t, &tp, dir, &MSubst::new()).map_err(|e| e.to_string())?;
        tally.check(&world, &[&e, &t], &d)?;
    }
    live_enough(&tally, trials)
}

/// Path to the first occurrence of `g`, searching subformulas left to right.
fn find_formula(f: &Formula, g: &Formula) -> Path {
    fn go(f: &Formula, g: &Formula, at: &mut Path) -> bool {
        if f == g {
            return true;
        }
        let children: Vec<&Formula> = match f {
            Formula::And(gs) | Formula::Or(gs) => gs.iter().collect(),
            Formula::Not(h) => vec![h],
            Formula::Implies(a, b) | Formula::Iff(a, b) => vec![a, b],
            _ => vec![],
        };
        for (i, c) in children.into_iter().enumerate() {
            at.push(i + 1);
            if go(c, g, at) {
                return true;
            }
            at.pop();
        }
        false
    }
    let mut at = Vec::new();
    assert!(go(f, g, &mut at), "{g} not in {f}");
    at
}

pub fn splitting(trials: usize, seed: u64) -> Result<usize, String> {
    let world = prop_world();
    let pool = prop_pool();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::default();
    let mut shapes = BTreeSet::new();
    for _ in 0..trials {
        let sub = |rng: &mut ChaCha8Rng| random_formula(rng, &pool, 2);
        let (polarity, f) = match rng.gen_range(0..3) {
            0 => (Polarity::Goal, Formula::implies(sub(&mut rng), sub(&mut rng))),
            1 => (
                Polarity::Goal,
                Formula::Or(vec![sub(&mut rng), sub(&mut rng), sub(&mut rng)]),
            ),
            _ => (Polarity::Assertion, Formula::And(vec![sub(&mut rng), sub(&mut rng)])),
        };
        let r = row(polarity, f, random_output(&mut rng, &pool));
        let pieces = derive_split(&r).ok_or_else(|| format!("{r} does not split"))?;
        shapes.insert(format!("{}{}", form(polarity), pieces.len()));
        for d in &pieces {
            tally.check(&world, &[&r], d)?;
        }
    }
    if shapes.len() != 3 {
        return Err(format!("split shapes not all exercised: {shapes:?}"));
    }
    live_enough(&tally, trials)
}

/// The dual and the orphan-free row allow exactly what their parent allows.
fn same_allowance(world: &World, parent: &Row, d: &Derived) -> Result<(), String> {
    for v in world.assignments() {
        let (before, after) = (
            allows(parent.polarity, &parent.formula, &parent.output, &v),
            allows(d.polarity, &d.formula, &d.output, &v),
        );
        if before != after {
            return Err(format!(
                "{parent} allows {before:?} but {d:?} allows {after:?} at {v:?}"
            ));
        }
    }
    Ok(())
}

pub fn duality(trials: usize, seed: u64) -> Result<usize, String> {
    let world = prop_world();
    let pool = prop_pool();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::default();
    for _ in 0..trials {
        let r = random_row(&mut rng, &pool);
        let d = derive_dualize(&r);
        tally.check(&world, &[&r], &d)?;
        same_allowance(&world, &r, &d)?;
    }
    live_enough(&tally, trials)
}

pub fn orphan_drop(trials: usize, seed: u64) -> Result<usize, String> {
    let world = prop_world();
    let pool = prop_pool();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::default();
    for _ in 0..trials {
        let f = random_formula(&mut rng, &pool, 3);
        let r = row(random_polarity(&mut rng), f, Some(LTerm::meta("Z", Sort::Expr)));
        let d = derive_orphan(&r).ok_or_else(|| format!("{r} has no orphaned output"))?;
        if d.output.is_some() {
            return Err(format!("{d:?} kept its output"));
        }
        tally.check(&world, &[&r], &d)?;
        same_allowance(&world, &r, &d)?;
        let ground = row(r.polarity, r.formula.clone(), Some(konst("o1")));
        if derive_orphan(&ground).is_some() {
            return Err(format!("ground output of {ground} dropped"));
        }
    }
    live_enough(&tally, trials)
}

/// Every rule, in order, with the name the acceptance report uses.
pub fn all_rules(trials: usize) -> Vec<(&'static str, Result<usize, String>)> {
    vec![
        ("resolution", resolution(trials, 1)),
        ("equality replacement", equality_replacement(trials, 2)),
        ("equivalence replacement", equivalence_replacement(trials, 3)),
        ("splitting", splitting(trials, 4)),
        ("duality", duality(trials, 5)),
        ("orphan drop", orphan_drop(trials, 6)),
    ]
}
