//! The environment-carrying unification algorithm, an independent textbook
//! oracle, and decision procedures for the unifier, reduce, mgi and mgiu
//! relations.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::subst::Subst;
use crate::term::{encode_tuple, occurs_in, Expr, Occurrence, VarSet};

/// Default bound on recursive calls of [`reference_unify_fueled`].
pub const DEFAULT_FUEL: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnifyError {
    #[error("fuel exhausted after {0} recursive calls")]
    FuelExhausted(u64),
}

/// The four conjuncts of the mgiu relation, plus the oracle answer used to
/// decide the mgi conjunct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MgiuReport {
    pub unifier_ok: bool,
    pub extension_ok: bool,
    pub reduce_ok: bool,
    pub most_general_ok: bool,
    pub oracle_used: Subst,
}

impl MgiuReport {
    pub fn verdict(&self) -> bool {
        self.unifier_ok && self.extension_ok && self.reduce_ok && self.most_general_ok
    }
}

/// Runs the extracted decision tree. Terminates for idempotent environments;
/// use [`reference_unify_fueled`] when that is not guaranteed.
pub fn reference_unify(env: &Subst, e1: &Expr, e2: &Expr) -> Subst {
    reference_unify_fueled(env, e1, e2, u64::MAX).expect("unbounded fuel")
}

/// Same as [`reference_unify`] but fails after `fuel` recursive calls.
pub fn reference_unify_fueled(env: &Subst, e1: &Expr, e2: &Expr, fuel: u64) -> Result<Subst, UnifyError> {
    let mut left = fuel;
    unify_tree(env, e1, e2, &mut left, fuel)
}

fn call(env: &Subst, e1: &Expr, e2: &Expr, fuel: &mut u64, total: u64) -> Result<Subst, UnifyError> {
    if *fuel == 0 {
        return Err(UnifyError::FuelExhausted(total));
    }
    *fuel -= 1;
    unify_tree(env, e1, e2, fuel, total)
}

fn unify_tree(th0: &Subst, e1: &Expr, e2: &Expr, fuel: &mut u64, total: u64) -> Result<Subst, UnifyError> {
    if !th0.is_proper() {
        return Ok(Subst::bot());
    }
    if occurs_in(e1, e2, Occurrence::Proper) {
        return Ok(Subst::bot());
    }
    if e1 == e2 {
        return Ok(th0.clone());
    }
    match e1 {
        Expr::Const(_) => {
            if e2.is_const() {
                Ok(Subst::bot())
            } else if e2.is_var() {
                call(th0, e2, e1, fuel, total)
            } else {
                Ok(Subst::bot())
            }
        }
        Expr::Var(x) => {
            if th0.misses(e2) && th0.misses(e1) {
                Ok(th0.compose(&Subst::replacement(x, e2)))
            } else {
                call(th0, &th0.apply(e1), &th0.apply(e2), fuel, total)
            }
        }
        Expr::Cons(l1, r1) => {
            if e2.is_const() {
                Ok(Subst::bot())
            } else if e2.is_var() {
                call(th0, e2, e1, fuel, total)
            } else {
                let (l2, r2) = e2.destructure().expect("non-atomic");
                let th_l = call(th0, l1, l2, fuel, total)?;
                call(&th_l, r1, r2, fuel, total)
            }
        }
    }
}

/// Textbook occurs-check unification of `e1 ⊲ env` and `e2 ⊲ env`, returning
/// `env ⋄ σ` for the idempotent most general unifier σ, or ⊥.
pub fn oracle_unify(env: &Subst, e1: &Expr, e2: &Expr) -> Subst {
    if !env.is_proper() {
        return Subst::bot();
    }
    let a = env.apply(e1);
    let b = env.apply(e2);
    let sigma = match robinson(&a, &b) {
        Some(s) => s,
        None => return Subst::bot(),
    };
    let out = env.compose(&sigma);
    assert!(
        out.is_idempotent() || !env.is_idempotent(),
        "oracle produced a non-idempotent extension of an idempotent environment"
    );
    out
}

/// Worklist unification over a triangular binding store; the solved form is
/// fully resolved at the end.
fn robinson(a: &Expr, b: &Expr) -> Option<Subst> {
    let mut store: BTreeMap<String, Expr> = BTreeMap::new();
    let mut work = vec![(a.clone(), b.clone())];
    while let Some((x, y)) = work.pop() {
        let x = walk(&store, &x);
        let y = walk(&store, &y);
        match (&x, &y) {
            _ if x == y => {}
            (Expr::Var(v), t) | (t, Expr::Var(v)) => {
                if occurs_resolved(&store, v, t) {
                    return None;
                }
                store.insert(v.clone(), t.clone());
            }
            (Expr::Cons(l1, r1), Expr::Cons(l2, r2)) => {
                work.push(((**r1).clone(), (**r2).clone()));
                work.push(((**l1).clone(), (**l2).clone()));
            }
            _ => return None,
        }
    }
    let keys: Vec<String> = store.keys().cloned().collect();
    let solved = keys
        .into_iter()
        .map(|k| {
            let v = resolve(&store, &Expr::Var(k.clone()));
            (k, v)
        })
        .collect::<Vec<_>>();
    Subst::make(solved).ok()
}

fn walk(store: &BTreeMap<String, Expr>, e: &Expr) -> Expr {
    let mut cur = e.clone();
    while let Expr::Var(v) = &cur {
        match store.get(v) {
            Some(next) => cur = next.clone(),
            None => break,
        }
    }
    cur
}

fn resolve(store: &BTreeMap<String, Expr>, e: &Expr) -> Expr {
    match walk(store, e) {
        Expr::Cons(l, r) => Expr::cons(resolve(store, &l), resolve(store, &r)),
        other => other,
    }
}

fn occurs_resolved(store: &BTreeMap<String, Expr>, v: &str, t: &Expr) -> bool {
    match walk(store, t) {
        Expr::Var(w) => w == v,
        Expr::Const(_) => false,
        Expr::Cons(l, r) => occurs_resolved(store, v, &l) || occurs_resolved(store, v, &r),
    }
}

pub fn is_unifier(s: &Subst, e1: &Expr, e2: &Expr) -> bool {
    s.apply(e1) == s.apply(e2)
}

/// `range(s) ⊆ range(env) ∪ v`.
pub fn reduce_holds(env: &Subst, v: &VarSet, s: &Subst) -> bool {
    let mut allowed = env.range();
    allowed.extend(v.iter().cloned());
    s.range().is_subset(&allowed)
}

/// Decides mgi through the oracle. `env` must be idempotent; ⊥ is accepted.
pub fn mgi_decide(env: &Subst, e1: &Expr, e2: &Expr, s: &Subst) -> bool {
    if !env.is_proper() {
        // Only ⊥ extends ⊥, and everything is more general than ⊥.
        return true;
    }
    let star = oracle_unify(env, e1, e2);
    if !star.is_proper() {
        return true;
    }
    s.more_general(&star)
}

/// Checks the four conjuncts of mgiu. `env` must be idempotent.
pub fn mgiu_check(env: &Subst, e1: &Expr, e2: &Expr, s: &Subst) -> MgiuReport {
    let v = env.apply(&encode_tuple(&[e1.clone(), e2.clone()])).vars();
    MgiuReport {
        unifier_ok: is_unifier(s, e1, e2),
        extension_ok: env.more_general(s),
        reduce_ok: reduce_holds(env, &v, s),
        most_general_ok: mgi_decide(env, e1, e2, s),
        oracle_used: oracle_unify(env, e1, e2),
    }
}

/// First witness θ′ refuting mgi directly: a unifier extending `env` that `s`
/// is not more general than.
pub fn mgi_refute_witness(env: &Subst, e1: &Expr, e2: &Expr, s: &Subst, witnesses: &[Subst]) -> Option<Subst> {
    witnesses
        .iter()
        .find(|w| is_unifier(w, e1, e2) && env.more_general(w) && !s.more_general(w))
        .cloned()
}
