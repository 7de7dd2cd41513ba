//! Every lemma of the bundled theories is checked on random ground
//! instances. Instances where a symbol is undefined (for example `left` of
//! an atom) are skipped; each lemma must also see enough instances where
//! its hypothesis holds, so vacuous passes are caught.

use std::collections::BTreeMap;

use rand::Rng;
use unisynth::bundled;
use unisynth::corpus::Sampler;
use unisynth::engine::Theory;
use unisynth::logic::{meta_sorts, EvalError, Evaluator, Formula};
use unisynth::unify::reference_unify;
use unisynth::value::{Sort, Value};
use unisynth::wf::RelRegistry;
use unisynth::{Expr, Subst};

const SAMPLES: usize = 4000;
const MIN_NONVACUOUS: usize = 20;

fn random_value(s: &mut Sampler, sort: Sort, bound: &BTreeMap<String, Value>) -> Value {
    // Reusing a value of the same sort makes equalities among arguments
    // likely enough to exercise hypotheses such as `E1 = E2`.
    let same: Vec<&Value> = bound.values().filter(|v| v.sort() == sort).collect();
    if !same.is_empty() && s.rng().gen_bool(0.2) {
        let i = s.rng().gen_range(0..same.len());
        return same[i].clone();
    }
    match sort {
        Sort::Expr => Value::Expr(s.expr()),
        Sort::Subst => {
            let r: f64 = s.rng().gen();
            if r < 0.08 {
                Value::Subst(Subst::bot())
            } else if r < 0.2 {
                let e1 = s.expr();
                let e2 = s.expr();
                Value::Subst(reference_unify(&Subst::empty(), &e1, &e2))
            } else {
                Value::Subst(s.idempotent_env())
            }
        }
        Sort::VarSet => Value::Set(s.expr().vars()),
        Sort::Nat => Value::Nat(s.rng().gen_range(0..6)),
        other => panic!("no generator for sort {}", other.name()),
    }
}

fn expr(b: &BTreeMap<String, Value>, k: &str) -> Expr {
    b[k].as_expr().unwrap().clone()
}

fn subst(b: &BTreeMap<String, Value>, k: &str) -> Subst {
    b[k].as_subst().unwrap().clone()
}

fn unify_parts(b: &BTreeMap<String, Value>, env: &str, part: fn(&Expr) -> Option<Expr>) -> Option<Subst> {
    let l1 = part(&expr(b, "E1"))?;
    let l2 = part(&expr(b, "E2"))?;
    let env = subst(b, env);
    env.is_idempotent().then(|| reference_unify(&env, &l1, &l2))
}

fn left(e: &Expr) -> Option<Expr> {
    e.left().ok().cloned()
}

fn right(e: &Expr) -> Option<Expr> {
    e.right().ok().cloned()
}

/// Bindings that depend on others, chosen so the hypothesis can hold.
fn guide(name: &str, b: &mut BTreeMap<String, Value>, s: &mut Sampler) {
    let coin = s.rng().gen_bool(0.6);
    let unify_all = |b: &BTreeMap<String, Value>| {
        let env = subst(b, "TH0");
        env.is_idempotent()
            .then(|| reference_unify(&env, &expr(b, "E1"), &expr(b, "E2")))
    };
    match name {
        "mgiu-def" | "mgiu-sym" | "mgiu-instance" | "mgiu-idem" if coin => {
            if let Some(u) = unify_all(b) {
                b.insert("TH".into(), Value::Subst(u));
            }
        }
        "mgiu-nest" => {
            if let Some(u1) = unify_parts(b, "TH0", left) {
                b.insert("TH1".into(), Value::Subst(u1));
                if let Some(u2) = unify_parts(b, "TH1", right) {
                    b.insert("TH2".into(), Value::Subst(u2));
                }
            }
        }
        "wf-right" => {
            if let Some(u) = unify_parts(b, "TH0", left) {
                b.insert("TH".into(), Value::Subst(u));
            }
        }
        "genid-comp" if coin => {
            let th0 = subst(b, "TH0");
            let th1 = subst(b, "TH1");
            b.insert("TH1".into(), Value::Subst(th0.compose(&th1)));
        }
        "mgi-refl" if coin => {
            b.insert("TH2".into(), b["TH1"].clone());
        }
        "wf-size-first" | "wf-range-vars" if coin => {
            b.insert("TH3".into(), b["TH0"].clone());
            let e2 = b["E2"].clone();
            b.insert("E4".into(), e2);
            if s.rng().gen_bool(0.5) {
                if let Some(l) = left(&expr(b, "E1")) {
                    b.insert("E3".into(), Value::Expr(l));
                }
            }
        }
        _ => {}
    }
}

fn hypothesis(f: &Formula) -> Option<&Formula> {
    match f {
        Formula::Implies(a, _) => Some(a),
        _ => None,
    }
}

fn theory_failures(text: &str) -> Vec<String> {
    let theory = Theory::parse(text).expect("theory parses");
    let registry = RelRegistry::default();
    let mut failures = Vec::new();
    'lemmas: for name in &theory.lemma_order {
        let f = &theory.lemmas[name];
        let mut sorts = BTreeMap::new();
        meta_sorts(f, &mut sorts);
        let mut s = Sampler::new(name.bytes().map(u64::from).sum());
        let (mut defined, mut nonvacuous) = (0, 0);
        for _ in 0..SAMPLES {
            let mut b = BTreeMap::new();
            for (m, sort) in &sorts {
                let v = random_value(&mut s, *sort, &b);
                b.insert(m.clone(), v);
            }
            guide(name, &mut b, &mut s);
            let ev = Evaluator {
                bindings: &b,
                registry: &registry,
            };
            match ev.holds(f) {
                Ok(true) => {}
                Ok(false) => {
                    failures.push(format!("{name} fails at {b:?}"));
                    continue 'lemmas;
                }
                Err(EvalError::Undefined(_)) => continue,
                Err(e) => panic!("{name}: {e}"),
            }
            defined += 1;
            let live = match hypothesis(f) {
                Some(h) => matches!(ev.holds(h), Ok(true)),
                None => true,
            };
            if live {
                nonvacuous += 1;
            }
        }
        assert!(defined > 0, "{name}: no defined instance");
        if nonvacuous < MIN_NONVACUOUS {
            failures.push(format!("{name}: only {nonvacuous} instances satisfy the hypothesis"));
        }
    }
    failures
}

fn check_theory(text: &str) {
    let failures = theory_failures(text);
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn unify_theory_lemmas_hold() {
    check_theory(bundled::UNIFY_THEORY);
}

#[test]
fn eqcase_theory_lemmas_hold() {
    check_theory(bundled::EQCASE_THEORY);
}

#[test]
fn false_and_vacuous_lemmas_are_reported() {
    let text = "spec f (th0 e1 e2) output TH (mgiu th0 e1 e2 TH)\n\
                lemma wrong (implies (is-var E1) (is-const E1))\n\
                lemma vacuous (implies (and (is-var E1) (is-const E1)) (is-proper TH))\n";
    let failures = theory_failures(text);
    assert_eq!(failures.len(), 2, "{failures:?}");
    assert!(failures[0].starts_with("wrong fails"));
    assert!(failures[1].starts_with("vacuous: only 0"));
}
