//! Properties of the synthesized unification algorithm, checked against a
//! textbook unifier written here.

mod common;

use proptest::prelude::*;
use unisynth::unify::{mgiu_check, oracle_unify, reference_unify};
use unisynth::{Expr, Subst};

/// Robinson unification with an occurs check on a binding list, resolved
/// to an idempotent substitution at the end.
fn textbook_mgu(e1: &Expr, e2: &Expr) -> Option<Subst> {
    fn walk(b: &[(String, Expr)], e: &Expr) -> Expr {
        match e {
            Expr::Var(x) => match b.iter().find(|(y, _)| y == x) {
                Some((_, t)) => walk(b, t),
                None => e.clone(),
            },
            Expr::Const(_) => e.clone(),
            Expr::Cons(l, r) => Expr::cons(walk(b, l), walk(b, r)),
        }
    }
    let mut b: Vec<(String, Expr)> = Vec::new();
    let mut work = vec![(e1.clone(), e2.clone())];
    while let Some((a, c)) = work.pop() {
        let (a, c) = (walk(&b, &a), walk(&b, &c));
        match (a, c) {
            (a, c) if a == c => {}
            (Expr::Var(x), t) | (t, Expr::Var(x)) => {
                if t.vars().contains(&x) {
                    return None;
                }
                b.push((x, t));
            }
            (Expr::Cons(l1, r1), Expr::Cons(l2, r2)) => {
                work.push((*r1, *r2));
                work.push((*l1, *l2));
            }
            _ => return None,
        }
    }
    let pairs: Vec<(String, Expr)> = b.iter().map(|(x, _)| (x.clone(), walk(&b, &Expr::var(x)))).collect();
    Some(Subst::make(pairs).expect("each variable is bound once"))
}

/// The most general idempotent extension of `env` unifying the pair.
fn textbook_unify(env: &Subst, e1: &Expr, e2: &Expr) -> Subst {
    match textbook_mgu(&env.apply(e1), &env.apply(e2)) {
        Some(m) => env.compose(&m),
        None => Subst::bot(),
    }
}

fn mutually_general(s1: &Subst, s2: &Subst) -> bool {
    s1.more_general(s2) && s2.more_general(s1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn reference_agrees_with_textbook((env, e1, e2) in common::triple()) {
        let r = reference_unify(&env, &e1, &e2);
        let t = textbook_unify(&env, &e1, &e2);
        prop_assert_eq!(r.is_proper(), t.is_proper(), "{} {} {}", env, e1, e2);
        if r.is_proper() {
            prop_assert!(mutually_general(&r, &t), "{} vs {}", r, t);
        }
    }

    #[test]
    fn library_oracle_agrees_with_textbook((env, e1, e2) in common::triple()) {
        let o = oracle_unify(&env, &e1, &e2);
        let t = textbook_unify(&env, &e1, &e2);
        prop_assert_eq!(o.is_proper(), t.is_proper());
        if o.is_proper() {
            prop_assert!(mutually_general(&o, &t));
        }
    }

    #[test]
    fn output_satisfies_mgiu((env, e1, e2) in common::triple()) {
        let s = reference_unify(&env, &e1, &e2);
        let r = mgiu_check(&env, &e1, &e2, &s);
        prop_assert!(r.verdict(), "{:?}", r);
        prop_assert!(s.is_idempotent());
    }

    #[test]
    fn argument_order_is_irrelevant((env, e1, e2) in common::triple()) {
        let s = reference_unify(&env, &e1, &e2);
        let t = reference_unify(&env, &e2, &e1);
        prop_assert_eq!(s.is_proper(), t.is_proper());
        if s.is_proper() {
            prop_assert!(mutually_general(&s, &t));
        }
    }

    #[test]
    fn environment_may_be_applied_first((env, e1, e2) in common::triple()) {
        let s = reference_unify(&env, &e1, &e2);
        let t = reference_unify(&env, &env.apply(&e1), &env.apply(&e2));
        prop_assert_eq!(s.is_proper(), t.is_proper());
        if s.is_proper() {
            prop_assert!(mutually_general(&s, &t), "{} vs {}", s, t);
        }
    }

    #[test]
    fn equal_arguments_return_the_environment(env in common::idem_env(), e in common::expr()) {
        prop_assert_eq!(reference_unify(&env, &e, &e), env);
    }

    #[test]
    fn failure_environment_is_absorbing(e1 in common::expr(), e2 in common::expr()) {
        prop_assert_eq!(reference_unify(&Subst::bot(), &e1, &e2), Subst::bot());
    }
}

#[test]
fn occurs_check_fails() {
    let x = Expr::var("X");
    let e = Expr::cons(x.clone(), Expr::constant("a"));
    assert_eq!(reference_unify(&Subst::empty(), &x, &e), Subst::bot());
    assert_eq!(textbook_unify(&Subst::empty(), &x, &e), Subst::bot());
}

#[test]
fn environment_example() {
    let env: Subst = "{X -> Y}".parse().unwrap();
    let expected: Subst = "{X -> Z, Y -> Z}".parse().unwrap();
    let s = reference_unify(&env, &Expr::var("Y"), &Expr::var("Z"));
    assert_eq!(s, expected);
    assert!(mgiu_check(&env, &Expr::var("Y"), &Expr::var("Z"), &s).verdict());
    let weak: Subst = "{Y -> Z}".parse().unwrap();
    let r = mgiu_check(&env, &Expr::var("Y"), &Expr::var("Z"), &weak);
    assert!(!r.extension_ok);
}

/// Guards the properties above against a corpus where nearly every pair
/// fails to unify.
#[test]
fn random_corpus_mixes_outcomes() {
    let mut s = unisynth::corpus::Sampler::new(5);
    let n = 2000;
    let proper = (0..n)
        .filter(|_| {
            let (env, e1, e2) = s.triple();
            reference_unify(&env, &e1, &e2).is_proper()
        })
        .count();
    assert!(proper * 10 >= n && proper * 10 <= 9 * n, "{proper} of {n} unify");
}
