//! Strategies shared by the property suites.

#![allow(dead_code)]

pub mod ground;

use proptest::prelude::*;
use proptest::sample::select;

use unisynth::corpus::Sampler;
use unisynth::{Expr, Subst};

pub const VARS: [&str; 4] = ["W", "X", "Y", "Z"];
pub const CONSTS: [&str; 3] = ["a", "b", "c"];

pub fn atom() -> impl Strategy<Value = Expr> {
    prop_oneof![
        3 => select(VARS.to_vec()).prop_map(Expr::var),
        2 => select(CONSTS.to_vec()).prop_map(Expr::constant),
    ]
}

/// Expressions of depth at most 4 over four variables and three constants.
pub fn expr() -> impl Strategy<Value = Expr> {
    atom().prop_recursive(4, 24, 2, |inner| {
        (inner.clone(), inner).prop_map(|(l, r)| Expr::cons(l, r))
    })
}

/// Proper substitutions, idempotent or not.
pub fn proper_subst() -> impl Strategy<Value = Subst> {
    prop::collection::btree_map(select(VARS.to_vec()).prop_map(String::from), expr(), 0..=3)
        .prop_map(|m| Subst::make(m).expect("distinct variables"))
}

/// Any substitution; failure shows up about one time in ten.
pub fn subst() -> impl Strategy<Value = Subst> {
    prop_oneof![9 => proper_subst(), 1 => Just(Subst::bot())]
}

/// Proper idempotent environments drawn like the random corpus.
pub fn idem_env() -> impl Strategy<Value = Subst> {
    any::<u64>().prop_map(|seed| Sampler::new(seed).idempotent_env())
}

/// Random corpus triples: a proper idempotent environment and two
/// expressions.
pub fn triple() -> impl Strategy<Value = (Subst, Expr, Expr)> {
    any::<u64>().prop_map(|seed| Sampler::new(seed).triple())
}
