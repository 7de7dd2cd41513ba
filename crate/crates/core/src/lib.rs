//! Deductive-tableau synthesis of an environment-carrying unification
//! algorithm.
//!
//! The crate is layered bottom-up:
//!
//! - [`term`]: symbolic expressions built from constants, variables and cons.
//! - [`subst`]: substitutions, composition and the generality relations.
//! - [`unify`]: the synthesized algorithm, a textbook oracle and decision
//!   procedures for the unifier relations.
//! - [`value`] and [`wf`]: runtime values and well-founded relation
//!   combinators, including the measure that justifies termination.
//! - [`logic`]: sorted formulas and terms, their unifier and a ground
//!   evaluator.
//! - [`tableau`]: rows, deduction rules, induction and answer extraction.
//! - [`program`]: extracted programs, their interpreter and simplifier.
//! - [`engine`]: theory files, scripted replay and bounded search.
//! - [`corpus`]: exhaustive and random inputs for oracle comparisons.

pub mod corpus;
pub mod engine;
pub mod logic;
pub mod program;
pub mod sexp;
pub mod subst;
pub mod tableau;
pub mod term;
pub mod unify;
pub mod value;
pub mod wf;

/// Theory, derivation script and expected program shipped with the crate.
pub mod bundled {
    pub const UNIFY_THEORY: &str = include_str!("../data/unify.thy");
    pub const UNIFY_DERIVATION: &str = include_str!("../data/unify.derivation");
    pub const UNIFY_GOLDEN: &str = include_str!("../data/unify.golden");
    pub const EQCASE_THEORY: &str = include_str!("../data/eqcase.thy");
}

pub use subst::{parse_subst, Subst};
pub use term::{parse_expr, Expr, VarSet};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/expressions.md")]
    mod expressions {}
    #[doc = include_str!("../../../book/src/substitutions.md")]
    mod substitutions {}
    #[doc = include_str!("../../../book/src/unifiers.md")]
    mod unifiers {}
    #[doc = include_str!("../../../book/src/tableau.md")]
    mod tableau {}
    #[doc = include_str!("../../../book/src/induction.md")]
    mod induction {}
    #[doc = include_str!("../../../book/src/derivation.md")]
    mod derivation {}
}
