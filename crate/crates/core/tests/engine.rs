//! Theory and script parsing, scripted replay and the bounded search.

use unisynth::bundled;
use unisynth::corpus::Sampler;
use unisynth::engine::{replay, replay_partial, search, EngineError, Script, SearchConfig, Theory};
use unisynth::program::{interpret, InterpretOptions, ProgramDef};
use unisynth::tableau::{Polarity, Rule};
use unisynth::unify::mgiu_check;
use unisynth::value::Value;
use unisynth::wf::RelRegistry;

/// Choosing an expression equal to the argument.
const PICK: &str = "spec pick (e) output E (= E:expr e)\nlemma eq-refl-expr (= E:expr E)\n";

fn unify_theory() -> Theory {
    Theory::parse(bundled::UNIFY_THEORY).unwrap()
}

fn eqcase_theory() -> Theory {
    Theory::parse(bundled::EQCASE_THEORY).unwrap()
}

#[test]
fn bundled_theories_parse() {
    let t = unify_theory();
    assert_eq!(t.spec.name, "unify");
    assert_eq!(
        t.spec.params.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
        ["th0", "e1", "e2"]
    );
    assert!(t.registry.contains("u-rel"));
    assert_eq!(t.lemma_order.len(), t.lemmas.len());
    let e = eqcase_theory();
    assert_eq!(e.spec.params.len(), 2);
    assert_eq!(
        e.lemma_order,
        [
            "mgiu-def",
            "idem-genid",
            "mgi-refl",
            "eq-refl",
            "eq-refl-expr",
            "reduce-refl"
        ]
    );
}

#[test]
fn theory_errors_carry_line_numbers() {
    let err = |text: &str| match Theory::parse(text) {
        Err(EngineError::Theory { line, msg }) => (line, msg),
        other => panic!("expected a theory error, got {other:?}"),
    };
    assert_eq!(err("lemma a (is-var E)\n").1, "missing spec");
    let (line, msg) = err("spec f (x) output X (= X:expr x)\n\nlemma a (= X x)\nlemma a (= X x)\n");
    assert_eq!(line, 4);
    assert!(msg.contains("duplicate lemma a"), "{msg}");
    assert_eq!(err("spec f (x y) output X (= X:expr x)\n").1, "cannot infer sort of y");
    assert_eq!(err("\nfrobnicate\n").0, 2);
}

#[test]
fn one_step_script_extracts_the_argument() {
    let theory = Theory::parse(PICK).unwrap();
    let script = Script::parse("assert eq-refl-expr\nresolve 1 0 2 0\nextract\n", &theory.signature).unwrap();
    let r = replay(&theory, &script).unwrap();
    assert_eq!(
        r.program.emit().split_whitespace().collect::<Vec<_>>().join(" "),
        "(define (pick e) e)"
    );
    assert_eq!(r.step_rows, vec![vec![2], vec![3], vec![]]);
    let last = r.tableau.row(3).unwrap();
    assert_eq!(last.polarity, Polarity::Goal);
    assert!(last.is_final());
    assert_eq!(last.justification.rule, Rule::Resolve);
    assert_eq!(r.program.decrease, None);
}

#[test]
fn failing_step_reports_its_index_and_line() {
    let theory = Theory::parse(PICK).unwrap();
    let text = "; comment\nassert eq-refl-expr\n\nresolve 1 0 2 1\nextract\n";
    let script = Script::parse(text, &theory.signature).unwrap();
    match replay_partial(&theory, &script) {
        Err((EngineError::StepFailed { index, line, .. }, rows)) => {
            assert_eq!((index, line), (2, 4));
            assert_eq!(rows.len(), 2);
        }
        other => panic!("expected a failed step, got {:?}", other.map(|r| r.trace())),
    }
    let script = Script::parse("assert eq-refl-expr\nextract\n", &theory.signature).unwrap();
    assert!(matches!(
        replay(&theory, &script),
        Err(EngineError::StepFailed { index: 2, .. })
    ));
    let script = Script::parse("assert eq-refl-expr\n", &theory.signature).unwrap();
    assert_eq!(replay(&theory, &script).err(), Some(EngineError::NoFinalRow));
}

#[test]
fn script_syntax_errors_carry_line_numbers() {
    let sig = Theory::parse(PICK).unwrap().signature;
    let line = |text: &str| match Script::parse(text, &sig) {
        Err(EngineError::Script { line, .. }) => line,
        other => panic!("expected a script error, got {other:?}"),
    };
    assert_eq!(line("assert eq-refl-expr\nfrob 1\n"), 2);
    assert_eq!(line("resolve 1 0 2\n"), 1);
    assert_eq!(line("\n\neqrepl 1 0 2 0 sideways\n"), 3);
    assert_eq!(line("resolve 1 0.x 2 0\n"), 1);
}

#[test]
fn labels_name_the_rows_a_step_creates() {
    let theory = unify_theory();
    let text = "init: split 1\nfirst: dualize @init/1\nagain: dualize @first\nextract\n";
    let script = Script::parse(text, &theory.signature).unwrap();
    let (err, rows) = replay_partial(&theory, &script).unwrap_err();
    assert!(matches!(err, EngineError::StepFailed { index: 4, .. }), "{err}");
    assert_eq!(rows.len(), 5);
    let bad = Script::parse("init: split 1\ndualize @init\n", &theory.signature).unwrap();
    let (err, _) = replay_partial(&theory, &bad).unwrap_err();
    assert!(err.to_string().contains("select one with @init/k"), "{err}");
}

#[test]
fn bundled_replay_is_deterministic_and_verified() {
    let theory = unify_theory();
    let script = Script::parse(bundled::UNIFY_DERIVATION, &theory.signature).unwrap();
    let a = replay(&theory, &script).unwrap();
    let b = replay(&theory, &script).unwrap();
    assert_eq!(a.trace(), b.trace());
    assert_eq!(a.program, b.program);
    a.tableau.verify_all().unwrap();
    assert_eq!(a.program.decrease.as_deref(), Some("u-rel"));
    let ih = a
        .tableau
        .rows
        .iter()
        .filter(|r| matches!(r.justification.rule, Rule::Induct(_)))
        .count();
    assert_eq!(ih, 1);
}

#[test]
fn search_with_no_rows_returns_no_program() {
    let config = SearchConfig {
        max_rows: 0,
        ..SearchConfig::default()
    };
    let out = search(&eqcase_theory(), &config).unwrap();
    assert!(out.program.is_none());
    assert_eq!(out.tableau.rows.len(), 1);
}

#[test]
fn search_finds_the_one_step_program() {
    let out = search(&Theory::parse(PICK).unwrap(), &SearchConfig::default()).unwrap();
    assert_eq!(
        out.program
            .unwrap()
            .emit()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" "),
        "(define (pick e) e)"
    );
    out.tableau.verify_all().unwrap();
}

fn run_eq(p: &ProgramDef, env: &unisynth::Subst, e: &unisynth::Expr) -> unisynth::Subst {
    let registry = RelRegistry::default();
    let opts = InterpretOptions {
        fuel: 1000,
        check_decrease: false,
        registry: &registry,
    };
    match interpret(p, &[Value::Subst(env.clone()), Value::Expr(e.clone())], &opts).unwrap() {
        Value::Subst(s) => s,
        other => panic!("unify-eq returned {other}"),
    }
}

#[test]
fn search_finds_the_equal_expression_program() {
    let out = search(&eqcase_theory(), &SearchConfig::default()).unwrap();
    assert!(out.tableau.rows.len() <= 200, "{} rows", out.tableau.rows.len());
    out.tableau.verify_all().unwrap();
    let p = out.program.expect("a program within the row budget");
    assert_eq!(
        p.emit().split_whitespace().collect::<Vec<_>>().join(" "),
        "(define (unify-eq th0 e) th0)"
    );
    let mut s = Sampler::new(8);
    for _ in 0..1000 {
        let (env, e, _) = s.triple();
        let out = run_eq(&p, &env, &e);
        let report = mgiu_check(&env, &e, &e, &out);
        assert!(report.verdict(), "{env} {e}: {report:?}");
    }
}

#[test]
fn search_is_deterministic_and_respects_limits() {
    let theory = eqcase_theory();
    let a = search(&theory, &SearchConfig::default()).unwrap();
    let b = search(&theory, &SearchConfig::default()).unwrap();
    let rows = |o: &unisynth::engine::SearchOutcome| o.tableau.rows.iter().map(|r| r.to_string()).collect::<Vec<_>>();
    assert_eq!(rows(&a), rows(&b));
    let tight = SearchConfig {
        max_rows: 20,
        ..SearchConfig::default()
    };
    let out = search(&theory, &tight).unwrap();
    assert!(out.program.is_none());
    assert!(out.tableau.rows.len() <= 20);
    let light = SearchConfig {
        max_weight: 3,
        ..SearchConfig::default()
    };
    assert!(search(&theory, &light).unwrap().program.is_none());
}

#[test]
fn shuffled_ties_and_reweighting_still_terminate() {
    let theory = eqcase_theory();
    let mut weights = std::collections::BTreeMap::new();
    weights.insert("mgi".to_string(), 3);
    for config in [
        SearchConfig {
            seed: 7,
            ..SearchConfig::default()
        },
        SearchConfig {
            weights,
            ..SearchConfig::default()
        },
    ] {
        let out = search(&theory, &config).unwrap();
        assert!(out.tableau.rows.len() <= config.max_rows);
        out.tableau.verify_all().unwrap();
        if let Some(p) = out.program {
            assert_eq!(
                p.emit().split_whitespace().collect::<Vec<_>>().join(" "),
                "(define (unify-eq th0 e) th0)"
            );
        }
    }
}

#[test]
fn weight_files_parse() {
    let w = SearchConfig::parse_weights("; weights\nmgi 3\napply 2 ; heavier\n").unwrap();
    assert_eq!(w.get("mgi"), Some(&3));
    assert_eq!(w.get("apply"), Some(&2));
    assert!(SearchConfig::parse_weights("mgi\n").unwrap_err().starts_with("line 1"));
    assert!(SearchConfig::parse_weights("\nmgi 0\n")
        .unwrap_err()
        .starts_with("line 2"));
}
