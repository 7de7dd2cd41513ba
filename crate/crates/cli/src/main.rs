//! `unisynth`: unification, mgiu checking, derivation replay and search,
//! and interpretation of extracted programs.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use unisynth::corpus::exhaustive_triples;
use unisynth::engine::{replay_partial, search, Script, SearchConfig, Theory};
use unisynth::program::{interpret, InterpretOptions, ProgramDef};
use unisynth::unify::{mgiu_check, oracle_unify, reference_unify_fueled, UnifyError, DEFAULT_FUEL};
use unisynth::value::{Sort, Value};
use unisynth::wf::{RelRegistry, U_REL};
use unisynth::{bundled, parse_expr, parse_subst, Subst};

const OK: u8 = 0;
const NEGATIVE: u8 = 1;
const USAGE: u8 = 2;
const INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "unisynth", version, about = "Synthesized unification and its derivation")]
struct Cli {
    /// Print machine-readable JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Unify two expressions in an environment with the reference algorithm.
    Unify {
        #[arg(long, default_value = "{}")]
        env: String,
        e1: String,
        e2: String,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
    },
    /// Check the four mgiu conjuncts for a candidate substitution.
    CheckMgiu {
        #[arg(long, default_value = "{}")]
        env: String,
        e1: String,
        e2: String,
        candidate: String,
    },
    /// Replay a derivation script and extract its program.
    Replay {
        /// Script file; the bundled unification derivation when omitted.
        script: Option<PathBuf>,
        #[command(flatten)]
        theory: TheoryArg,
        /// Write the extracted program here.
        #[arg(long)]
        emit: Option<PathBuf>,
        /// Print every tableau row.
        #[arg(long)]
        trace: bool,
    },
    /// Search for a derivation with bounded best-first saturation.
    Search {
        #[command(flatten)]
        theory: TheoryArg,
        #[arg(long, default_value_t = 200)]
        max_rows: usize,
        /// File of `symbol weight` lines.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated lemma names to keep.
        #[arg(long, value_delimiter = ',')]
        lemmas: Vec<String>,
        #[arg(long)]
        emit: Option<PathBuf>,
        #[arg(long)]
        trace: bool,
    },
    /// Interpret a program file on the given arguments.
    Run {
        program: PathBuf,
        /// Prepended to the arguments when given.
        #[arg(long)]
        env: Option<String>,
        args: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
        #[arg(long)]
        check_decrease: bool,
        /// Relation checked by --check-decrease; program files do not carry one.
        #[arg(long, default_value = U_REL)]
        decrease: String,
    },
    /// Compare the reference algorithm with the oracle on the exhaustive
    /// small universe.
    Selftest,
}

#[derive(Args)]
struct TheoryArg {
    /// Theory file; the bundled unification theory when omitted.
    #[arg(long)]
    theory: Option<PathBuf>,
}

impl TheoryArg {
    fn load(&self) -> anyhow::Result<Theory> {
        let text = match &self.theory {
            Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            None => bundled::UNIFY_THEORY.to_string(),
        };
        Ok(Theory::parse(&text)?)
    }
}

/// An error carrying its exit status.
struct Failure(u8, anyhow::Error);

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure(USAGE, e.into())
}

fn internal<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure(INTERNAL, e.into())
}

fn subst_text(s: &Subst) -> String {
    s.to_string()
}

fn write_program(p: &ProgramDef, emit: &Option<PathBuf>) -> Result<(), Failure> {
    if let Some(path) = emit {
        fs::write(path, p.emit())
            .with_context(|| format!("writing {}", path.display()))
            .map_err(usage)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Cmd::Unify { env, e1, e2, fuel } => {
            let env = parse_subst(&env).map_err(usage)?;
            let e1 = parse_expr(&e1).map_err(usage)?;
            let e2 = parse_expr(&e2).map_err(usage)?;
            let s = match reference_unify_fueled(&env, &e1, &e2, fuel) {
                Ok(s) => s,
                Err(e @ UnifyError::FuelExhausted(_)) => return Err(internal(e)),
            };
            if cli.json {
                println!("{}", json!({ "result": subst_text(&s), "proper": s.is_proper() }));
            } else {
                println!("{s}");
            }
            Ok(if s.is_proper() { OK } else { NEGATIVE })
        }
        Cmd::CheckMgiu { env, e1, e2, candidate } => {
            let env = parse_subst(&env).map_err(usage)?;
            if !env.is_proper() || !env.is_idempotent() {
                return Err(usage(anyhow::anyhow!("environment {env} is not proper and idempotent")));
            }
            let e1 = parse_expr(&e1).map_err(usage)?;
            let e2 = parse_expr(&e2).map_err(usage)?;
            let s = parse_subst(&candidate).map_err(usage)?;
            let r = mgiu_check(&env, &e1, &e2, &s);
            if cli.json {
                println!(
                    "{}",
                    json!({
                        "unifier_ok": r.unifier_ok,
                        "extension_ok": r.extension_ok,
                        "most_general_ok": r.most_general_ok,
                        "reduce_ok": r.reduce_ok,
                        "oracle": subst_text(&r.oracle_used),
                        "verdict": r.verdict(),
                    })
                );
            } else {
                println!("unifier_ok={}", r.unifier_ok);
                println!("extension_ok={}", r.extension_ok);
                println!("most_general_ok={}", r.most_general_ok);
                println!("reduce_ok={}", r.reduce_ok);
                println!("verdict={}", r.verdict());
            }
            Ok(if r.verdict() { OK } else { NEGATIVE })
        }
        Cmd::Replay {
            script,
            theory,
            emit,
            trace,
        } => {
            let th = theory.load().map_err(usage)?;
            let text = match &script {
                Some(p) => fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))
                    .map_err(usage)?,
                None => bundled::UNIFY_DERIVATION.to_string(),
            };
            let sc = Script::parse(&text, &th.signature).map_err(usage)?;
            let r = match replay_partial(&th, &sc) {
                Ok(r) => r,
                Err((e, rows)) => {
                    if trace {
                        for line in rows {
                            println!("{line}");
                        }
                    }
                    return Err(internal(e));
                }
            };
            write_program(&r.program, &emit)?;
            if cli.json {
                let mut v = json!({ "program": r.program.emit(), "rows": r.tableau.rows.len() });
                if trace {
                    v["trace"] = json!(r.trace());
                }
                println!("{v}");
            } else {
                if trace {
                    for line in r.trace() {
                        println!("{line}");
                    }
                }
                print!("{}", r.program.emit());
            }
            Ok(OK)
        }
        Cmd::Search {
            theory,
            max_rows,
            weights,
            seed,
            lemmas,
            emit,
            trace,
        } => {
            let mut th = theory.load().map_err(usage)?;
            if !lemmas.is_empty() {
                for l in &lemmas {
                    if !th.lemmas.contains_key(l) {
                        return Err(usage(anyhow::anyhow!("unknown lemma {l}")));
                    }
                }
                let names: Vec<&str> = lemmas.iter().map(String::as_str).collect();
                th = th.restricted(&names);
            }
            let mut config = SearchConfig {
                max_rows,
                seed,
                ..SearchConfig::default()
            };
            if let Some(p) = weights {
                let text = fs::read_to_string(&p)
                    .with_context(|| format!("reading {}", p.display()))
                    .map_err(usage)?;
                config.weights = SearchConfig::parse_weights(&text).map_err(|e| usage(anyhow::anyhow!(e)))?;
            }
            let out = search(&th, &config).map_err(internal)?;
            if trace && !cli.json {
                for row in &out.tableau.rows {
                    println!("{row}");
                }
            }
            let rows = out.tableau.rows.len();
            match out.program {
                Some(p) => {
                    write_program(&p, &emit)?;
                    if cli.json {
                        println!("{}", json!({ "found": true, "program": p.emit(), "rows": rows }));
                    } else {
                        print!("{}", p.emit());
                    }
                    Ok(OK)
                }
                None => {
                    if cli.json {
                        println!("{}", json!({ "found": false, "rows": rows }));
                    } else {
                        println!("no derivation found within {max_rows} rows");
                    }
                    Ok(NEGATIVE)
                }
            }
        }
        Cmd::Run {
            program,
            env,
            args,
            fuel,
            check_decrease,
            decrease,
        } => {
            let text = fs::read_to_string(&program)
                .with_context(|| format!("reading {}", program.display()))
                .map_err(usage)?;
            let mut p = ProgramDef::parse(&text).map_err(usage)?;
            let registry = RelRegistry::default();
            if check_decrease {
                registry.get(&decrease).map_err(usage)?;
                p.decrease = Some(decrease);
            }
            let texts: Vec<String> = env.into_iter().chain(args).collect();
            if texts.len() != p.params.len() {
                return Err(usage(anyhow::anyhow!(
                    "{} expects {} arguments, got {}",
                    p.name,
                    p.params.len(),
                    texts.len()
                )));
            }
            let mut vals = Vec::new();
            for ((name, sort), t) in p.params.iter().zip(&texts) {
                vals.push(
                    parse_value(*sort, t)
                        .with_context(|| format!("argument {name}"))
                        .map_err(usage)?,
                );
            }
            let opts = InterpretOptions {
                fuel,
                check_decrease,
                registry: &registry,
            };
            let v = interpret(&p, &vals, &opts).map_err(internal)?;
            if cli.json {
                println!("{}", json!({ "result": v.to_string() }));
            } else {
                println!("{v}");
            }
            let negative = matches!(&v, Value::Subst(s) if !s.is_proper());
            Ok(if negative { NEGATIVE } else { OK })
        }
        Cmd::Selftest => {
            let triples = exhaustive_triples();
            let mut disagreements = 0usize;
            for (env, e1, e2) in &triples {
                let r = reference_unify_fueled(env, e1, e2, DEFAULT_FUEL).map_err(internal)?;
                let o = oracle_unify(env, e1, e2);
                let agree = match (r.is_proper(), o.is_proper()) {
                    (true, true) => r.compose(&o) == o && o.compose(&r) == r,
                    (a, b) => a == b,
                };
                if !agree {
                    disagreements += 1;
                    if !cli.json {
                        println!("disagreement on <{env}, {e1}, {e2}>: reference {r}, oracle {o}");
                    }
                }
            }
            if cli.json {
                println!("{}", json!({ "cases": triples.len(), "disagreements": disagreements }));
            } else {
                println!("{} cases, {} disagreements", triples.len(), disagreements);
            }
            Ok(if disagreements == 0 { OK } else { NEGATIVE })
        }
    }
}

fn parse_value(sort: Sort, text: &str) -> anyhow::Result<Value> {
    Ok(match sort {
        Sort::Subst => Value::Subst(parse_subst(text)?),
        Sort::Expr => Value::Expr(parse_expr(text)?),
        other => anyhow::bail!("cannot read a {} argument from {text}", other.name()),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
