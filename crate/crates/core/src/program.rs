//! Extracted applicative programs: representation, an interpreter with fuel
//! and termination-measure checks, a simplifier and a canonical text form.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::logic::{simplify, EvalError, Evaluator, Formula, LTerm, LogicError, Signature};
use crate::sexp::{read_one, SexpError};
use crate::value::{InputTriple, Sort, Value};
use crate::wf::{rel_less, RelRegistry};

/// Default bound on self-calls per interpretation.
pub const DEFAULT_FUEL: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error("fuel exhausted after {0} self-calls")]
    FuelExhausted(u64),
    #[error("self-calls nested deeper than {0}")]
    TooDeep(u64),
    #[error("decrease violated: {child} is not below {parent}")]
    DecreaseViolation { parent: String, child: String },
    #[error("primitive error: {0}")]
    PrimitiveError(String),
    #[error("{0}")]
    Eval(EvalError),
    #[error("expected {expected} arguments, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("program syntax error: {0}")]
    Syntax(String),
    #[error("non-primitive symbol {0} in program body")]
    NonPrimitive(String),
}

impl From<EvalError> for ProgramError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Undefined(m) => ProgramError::PrimitiveError(m),
            other => ProgramError::Eval(other),
        }
    }
}

impl From<LogicError> for ProgramError {
    fn from(e: LogicError) -> Self {
        ProgramError::Syntax(e.to_string())
    }
}

impl From<SexpError> for ProgramError {
    fn from(e: SexpError) -> Self {
        ProgramError::Syntax(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramDef {
    pub name: String,
    pub params: Vec<(String, Sort)>,
    pub body: LTerm,
    /// Name of the relation that must decrease at every self-call.
    pub decrease: Option<String>,
}

const PRIMITIVE_FNS: &[&str] = &["bot", "empty", "left", "right", "apply", "compose", "replace"];
const PRIMITIVE_PREDS: &[&str] = &["is-proper", "is-atom", "is-const", "is-var", "occurs-proper", "misses"];

impl ProgramDef {
    /// Checks that the body uses only primitives, parameters and self-calls.
    pub fn validate(&self) -> Result<(), ProgramError> {
        fn term(p: &ProgramDef, t: &LTerm) -> Result<(), ProgramError> {
            match t {
                LTerm::Meta { name, .. } => Err(ProgramError::NonPrimitive(name.clone())),
                LTerm::Lit(_) => Ok(()),
                LTerm::App { f, args, .. } => {
                    let ok = PRIMITIVE_FNS.contains(&f.as_str())
                        || *f == p.name
                        || (args.is_empty() && p.params.iter().any(|(n, _)| n == f));
                    if !ok {
                        return Err(ProgramError::NonPrimitive(f.clone()));
                    }
                    args.iter().try_for_each(|a| term(p, a))
                }
                LTerm::Cond { test, then, els } => {
                    formula(p, test)?;
                    term(p, then)?;
                    term(p, els)
                }
            }
        }
        fn formula(p: &ProgramDef, f: &Formula) -> Result<(), ProgramError> {
            match f {
                Formula::True | Formula::False => Ok(()),
                Formula::Atom { pred, args } => {
                    if !PRIMITIVE_PREDS.contains(&pred.as_str()) {
                        return Err(ProgramError::NonPrimitive(pred.clone()));
                    }
                    args.iter().try_for_each(|a| term(p, a))
                }
                Formula::Eq(a, b) => {
                    term(p, a)?;
                    term(p, b)
                }
                Formula::Not(g) => formula(p, g),
                Formula::And(fs) | Formula::Or(fs) => fs.iter().try_for_each(|g| formula(p, g)),
                Formula::Implies(a, b) | Formula::Iff(a, b) => {
                    formula(p, a)?;
                    formula(p, b)
                }
            }
        }
        term(self, &self.body)
    }

    /// Canonical text: conditionals break after the test, branches indented.
    pub fn emit(&self) -> String {
        let mut out = format!("(define ({}", self.name);
        for (p, _) in &self.params {
            write!(out, " {p}").unwrap();
        }
        out.push_str(")\n  ");
        pretty(&self.body, 2, &mut out);
        out.push_str(")\n");
        out
    }

    pub fn parse(text: &str) -> Result<ProgramDef, ProgramError> {
        let s = read_one(text)?;
        let bad = |m: &str| ProgramError::Syntax(m.to_string());
        let items = s.list().ok_or_else(|| bad("expected (define (name params...) body)"))?;
        if items.len() != 3 || items[0].atom() != Some("define") {
            return Err(bad("expected (define (name params...) body)"));
        }
        let head = items[1].list().ok_or_else(|| bad("expected (name params...)"))?;
        let name = head
            .first()
            .and_then(|h| h.atom())
            .ok_or_else(|| bad("missing program name"))?;
        let params = head[1..]
            .iter()
            .map(|p| {
                p.atom()
                    .map(str::to_string)
                    .ok_or_else(|| bad("parameters must be names"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let (params, _, body) = Signature::standard().parse_definition(name, &params, &items[2])?;
        let p = ProgramDef {
            name: name.to_string(),
            params,
            body,
            decrease: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn simplified(&self) -> ProgramDef {
        ProgramDef {
            body: simplify_body(&self.body),
            ..self.clone()
        }
    }
}

fn pretty(t: &LTerm, indent: usize, out: &mut String) {
    match t {
        LTerm::Cond { test, then, els } => {
            write!(out, "(if {test}").unwrap();
            for branch in [then, els] {
                out.push('\n');
                out.push_str(&" ".repeat(indent + 4));
                pretty(branch, indent + 4, out);
            }
            out.push(')');
        }
        other => write!(out, "{other}").unwrap(),
    }
}

/// Rewrites to a fixpoint: constant tests, identical branches, and a test
/// repeated directly inside one of its own branches.
pub fn simplify_body(t: &LTerm) -> LTerm {
    let mut cur = t.clone();
    loop {
        let next = step(&cur);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

fn step(t: &LTerm) -> LTerm {
    match t {
        LTerm::Meta { .. } | LTerm::Lit(_) => t.clone(),
        LTerm::App { f, args, sort } => LTerm::App {
            f: f.clone(),
            args: args.iter().map(step).collect(),
            sort: *sort,
        },
        LTerm::Cond { test, then, els } => {
            let test = simplify(test);
            let mut then = step(then);
            let mut els = step(els);
            match test {
                Formula::True => return then,
                Formula::False => return els,
                _ => {}
            }
            if then == els {
                return then;
            }
            if let LTerm::Cond { test: t2, then: a, .. } = &then {
                if **t2 == test {
                    then = (**a).clone();
                }
            }
            if let LTerm::Cond { test: t2, els: c, .. } = &els {
                if **t2 == test {
                    els = (**c).clone();
                }
            }
            LTerm::cond(test, then, els)
        }
    }
}

#[derive(Debug, Clone)]
pub struct InterpretOptions<'r> {
    pub fuel: u64,
    pub check_decrease: bool,
    pub registry: &'r RelRegistry,
}

/// Observer invoked on every self-call with the caller's and callee's
/// arguments.
pub type CallObserver<'o> = dyn FnMut(&[Value], &[Value]) + Send + 'o;

/// Deepest self-call nesting the interpreter allows, independent of fuel.
pub const MAX_DEPTH: u64 = 4096;

/// Stack reserved per nested self-call; generous for unoptimized builds.
const STACK_PER_CALL: usize = 32 * 1024;

struct Interp<'a, 'o> {
    prog: &'a ProgramDef,
    opts: &'a InterpretOptions<'a>,
    used: u64,
    depth: u64,
    observer: Option<&'o mut CallObserver<'o>>,
}

fn pack(args: &[Value]) -> Value {
    match args {
        [Value::Subst(s), Value::Expr(a), Value::Expr(b)] => {
            Value::Triple(Box::new(InputTriple::new(s.clone(), a.clone(), b.clone())))
        }
        [v] => v.clone(),
        _ => Value::Nat(0),
    }
}

impl Interp<'_, '_> {
    fn run(&mut self, args: Vec<Value>) -> Result<Value, ProgramError> {
        let prog = self.prog;
        let registry = self.opts.registry;
        let bindings: BTreeMap<String, Value> = prog
            .params
            .iter()
            .map(|(n, _)| n.clone())
            .zip(args.iter().cloned())
            .collect();
        let ev = Evaluator {
            bindings: &bindings,
            registry,
        };
        let parent = args;
        ev.term(&prog.body, &mut |name: &str, child: Vec<Value>| {
            if name != prog.name {
                return Err(EvalError::UnknownSymbol(name.to_string()).into());
            }
            if self.used >= self.opts.fuel {
                return Err(ProgramError::FuelExhausted(self.opts.fuel));
            }
            if self.depth >= MAX_DEPTH {
                return Err(ProgramError::TooDeep(MAX_DEPTH));
            }
            self.used += 1;
            if let Some(obs) = self.observer.as_mut() {
                obs(&parent, &child);
            }
            if self.opts.check_decrease {
                if let Some(rel) = &prog.decrease {
                    let spec = registry
                        .get(rel)
                        .map_err(|e| ProgramError::PrimitiveError(e.to_string()))?;
                    let (a, b) = (pack(&child), pack(&parent));
                    let less = rel_less(spec, &a, &b).map_err(|e| ProgramError::PrimitiveError(e.to_string()))?;
                    if !less {
                        return Err(ProgramError::DecreaseViolation {
                            parent: b.to_string(),
                            child: a.to_string(),
                        });
                    }
                }
            }
            self.depth += 1;
            let r = self.run(child);
            self.depth -= 1;
            r
        })
    }
}

pub fn interpret(p: &ProgramDef, args: &[Value], opts: &InterpretOptions<'_>) -> Result<Value, ProgramError> {
    interpret_observed(p, args, opts, None)
}

pub fn interpret_observed<'o>(
    p: &ProgramDef,
    args: &[Value],
    opts: &InterpretOptions<'_>,
    observer: Option<&'o mut CallObserver<'o>>,
) -> Result<Value, ProgramError> {
    if args.len() != p.params.len() {
        return Err(ProgramError::Arity {
            expected: p.params.len(),
            found: args.len(),
        });
    }
    let opts = InterpretOptions {
        fuel: opts.fuel,
        check_decrease: opts.check_decrease,
        registry: opts.registry,
    };
    // Self-calls recurse natively, so the run gets a stack sized for the
    // deepest nesting the fuel allows.
    let depth = opts.fuel.min(MAX_DEPTH) as usize;
    let stack = (depth + 32) * STACK_PER_CALL;
    std::thread::scope(|scope| {
        std::thread::Builder::new()
            .stack_size(stack)
            .spawn_scoped(scope, || {
                let mut it = Interp {
                    prog: p,
                    opts: &opts,
                    used: 0,
                    depth: 0,
                    observer,
                };
                it.run(args.to_vec())
            })
            .map_err(|e| ProgramError::PrimitiveError(format!("cannot start interpreter thread: {e}")))?
            .join()
            .unwrap_or_else(|panic| std::panic::resume_unwind(panic))
    })
}
