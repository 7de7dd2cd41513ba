//! Input corpora for oracle comparisons: the exhaustive small universe and
//! seeded random triples with proper idempotent environments.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::subst::Subst;
use crate::term::{parse_expr, Expr};

/// All expressions over `atoms` whose size is at most `max_size`, ordered by
/// size and then by construction order.
pub fn small_universe(atoms: &[Expr], max_size: u64) -> Vec<Expr> {
    let mut by_size: Vec<Vec<Expr>> = vec![Vec::new(); max_size as usize + 1];
    for a in atoms {
        let s = a.size();
        if s <= max_size {
            by_size[s as usize].push(a.clone());
        }
    }
    for n in 1..=max_size as usize {
        for i in 0..n {
            let j = n - 1 - i;
            let (ls, rs) = (by_size[i].clone(), by_size[j].clone());
            for l in &ls {
                for r in &rs {
                    by_size[n].push(Expr::cons(l.clone(), r.clone()));
                }
            }
        }
    }
    by_size.into_iter().flatten().collect()
}

/// The atoms `a`, `b`, `X`, `Y`.
pub fn standard_atoms() -> Vec<Expr> {
    ["a", "b", "X", "Y"].iter().map(|s| Expr::atom(s)).collect()
}

/// The environments `{}`, `{X -> a}` and `{X -> Y}`.
pub fn standard_envs() -> Vec<Subst> {
    vec![
        Subst::empty(),
        Subst::replacement("X", &Expr::constant("a")),
        Subst::replacement("X", &Expr::var("Y")),
    ]
}

/// Every (env, e1, e2) triple of the exhaustive small-universe corpus.
pub fn exhaustive_triples() -> Vec<(Subst, Expr, Expr)> {
    let exprs = small_universe(&standard_atoms(), 3);
    let mut out = Vec::with_capacity(exprs.len() * exprs.len() * 3);
    for env in standard_envs() {
        for e1 in &exprs {
            for e2 in &exprs {
                out.push((env.clone(), e1.clone(), e2.clone()));
            }
        }
    }
    out
}

/// Shape limits for random generation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomShape {
    pub max_depth: u32,
    pub vars: Vec<String>,
    pub consts: Vec<String>,
}

impl Default for RandomShape {
    fn default() -> Self {
        RandomShape {
            max_depth: 4,
            vars: ["W", "X", "Y", "Z"].map(String::from).to_vec(),
            consts: ["a", "b", "c"].map(String::from).to_vec(),
        }
    }
}

/// Deterministic random triples.
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
    shape: RandomShape,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler::with_shape(seed, RandomShape::default())
    }

    pub fn with_shape(seed: u64, shape: RandomShape) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            shape,
        }
    }

    pub fn atom(&mut self) -> Expr {
        if self.rng.gen_bool(0.6) {
            Expr::var(self.shape.vars.choose(&mut self.rng).expect("vars"))
        } else {
            Expr::constant(self.shape.consts.choose(&mut self.rng).expect("consts"))
        }
    }

    pub fn expr(&mut self) -> Expr {
        let d = self.rng.gen_range(0..=self.shape.max_depth);
        self.expr_depth(d)
    }

    pub fn expr_depth(&mut self, depth: u32) -> Expr {
        if depth == 0 || self.rng.gen_bool(0.3) {
            return self.atom();
        }
        let l = self.expr_depth(depth - 1);
        let r = self.expr_depth(depth - 1);
        Expr::cons(l, r)
    }

    /// A proper idempotent environment: a random subset of the variables is
    /// bound to expressions over the remaining ones.
    pub fn idempotent_env(&mut self) -> Subst {
        let mut vars = self.shape.vars.clone();
        vars.shuffle(&mut self.rng);
        let k = self.rng.gen_range(0..vars.len());
        let (bound, free) = vars.split_at(k);
        let shape = RandomShape {
            max_depth: 2,
            vars: free.to_vec(),
            consts: self.shape.consts.clone(),
        };
        let mut inner = Sampler {
            rng: ChaCha8Rng::seed_from_u64(self.rng.gen()),
            shape,
        };
        let pairs = bound.iter().map(|x| {
            let e = if inner.shape.vars.is_empty() {
                Expr::constant(inner.shape.consts.choose(&mut inner.rng).expect("consts"))
            } else {
                inner.expr()
            };
            (x.clone(), e)
        });
        Subst::make(pairs.collect::<Vec<_>>()).expect("bound variables are distinct")
    }

    pub fn triple(&mut self) -> (Subst, Expr, Expr) {
        let env = self.idempotent_env();
        (env, self.expr(), self.expr())
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Parses a list of expressions, panicking on malformed fixtures.
pub fn exprs(texts: &[&str]) -> Vec<Expr> {
    texts
        .iter()
        .map(|t| parse_expr(t).expect("fixture expression"))
        .collect()
}
