//! Seeded generator of random well-typed programs.
//!
//! Every construct the frontend understands shows up with some probability:
//! nested loops with symbolic bounds and steps, declarations, compound
//! assignments, casts, `min`/`max`, comparisons, stalls, OpenMP annotations and
//! transformation directives. Programs validate but are not meant to run.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ir::*;
use crate::validate::loop_nest_depth;

const MAX_DEPTH: usize = 3;
const MAX_EXPR_DEPTH: u32 = 3;

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    /// Assignable scalar (parameter or declaration).
    Scalar(ScalarType),
    Array(ScalarType),
    Index,
}

struct Gen {
    rng: ChaCha8Rng,
    scopes: Vec<Vec<(String, Kind)>>,
    next_name: usize,
    next_site: usize,
    directives: Vec<(LoopSite, Directive)>,
}

impl Gen {
    fn names(&self, pred: impl Fn(Kind) -> bool) -> Vec<String> {
        self.scopes.iter().flatten().filter(|(_, k)| pred(*k)).map(|(n, _)| n.clone()).collect()
    }

    fn pick(&mut self, pred: impl Fn(Kind) -> bool) -> Option<String> {
        let names = self.names(pred);
        names.choose(&mut self.rng).cloned()
    }

    fn fresh(&mut self, stem: &str) -> String {
        self.next_name += 1;
        format!("{stem}{}", self.next_name)
    }

    fn int_lit(&mut self) -> Expr {
        Expr::Int(self.rng.gen_range(-5..=40))
    }

    fn float_lit(&mut self) -> Expr {
        Expr::Float(self.rng.gen_range(-40..=40) as f64 / 4.0)
    }

    fn int_expr(&mut self, depth: u32) -> Expr {
        let leaf = depth == 0 || self.rng.gen_bool(0.3);
        if leaf {
            return match self.rng.gen_range(0..3) {
                0 => self.int_lit(),
                _ => match self.pick(|k| matches!(k, Kind::Index | Kind::Scalar(ScalarType::Int))) {
                    Some(v) => Expr::Var(v),
                    None => self.int_lit(),
                },
            };
        }
        match self.rng.gen_range(0..8) {
            0 => match self.pick(|k| k == Kind::Array(ScalarType::Int)) {
                Some(a) => index(a, self.int_expr(depth - 1)),
                None => self.int_lit(),
            },
            1 => cast(ScalarType::Int, self.float_expr(depth - 1)),
            2 => {
                let op = *[BinOp::Min, BinOp::Max].choose(&mut self.rng).unwrap();
                binary(op, self.int_expr(depth - 1), self.int_expr(depth - 1))
            }
            3 => {
                let (a, b) = if self.rng.gen() {
                    (self.int_expr(depth - 1), self.int_expr(depth - 1))
                } else {
                    (self.float_expr(depth - 1), self.int_expr(depth - 1))
                };
                binary(BinOp::Lt, a, b)
            }
            _ => {
                let op = *[BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Rem].choose(&mut self.rng).unwrap();
                binary(op, self.int_expr(depth - 1), self.int_expr(depth - 1))
            }
        }
    }

    fn float_expr(&mut self, depth: u32) -> Expr {
        let leaf = depth == 0 || self.rng.gen_bool(0.3);
        if leaf {
            return match self.pick(|k| k == Kind::Scalar(ScalarType::Float)) {
                Some(v) if self.rng.gen() => Expr::Var(v),
                _ => self.float_lit(),
            };
        }
        match self.rng.gen_range(0..6) {
            0 => match self.pick(|k| k == Kind::Array(ScalarType::Float)) {
                Some(a) => index(a, self.int_expr(depth - 1)),
                None => self.float_lit(),
            },
            1 => cast(ScalarType::Float, self.int_expr(depth - 1)),
            2 => {
                let op = *[BinOp::Min, BinOp::Max].choose(&mut self.rng).unwrap();
                binary(op, self.float_expr(depth - 1), self.float_expr(depth - 1))
            }
            _ => {
                let op = *[BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div].choose(&mut self.rng).unwrap();
                let (a, b) = match self.rng.gen_range(0..3) {
                    0 => (self.int_expr(depth - 1), self.float_expr(depth - 1)),
                    1 => (self.float_expr(depth - 1), self.int_expr(depth - 1)),
                    _ => (self.float_expr(depth - 1), self.float_expr(depth - 1)),
                };
                binary(op, a, b)
            }
        }
    }

    fn expr(&mut self, ty: ScalarType) -> Expr {
        let depth = self.rng.gen_range(0..=MAX_EXPR_DEPTH);
        match ty {
            ScalarType::Int => self.int_expr(depth),
            ScalarType::Float => self.float_expr(depth),
        }
    }

    fn target(&mut self) -> Option<(LValue, ScalarType)> {
        let names: Vec<(String, Kind)> =
            self.scopes.iter().flatten().filter(|(_, k)| !matches!(k, Kind::Index)).cloned().collect();
        let (name, kind) = names.choose(&mut self.rng)?.clone();
        Some(match kind {
            Kind::Scalar(ty) => (LValue::Var(name), ty),
            Kind::Array(ty) => {
                let depth = self.rng.gen_range(0..=2);
                (LValue::Index { array: name, index: self.int_expr(depth) }, ty)
            }
            Kind::Index => unreachable!(),
        })
    }

    fn stmt(&mut self, depth: usize) -> Stmt {
        let roll = self.rng.gen_range(0..20);
        match roll {
            0..=5 => match self.target() {
                Some((target, ty)) => Stmt::Assign { target, value: self.expr(ty) },
                None => self.declaration(),
            },
            6..=8 => match self.target() {
                Some((target, ty)) => {
                    let ops: &[BinOp] = match ty {
                        ScalarType::Int => &[BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Rem],
                        ScalarType::Float => &[BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div],
                    };
                    let op = *ops.choose(&mut self.rng).unwrap();
                    let vty = if op == BinOp::Rem || self.rng.gen() { ScalarType::Int } else { ScalarType::Float };
                    let vty = if ty == ScalarType::Int && op == BinOp::Rem { ScalarType::Int } else { vty };
                    Stmt::CompoundAssign { target, op, value: self.expr(vty) }
                }
                None => self.declaration(),
            },
            9..=10 => self.declaration(),
            11..=14 if depth < MAX_DEPTH => Stmt::Loop(self.lp(depth)),
            15 if depth < MAX_DEPTH => {
                let body = self.block(depth + 1, 0..3);
                Stmt::Block(body)
            }
            16 => {
                let ty = if self.rng.gen() { ScalarType::Int } else { ScalarType::Float };
                Stmt::Stall(self.expr(ty))
            }
            17 if depth < MAX_DEPTH => self.omp(depth),
            _ => match self.target() {
                Some((target, ty)) => Stmt::Assign { target, value: self.expr(ty) },
                None => self.declaration(),
            },
        }
    }

    fn declaration(&mut self) -> Stmt {
        let ty = if self.rng.gen() { ScalarType::Int } else { ScalarType::Float };
        let init = self.expr(ty);
        let name = self.fresh("t");
        self.scopes.last_mut().unwrap().push((name.clone(), Kind::Scalar(ty)));
        decl(name, ty, init)
    }

    fn omp(&mut self, depth: usize) -> Stmt {
        match self.rng.gen_range(0..4) {
            0 => Stmt::Omp { directive: "barrier".into(), body: None },
            1 => omp("parallel for schedule(static)", Stmt::Loop(self.lp(depth))),
            2 => omp("parallel", Stmt::Block(self.block(depth + 1, 0..3))),
            _ => {
                let inner = self.stmt(depth + 1);
                omp("single", inner)
            }
        }
    }

    fn block(&mut self, depth: usize, len: std::ops::Range<usize>) -> Vec<Stmt> {
        self.scopes.push(Vec::new());
        let n = self.rng.gen_range(len);
        let body = (0..n).map(|_| self.stmt(depth)).collect();
        self.scopes.pop();
        body
    }

    fn lp(&mut self, depth: usize) -> Loop {
        let site = LoopSite(self.next_site);
        self.next_site += 1;
        let lower = if self.rng.gen_bool(0.6) { Expr::Int(self.rng.gen_range(0..3)) } else { self.int_expr(1) };
        let upper = self.int_expr(2);
        let step = if self.rng.gen_bool(0.7) { 1 } else { self.rng.gen_range(2..=4) };
        let index = self.fresh("i");
        self.scopes.push(vec![(index.clone(), Kind::Index)]);
        // A perfect nest now and then, so tile directives have something to
        // attach to.
        let body = if depth + 1 < MAX_DEPTH && self.rng.gen_bool(0.3) {
            vec![Stmt::Loop(self.lp(depth + 1))]
        } else {
            self.block(depth + 1, 0..4)
        };
        self.scopes.pop();
        let l = Loop { index, lower, upper, step, body };
        if self.rng.gen_bool(0.3) {
            let d = self.directive(&l);
            self.directives.push((site, d));
        }
        l
    }

    fn directive(&mut self, l: &Loop) -> Directive {
        match self.rng.gen_range(0..3) {
            0 => {
                let k = self.rng.gen_range(1..=loop_nest_depth(l));
                let sizes = (0..k).map(|_| self.rng.gen_range(1..=16)).collect();
                let d = Directive::tile(sizes);
                if self.rng.gen() {
                    d.nocheck()
                } else {
                    d
                }
            }
            1 => {
                let mut d = Directive::unroll_partial(self.rng.gen_range(1..=8));
                if self.rng.gen() {
                    d = d.nocheck();
                }
                if self.rng.gen() {
                    if let Some(v) = self.pick(|k| matches!(k, Kind::Scalar(_))) {
                        let op = *[ReductionOp::Add, ReductionOp::Mul, ReductionOp::Min, ReductionOp::Max]
                            .choose(&mut self.rng)
                            .unwrap();
                        d = d.with_reduction(v, op);
                    }
                }
                d
            }
            _ => Directive::unroll_full(),
        }
    }
}

/// A random valid program, fully determined by `seed`.
pub fn random_program(seed: u64) -> Program {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        scopes: vec![Vec::new()],
        next_name: 0,
        next_site: 0,
        directives: Vec::new(),
    };
    let mut params = vec![Param::int("n")];
    g.scopes[0].push(("n".into(), Kind::Scalar(ScalarType::Int)));
    if g.rng.gen() {
        params.push(Param::int("m"));
        g.scopes[0].push(("m".into(), Kind::Scalar(ScalarType::Int)));
    }
    for (name, ty) in [("a", ScalarType::Int), ("x", ScalarType::Float), ("b", ScalarType::Int)] {
        if g.rng.gen_bool(0.7) {
            let extent = if g.rng.gen() { var("n") * var("n") + int(1) } else { Expr::Int(g.rng.gen_range(1..=64)) };
            params.push(match ty {
                ScalarType::Int => Param::int_array(name, extent),
                ScalarType::Float => Param::float_array(name, extent),
            });
            g.scopes[0].push((name.into(), Kind::Array(ty)));
        }
    }
    g.scopes.push(Vec::new());
    let n = g.rng.gen_range(1..6);
    let body = (0..n).map(|_| g.stmt(0)).collect();
    let mut p = Program::new(format!("random_{seed}"), params, body);
    p.directives = g.directives.into_iter().collect();
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::validate;

    #[test]
    fn generated_programs_validate() {
        for seed in 0..300 {
            let p = random_program(seed);
            let report = validate(&p);
            assert!(report.is_ok(), "seed {seed}: {report}");
        }
    }

    #[test]
    fn same_seed_same_program() {
        assert_eq!(random_program(42), random_program(42));
    }
}
