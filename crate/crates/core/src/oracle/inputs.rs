use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ExecError, Store};
use crate::ir::{BinOp, Expr, ParamKind, Program};
use crate::scalar::Real;

/// Seed used by the equivalence suites and by `verify` unless overridden.
pub const DEFAULT_SEED: u64 = 20_240_611;

/// How to draw inputs for a program. Integer scalars not listed in `fixed`
/// are drawn from `[0, 16]`; integer array entries from `[-9, 9]`; float
/// array entries from `[0.5, 2.0]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputSpec {
    pub fixed: BTreeMap<String, i64>,
    pub seed: u64,
}

impl Default for InputSpec {
    fn default() -> Self {
        InputSpec { fixed: BTreeMap::new(), seed: DEFAULT_SEED }
    }
}

impl InputSpec {
    pub fn with(mut self, name: impl Into<String>, value: i64) -> Self {
        self.fixed.insert(name.into(), value);
        self
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

fn extent(e: &Expr, ints: &BTreeMap<String, i64>) -> Result<i64, ExecError> {
    match e {
        Expr::Int(v) => Ok(*v),
        Expr::Var(v) => ints.get(v).copied().ok_or_else(|| ExecError::Unbound(v.clone())),
        Expr::Binary { op, lhs, rhs } => {
            let (a, b) = (extent(lhs, ints)?, extent(rhs, ints)?);
            let r = match op {
                BinOp::Add => a.checked_add(b),
                BinOp::Sub => a.checked_sub(b),
                BinOp::Mul => a.checked_mul(b),
                BinOp::Div | BinOp::Rem if b == 0 => return Err(ExecError::DivisionByZero),
                BinOp::Div => a.checked_div(b),
                BinOp::Rem => a.checked_rem(b),
                BinOp::Min => Some(a.min(b)),
                BinOp::Max => Some(a.max(b)),
                BinOp::Lt => Some(i64::from(a < b)),
            };
            r.ok_or(ExecError::IntegerOverflow)
        }
        _ => Err(ExecError::Type("array extent must be integer arithmetic over parameters".into())),
    }
}

/// Draws `count` input stores for `program` from one seeded stream.
pub fn random_inputs<F: Real>(program: &Program, spec: &InputSpec, count: usize) -> Result<Vec<Store<F>>, ExecError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut ints = BTreeMap::new();
        let mut store = Store::new();
        for p in &program.params {
            match &p.kind {
                ParamKind::Int => {
                    let v = spec.fixed.get(&p.name).copied().unwrap_or_else(|| rng.gen_range(0..=16));
                    ints.insert(p.name.clone(), v);
                    store = store.with_int(p.name.clone(), v);
                }
                ParamKind::IntArray { extent: e } => {
                    let n = extent(e, &ints)?.max(0) as usize;
                    store = store.with_int_array(p.name.clone(), (0..n).map(|_| rng.gen_range(-9..=9)).collect());
                }
                ParamKind::FloatArray { extent: e } => {
                    let n = extent(e, &ints)?.max(0) as usize;
                    let data = (0..n).map(|_| F::from_f64_lossy(rng.gen_range(0.5..=2.0))).collect();
                    store = store.with_float_array(p.name.clone(), data);
                }
            }
        }
        out.push(store);
    }
    Ok(out)
}
