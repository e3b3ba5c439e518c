//! Deterministic reference interpreter and iteration tracer.
//!
//! Execution is strictly sequential. Integers are exact 64-bit values with
//! overflow reported as an error; floats use the interpreter's scalar type
//! (`f64` by default). `stall_us` is a no-op that accumulates virtual time.

mod equivalence;
mod inputs;
mod interp;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::ir::LoopSite;
use crate::scalar::Real;

pub use equivalence::{check_equivalence, Divergence, EquivalenceError, EquivalenceReport, Side, Verdict};
pub use inputs::{random_inputs, InputSpec, DEFAULT_SEED};
pub use interp::run;

/// Statement-execution budget used when callers do not pick one.
pub const DEFAULT_STEP_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value<F> {
    Int(i64),
    Float(F),
}

impl<F: Real> Value<F> {
    pub fn as_float(self) -> F {
        match self {
            Value::Int(v) => F::from_i64_lossy(v),
            Value::Float(v) => v,
        }
    }
}

impl<F: fmt::Display> fmt::Display for Value<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData<F> {
    Int(Vec<i64>),
    Float(Vec<F>),
}

impl<F: Real> ArrayData<F> {
    pub fn len(&self) -> usize {
        match self {
            ArrayData::Int(v) => v.len(),
            ArrayData::Float(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Option<Value<F>> {
        match self {
            ArrayData::Int(v) => v.get(i).copied().map(Value::Int),
            ArrayData::Float(v) => v.get(i).copied().map(Value::Float),
        }
    }
}

/// Scalars and arrays by name. As an input it binds every parameter; as an
/// output it also holds the top-level declarations of the kernel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Store<F> {
    pub scalars: BTreeMap<String, Value<F>>,
    pub arrays: BTreeMap<String, ArrayData<F>>,
}

impl<F: Real> Store<F> {
    pub fn new() -> Self {
        Store { scalars: BTreeMap::new(), arrays: BTreeMap::new() }
    }

    pub fn with_int(mut self, name: impl Into<String>, v: i64) -> Self {
        self.scalars.insert(name.into(), Value::Int(v));
        self
    }

    pub fn with_int_array(mut self, name: impl Into<String>, v: Vec<i64>) -> Self {
        self.arrays.insert(name.into(), ArrayData::Int(v));
        self
    }

    pub fn with_float_array(mut self, name: impl Into<String>, v: Vec<F>) -> Self {
        self.arrays.insert(name.into(), ArrayData::Float(v));
        self
    }

    pub fn int(&self, name: &str) -> Option<i64> {
        match self.scalars.get(name)? {
            Value::Int(v) => Some(*v),
            Value::Float(_) => None,
        }
    }

    pub fn float(&self, name: &str) -> Option<F> {
        match self.scalars.get(name)? {
            Value::Float(v) => Some(*v),
            Value::Int(_) => None,
        }
    }

    pub fn int_array(&self, name: &str) -> Option<&[i64]> {
        match self.arrays.get(name)? {
            ArrayData::Int(v) => Some(v),
            ArrayData::Float(_) => None,
        }
    }

    pub fn float_array(&self, name: &str) -> Option<&[F]> {
        match self.arrays.get(name)? {
            ArrayData::Float(v) => Some(v),
            ArrayData::Int(_) => None,
        }
    }
}

/// One executed statement instance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TracePoint {
    /// Innermost enclosing loop, `None` for statements outside any loop.
    pub site: Option<LoopSite>,
    /// Index values of the enclosing loops, outermost first.
    pub indices: Vec<i64>,
    /// Pre-order ordinal of the statement among the program's traced
    /// statements.
    pub ordinal: usize,
    /// The statement with loop indices, integer parameters and array
    /// subscripts resolved to constants. Two instances that touch the same
    /// locations with the same computation have the same key, whatever loop
    /// structure produced them.
    pub instance: String,
}

impl fmt::Display for TracePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.indices.iter().map(|v| v.to_string()).collect();
        match self.site {
            Some(site) => write!(f, "site={} idx=({}) ord={}", site.0, idx.join(","), self.ordinal),
            None => write!(f, "site=- idx=({}) ord={}", idx.join(","), self.ordinal),
        }
    }
}

/// Line-oriented dump, one `site=<id> idx=(a,b,...) ord=<k>` per point.
pub fn dump_trace(trace: &[TracePoint]) -> String {
    let mut s = String::new();
    for p in trace {
        s.push_str(&p.to_string());
        s.push('\n');
    }
    s
}

/// Multiset equality over statement instances.
pub fn same_multiset(a: &[TracePoint], b: &[TracePoint]) -> bool {
    multiset_difference(a, b).is_none()
}

/// First instance whose multiplicity differs, with counts in `a` and `b`.
pub fn multiset_difference(a: &[TracePoint], b: &[TracePoint]) -> Option<(String, usize, usize)> {
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for p in a {
        counts.entry(&p.instance).or_default().0 += 1;
    }
    for p in b {
        counts.entry(&p.instance).or_default().1 += 1;
    }
    counts.into_iter().find(|(_, (x, y))| x != y).map(|(k, (x, y))| (k.to_owned(), x, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_steps: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_steps: DEFAULT_STEP_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution<F> {
    pub store: Store<F>,
    pub trace: Vec<TracePoint>,
    pub steps: u64,
    /// Sum of the microseconds requested through `stall_us`.
    pub stalled_us: F,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("program is not valid: {0}")]
    InvalidProgram(String),
    #[error("input does not bind parameter `{0}`")]
    MissingInput(String),
    #[error("input for `{0}` has the wrong kind")]
    WrongInputKind(String),
    #[error("array `{name}` has {actual} elements, its extent is {expected}")]
    ExtentMismatch { name: String, expected: i64, actual: usize },
    #[error("index {index} out of bounds for `{name}` of length {len}")]
    OutOfBounds { name: String, index: i64, len: usize },
    #[error("integer division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    IntegerOverflow,
    #[error("step budget of {0} statement executions exhausted")]
    StepBudgetExhausted(u64),
    #[error("unbound identifier `{0}`")]
    Unbound(String),
    #[error("type error: {0}")]
    Type(String),
}

/// Runs `program` and returns the final store.
pub fn interpret<F: Real>(
    program: &crate::ir::Program,
    inputs: &Store<F>,
    limits: Limits,
) -> Result<Store<F>, ExecError> {
    run(program, inputs, limits, false).map(|e| e.store)
}

/// Runs `program` and returns its statement-instance trace.
pub fn trace<F: Real>(program: &crate::ir::Program, inputs: &Store<F>) -> Result<Vec<TracePoint>, ExecError> {
    run(program, inputs, Limits::default(), true).map(|e| e.trace)
}
