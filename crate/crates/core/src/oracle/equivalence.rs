use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::{multiset_difference, run, ArrayData, ExecError, Limits, Store, Value};
use crate::ir::{ParamKind, Program};
use crate::scalar::Real;

/// Outcome of comparing two programs, weakest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Mismatch,
    /// Final stores differ, but both programs executed the same statement
    /// instances in a different order.
    TracePermutationOnly,
    EqualWithin,
    ExactEqual,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Mismatch => "mismatch",
            Verdict::TracePermutationOnly => "trace-permutation-only",
            Verdict::EqualWithin => "equal-within",
            Verdict::ExactEqual => "exact-equal",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Verdict::Mismatch, Verdict::TracePermutationOnly, Verdict::EqualWithin, Verdict::ExactEqual]
            .into_iter()
            .find(|v| v.name() == s)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// First observed difference: which input, which location, and the values
/// seen in the first (`expected`) and second (`actual`) program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Divergence {
    pub input: usize,
    pub location: String,
    pub expected: String,
    pub actual: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "input #{}: {} expected {}, got {}", self.input, self.location, self.expected, self.actual)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub verdict: Verdict,
    pub rel_tol: f64,
    /// Whether the statement-instance traces agreed as multisets on every
    /// input.
    pub traces_equal: bool,
    pub divergence: Option<Divergence>,
}

impl fmt::Display for EquivalenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.verdict {
            Verdict::EqualWithin => write!(f, "equal-within({})", self.rel_tol)?,
            v => write!(f, "{v}")?,
        }
        if let Some(d) = &self.divergence {
            write!(f, "; first divergence {d}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    P,
    Q,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::P => "first program",
            Side::Q => "second program",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{side} failed on input #{input}: {source}")]
pub struct EquivalenceError {
    pub side: Side,
    pub input: usize,
    #[source]
    pub source: ExecError,
}

enum Cmp {
    Exact,
    Within,
    Differs,
}

fn cmp_float<F: Real>(a: F, b: F, tol: f64) -> Cmp {
    if a == b || (a.is_nan() && b.is_nan()) {
        return Cmp::Exact;
    }
    let (x, y) = (a.to_f64_lossy(), b.to_f64_lossy());
    if (x - y).abs() <= tol * x.abs().max(y.abs()) {
        Cmp::Within
    } else {
        Cmp::Differs
    }
}

fn cmp_value<F: Real>(a: Value<F>, b: Value<F>, tol: f64) -> Cmp {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) if x == y => Cmp::Exact,
        (Value::Int(_), Value::Int(_)) => Cmp::Differs,
        (x, y) => cmp_float(x.as_float(), y.as_float(), tol),
    }
}

/// Compares the observable parts of two final stores. Returns the weakest
/// per-location result and the first differing location.
fn compare_stores<F: Real>(
    names: &(BTreeSet<String>, BTreeSet<String>),
    a: &Store<F>,
    b: &Store<F>,
    tol: f64,
    input: usize,
) -> (Verdict, Option<Divergence>) {
    let mut verdict = Verdict::ExactEqual;
    let witness = |location: String, e: String, x: String| Divergence { input, location, expected: e, actual: x };
    let missing = || "<absent>".to_owned();

    for name in &names.0 {
        match (a.scalars.get(name), b.scalars.get(name)) {
            (Some(x), Some(y)) => match cmp_value(*x, *y, tol) {
                Cmp::Exact => {}
                Cmp::Within => verdict = verdict.min(Verdict::EqualWithin),
                Cmp::Differs => return (Verdict::Mismatch, Some(witness(name.clone(), x.to_string(), y.to_string()))),
            },
            (None, None) => {}
            (x, y) => {
                let show = |v: Option<&Value<F>>| v.map_or_else(missing, |v| v.to_string());
                return (Verdict::Mismatch, Some(witness(name.clone(), show(x), show(y))));
            }
        }
    }
    for name in &names.1 {
        let (x, y) = match (a.arrays.get(name), b.arrays.get(name)) {
            (Some(x), Some(y)) => (x, y),
            _ => return (Verdict::Mismatch, Some(witness(name.clone(), missing(), missing()))),
        };
        if x.len() != y.len() {
            return (Verdict::Mismatch, Some(witness(format!("{name}.len"), x.len().to_string(), y.len().to_string())));
        }
        for i in 0..x.len() {
            let (u, v) = (x.get(i).expect("in range"), y.get(i).expect("in range"));
            let c = match (x, y) {
                (ArrayData::Int(_), ArrayData::Int(_)) | (ArrayData::Float(_), ArrayData::Float(_)) => {
                    cmp_value(u, v, tol)
                }
                _ => Cmp::Differs,
            };
            match c {
                Cmp::Exact => {}
                Cmp::Within => verdict = verdict.min(Verdict::EqualWithin),
                Cmp::Differs => {
                    return (Verdict::Mismatch, Some(witness(format!("{name}[{i}]"), u.to_string(), v.to_string())))
                }
            }
        }
    }
    (verdict, None)
}

/// Runs both programs on every input and classifies the result.
///
/// Compared locations are every parameter plus the top-level scalar
/// declarations present in both programs, so the check is symmetric in
/// `exact-equal` and `mismatch`. Directives are ignored; apply them first.
pub fn check_equivalence<F: Real>(
    p: &Program,
    q: &Program,
    inputs: &[Store<F>],
    rel_tol: f64,
) -> Result<EquivalenceReport, EquivalenceError> {
    let mut verdict = Verdict::ExactEqual;
    let mut traces_equal = true;
    let mut divergence = None;

    for (i, input) in inputs.iter().enumerate() {
        let a = run(p, input, Limits::default(), true).map_err(|source| EquivalenceError {
            side: Side::P,
            input: i,
            source,
        })?;
        let b = run(q, input, Limits::default(), true).map_err(|source| EquivalenceError {
            side: Side::Q,
            input: i,
            source,
        })?;

        let mut scalars: BTreeSet<String> = BTreeSet::new();
        let mut arrays: BTreeSet<String> = BTreeSet::new();
        for param in p.params.iter().chain(&q.params) {
            match param.kind {
                ParamKind::Int => scalars.insert(param.name.clone()),
                _ => arrays.insert(param.name.clone()),
            };
        }
        scalars.extend(a.store.scalars.keys().filter(|k| b.store.scalars.contains_key(*k)).cloned());

        let permuted = multiset_difference(&a.trace, &b.trace).is_none();
        traces_equal &= permuted;
        let (v, d) = compare_stores(&(scalars, arrays), &a.store, &b.store, rel_tol, i);
        let v = if v == Verdict::Mismatch && permuted { Verdict::TracePermutationOnly } else { v };
        if v < verdict {
            verdict = v;
        }
        if divergence.is_none() {
            divergence = d;
        }
    }
    Ok(EquivalenceReport { verdict, rel_tol, traces_equal, divergence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::*;

    fn fill(offset: i64) -> Program {
        let body = vec![assign(elem("n", var("i")), int(10) * var("i") + int(offset))];
        Program::new(
            "fill",
            vec![Param::int("N"), Param::int_array("n", var("N"))],
            vec![Stmt::Loop(Loop::new("i", int(0), var("N"), body))],
        )
    }

    fn input(n: i64) -> Store<f64> {
        Store::new().with_int("N", n).with_int_array("n", vec![0; n as usize])
    }

    #[test]
    fn reflexive_program_is_exact_equal() {
        let r = check_equivalence(&fill(0), &fill(0), &[input(3), input(5)], 1e-6).unwrap();
        assert_eq!(r.verdict, Verdict::ExactEqual);
        assert!(r.traces_equal);
        assert!(r.divergence.is_none());
    }

    #[test]
    fn mismatch_has_a_witness_and_is_symmetric() {
        let r = check_equivalence(&fill(0), &fill(1), &[input(3)], 1e-6).unwrap();
        assert_eq!(r.verdict, Verdict::Mismatch);
        let d = r.divergence.unwrap();
        assert_eq!((d.location.as_str(), d.expected.as_str(), d.actual.as_str()), ("n[0]", "0", "1"));
        let back = check_equivalence(&fill(1), &fill(0), &[input(3)], 1e-6).unwrap();
        assert_eq!(back.verdict, Verdict::Mismatch);
    }

    #[test]
    fn reversed_iteration_is_a_permutation() {
        // n[0] = n[0] * 2 + i: order-dependent, same instances.
        let stmt = assign(elem("n", int(0)), index("n", int(0)) * int(2) + var("i"));
        let p = Program::new(
            "acc",
            vec![Param::int("N"), Param::int_array("n", int(1))],
            vec![Stmt::Loop(Loop::new("i", int(0), var("N"), vec![stmt.clone()]))],
        );
        // Run i over N-1 .. 0 via j: i = N - 1 - j, expressed by substitution.
        let rev = stmt.substitute("i", &(var("N") - int(1) - var("j")));
        let q =
            Program::new("acc_rev", p.params.clone(), vec![Stmt::Loop(Loop::new("j", int(0), var("N"), vec![rev]))]);
        let inp = Store::<f64>::new().with_int("N", 3).with_int_array("n", vec![0]);
        let r = check_equivalence(&p, &q, &[inp], 1e-6).unwrap();
        assert_eq!(r.verdict, Verdict::TracePermutationOnly);
    }

    #[test]
    fn interpreter_errors_name_the_program() {
        let mut bad = fill(0);
        if let Stmt::Loop(l) = &mut bad.body[0] {
            l.upper = var("N") + int(1);
        }
        let e = check_equivalence(&fill(0), &bad, &[input(2)], 1e-6).unwrap_err();
        assert_eq!(e.side, Side::Q);
        assert!(matches!(e.source, ExecError::OutOfBounds { .. }));
    }

    #[test]
    fn verdicts_are_ordered_weakest_first() {
        assert!(Verdict::Mismatch < Verdict::TracePermutationOnly);
        assert!(Verdict::TracePermutationOnly < Verdict::EqualWithin);
        assert!(Verdict::EqualWithin < Verdict::ExactEqual);
        assert_eq!(Verdict::from_name("equal-within"), Some(Verdict::EqualWithin));
    }
}
