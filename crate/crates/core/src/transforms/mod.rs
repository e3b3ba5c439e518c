//! Loop transformations as pure IR rewrites.
//!
//! Every transformation takes the loop it rewrites by reference and returns
//! new statements; nothing is modified in place. Generated identifiers come
//! from a [`FreshNamer`] seeded with every name of the enclosing program.

mod apply;
mod tile;
mod unroll;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::ir::{Expr, Loop, LoopSite, Program, ReductionOp, ScalarType};

pub use apply::{apply_directives, apply_request, TransformRequest};
pub use tile::tile;
pub use unroll::{jam, unroll_full, unroll_partial, unroll_reduction};

/// Largest trip count `unroll_full` will expand.
pub const MAX_FULL_UNROLL: i64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("tile needs a perfect nest of depth {needed}, found depth {found}")]
    NotPerfectNest { needed: usize, found: usize },
    #[error("loop `{index}` has step {step}; the transformation needs step 1")]
    NonUnitStep { index: String, step: i64 },
    #[error("bounds of loop `{index}` depend on `{name}`, which the nest also iterates")]
    NonRectangular { index: String, name: String },
    #[error("bounds of loop `{index}` use `{name}`, which the loop body writes")]
    BoundsNotInvariant { index: String, name: String },
    #[error("full unroll requires constant bounds")]
    NonConstantBounds,
    #[error("trip count {0} is too large to unroll fully")]
    TooManyIterations(i64),
    #[error("{what} must be at least {min}, got {value}")]
    BadFactor { what: &'static str, min: i64, value: i64 },
    #[error("nocheck breach: loop `{index}` runs {trip} iterations, not a multiple of {divisor}")]
    NocheckBreach { index: String, trip: i64, divisor: i64 },
    #[error("reduction clause requires a single compound accumulation: {0}")]
    Reduction(String),
    #[error("jam needs a body of straight-line statements followed by one inner loop: {0}")]
    JamShape(String),
    #[error("no loop at site {0}")]
    NoSuchSite(LoopSite),
    #[error("cannot determine the type of reduction variable `{0}`")]
    UnknownReductionType(String),
    #[error("at loop {site}: {source}")]
    AtSite {
        site: LoopSite,
        #[source]
        source: Box<TransformError>,
    },
    #[error("transformed program does not validate: {0}")]
    Invalid(String),
}

/// Produces identifiers that clash neither with the program nor with each
/// other.
#[derive(Debug, Clone, Default)]
pub struct FreshNamer {
    reserved: BTreeSet<String>,
}

impl FreshNamer {
    pub fn new<I, S>(reserved: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        FreshNamer { reserved: reserved.into_iter().map(Into::into).collect() }
    }

    pub fn for_program(program: &Program) -> Self {
        Self::new(program.identifiers())
    }

    pub fn is_reserved(&self, name: &str) -> bool {
        self.reserved.contains(name)
    }

    pub fn reserve(&mut self, name: impl Into<String>) {
        self.reserved.insert(name.into());
    }

    /// `base` itself when free, otherwise `base_1`, `base_2`, ...
    pub fn fresh(&mut self, base: &str) -> String {
        let mut name = base.to_owned();
        let mut n = 1;
        while self.reserved.contains(&name) {
            name = format!("{base}_{n}");
            n += 1;
        }
        self.reserved.insert(name.clone());
        name
    }
}

/// Accumulation target of a reduction unroll. `var` names a scalar or an
/// array; for arrays the accumulated element must not move inside the loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionTarget {
    pub var: String,
    pub op: ReductionOp,
    pub ty: ScalarType,
}

fn require_unit_step(l: &Loop) -> Result<(), TransformError> {
    if l.step == 1 {
        Ok(())
    } else {
        Err(TransformError::NonUnitStep { index: l.index.clone(), step: l.step })
    }
}

fn bound_names(l: &Loop) -> Vec<String> {
    let mut names = Vec::new();
    l.lower.collect_names(&mut names);
    l.upper.collect_names(&mut names);
    names.sort();
    names.dedup();
    names
}

/// Bounds are evaluated outside the rewritten loop, so the body must not
/// change anything they read.
fn require_invariant_bounds(l: &Loop, body: &[crate::ir::Stmt]) -> Result<(), TransformError> {
    for name in bound_names(l) {
        if name == l.index || body.iter().any(|s| s.writes(&name)) {
            return Err(TransformError::BoundsNotInvariant { index: l.index.clone(), name });
        }
    }
    Ok(())
}

fn nocheck_guard(l: &Loop, divisor: i64) -> Result<(), TransformError> {
    match l.constant_trip_count() {
        Some(trip) if trip % divisor != 0 => {
            Err(TransformError::NocheckBreach { index: l.index.clone(), trip, divisor })
        }
        _ => Ok(()),
    }
}

/// `lower + (upper - lower) / f * f`: where a checked unroll's remainder
/// loop starts. Never below `upper` when the trip count is negative, since
/// the division truncates toward zero.
fn remainder_start(l: &Loop, factor: i64) -> Expr {
    use crate::ir::fold;
    let span = fold::sub(l.upper.clone(), l.lower.clone());
    fold::add(l.lower.clone(), fold::mul(fold::div(span, Expr::Int(factor)), Expr::Int(factor)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn namer_never_repeats_or_clashes() {
        let mut n = FreshNamer::new(["r0", "sum0"]);
        assert_eq!(n.fresh("r0"), "r0_1");
        assert_eq!(n.fresh("r0"), "r0_2");
        assert_eq!(n.fresh("c0"), "c0");
        assert_eq!(n.fresh("c0"), "c0_1");
        assert!(n.is_reserved("c0_1"));
    }
}
