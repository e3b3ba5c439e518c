//! Loop-language intermediate representation.
//!
//! Programs are small C-like kernels: scalar and array parameters, canonical
//! `for (i = lo; i < hi; i += step)` loops, assignments and a handful of
//! declarations. Transformation directives are kept beside the body, keyed by
//! the pre-order position of the loop they are attached to.

use std::collections::BTreeMap;
use std::fmt;
use std::ops;

use serde::{Deserialize, Serialize};

/// Element type of a scalar, array element or declaration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarType {
    Int,
    Float,
}

impl ScalarType {
    pub fn keyword(self) -> &'static str {
        match self {
            ScalarType::Int => "int",
            ScalarType::Float => "float",
        }
    }
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Min,
    Max,
    /// `a < b`, yielding integer 0 or 1.
    Lt,
}

impl BinOp {
    /// Operators that can appear as `op=` in a compound assignment.
    pub fn is_compound(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Min => "min",
            BinOp::Max => "max",
            BinOp::Lt => "<",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Float(f64),
    Var(String),
    Index { array: String, index: Box<Expr> },
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Cast { to: ScalarType, inner: Box<Expr> },
}

pub fn var(name: impl Into<String>) -> Expr {
    Expr::Var(name.into())
}

pub fn int(value: i64) -> Expr {
    Expr::Int(value)
}

pub fn float(value: f64) -> Expr {
    Expr::Float(value)
}

pub fn index(array: impl Into<String>, idx: Expr) -> Expr {
    Expr::Index { array: array.into(), index: Box::new(idx) }
}

pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
    Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
}

pub fn min(lhs: Expr, rhs: Expr) -> Expr {
    binary(BinOp::Min, lhs, rhs)
}

pub fn max(lhs: Expr, rhs: Expr) -> Expr {
    binary(BinOp::Max, lhs, rhs)
}

pub fn cast(to: ScalarType, inner: Expr) -> Expr {
    Expr::Cast { to, inner: Box::new(inner) }
}

macro_rules! expr_op {
    ($trait:ident, $method:ident, $op:expr) => {
        impl ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                binary($op, self, rhs)
            }
        }
    };
}

expr_op!(Add, add, BinOp::Add);
expr_op!(Sub, sub, BinOp::Sub);
expr_op!(Mul, mul, BinOp::Mul);
expr_op!(Div, div, BinOp::Div);
expr_op!(Rem, rem, BinOp::Rem);

impl Expr {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Expr::Int(v) => Some(*v),
            _ => None,
        }
    }

    /// True if `name` occurs as a scalar variable or as an array name.
    pub fn mentions(&self, name: &str) -> bool {
        match self {
            Expr::Int(_) | Expr::Float(_) => false,
            Expr::Var(v) => v == name,
            Expr::Index { array, index } => array == name || index.mentions(name),
            Expr::Binary { lhs, rhs, .. } => lhs.mentions(name) || rhs.mentions(name),
            Expr::Cast { inner, .. } => inner.mentions(name),
        }
    }

    /// Replaces every scalar occurrence of `name` with `with`.
    pub fn substitute(&self, name: &str, with: &Expr) -> Expr {
        match self {
            Expr::Var(v) if v == name => with.clone(),
            Expr::Int(_) | Expr::Float(_) | Expr::Var(_) => self.clone(),
            Expr::Index { array, index } => {
                Expr::Index { array: array.clone(), index: Box::new(index.substitute(name, with)) }
            }
            Expr::Binary { op, lhs, rhs } => Expr::Binary {
                op: *op,
                lhs: Box::new(lhs.substitute(name, with)),
                rhs: Box::new(rhs.substitute(name, with)),
            },
            Expr::Cast { to, inner } => Expr::Cast { to: *to, inner: Box::new(inner.substitute(name, with)) },
        }
    }

    /// Renames a scalar variable (array names are left alone).
    pub fn rename_scalar(&self, from: &str, to: &str) -> Expr {
        self.substitute(from, &Expr::Var(to.to_owned()))
    }

    pub fn collect_names(&self, out: &mut Vec<String>) {
        match self {
            Expr::Int(_) | Expr::Float(_) => {}
            Expr::Var(v) => out.push(v.clone()),
            Expr::Index { array, index } => {
                out.push(array.clone());
                index.collect_names(out);
            }
            Expr::Binary { lhs, rhs, .. } => {
                lhs.collect_names(out);
                rhs.collect_names(out);
            }
            Expr::Cast { inner, .. } => inner.collect_names(out),
        }
    }
}

/// Folding constructors used by the transformations so generated bounds stay
/// readable (`N - 4`, `8` instead of `12 - (5 - 1)`).
pub mod fold {
    use super::{binary, BinOp, Expr};

    pub fn add(lhs: Expr, rhs: Expr) -> Expr {
        match (&lhs, &rhs) {
            (Expr::Int(a), Expr::Int(b)) => {
                a.checked_add(*b).map(Expr::Int).unwrap_or_else(|| binary(BinOp::Add, lhs, rhs))
            }
            (_, Expr::Int(0)) => lhs,
            (Expr::Int(0), _) => rhs,
            _ => binary(BinOp::Add, lhs, rhs),
        }
    }

    pub fn sub(lhs: Expr, rhs: Expr) -> Expr {
        match (&lhs, &rhs) {
            (Expr::Int(a), Expr::Int(b)) => {
                a.checked_sub(*b).map(Expr::Int).unwrap_or_else(|| binary(BinOp::Sub, lhs, rhs))
            }
            (_, Expr::Int(0)) => lhs,
            _ => binary(BinOp::Sub, lhs, rhs),
        }
    }

    pub fn mul(lhs: Expr, rhs: Expr) -> Expr {
        match (&lhs, &rhs) {
            (Expr::Int(a), Expr::Int(b)) => {
                a.checked_mul(*b).map(Expr::Int).unwrap_or_else(|| binary(BinOp::Mul, lhs, rhs))
            }
            (_, Expr::Int(1)) => lhs,
            (Expr::Int(1), _) => rhs,
            _ => binary(BinOp::Mul, lhs, rhs),
        }
    }

    /// Truncating integer division, folded only when exact C semantics are
    /// reproducible (non-zero divisor).
    pub fn div(lhs: Expr, rhs: Expr) -> Expr {
        match (&lhs, &rhs) {
            (Expr::Int(a), Expr::Int(b)) if *b != 0 => {
                a.checked_div(*b).map(Expr::Int).unwrap_or_else(|| binary(BinOp::Div, lhs, rhs))
            }
            (_, Expr::Int(1)) => lhs,
            _ => binary(BinOp::Div, lhs, rhs),
        }
    }
}

/// Assignment target: a plain variable or a single array element.
#[derive(Debug, Clone, PartialEq)]
pub enum LValue {
    Var(String),
    Index { array: String, index: Expr },
}

impl LValue {
    pub fn name(&self) -> &str {
        match self {
            LValue::Var(name) | LValue::Index { array: name, .. } => name,
        }
    }

    pub fn as_expr(&self) -> Expr {
        match self {
            LValue::Var(name) => Expr::Var(name.clone()),
            LValue::Index { array, index: idx } => index(array.clone(), idx.clone()),
        }
    }

    pub fn substitute(&self, name: &str, with: &Expr) -> LValue {
        match self {
            LValue::Var(v) if v == name => match with {
                Expr::Var(w) => LValue::Var(w.clone()),
                // Scalar targets are never loop indices, so this arm is only
                // reachable through renames.
                _ => self.clone(),
            },
            LValue::Var(_) => self.clone(),
            LValue::Index { array, index } => {
                LValue::Index { array: array.clone(), index: index.substitute(name, with) }
            }
        }
    }

    pub fn mentions(&self, name: &str) -> bool {
        match self {
            LValue::Var(v) => v == name,
            LValue::Index { array, index } => array == name || index.mentions(name),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Assign {
        target: LValue,
        value: Expr,
    },
    CompoundAssign {
        target: LValue,
        op: BinOp,
        value: Expr,
    },
    Loop(Loop),
    Block(Vec<Stmt>),
    DeclInit {
        name: String,
        ty: ScalarType,
        init: Expr,
    },
    /// Busy-wait for the given number of microseconds (`stall_us` in C).
    Stall(Expr),
    /// OpenMP runtime annotation kept verbatim for C emission, e.g.
    /// `omp parallel` or `omp task`. Standalone directives such as
    /// `omp barrier` carry no body.
    Omp {
        directive: String,
        body: Option<Box<Stmt>>,
    },
}

pub fn assign(target: LValue, value: Expr) -> Stmt {
    Stmt::Assign { target, value }
}

pub fn compound(target: LValue, op: BinOp, value: Expr) -> Stmt {
    Stmt::CompoundAssign { target, op, value }
}

pub fn decl(name: impl Into<String>, ty: ScalarType, init: Expr) -> Stmt {
    Stmt::DeclInit { name: name.into(), ty, init }
}

pub fn omp(directive: impl Into<String>, body: Stmt) -> Stmt {
    Stmt::Omp { directive: directive.into(), body: Some(Box::new(body)) }
}

pub fn elem(array: impl Into<String>, index: Expr) -> LValue {
    LValue::Index { array: array.into(), index }
}

pub fn scalar(name: impl Into<String>) -> LValue {
    LValue::Var(name.into())
}

/// Canonical loop `for (index = lower; index < upper; index += step)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Loop {
    pub index: String,
    pub lower: Expr,
    pub upper: Expr,
    pub step: i64,
    pub body: Vec<Stmt>,
}

impl Loop {
    pub fn new(index: impl Into<String>, lower: Expr, upper: Expr, body: Vec<Stmt>) -> Self {
        Loop { index: index.into(), lower, upper, step: 1, body }
    }

    pub fn with_step(mut self, step: i64) -> Self {
        self.step = step;
        self
    }

    /// The single inner loop of a perfectly nested body, if any.
    pub fn perfect_child(&self) -> Option<&Loop> {
        match self.body.as_slice() {
            [Stmt::Loop(inner)] => Some(inner),
            _ => None,
        }
    }

    /// Constant trip count when both bounds are literals.
    pub fn constant_trip_count(&self) -> Option<i64> {
        let (lo, hi) = (self.lower.as_int()?, self.upper.as_int()?);
        if hi <= lo {
            return Some(0);
        }
        let span = hi.checked_sub(lo)?;
        Some((span + self.step - 1) / self.step.max(1))
    }
}

impl Stmt {
    /// True if `name` is read or written anywhere inside the statement.
    pub fn mentions(&self, name: &str) -> bool {
        match self {
            Stmt::Assign { target, value } | Stmt::CompoundAssign { target, value, .. } => {
                target.mentions(name) || value.mentions(name)
            }
            Stmt::Loop(l) => {
                l.index == name
                    || l.lower.mentions(name)
                    || l.upper.mentions(name)
                    || l.body.iter().any(|s| s.mentions(name))
            }
            Stmt::Block(body) => body.iter().any(|s| s.mentions(name)),
            Stmt::DeclInit { name: n, init, .. } => n == name || init.mentions(name),
            Stmt::Stall(e) => e.mentions(name),
            Stmt::Omp { body, .. } => body.as_ref().is_some_and(|b| b.mentions(name)),
        }
    }

    /// True if the statement assigns (or declares) `name` somewhere.
    pub fn writes(&self, name: &str) -> bool {
        match self {
            Stmt::Assign { target, .. } | Stmt::CompoundAssign { target, .. } => target.name() == name,
            Stmt::Loop(l) => l.index == name || l.body.iter().any(|s| s.writes(name)),
            Stmt::Block(body) => body.iter().any(|s| s.writes(name)),
            Stmt::DeclInit { name: n, .. } => n == name,
            Stmt::Stall(_) => false,
            Stmt::Omp { body, .. } => body.as_ref().is_some_and(|b| b.writes(name)),
        }
    }

    /// Substitutes a scalar variable, stopping at declarations that shadow it.
    pub fn substitute(&self, name: &str, with: &Expr) -> Stmt {
        match self {
            Stmt::Assign { target, value } => {
                Stmt::Assign { target: target.substitute(name, with), value: value.substitute(name, with) }
            }
            Stmt::CompoundAssign { target, op, value } => Stmt::CompoundAssign {
                target: target.substitute(name, with),
                op: *op,
                value: value.substitute(name, with),
            },
            Stmt::Loop(l) => {
                let lower = l.lower.substitute(name, with);
                let upper = l.upper.substitute(name, with);
                let body = if l.index == name { l.body.clone() } else { substitute_block(&l.body, name, with) };
                Stmt::Loop(Loop { index: l.index.clone(), lower, upper, step: l.step, body })
            }
            Stmt::Block(body) => Stmt::Block(substitute_block(body, name, with)),
            Stmt::DeclInit { name: n, ty, init } => {
                Stmt::DeclInit { name: n.clone(), ty: *ty, init: init.substitute(name, with) }
            }
            Stmt::Stall(e) => Stmt::Stall(e.substitute(name, with)),
            Stmt::Omp { directive, body } => Stmt::Omp {
                directive: directive.clone(),
                body: body.as_ref().map(|b| Box::new(b.substitute(name, with))),
            },
        }
    }
}

/// Substitutes through a statement list; a declaration of `name` shadows it
/// for the rest of the list.
pub fn substitute_block(body: &[Stmt], name: &str, with: &Expr) -> Vec<Stmt> {
    let mut out = Vec::with_capacity(body.len());
    let mut shadowed = false;
    for stmt in body {
        if shadowed {
            out.push(stmt.clone());
            continue;
        }
        out.push(stmt.substitute(name, with));
        if matches!(stmt, Stmt::DeclInit { name: n, .. } if n == name) {
            shadowed = true;
        }
    }
    out
}

/// Reduction operators accepted by the unroll `reduction(var:op)` clause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReductionOp {
    Add,
    Mul,
    Min,
    Max,
}

impl ReductionOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ReductionOp::Add => "+",
            ReductionOp::Mul => "*",
            ReductionOp::Min => "min",
            ReductionOp::Max => "max",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "+" => Some(ReductionOp::Add),
            "*" => Some(ReductionOp::Mul),
            "min" => Some(ReductionOp::Min),
            "max" => Some(ReductionOp::Max),
            _ => None,
        }
    }

    pub fn bin_op(self) -> BinOp {
        match self {
            ReductionOp::Add => BinOp::Add,
            ReductionOp::Mul => BinOp::Mul,
            ReductionOp::Min => BinOp::Min,
            ReductionOp::Max => BinOp::Max,
        }
    }

    /// Identity element written into generated accumulators. Min/max use the
    /// extreme finite values of the C element type (`int`: 32-bit, `float`:
    /// IEEE single).
    pub fn identity(self, ty: ScalarType) -> Expr {
        match (self, ty) {
            (ReductionOp::Add, ScalarType::Int) => Expr::Int(0),
            (ReductionOp::Add, ScalarType::Float) => Expr::Float(0.0),
            (ReductionOp::Mul, ScalarType::Int) => Expr::Int(1),
            (ReductionOp::Mul, ScalarType::Float) => Expr::Float(1.0),
            (ReductionOp::Min, ScalarType::Int) => Expr::Int(i32::MAX as i64),
            (ReductionOp::Min, ScalarType::Float) => Expr::Float(f32::MAX as f64),
            (ReductionOp::Max, ScalarType::Int) => Expr::Int(i32::MIN as i64),
            (ReductionOp::Max, ScalarType::Float) => Expr::Float(-(f32::MAX as f64)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionClause {
    pub var: String,
    pub op: ReductionOp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DirectiveKind {
    Tile { sizes: Vec<i64> },
    UnrollPartial { factor: i64 },
    UnrollFull,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Directive {
    pub kind: DirectiveKind,
    pub nocheck: bool,
    pub reduction: Option<ReductionClause>,
}

impl Directive {
    pub fn tile(sizes: Vec<i64>) -> Self {
        Directive { kind: DirectiveKind::Tile { sizes }, nocheck: false, reduction: None }
    }

    pub fn unroll_partial(factor: i64) -> Self {
        Directive { kind: DirectiveKind::UnrollPartial { factor }, nocheck: false, reduction: None }
    }

    pub fn unroll_full() -> Self {
        Directive { kind: DirectiveKind::UnrollFull, nocheck: false, reduction: None }
    }

    pub fn nocheck(mut self) -> Self {
        self.nocheck = true;
        self
    }

    pub fn with_reduction(mut self, var: impl Into<String>, op: ReductionOp) -> Self {
        self.reduction = Some(ReductionClause { var: var.into(), op });
        self
    }
}

/// Pre-order position of a loop in its program (outer loops before inner,
/// statements in textual order). Site ids are per-program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LoopSite(pub usize);

impl fmt::Display for LoopSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamKind {
    Int,
    IntArray { extent: Expr },
    FloatArray { extent: Expr },
}

impl ParamKind {
    pub fn element(&self) -> ScalarType {
        match self {
            ParamKind::Int | ParamKind::IntArray { .. } => ScalarType::Int,
            ParamKind::FloatArray { .. } => ScalarType::Float,
        }
    }

    pub fn extent(&self) -> Option<&Expr> {
        match self {
            ParamKind::Int => None,
            ParamKind::IntArray { extent } | ParamKind::FloatArray { extent } => Some(extent),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
}

impl Param {
    pub fn int(name: impl Into<String>) -> Self {
        Param { name: name.into(), kind: ParamKind::Int }
    }

    pub fn int_array(name: impl Into<String>, extent: Expr) -> Self {
        Param { name: name.into(), kind: ParamKind::IntArray { extent } }
    }

    pub fn float_array(name: impl Into<String>, extent: Expr) -> Self {
        Param { name: name.into(), kind: ParamKind::FloatArray { extent } }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub directives: BTreeMap<LoopSite, Directive>,
}

impl Program {
    pub fn new(name: impl Into<String>, params: Vec<Param>, body: Vec<Stmt>) -> Self {
        Program { name: name.into(), params, body, directives: BTreeMap::new() }
    }

    pub fn with_directive(mut self, site: LoopSite, directive: Directive) -> Self {
        self.directives.insert(site, directive);
        self
    }

    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    /// All loops in pre-order together with their site ids.
    pub fn loops(&self) -> Vec<(LoopSite, &Loop)> {
        let mut out = Vec::new();
        for stmt in &self.body {
            collect_loops(stmt, &mut out);
        }
        out
    }

    pub fn loop_at(&self, site: LoopSite) -> Option<&Loop> {
        self.loops().into_iter().find(|(s, _)| *s == site).map(|(_, l)| l)
    }

    /// Every identifier mentioned anywhere in the program.
    pub fn identifiers(&self) -> Vec<String> {
        let mut names: Vec<String> = self.params.iter().map(|p| p.name.clone()).collect();
        for p in &self.params {
            if let Some(e) = p.kind.extent() {
                e.collect_names(&mut names);
            }
        }
        for stmt in &self.body {
            collect_stmt_names(stmt, &mut names);
        }
        for d in self.directives.values() {
            if let Some(r) = &d.reduction {
                names.push(r.var.clone());
            }
        }
        names.sort();
        names.dedup();
        names
    }
}

fn collect_loops<'a>(stmt: &'a Stmt, out: &mut Vec<(LoopSite, &'a Loop)>) {
    match stmt {
        Stmt::Loop(l) => {
            out.push((LoopSite(out.len()), l));
            for s in &l.body {
                collect_loops(s, out);
            }
        }
        Stmt::Block(body) => {
            for s in body {
                collect_loops(s, out);
            }
        }
        Stmt::Omp { body: Some(b), .. } => collect_loops(b, out),
        _ => {}
    }
}

pub(crate) fn collect_stmt_names(stmt: &Stmt, out: &mut Vec<String>) {
    match stmt {
        Stmt::Assign { target, value } | Stmt::CompoundAssign { target, value, .. } => {
            target.as_expr().collect_names(out);
            value.collect_names(out);
        }
        Stmt::Loop(l) => {
            out.push(l.index.clone());
            l.lower.collect_names(out);
            l.upper.collect_names(out);
            for s in &l.body {
                collect_stmt_names(s, out);
            }
        }
        Stmt::Block(body) => body.iter().for_each(|s| collect_stmt_names(s, out)),
        Stmt::DeclInit { name, init, .. } => {
            out.push(name.clone());
            init.collect_names(out);
        }
        Stmt::Stall(e) => e.collect_names(out),
        Stmt::Omp { body, .. } => {
            if let Some(b) = body {
                collect_stmt_names(b, out);
            }
        }
    }
}
