//! Well-formedness rules for [`Program`]s.

use std::collections::HashMap;
use std::fmt;

use crate::ir::{BinOp, DirectiveKind, Expr, LValue, Loop, LoopSite, ParamKind, Program, ScalarType, Stmt};

/// Where a violation was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    Param(String),
    Loop(LoopSite),
    /// Index path through nested statement lists, outermost first.
    Stmt(Vec<usize>),
    Directive(LoopSite),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Param(p) => write!(f, "param `{p}`"),
            Location::Loop(s) => write!(f, "loop {s}"),
            Location::Stmt(path) => {
                let parts: Vec<String> = path.iter().map(|i| i.to_string()).collect();
                write!(f, "stmt {}", parts.join("."))
            }
            Location::Directive(s) => write!(f, "directive on {s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub location: Location,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Length of the maximal perfect-nest chain starting at `lp`.
pub fn loop_nest_depth(lp: &Loop) -> usize {
    let mut depth = 1;
    let mut cur = lp;
    while let Some(inner) = cur.perfect_child() {
        depth += 1;
        cur = inner;
    }
    depth
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Binding {
    Scalar(ScalarType),
    Array(ScalarType),
    LoopIndex,
}

struct Checker<'p> {
    program: &'p Program,
    scopes: Vec<HashMap<String, Binding>>,
    path: Vec<usize>,
    next_site: usize,
    violations: Vec<Violation>,
}

impl<'p> Checker<'p> {
    fn here(&self) -> Location {
        Location::Stmt(self.path.clone())
    }

    fn report(&mut self, location: Location, message: impl Into<String>) {
        self.violations.push(Violation { location, message: message.into() });
    }

    fn lookup(&self, name: &str) -> Option<Binding> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn declare(&mut self, name: &str, binding: Binding) {
        self.scopes.last_mut().expect("scope").insert(name.to_owned(), binding);
    }

    fn expr_type(&mut self, e: &Expr, at: &Location) -> ScalarType {
        match e {
            Expr::Int(_) => ScalarType::Int,
            Expr::Float(_) => ScalarType::Float,
            Expr::Var(v) => match self.lookup(v) {
                Some(Binding::Scalar(t)) => t,
                Some(Binding::LoopIndex) => ScalarType::Int,
                Some(Binding::Array(t)) => {
                    self.report(at.clone(), format!("array `{v}` used as a scalar"));
                    t
                }
                None => {
                    self.report(at.clone(), format!("undeclared identifier `{v}`"));
                    ScalarType::Int
                }
            },
            Expr::Index { array, index } => {
                let it = self.expr_type(index, at);
                if it != ScalarType::Int {
                    self.report(at.clone(), format!("subscript of `{array}` must be an integer"));
                }
                match self.lookup(array) {
                    Some(Binding::Array(t)) => t,
                    Some(_) => {
                        self.report(at.clone(), format!("`{array}` is not an array"));
                        ScalarType::Int
                    }
                    None => {
                        self.report(at.clone(), format!("undeclared identifier `{array}`"));
                        ScalarType::Int
                    }
                }
            }
            Expr::Binary { op, lhs, rhs } => {
                let (a, b) = (self.expr_type(lhs, at), self.expr_type(rhs, at));
                match op {
                    BinOp::Rem if a != ScalarType::Int || b != ScalarType::Int => {
                        self.report(at.clone(), "`%` requires integer operands");
                        ScalarType::Int
                    }
                    BinOp::Lt => ScalarType::Int,
                    _ if a == ScalarType::Float || b == ScalarType::Float => ScalarType::Float,
                    _ => ScalarType::Int,
                }
            }
            Expr::Cast { to, inner } => {
                self.expr_type(inner, at);
                *to
            }
        }
    }

    fn check_target(&mut self, target: &LValue) -> ScalarType {
        let at = self.here();
        match target {
            LValue::Var(v) => match self.lookup(v) {
                Some(Binding::Scalar(t)) => t,
                Some(Binding::LoopIndex) => {
                    self.report(at, format!("loop index `{v}` assigned inside its loop"));
                    ScalarType::Int
                }
                Some(Binding::Array(t)) => {
                    self.report(at, format!("array `{v}` assigned as a scalar"));
                    t
                }
                None => {
                    self.report(at, format!("undeclared identifier `{v}`"));
                    ScalarType::Int
                }
            },
            LValue::Index { array, index } => {
                self.expr_type(&Expr::Index { array: array.clone(), index: Box::new(index.clone()) }, &at)
            }
        }
    }

    fn block(&mut self, body: &[Stmt]) {
        self.scopes.push(HashMap::new());
        for (i, s) in body.iter().enumerate() {
            self.path.push(i);
            self.stmt(s);
            self.path.pop();
        }
        self.scopes.pop();
    }

    fn stmt(&mut self, stmt: &Stmt) {
        let at = self.here();
        match stmt {
            Stmt::Assign { target, value } => {
                self.check_target(target);
                self.expr_type(value, &at);
            }
            Stmt::CompoundAssign { target, op, value } => {
                let t = self.check_target(target);
                let v = self.expr_type(value, &at);
                if !op.is_compound() {
                    self.report(at.clone(), format!("`{}` is not a compound-assignment operator", op.symbol()));
                }
                if *op == BinOp::Rem && (t == ScalarType::Float || v == ScalarType::Float) {
                    self.report(at, "`%=` requires integer operands");
                }
            }
            Stmt::Loop(l) => self.lp(l),
            Stmt::Block(body) => self.block(body),
            Stmt::DeclInit { name, ty, init } => {
                self.expr_type(init, &at);
                if self.lookup(name) == Some(Binding::LoopIndex) {
                    self.report(at.clone(), format!("declaration of `{name}` shadows a loop index"));
                }
                if self.scopes.last().is_some_and(|s| s.contains_key(name)) {
                    self.report(at, format!("`{name}` declared twice in the same scope"));
                }
                self.declare(name, Binding::Scalar(*ty));
            }
            Stmt::Stall(e) => {
                self.expr_type(e, &at);
            }
            Stmt::Omp { directive, body } => {
                if directive.trim().is_empty() {
                    self.report(at, "empty OpenMP annotation");
                }
                if let Some(b) = body {
                    self.stmt(b);
                }
            }
        }
    }

    fn lp(&mut self, l: &Loop) {
        let site = LoopSite(self.next_site);
        self.next_site += 1;
        let at = Location::Loop(site);
        if l.step < 1 {
            self.report(at.clone(), "step ≥ 1 required");
        }
        for bound in [&l.lower, &l.upper] {
            if self.expr_type(bound, &at) != ScalarType::Int {
                self.report(at.clone(), "loop bounds must be integers");
            }
        }
        if self.lookup(&l.index) == Some(Binding::LoopIndex) {
            self.report(at.clone(), format!("loop index `{}` shadows an enclosing loop index", l.index));
        }
        if l.lower.mentions(&l.index) || l.upper.mentions(&l.index) {
            self.report(at, format!("bounds of loop `{}` refer to its own index", l.index));
        }
        self.scopes.push(HashMap::new());
        self.declare(&l.index, Binding::LoopIndex);
        self.block(&l.body);
        self.scopes.pop();
    }
}

pub fn validate(program: &Program) -> ValidationReport {
    let mut c =
        Checker { program, scopes: vec![HashMap::new()], path: Vec::new(), next_site: 0, violations: Vec::new() };

    for p in &program.params {
        let at = Location::Param(p.name.clone());
        if c.lookup(&p.name).is_some() {
            c.report(at.clone(), "duplicate parameter");
        }
        if let Some(extent) = p.kind.extent() {
            if c.expr_type(extent, &at) != ScalarType::Int {
                c.report(at.clone(), "array extent must be an integer expression");
            }
        }
        let binding = match p.kind {
            ParamKind::Int => Binding::Scalar(ScalarType::Int),
            ParamKind::IntArray { .. } => Binding::Array(ScalarType::Int),
            ParamKind::FloatArray { .. } => Binding::Array(ScalarType::Float),
        };
        c.declare(&p.name, binding);
    }

    c.block(&c.program.body);

    let loops = program.loops();
    for (site, d) in &program.directives {
        let at = Location::Directive(*site);
        let Some((_, lp)) = loops.iter().find(|(s, _)| s == site) else {
            c.report(at, "directive attached to a non-existent loop site");
            continue;
        };
        match &d.kind {
            DirectiveKind::Tile { sizes } => {
                if sizes.is_empty() {
                    c.report(at.clone(), "tile requires at least one size");
                }
                if sizes.iter().any(|&s| s < 1) {
                    c.report(at.clone(), "tile sizes must be ≥ 1");
                }
                if loop_nest_depth(lp) < sizes.len() {
                    c.report(at.clone(), "nest depth < sizes");
                }
                if d.reduction.is_some() {
                    c.report(at, "reduction clause is only valid on unroll");
                }
            }
            DirectiveKind::UnrollPartial { factor } => {
                if *factor < 1 {
                    c.report(at, "unroll factor must be ≥ 1");
                }
            }
            DirectiveKind::UnrollFull => {}
        }
    }

    ValidationReport { violations: c.violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::*;

    fn fill_loop() -> Program {
        let body = vec![assign(elem("n", var("i")), int(10) * var("i"))];
        Program::new(
            "fill",
            vec![Param::int("N"), Param::int_array("n", var("N"))],
            vec![Stmt::Loop(Loop::new("i", int(0), var("N"), body))],
        )
    }

    #[test]
    fn canonical_loop_is_valid() {
        assert!(validate(&fill_loop()).is_ok());
    }

    #[test]
    fn step_zero_is_reported() {
        let mut p = fill_loop();
        if let Stmt::Loop(l) = &mut p.body[0] {
            l.step = 0;
        }
        let report = validate(&p);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].message, "step ≥ 1 required");
        assert_eq!(report.violations[0].location, Location::Loop(LoopSite(0)));
    }

    #[test]
    fn tile_deeper_than_nest_is_reported() {
        let inner = Loop::new("j", int(0), int(4), vec![assign(elem("n", var("j")), var("i"))]);
        let outer = Loop::new("i", int(0), int(4), vec![Stmt::Loop(inner)]);
        let p = Program::new("k", vec![Param::int_array("n", int(4))], vec![Stmt::Loop(outer)])
            .with_directive(LoopSite(0), Directive::tile(vec![2, 2, 2]));
        let report = validate(&p);
        assert!(report.violations.iter().any(|v| v.message == "nest depth < sizes"), "{report}");
    }

    #[test]
    fn index_assignment_and_undeclared_names() {
        let body = vec![assign(scalar("i"), int(0)), assign(elem("m", var("i")), var("q"))];
        let p = Program::new("k", vec![Param::int("N")], vec![Stmt::Loop(Loop::new("i", int(0), var("N"), body))]);
        let msgs: Vec<String> = validate(&p).violations.into_iter().map(|v| v.message).collect();
        assert!(msgs.iter().any(|m| m.contains("loop index `i` assigned")));
        assert!(msgs.iter().any(|m| m.contains("undeclared identifier `m`")));
        assert!(msgs.iter().any(|m| m.contains("undeclared identifier `q`")));
    }

    #[test]
    fn float_remainder_is_rejected() {
        let p = Program::new(
            "k",
            vec![],
            vec![decl("x", ScalarType::Float, float(1.0)), assign(scalar("x"), var("x") % int(2))],
        );
        assert!(!validate(&p).is_ok());
    }

    #[test]
    fn validation_is_idempotent() {
        let mut p = fill_loop();
        p.directives.insert(LoopSite(3), Directive::unroll_full());
        assert_eq!(validate(&p), validate(&p));
    }

    #[test]
    fn nest_depth() {
        let k = Loop::new("k", int(0), var("N"), vec![]);
        let c = Loop::new("c", int(0), var("N"), vec![Stmt::Loop(k)]);
        let r = Loop::new("r", int(0), var("N"), vec![Stmt::Loop(c)]);
        assert_eq!(loop_nest_depth(&r), 3);
        let mixed = Loop::new(
            "i",
            int(0),
            var("len"),
            vec![assign(elem("A", var("i")), int(0)), Stmt::Loop(Loop::new("j", int(0), var("len"), vec![]))],
        );
        assert_eq!(loop_nest_depth(&mixed), 1);
    }
}
