use std::collections::{BTreeMap, HashMap};

use super::{ArrayData, ExecError, Execution, Limits, Store, TracePoint, Value};
use crate::frontend::emit_expr;
use crate::ir::{BinOp, Expr, LValue, Loop, LoopSite, ParamKind, Program, ScalarType, Stmt};
use crate::scalar::Real;
use crate::validate::validate;

type R<T> = Result<T, ExecError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SlotKind {
    Param,
    Index,
    Local,
}

#[derive(Debug, Clone, Copy)]
struct Slot<F> {
    value: Value<F>,
    ty: ScalarType,
    kind: SlotKind,
}

struct Machine<'p, F> {
    arrays: BTreeMap<String, ArrayData<F>>,
    scopes: Vec<HashMap<&'p str, Slot<F>>>,
    loop_sites: HashMap<*const Loop, LoopSite>,
    ordinals: HashMap<*const Stmt, usize>,
    enclosing: Vec<(LoopSite, i64)>,
    trace: Option<Vec<TracePoint>>,
    steps: u64,
    limit: u64,
    stalled: F,
}

fn number_stmts(body: &[Stmt], loops: &mut HashMap<*const Loop, LoopSite>, ords: &mut HashMap<*const Stmt, usize>) {
    for s in body {
        number_stmt(s, loops, ords);
    }
}

fn number_stmt(s: &Stmt, loops: &mut HashMap<*const Loop, LoopSite>, ords: &mut HashMap<*const Stmt, usize>) {
    match s {
        Stmt::Assign { .. } | Stmt::CompoundAssign { .. } | Stmt::Stall(_) => {
            let n = ords.len();
            ords.insert(s as *const Stmt, n);
        }
        Stmt::Loop(l) => {
            let n = loops.len();
            loops.insert(l as *const Loop, LoopSite(n));
            number_stmts(&l.body, loops, ords);
        }
        Stmt::Block(b) => number_stmts(b, loops, ords),
        Stmt::Omp { body: Some(b), .. } => number_stmt(b, loops, ords),
        Stmt::DeclInit { .. } | Stmt::Omp { body: None, .. } => {}
    }
}

fn int_binop(op: BinOp, a: i64, b: i64) -> R<i64> {
    match op {
        BinOp::Add => a.checked_add(b).ok_or(ExecError::IntegerOverflow),
        BinOp::Sub => a.checked_sub(b).ok_or(ExecError::IntegerOverflow),
        BinOp::Mul => a.checked_mul(b).ok_or(ExecError::IntegerOverflow),
        BinOp::Div | BinOp::Rem if b == 0 => Err(ExecError::DivisionByZero),
        BinOp::Div => a.checked_div(b).ok_or(ExecError::IntegerOverflow),
        BinOp::Rem => a.checked_rem(b).ok_or(ExecError::IntegerOverflow),
        BinOp::Min => Ok(if a > b { b } else { a }),
        BinOp::Max => Ok(if a < b { b } else { a }),
        BinOp::Lt => Ok(i64::from(a < b)),
    }
}

fn float_binop<F: Real>(op: BinOp, a: F, b: F) -> R<Value<F>> {
    Ok(Value::Float(match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => a / b,
        BinOp::Rem => return Err(ExecError::Type("`%` applied to a float".into())),
        BinOp::Min => {
            if a > b {
                b
            } else {
                a
            }
        }
        BinOp::Max => {
            if a < b {
                b
            } else {
                a
            }
        }
        BinOp::Lt => return Ok(Value::Int(i64::from(a < b))),
    }))
}

fn apply<F: Real>(op: BinOp, a: Value<F>, b: Value<F>) -> R<Value<F>> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => int_binop(op, x, y).map(Value::Int),
        (x, y) => float_binop(op, x.as_float(), y.as_float()),
    }
}

fn convert<F: Real>(v: Value<F>, ty: ScalarType) -> R<Value<F>> {
    match (v, ty) {
        (Value::Int(_), ScalarType::Int) | (Value::Float(_), ScalarType::Float) => Ok(v),
        (Value::Int(x), ScalarType::Float) => Ok(Value::Float(F::from_i64_lossy(x))),
        (Value::Float(x), ScalarType::Int) => {
            x.trunc().to_i64().map(Value::Int).ok_or_else(|| ExecError::Type(format!("cannot convert {x} to int")))
        }
    }
}

impl<'p, F: Real> Machine<'p, F> {
    fn tick(&mut self) -> R<()> {
        self.steps += 1;
        if self.steps > self.limit {
            Err(ExecError::StepBudgetExhausted(self.limit))
        } else {
            Ok(())
        }
    }

    fn slot(&self, name: &str) -> Option<&Slot<F>> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn slot_mut(&mut self, name: &str) -> Option<&mut Slot<F>> {
        self.scopes.iter_mut().rev().find_map(|s| s.get_mut(name))
    }

    fn array_index(&self, name: &str, idx: &Expr) -> R<usize> {
        let i = match self.eval(idx)? {
            Value::Int(i) => i,
            Value::Float(_) => return Err(ExecError::Type(format!("float subscript for `{name}`"))),
        };
        let len = self.arrays.get(name).ok_or_else(|| ExecError::Unbound(name.to_owned()))?.len();
        if i < 0 || i as u64 >= len as u64 {
            return Err(ExecError::OutOfBounds { name: name.to_owned(), index: i, len });
        }
        Ok(i as usize)
    }

    fn eval(&self, e: &Expr) -> R<Value<F>> {
        match e {
            Expr::Int(v) => Ok(Value::Int(*v)),
            Expr::Float(v) => Ok(Value::Float(F::from_f64_lossy(*v))),
            Expr::Var(name) => self.slot(name).map(|s| s.value).ok_or_else(|| ExecError::Unbound(name.clone())),
            Expr::Index { array, index } => {
                let i = self.array_index(array, index)?;
                Ok(self.arrays[array.as_str()].get(i).expect("bounds checked"))
            }
            Expr::Binary { op, lhs, rhs } => apply(*op, self.eval(lhs)?, self.eval(rhs)?),
            Expr::Cast { to, inner } => convert(self.eval(inner)?, *to),
        }
    }

    fn read(&self, target: &LValue) -> R<Value<F>> {
        self.eval(&target.as_expr())
    }

    fn write(&mut self, target: &LValue, v: Value<F>) -> R<()> {
        match target {
            LValue::Var(name) => {
                let slot = self.slot_mut(name).ok_or_else(|| ExecError::Unbound(name.clone()))?;
                slot.value = convert(v, slot.ty)?;
                Ok(())
            }
            LValue::Index { array, index } => {
                let i = self.array_index(array, index)?;
                match self.arrays.get_mut(array.as_str()).expect("bounds checked") {
                    ArrayData::Int(data) => {
                        data[i] = match convert(v, ScalarType::Int)? {
                            Value::Int(x) => x,
                            Value::Float(_) => unreachable!(),
                        }
                    }
                    ArrayData::Float(data) => data[i] = v.as_float(),
                }
                Ok(())
            }
        }
    }

    /// Resolves loop indices, integer parameters and subscripts to
    /// constants and folds integer arithmetic.
    fn resolve(&self, e: &Expr) -> Expr {
        match e {
            Expr::Int(_) | Expr::Float(_) => e.clone(),
            Expr::Var(name) => match self.slot(name) {
                Some(Slot { value: Value::Int(v), kind: SlotKind::Index | SlotKind::Param, .. }) => Expr::Int(*v),
                _ => e.clone(),
            },
            Expr::Index { array, index } => {
                let idx = match self.eval(index) {
                    Ok(Value::Int(i)) => Expr::Int(i),
                    _ => self.resolve(index),
                };
                Expr::Index { array: array.clone(), index: Box::new(idx) }
            }
            Expr::Binary { op, lhs, rhs } => {
                let (l, r) = (self.resolve(lhs), self.resolve(rhs));
                if let (Expr::Int(a), Expr::Int(b)) = (&l, &r) {
                    if let Ok(v) = int_binop(*op, *a, *b) {
                        return Expr::Int(v);
                    }
                }
                Expr::Binary { op: *op, lhs: Box::new(l), rhs: Box::new(r) }
            }
            Expr::Cast { to, inner } => match (to, self.resolve(inner)) {
                (ScalarType::Int, Expr::Int(v)) => Expr::Int(v),
                (to, inner) => Expr::Cast { to: *to, inner: Box::new(inner) },
            },
        }
    }

    fn record(&mut self, s: &Stmt) {
        if self.trace.is_none() {
            return;
        }
        let lv = |t: &LValue| emit_expr(&self.resolve(&t.as_expr()));
        let instance = match s {
            Stmt::Assign { target, value } => format!("{} = {}", lv(target), emit_expr(&self.resolve(value))),
            Stmt::CompoundAssign { target, op, value } => {
                format!("{} {}= {}", lv(target), op.symbol(), emit_expr(&self.resolve(value)))
            }
            Stmt::Stall(e) => format!("stall({})", emit_expr(&self.resolve(e))),
            _ => return,
        };
        let point = TracePoint {
            site: self.enclosing.last().map(|(s, _)| *s),
            indices: self.enclosing.iter().map(|(_, v)| *v).collect(),
            ordinal: self.ordinals.get(&(s as *const Stmt)).copied().unwrap_or(usize::MAX),
            instance,
        };
        self.trace.as_mut().expect("checked").push(point);
    }

    fn block(&mut self, body: &'p [Stmt]) -> R<()> {
        self.scopes.push(HashMap::new());
        let r = body.iter().try_for_each(|s| self.exec(s));
        self.scopes.pop();
        r
    }

    fn exec(&mut self, s: &'p Stmt) -> R<()> {
        self.tick()?;
        match s {
            Stmt::Assign { target, value } => {
                let v = self.eval(value)?;
                self.record(s);
                self.write(target, v)
            }
            Stmt::CompoundAssign { target, op, value } => {
                let v = apply(*op, self.read(target)?, self.eval(value)?)?;
                self.record(s);
                self.write(target, v)
            }
            Stmt::DeclInit { name, ty, init } => {
                let value = convert(self.eval(init)?, *ty)?;
                self.scopes.last_mut().expect("scope").insert(name, Slot { value, ty: *ty, kind: SlotKind::Local });
                Ok(())
            }
            Stmt::Stall(e) => {
                let us = self.eval(e)?.as_float();
                self.record(s);
                self.stalled = self.stalled + us;
                Ok(())
            }
            Stmt::Block(body) => self.block(body),
            Stmt::Omp { body, .. } => match body {
                Some(b) => self.exec(b),
                None => Ok(()),
            },
            Stmt::Loop(l) => self.lp(l),
        }
    }

    fn int_of(&self, e: &Expr, what: &str) -> R<i64> {
        match self.eval(e)? {
            Value::Int(v) => Ok(v),
            Value::Float(_) => Err(ExecError::Type(format!("{what} is not an integer"))),
        }
    }

    fn lp(&mut self, l: &'p Loop) -> R<()> {
        let site = self.loop_sites[&(l as *const Loop)];
        let mut i = self.int_of(&l.lower, "loop lower bound")?;
        loop {
            // C re-evaluates the condition on every iteration.
            if i >= self.int_of(&l.upper, "loop upper bound")? {
                return Ok(());
            }
            self.tick()?;
            let scope = HashMap::from([(
                l.index.as_str(),
                Slot { value: Value::Int(i), ty: ScalarType::Int, kind: SlotKind::Index },
            )]);
            self.scopes.push(scope);
            self.enclosing.push((site, i));
            let r = self.block(&l.body);
            self.enclosing.pop();
            self.scopes.pop();
            r?;
            i = i.checked_add(l.step).ok_or(ExecError::IntegerOverflow)?;
        }
    }
}

/// Runs `program` on `inputs`, optionally recording the trace.
pub fn run<F: Real>(
    program: &Program,
    inputs: &Store<F>,
    limits: Limits,
    record_trace: bool,
) -> Result<Execution<F>, ExecError> {
    let report = validate(program);
    if !report.is_ok() {
        return Err(ExecError::InvalidProgram(report.to_string()));
    }
    let mut loop_sites = HashMap::new();
    let mut ordinals = HashMap::new();
    number_stmts(&program.body, &mut loop_sites, &mut ordinals);

    let mut m = Machine {
        arrays: BTreeMap::new(),
        scopes: vec![HashMap::new()],
        loop_sites,
        ordinals,
        enclosing: Vec::new(),
        trace: record_trace.then(Vec::new),
        steps: 0,
        limit: limits.max_steps,
        stalled: F::zero(),
    };

    for p in &program.params {
        match &p.kind {
            ParamKind::Int => {
                let v = match inputs.scalars.get(&p.name) {
                    Some(Value::Int(v)) => *v,
                    Some(Value::Float(_)) => return Err(ExecError::WrongInputKind(p.name.clone())),
                    None => return Err(ExecError::MissingInput(p.name.clone())),
                };
                m.scopes[0].insert(&p.name, Slot { value: Value::Int(v), ty: ScalarType::Int, kind: SlotKind::Param });
            }
            ParamKind::IntArray { extent } | ParamKind::FloatArray { extent } => {
                let expected = m.int_of(extent, "array extent")?;
                let data = inputs.arrays.get(&p.name).ok_or_else(|| ExecError::MissingInput(p.name.clone()))?;
                let kind_ok = matches!(
                    (&p.kind, data),
                    (ParamKind::IntArray { .. }, ArrayData::Int(_))
                        | (ParamKind::FloatArray { .. }, ArrayData::Float(_))
                );
                if !kind_ok {
                    return Err(ExecError::WrongInputKind(p.name.clone()));
                }
                if expected < 0 || data.len() as u64 != expected as u64 {
                    return Err(ExecError::ExtentMismatch { name: p.name.clone(), expected, actual: data.len() });
                }
                m.arrays.insert(p.name.clone(), data.clone());
            }
        }
    }

    m.scopes.push(HashMap::new());
    program.body.iter().try_for_each(|s| m.exec(s))?;

    let mut scalars = BTreeMap::new();
    for scope in &m.scopes {
        for (name, slot) in scope {
            scalars.insert((*name).to_owned(), slot.value);
        }
    }
    Ok(Execution {
        store: Store { scalars, arrays: m.arrays },
        trace: m.trace.unwrap_or_default(),
        steps: m.steps,
        stalled_us: m.stalled,
    })
}

#[cfg(test)]
mod tests {
    use super::super::*;
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
    fn fill_loop_writes_multiples_of_ten() {
        let inputs = Store::<f64>::new().with_int("N", 3).with_int_array("n", vec![0; 3]);
        let out = interpret(&fill_loop(), &inputs, Limits::default()).unwrap();
        assert_eq!(out.int_array("n").unwrap(), &[0, 10, 20]);
    }

    #[test]
    fn trace_of_fill_loop() {
        let inputs = Store::<f64>::new().with_int("N", 3).with_int_array("n", vec![0; 3]);
        let t = trace(&fill_loop(), &inputs).unwrap();
        let idx: Vec<Vec<i64>> = t.iter().map(|p| p.indices.clone()).collect();
        assert_eq!(idx, vec![vec![0], vec![1], vec![2]]);
        assert_eq!(t[1].instance, "n[1] = 10");
        assert_eq!(dump_trace(&t[..1]), "site=0 idx=(0) ord=0\n");
    }

    #[test]
    fn zero_trip_loop_has_empty_trace() {
        let inputs = Store::<f64>::new().with_int("N", 0).with_int_array("n", vec![]);
        assert!(trace(&fill_loop(), &inputs).unwrap().is_empty());
    }

    #[test]
    fn out_of_bounds_and_division_by_zero() {
        let inputs = Store::<f64>::new().with_int("N", 3).with_int_array("n", vec![0; 3]);
        let mut p = fill_loop();
        if let Stmt::Loop(l) = &mut p.body[0] {
            l.upper = int(4);
        }
        assert!(matches!(interpret(&p, &inputs, Limits::default()), Err(ExecError::OutOfBounds { index: 3, .. })));

        let q = Program::new("d", vec![Param::int("N")], vec![decl("x", ScalarType::Int, int(1) / var("N"))]);
        let r = interpret(&q, &Store::<f64>::new().with_int("N", 0), Limits::default());
        assert_eq!(r, Err(ExecError::DivisionByZero));
    }

    #[test]
    fn overflow_is_an_error() {
        let q = Program::new("o", vec![Param::int("N")], vec![decl("x", ScalarType::Int, var("N") * var("N"))]);
        let r = interpret(&q, &Store::<f64>::new().with_int("N", i64::MAX), Limits::default());
        assert_eq!(r, Err(ExecError::IntegerOverflow));
    }

    #[test]
    fn step_budget_is_enforced() {
        let inputs = Store::<f64>::new().with_int("N", 100).with_int_array("n", vec![0; 100]);
        let r = interpret(&fill_loop(), &inputs, Limits { max_steps: 50 });
        assert_eq!(r, Err(ExecError::StepBudgetExhausted(50)));
    }

    #[test]
    fn top_level_declarations_are_observable() {
        let body = vec![
            decl("sum", ScalarType::Float, float(0.0)),
            Stmt::Loop(Loop::new(
                "i",
                int(0),
                var("len"),
                vec![compound(scalar("sum"), BinOp::Add, int(1) / cast(ScalarType::Float, var("i") + int(1)))],
            )),
        ];
        let p = Program::new("c", vec![Param::int("len")], body);
        let out = interpret(&p, &Store::<f64>::new().with_int("len", 2), Limits::default()).unwrap();
        assert_eq!(out.float("sum"), Some(1.5));
        let out32 = interpret(&p, &Store::<f32>::new().with_int("len", 2), Limits::default()).unwrap();
        assert_eq!(out32.float("sum"), Some(1.5f32));
    }

    #[test]
    fn stall_accumulates_virtual_time() {
        let p = Program::new(
            "s",
            vec![Param::int("n"), Param::float_array("w", var("n"))],
            vec![Stmt::Loop(Loop::new("t", int(0), var("n"), vec![Stmt::Stall(index("w", var("t")))]))],
        );
        let inputs = Store::<f64>::new().with_int("n", 3).with_float_array("w", vec![1.0, 2.5, 3.0]);
        let e = run(&p, &inputs, Limits::default(), false).unwrap();
        assert_eq!(e.stalled_us, 6.5);
    }
}
