use super::{
    nocheck_guard, remainder_start, require_invariant_bounds, require_unit_step, FreshNamer, ReductionTarget,
    TransformError, MAX_FULL_UNROLL,
};
use crate::ir::{binary, fold, substitute_block, var, BinOp, Expr, LValue, Loop, Stmt};

fn declares(body: &[Stmt]) -> bool {
    body.iter().any(|s| matches!(s, Stmt::DeclInit { .. }))
}

/// The body with `index` replaced by `with`, scoped in its own block when
/// it declares anything so that copies can sit side by side.
fn copy_body(body: &[Stmt], index: &str, with: &Expr) -> Vec<Stmt> {
    let copy = substitute_block(body, index, with);
    if declares(body) {
        vec![Stmt::Block(copy)]
    } else {
        copy
    }
}

fn offset(index: &str, k: i64) -> Expr {
    var(index) + Expr::Int(k)
}

fn check_factor(what: &'static str, min: i64, value: i64) -> Result<(), TransformError> {
    if value < min {
        Err(TransformError::BadFactor { what, min, value })
    } else {
        Ok(())
    }
}

/// Partial unroll by `factor`.
///
/// Checked mode returns a main loop stepping by `factor` up to
/// `upper - (factor - 1)` followed by a remainder loop that starts where the
/// main loop stopped. Nocheck mode returns the main loop alone, bounded by
/// `upper`, and refuses constant trip counts that `factor` does not divide.
pub fn unroll_partial(l: &Loop, factor: i64, nocheck: bool) -> Result<Vec<Stmt>, TransformError> {
    check_factor("unroll factor", 1, factor)?;
    if factor == 1 {
        return Ok(vec![Stmt::Loop(l.clone())]);
    }
    require_unit_step(l)?;
    require_invariant_bounds(l, &l.body)?;
    if nocheck {
        nocheck_guard(l, factor)?;
    }
    let body = (0..factor).flat_map(|k| copy_body(&l.body, &l.index, &offset(&l.index, k))).collect();
    let upper = if nocheck { l.upper.clone() } else { fold::sub(l.upper.clone(), Expr::Int(factor - 1)) };
    let main = Loop { index: l.index.clone(), lower: l.lower.clone(), upper, step: factor, body };
    if nocheck {
        return Ok(vec![Stmt::Loop(main)]);
    }
    let rest = Loop { lower: remainder_start(l, factor), ..l.clone() };
    Ok(vec![Stmt::Loop(main), Stmt::Loop(rest)])
}

/// Replaces a loop with literal bounds by one body copy per iteration.
pub fn unroll_full(l: &Loop) -> Result<Vec<Stmt>, TransformError> {
    let (Some(lo), Some(_)) = (l.lower.as_int(), l.upper.as_int()) else {
        return Err(TransformError::NonConstantBounds);
    };
    check_factor("loop step", 1, l.step)?;
    let trip = l.constant_trip_count().ok_or(TransformError::TooManyIterations(i64::MAX))?;
    if trip > MAX_FULL_UNROLL {
        return Err(TransformError::TooManyIterations(trip));
    }
    Ok((0..trip).flat_map(|k| copy_body(&l.body, &l.index, &Expr::Int(lo + k * l.step))).collect())
}

/// The accumulated location and the contribution of one iteration.
fn accumulation(stmt: &Stmt, target: &ReductionTarget) -> Result<(LValue, Expr), String> {
    let op = target.op.bin_op();
    let (lv, e) = match stmt {
        Stmt::CompoundAssign { target: lv, op: o, value } if *o == op => (lv, value),
        Stmt::Assign { target: lv, value: Expr::Binary { op: o, lhs, rhs } } if *o == op => {
            let me = lv.as_expr();
            if **lhs == me {
                (lv, &**rhs)
            } else if **rhs == me {
                (lv, &**lhs)
            } else {
                return Err(format!("`{}` is overwritten, not accumulated", target.var));
            }
        }
        _ => return Err(format!("`{}` is not accumulated with `{}`", target.var, target.op.symbol())),
    };
    if lv.name() != target.var {
        return Err(format!("`{}` is read by an accumulation into `{}`", target.var, lv.name()));
    }
    if e.mentions(&target.var) {
        return Err(format!("the accumulated value depends on `{}`", target.var));
    }
    Ok((lv.clone(), e.clone()))
}

fn accumulate(acc: &str, op: BinOp, e: Expr) -> Stmt {
    match op {
        BinOp::Add | BinOp::Mul => Stmt::CompoundAssign { target: LValue::Var(acc.to_owned()), op, value: e },
        _ => Stmt::Assign { target: LValue::Var(acc.to_owned()), value: binary(op, var(acc), e) },
    }
}

/// Partial unroll that gives each body copy its own accumulator.
///
/// Accumulator 0 starts from the current value of the target, the others
/// from the identity of the operator; the remainder loop accumulates into
/// accumulator 0 and the target receives `acc0 op acc1 op ...` at the end.
pub fn unroll_reduction(
    l: &Loop,
    factor: i64,
    target: &ReductionTarget,
    nocheck: bool,
    namer: &mut FreshNamer,
) -> Result<Vec<Stmt>, TransformError> {
    check_factor("reduction unroll factor", 2, factor)?;
    require_unit_step(l)?;
    require_invariant_bounds(l, &l.body)?;
    if nocheck {
        nocheck_guard(l, factor)?;
    }
    let uses: Vec<usize> = (0..l.body.len()).filter(|&i| l.body[i].mentions(&target.var)).collect();
    let pos = match uses.as_slice() {
        [p] => *p,
        [] => return Err(TransformError::Reduction(format!("the loop never updates `{}`", target.var))),
        _ => return Err(TransformError::Reduction(format!("`{}` is used by more than one statement", target.var))),
    };
    let (lv, e) = accumulation(&l.body[pos], target).map_err(TransformError::Reduction)?;
    if let LValue::Index { index, .. } = &lv {
        let mut names = Vec::new();
        index.collect_names(&mut names);
        if let Some(n) = names.iter().find(|n| **n == l.index || l.body.iter().any(|s| s.writes(n))) {
            return Err(TransformError::Reduction(format!("the accumulated element moves with `{n}`")));
        }
    }

    let op = target.op.bin_op();
    let accs: Vec<String> = (0..factor).map(|k| namer.fresh(&format!("{}{k}", target.var))).collect();
    let with_acc = |body: &[Stmt], acc: &str, e: Expr| -> Vec<Stmt> {
        let mut b = body.to_vec();
        b[pos] = accumulate(acc, op, e);
        b
    };

    let mut out: Vec<Stmt> = accs
        .iter()
        .enumerate()
        .map(|(k, acc)| Stmt::DeclInit {
            name: acc.clone(),
            ty: target.ty,
            init: if k == 0 { lv.as_expr() } else { target.op.identity(target.ty) },
        })
        .collect();

    let mut body = Vec::new();
    for (k, acc) in accs.iter().enumerate() {
        let with = offset(&l.index, k as i64);
        let copy = with_acc(&substitute_block(&l.body, &l.index, &with), acc, e.substitute(&l.index, &with));
        if declares(&l.body) {
            body.push(Stmt::Block(copy));
        } else {
            body.extend(copy);
        }
    }
    let upper = if nocheck { l.upper.clone() } else { fold::sub(l.upper.clone(), Expr::Int(factor - 1)) };
    out.push(Stmt::Loop(Loop { index: l.index.clone(), lower: l.lower.clone(), upper, step: factor, body }));
    if !nocheck {
        let rest = with_acc(&l.body, &accs[0], e.clone());
        out.push(Stmt::Loop(Loop {
            index: l.index.clone(),
            lower: remainder_start(l, factor),
            upper: l.upper.clone(),
            step: 1,
            body: rest,
        }));
    }
    let combined = accs.iter().skip(1).fold(var(accs[0].as_str()), |acc, a| binary(op, acc, var(a.as_str())));
    out.push(Stmt::Assign { target: lv, value: combined });
    Ok(out)
}

/// Unrolls `outer` by `factor` and fuses the copies of its inner loop.
///
/// The body must be straight-line statements followed by one inner loop
/// whose bounds do not depend on the outer index. The straight-line copies
/// come first, then a single inner loop holding the inner-body copies. A
/// remainder loop in the original form handles leftover iterations.
pub fn jam(outer: &Loop, factor: i64) -> Result<Vec<Stmt>, TransformError> {
    check_factor("jam factor", 2, factor)?;
    require_unit_step(outer)?;
    require_invariant_bounds(outer, &outer.body)?;
    let Some((Stmt::Loop(inner), prefix)) = outer.body.split_last() else {
        return Err(TransformError::JamShape("the body does not end with a loop".into()));
    };
    if let Some(s) =
        prefix.iter().find(|s| !matches!(s, Stmt::Assign { .. } | Stmt::CompoundAssign { .. } | Stmt::Stall(_)))
    {
        let what = match s {
            Stmt::Loop(_) => "a second loop",
            Stmt::DeclInit { .. } => "a declaration",
            _ => "a compound statement",
        };
        return Err(TransformError::JamShape(format!("the body contains {what} before the inner loop")));
    }
    require_unit_step(inner)?;
    let mut names = Vec::new();
    inner.lower.collect_names(&mut names);
    inner.upper.collect_names(&mut names);
    if let Some(n) = names.iter().find(|n| **n == outer.index || outer.body.iter().any(|s| s.writes(n))) {
        return Err(TransformError::JamShape(format!("the inner bounds depend on `{n}`")));
    }

    let mut body: Vec<Stmt> = Vec::new();
    for k in 0..factor {
        body.extend(substitute_block(prefix, &outer.index, &offset(&outer.index, k)));
    }
    let inner_body = (0..factor).flat_map(|k| copy_body(&inner.body, &outer.index, &offset(&outer.index, k))).collect();
    body.push(Stmt::Loop(Loop { body: inner_body, ..inner.clone() }));

    let main = Loop {
        index: outer.index.clone(),
        lower: outer.lower.clone(),
        upper: fold::sub(outer.upper.clone(), Expr::Int(factor - 1)),
        step: factor,
        body,
    };
    let rest = Loop { lower: remainder_start(outer, factor), ..outer.clone() };
    Ok(vec![Stmt::Loop(main), Stmt::Loop(rest)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::emit_expr;
    use crate::ir::*;

    fn fill_loop() -> Loop {
        Loop::new("i", int(0), var("N"), vec![assign(elem("n", var("i")), int(10) * var("i"))])
    }

    #[test]
    fn checked_partial_unroll_shape() {
        let out = unroll_partial(&fill_loop(), 5, false).unwrap();
        let [Stmt::Loop(main), Stmt::Loop(rest)] = out.as_slice() else { panic!("{out:?}") };
        assert_eq!((emit_expr(&main.upper), main.step, main.body.len()), ("N - 4".into(), 5, 5));
        assert_eq!(main.body[3], assign(elem("n", var("i") + int(3)), int(10) * (var("i") + int(3))));
        assert_eq!(emit_expr(&rest.lower), "N / 5 * 5");
        assert_eq!(rest.body, fill_loop().body);
    }

    #[test]
    fn factor_one_is_identity() {
        assert_eq!(unroll_partial(&fill_loop(), 1, false).unwrap(), vec![Stmt::Loop(fill_loop())]);
        assert!(unroll_partial(&fill_loop(), 0, false).is_err());
    }

    #[test]
    fn full_unroll_substitutes_literals() {
        let l = Loop::new("i", int(0), int(3), fill_loop().body);
        let out = unroll_full(&l).unwrap();
        assert_eq!(out[2], assign(elem("n", int(2)), int(10) * int(2)));
        assert!(unroll_full(&Loop::new("i", int(5), int(5), vec![])).unwrap().is_empty());
        assert_eq!(unroll_full(&fill_loop()), Err(TransformError::NonConstantBounds));
    }

    #[test]
    fn reduction_split_shape() {
        let body = vec![compound(scalar("sum"), BinOp::Add, int(1) / cast(ScalarType::Float, var("i") + int(1)))];
        let l = Loop::new("i", int(0), var("len"), body);
        let t = ReductionTarget { var: "sum".into(), op: ReductionOp::Add, ty: ScalarType::Float };
        let mut namer = FreshNamer::new(["sum", "i", "len"]);
        let out = unroll_reduction(&l, 2, &t, false, &mut namer).unwrap();
        assert_eq!(out[0], decl("sum0", ScalarType::Float, var("sum")));
        assert_eq!(out[1], decl("sum1", ScalarType::Float, float(0.0)));
        let Stmt::Loop(main) = &out[2] else { panic!() };
        assert_eq!(
            main.body[1],
            compound(scalar("sum1"), BinOp::Add, int(1) / cast(ScalarType::Float, var("i") + int(1) + int(1)))
        );
        assert_eq!(out[4], assign(scalar("sum"), var("sum0") + var("sum1")));
    }

    #[test]
    fn reduction_rejects_other_shapes() {
        let t = ReductionTarget { var: "s".into(), op: ReductionOp::Add, ty: ScalarType::Int };
        let mut namer = FreshNamer::default();
        let overwrite = Loop::new("i", int(0), int(4), vec![assign(scalar("s"), var("i"))]);
        assert!(matches!(unroll_reduction(&overwrite, 2, &t, false, &mut namer), Err(TransformError::Reduction(_))));
        let twice = Loop::new(
            "i",
            int(0),
            int(4),
            vec![compound(scalar("s"), BinOp::Add, var("i")), compound(scalar("s"), BinOp::Add, int(1))],
        );
        assert!(matches!(unroll_reduction(&twice, 2, &t, false, &mut namer), Err(TransformError::Reduction(_))));
        let mul = Loop::new("i", int(0), int(4), vec![compound(scalar("s"), BinOp::Mul, var("i"))]);
        assert!(matches!(unroll_reduction(&mul, 2, &t, false, &mut namer), Err(TransformError::Reduction(_))));
    }

    #[test]
    fn jam_hoists_prefix_and_fuses_inner() {
        let inner =
            Loop::new("j", int(0), var("len"), vec![compound(elem("A", var("i")), BinOp::Add, var("i") * var("j"))]);
        let outer = Loop::new("i", int(0), var("len"), vec![assign(elem("A", var("i")), int(0)), Stmt::Loop(inner)]);
        let out = jam(&outer, 2).unwrap();
        let Stmt::Loop(main) = &out[0] else { panic!() };
        assert_eq!(main.body[1], assign(elem("A", var("i") + int(1)), int(0)));
        let Stmt::Loop(j) = &main.body[2] else { panic!() };
        assert_eq!(j.body.len(), 2);
        assert_eq!(j.body[1], compound(elem("A", var("i") + int(1)), BinOp::Add, (var("i") + int(1)) * var("j")));

        let tri = Loop::new("i", int(0), int(4), vec![Stmt::Loop(Loop::new("j", int(0), var("i"), vec![]))]);
        assert!(matches!(jam(&tri, 2), Err(TransformError::JamShape(_))));
    }
}
