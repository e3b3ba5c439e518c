use super::{nocheck_guard, require_invariant_bounds, require_unit_step, FreshNamer, TransformError};
use crate::ir::{min, var, Expr, Loop, ScalarType, Stmt};
use crate::validate::loop_nest_depth;

fn stem(index: &str) -> String {
    index.chars().next().map(String::from).unwrap_or_default()
}

/// Tiles the outermost `sizes.len()` loops of a perfect nest.
///
/// The result has every tile loop outermost, in the original order, then
/// every point loop, then whatever inner levels were not tiled. Point loops
/// keep the original index names. In checked mode each tile loop starts with
/// a `{c}max` clamp declaration bounding its point loop; in nocheck mode the
/// point loop runs a full tile.
pub fn tile(nest: &Loop, sizes: &[i64], nocheck: bool, namer: &mut FreshNamer) -> Result<Loop, TransformError> {
    if sizes.is_empty() {
        return Err(TransformError::BadFactor { what: "number of tile sizes", min: 1, value: 0 });
    }
    if let Some(&s) = sizes.iter().find(|&&s| s < 1) {
        return Err(TransformError::BadFactor { what: "tile size", min: 1, value: s });
    }
    let depth = loop_nest_depth(nest);
    if depth < sizes.len() {
        return Err(TransformError::NotPerfectNest { needed: sizes.len(), found: depth });
    }

    let mut levels = vec![nest];
    while levels.len() < sizes.len() {
        levels.push(levels.last().unwrap().perfect_child().expect("depth checked"));
    }
    let innermost = &levels.last().unwrap().body;
    for l in &levels {
        require_unit_step(l)?;
        for other in &levels {
            if l.lower.mentions(&other.index) || l.upper.mentions(&other.index) {
                return Err(TransformError::NonRectangular { index: l.index.clone(), name: other.index.clone() });
            }
        }
        require_invariant_bounds(l, innermost)?;
    }
    if nocheck {
        for (l, &s) in levels.iter().zip(sizes) {
            nocheck_guard(l, s)?;
        }
    }

    let names: Vec<(String, String)> = levels
        .iter()
        .map(|l| {
            let c = stem(&l.index);
            (namer.fresh(&format!("{c}0")), namer.fresh(&format!("{c}max")))
        })
        .collect();

    let mut body = innermost.clone();
    for (k, l) in levels.iter().enumerate().rev() {
        let (t, clamp) = &names[k];
        let upper = if nocheck { var(t.as_str()) + Expr::Int(sizes[k]) } else { var(clamp.as_str()) };
        body = vec![Stmt::Loop(Loop { index: l.index.clone(), lower: var(t.as_str()), upper, step: 1, body })];
    }
    for (k, l) in levels.iter().enumerate().rev() {
        let (t, clamp) = &names[k];
        if !nocheck {
            let init = min(var(t.as_str()) + Expr::Int(sizes[k]), l.upper.clone());
            body.insert(0, Stmt::DeclInit { name: clamp.clone(), ty: ScalarType::Int, init });
        }
        body = vec![Stmt::Loop(Loop {
            index: t.clone(),
            lower: l.lower.clone(),
            upper: l.upper.clone(),
            step: sizes[k],
            body,
        })];
    }
    match body.pop() {
        Some(Stmt::Loop(l)) => Ok(l),
        _ => unreachable!("built a loop"),
    }
}
