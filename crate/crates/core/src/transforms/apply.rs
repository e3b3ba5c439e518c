use std::collections::BTreeMap;

use super::{tile, unroll_full, unroll_partial, unroll_reduction, FreshNamer, ReductionTarget, TransformError};
use crate::ir::{Directive, DirectiveKind, Loop, LoopSite, Program, ScalarType, Stmt};
use crate::validate::validate;

/// One transformation to perform at one loop site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformRequest {
    pub target: LoopSite,
    pub directive: Directive,
}

struct Rewriter<'p> {
    program: &'p Program,
    namer: FreshNamer,
    next_site: usize,
    scopes: Vec<Vec<(String, ScalarType)>>,
}

impl Rewriter<'_> {
    fn type_of(&self, name: &str) -> Result<ScalarType, TransformError> {
        let declared = self.scopes.iter().rev().flat_map(|s| s.iter().rev()).find(|(n, _)| n == name);
        if let Some((_, ty)) = declared {
            return Ok(*ty);
        }
        self.program
            .param(name)
            .map(|p| p.kind.element())
            .ok_or_else(|| TransformError::UnknownReductionType(name.to_owned()))
    }

    fn block(&mut self, body: &[Stmt]) -> Result<Vec<Stmt>, TransformError> {
        self.scopes.push(Vec::new());
        let mut out = Vec::with_capacity(body.len());
        for s in body {
            out.extend(self.stmt(s)?);
        }
        self.scopes.pop();
        Ok(out)
    }

    fn stmt(&mut self, s: &Stmt) -> Result<Vec<Stmt>, TransformError> {
        Ok(match s {
            Stmt::DeclInit { name, ty, .. } => {
                self.scopes.last_mut().expect("scope").push((name.clone(), *ty));
                vec![s.clone()]
            }
            Stmt::Loop(l) => self.lp(l)?,
            Stmt::Block(b) => vec![Stmt::Block(self.block(b)?)],
            Stmt::Omp { directive, body: Some(b) } => {
                let mut inner = self.stmt(b)?;
                let body = if inner.len() == 1 { inner.pop().unwrap() } else { Stmt::Block(inner) };
                vec![Stmt::Omp { directive: directive.clone(), body: Some(Box::new(body)) }]
            }
            _ => vec![s.clone()],
        })
    }

    fn lp(&mut self, l: &Loop) -> Result<Vec<Stmt>, TransformError> {
        let site = LoopSite(self.next_site);
        self.next_site += 1;
        self.scopes.push(vec![(l.index.clone(), ScalarType::Int)]);
        let body = self.block(&l.body);
        self.scopes.pop();
        let rewritten = Loop { body: body?, ..l.clone() };
        match self.program.directives.get(&site) {
            None => Ok(vec![Stmt::Loop(rewritten)]),
            Some(d) => self.apply(&rewritten, d).map_err(|e| TransformError::AtSite { site, source: Box::new(e) }),
        }
    }

    fn apply(&mut self, l: &Loop, d: &Directive) -> Result<Vec<Stmt>, TransformError> {
        match (&d.kind, &d.reduction) {
            (DirectiveKind::Tile { sizes }, _) => Ok(vec![Stmt::Loop(tile(l, sizes, d.nocheck, &mut self.namer)?)]),
            (DirectiveKind::UnrollPartial { factor }, Some(r)) if *factor >= 2 => {
                let target = ReductionTarget { var: r.var.clone(), op: r.op, ty: self.type_of(&r.var)? };
                unroll_reduction(l, *factor, &target, d.nocheck, &mut self.namer)
            }
            (DirectiveKind::UnrollPartial { factor }, _) => unroll_partial(l, *factor, d.nocheck),
            // Full unrolling leaves no loop to split accumulators across.
            (DirectiveKind::UnrollFull, _) => unroll_full(l),
        }
    }
}

/// Replaces every directive by the result of its transformation.
///
/// Inner loops are rewritten before the loops that contain them. The result
/// has no directives and passes validation.
pub fn apply_directives(program: &Program) -> Result<Program, TransformError> {
    let report = validate(program);
    if !report.is_ok() {
        return Err(TransformError::Invalid(report.to_string()));
    }
    let mut rw = Rewriter { program, namer: FreshNamer::for_program(program), next_site: 0, scopes: Vec::new() };
    let body = rw.block(&program.body)?;
    let out = Program { name: program.name.clone(), params: program.params.clone(), body, directives: BTreeMap::new() };
    let report = validate(&out);
    if !report.is_ok() {
        return Err(TransformError::Invalid(report.to_string()));
    }
    Ok(out)
}

/// Applies a single transformation, ignoring any directives already present.
pub fn apply_request(program: &Program, request: &TransformRequest) -> Result<Program, TransformError> {
    if program.loop_at(request.target).is_none() {
        return Err(TransformError::NoSuchSite(request.target));
    }
    let mut p = program.clone();
    p.directives = BTreeMap::from([(request.target, request.directive.clone())]);
    apply_directives(&p)
}
