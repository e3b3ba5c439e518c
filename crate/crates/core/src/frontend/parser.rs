use std::collections::{BTreeMap, HashMap, HashSet};

use super::lexer::{Lexer, Tok, Token};
use super::{ParseError, ParseErrorKind, SourceSpan};
use crate::ir::{
    binary, BinOp, Directive, DirectiveKind, Expr, LValue, Loop, LoopSite, Param, ParamKind, Program, ReductionClause,
    ReductionOp, ScalarType, Stmt,
};
use crate::validate::{validate, Location};

/// OpenMP directives that stand alone and take no associated statement.
const STANDALONE: &[&str] = &["barrier", "taskwait", "taskyield", "flush"];

const UNSUPPORTED_KEYWORDS: &[&str] =
    &["while", "do", "if", "else", "switch", "return", "goto", "break", "continue", "struct", "double", "long", "char"];

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    next_site: usize,
    directives: BTreeMap<LoopSite, Directive>,
    loop_spans: HashMap<LoopSite, SourceSpan>,
    directive_spans: HashMap<LoopSite, SourceSpan>,
    stmt_spans: HashMap<Vec<usize>, SourceSpan>,
    param_spans: HashMap<String, SourceSpan>,
    path: Vec<usize>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    pub fn new(source: &str) -> PResult<Self> {
        Ok(Parser {
            toks: Lexer::new(source).tokenize()?,
            pos: 0,
            next_site: 0,
            directives: BTreeMap::new(),
            loop_spans: HashMap::new(),
            directive_spans: HashMap::new(),
            stmt_spans: HashMap::new(),
            param_spans: HashMap::new(),
            path: Vec::new(),
        })
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn peek_at(&self, off: usize) -> &Tok {
        &self.toks[(self.pos + off).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> SourceSpan {
        self.peek().span
    }

    fn advance(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(&self.peek().tok, Tok::Punct(q) if *q == p)
    }

    fn is_ident(&self, word: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(w) if w == word)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Ident(w) => format!("`{w}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Float(v) => format!("`{v}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Pragma(_) => "pragma".to_owned(),
            Tok::Eof => "end of input".to_owned(),
        }
    }

    fn syntax<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ParseError::new(ParseErrorKind::Syntax, self.span(), message))
    }

    fn unsupported<T>(span: SourceSpan, message: impl Into<String>) -> PResult<T> {
        Err(ParseError::new(ParseErrorKind::UnsupportedConstruct, span, message))
    }

    fn expect_punct(&mut self, p: &str) -> PResult<SourceSpan> {
        if self.is_punct(p) {
            Ok(self.advance().span)
        } else {
            self.syntax(format!("expected `{p}`, found {}", Self::describe(&self.peek().tok)))
        }
    }

    fn expect_ident(&mut self) -> PResult<(String, SourceSpan)> {
        match &self.peek().tok {
            Tok::Ident(w) => {
                let w = w.clone();
                Ok((w, self.advance().span))
            }
            other => self.syntax(format!("expected identifier, found {}", Self::describe(other))),
        }
    }

    fn scalar_type(&self) -> Option<ScalarType> {
        match &self.peek().tok {
            Tok::Ident(w) if w == "int" => Some(ScalarType::Int),
            Tok::Ident(w) if w == "float" => Some(ScalarType::Float),
            _ => None,
        }
    }

    // ---- program -------------------------------------------------------

    pub fn program(mut self) -> PResult<Program> {
        let mut program = if self.is_ident("void") { self.function()? } else { self.bare()? };
        program.directives = std::mem::take(&mut self.directives);
        self.check(&program)?;
        Ok(program)
    }

    fn function(&mut self) -> PResult<Program> {
        self.advance();
        let (name, _) = self.expect_ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if self.is_ident("void") && matches!(self.peek_at(1), Tok::Punct(")")) {
            self.advance();
        }
        if !self.is_punct(")") {
            loop {
                params.push(self.param()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        self.expect_punct("{")?;
        let body = self.items_until_close()?;
        if !matches!(self.peek().tok, Tok::Eof) {
            return self.syntax(format!("unexpected {} after kernel body", Self::describe(&self.peek().tok)));
        }
        Ok(Program::new(name, params, body))
    }

    fn param(&mut self) -> PResult<Param> {
        let span = self.span();
        let Some(ty) = self.scalar_type() else {
            return Self::unsupported(span, "parameters must be `int` or `float`");
        };
        self.advance();
        let (name, _) = self.expect_ident()?;
        let kind = if self.eat_punct("[") {
            let extent = self.expr()?;
            self.expect_punct("]")?;
            match ty {
                ScalarType::Int => ParamKind::IntArray { extent },
                ScalarType::Float => ParamKind::FloatArray { extent },
            }
        } else if ty == ScalarType::Int {
            ParamKind::Int
        } else {
            return Self::unsupported(span, "scalar `float` parameters are not supported");
        };
        self.param_spans.insert(name.clone(), span);
        Ok(Param { name, kind })
    }

    /// A bare statement list: uninitialised top-level declarations become
    /// parameters, and free scalar identifiers become implicit `int`
    /// parameters.
    fn bare(&mut self) -> PResult<Program> {
        let mut params = Vec::new();
        let mut body = Vec::new();
        while !matches!(self.peek().tok, Tok::Eof) {
            let is_param_decl = self.scalar_type().is_some()
                && matches!(self.peek_at(1), Tok::Ident(_))
                && matches!(self.peek_at(2), Tok::Punct(";") | Tok::Punct("["));
            if is_param_decl {
                let p = self.param()?;
                self.expect_punct(";")?;
                if !params.iter().any(|q: &Param| q.name == p.name) {
                    params.push(p);
                }
                continue;
            }
            self.path.push(body.len());
            let s = self.stmt();
            self.path.pop();
            body.push(s?);
        }
        // `int i;` ahead of `for (i = 0; ...)` only declares the loop index.
        let mut indices = Vec::new();
        for s in &body {
            collect_indices(s, &mut indices);
        }
        params.retain(|p| !(p.kind == ParamKind::Int && indices.contains(&p.name)));
        let declared: HashSet<String> = params.iter().map(|p| p.name.clone()).collect();
        let mut implicit = Vec::new();
        for p in &params {
            if let Some(e) = p.kind.extent() {
                free_in_expr(e, std::slice::from_ref(&declared), &mut implicit);
            }
        }
        free_in_block(&body, &mut vec![declared.clone()], &mut implicit);
        let mut all: Vec<Param> = implicit.into_iter().map(Param::int).collect();
        all.extend(params);
        Ok(Program::new("kernel", all, body))
    }

    fn items_until_close(&mut self) -> PResult<Vec<Stmt>> {
        let mut body = Vec::new();
        loop {
            if self.eat_punct("}") {
                return Ok(body);
            }
            if matches!(self.peek().tok, Tok::Eof) {
                return self.syntax("expected `}`, found end of input");
            }
            self.path.push(body.len());
            let s = self.stmt();
            self.path.pop();
            body.push(s?);
        }
    }

    // ---- statements ----------------------------------------------------

    fn stmt(&mut self) -> PResult<Stmt> {
        let start = self.span();
        self.stmt_spans.entry(self.path.clone()).or_insert(start);
        let tok = self.peek().tok.clone();
        match tok {
            Tok::Pragma(text) => self.pragma_stmt(&text, start),
            Tok::Punct("{") => {
                self.advance();
                Ok(Stmt::Block(self.items_until_close()?))
            }
            Tok::Punct(";") => Self::unsupported(start, "empty statement"),
            Tok::Ident(w) if w == "for" => Ok(Stmt::Loop(self.for_loop(None)?)),
            Tok::Ident(w) if w == "int" || w == "float" => self.decl(),
            Tok::Ident(w) if w == "stall" || w == "stall_us" => {
                self.advance();
                self.expect_punct("(")?;
                let e = self.expr()?;
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                Ok(Stmt::Stall(e))
            }
            Tok::Ident(w) if UNSUPPORTED_KEYWORDS.contains(&w.as_str()) => {
                Self::unsupported(start, format!("`{w}` statements are not supported"))
            }
            Tok::Ident(_) => self.assignment(),
            other => self.syntax(format!("expected a statement, found {}", Self::describe(&other))),
        }
    }

    fn decl(&mut self) -> PResult<Stmt> {
        let start = self.span();
        let ty = self.scalar_type().expect("checked by caller");
        self.advance();
        let (name, _) = self.expect_ident()?;
        if !self.is_punct("=") {
            return Self::unsupported(start, format!("declaration of `{name}` needs an initializer"));
        }
        self.advance();
        let init = self.expr()?;
        self.expect_punct(";")?;
        Ok(Stmt::DeclInit { name, ty, init })
    }

    fn lvalue(&mut self) -> PResult<LValue> {
        let (name, span) = self.expect_ident()?;
        if self.is_punct("(") {
            return Self::unsupported(span, format!("call to `{name}` is not supported"));
        }
        if self.eat_punct("[") {
            let index = self.expr()?;
            self.expect_punct("]")?;
            Ok(LValue::Index { array: name, index })
        } else {
            Ok(LValue::Var(name))
        }
    }

    fn assignment(&mut self) -> PResult<Stmt> {
        let target = self.lvalue()?;
        let span = self.span();
        let op = match &self.peek().tok {
            Tok::Punct("=") => None,
            Tok::Punct("+=") => Some(BinOp::Add),
            Tok::Punct("-=") => Some(BinOp::Sub),
            Tok::Punct("*=") => Some(BinOp::Mul),
            Tok::Punct("/=") => Some(BinOp::Div),
            Tok::Punct("%=") => Some(BinOp::Rem),
            Tok::Punct("++") | Tok::Punct("--") => {
                return Self::unsupported(span, "increment statements outside a loop header are not supported")
            }
            other => return self.syntax(format!("expected assignment operator, found {}", Self::describe(other))),
        };
        self.advance();
        let value = self.expr()?;
        self.expect_punct(";")?;
        Ok(match op {
            None => Stmt::Assign { target, value },
            Some(op) => Stmt::CompoundAssign { target, op, value },
        })
    }

    fn for_loop(&mut self, directive: Option<(Directive, SourceSpan)>) -> PResult<Loop> {
        let for_span = self.advance().span;
        let site = LoopSite(self.next_site);
        self.next_site += 1;
        self.loop_spans.insert(site, for_span);
        if let Some((d, span)) = directive {
            self.directives.insert(site, d);
            self.directive_spans.insert(site, span);
        }
        self.expect_punct("(")?;
        if self.is_punct(";") {
            return Self::unsupported(for_span, "non-canonical loop: missing initialization");
        }
        if self.scalar_type() == Some(ScalarType::Int) {
            self.advance();
        } else if self.scalar_type().is_some() {
            return Self::unsupported(self.span(), "loop index must be an `int`");
        }
        let (index, _) = self.expect_ident()?;
        if !self.is_punct("=") {
            return Self::unsupported(for_span, "non-canonical loop: initialization must be `index = lower`");
        }
        self.advance();
        let lower = self.expr()?;
        self.expect_punct(";")?;

        let cond_span = self.span();
        let canonical_cond =
            matches!(&self.peek().tok, Tok::Ident(w) if *w == index) && matches!(self.peek_at(1), Tok::Punct("<"));
        if !canonical_cond {
            return Self::unsupported(cond_span, format!("non-canonical loop: condition must be `{index} < bound`"));
        }
        self.advance();
        self.advance();
        let upper = self.additive()?;
        self.expect_punct(";")?;

        let step = self.increment(&index, for_span)?;
        self.expect_punct(")")?;

        self.path.push(0);
        let body = if self.is_punct("{") {
            self.path.pop();
            let before = self.span();
            self.advance();
            self.stmt_spans.entry(self.path.clone()).or_insert(before);
            self.items_until_close()
        } else {
            let s = self.stmt();
            self.path.pop();
            s.map(|s| vec![s])
        }?;
        Ok(Loop { index, lower, upper, step, body })
    }

    fn increment(&mut self, index: &str, for_span: SourceSpan) -> PResult<i64> {
        let bad = |span| {
            Self::unsupported(span, format!("non-canonical loop: increment must be `{index}++` or `{index} += step`"))
        };
        let span = self.span();
        if self.eat_punct("++") {
            return match self.expect_ident() {
                Ok((w, _)) if w == index => Ok(1),
                _ => bad(span),
            };
        }
        match self.expect_ident() {
            Ok((w, _)) if w == index => {}
            _ => return bad(span),
        }
        let tok = self.advance().tok;
        match tok {
            Tok::Punct("++") => Ok(1),
            Tok::Punct("+=") => match self.advance().tok {
                Tok::Int(v) => Ok(v),
                _ => Self::unsupported(for_span, "loop step must be an integer literal"),
            },
            Tok::Punct("=") => {
                let ok = matches!(&self.advance().tok, Tok::Ident(w) if w == index)
                    && matches!(self.advance().tok, Tok::Punct("+"));
                match (ok, self.advance().tok) {
                    (true, Tok::Int(v)) => Ok(v),
                    _ => bad(span),
                }
            }
            _ => bad(span),
        }
    }

    // ---- pragmas -------------------------------------------------------

    fn pragma_stmt(&mut self, text: &str, span: SourceSpan) -> PResult<Stmt> {
        self.advance();
        let body_col = span.column + span.length - text.chars().count();
        let toks = Lexer::at(text, span.line, body_col).tokenize()?;
        let words: Vec<&Tok> = toks.iter().map(|t| &t.tok).collect();
        if !matches!(words.first(), Some(Tok::Ident(w)) if w == "omp") {
            return Err(ParseError::new(ParseErrorKind::BadPragma, span, "only `#pragma omp` is supported"));
        }
        let construct = match words.get(1) {
            Some(Tok::Ident(w)) => w.as_str(),
            _ => return Err(ParseError::new(ParseErrorKind::BadPragma, span, "missing OpenMP directive name")),
        };
        match construct {
            "tile" | "unroll" => {
                let directive = parse_transform_directive(&toks[1..], span)?;
                if !self.is_ident("for") {
                    return Err(ParseError::new(
                        ParseErrorKind::BadPragma,
                        span,
                        format!("`#pragma omp {construct}` must immediately precede a for loop"),
                    ));
                }
                Ok(Stmt::Loop(self.for_loop(Some((directive, span)))?))
            }
            _ => {
                let directive = text.split_whitespace().skip(1).collect::<Vec<_>>().join(" ");
                if STANDALONE.contains(&construct) {
                    return Ok(Stmt::Omp { directive, body: None });
                }
                if matches!(self.peek().tok, Tok::Punct("}") | Tok::Eof) {
                    return Err(ParseError::new(
                        ParseErrorKind::BadPragma,
                        span,
                        format!("`#pragma omp {construct}` is not followed by a statement"),
                    ));
                }
                let body = self.stmt()?;
                Ok(Stmt::Omp { directive, body: Some(Box::new(body)) })
            }
        }
    }

    // ---- expressions ---------------------------------------------------

    pub fn expr(&mut self) -> PResult<Expr> {
        let start = self.span();
        let lhs = self.additive()?;
        let cmp = match &self.peek().tok {
            Tok::Punct("<") => BinOp::Lt,
            Tok::Punct(">") => BinOp::Max,
            Tok::Punct(p @ ("<=" | ">=" | "==" | "!=" | "&&" | "||")) => {
                return Self::unsupported(self.span(), format!("operator `{p}` is not supported"))
            }
            _ => return Ok(lhs),
        };
        let greater = cmp == BinOp::Max;
        self.advance();
        let rhs = self.additive()?;
        if !self.eat_punct("?") {
            if greater {
                return Self::unsupported(start, "`>` is only supported inside a min/max ternary");
            }
            return Ok(binary(BinOp::Lt, lhs, rhs));
        }
        let then = self.expr()?;
        self.expect_punct(":")?;
        let otherwise = self.expr()?;
        // `a > b ? b : a` is min(a, b); `a < b ? b : a` is max(a, b).
        if then == rhs && otherwise == lhs {
            Ok(binary(if greater { BinOp::Min } else { BinOp::Max }, lhs, rhs))
        } else {
            Self::unsupported(start, "only min/max ternaries (`a > b ? b : a`, `a < b ? b : a`) are supported")
        }
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek().tok {
                Tok::Punct("+") => BinOp::Add,
                Tok::Punct("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            lhs = binary(op, lhs, self.multiplicative()?);
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Punct("*") => BinOp::Mul,
                Tok::Punct("/") => BinOp::Div,
                Tok::Punct("%") => BinOp::Rem,
                _ => return Ok(lhs),
            };
            self.advance();
            lhs = binary(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_punct("-") {
            return Ok(match self.peek().tok {
                Tok::Int(v) => {
                    self.advance();
                    Expr::Int(-v)
                }
                Tok::Float(v) => {
                    self.advance();
                    Expr::Float(-v)
                }
                _ => binary(BinOp::Sub, Expr::Int(0), self.unary()?),
            });
        }
        let is_cast = self.is_punct("(")
            && matches!(self.peek_at(1), Tok::Ident(w) if w == "int" || w == "float")
            && matches!(self.peek_at(2), Tok::Punct(")"));
        if is_cast {
            self.advance();
            let to = self.scalar_type().expect("checked");
            self.advance();
            self.advance();
            let inner = self.unary()?;
            return Ok(Expr::Cast { to, inner: Box::new(inner) });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        match self.advance().tok {
            Tok::Int(v) => Ok(Expr::Int(v)),
            Tok::Float(v) => Ok(Expr::Float(v)),
            Tok::Ident(name) => {
                if self.is_punct("(") {
                    return Self::unsupported(span, format!("call to `{name}` is not supported"));
                }
                if self.eat_punct("[") {
                    let index = self.expr()?;
                    self.expect_punct("]")?;
                    Ok(Expr::Index { array: name, index: Box::new(index) })
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Tok::Punct("(") => {
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            other => Err(ParseError::new(
                ParseErrorKind::Syntax,
                span,
                format!("expected an expression, found {}", Self::describe(&other)),
            )),
        }
    }

    // ---- post-parse checks ---------------------------------------------

    fn check(&self, program: &Program) -> PResult<()> {
        let report = validate(program);
        let Some(v) = report.violations.first() else {
            return Ok(());
        };
        let fallback = SourceSpan::new(1, 1, 0);
        let (kind, span) = match &v.location {
            Location::Directive(site) => {
                (ParseErrorKind::BadPragma, self.directive_spans.get(site).copied().unwrap_or(fallback))
            }
            Location::Loop(site) => {
                (ParseErrorKind::UnsupportedConstruct, self.loop_spans.get(site).copied().unwrap_or(fallback))
            }
            Location::Param(name) => (ParseErrorKind::Syntax, self.param_spans.get(name).copied().unwrap_or(fallback)),
            Location::Stmt(path) => {
                let mut p = path.clone();
                let span = loop {
                    if let Some(s) = self.stmt_spans.get(&p) {
                        break *s;
                    }
                    if p.pop().is_none() {
                        break fallback;
                    }
                };
                (ParseErrorKind::Syntax, span)
            }
        };
        Err(ParseError::new(kind, span, v.message.clone()))
    }
}

fn parse_transform_directive(toks: &[Token], span: SourceSpan) -> PResult<Directive> {
    let bad = |message: String| ParseError::new(ParseErrorKind::BadPragma, span, message);
    let mut i = 1;
    let tok = |i: usize| &toks[i.min(toks.len() - 1)].tok;
    let is_p = |i: usize, p: &str| matches!(tok(i), Tok::Punct(q) if *q == p);

    let int_list = |i: &mut usize| -> PResult<Vec<i64>> {
        if !is_p(*i, "(") {
            return Err(bad("expected `(`".into()));
        }
        *i += 1;
        let mut out = Vec::new();
        loop {
            match tok(*i) {
                Tok::Int(v) => out.push(*v),
                Tok::Ident(w) => return Err(bad(format!("`{w}` must be an integer literal"))),
                _ => return Err(bad("expected an integer literal".into())),
            }
            *i += 1;
            if is_p(*i, ",") {
                *i += 1;
                continue;
            }
            if is_p(*i, ")") {
                *i += 1;
                return Ok(out);
            }
            return Err(bad("expected `,` or `)`".into()));
        }
    };

    let kind = match tok(0) {
        Tok::Ident(w) if w == "tile" => {
            if matches!(tok(i), Tok::Ident(w) if w == "sizes") {
                i += 1;
            }
            DirectiveKind::Tile { sizes: int_list(&mut i)? }
        }
        Tok::Ident(w) if w == "unroll" => match tok(i) {
            Tok::Ident(w) if w == "partial" => {
                i += 1;
                let f = int_list(&mut i)?;
                if f.len() != 1 {
                    return Err(bad("`partial` takes exactly one factor".into()));
                }
                DirectiveKind::UnrollPartial { factor: f[0] }
            }
            Tok::Ident(w) if w == "full" => {
                i += 1;
                DirectiveKind::UnrollFull
            }
            _ => return Err(bad("`unroll` requires `partial(n)` or `full`".into())),
        },
        _ => unreachable!("caller checks the construct name"),
    };

    let mut d = Directive { kind, nocheck: false, reduction: None };
    loop {
        match tok(i) {
            Tok::Eof => break,
            Tok::Ident(w) if w == "nocheck" && !d.nocheck => {
                d.nocheck = true;
                i += 1;
            }
            Tok::Ident(w) if w == "reduction" && d.reduction.is_none() => {
                i += 1;
                if !is_p(i, "(") {
                    return Err(bad("expected `(` after `reduction`".into()));
                }
                let word = |t: &Tok| match t {
                    Tok::Ident(w) => Some(w.clone()),
                    Tok::Punct(p @ ("+" | "*")) => Some((*p).to_owned()),
                    _ => None,
                };
                let (Some(a), true, Some(b), true) =
                    (word(tok(i + 1)), is_p(i + 2, ":"), word(tok(i + 3)), is_p(i + 4, ")"))
                else {
                    return Err(bad("reduction clause must be `reduction(var:op)`".into()));
                };
                i += 5;
                let is_var = |s: &str| s.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
                let clause = if let (Some(op), true) = (ReductionOp::from_symbol(&b), is_var(&a)) {
                    ReductionClause { var: a, op }
                } else if let (Some(op), true) = (ReductionOp::from_symbol(&a), is_var(&b)) {
                    ReductionClause { var: b, op }
                } else {
                    return Err(bad(format!("unknown reduction operator in `reduction({a}:{b})`")));
                };
                d.reduction = Some(clause);
            }
            other => return Err(bad(format!("unexpected {} in directive", Parser::describe(other)))),
        }
    }
    if d.reduction.is_some() && matches!(d.kind, DirectiveKind::Tile { .. }) {
        return Err(bad("reduction clause is only valid on unroll".into()));
    }
    Ok(d)
}

fn free_in_expr(e: &Expr, scopes: &[HashSet<String>], out: &mut Vec<String>) {
    let mut names = Vec::new();
    match e {
        Expr::Index { index, .. } => free_in_expr(index, scopes, out),
        Expr::Var(v) => names.push(v.clone()),
        Expr::Binary { lhs, rhs, .. } => {
            free_in_expr(lhs, scopes, out);
            free_in_expr(rhs, scopes, out);
        }
        Expr::Cast { inner, .. } => free_in_expr(inner, scopes, out),
        Expr::Int(_) | Expr::Float(_) => {}
    }
    for n in names {
        if !scopes.iter().any(|s| s.contains(&n)) && !out.contains(&n) {
            out.push(n);
        }
    }
}

fn free_in_block(body: &[Stmt], scopes: &mut Vec<HashSet<String>>, out: &mut Vec<String>) {
    scopes.push(HashSet::new());
    for s in body {
        free_in_stmt(s, scopes, out);
    }
    scopes.pop();
}

fn free_in_stmt(s: &Stmt, scopes: &mut Vec<HashSet<String>>, out: &mut Vec<String>) {
    match s {
        Stmt::Assign { target, value } | Stmt::CompoundAssign { target, value, .. } => {
            if let LValue::Index { index, .. } = target {
                free_in_expr(index, scopes, out);
            } else {
                free_in_expr(&target.as_expr(), scopes, out);
            }
            free_in_expr(value, scopes, out);
        }
        Stmt::Loop(l) => {
            free_in_expr(&l.lower, scopes, out);
            free_in_expr(&l.upper, scopes, out);
            scopes.push(HashSet::from([l.index.clone()]));
            free_in_block(&l.body, scopes, out);
            scopes.pop();
        }
        Stmt::Block(b) => free_in_block(b, scopes, out),
        Stmt::DeclInit { name, init, .. } => {
            free_in_expr(init, scopes, out);
            scopes.last_mut().expect("scope").insert(name.clone());
        }
        Stmt::Stall(e) => free_in_expr(e, scopes, out),
        Stmt::Omp { body, .. } => {
            if let Some(b) = body {
                free_in_stmt(b, scopes, out);
            }
        }
    }
}

fn collect_indices(s: &Stmt, out: &mut Vec<String>) {
    match s {
        Stmt::Loop(l) => {
            out.push(l.index.clone());
            l.body.iter().for_each(|s| collect_indices(s, out));
        }
        Stmt::Block(b) => b.iter().for_each(|s| collect_indices(s, out)),
        Stmt::Omp { body: Some(b), .. } => collect_indices(b, out),
        _ => {}
    }
}
