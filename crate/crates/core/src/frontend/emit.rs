use std::fmt::Write;

use crate::ir::{BinOp, Directive, DirectiveKind, Expr, LValue, Loop, LoopSite, ParamKind, Program, Stmt};

const INDENT: &str = "  ";

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op: BinOp::Lt, .. } => 1,
        Expr::Binary { op: BinOp::Add | BinOp::Sub, .. } => 2,
        Expr::Binary { op: BinOp::Mul | BinOp::Div | BinOp::Rem, .. } => 3,
        Expr::Cast { .. } => 4,
        // min/max print fully parenthesised, negative literals too
        _ => 5,
    }
}

fn float_literal(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "1e999".into() } else { "(-1e999)".into() };
    }
    let text = format!("{v:?}");
    if v.is_sign_negative() {
        format!("({text})")
    } else {
        text
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Int(v) if *v < 0 => write!(out, "({v})").unwrap(),
        Expr::Int(v) => write!(out, "{v}").unwrap(),
        Expr::Float(v) => out.push_str(&float_literal(*v)),
        Expr::Var(name) => out.push_str(name),
        Expr::Index { array, index } => {
            out.push_str(array);
            out.push('[');
            write_expr(out, index);
            out.push(']');
        }
        Expr::Binary { op: op @ (BinOp::Min | BinOp::Max), lhs, rhs } => {
            // min(a, b) -> (a > b ? b : a); max(a, b) -> (a < b ? b : a)
            let cmp = if *op == BinOp::Min { ">" } else { "<" };
            out.push('(');
            write_operand(out, lhs, 2, false);
            write!(out, " {cmp} ").unwrap();
            write_operand(out, rhs, 2, false);
            out.push_str(" ? ");
            write_expr(out, rhs);
            out.push_str(" : ");
            write_expr(out, lhs);
            out.push(')');
        }
        Expr::Binary { op, lhs, rhs } => {
            let p = precedence(e);
            write_operand(out, lhs, p, *op == BinOp::Lt);
            write!(out, " {} ", op.symbol()).unwrap();
            write_operand(out, rhs, p, true);
        }
        Expr::Cast { to, inner } => {
            write!(out, "({to})").unwrap();
            write_operand(out, inner, 4, false);
        }
    }
}

/// Writes `e` as an operand of an operator with precedence `parent`;
/// `strict` also parenthesises equal precedence (right operands, `<`).
fn write_operand(out: &mut String, e: &Expr, parent: u8, strict: bool) {
    let p = precedence(e);
    if p < parent || (strict && p == parent) {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

pub fn emit_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn emit_lvalue(t: &LValue) -> String {
    emit_expr(&t.as_expr())
}

fn directive_text(d: &Directive) -> String {
    let mut s = String::from("#pragma omp ");
    match &d.kind {
        DirectiveKind::Tile { sizes } => {
            let list: Vec<String> = sizes.iter().map(|v| v.to_string()).collect();
            write!(s, "tile sizes({})", list.join(", ")).unwrap();
        }
        DirectiveKind::UnrollPartial { factor } => write!(s, "unroll partial({factor})").unwrap(),
        DirectiveKind::UnrollFull => s.push_str("unroll full"),
    }
    if d.nocheck {
        s.push_str(" nocheck");
    }
    if let Some(r) = &d.reduction {
        write!(s, " reduction({}:{})", r.var, r.op.symbol()).unwrap();
    }
    s
}

/// The loop condition only admits additive expressions on the right.
fn bound(e: &Expr) -> String {
    let mut s = String::new();
    write_operand(&mut s, e, 2, false);
    s
}

struct Emitter<'p> {
    program: &'p Program,
    out: String,
    next_site: usize,
}

impl Emitter<'_> {
    fn line(&mut self, depth: usize, text: &str) {
        for _ in 0..depth {
            self.out.push_str(INDENT);
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn block(&mut self, body: &[Stmt], depth: usize) {
        for s in body {
            self.stmt(s, depth);
        }
    }

    fn stmt(&mut self, s: &Stmt, depth: usize) {
        match s {
            Stmt::Assign { target, value } => {
                self.line(depth, &format!("{} = {};", emit_lvalue(target), emit_expr(value)));
            }
            Stmt::CompoundAssign { target, op, value } => {
                self.line(depth, &format!("{} {}= {};", emit_lvalue(target), op.symbol(), emit_expr(value)));
            }
            Stmt::Loop(l) => self.lp(l, depth),
            Stmt::Block(body) => {
                self.line(depth, "{");
                self.block(body, depth + 1);
                self.line(depth, "}");
            }
            Stmt::DeclInit { name, ty, init } => {
                self.line(depth, &format!("{ty} {name} = {};", emit_expr(init)));
            }
            Stmt::Stall(e) => self.line(depth, &format!("stall_us({});", emit_expr(e))),
            Stmt::Omp { directive, body } => {
                self.line(depth, &format!("#pragma omp {directive}"));
                if let Some(b) = body {
                    self.stmt(b, depth);
                }
            }
        }
    }

    fn lp(&mut self, l: &Loop, depth: usize) {
        let site = LoopSite(self.next_site);
        self.next_site += 1;
        if let Some(d) = self.program.directives.get(&site) {
            self.line(depth, &directive_text(d));
        }
        let incr = if l.step == 1 { format!("{}++", l.index) } else { format!("{} += {}", l.index, l.step) };
        self.line(
            depth,
            &format!(
                "for (int {i} = {lo}; {i} < {hi}; {incr}) {{",
                i = l.index,
                lo = emit_expr(&l.lower),
                hi = bound(&l.upper)
            ),
        );
        self.block(&l.body, depth + 1);
        self.line(depth, "}");
    }
}

/// Prints a program as a C99 function. Deterministic; re-parses to a
/// structurally identical program.
pub fn emit_source(program: &Program) -> String {
    let params: Vec<String> = program
        .params
        .iter()
        .map(|p| match &p.kind {
            ParamKind::Int => format!("int {}", p.name),
            ParamKind::IntArray { extent } => format!("int {}[{}]", p.name, emit_expr(extent)),
            ParamKind::FloatArray { extent } => format!("float {}[{}]", p.name, emit_expr(extent)),
        })
        .collect();
    let params = if params.is_empty() { "void".to_owned() } else { params.join(", ") };
    let mut e = Emitter { program, out: String::new(), next_site: 0 };
    e.line(0, &format!("void {}({params}) {{", program.name));
    e.block(&program.body, 1);
    e.line(0, "}");
    e.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::*;

    #[test]
    fn min_uses_ternary_form() {
        let e = min(var("r0") + int(8), var("N"));
        assert_eq!(emit_expr(&e), "(r0 + 8 > N ? N : r0 + 8)");
        assert_eq!(emit_expr(&max(var("a"), var("b"))), "(a < b ? b : a)");
    }

    #[test]
    fn parentheses_follow_associativity() {
        assert_eq!(emit_expr(&(var("a") - (var("b") - var("c")))), "a - (b - c)");
        assert_eq!(emit_expr(&((var("a") - var("b")) - var("c"))), "a - b - c");
        assert_eq!(emit_expr(&((var("row") * var("N")) + var("k"))), "row * N + k");
        assert_eq!(emit_expr(&cast(ScalarType::Float, var("i") + int(1))), "(float)(i + 1)");
        assert_eq!(emit_expr(&(var("x") * int(-3))), "x * (-3)");
    }
}
