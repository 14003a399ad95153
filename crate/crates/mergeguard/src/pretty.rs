//! Canonical pretty-printer: skip-normalized, two-space indent, holes render
//! as `<?HOLE?>`. `parse(pretty_print(s))` round-trips to a statement equal
//! to `s` modulo skip normalization.

use crate::ast::*;

pub fn pretty_print_stmt(s: &Stmt) -> String {
    pretty_print(&s.clone().into())
}

pub fn pretty_print(h: &HStmt) -> String {
    let mut out = String::new();
    emit(&normalize_h(h), 0, &mut out);
    // Drop the trailing newline for single-line ergonomics in reports.
    if out.ends_with('\n') {
        out.pop();
    }
    out
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn emit(h: &HStmt, level: usize, out: &mut String) {
    match h {
        HStmt::Hole => {
            indent(level, out);
            out.push_str("<?HOLE?>\n");
        }
        HStmt::Atom(Atom::Skip) => {
            indent(level, out);
            out.push_str("skip;\n");
        }
        HStmt::Atom(Atom::Assign(x, e)) => {
            indent(level, out);
            out.push_str(&format!("{x} := {};\n", expr(e, 0)));
        }
        HStmt::Atom(Atom::ArrayAssign(a, i, e)) => {
            indent(level, out);
            out.push_str(&format!("{a}[{}] := {};\n", expr(i, 0), expr(e, 0)));
        }
        HStmt::Seq(a, b) => {
            emit(a, level, out);
            emit(b, level, out);
        }
        HStmt::If(c, t, e) => {
            indent(level, out);
            out.push_str(&format!("if ({}) {{\n", pred(c, 0)));
            emit(t, level + 1, out);
            indent(level, out);
            out.push_str("} else {\n");
            emit(e, level + 1, out);
            indent(level, out);
            out.push_str("}\n");
        }
        HStmt::While(c, b) => {
            indent(level, out);
            out.push_str(&format!("while ({}) {{\n", pred(c, 0)));
            emit(b, level + 1, out);
            indent(level, out);
            out.push_str("}\n");
        }
    }
}

/// Expression with minimal parentheses; `prec` is the caller's binding level
/// (0 = additive context, 1 = multiplicative, 2 = atom).
fn expr(e: &Expr, prec: u8) -> String {
    match e {
        Expr::Int(n) => n.to_string(),
        Expr::Var(x) => x.clone(),
        Expr::ArrayRead(a, i) => format!("{a}[{}]", expr(i, 0)),
        Expr::Bin(op, l, r) => {
            let (sym, my_prec) = match op {
                BinOp::Add => ("+", 1u8),
                BinOp::Sub => ("-", 1),
                BinOp::Mul => ("*", 2),
            };
            // Left-associative: the right child needs parens at equal
            // precedence (a - (b - c)), the left child does not.
            let s = format!(
                "{} {sym} {}",
                expr(l, my_prec - 1),
                expr(r, my_prec)
            );
            if my_prec <= prec {
                format!("({s})")
            } else {
                s
            }
        }
    }
}

/// Predicate with minimal parentheses. Binding levels: `||` = 1, `&&` = 2,
/// comparisons and constants = 3; a subterm is parenthesized when its level
/// is below the context's minimum.
fn pred(p: &Pred, min_level: u8) -> String {
    let (s, level) = match p {
        Pred::Bool(b) => (b.to_string(), 3),
        Pred::Cmp(op, l, r) => {
            let sym = match op {
                CmpOp::Eq => "==",
                CmpOp::Ne => "!=",
                CmpOp::Lt => "<",
                CmpOp::Le => "<=",
                CmpOp::Gt => ">",
                CmpOp::Ge => ">=",
            };
            (format!("{} {sym} {}", expr(l, 0), expr(r, 0)), 3)
        }
        Pred::And(a, b) => (format!("{} && {}", pred(a, 2), pred(b, 3)), 2),
        Pred::Or(a, b) => (format!("{} || {}", pred(a, 1), pred(b, 2)), 1),
        Pred::Not(a) => {
            // Always parenthesize under `!` except for nested negations;
            // `!x == 1` would re-parse as negating the whole comparison.
            let inner = match &**a {
                Pred::Not(_) => pred(a, 3),
                _ => format!("({})", pred(a, 0)),
            };
            (format!("!{inner}"), 3)
        }
    };
    if level < min_level {
        format!("({s})")
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse, parse_with_holes};

    #[test]
    fn skip_prints_canonically() {
        assert_eq!(pretty_print_stmt(&Stmt::skip()), "skip;");
    }

    #[test]
    fn holes_render_with_marker() {
        let h = parse_with_holes("if (c > 0) { <?HOLE?> } else { <?HOLE?> } <?HOLE?>").unwrap();
        let text = pretty_print(&h);
        assert_eq!(text.matches("<?HOLE?>").count(), 3);
        let back = parse_with_holes(&text).unwrap();
        assert!(hstmt_equal(&back, &h));
    }

    #[test]
    fn roundtrip_examples() {
        for src in [
            "x := (a + b) * c - -3;",
            "while (i < n && !(x == 0)) { a[i] := i * 2; i := i + 1; }",
            "if (x > 0 || y <= z) { skip; } else { out[1] := x - y - z; }",
            "x := a - (b - c);",
            "x := a * (b + c);",
        ] {
            let ast = parse(src).unwrap();
            let printed = pretty_print_stmt(&ast);
            let back = parse(&printed).unwrap();
            assert!(stmt_equal(&ast, &back), "{src} -> {printed}");
        }
    }
}
