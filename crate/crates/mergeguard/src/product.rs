//! N-way product programs: a single statement semantically equivalent to the
//! sequential composition of the (variable-disjoint) input programs, built
//! so that similar loops run in lockstep.
//!
//! Construction: emit leading atoms directly; an `if` at the front embeds
//! the continuation into both branches; when every program starts with a
//! loop, all leading loops are fused into one lockstep loop guarded by the
//! conjunction of their guards, followed by plain copies of each loop so
//! whichever still has iterations left finishes alone. A node-count ceiling
//! turns the worst-case blow-up of branch embedding into a graceful
//! failure.

use crate::ast::*;
use std::collections::VecDeque;
use thiserror::Error;

pub type VersionTag = u8;

pub const DEFAULT_NODE_CEILING: usize = 50_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProductError {
    #[error("product exceeds {0} AST nodes")]
    TooLarge(usize),
    #[error("input programs share variable `{0}`")]
    SharedVariable(Ident),
}

/// Rename every identifier `x` to `x#tag`.
pub fn rename(s: &Stmt, tag: VersionTag) -> Stmt {
    map_idents(s, &|x| format!("{x}#{tag}"))
}

pub fn rename_pred(p: &Pred, tag: VersionTag) -> Pred {
    map_idents_pred(p, &|x| format!("{x}#{tag}"))
}

/// Base identifier with any `#tag` suffix removed.
pub fn strip_tag(x: &str) -> &str {
    match x.rfind('#') {
        Some(i) => &x[..i],
        None => x,
    }
}

fn tokens_of(s: &Stmt, out: &mut Vec<String>) {
    fn expr(e: &Expr, out: &mut Vec<String>) {
        match e {
            Expr::Int(n) => out.push(n.to_string()),
            Expr::Var(x) => out.push(strip_tag(x).to_string()),
            Expr::ArrayRead(a, i) => {
                out.push(strip_tag(a).to_string());
                out.push("[".into());
                expr(i, out);
                out.push("]".into());
            }
            Expr::Bin(op, l, r) => {
                expr(l, out);
                out.push(format!("{op:?}"));
                expr(r, out);
            }
        }
    }
    fn pred(p: &Pred, out: &mut Vec<String>) {
        match p {
            Pred::Bool(b) => out.push(b.to_string()),
            Pred::Cmp(op, l, r) => {
                expr(l, out);
                out.push(format!("{op:?}"));
                expr(r, out);
            }
            Pred::And(a, b) => {
                pred(a, out);
                out.push("&&".into());
                pred(b, out);
            }
            Pred::Or(a, b) => {
                pred(a, out);
                out.push("||".into());
                pred(b, out);
            }
            Pred::Not(a) => {
                out.push("!".into());
                pred(a, out);
            }
        }
    }
    match s {
        Stmt::Atom(Atom::Skip) => out.push("skip".into()),
        Stmt::Atom(Atom::Assign(x, e)) => {
            out.push(strip_tag(x).to_string());
            out.push(":=".into());
            expr(e, out);
        }
        Stmt::Atom(Atom::ArrayAssign(a, i, e)) => {
            out.push(strip_tag(a).to_string());
            out.push("[".into());
            expr(i, out);
            out.push("]:=".into());
            expr(e, out);
        }
        Stmt::Seq(a, b) => {
            tokens_of(a, out);
            tokens_of(b, out);
        }
        Stmt::If(c, t, e) => {
            out.push("if".into());
            pred(c, out);
            tokens_of(t, out);
            out.push("else".into());
            tokens_of(e, out);
        }
        Stmt::While(c, b) => {
            out.push("while".into());
            pred(c, out);
            tokens_of(b, out);
        }
    }
}

fn levenshtein(a: &[String], b: &[String]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 / (1 + mean pairwise token Levenshtein distance)`, computed over
/// canonical token sequences with version tags erased. Equal statements
/// score 1.0; higher is more similar.
pub fn similarity(statements: &[&Stmt]) -> f64 {
    assert!(statements.len() >= 2);
    let toks: Vec<Vec<String>> = statements
        .iter()
        .map(|s| {
            let mut t = Vec::new();
            tokens_of(s, &mut t);
            t
        })
        .collect();
    let mut total = 0usize;
    let mut pairs = 0usize;
    for i in 0..toks.len() {
        for j in i + 1..toks.len() {
            total += levenshtein(&toks[i], &toks[j]);
            pairs += 1;
        }
    }
    1.0 / (1.0 + total as f64 / pairs as f64)
}

struct Budget {
    used: usize,
    ceiling: usize,
}

impl Budget {
    fn charge(&mut self, n: usize) -> Result<(), ProductError> {
        self.used += n;
        if self.used > self.ceiling {
            Err(ProductError::TooLarge(self.ceiling))
        } else {
            Ok(())
        }
    }
}

/// Product with the default node ceiling.
pub fn construct_product(inputs: &[Stmt]) -> Result<Stmt, ProductError> {
    construct_product_with_ceiling(inputs, DEFAULT_NODE_CEILING)
}

pub fn construct_product_with_ceiling(
    inputs: &[Stmt],
    ceiling: usize,
) -> Result<Stmt, ProductError> {
    // Namespace disjointness: the construction freely reorders whole
    // programs, which is only sound when they cannot interfere.
    let mut seen = std::collections::BTreeMap::new();
    for (k, s) in inputs.iter().enumerate() {
        for v in vars_of_stmt(s) {
            if let Some(prev) = seen.insert(v.clone(), k) {
                if prev != k {
                    return Err(ProductError::SharedVariable(v));
                }
            }
        }
    }
    let progs: Vec<VecDeque<Stmt>> = inputs.iter().map(|s| flatten(s).into()).collect();
    let mut budget = Budget { used: 0, ceiling };
    build(progs, &mut budget)
}

fn build(mut progs: Vec<VecDeque<Stmt>>, budget: &mut Budget) -> Result<Stmt, ProductError> {
    let mut acc: Vec<Stmt> = Vec::new();
    loop {
        progs.retain(|p| !p.is_empty());
        if progs.is_empty() {
            break;
        }
        if progs.len() == 1 {
            for s in progs.remove(0) {
                budget.charge(node_count(&s))?;
                acc.push(s);
            }
            break;
        }
        // A program whose head is not a loop is processed first; only when
        // every head is a loop do we synchronize a pair.
        match progs.iter().position(|p| !matches!(p.front(), Some(Stmt::While(..)))) {
            Some(k) => {
                let head = progs[k].pop_front().unwrap();
                match head {
                    Stmt::Seq(a, b) => {
                        // Keep the queue flat.
                        progs[k].push_front(*b);
                        progs[k].push_front(*a);
                    }
                    Stmt::If(c, t, e) => {
                        // Embed this program's continuation and all other
                        // programs into both branches.
                        let rest = progs.remove(k);
                        let mut then_progs = progs.clone();
                        let mut else_progs = progs;
                        let mut then_head: VecDeque<Stmt> = flatten(&t).into();
                        then_head.extend(rest.iter().cloned());
                        let mut else_head: VecDeque<Stmt> = flatten(&e).into();
                        else_head.extend(rest.iter().cloned());
                        then_progs.insert(k, then_head);
                        else_progs.insert(k, else_head);
                        let tp = build(then_progs, budget)?;
                        let ep = build(else_progs, budget)?;
                        budget.charge(1)?;
                        acc.push(Stmt::If(c, Box::new(tp), Box::new(ep)));
                        return Ok(seq_of(acc));
                    }
                    atom => {
                        budget.charge(node_count(&atom))?;
                        acc.push(atom);
                    }
                }
            }
            None => {
                // Every head is a loop: fuse them all into one lockstep loop
                // guarded by the conjunction of the guards. Each individual
                // loop then finishes alone; a loop whose guard is already
                // false is a no-op, so plain trailing copies suffice.
                let heads: Vec<(Pred, Stmt)> = progs
                    .iter_mut()
                    .map(|p| match p.pop_front().unwrap() {
                        Stmt::While(c, b) => (c, *b),
                        _ => unreachable!("all heads are loops"),
                    })
                    .collect();
                let lock_body = build(
                    heads.iter().map(|(_, b)| flatten(b).into()).collect(),
                    budget,
                )?;
                let guard = heads
                    .iter()
                    .skip(1)
                    .fold(heads[0].0.clone(), |acc, (c, _)| {
                        Pred::And(Box::new(acc), Box::new(c.clone()))
                    });
                let lockstep = Stmt::While(guard, Box::new(lock_body));
                budget.charge(node_count(&lockstep))?;
                acc.push(lockstep);
                for (c, b) in heads {
                    let tail = Stmt::While(c, Box::new(b));
                    budget.charge(node_count(&tail))?;
                    acc.push(tail);
                }
            }
        }
    }
    Ok(seq_of(acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{interpret, Valuation, Value};
    use crate::parse::parse;
    use crate::pretty::pretty_print_stmt;

    fn p(src: &str) -> Stmt {
        parse(src).unwrap()
    }

    #[test]
    fn rename_tags_every_identifier() {
        // `#` is not legal source syntax, so expected ASTs are spelled out.
        assert_eq!(
            rename(&p("x := x + 1;"), 2),
            Stmt::Atom(Atom::Assign(
                "x#2".into(),
                Expr::Bin(
                    BinOp::Add,
                    Box::new(Expr::Var("x#2".into())),
                    Box::new(Expr::Int(1.into()))
                )
            ))
        );
        assert_eq!(
            rename(&p("out[0] := y;"), 4),
            Stmt::Atom(Atom::ArrayAssign(
                "out#4".into(),
                Expr::Int(0.into()),
                Expr::Var("y#4".into())
            ))
        );
        assert_eq!(rename(&Stmt::skip(), 1), Stmt::skip());
    }

    // `#` is not legal in source identifiers, so renamed programs are built
    // via rename() in tests too; parse() above never sees a tag. The parser
    // accepts plain identifiers only, hence this helper.
    fn pr(src: &str, tag: VersionTag) -> Stmt {
        rename(&p(src), tag)
    }

    #[test]
    fn similarity_scores() {
        let a = p("while (i < n) { i := i * x; }");
        assert_eq!(similarity(&[&a, &a]), 1.0);
        let b = p("while (j < m) { j := j * y; }");
        let c = p("x := 1;");
        assert!(similarity(&[&a, &b]) > similarity(&[&a, &c]));
        // Same loop under different version tags is identical after
        // tag-stripping.
        assert_eq!(similarity(&[&pr("i := 0;", 1), &pr("i := 0;", 2)]), 1.0);
    }

    #[test]
    fn single_input_is_returned_unchanged() {
        let a = p("x := 1; while (x < 3) { x := x + 1; }");
        assert!(stmt_equal(&construct_product(&[a.clone()]).unwrap(), &a));
    }

    #[test]
    fn lockstep_loop_shape() {
        let a = pr("i := 0; while (i < n) { i := i * x; }", 1);
        let b = pr("i := 0; while (i < n) { i := i * x; }", 2);
        let prod = construct_product(&[a, b]).unwrap();
        let printed = pretty_print_stmt(&prod);
        // Initializations first, then the lockstep loop, then the remainder
        // finishing either loop alone.
        let want = "\
i#1 := 0;
i#2 := 0;
while (i#1 < n#1 && i#2 < n#2) {
  i#1 := i#1 * x#1;
  i#2 := i#2 * x#2;
}
while (i#1 < n#1) {
  i#1 := i#1 * x#1;
}
while (i#2 < n#2) {
  i#2 := i#2 * x#2;
}";
        assert_eq!(printed, want);
    }

    #[test]
    fn product_agrees_with_sequential_composition() {
        let inputs = [
            pr("s := 0; i := 0; while (i < n) { s := s + i; i := i + 1; } out[0] := s;", 1),
            pr("t := 1; j := 0; while (j < m) { t := t * 2; j := j + 1; } out[0] := t;", 2),
            pr("if (k > 0) { r := k; } else { r := 0 - k; } out[1] := r;", 3),
        ];
        let prod = construct_product(&inputs).unwrap();
        let seq = seq_of(inputs.to_vec());
        for (n, m, k) in [(0i64, 0, 0), (3, 2, -1), (5, 1, 4), (1, 6, 0)] {
            let mut sigma = Valuation::new();
            sigma.set_scalar("n#1", Value::int(n));
            sigma.set_scalar("m#2", Value::int(m));
            sigma.set_scalar("k#3", Value::int(k));
            let a = interpret(&seq, &sigma, 10_000).unwrap();
            let b = interpret(&prod, &sigma, 10_000).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn shared_variables_are_rejected() {
        let e = construct_product(&[p("x := 1;"), p("x := 2;")]);
        assert_eq!(e, Err(ProductError::SharedVariable("x".into())));
    }

    #[test]
    fn ceiling_aborts_blowup() {
        // Many ifs force repeated continuation embedding.
        let mk = |tag| {
            let ifs = (0..12)
                .map(|_| "if (c > 0) { x := x + 1; } else { x := x - 1; }".to_string())
                .collect::<String>();
            pr(&ifs, tag)
        };
        let e = construct_product_with_ceiling(&[mk(1), mk(2), mk(3), mk(4)], 5_000);
        assert_eq!(e, Err(ProductError::TooLarge(5_000)));
    }

    #[test]
    fn loop_free_products_are_loop_free() {
        let prod = construct_product(&[
            pr("if (a > 0) { x := 1; } else { x := 2; } y := x;", 1),
            pr("z := 3; if (b > 0) { z := z + 1; } else { skip; }", 2),
        ])
        .unwrap();
        fn has_loop(s: &Stmt) -> bool {
            match s {
                Stmt::While(..) => true,
                Stmt::Seq(a, b) => has_loop(a) || has_loop(b),
                Stmt::If(_, t, e) => has_loop(t) || has_loop(e),
                Stmt::Atom(_) => false,
            }
        }
        assert!(!has_loop(&prod));
    }
}
