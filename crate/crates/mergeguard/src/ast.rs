//! AST for the mini-language: expressions, predicates, statements with and
//! without holes, edits, and hole bookkeeping.
//!
//! A program version is a pair `(shared, edit)`: a shared statement with
//! holes plus an ordered list of hole-free statements filling the holes in
//! depth-first order.

use num_bigint::BigInt;
use thiserror::Error;

pub type Ident = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Int(BigInt),
    Var(Ident),
    ArrayRead(Ident, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pred {
    Bool(bool),
    Cmp(CmpOp, Expr, Expr),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
    Not(Box<Pred>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    Skip,
    Assign(Ident, Expr),
    ArrayAssign(Ident, Expr, Expr),
}

/// Hole-free statement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stmt {
    Atom(Atom),
    Seq(Box<Stmt>, Box<Stmt>),
    If(Pred, Box<Stmt>, Box<Stmt>),
    While(Pred, Box<Stmt>),
}

/// Statement that may contain holes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HStmt {
    Hole,
    Atom(Atom),
    Seq(Box<HStmt>, Box<HStmt>),
    If(Pred, Box<HStmt>, Box<HStmt>),
    While(Pred, Box<HStmt>),
}

/// Ordered hole-filling statements, depth-first.
pub type Edit = Vec<Stmt>;

/// Edit whose entries may themselves contain holes (produced by two-way
/// diffing, where entries stand for fragments of the old shared program).
pub type HEdit = Vec<HStmt>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramVersion {
    pub shared: HStmt,
    pub edit: Edit,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("edit has {edit_len} entries but the shared program has {holes} holes")]
pub struct EditArityMismatch {
    pub holes: usize,
    pub edit_len: usize,
}

impl Stmt {
    pub fn skip() -> Stmt {
        Stmt::Atom(Atom::Skip)
    }

    pub fn is_skip(&self) -> bool {
        matches!(self, Stmt::Atom(Atom::Skip))
    }

    pub fn seq(a: Stmt, b: Stmt) -> Stmt {
        Stmt::Seq(Box::new(a), Box::new(b))
    }
}

impl HStmt {
    pub fn skip() -> HStmt {
        HStmt::Atom(Atom::Skip)
    }

    pub fn seq(a: HStmt, b: HStmt) -> HStmt {
        HStmt::Seq(Box::new(a), Box::new(b))
    }
}

impl From<Stmt> for HStmt {
    fn from(s: Stmt) -> HStmt {
        match s {
            Stmt::Atom(a) => HStmt::Atom(a),
            Stmt::Seq(a, b) => HStmt::seq((*a).into(), (*b).into()),
            Stmt::If(c, t, e) => HStmt::If(c, Box::new((*t).into()), Box::new((*e).into())),
            Stmt::While(c, b) => HStmt::While(c, Box::new((*b).into())),
        }
    }
}

impl TryFrom<HStmt> for Stmt {
    type Error = ();

    /// Fails iff the statement contains a hole.
    fn try_from(h: HStmt) -> Result<Stmt, ()> {
        match h {
            HStmt::Hole => Err(()),
            HStmt::Atom(a) => Ok(Stmt::Atom(a)),
            HStmt::Seq(a, b) => Ok(Stmt::seq((*a).try_into()?, (*b).try_into()?)),
            HStmt::If(c, t, e) => Ok(Stmt::If(
                c,
                Box::new((*t).try_into()?),
                Box::new((*e).try_into()?),
            )),
            HStmt::While(c, b) => Ok(Stmt::While(c, Box::new((*b).try_into()?))),
        }
    }
}

/// Right-associated sequence of the given statements; empty input is `skip`.
pub fn seq_of(stmts: Vec<Stmt>) -> Stmt {
    let mut it = stmts.into_iter().rev();
    let last = match it.next() {
        Some(s) => s,
        None => Stmt::skip(),
    };
    it.fold(last, |acc, s| Stmt::seq(s, acc))
}

pub fn seq_of_h(stmts: Vec<HStmt>) -> HStmt {
    let mut it = stmts.into_iter().rev();
    let last = match it.next() {
        Some(s) => s,
        None => HStmt::skip(),
    };
    it.fold(last, |acc, s| HStmt::seq(s, acc))
}

/// Top-level statement list of a sequence; no element is itself a `Seq`.
/// Skips are preserved.
pub fn flatten(s: &Stmt) -> Vec<Stmt> {
    fn go(s: &Stmt, out: &mut Vec<Stmt>) {
        match s {
            Stmt::Seq(a, b) => {
                go(a, out);
                go(b, out);
            }
            other => out.push(other.clone()),
        }
    }
    let mut out = Vec::new();
    go(s, &mut out);
    out
}

pub fn flatten_h(h: &HStmt) -> Vec<HStmt> {
    fn go(h: &HStmt, out: &mut Vec<HStmt>) {
        match h {
            HStmt::Seq(a, b) => {
                go(a, out);
                go(b, out);
            }
            other => out.push(other.clone()),
        }
    }
    let mut out = Vec::new();
    go(h, &mut out);
    out
}

pub fn num_holes(h: &HStmt) -> usize {
    match h {
        HStmt::Hole => 1,
        HStmt::Atom(_) => 0,
        HStmt::Seq(a, b) => num_holes(a) + num_holes(b),
        HStmt::If(_, t, e) => num_holes(t) + num_holes(e),
        HStmt::While(_, b) => num_holes(b),
    }
}

/// Substitute the edit into the holes of `shared`, depth-first.
pub fn apply_edit(shared: &HStmt, edit: &[Stmt]) -> Result<Stmt, EditArityMismatch> {
    let holes = num_holes(shared);
    if holes != edit.len() {
        return Err(EditArityMismatch {
            holes,
            edit_len: edit.len(),
        });
    }
    let mut it = edit.iter();
    fn go(h: &HStmt, it: &mut std::slice::Iter<Stmt>) -> Stmt {
        match h {
            HStmt::Hole => it.next().expect("arity checked").clone(),
            HStmt::Atom(a) => Stmt::Atom(a.clone()),
            HStmt::Seq(a, b) => Stmt::seq(go(a, it), go(b, it)),
            HStmt::If(c, t, e) => Stmt::If(c.clone(), Box::new(go(t, it)), Box::new(go(e, it))),
            HStmt::While(c, b) => Stmt::While(c.clone(), Box::new(go(b, it))),
        }
    }
    Ok(go(shared, &mut it))
}

/// Like [`apply_edit`] but the filler statements may themselves contain
/// holes, which are preserved in the result.
pub fn apply_hedit(shared: &HStmt, hedit: &[HStmt]) -> Result<HStmt, EditArityMismatch> {
    let holes = num_holes(shared);
    if holes != hedit.len() {
        return Err(EditArityMismatch {
            holes,
            edit_len: hedit.len(),
        });
    }
    let mut it = hedit.iter();
    fn go(h: &HStmt, it: &mut std::slice::Iter<HStmt>) -> HStmt {
        match h {
            HStmt::Hole => it.next().expect("arity checked").clone(),
            HStmt::Atom(a) => HStmt::Atom(a.clone()),
            HStmt::Seq(a, b) => HStmt::seq(go(a, it), go(b, it)),
            HStmt::If(c, t, e) => HStmt::If(c.clone(), Box::new(go(t, it)), Box::new(go(e, it))),
            HStmt::While(c, b) => HStmt::While(c.clone(), Box::new(go(b, it))),
        }
    }
    Ok(go(shared, &mut it))
}

/// Skip-normalized copy: redundant skips in sequences are dropped and
/// sequences right-associated. Holes and skips that *are* the whole
/// statement (or a whole branch/body) remain as a single `skip`.
pub fn normalize_h(h: &HStmt) -> HStmt {
    let leaves: Vec<HStmt> = flatten_h(h)
        .into_iter()
        .map(|leaf| match leaf {
            HStmt::If(c, t, e) => HStmt::If(c, Box::new(normalize_h(&t)), Box::new(normalize_h(&e))),
            HStmt::While(c, b) => HStmt::While(c, Box::new(normalize_h(&b))),
            other => other,
        })
        .filter(|leaf| !matches!(leaf, HStmt::Atom(Atom::Skip)))
        .collect();
    seq_of_h(leaves)
}

pub fn normalize(s: &Stmt) -> Stmt {
    normalize_h(&s.clone().into())
        .try_into()
        .expect("normalization preserves hole-freedom")
}

/// Structural equality modulo skip normalization.
pub fn stmt_equal(a: &Stmt, b: &Stmt) -> bool {
    normalize(a) == normalize(b)
}

pub fn hstmt_equal(a: &HStmt, b: &HStmt) -> bool {
    normalize_h(a) == normalize_h(b)
}

/// Equality between a hole-free statement and a possibly-holed one; false
/// whenever the latter actually contains a hole.
pub fn stmt_equal_sh(s: &Stmt, h: &HStmt) -> bool {
    num_holes(h) == 0 && normalize_h(&s.clone().into()) == normalize_h(h)
}

pub fn node_count(s: &Stmt) -> usize {
    match s {
        Stmt::Atom(_) => 1,
        Stmt::Seq(a, b) => 1 + node_count(a) + node_count(b),
        Stmt::If(_, t, e) => 1 + node_count(t) + node_count(e),
        Stmt::While(_, b) => 1 + node_count(b),
    }
}

fn expr_idents(e: &Expr, out: &mut std::collections::BTreeSet<Ident>) {
    match e {
        Expr::Int(_) => {}
        Expr::Var(x) => {
            out.insert(x.clone());
        }
        Expr::ArrayRead(a, i) => {
            out.insert(a.clone());
            expr_idents(i, out);
        }
        Expr::Bin(_, l, r) => {
            expr_idents(l, out);
            expr_idents(r, out);
        }
    }
}

fn pred_idents(p: &Pred, out: &mut std::collections::BTreeSet<Ident>) {
    match p {
        Pred::Bool(_) => {}
        Pred::Cmp(_, l, r) => {
            expr_idents(l, out);
            expr_idents(r, out);
        }
        Pred::And(a, b) | Pred::Or(a, b) => {
            pred_idents(a, out);
            pred_idents(b, out);
        }
        Pred::Not(a) => pred_idents(a, out),
    }
}

/// All variable and array identifiers occurring in the expression.
pub fn vars_of_expr(e: &Expr) -> std::collections::BTreeSet<Ident> {
    let mut out = std::collections::BTreeSet::new();
    expr_idents(e, &mut out);
    out
}

pub fn vars_of_pred(p: &Pred) -> std::collections::BTreeSet<Ident> {
    let mut out = std::collections::BTreeSet::new();
    pred_idents(p, &mut out);
    out
}

/// All identifiers (read or written, scalar or array) in the statement.
pub fn vars_of_stmt(s: &Stmt) -> std::collections::BTreeSet<Ident> {
    let mut out = std::collections::BTreeSet::new();
    fn go(s: &Stmt, out: &mut std::collections::BTreeSet<Ident>) {
        match s {
            Stmt::Atom(Atom::Skip) => {}
            Stmt::Atom(Atom::Assign(x, e)) => {
                out.insert(x.clone());
                expr_idents(e, out);
            }
            Stmt::Atom(Atom::ArrayAssign(a, i, e)) => {
                out.insert(a.clone());
                expr_idents(i, out);
                expr_idents(e, out);
            }
            Stmt::Seq(a, b) => {
                go(a, out);
                go(b, out);
            }
            Stmt::If(c, t, e) => {
                pred_idents(c, out);
                go(t, out);
                go(e, out);
            }
            Stmt::While(c, b) => {
                pred_idents(c, out);
                go(b, out);
            }
        }
    }
    go(s, &mut out);
    out
}

/// Identifiers used as arrays somewhere in the statement.
pub fn array_idents(s: &Stmt) -> std::collections::BTreeSet<Ident> {
    let mut out = std::collections::BTreeSet::new();
    fn expr(e: &Expr, out: &mut std::collections::BTreeSet<Ident>) {
        match e {
            Expr::ArrayRead(a, i) => {
                out.insert(a.clone());
                expr(i, out);
            }
            Expr::Bin(_, l, r) => {
                expr(l, out);
                expr(r, out);
            }
            _ => {}
        }
    }
    fn pred(p: &Pred, out: &mut std::collections::BTreeSet<Ident>) {
        match p {
            Pred::Cmp(_, l, r) => {
                expr(l, out);
                expr(r, out);
            }
            Pred::And(a, b) | Pred::Or(a, b) => {
                pred(a, out);
                pred(b, out);
            }
            Pred::Not(a) => pred(a, out),
            Pred::Bool(_) => {}
        }
    }
    fn go(s: &Stmt, out: &mut std::collections::BTreeSet<Ident>) {
        match s {
            Stmt::Atom(Atom::Skip) => {}
            Stmt::Atom(Atom::Assign(_, e)) => expr(e, out),
            Stmt::Atom(Atom::ArrayAssign(a, i, e)) => {
                out.insert(a.clone());
                expr(i, out);
                expr(e, out);
            }
            Stmt::Seq(a, b) => {
                go(a, out);
                go(b, out);
            }
            Stmt::If(c, t, e) => {
                pred(c, out);
                go(t, out);
                go(e, out);
            }
            Stmt::While(c, b) => {
                pred(c, out);
                go(b, out);
            }
        }
    }
    go(s, &mut out);
    out
}

/// Rewrite every identifier in the statement through `f`.
pub fn map_idents(s: &Stmt, f: &impl Fn(&str) -> Ident) -> Stmt {
    fn expr(e: &Expr, f: &impl Fn(&str) -> Ident) -> Expr {
        match e {
            Expr::Int(n) => Expr::Int(n.clone()),
            Expr::Var(x) => Expr::Var(f(x)),
            Expr::ArrayRead(a, i) => Expr::ArrayRead(f(a), Box::new(expr(i, f))),
            Expr::Bin(op, l, r) => Expr::Bin(*op, Box::new(expr(l, f)), Box::new(expr(r, f))),
        }
    }
    fn pred(p: &Pred, f: &impl Fn(&str) -> Ident) -> Pred {
        match p {
            Pred::Bool(b) => Pred::Bool(*b),
            Pred::Cmp(op, l, r) => Pred::Cmp(*op, expr(l, f), expr(r, f)),
            Pred::And(a, b) => Pred::And(Box::new(pred(a, f)), Box::new(pred(b, f))),
            Pred::Or(a, b) => Pred::Or(Box::new(pred(a, f)), Box::new(pred(b, f))),
            Pred::Not(a) => Pred::Not(Box::new(pred(a, f))),
        }
    }
    match s {
        Stmt::Atom(Atom::Skip) => Stmt::skip(),
        Stmt::Atom(Atom::Assign(x, e)) => Stmt::Atom(Atom::Assign(f(x), expr(e, f))),
        Stmt::Atom(Atom::ArrayAssign(a, i, e)) => {
            Stmt::Atom(Atom::ArrayAssign(f(a), expr(i, f), expr(e, f)))
        }
        Stmt::Seq(a, b) => Stmt::seq(map_idents(a, f), map_idents(b, f)),
        Stmt::If(c, t, e) => Stmt::If(
            pred(c, f),
            Box::new(map_idents(t, f)),
            Box::new(map_idents(e, f)),
        ),
        Stmt::While(c, b) => Stmt::While(pred(c, f), Box::new(map_idents(b, f))),
    }
}

/// Rewrite every identifier in the predicate through `f`.
pub fn map_idents_pred(p: &Pred, f: &impl Fn(&str) -> Ident) -> Pred {
    // Route through a statement wrapper to reuse the expression walker.
    match map_idents(&Stmt::While(p.clone(), Box::new(Stmt::skip())), f) {
        Stmt::While(q, _) => q,
        _ => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse, parse_with_holes};

    #[test]
    fn num_holes_counts_depth_first() {
        assert_eq!(num_holes(&HStmt::Hole), 1);
        assert_eq!(num_holes(&parse("x := 1;").unwrap().into()), 0);
        let h = parse_with_holes(
            "if (c > 0) { <?HOLE?> } else { <?HOLE?> } <?HOLE?>",
        )
        .unwrap();
        assert_eq!(num_holes(&h), 3);
    }

    #[test]
    fn apply_edit_substitutes_depth_first() {
        let shared =
            parse_with_holes("if (c > 0) { <?HOLE?> } else { y := 2; } <?HOLE?>").unwrap();
        let edit = vec![
            parse("x := 2;").unwrap(),
            Stmt::skip(),
        ];
        let got = apply_edit(&shared, &edit).unwrap();
        let want = parse("if (c > 0) { x := 2; } else { y := 2; } skip;").unwrap();
        assert!(stmt_equal(&got, &want));
    }

    #[test]
    fn apply_edit_identity_on_hole_free() {
        let s = parse("x := 1; y := 2;").unwrap();
        let h: HStmt = s.clone().into();
        assert_eq!(apply_edit(&h, &[]).unwrap(), s);
    }

    #[test]
    fn apply_edit_rejects_arity_mismatch() {
        let shared = parse_with_holes("<?HOLE?>").unwrap();
        assert!(apply_edit(&shared, &[]).is_err());
        assert!(apply_edit(&shared, &[Stmt::skip(), Stmt::skip()]).is_err());
    }

    #[test]
    fn stmt_equal_ignores_skip_padding() {
        let a = parse("skip; x := 1;").unwrap();
        let b = parse("x := 1;").unwrap();
        let c = parse("x := 1; skip;").unwrap();
        assert!(stmt_equal(&a, &b));
        assert!(stmt_equal(&b, &c));
        assert!(!stmt_equal(&b, &parse("x := 2;").unwrap()));
    }

    #[test]
    fn normalize_recurses_into_branches() {
        let a = parse("if (x > 0) { skip; y := 1; } else { skip; } y := 2;").unwrap();
        let b = parse("if (x > 0) { y := 1; } else { skip; } y := 2;").unwrap();
        assert!(stmt_equal(&a, &b));
    }
}
