//! First-order formulas over version-tagged, SSA-indexed logical variables:
//! integer arithmetic, array select/store, uninterpreted functions,
//! comparisons, boolean connectives, and a single universal integer
//! quantifier (used for the per-index output assertion).

use crate::ast::CmpOp;
use num_bigint::BigInt;
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Int,
    Array,
}

/// Logical variable: a source identifier plus version tag and SSA
/// generation. The tag-1 generation-0 variable doubles as the shared initial
/// symbol of all four versions, which encodes the equal-initial-state
/// precondition without emitting any equalities.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymVar {
    pub base: String,
    pub tag: u8,
    pub gen: u32,
    pub sort: Sort,
}

impl SymVar {
    /// SMT-safe rendering; unambiguous because tag and generation are always
    /// the final two components.
    pub fn smt_name(&self) -> String {
        format!("{}_{}_{}", self.base, self.tag, self.gen)
    }
}

impl fmt::Display for SymVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}@{}", self.base, self.tag, self.gen)
    }
}

/// Uninterpreted function symbol; one per (summarized statement, modified
/// variable) pair, shared across all version instantiations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FnSym {
    pub name: String,
    pub args: Vec<Sort>,
    pub ret: Sort,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Int(BigInt),
    Sym(SymVar),
    /// Quantifier-bound integer variable.
    Bound(String),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
    Select(Box<Term>, Box<Term>),
    Store(Box<Term>, Box<Term>, Box<Term>),
    App(FnSym, Vec<Term>),
}

impl Term {
    pub fn int(n: i64) -> Term {
        Term::Int(BigInt::from(n))
    }

    pub fn select(a: Term, i: Term) -> Term {
        Term::Select(Box::new(a), Box::new(i))
    }

    pub fn store(a: Term, i: Term, v: Term) -> Term {
        Term::Store(Box::new(a), Box::new(i), Box::new(v))
    }

    pub fn sort(&self) -> Sort {
        match self {
            Term::Int(_) | Term::Bound(_) | Term::Add(..) | Term::Sub(..) | Term::Mul(..) => {
                Sort::Int
            }
            Term::Select(..) => Sort::Int,
            Term::Store(..) => Sort::Array,
            Term::Sym(v) => v.sort,
            Term::App(f, _) => f.ret,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Cmp(CmpOp, Term, Term),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    /// Universal quantification over one integer variable.
    Forall(String, Box<Formula>),
}

impl Formula {
    pub fn eq(a: Term, b: Term) -> Formula {
        Formula::Cmp(CmpOp::Eq, a, b)
    }

    pub fn ne(a: Term, b: Term) -> Formula {
        Formula::Cmp(CmpOp::Ne, a, b)
    }

    pub fn not(f: Formula) -> Formula {
        match f {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(inner) => *inner,
            other => Formula::Not(Box::new(other)),
        }
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    /// Flattening conjunction; drops `true`, collapses to `false`.
    pub fn and(fs: Vec<Formula>) -> Formula {
        let mut out = Vec::new();
        for f in fs {
            match f {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    pub fn or(fs: Vec<Formula>) -> Formula {
        let mut out = Vec::new();
        for f in fs {
            match f {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    pub fn conjoin(self, other: Formula) -> Formula {
        Formula::and(vec![self, other])
    }

    /// Number of top-level conjuncts; conjunction is kept flat by
    /// [`Formula::and`], so this is stable under `conjoin`.
    pub fn conjunct_count(&self) -> usize {
        match self {
            Formula::True => 0,
            Formula::And(fs) => fs.len(),
            _ => 1,
        }
    }

    /// The conjuncts added after the first `n`. Path formulas only ever grow
    /// by conjoining, so this recovers what a branch contributed beyond its
    /// entry formula without duplicating the shared prefix.
    pub fn conjuncts_from(&self, n: usize) -> Formula {
        match self {
            Formula::And(fs) if n <= fs.len() => Formula::and(fs[n..].to_vec()),
            _ if n == 0 => self.clone(),
            _ => Formula::True,
        }
    }
}

fn term_syms(t: &Term, vars: &mut BTreeSet<SymVar>, funs: &mut BTreeSet<FnSym>) {
    match t {
        Term::Int(_) | Term::Bound(_) => {}
        Term::Sym(v) => {
            vars.insert(v.clone());
        }
        Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) | Term::Select(a, b) => {
            term_syms(a, vars, funs);
            term_syms(b, vars, funs);
        }
        Term::Store(a, b, c) => {
            term_syms(a, vars, funs);
            term_syms(b, vars, funs);
            term_syms(c, vars, funs);
        }
        Term::App(f, args) => {
            funs.insert(f.clone());
            for a in args {
                term_syms(a, vars, funs);
            }
        }
    }
}

pub fn formula_syms(f: &Formula, vars: &mut BTreeSet<SymVar>, funs: &mut BTreeSet<FnSym>) {
    match f {
        Formula::True | Formula::False => {}
        Formula::Cmp(_, a, b) => {
            term_syms(a, vars, funs);
            term_syms(b, vars, funs);
        }
        Formula::And(fs) | Formula::Or(fs) => {
            for g in fs {
                formula_syms(g, vars, funs);
            }
        }
        Formula::Not(a) => formula_syms(a, vars, funs),
        Formula::Implies(a, b) | Formula::Iff(a, b) => {
            formula_syms(a, vars, funs);
            formula_syms(b, vars, funs);
        }
        Formula::Forall(_, body) => formula_syms(body, vars, funs),
    }
}

/// True if the formula contains a quantifier anywhere.
pub fn has_quantifier(f: &Formula) -> bool {
    match f {
        Formula::Forall(..) => true,
        Formula::True | Formula::False | Formula::Cmp(..) => false,
        Formula::And(fs) | Formula::Or(fs) => fs.iter().any(has_quantifier),
        Formula::Not(a) => has_quantifier(a),
        Formula::Implies(a, b) | Formula::Iff(a, b) => has_quantifier(a) || has_quantifier(b),
    }
}
