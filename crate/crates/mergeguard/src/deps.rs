//! Flow-insensitive dependence summaries: for each variable a statement may
//! modify, the set of pre-state variables its final value can depend on.
//!
//! Summaries compose: sequencing substitutes the first statement's summary
//! into the second's, conditionals union both branches plus the guard
//! variables (keeping the variable itself when a branch may leave it
//! unchanged), and loops close the one-iteration summary under reachability.
//! The analysis over-approximates; a variable absent from the map is
//! unmodified and depends only on itself.

use crate::ast::*;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DepSummary {
    /// Keys are the variables the statement may modify.
    pub deps: BTreeMap<Ident, BTreeSet<Ident>>,
}

impl DepSummary {
    pub fn modifies(&self) -> BTreeSet<Ident> {
        self.deps.keys().cloned().collect()
    }

    /// Dependence set of `v` after the statement; identity for unmodified
    /// variables.
    pub fn of(&self, v: &str) -> BTreeSet<Ident> {
        self.deps
            .get(v)
            .cloned()
            .unwrap_or_else(|| std::iter::once(v.to_string()).collect())
    }

    fn subst(&self, vars: &BTreeSet<Ident>) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        for v in vars {
            out.extend(self.of(v));
        }
        out
    }
}

pub fn summarize(s: &Stmt) -> DepSummary {
    match s {
        Stmt::Atom(Atom::Skip) => DepSummary::default(),
        Stmt::Atom(Atom::Assign(x, e)) => DepSummary {
            deps: std::iter::once((x.clone(), vars_of_expr(e))).collect(),
        },
        Stmt::Atom(Atom::ArrayAssign(a, i, e)) => {
            // Only one cell changes, so the rest of the array flows through.
            let mut d = vars_of_expr(i);
            d.extend(vars_of_expr(e));
            d.insert(a.clone());
            DepSummary {
                deps: std::iter::once((a.clone(), d)).collect(),
            }
        }
        Stmt::Seq(s1, s2) => {
            let d1 = summarize(s1);
            let d2 = summarize(s2);
            let mut deps = BTreeMap::new();
            for y in d1.modifies().union(&d2.modifies()) {
                deps.insert(y.clone(), d1.subst(&d2.of(y)));
            }
            DepSummary { deps }
        }
        Stmt::If(c, t, e) => {
            let dt = summarize(t);
            let de = summarize(e);
            let guard = vars_of_pred(c);
            let mut deps = BTreeMap::new();
            for y in dt.modifies().union(&de.modifies()) {
                let mut d = dt.of(y);
                d.extend(de.of(y));
                d.extend(guard.iter().cloned());
                deps.insert(y.clone(), d);
            }
            DepSummary { deps }
        }
        Stmt::While(c, body) => {
            let db = summarize(body);
            let guard = vars_of_pred(c);
            // One-iteration edges: each modified variable depends on its body
            // dependences, the guard, and itself (zero iterations).
            let mut deps: BTreeMap<Ident, BTreeSet<Ident>> = BTreeMap::new();
            for y in db.modifies() {
                let mut d = db.of(&y);
                d.extend(guard.iter().cloned());
                d.insert(y.clone());
                deps.insert(y, d);
            }
            // Close under reachability across iterations.
            loop {
                let cur = DepSummary { deps: deps.clone() };
                let mut changed = false;
                for d in deps.values_mut() {
                    let next = cur.subst(d);
                    if next != *d {
                        *d = next;
                        changed = true;
                    }
                }
                if !changed {
                    return DepSummary { deps };
                }
            }
        }
    }
}

/// Variables the statement may modify.
pub fn modified_vars(s: &Stmt) -> BTreeSet<Ident> {
    summarize(s).modifies()
}

/// Pre-state variables the post-state value of `v` can depend on.
pub fn dependencies(s: &Stmt, v: &str) -> BTreeSet<Ident> {
    summarize(s).of(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse;

    fn set(items: &[&str]) -> BTreeSet<Ident> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn sequencing_substitutes_intermediates() {
        let s = parse("t := a + b; y := t * 2;").unwrap();
        assert_eq!(dependencies(&s, "y"), set(&["a", "b"]));
        assert_eq!(dependencies(&s, "t"), set(&["a", "b"]));
        assert_eq!(modified_vars(&s), set(&["t", "y"]));
    }

    #[test]
    fn conditional_assignment_keeps_old_value_and_guard() {
        let s = parse("if (c > 0) { y := 1; } else { skip; }").unwrap();
        assert_eq!(dependencies(&s, "y"), set(&["c", "y"]));
    }

    #[test]
    fn loop_closure_accumulates_iterated_flows() {
        let s = parse("while (i < n) { s := s + a[i]; i := i + 1; }").unwrap();
        assert_eq!(dependencies(&s, "s"), set(&["a", "i", "n", "s"]));
        assert_eq!(dependencies(&s, "i"), set(&["i", "n"]));
    }

    #[test]
    fn indirect_loop_flow_needs_the_fixpoint() {
        // x picks up b only through y, one iteration later.
        let s = parse("while (i < n) { x := y; y := b; i := i + 1; }").unwrap();
        assert!(dependencies(&s, "x").contains("b"));
    }

    #[test]
    fn unmodified_variable_depends_on_itself() {
        let s = parse("y := x + 1;").unwrap();
        assert_eq!(dependencies(&s, "z"), set(&["z"]));
    }

    #[test]
    fn array_write_flows_through_old_array() {
        let s = parse("out[i] := v;").unwrap();
        assert_eq!(dependencies(&s, "out"), set(&["i", "out", "v"]));
    }
}
