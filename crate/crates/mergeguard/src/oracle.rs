//! Ground truth: brute-force conflict-freedom checking by input enumeration
//! and seeded random scenario generation for property tests.
//!
//! The checker mirrors the interpreter's uninitialized-read semantics
//! exactly (absent `out` entries read as the undefined value), so any
//! disagreement with the verifier is genuine imprecision, not a semantics
//! mismatch.

use crate::ast::*;
use crate::interp::{interpret, Valuation, Value};
use crate::ndiff::{ndiff, DiffResult};
use num_bigint::BigInt;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

pub const DEFAULT_FUEL: u64 = 10_000;
pub const SAMPLE_COUNT: usize = 100_000;
/// Full enumeration beyond this many valuations switches to sampling.
pub const ENUMERATION_LIMIT: u64 = 200_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfViolation {
    pub index: BigInt,
    /// Values of `out[index]` in base, variant A, variant B, merge order.
    pub values: [Value; 4],
}

/// The three per-index conditions of semantic conflict-freedom, applied to
/// the final valuations of the four versions. Checks every index written by
/// any version; unwritten entries compare as the undefined value.
pub fn check_conflict_freedom(
    base: &Valuation,
    var_a: &Valuation,
    var_b: &Valuation,
    merge: &Valuation,
) -> Option<CfViolation> {
    let mut indices: BTreeSet<BigInt> = BTreeSet::new();
    for v in [base, var_a, var_b, merge] {
        indices.extend(v.indices_of("out"));
    }
    for idx in indices {
        let o = base.get("out", &idx);
        let a = var_a.get("out", &idx);
        let b = var_b.get("out", &idx);
        let m = merge.get("out", &idx);
        let bad = (o != a && m != a) || (o != b && m != b) || (o == a && o == b && m != o);
        if bad {
            return Some(CfViolation {
                index: idx,
                values: [o, a, b, m],
            });
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub base: Stmt,
    pub var_a: Stmt,
    pub var_b: Stmt,
    pub merge: Stmt,
}

impl Scenario {
    pub fn programs(&self) -> [&Stmt; 4] {
        [&self.base, &self.var_a, &self.var_b, &self.merge]
    }

    pub fn diff(&self) -> DiffResult {
        ndiff(&[
            self.base.clone(),
            self.var_a.clone(),
            self.var_b.clone(),
            self.merge.clone(),
        ])
    }
}

/// Finite input space for brute forcing: every scalar ranges over `values`;
/// each input array ranges over `values` at the window indices and is
/// undefined elsewhere.
#[derive(Debug, Clone)]
pub struct EnumSpace {
    pub scalars: Vec<Ident>,
    pub arrays: Vec<Ident>,
    pub values: Vec<BigInt>,
    pub window: u64,
    pub fuel: u64,
}

impl EnumSpace {
    pub fn for_programs(programs: &[&Stmt]) -> EnumSpace {
        let mut arrays: BTreeSet<Ident> = BTreeSet::new();
        let mut vars: BTreeSet<Ident> = BTreeSet::new();
        for p in programs {
            arrays.extend(array_idents(p));
            vars.extend(vars_of_stmt(p));
        }
        arrays.remove("out");
        let scalars: Vec<Ident> = vars
            .into_iter()
            .filter(|v| v != "out" && !arrays.contains(v))
            .collect();
        EnumSpace {
            scalars,
            arrays: arrays.into_iter().collect(),
            values: (-2..=2).map(BigInt::from).collect(),
            window: 4,
            fuel: DEFAULT_FUEL,
        }
    }

    /// Number of distinct cells being enumerated.
    fn dims(&self) -> usize {
        self.scalars.len() + self.arrays.len() * self.window as usize
    }

    /// Total valuation count; saturates instead of overflowing.
    pub fn size(&self) -> u64 {
        let base = self.values.len() as u64;
        let mut n: u64 = 1;
        for _ in 0..self.dims() {
            n = n.saturating_mul(base);
        }
        n
    }

    fn valuation(&self, choice: &[usize]) -> Valuation {
        let mut sigma = Valuation::new();
        let mut k = 0;
        for v in &self.scalars {
            sigma.set_scalar(v, Value::Int(self.values[choice[k]].clone()));
            k += 1;
        }
        for a in &self.arrays {
            for i in 0..self.window {
                sigma.set(a, BigInt::from(i), Value::Int(self.values[choice[k]].clone()));
                k += 1;
            }
        }
        sigma
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BruteForceResult {
    /// The whole space was enumerated; no violation anywhere.
    NoViolationFound,
    /// The space was too large; a random sample found no violation.
    SampledNoViolation,
    /// No violation observed, but some runs ran out of fuel.
    Inconclusive { fuel_exhausted: usize },
    Violation { sigma: Valuation, violation: CfViolation },
}

pub fn brute_force_cf(scenario: &Scenario, space: &EnumSpace) -> BruteForceResult {
    brute_force_cf_seeded(scenario, space, 0)
}

/// Like [`brute_force_cf`]; `seed` drives the random sample when the space
/// is too large to enumerate (full enumeration ignores it).
pub fn brute_force_cf_seeded(
    scenario: &Scenario,
    space: &EnumSpace,
    seed: u64,
) -> BruteForceResult {
    let programs = scenario.programs();
    let dims = space.dims();
    let mut exhausted = 0usize;
    let try_sigma = |sigma: Valuation| -> Result<bool, BruteForceResult> {
        let mut outs = Vec::with_capacity(4);
        for p in &programs {
            match interpret(p, &sigma, space.fuel) {
                Ok(v) => outs.push(v),
                Err(_) => return Ok(false),
            }
        }
        match check_conflict_freedom(&outs[0], &outs[1], &outs[2], &outs[3]) {
            Some(v) => Err(BruteForceResult::Violation {
                sigma,
                violation: v,
            }),
            None => Ok(true),
        }
    };
    if space.size() <= ENUMERATION_LIMIT {
        let mut choice = vec![0usize; dims];
        loop {
            match try_sigma(space.valuation(&choice)) {
                Ok(true) => {}
                Ok(false) => exhausted += 1,
                Err(v) => return v,
            }
            // Mixed-radix increment; done when it wraps around.
            let mut k = 0;
            loop {
                if k == dims {
                    return if exhausted > 0 {
                        BruteForceResult::Inconclusive {
                            fuel_exhausted: exhausted,
                        }
                    } else {
                        BruteForceResult::NoViolationFound
                    };
                }
                choice[k] += 1;
                if choice[k] < space.values.len() {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..SAMPLE_COUNT {
            let choice: Vec<usize> =
                (0..dims).map(|_| rng.gen_range(0..space.values.len())).collect();
            match try_sigma(space.valuation(&choice)) {
                Ok(true) => {}
                Ok(false) => exhausted += 1,
                Err(v) => return v,
            }
        }
        if exhausted > 0 {
            BruteForceResult::Inconclusive {
                fuel_exhausted: exhausted,
            }
        } else {
            BruteForceResult::SampledNoViolation
        }
    }
}

// ---------------------------------------------------------------------------
// Random program and scenario generation

const VAR_POOL: [&str; 4] = ["x", "y", "z", "w"];

fn gen_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    if depth == 0 || rng.gen_bool(0.4) {
        if rng.gen_bool(0.5) {
            Expr::Var(VAR_POOL[rng.gen_range(0..VAR_POOL.len())].to_string())
        } else {
            Expr::Int(BigInt::from(rng.gen_range(-2..=2)))
        }
    } else {
        let op = match rng.gen_range(0..3) {
            0 => BinOp::Add,
            1 => BinOp::Sub,
            _ => BinOp::Mul,
        };
        Expr::Bin(
            op,
            Box::new(gen_expr(rng, depth - 1)),
            Box::new(gen_expr(rng, depth - 1)),
        )
    }
}

fn gen_cmp(rng: &mut ChaCha8Rng) -> Pred {
    let op = match rng.gen_range(0..6) {
        0 => CmpOp::Eq,
        1 => CmpOp::Ne,
        2 => CmpOp::Lt,
        3 => CmpOp::Le,
        4 => CmpOp::Gt,
        _ => CmpOp::Ge,
    };
    Pred::Cmp(op, gen_expr(rng, 1), gen_expr(rng, 1))
}

fn gen_atom(rng: &mut ChaCha8Rng) -> Stmt {
    if rng.gen_bool(0.3) {
        Stmt::Atom(Atom::ArrayAssign(
            "out".to_string(),
            Expr::Int(BigInt::from(rng.gen_range(0..3))),
            gen_expr(rng, 2),
        ))
    } else {
        Stmt::Atom(Atom::Assign(
            VAR_POOL[rng.gen_range(0..VAR_POOL.len())].to_string(),
            gen_expr(rng, 2),
        ))
    }
}

fn gen_stmt(rng: &mut ChaCha8Rng) -> Stmt {
    match rng.gen_range(0..10) {
        0 | 1 => {
            // Bounded counting loop; the only loop shape generated, so all
            // generated programs terminate.
            let i = "i".to_string();
            let bound = rng.gen_range(1..=3);
            let body = Stmt::seq(gen_atom(rng), Stmt::Atom(Atom::Assign(
                i.clone(),
                Expr::Bin(
                    BinOp::Add,
                    Box::new(Expr::Var(i.clone())),
                    Box::new(Expr::Int(BigInt::from(1))),
                ),
            )));
            Stmt::seq(
                Stmt::Atom(Atom::Assign(i.clone(), Expr::Int(BigInt::from(0)))),
                Stmt::While(
                    Pred::Cmp(CmpOp::Lt, Expr::Var(i), Expr::Int(BigInt::from(bound))),
                    Box::new(body),
                ),
            )
        }
        2 | 3 => Stmt::If(
            gen_cmp(rng),
            Box::new(gen_atom(rng)),
            Box::new(if rng.gen_bool(0.5) {
                gen_atom(rng)
            } else {
                Stmt::skip()
            }),
        ),
        _ => gen_atom(rng),
    }
}

/// Deterministic random program: roughly `budget` top-level statements,
/// always ending in an output write. All loops are bounded.
pub fn gen_program(seed: u64, budget: usize) -> Stmt {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_program_rng(&mut rng, budget)
}

fn gen_program_rng(rng: &mut ChaCha8Rng, budget: usize) -> Stmt {
    let len = rng.gen_range(2..=budget.max(2));
    let mut stmts: Vec<Stmt> = (0..len).map(|_| gen_stmt(rng)).collect();
    stmts.push(Stmt::Atom(Atom::ArrayAssign(
        "out".to_string(),
        Expr::Int(BigInt::from(0)),
        Expr::Var(VAR_POOL[rng.gen_range(0..VAR_POOL.len())].to_string()),
    )));
    seq_of(stmts)
}

fn negate_first_if(items: &mut [Stmt]) -> bool {
    for s in items.iter_mut() {
        if let Stmt::If(c, t, e) = s {
            *s = Stmt::If(
                Pred::Not(Box::new(c.clone())),
                Box::new(std::mem::replace(e, Stmt::skip())),
                Box::new(std::mem::replace(t, Stmt::skip())),
            );
            return true;
        }
    }
    false
}

fn swap_first_if(items: &mut [Stmt]) -> bool {
    for s in items.iter_mut() {
        if let Stmt::If(_, t, e) = s {
            std::mem::swap(t, e);
            return true;
        }
    }
    false
}

fn tweak_first_constant(s: &Stmt) -> (Stmt, bool) {
    fn expr(e: &Expr, done: &mut bool) -> Expr {
        match e {
            Expr::Int(n) if !*done => {
                *done = true;
                Expr::Int(n + 1)
            }
            Expr::Int(n) => Expr::Int(n.clone()),
            Expr::Var(x) => Expr::Var(x.clone()),
            Expr::ArrayRead(a, i) => Expr::ArrayRead(a.clone(), Box::new(expr(i, done))),
            Expr::Bin(op, l, r) => {
                let l = expr(l, done);
                Expr::Bin(*op, Box::new(l), Box::new(expr(r, done)))
            }
        }
    }
    fn stmt(s: &Stmt, done: &mut bool) -> Stmt {
        match s {
            Stmt::Atom(Atom::Skip) => Stmt::skip(),
            Stmt::Atom(Atom::Assign(x, e)) => Stmt::Atom(Atom::Assign(x.clone(), expr(e, done))),
            Stmt::Atom(Atom::ArrayAssign(a, i, e)) => {
                let i = expr(i, done);
                Stmt::Atom(Atom::ArrayAssign(a.clone(), i, expr(e, done)))
            }
            Stmt::Seq(a, b) => {
                let a = stmt(a, done);
                Stmt::seq(a, stmt(b, done))
            }
            Stmt::If(c, t, e) => {
                let t2 = stmt(t, done);
                Stmt::If(c.clone(), Box::new(t2), Box::new(stmt(e, done)))
            }
            Stmt::While(c, b) => Stmt::While(c.clone(), Box::new(stmt(b, done))),
        }
    }
    let mut done = false;
    let out = stmt(s, &mut done);
    (out, done)
}

/// One random mutation of a program, drawn from seven classes: insertion,
/// deletion, replacement, branch swap, predicate negation, patch
/// duplication, constant tweak. Top-level only, so generated loops stay
/// bounded.
fn mutate(rng: &mut ChaCha8Rng, s: &Stmt) -> Stmt {
    let mut items = flatten(s);
    let n = items.len();
    match rng.gen_range(0..7) {
        0 => {
            // Insertion.
            let at = rng.gen_range(0..=n);
            items.insert(at, gen_atom(rng));
        }
        1 => {
            // Deletion.
            let at = rng.gen_range(0..n);
            items[at] = Stmt::skip();
        }
        2 => {
            // Replacement.
            let at = rng.gen_range(0..n);
            items[at] = gen_atom(rng);
        }
        3 => {
            if !swap_first_if(&mut items) {
                items.insert(rng.gen_range(0..=n), gen_atom(rng));
            }
        }
        4 => {
            if !negate_first_if(&mut items) {
                items.insert(rng.gen_range(0..=n), gen_atom(rng));
            }
        }
        5 => {
            // Patch duplication: the same patch lands at two points.
            let patch = gen_atom(rng);
            let at = rng.gen_range(0..=n);
            items.insert(at, patch.clone());
            let at2 = rng.gen_range(0..=n + 1);
            items.insert(at2, patch);
        }
        _ => {
            let (t, changed) = tweak_first_constant(&seq_of(items.clone()));
            if changed {
                items = flatten(&t);
            } else {
                items.insert(rng.gen_range(0..=n), gen_atom(rng));
            }
        }
    }
    seq_of(items)
}

fn mutated(rng: &mut ChaCha8Rng, base: &Stmt) -> Stmt {
    for _ in 0..8 {
        let m = mutate(rng, base);
        if !stmt_equal(&m, base) {
            return m;
        }
    }
    // Guaranteed change as a last resort.
    let mut items = flatten(base);
    items.insert(
        0,
        Stmt::Atom(Atom::Assign(
            "w".to_string(),
            Expr::Bin(
                BinOp::Add,
                Box::new(Expr::Var("w".to_string())),
                Box::new(Expr::Int(BigInt::from(1))),
            ),
        )),
    );
    seq_of(items)
}

/// Deterministic random merge scenario: a base, two independently mutated
/// variants, and a merge built by hole-wise union of the variants' edits
/// (conflicting holes resolved by a seeded coin), mimicking what a textual
/// merge tool would produce.
pub fn gen_scenario(seed: u64, budget: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = gen_program_rng(&mut rng, budget);
    let var_a = mutated(&mut rng, &base);
    let var_b = mutated(&mut rng, &base);
    let d = ndiff(&[base.clone(), var_a.clone(), var_b.clone()]);
    let mut merge_edit = Vec::with_capacity(d.edits[0].len());
    for k in 0..d.edits[0].len() {
        let (o, a, b) = (&d.edits[0][k], &d.edits[1][k], &d.edits[2][k]);
        let pick = if !stmt_equal(a, o) && !stmt_equal(b, o) {
            if rng.gen_bool(0.5) { a } else { b }
        } else if !stmt_equal(a, o) {
            a
        } else {
            b
        };
        merge_edit.push(pick.clone());
    }
    let merge = apply_edit(&d.shared, &merge_edit).expect("edit arity from ndiff");
    Scenario {
        base,
        var_a,
        var_b,
        merge,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse;
    use crate::pretty::pretty_print_stmt;

    fn scenario(srcs: [&str; 4]) -> Scenario {
        let p: Vec<Stmt> = srcs.iter().map(|s| parse(s).unwrap()).collect();
        Scenario {
            base: p[0].clone(),
            var_a: p[1].clone(),
            var_b: p[2].clone(),
            merge: p[3].clone(),
        }
    }

    #[test]
    fn duplicated_increment_violates() {
        let sc = scenario([
            "skip; skip; out[0] := x;",
            "x := x + 1; skip; out[0] := x;",
            "skip; x := x + 1; out[0] := x;",
            "x := x + 1; x := x + 1; out[0] := x;",
        ]);
        let space = EnumSpace::for_programs(&sc.programs());
        match brute_force_cf(&sc, &space) {
            BruteForceResult::Violation { violation, .. } => {
                assert_eq!(violation.index, BigInt::from(0));
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn identical_versions_are_clean() {
        let src = "y := x * 2; out[0] := y;";
        let sc = scenario([src; 4]);
        let space = EnumSpace::for_programs(&sc.programs());
        assert_eq!(brute_force_cf(&sc, &space), BruteForceResult::NoViolationFound);
    }

    #[test]
    fn equivalent_rewrites_are_conflict_free() {
        let sc = scenario([
            "y := x; out[0] := y;",
            "y := x + x; out[0] := y;",
            "y := 2 * x; out[0] := y;",
            "y := x + x; out[0] := y;",
        ]);
        let space = EnumSpace::for_programs(&sc.programs());
        assert_eq!(brute_force_cf(&sc, &space), BruteForceResult::NoViolationFound);
    }

    #[test]
    fn undefined_reads_compare_like_the_interpreter() {
        // Merge writes an index nobody else touches: conflict, because base
        // and both variants agree (all undefined) while the merge differs.
        let sc = scenario([
            "skip;",
            "skip;",
            "skip;",
            "out[1] := 5;",
        ]);
        let space = EnumSpace::for_programs(&sc.programs());
        assert!(matches!(
            brute_force_cf(&sc, &space),
            BruteForceResult::Violation { .. }
        ));
    }

    #[test]
    fn generator_is_deterministic() {
        for seed in [0, 1, 7, 42] {
            assert_eq!(gen_scenario(seed, 4), gen_scenario(seed, 4));
        }
    }

    #[test]
    fn generated_scenarios_roundtrip_and_diff() {
        for seed in 0..20 {
            let sc = gen_scenario(seed, 4);
            for p in sc.programs() {
                let text = pretty_print_stmt(p);
                let back = parse(&text).unwrap();
                assert!(stmt_equal(p, &back), "{text}");
            }
            let d = sc.diff();
            for (p, e) in sc.programs().iter().zip(&d.edits) {
                assert!(stmt_equal(&apply_edit(&d.shared, e).unwrap(), p));
            }
        }
    }

    #[test]
    fn mutated_programs_differ_from_base() {
        for seed in 0..50 {
            let sc = gen_scenario(seed, 3);
            assert!(!stmt_equal(&sc.base, &sc.var_a) || !stmt_equal(&sc.base, &sc.var_b));
        }
    }
}
