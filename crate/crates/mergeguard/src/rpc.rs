//! The verification core: symbolic execution in SSA form over product
//! programs, Houdini-style loop invariant inference, relational
//! postcondition computation over a shared program with holes, and the
//! top-level semantic conflict-freedom check for a four-way merge.
//!
//! Version `i`'s variables are renamed `x#i`. All versions start from one
//! shared initial symbol per variable (tag 1, generation 0), which encodes
//! the equal-initial-states precondition without emitting a single equality.
//! This also makes "these versions still agree on `x`" frequently decidable
//! by syntactic term equality, which the guard checks and the Houdini
//! candidate filter exploit to avoid solver queries.

use crate::ast::*;
use crate::deps;
use crate::interp::interpret;
use crate::interp::Valuation;
use crate::logic::*;
use crate::oracle;
use crate::product::{construct_product, rename, rename_pred, strip_tag, ProductError};
use crate::smt::{concretize, SolverAnswer, SolverError, SolverSession};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

pub const NUM_VERSIONS: usize = 4;
pub const DEFAULT_REPLAY_FUEL: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VerifyMode {
    /// Full rule set: summaries for shared code, per-hole mini-products.
    #[default]
    Compositional,
    /// Model the whole shared program as a single hole: one big product.
    FullProduct,
    /// Keep the compositional structure but inline shared fragments as
    /// concrete products instead of uninterpreted-function summaries.
    NoDependence,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub mode: VerifyMode,
    /// Extra variables checked for conflict-freedom besides `out`.
    pub check_vars: BTreeSet<Ident>,
    /// Use the global three-condition disjunction instead of the (stronger)
    /// per-index form of the output check.
    pub global_otherwise: bool,
    pub replay_fuel: u64,
}

impl Default for VerifyOptions {
    fn default() -> VerifyOptions {
        VerifyOptions {
            mode: VerifyMode::Compositional,
            check_vars: BTreeSet::new(),
            global_otherwise: false,
            replay_fuel: DEFAULT_REPLAY_FUEL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Verified,
    Conflict {
        witness: Option<Valuation>,
        /// True when replaying the witness through the interpreter exhibits
        /// an actual violation; false means possible analysis imprecision.
        confirmed: bool,
    },
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopInvariant {
    pub guard: String,
    pub equalities: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub hole_count: usize,
    /// Rule name -> number of times it fired.
    pub rules: BTreeMap<String, u32>,
    pub invariants: Vec<LoopInvariant>,
    pub solver_queries: u64,
    pub solver_time_ms: u128,
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Arity(#[from] EditArityMismatch),
}

enum Abort {
    /// Product construction or another structural limit gave up; the verdict
    /// degrades to Unknown with this reason.
    GaveUp(String),
    Solver(SolverError),
}

impl From<SolverError> for Abort {
    fn from(e: SolverError) -> Abort {
        Abort::Solver(e)
    }
}

pub fn tagged(base: &str, tag: u8) -> String {
    format!("{base}#{tag}")
}

fn name_tag(name: &str) -> u8 {
    name.rfind('#')
        .and_then(|i| name[i + 1..].parse().ok())
        .unwrap_or(1)
}

/// Symbolic state: renamed variable name -> current term. Reads of unseen
/// variables lazily bind the shared initial symbol of the variable's base
/// name, so all versions start equal by construction.
#[derive(Debug, Clone)]
pub struct SymState {
    vars: BTreeMap<String, Term>,
    array_vars: BTreeSet<Ident>,
}

impl SymState {
    pub fn new(array_vars: BTreeSet<Ident>) -> SymState {
        SymState {
            vars: BTreeMap::new(),
            array_vars,
        }
    }

    fn sort_of(&self, base: &str) -> Sort {
        if self.array_vars.contains(base) {
            Sort::Array
        } else {
            Sort::Int
        }
    }

    pub fn read(&mut self, name: &str) -> Term {
        if let Some(t) = self.vars.get(name) {
            return t.clone();
        }
        let base = strip_tag(name).to_string();
        let sort = self.sort_of(&base);
        let init = Term::Sym(SymVar {
            base,
            tag: 1,
            gen: 0,
            sort,
        });
        self.vars.insert(name.to_string(), init.clone());
        init
    }

    fn put(&mut self, name: &str, t: Term) {
        self.vars.insert(name.to_string(), t);
    }

    fn keys(&self) -> impl Iterator<Item = &String> {
        self.vars.keys()
    }
}

fn term_of_expr(state: &mut SymState, e: &Expr) -> Term {
    match e {
        Expr::Int(n) => Term::Int(n.clone()),
        Expr::Var(x) => state.read(x),
        Expr::ArrayRead(a, i) => Term::select(state.read(a), term_of_expr(state, i)),
        Expr::Bin(op, l, r) => {
            let (l, r) = (term_of_expr(state, l), term_of_expr(state, r));
            match op {
                BinOp::Add => Term::Add(Box::new(l), Box::new(r)),
                BinOp::Sub => Term::Sub(Box::new(l), Box::new(r)),
                BinOp::Mul => Term::Mul(Box::new(l), Box::new(r)),
            }
        }
    }
}

fn formula_of_pred(state: &mut SymState, p: &Pred) -> Formula {
    match p {
        Pred::Bool(true) => Formula::True,
        Pred::Bool(false) => Formula::False,
        Pred::Cmp(op, l, r) => {
            Formula::Cmp(*op, term_of_expr(state, l), term_of_expr(state, r))
        }
        Pred::And(a, b) => Formula::and(vec![
            formula_of_pred(state, a),
            formula_of_pred(state, b),
        ]),
        Pred::Or(a, b) => Formula::or(vec![
            formula_of_pred(state, a),
            formula_of_pred(state, b),
        ]),
        Pred::Not(a) => Formula::not(formula_of_pred(state, a)),
    }
}

/// Valid by inspection, without a solver.
fn syntactically_valid(f: &Formula) -> bool {
    match f {
        Formula::True => true,
        Formula::Cmp(CmpOp::Eq, a, b) => a == b,
        Formula::Iff(a, b) => a == b || (syntactically_valid(a) && syntactically_valid(b)),
        Formula::And(fs) => fs.iter().all(syntactically_valid),
        Formula::Or(fs) => fs.iter().any(syntactically_valid),
        Formula::Implies(_, b) => syntactically_valid(b),
        Formula::Forall(_, body) => syntactically_valid(body),
        _ => false,
    }
}

/// One Houdini candidate: equality between two renamed variables of the
/// same base name.
#[derive(Debug, Clone)]
struct Candidate {
    left: String,
    right: String,
}

impl Candidate {
    fn instantiate(&self, state: &mut SymState) -> Formula {
        Formula::eq(state.read(&self.left), state.read(&self.right))
    }

    fn display(&self) -> String {
        format!("{} = {}", self.left, self.right)
    }
}

/// Loop body analyzers the invariant engine can re-run per iteration.
enum LoopBody<'b> {
    /// Hole-free (typically a product fragment); analyzed by `post`.
    Concrete(&'b Stmt),
    /// Shared loop body with holes plus each version's hole fills.
    Relational {
        body: &'b HStmt,
        edits: &'b [Vec<Stmt>; NUM_VERSIONS],
    },
}

pub struct Analysis {
    pub psi: Formula,
    pub state: SymState,
    pub diagnostics: Diagnostics,
}

pub enum AnalysisResult {
    Complete(Analysis),
    /// Reason string; maps to `Verdict::Unknown`.
    Incomplete(String),
}

struct Engine<'a> {
    session: &'a mut SolverSession,
    mode: VerifyMode,
    next_gen: u32,
    next_fn: u32,
    diag: Diagnostics,
}

impl<'a> Engine<'a> {
    fn new(session: &'a mut SolverSession, mode: VerifyMode) -> Engine<'a> {
        Engine {
            session,
            mode,
            next_gen: 1,
            next_fn: 0,
            diag: Diagnostics::default(),
        }
    }

    fn fired(&mut self, rule: &str) {
        *self.diag.rules.entry(rule.to_string()).or_insert(0) += 1;
    }

    fn fresh_sym(&mut self, base: &str, tag: u8, sort: Sort) -> SymVar {
        let gen = self.next_gen;
        self.next_gen += 1;
        SymVar {
            base: base.to_string(),
            tag,
            gen,
            sort,
        }
    }

    fn assign(&mut self, state: &mut SymState, name: &str, rhs: Term, phi: Formula) -> Formula {
        let base = strip_tag(name).to_string();
        let v = self.fresh_sym(&base, name_tag(name), state.sort_of(&base));
        state.put(name, Term::Sym(v.clone()));
        phi.conjoin(Formula::eq(Term::Sym(v), rhs))
    }

    fn check(&mut self, hyp: &Formula, concl: &Formula) -> Result<SolverAnswer, Abort> {
        if syntactically_valid(concl) {
            return Ok(SolverAnswer::Valid);
        }
        Ok(self
            .session
            .check_entailment(&prune_hypothesis(hyp, concl), concl)?)
    }

    /// Which conclusions does `hyp` entail? Tries syntactic validity, then
    /// one batched conjunction query, then per-conclusion queries only if
    /// the batch fails. Unknown answers count as not entailed.
    fn entailed_mask(&mut self, hyp: &Formula, concls: &[Formula]) -> Result<Vec<bool>, Abort> {
        let mut mask = vec![false; concls.len()];
        let mut pending = Vec::new();
        for (i, c) in concls.iter().enumerate() {
            if syntactically_valid(c) {
                mask[i] = true;
            } else {
                pending.push(i);
            }
        }
        if pending.is_empty() {
            return Ok(mask);
        }
        let batch = Formula::and(pending.iter().map(|&i| concls[i].clone()).collect());
        match self.check(hyp, &batch)? {
            SolverAnswer::Valid => {
                for i in pending {
                    mask[i] = true;
                }
                return Ok(mask);
            }
            SolverAnswer::Invalid(model) => {
                // The countermodel satisfies the hypothesis, so any
                // conclusion it falsifies is definitively not entailed; only
                // the rest need their own queries.
                pending.retain(|&i| {
                    crate::smt::eval_formula(&model, &concls[i]) != Some(false)
                });
            }
            SolverAnswer::UnknownAnswer(_) => {}
        }
        for i in pending {
            mask[i] = matches!(self.check(hyp, &concls[i])?, SolverAnswer::Valid);
        }
        Ok(mask)
    }

    // -- strongest postcondition over hole-free (product) code --------------

    fn post(&mut self, s: &Stmt, phi: Formula, state: &mut SymState) -> Result<Formula, Abort> {
        match s {
            Stmt::Atom(Atom::Skip) => Ok(phi),
            Stmt::Atom(Atom::Assign(x, e)) => {
                let t = term_of_expr(state, e);
                Ok(self.assign(state, x, t, phi))
            }
            Stmt::Atom(Atom::ArrayAssign(a, i, e)) => {
                let arr = state.read(a);
                let idx = term_of_expr(state, i);
                let val = term_of_expr(state, e);
                Ok(self.assign(state, a, Term::store(arr, idx, val), phi))
            }
            Stmt::Seq(a, b) => {
                let phi = self.post(a, phi, state)?;
                self.post(b, phi, state)
            }
            Stmt::If(c, t, e) => {
                let cf = formula_of_pred(state, c);
                let mut st_t = state.clone();
                let mut st_e = state.clone();
                let phi_t = self.post(t, phi.clone().conjoin(cf.clone()), &mut st_t)?;
                let phi_e = self.post(e, phi.clone().conjoin(Formula::not(cf)), &mut st_e)?;
                Ok(self.merge_branches(phi, st_t, st_e, phi_t, phi_e, state))
            }
            Stmt::While(c, body) => {
                let modified: BTreeSet<String> = deps::modified_vars(body);
                let mentions: BTreeSet<String> = vars_of_stmt(body)
                    .into_iter()
                    .chain(vars_of_pred(c))
                    .collect();
                let candidates = candidate_pairs(&mentions, state, &modified);
                let mut havoc = state.clone();
                for name in &modified {
                    let base = strip_tag(name).to_string();
                    let v = self.fresh_sym(&base, name_tag(name), havoc.sort_of(&base));
                    havoc.put(name, Term::Sym(v));
                }
                let guard = formula_of_pred(&mut havoc, c);
                let kept = self.houdini(
                    &phi,
                    state,
                    &mut havoc,
                    &guard,
                    candidates,
                    &LoopBody::Concrete(body),
                )?;
                let inv = Formula::and(
                    kept.iter().map(|c| c.instantiate(&mut havoc)).collect(),
                );
                self.diag.invariants.push(LoopInvariant {
                    guard: format!("while ({})", pred_text(c)),
                    equalities: kept.iter().map(|c| c.display()).collect(),
                });
                *state = havoc;
                Ok(Formula::and(vec![phi, inv, Formula::not(guard)]))
            }
        }
    }

    /// Join two branch analyses: agree on unchanged terms, introduce a fresh
    /// phi symbol where they differ, and extend the entry formula `pre` with
    /// the disjunction of what each branch added beyond it. Keeping `pre`
    /// outside the disjunction keeps the path formula linear in program
    /// size.
    fn merge_branches(
        &mut self,
        pre: Formula,
        mut st_a: SymState,
        mut st_b: SymState,
        phi_a: Formula,
        phi_b: Formula,
        out: &mut SymState,
    ) -> Formula {
        let n = pre.conjunct_count();
        let mut delta_a = phi_a.conjuncts_from(n);
        let mut delta_b = phi_b.conjuncts_from(n);
        let names: BTreeSet<String> = st_a.keys().chain(st_b.keys()).cloned().collect();
        for name in names {
            let ta = st_a.read(&name);
            let tb = st_b.read(&name);
            if ta == tb {
                out.put(&name, ta);
            } else {
                let base = strip_tag(&name).to_string();
                let v = Term::Sym(self.fresh_sym(&base, name_tag(&name), out.sort_of(&base)));
                delta_a = delta_a.conjoin(Formula::eq(v.clone(), ta));
                delta_b = delta_b.conjoin(Formula::eq(v.clone(), tb));
                out.put(&name, v);
            }
        }
        pre.conjoin(Formula::or(vec![delta_a, delta_b]))
    }

    /// Greatest inductive conjunction of candidate equalities: filter to
    /// those entailed at entry, then iteratively drop any the body does not
    /// preserve. `havoc` is the loop-head state (modified vars already
    /// havocked); `guard` is instantiated in it.
    fn houdini(
        &mut self,
        phi: &Formula,
        entry: &SymState,
        havoc: &mut SymState,
        guard: &Formula,
        candidates: Vec<Candidate>,
        body: &LoopBody,
    ) -> Result<Vec<Candidate>, Abort> {
        let mut entry_state = entry.clone();
        let entry_forms: Vec<Formula> = candidates
            .iter()
            .map(|c| c.instantiate(&mut entry_state))
            .collect();
        let mask = self.entailed_mask(phi, &entry_forms)?;
        let mut kept: Vec<Candidate> = candidates
            .into_iter()
            .zip(mask)
            .filter_map(|(c, keep)| keep.then_some(c))
            .collect();
        loop {
            if kept.is_empty() {
                return Ok(kept);
            }
            let inv = Formula::and(kept.iter().map(|c| c.instantiate(havoc)).collect());
            let pre = Formula::and(vec![phi.clone(), inv, guard.clone()]);
            let mut st_b = havoc.clone();
            let hyp = match body {
                LoopBody::Concrete(s) => self.post(s, pre, &mut st_b)?,
                LoopBody::Relational { body, edits } => {
                    let mut ed: [VecDeque<Stmt>; NUM_VERSIONS] =
                        std::array::from_fn(|i| edits[i].iter().cloned().collect());
                    let r = self.rpost(body, pre, &mut st_b, &mut ed)?;
                    debug_assert!(ed.iter().all(VecDeque::is_empty));
                    r
                }
            };
            let post_forms: Vec<Formula> =
                kept.iter().map(|c| c.instantiate(&mut st_b)).collect();
            let mask = self.entailed_mask(&hyp, &post_forms)?;
            if mask.iter().all(|&b| b) {
                return Ok(kept);
            }
            kept = kept
                .into_iter()
                .zip(mask)
                .filter_map(|(c, keep)| keep.then_some(c))
                .collect();
        }
    }

    // -- relational postcondition over the shared program with holes --------

    fn rpost(
        &mut self,
        h: &HStmt,
        mut phi: Formula,
        state: &mut SymState,
        edits: &mut [VecDeque<Stmt>; NUM_VERSIONS],
    ) -> Result<Formula, Abort> {
        let items = flatten_h(h);
        let mut i = 0;
        while i < items.len() {
            if num_holes(&items[i]) == 0 {
                // Group a maximal hole-free run into one shared block so its
                // guard costs a single batched query.
                let mut run = Vec::new();
                while i < items.len() && num_holes(&items[i]) == 0 {
                    run.push(items[i].clone().try_into().expect("hole-free"));
                    i += 1;
                }
                phi = self.shared_block(&seq_of(run), phi, state)?;
            } else {
                phi = self.rpost_item(&items[i], phi, state, edits)?;
                i += 1;
            }
        }
        Ok(phi)
    }

    fn rpost_item(
        &mut self,
        item: &HStmt,
        phi: Formula,
        state: &mut SymState,
        edits: &mut [VecDeque<Stmt>; NUM_VERSIONS],
    ) -> Result<Formula, Abort> {
        match item {
            HStmt::Hole => {
                // Mini-product of the four hole fills.
                let mut parts = Vec::with_capacity(NUM_VERSIONS);
                for (i, ed) in edits.iter_mut().enumerate() {
                    let s = ed.pop_front().expect("edit arity");
                    parts.push(rename(&s, (i + 1) as u8));
                }
                self.fired("hole-product");
                let prod = self.build_product(&parts)?;
                self.post(&prod, phi, state)
            }
            HStmt::If(c, t, e) => {
                let guards: Vec<Formula> = (1..=NUM_VERSIONS as u8)
                    .map(|tag| formula_of_pred(state, &rename_pred(c, tag)))
                    .collect();
                let iffs: Vec<Formula> = pairs(NUM_VERSIONS)
                    .map(|(i, j)| Formula::iff(guards[i].clone(), guards[j].clone()))
                    .collect();
                if self.entailed_mask(&phi, &iffs)?.iter().all(|&b| b) {
                    self.fired("branch-split");
                    let c1 = guards[0].clone();
                    let mut st_t = state.clone();
                    let mut st_e = state.clone();
                    let phi_t =
                        self.rpost(t, phi.clone().conjoin(c1.clone()), &mut st_t, edits)?;
                    let phi_e =
                        self.rpost(e, phi.clone().conjoin(Formula::not(c1)), &mut st_e, edits)?;
                    Ok(self.merge_branches(phi, st_t, st_e, phi_t, phi_e, state))
                } else {
                    self.fallback(item, phi, state, edits)
                }
            }
            HStmt::While(c, b) => self.rpost_loop(item, c, b, phi, state, edits),
            // Atoms and sequences are handled by the callers.
            _ => self.fallback(item, phi, state, edits),
        }
    }

    fn rpost_loop(
        &mut self,
        item: &HStmt,
        c: &Pred,
        b: &HStmt,
        phi: Formula,
        state: &mut SymState,
        edits: &mut [VecDeque<Stmt>; NUM_VERSIONS],
    ) -> Result<Formula, Abort> {
        let k = num_holes(b);
        // Peek (do not consume) each version's hole fills for the body; on
        // fallback the whole loop goes through rule 6 with the lists intact.
        let body_edits: [Vec<Stmt>; NUM_VERSIONS] =
            std::array::from_fn(|i| edits[i].iter().take(k).cloned().collect());
        let concrete: Vec<Stmt> = (0..NUM_VERSIONS)
            .map(|i| apply_edit(b, &body_edits[i]).expect("edit arity"))
            .collect();
        let mut modified: BTreeSet<String> = BTreeSet::new();
        let mut mentions: BTreeSet<String> = BTreeSet::new();
        for (i, s) in concrete.iter().enumerate() {
            let tag = (i + 1) as u8;
            modified.extend(deps::modified_vars(s).iter().map(|v| tagged(v, tag)));
            mentions.extend(vars_of_stmt(s).iter().map(|v| tagged(v, tag)));
            mentions.extend(vars_of_pred(c).iter().map(|v| tagged(v, tag)));
        }
        let candidates = candidate_pairs(&mentions, state, &modified);
        let mut havoc = state.clone();
        for name in &modified {
            let base = strip_tag(name).to_string();
            let v = self.fresh_sym(&base, name_tag(name), havoc.sort_of(&base));
            havoc.put(name, Term::Sym(v));
        }
        let guards: Vec<Formula> = (1..=NUM_VERSIONS as u8)
            .map(|tag| formula_of_pred(&mut havoc, &rename_pred(c, tag)))
            .collect();
        let kept = self.houdini(
            &phi,
            state,
            &mut havoc,
            &guards[0],
            candidates,
            &LoopBody::Relational {
                body: b,
                edits: &body_edits,
            },
        )?;
        let inv = Formula::and(kept.iter().map(|cd| cd.instantiate(&mut havoc)).collect());
        // The loop is analyzed relationally only if the invariant forces all
        // versions to agree on the guard.
        let iffs: Vec<Formula> = pairs(NUM_VERSIONS)
            .map(|(i, j)| Formula::iff(guards[i].clone(), guards[j].clone()))
            .collect();
        let hyp = Formula::and(vec![phi.clone(), inv.clone()]);
        if !self.entailed_mask(&hyp, &iffs)?.iter().all(|&b| b) {
            return self.fallback(item, phi, state, edits);
        }
        for ed in edits.iter_mut() {
            ed.drain(..k);
        }
        self.fired("loop-invariant");
        self.diag.invariants.push(LoopInvariant {
            guard: format!("while ({})", pred_text(c)),
            equalities: kept.iter().map(|cd| cd.display()).collect(),
        });
        let negations =
            Formula::and(guards.into_iter().map(Formula::not).collect());
        *state = havoc;
        Ok(Formula::and(vec![phi, inv, negations]))
    }

    /// Shared hole-free block: uninterpreted-function summary under the
    /// conflict-freedom guard, or concrete inlining when summaries are
    /// disabled; falls back to a full product when the guard fails.
    fn shared_block(
        &mut self,
        s: &Stmt,
        phi: Formula,
        state: &mut SymState,
    ) -> Result<Formula, Abort> {
        let accessed = vars_of_stmt(s);
        if accessed.is_empty() {
            return Ok(phi);
        }
        if self.mode == VerifyMode::NoDependence {
            self.fired("shared-inlined");
            return self.inline_block(s, phi, state);
        }
        let mut cf_forms = Vec::new();
        for v in &accessed {
            if let Some(f) = cf_var(v, state) {
                cf_forms.push(f);
            }
        }
        let guard_ok = cf_forms.is_empty()
            || matches!(
                self.check(&phi, &Formula::and(cf_forms))?,
                SolverAnswer::Valid
            );
        if !guard_ok {
            self.fired("shared-fallback");
            return self.inline_block(s, phi, state);
        }
        self.fired("shared-summary");
        let summary = deps::summarize(s);
        // All summaries read the pre-state: snapshot every argument term
        // before performing any assignment.
        let mut per_tag = Vec::new();
        let mut collapsed = Vec::new();
        for y in summary.modifies() {
            let dep_list: Vec<Ident> = summary.of(&y).into_iter().collect();
            let f = FnSym {
                name: format!("sf{}_{}", self.next_fn, y),
                args: dep_list.iter().map(|d| state.sort_of(d)).collect(),
                ret: state.sort_of(&y),
            };
            self.next_fn += 1;
            let args: Vec<Vec<Term>> = (1..=NUM_VERSIONS as u8)
                .map(|tag| {
                    dep_list
                        .iter()
                        .map(|d| state.read(&tagged(d, tag)))
                        .collect()
                })
                .collect();
            if args.iter().all(|a| *a == args[0]) {
                // All versions apply the same function to identical terms;
                // one shared symbol keeps later queries free of redundant
                // cross-version equalities.
                collapsed.push((y, Term::App(f, args[0].clone())));
            } else {
                for (tag, a) in (1..=NUM_VERSIONS as u8).zip(args) {
                    per_tag.push((tagged(&y, tag), Term::App(f.clone(), a)));
                }
            }
        }
        let mut phi = phi;
        for (y, rhs) in collapsed {
            let v = self.fresh_sym(&y, 1, state.sort_of(&y));
            phi = phi.conjoin(Formula::eq(Term::Sym(v.clone()), rhs));
            for tag in 1..=NUM_VERSIONS as u8 {
                state.put(&tagged(&y, tag), Term::Sym(v.clone()));
            }
        }
        for (name, rhs) in per_tag {
            phi = self.assign(state, &name, rhs, phi);
        }
        Ok(phi)
    }

    /// Concrete analysis of a shared hole-free fragment: product of the four
    /// renamed copies.
    fn inline_block(
        &mut self,
        s: &Stmt,
        phi: Formula,
        state: &mut SymState,
    ) -> Result<Formula, Abort> {
        let parts: Vec<Stmt> = (1..=NUM_VERSIONS as u8).map(|t| rename(s, t)).collect();
        let prod = self.build_product(&parts)?;
        self.post(&prod, phi, state)
    }

    /// Rule-6 fallback: fill each version's holes, rename, build the full
    /// product of the four versions, and compute its postcondition.
    fn fallback(
        &mut self,
        item: &HStmt,
        phi: Formula,
        state: &mut SymState,
        edits: &mut [VecDeque<Stmt>; NUM_VERSIONS],
    ) -> Result<Formula, Abort> {
        let k = num_holes(item);
        let mut parts = Vec::with_capacity(NUM_VERSIONS);
        for (i, ed) in edits.iter_mut().enumerate() {
            let fills: Vec<Stmt> = ed.drain(..k).collect();
            let s = apply_edit(item, &fills).expect("edit arity");
            parts.push(rename(&s, (i + 1) as u8));
        }
        self.fired("full-product");
        let prod = self.build_product(&parts)?;
        self.post(&prod, phi, state)
    }

    fn build_product(&mut self, parts: &[Stmt]) -> Result<Stmt, Abort> {
        construct_product(parts).map_err(|e| match e {
            ProductError::TooLarge(_) => Abort::GaveUp("product too large".to_string()),
            ProductError::SharedVariable(v) => {
                Abort::GaveUp(format!("product inputs share variable {v}"))
            }
        })
    }
}

/// Restrict a conjunction hypothesis to the conjuncts transitively connected
/// to the conclusion's symbols. Dropping disconnected conjuncts only weakens
/// the hypothesis, so a Valid answer stays sound; path formulas of real
/// programs are satisfiable, so the dropped part can never have carried a
/// contradiction.
fn prune_hypothesis(hyp: &Formula, concl: &Formula) -> Formula {
    let list = match hyp {
        Formula::And(fs) => fs,
        _ => return hyp.clone(),
    };
    let syms_of = |f: &Formula| -> BTreeSet<SymVar> {
        let mut vars = BTreeSet::new();
        let mut funs = BTreeSet::new();
        formula_syms(f, &mut vars, &mut funs);
        vars
    };
    let conj_syms: Vec<BTreeSet<SymVar>> = list.iter().map(&syms_of).collect();
    let mut by_sym: BTreeMap<&SymVar, Vec<usize>> = BTreeMap::new();
    for (i, syms) in conj_syms.iter().enumerate() {
        for s in syms {
            by_sym.entry(s).or_default().push(i);
        }
    }
    let mut reached: Vec<SymVar> = syms_of(concl).into_iter().collect();
    let mut seen: BTreeSet<SymVar> = reached.iter().cloned().collect();
    let mut kept = vec![false; list.len()];
    while let Some(s) = reached.pop() {
        for &i in by_sym.get(&s).into_iter().flatten() {
            if !kept[i] {
                kept[i] = true;
                for t in &conj_syms[i] {
                    if seen.insert(t.clone()) {
                        reached.push(t.clone());
                    }
                }
            }
        }
    }
    if kept.iter().all(|&b| b) {
        return hyp.clone();
    }
    Formula::and(
        list.iter()
            .zip(&kept)
            .filter_map(|(f, &keep)| keep.then(|| f.clone()))
            .collect(),
    )
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

fn pred_text(c: &Pred) -> String {
    // Reuse the statement printer; strip the while wrapper it needs.
    let s = crate::pretty::pretty_print_stmt(&Stmt::While(c.clone(), Box::new(Stmt::skip())));
    s.lines()
        .next()
        .unwrap_or_default()
        .trim_start_matches("while (")
        .trim_end_matches(") {")
        .to_string()
}

/// Candidate equalities for a loop: all same-base pairs of renamed variables
/// where at least one side is modified by the loop. Pairs with both sides
/// unmodified are redundant (their terms survive the loop unchanged and the
/// path condition already carries whatever is known about them).
fn candidate_pairs(
    mentions: &BTreeSet<String>,
    state: &SymState,
    modified: &BTreeSet<String>,
) -> Vec<Candidate> {
    let mut by_base: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for name in mentions.iter().chain(state.keys()).chain(modified.iter()) {
        by_base
            .entry(strip_tag(name).to_string())
            .or_default()
            .insert(name.clone());
    }
    let mut out = Vec::new();
    for names in by_base.values() {
        let names: Vec<&String> = names.iter().collect();
        for (i, j) in pairs(names.len()) {
            if modified.contains(names[i]) || modified.contains(names[j]) {
                out.push(Candidate {
                    left: names[i].clone(),
                    right: names[j].clone(),
                });
            }
        }
    }
    out
}

/// Quantifier-free conflict-freedom condition for one variable across the
/// four versions; `None` when it holds by syntactic term equality.
fn cf_var(base: &str, state: &mut SymState) -> Option<Formula> {
    let t: Vec<Term> = (1..=NUM_VERSIONS as u8)
        .map(|tag| state.read(&tagged(base, tag)))
        .collect();
    if t.iter().all(|x| *x == t[0]) {
        return None;
    }
    let all_eq = Formula::and(vec![
        Formula::eq(t[0].clone(), t[1].clone()),
        Formula::eq(t[0].clone(), t[2].clone()),
        Formula::eq(t[0].clone(), t[3].clone()),
    ]);
    let safe = Formula::and(vec![
        Formula::implies(
            Formula::ne(t[0].clone(), t[1].clone()),
            Formula::eq(t[1].clone(), t[3].clone()),
        ),
        Formula::implies(
            Formula::ne(t[0].clone(), t[2].clone()),
            Formula::eq(t[2].clone(), t[3].clone()),
        ),
    ]);
    Some(Formula::or(vec![all_eq, safe]))
}

/// Run the relational analysis and return the final path formula and
/// symbolic state, without checking any output condition.
pub fn analyze(
    session: &mut SolverSession,
    shared: &HStmt,
    edits: &[Edit],
    mode: VerifyMode,
) -> Result<AnalysisResult, VerifyError> {
    assert_eq!(edits.len(), NUM_VERSIONS, "exactly four versions expected");
    let mut programs = Vec::with_capacity(NUM_VERSIONS);
    for e in edits {
        programs.push(apply_edit(shared, e)?);
    }
    let mut array_vars: BTreeSet<Ident> = programs.iter().flat_map(array_idents).collect();
    array_vars.insert("out".to_string());
    let mut engine = Engine::new(session, mode);
    engine.diag.hole_count = num_holes(shared);
    let mut state = SymState::new(array_vars);
    let mut deques: [VecDeque<Stmt>; NUM_VERSIONS] =
        std::array::from_fn(|i| edits[i].iter().cloned().collect());
    let result = match mode {
        VerifyMode::FullProduct => {
            engine.fallback(shared, Formula::True, &mut state, &mut deques)
        }
        _ => engine.rpost(shared, Formula::True, &mut state, &mut deques),
    };
    match result {
        Ok(psi) => {
            debug_assert!(deques.iter().all(VecDeque::is_empty));
            Ok(AnalysisResult::Complete(Analysis {
                psi,
                state,
                diagnostics: engine.diag,
            }))
        }
        Err(Abort::GaveUp(reason)) => Ok(AnalysisResult::Incomplete(reason)),
        Err(Abort::Solver(e)) => Err(VerifyError::Solver(e)),
    }
}

fn out_condition(state: &mut SymState, global_otherwise: bool) -> Formula {
    let o: Vec<Term> = (1..=NUM_VERSIONS as u8)
        .map(|tag| state.read(&tagged("out", tag)))
        .collect();
    let idx = "idx".to_string();
    let sel: Vec<Term> = o
        .iter()
        .map(|a| Term::select(a.clone(), Term::Bound(idx.clone())))
        .collect();
    let c1 = Formula::implies(
        Formula::ne(sel[0].clone(), sel[1].clone()),
        Formula::eq(sel[3].clone(), sel[1].clone()),
    );
    let c2 = Formula::implies(
        Formula::ne(sel[0].clone(), sel[2].clone()),
        Formula::eq(sel[3].clone(), sel[2].clone()),
    );
    let c3 = Formula::implies(
        Formula::and(vec![
            Formula::eq(sel[0].clone(), sel[1].clone()),
            Formula::eq(sel[0].clone(), sel[2].clone()),
        ]),
        Formula::eq(sel[3].clone(), sel[0].clone()),
    );
    if global_otherwise {
        // (chi1 and chi2) or chi3, each quantified on its own: no nesting.
        let q = |f: Formula| Formula::Forall(idx.clone(), Box::new(f));
        Formula::or(vec![
            Formula::and(vec![q(c1.clone()), q(c2.clone())]),
            q(c3),
        ])
    } else {
        Formula::Forall(idx, Box::new(Formula::and(vec![c1, c2, c3])))
    }
}

/// Top-level conflict-freedom check of a four-way merge given as a shared
/// program plus edits in the order base, variant A, variant B, merge.
pub fn verify(
    session: &mut SolverSession,
    shared: &HStmt,
    edits: &[Edit],
    opts: &VerifyOptions,
) -> Result<(Verdict, Diagnostics), VerifyError> {
    let queries_before = session.stats.queries;
    let time_before = session.stats.total_time;
    let mut analysis = match analyze(session, shared, edits, opts.mode)? {
        AnalysisResult::Complete(a) => a,
        AnalysisResult::Incomplete(reason) => {
            return Ok((Verdict::Unknown(reason), Diagnostics::default()))
        }
    };
    let mut conclusion = vec![out_condition(&mut analysis.state, opts.global_otherwise)];
    for v in &opts.check_vars {
        if let Some(f) = cf_var(v, &mut analysis.state) {
            conclusion.push(f);
        }
    }
    let conclusion = Formula::and(conclusion);
    let answer = if syntactically_valid(&conclusion) {
        SolverAnswer::Valid
    } else {
        session.check_entailment(&prune_hypothesis(&analysis.psi, &conclusion), &conclusion)?
    };
    let mut diag = analysis.diagnostics;
    diag.solver_queries = session.stats.queries - queries_before;
    diag.solver_time_ms = (session.stats.total_time - time_before).as_millis();
    let verdict = match answer {
        SolverAnswer::Valid => Verdict::Verified,
        SolverAnswer::UnknownAnswer(reason) => Verdict::Unknown(reason),
        SolverAnswer::Invalid(model) => {
            // Concretize the countermodel over the shared initial symbols
            // and replay all four versions to confirm the conflict.
            let mut vars = BTreeSet::new();
            let mut funs = BTreeSet::new();
            formula_syms(&analysis.psi, &mut vars, &mut funs);
            formula_syms(&conclusion, &mut vars, &mut funs);
            let inputs: Vec<SymVar> = vars.into_iter().filter(|v| v.gen == 0).collect();
            let sigma = concretize(&model, &inputs);
            let mut outs = Vec::with_capacity(NUM_VERSIONS);
            let mut exhausted = false;
            for e in edits {
                let p = apply_edit(shared, e).expect("checked in analyze");
                match interpret(&p, &sigma, opts.replay_fuel) {
                    Ok(v) => outs.push(v),
                    Err(_) => {
                        exhausted = true;
                        break;
                    }
                }
            }
            let confirmed = !exhausted
                && oracle::check_conflict_freedom(&outs[0], &outs[1], &outs[2], &outs[3])
                    .is_some();
            Verdict::Conflict {
                witness: Some(sigma),
                confirmed,
            }
        }
    };
    Ok((verdict, diag))
}
