//! SMT backend: renders formulas to SMT-LIB v2, manages a solver child
//! process, and answers entailment queries with models on failure.
//!
//! Every query is self-contained inside a `push`/`pop` frame (declarations
//! included), so the session carries no assertion state between queries and
//! a timed-out child can simply be killed and respawned. The solver binary
//! is resolved from an explicit path, the `MERGEGUARD_SOLVER` environment
//! variable, `z3` on `PATH` (invoked with `-in`), or a `tools/z3` shim next
//! to the working directory, in that order.

use crate::ast::CmpOp;
use crate::interp::{Valuation, Value};
use crate::logic::*;
use num_bigint::BigInt;
use num_traits::Zero;
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::time::{Duration, Instant};
use thiserror::Error;

pub const ENV_SOLVER: &str = "MERGEGUARD_SOLVER";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("no SMT solver found: pass --solver, set {ENV_SOLVER}, or put z3 on PATH")]
    NotFound,
    #[error("failed to start solver `{cmd}`: {source}")]
    Spawn {
        cmd: String,
        source: std::io::Error,
    },
    #[error("solver i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelValue {
    Int(BigInt),
    Array {
        default: BigInt,
        stores: Vec<(BigInt, BigInt)>,
    },
    Opaque(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Model {
    pub entries: BTreeMap<String, ModelValue>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverAnswer {
    Valid,
    Invalid(Model),
    UnknownAnswer(String),
}

#[derive(Debug, Clone, Default)]
pub struct SolverStats {
    pub queries: u64,
    pub total_time: Duration,
}

/// Resolve the solver command line. `flag` wins over the environment, which
/// wins over `z3` on PATH, which wins over a repo-local `tools/z3` shim.
pub fn resolve_solver(flag: Option<&str>) -> Result<Vec<String>, SolverError> {
    if let Some(v) = flag {
        return Ok(v.split_whitespace().map(String::from).collect());
    }
    if let Ok(v) = std::env::var(ENV_SOLVER) {
        if !v.trim().is_empty() {
            return Ok(v.split_whitespace().map(String::from).collect());
        }
    }
    if let Some(path) = which("z3") {
        return Ok(vec![path, "-in".to_string()]);
    }
    for candidate in ["tools/z3", "../tools/z3", "../../tools/z3"] {
        if std::path::Path::new(candidate).is_file() {
            return Ok(vec![candidate.to_string()]);
        }
    }
    Err(SolverError::NotFound)
}

fn which(name: &str) -> Option<String> {
    let path = std::env::var_os("PATH")?;
    for dir in std::env::split_paths(&path) {
        let p = dir.join(name);
        if p.is_file() {
            return Some(p.to_string_lossy().into_owned());
        }
    }
    None
}

struct ChildProc {
    child: Child,
    stdin: std::process::ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

pub struct SolverSession {
    cmd: Vec<String>,
    proc: Option<ChildProc>,
    pub timeout: Duration,
    pub stats: SolverStats,
}

impl SolverSession {
    pub fn new(cmd: Vec<String>) -> SolverSession {
        SolverSession {
            cmd,
            proc: None,
            timeout: DEFAULT_TIMEOUT,
            stats: SolverStats::default(),
        }
    }

    pub fn command_line(&self) -> String {
        self.cmd.join(" ")
    }

    fn ensure_proc(&mut self) -> Result<(), SolverError> {
        if self.proc.is_some() {
            return Ok(());
        }
        let mut child = Command::new(&self.cmd[0])
            .args(&self.cmd[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SolverError::Spawn {
                cmd: self.cmd.join(" "),
                source: e,
            })?;
        let stdin = child.stdin.take().expect("stdin piped");
        let stdout = child.stdout.take().expect("stdout piped");
        let (tx, rx) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut proc = ChildProc {
            child,
            stdin,
            lines: rx,
        };
        writeln!(proc.stdin, "(set-option :produce-models true)")?;
        self.proc = Some(proc);
        Ok(())
    }

    fn kill(&mut self) {
        if let Some(mut p) = self.proc.take() {
            let _ = p.child.kill();
            let _ = p.child.wait();
        }
    }

    fn send(&mut self, text: &str) -> Result<(), SolverError> {
        let proc = self.proc.as_mut().expect("process running");
        proc.stdin.write_all(text.as_bytes())?;
        proc.stdin.flush()?;
        Ok(())
    }

    fn read_line(&mut self, deadline: Instant) -> Result<Option<String>, SolverError> {
        let proc = self.proc.as_mut().expect("process running");
        let now = Instant::now();
        if now >= deadline {
            return Ok(None);
        }
        match proc.lines.recv_timeout(deadline - now) {
            Ok(Ok(line)) => Ok(Some(line)),
            Ok(Err(e)) => Err(SolverError::Io(e)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => {
                Err(SolverError::Protocol("solver process exited".into()))
            }
        }
    }

    /// Read one balanced s-expression (may span lines).
    fn read_sexp(&mut self, deadline: Instant) -> Result<Option<String>, SolverError> {
        let mut buf = String::new();
        let mut depth: i64 = 0;
        loop {
            let line = match self.read_line(deadline)? {
                Some(l) => l,
                None => return Ok(None),
            };
            for c in line.chars() {
                match c {
                    '(' => depth += 1,
                    ')' => depth -= 1,
                    _ => {}
                }
            }
            buf.push_str(&line);
            buf.push('\n');
            if depth <= 0 && !buf.trim().is_empty() {
                return Ok(Some(buf));
            }
        }
    }

    /// Check `hypothesis ⊨ conclusion` by asserting the hypothesis and the
    /// negated conclusion in a fresh frame. Unsat means the entailment is
    /// valid; sat yields a countermodel; unknown or a timeout degrade to
    /// [`SolverAnswer::UnknownAnswer`].
    pub fn check_entailment(
        &mut self,
        hypothesis: &Formula,
        conclusion: &Formula,
    ) -> Result<SolverAnswer, SolverError> {
        let start = Instant::now();
        let answer = self.check_entailment_inner(hypothesis, conclusion);
        self.stats.queries += 1;
        self.stats.total_time += start.elapsed();
        if std::env::var_os("MERGEGUARD_DUMP_SMT").is_some() {
            eprintln!(";; elapsed: {:?}", start.elapsed());
        }
        answer
    }

    /// Wait for the echoed sync marker, skipping chatter. The wasm shim
    /// occasionally swallows the marker; since nothing follows it in a
    /// batch, a short grace window is enough, and a marker that straggles in
    /// later is skipped as chatter by the next query (markers are unique).
    fn drain_marker(&mut self, marker: &str, deadline: Instant) -> Result<(), SolverError> {
        let grace = Instant::now() + Duration::from_millis(150);
        loop {
            match self.read_line(deadline.min(grace))? {
                None => return Ok(()),
                Some(l) if l.trim() == marker => return Ok(()),
                Some(_) => {}
            }
        }
    }

    fn check_entailment_inner(
        &mut self,
        hypothesis: &Formula,
        conclusion: &Formula,
    ) -> Result<SolverAnswer, SolverError> {
        self.ensure_proc()?;
        let query = Formula::and(vec![hypothesis.clone(), Formula::not(conclusion.clone())]);
        // One self-contained batch per query, ending in an echoed sync
        // marker. The marker lets the reader skip solver chatter
        // (`unsupported`, stray error s-expressions) and resynchronize
        // before the next query. The model is fetched in a second batch only
        // after a sat answer: requesting it unconditionally makes the wasm
        // shim emit a "model is not available" error on unsat, and that error
        // path sporadically swallows the rest of the batch's output.
        let dump = std::env::var_os("MERGEGUARD_DUMP_SMT").is_some();
        let deadline = Instant::now() + self.timeout;
        let timed_out = |s: &mut Self, what: &str| {
            // The child may be wedged mid-solve. Kill it; the next query
            // respawns a fresh one.
            s.kill();
            SolverAnswer::UnknownAnswer(format!("solver timeout ({what}) after {:?}", s.timeout))
        };
        // The wasm shim sporadically truncates a batch in transit, which
        // surfaces as a parse error (or the bare marker) instead of a
        // check-sat answer. That is a transmission failure, not a solver
        // verdict, so the query is re-sent a bounded number of times; the
        // leading `reset` makes each attempt self-contained.
        let mut marker = String::new();
        let mut verdict = None;
        'attempt: for attempt in 0..3 {
            marker = format!("sync-{}-{attempt}", self.stats.queries);
            let mut script = emit_query(&query);
            script.push_str(&format!("(echo \"{marker}\")\n"));
            if dump {
                eprintln!(";; query {} attempt {attempt}\n{script}", self.stats.queries + 1);
            }
            self.send(&script)?;
            loop {
                let line = match self.read_line(deadline)? {
                    None => return Ok(timed_out(self, "waiting for check-sat")),
                    Some(l) => l,
                };
                let t = line.trim();
                if dump && !t.is_empty() {
                    eprintln!(";; reply: {t}");
                }
                match t {
                    "sat" | "unsat" | "unknown" => {
                        verdict = Some(t.to_string());
                        break 'attempt;
                    }
                    _ if t == marker || t.starts_with("(error") => continue 'attempt,
                    _ => {} // chatter; ignore
                }
            }
        }
        let verdict = match verdict {
            Some(v) => v,
            None => {
                return Ok(SolverAnswer::UnknownAnswer(
                    "solver stream repeatedly garbled".into(),
                ))
            }
        };
        self.drain_marker(&marker, deadline)?;
        let model_text = if verdict == "sat" {
            // Solver state persists between batches, so the model of the
            // check-sat above is still current.
            let model_marker = format!("{marker}-model");
            self.send(&format!("(get-model)\n(echo \"{model_marker}\")\n"))?;
            let text = match self.read_sexp(deadline)? {
                None => return Ok(timed_out(self, "reading model")),
                Some(t) => Some(t),
            };
            self.drain_marker(&model_marker, deadline)?;
            text
        } else {
            None
        };
        match verdict.as_str() {
            "unsat" => Ok(SolverAnswer::Valid),
            "unknown" => Ok(SolverAnswer::UnknownAnswer("solver returned unknown".into())),
            _ => match parse_model(model_text.as_deref().unwrap_or_default()) {
                Ok(model) => Ok(SolverAnswer::Invalid(model)),
                // A garbled model still proves satisfiability, but without a
                // witness the best sound verdict is unknown.
                Err(e) => Ok(SolverAnswer::UnknownAnswer(format!("unreadable model: {e}"))),
            },
        }
    }
}

impl Drop for SolverSession {
    fn drop(&mut self) {
        if self.proc.is_some() {
            let _ = self.send("(exit)\n");
            self.kill();
        }
    }
}

/// Full query text for `sat(f)?`: a `reset`, all declarations, the
/// assertion, and `check-sat`. Resetting instead of push/pop keeps Z3 on its
/// one-shot solver; the incremental solver it switches to under push/pop is
/// over an order of magnitude slower on these queries.
pub fn emit_query(f: &Formula) -> String {
    let mut vars = std::collections::BTreeSet::new();
    let mut funs = std::collections::BTreeSet::new();
    formula_syms(f, &mut vars, &mut funs);
    let mut out = String::from("(reset)\n(set-option :produce-models true)\n");
    for v in &vars {
        let sort = match v.sort {
            Sort::Int => "Int",
            Sort::Array => "(Array Int Int)",
        };
        out.push_str(&format!("(declare-const {} {})\n", v.smt_name(), sort));
    }
    for fun in &funs {
        let args: Vec<&str> = fun
            .args
            .iter()
            .map(|s| match s {
                Sort::Int => "Int",
                Sort::Array => "(Array Int Int)",
            })
            .collect();
        let ret = match fun.ret {
            Sort::Int => "Int",
            Sort::Array => "(Array Int Int)",
        };
        out.push_str(&format!(
            "(declare-fun {} ({}) {})\n",
            fun.name,
            args.join(" "),
            ret
        ));
    }
    out.push_str(&format!("(assert {})\n(check-sat)\n", emit_formula(f)));
    out
}

pub fn emit_formula(f: &Formula) -> String {
    match f {
        Formula::True => "true".into(),
        Formula::False => "false".into(),
        Formula::Cmp(op, a, b) => {
            let (l, r) = (emit_term(a), emit_term(b));
            match op {
                CmpOp::Eq => format!("(= {l} {r})"),
                CmpOp::Ne => format!("(not (= {l} {r}))"),
                CmpOp::Lt => format!("(< {l} {r})"),
                CmpOp::Le => format!("(<= {l} {r})"),
                CmpOp::Gt => format!("(> {l} {r})"),
                CmpOp::Ge => format!("(>= {l} {r})"),
            }
        }
        Formula::And(fs) => nary("and", fs),
        Formula::Or(fs) => nary("or", fs),
        Formula::Not(a) => format!("(not {})", emit_formula(a)),
        Formula::Implies(a, b) => format!("(=> {} {})", emit_formula(a), emit_formula(b)),
        Formula::Iff(a, b) => format!("(= {} {})", emit_formula(a), emit_formula(b)),
        Formula::Forall(x, body) => {
            format!("(forall (({x} Int)) {})", emit_formula(body))
        }
    }
}

fn nary(op: &str, fs: &[Formula]) -> String {
    match fs.len() {
        0 => {
            if op == "and" {
                "true".into()
            } else {
                "false".into()
            }
        }
        1 => emit_formula(&fs[0]),
        _ => {
            let parts: Vec<String> = fs.iter().map(emit_formula).collect();
            format!("({op} {})", parts.join(" "))
        }
    }
}

pub fn emit_term(t: &Term) -> String {
    match t {
        Term::Int(n) => {
            if n < &BigInt::zero() {
                format!("(- {})", -n)
            } else {
                n.to_string()
            }
        }
        Term::Sym(v) => v.smt_name(),
        Term::Bound(x) => x.clone(),
        Term::Add(a, b) => format!("(+ {} {})", emit_term(a), emit_term(b)),
        Term::Sub(a, b) => format!("(- {} {})", emit_term(a), emit_term(b)),
        Term::Mul(a, b) => format!("(* {} {})", emit_term(a), emit_term(b)),
        Term::Select(a, i) => format!("(select {} {})", emit_term(a), emit_term(i)),
        Term::Store(a, i, v) => format!(
            "(store {} {} {})",
            emit_term(a),
            emit_term(i),
            emit_term(v)
        ),
        Term::App(f, args) => {
            if args.is_empty() {
                f.name.clone()
            } else {
                let parts: Vec<String> = args.iter().map(emit_term).collect();
                format!("({} {})", f.name, parts.join(" "))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Best-effort formula evaluation under a model. Used to cheaply refute
// candidate invariants against a countermodel: `Some(false)` is definitive
// (the model satisfies the hypothesis but falsifies this formula), while
// `Some(true)` and `None` say nothing about entailment.

#[derive(Debug, Clone, PartialEq, Eq)]
enum EvalValue {
    Int(BigInt),
    Array {
        default: BigInt,
        stores: BTreeMap<BigInt, BigInt>,
    },
}

fn eval_term(model: &Model, t: &Term) -> Option<EvalValue> {
    match t {
        Term::Int(n) => Some(EvalValue::Int(n.clone())),
        Term::Sym(v) => match model.entries.get(&v.smt_name()) {
            Some(ModelValue::Int(n)) => Some(EvalValue::Int(n.clone())),
            Some(ModelValue::Array { default, stores }) => Some(EvalValue::Array {
                default: default.clone(),
                stores: stores.iter().cloned().collect(),
            }),
            // Absent from the model means don't-care, not zero; stay
            // conservative.
            _ => None,
        },
        Term::Bound(_) => None,
        Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => {
            let (x, y) = (eval_int(model, a)?, eval_int(model, b)?);
            Some(EvalValue::Int(match t {
                Term::Add(..) => x + y,
                Term::Sub(..) => x - y,
                _ => x * y,
            }))
        }
        Term::Select(a, i) => {
            let idx = eval_int(model, i)?;
            match eval_term(model, a)? {
                EvalValue::Array { default, stores } => {
                    Some(EvalValue::Int(stores.get(&idx).cloned().unwrap_or(default)))
                }
                EvalValue::Int(_) => None,
            }
        }
        Term::Store(a, i, v) => {
            let idx = eval_int(model, i)?;
            let val = eval_int(model, v)?;
            match eval_term(model, a)? {
                EvalValue::Array {
                    default,
                    mut stores,
                } => {
                    stores.insert(idx, val);
                    Some(EvalValue::Array { default, stores })
                }
                EvalValue::Int(_) => None,
            }
        }
        // Function interpretations in models are not tracked.
        Term::App(..) => None,
    }
}

fn eval_int(model: &Model, t: &Term) -> Option<BigInt> {
    match eval_term(model, t)? {
        EvalValue::Int(n) => Some(n),
        EvalValue::Array { .. } => None,
    }
}

fn eval_eq(a: &EvalValue, b: &EvalValue) -> Option<bool> {
    match (a, b) {
        (EvalValue::Int(x), EvalValue::Int(y)) => Some(x == y),
        (
            EvalValue::Array {
                default: da,
                stores: sa,
            },
            EvalValue::Array {
                default: db,
                stores: sb,
            },
        ) => {
            if da != db {
                // Equal on the finitely many stored indices at best; they
                // differ somewhere outside.
                return Some(false);
            }
            for (k, v) in sa {
                if sb.get(k).unwrap_or(da) != v {
                    return Some(false);
                }
            }
            for (k, v) in sb {
                if sa.get(k).unwrap_or(da) != v {
                    return Some(false);
                }
            }
            Some(true)
        }
        _ => None,
    }
}

/// Three-valued evaluation: `None` when the model does not determine the
/// formula (unbound symbols, quantifiers, uninterpreted functions).
pub fn eval_formula(model: &Model, f: &Formula) -> Option<bool> {
    match f {
        Formula::True => Some(true),
        Formula::False => Some(false),
        Formula::Cmp(op, a, b) => {
            if matches!(op, CmpOp::Eq | CmpOp::Ne) {
                let (x, y) = (eval_term(model, a)?, eval_term(model, b)?);
                let eq = eval_eq(&x, &y)?;
                return Some(if matches!(op, CmpOp::Eq) { eq } else { !eq });
            }
            let (x, y) = (eval_int(model, a)?, eval_int(model, b)?);
            Some(match op {
                CmpOp::Lt => x < y,
                CmpOp::Le => x <= y,
                CmpOp::Gt => x > y,
                CmpOp::Ge => x >= y,
                _ => unreachable!(),
            })
        }
        Formula::And(fs) => three_valued_all(fs.iter().map(|g| eval_formula(model, g))),
        Formula::Or(fs) => {
            three_valued_all(fs.iter().map(|g| eval_formula(model, g).map(|b| !b)))
                .map(|b| !b)
        }
        Formula::Not(a) => eval_formula(model, a).map(|b| !b),
        Formula::Implies(a, b) => match (eval_formula(model, a), eval_formula(model, b)) {
            (Some(false), _) | (_, Some(true)) => Some(true),
            (Some(true), Some(false)) => Some(false),
            _ => None,
        },
        Formula::Iff(a, b) => Some(eval_formula(model, a)? == eval_formula(model, b)?),
        Formula::Forall(..) => None,
    }
}

fn three_valued_all(it: impl Iterator<Item = Option<bool>>) -> Option<bool> {
    let mut unknown = false;
    for v in it {
        match v {
            Some(false) => return Some(false),
            None => unknown = true,
            Some(true) => {}
        }
    }
    if unknown {
        None
    } else {
        Some(true)
    }
}

// ---------------------------------------------------------------------------
// Model parsing

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn parse_sexp(text: &str) -> Result<Sexp, String> {
    let mut toks = Vec::new();
    let mut cur = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' | ')' => {
                if !cur.is_empty() {
                    toks.push(std::mem::take(&mut cur));
                }
                toks.push(c.to_string());
            }
            '|' => {
                // Quoted symbol; keep contents verbatim.
                cur.push('|');
                for d in chars.by_ref() {
                    cur.push(d);
                    if d == '|' {
                        break;
                    }
                }
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    toks.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        toks.push(cur);
    }
    let mut pos = 0usize;
    fn parse(toks: &[String], pos: &mut usize) -> Result<Sexp, String> {
        match toks.get(*pos) {
            None => Err("unexpected end of model".into()),
            Some(t) if t == "(" => {
                *pos += 1;
                let mut items = Vec::new();
                loop {
                    match toks.get(*pos) {
                        None => return Err("unbalanced parentheses".into()),
                        Some(t) if t == ")" => {
                            *pos += 1;
                            return Ok(Sexp::List(items));
                        }
                        _ => items.push(parse(toks, pos)?),
                    }
                }
            }
            Some(t) if t == ")" => Err("unexpected `)`".into()),
            Some(t) => {
                *pos += 1;
                Ok(Sexp::Atom(t.clone()))
            }
        }
    }
    let s = parse(&toks, &mut pos)?;
    Ok(s)
}

fn parse_model(text: &str) -> Result<Model, String> {
    let top = parse_sexp(text)?;
    let items = match top {
        Sexp::List(items) => items,
        _ => return Err("model is not a list".into()),
    };
    // Older solvers wrap the list in a leading `model` atom.
    let defs: Vec<&Sexp> = items
        .iter()
        .skip_while(|s| matches!(s, Sexp::Atom(a) if a == "model"))
        .collect();
    // First pass: collect raw define-funs so `as-array` references resolve.
    let mut raw: BTreeMap<String, (&Sexp, &Sexp, &Sexp)> = BTreeMap::new();
    for d in &defs {
        if let Sexp::List(parts) = d {
            if parts.len() == 5 {
                if let (Sexp::Atom(kw), Sexp::Atom(name)) = (&parts[0], &parts[1]) {
                    if kw == "define-fun" {
                        raw.insert(name.clone(), (&parts[2], &parts[3], &parts[4]));
                    }
                }
            }
        }
    }
    let mut model = Model::default();
    for (name, (params, ret, body)) in &raw {
        let nullary = matches!(params, Sexp::List(l) if l.is_empty());
        if !nullary {
            continue; // function interpretations are only used via as-array
        }
        let value = match ret {
            Sexp::Atom(a) if a == "Int" => match parse_int(body) {
                Some(n) => ModelValue::Int(n),
                None => ModelValue::Opaque(format!("{body:?}")),
            },
            _ => match parse_array(body, &raw) {
                Some(v) => v,
                None => ModelValue::Opaque(format!("{body:?}")),
            },
        };
        model.entries.insert(name.clone(), value);
    }
    Ok(model)
}

fn parse_int(s: &Sexp) -> Option<BigInt> {
    match s {
        Sexp::Atom(a) => a.parse().ok(),
        Sexp::List(l) => {
            // (- 5)
            if l.len() == 2 {
                if let Sexp::Atom(op) = &l[0] {
                    if op == "-" {
                        return parse_int(&l[1]).map(|n| -n);
                    }
                }
            }
            None
        }
    }
}

fn parse_array(
    s: &Sexp,
    raw: &BTreeMap<String, (&Sexp, &Sexp, &Sexp)>,
) -> Option<ModelValue> {
    match s {
        Sexp::List(l) if !l.is_empty() => {
            match &l[0] {
                // (store <array> i v)
                Sexp::Atom(a) if a == "store" && l.len() == 4 => {
                    let inner = parse_array(&l[1], raw)?;
                    let (default, mut stores) = match inner {
                        ModelValue::Array { default, stores } => (default, stores),
                        _ => return None,
                    };
                    let i = parse_int(&l[2])?;
                    let v = parse_int(&l[3])?;
                    stores.retain(|(j, _)| *j != i);
                    stores.push((i, v));
                    Some(ModelValue::Array { default, stores })
                }
                // ((as const (Array Int Int)) v)
                Sexp::List(head) => {
                    if let Some(Sexp::Atom(kw)) = head.first() {
                        if kw == "as" && l.len() == 2 {
                            return Some(ModelValue::Array {
                                default: parse_int(&l[1])?,
                                stores: vec![],
                            });
                        }
                    }
                    None
                }
                // (_ as-array k!0)
                Sexp::Atom(a) if a == "_" && l.len() == 3 => {
                    if let Sexp::Atom(name) = &l[2] {
                        let (params, _, body) = raw.get(name)?;
                        let param = match params {
                            Sexp::List(ps) => match ps.first() {
                                Some(Sexp::List(p)) => match p.first() {
                                    Some(Sexp::Atom(x)) => x.clone(),
                                    _ => return None,
                                },
                                _ => return None,
                            },
                            _ => return None,
                        };
                        parse_ite_chain(body, &param)
                    } else {
                        None
                    }
                }
                // (lambda ((x!0 Int)) body)
                Sexp::Atom(a) if a == "lambda" && l.len() == 3 => {
                    let param = match &l[1] {
                        Sexp::List(ps) => match ps.first() {
                            Some(Sexp::List(p)) => match p.first() {
                                Some(Sexp::Atom(x)) => x.clone(),
                                _ => return None,
                            },
                            _ => return None,
                        },
                        _ => return None,
                    };
                    parse_ite_chain(&l[2], &param)
                }
                _ => None,
            }
        }
        _ => None,
    }
}

/// `(ite (= x i) v rest)` chains ending in a constant default.
fn parse_ite_chain(s: &Sexp, param: &str) -> Option<ModelValue> {
    match s {
        Sexp::List(l) if l.len() == 4 => {
            if let Sexp::Atom(kw) = &l[0] {
                if kw == "ite" {
                    let (i, v) = match &l[1] {
                        Sexp::List(eq) if eq.len() == 3 => {
                            let idx = match (&eq[1], &eq[2]) {
                                (Sexp::Atom(x), other) if x == param => parse_int(other)?,
                                (other, Sexp::Atom(x)) if x == param => parse_int(other)?,
                                _ => return None,
                            };
                            (idx, parse_int(&l[2])?)
                        }
                        _ => return None,
                    };
                    let rest = parse_ite_chain(&l[3], param)?;
                    if let ModelValue::Array {
                        default,
                        mut stores,
                    } = rest
                    {
                        if !stores.iter().any(|(j, _)| *j == i) {
                            stores.push((i, v));
                        }
                        return Some(ModelValue::Array { default, stores });
                    }
                    None
                } else {
                    None
                }
            } else {
                None
            }
        }
        _ => parse_int(s).map(|n| ModelValue::Array {
            default: n,
            stores: vec![],
        }),
    }
}

/// Build an input valuation from a countermodel: each initial-generation
/// symbol gets its model value (0 when the model omits it); arrays are
/// materialized at the indices the model mentions.
pub fn concretize(model: &Model, inputs: &[SymVar]) -> Valuation {
    let mut sigma = Valuation::new();
    for sym in inputs {
        match sym.sort {
            Sort::Int => {
                let v = match model.entries.get(&sym.smt_name()) {
                    Some(ModelValue::Int(n)) => n.clone(),
                    _ => BigInt::zero(),
                };
                sigma.set_scalar(&sym.base, Value::Int(v));
            }
            Sort::Array => {
                if let Some(ModelValue::Array { default, stores }) =
                    model.entries.get(&sym.smt_name())
                {
                    for (i, v) in stores {
                        sigma.set(&sym.base, i.clone(), Value::Int(v.clone()));
                    }
                    // Give the default a concrete home on a small window so
                    // replays that read nearby cells see the model's value
                    // rather than ⊥.
                    for i in 0..4 {
                        let idx = BigInt::from(i);
                        if !stores.iter().any(|(j, _)| *j == idx) {
                            sigma.set(&sym.base, idx, Value::Int(default.clone()));
                        }
                    }
                }
            }
        }
    }
    sigma
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(base: &str, tag: u8, gen: u32) -> Term {
        Term::Sym(SymVar {
            base: base.into(),
            tag,
            gen,
            sort: Sort::Int,
        })
    }

    #[test]
    fn emission_is_deterministic_and_well_formed() {
        let f = Formula::and(vec![
            Formula::eq(sym("x", 1, 0), sym("x", 2, 0)),
            Formula::Cmp(CmpOp::Lt, sym("x", 1, 0), Term::int(-3)),
        ]);
        let q1 = emit_query(&f);
        let q2 = emit_query(&f);
        assert_eq!(q1, q2);
        assert!(q1.contains("(declare-const x_1_0 Int)"));
        assert!(q1.contains("(declare-const x_2_0 Int)"));
        assert!(q1.contains("(- 3)"));
    }

    #[test]
    fn model_text_roundtrip() {
        let text = "(\n  (define-fun x_1_0 () Int 3)\n  (define-fun y_1_0 () Int (- 2))\n  (define-fun a_1_0 () (Array Int Int) (store ((as const (Array Int Int)) 0) 1 7))\n)";
        let m = parse_model(text).unwrap();
        assert_eq!(m.entries["x_1_0"], ModelValue::Int(BigInt::from(3)));
        assert_eq!(m.entries["y_1_0"], ModelValue::Int(BigInt::from(-2)));
        assert_eq!(
            m.entries["a_1_0"],
            ModelValue::Array {
                default: BigInt::zero(),
                stores: vec![(BigInt::from(1), BigInt::from(7))]
            }
        );
    }

    #[test]
    fn as_array_models_resolve() {
        let text = "((define-fun a_1_0 () (Array Int Int) (_ as-array k!0))\n(define-fun k!0 ((x!0 Int)) Int (ite (= x!0 2) 5 1)))";
        let m = parse_model(text).unwrap();
        assert_eq!(
            m.entries["a_1_0"],
            ModelValue::Array {
                default: BigInt::from(1),
                stores: vec![(BigInt::from(2), BigInt::from(5))]
            }
        );
    }

    #[test]
    fn concretize_defaults_missing_symbols_to_zero() {
        let inputs = [
            SymVar {
                base: "x".into(),
                tag: 1,
                gen: 0,
                sort: Sort::Int,
            },
            SymVar {
                base: "y".into(),
                tag: 1,
                gen: 0,
                sort: Sort::Int,
            },
        ];
        let mut model = Model::default();
        model
            .entries
            .insert("x_1_0".into(), ModelValue::Int(BigInt::from(3)));
        let sigma = concretize(&model, &inputs);
        assert_eq!(sigma.get_scalar("x"), Value::Int(BigInt::from(3)));
        assert_eq!(sigma.get_scalar("y"), Value::Int(BigInt::zero()));
    }
}
