//! N-way AST differencing: factor a list of program versions into one shared
//! program with holes plus an ordered edit per version.
//!
//! The two-way core aligns top-level statement lists by longest common
//! subsequence. Two statements match if they are equal modulo skip
//! normalization, or are both `if` (resp. `while`) with equal predicates, in
//! which case the diff recurses into the branches (bodies). Unmatched runs
//! are padded with skips so both sides have the same length, and each padded
//! pair becomes a hole. Compound statements with *different* predicates
//! never recurse: the whole statement becomes one hole.
//!
//! Everything here is deterministic; identical inputs yield identical
//! results. Minimality is not promised, only soundness: applying version
//! `i`'s edit to the shared program reconstructs version `i`.

use crate::ast::*;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffResult {
    pub shared: HStmt,
    /// One edit per input program, in input order.
    pub edits: Vec<Edit>,
}

/// Two-way diff of a hole-free statement against a statement with holes.
///
/// Returns `(shared, edit, hedit)` with `shared[edit] = s` and
/// `shared[hedit] = h` (holes in `hedit` entries are preserved), and
/// `|edit| = |hedit| = numHoles(shared)`.
pub fn diff2(s: &Stmt, h: &HStmt) -> (HStmt, Edit, HEdit) {
    let out = diff2_inner(s, h);
    debug_assert!(diff2_post_ok(s, h, &out));
    out
}

fn diff2_post_ok(s: &Stmt, h: &HStmt, (shared, edit, hedit): &(HStmt, Edit, HEdit)) -> bool {
    edit.len() == num_holes(shared)
        && hedit.len() == num_holes(shared)
        && hedit.iter().map(num_holes).sum::<usize>() == num_holes(h)
        && apply_edit(shared, edit).map(|r| stmt_equal(&r, s)) == Ok(true)
        && apply_hedit(shared, hedit).map(|r| hstmt_equal(&r, h)) == Ok(true)
}

fn diff2_inner(s: &Stmt, h: &HStmt) -> (HStmt, Edit, HEdit) {
    if matches!(h, HStmt::Hole) {
        return (HStmt::Hole, vec![s.clone()], vec![HStmt::Hole]);
    }
    if stmt_equal_sh(s, h) {
        return (h.clone(), vec![], vec![]);
    }
    let ss = flatten(s);
    let hs = flatten_h(h);
    if ss.len() == 1 && hs.len() == 1 {
        diff2_leaf(&ss[0], &hs[0])
    } else {
        align(&ss, &hs)
    }
}

/// Diff a pair of non-sequence statements that are neither equal nor a hole.
fn diff2_leaf(s: &Stmt, h: &HStmt) -> (HStmt, Edit, HEdit) {
    match (s, h) {
        (Stmt::If(cs, ts, es), HStmt::If(ch, th, eh)) if cs == ch => {
            let (tsh, mut te, mut the) = diff2_inner(ts, th);
            let (esh, ee, ehe) = diff2_inner(es, eh);
            te.extend(ee);
            the.extend(ehe);
            (HStmt::If(cs.clone(), Box::new(tsh), Box::new(esh)), te, the)
        }
        (Stmt::While(cs, bs), HStmt::While(ch, bh)) if cs == ch => {
            let (bsh, be, bhe) = diff2_inner(bs, bh);
            (HStmt::While(cs.clone(), Box::new(bsh)), be, bhe)
        }
        _ => (HStmt::Hole, vec![s.clone()], vec![h.clone()]),
    }
}

fn matchable(s: &Stmt, h: &HStmt) -> bool {
    match (s, h) {
        (Stmt::If(cs, ..), HStmt::If(ch, ..)) => cs == ch,
        (Stmt::While(cs, _), HStmt::While(ch, _)) => cs == ch,
        _ => stmt_equal_sh(s, h),
    }
}

/// LCS-align two top-level statement lists, padding unmatched runs with
/// skips, and diff each aligned pair.
fn align(ss: &[Stmt], hs: &[HStmt]) -> (HStmt, Edit, HEdit) {
    let n = ss.len();
    let m = hs.len();
    // lcs[i][j] = length of the LCS of ss[i..] and hs[j..].
    let mut lcs = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i][j] = if matchable(&ss[i], &hs[j]) {
                lcs[i + 1][j + 1] + 1
            } else {
                lcs[i + 1][j].max(lcs[i][j + 1])
            };
        }
    }
    let mut shared_parts = Vec::new();
    let mut edit = Vec::new();
    let mut hedit = Vec::new();
    let (mut i, mut j) = (0, 0);
    let mut run_s: Vec<Stmt> = Vec::new();
    let mut run_h: Vec<HStmt> = Vec::new();
    let flush =
        |run_s: &mut Vec<Stmt>, run_h: &mut Vec<HStmt>, shared_parts: &mut Vec<HStmt>, edit: &mut Edit, hedit: &mut HEdit| {
            let k = run_s.len().max(run_h.len());
            run_s.resize(k, Stmt::skip());
            run_h.resize(k, HStmt::skip());
            for (s, h) in run_s.drain(..).zip(run_h.drain(..)) {
                let (sh, e, he) = diff2_inner(&s, &h);
                shared_parts.push(sh);
                edit.extend(e);
                hedit.extend(he);
            }
        };
    while i < n || j < m {
        if i < n && j < m && matchable(&ss[i], &hs[j]) && lcs[i][j] == lcs[i + 1][j + 1] + 1 {
            flush(&mut run_s, &mut run_h, &mut shared_parts, &mut edit, &mut hedit);
            let (sh, e, he) = diff2_inner(&ss[i], &hs[j]);
            shared_parts.push(sh);
            edit.extend(e);
            hedit.extend(he);
            i += 1;
            j += 1;
        } else if i < n && (j >= m || lcs[i + 1][j] >= lcs[i][j + 1]) {
            run_s.push(ss[i].clone());
            i += 1;
        } else {
            run_h.push(hs[j].clone());
            j += 1;
        }
    }
    flush(&mut run_s, &mut run_h, &mut shared_parts, &mut edit, &mut hedit);
    (seq_of_h(shared_parts), edit, hedit)
}

/// Push an edit through an edit-with-holes: each `hedit` entry consumes as
/// many elements of `edit` as it has holes and becomes a hole-free statement.
pub fn compose(hedit: &[HStmt], edit: &[Stmt]) -> Result<Edit, EditArityMismatch> {
    let holes: usize = hedit.iter().map(num_holes).sum();
    if holes != edit.len() {
        return Err(EditArityMismatch {
            holes,
            edit_len: edit.len(),
        });
    }
    let mut rest = edit;
    let mut out = Vec::with_capacity(hedit.len());
    for entry in hedit {
        let k = num_holes(entry);
        let (take, tail) = rest.split_at(k);
        rest = tail;
        out.push(apply_edit(entry, take).expect("arity checked"));
    }
    Ok(out)
}

/// N-way diff; `programs` must have at least two entries.
pub fn ndiff(programs: &[Stmt]) -> DiffResult {
    assert!(programs.len() >= 2, "ndiff needs at least two programs");
    let mut shared: HStmt = programs[0].clone().into();
    let mut edits: Vec<Edit> = vec![vec![]];
    for p in &programs[1..] {
        let (new_shared, edit, hedit) = diff2(p, &shared);
        for e in &mut edits {
            *e = compose(&hedit, e).expect("edit arity is maintained inductively");
        }
        edits.push(edit);
        shared = new_shared;
    }
    DiffResult { shared, edits }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse, parse_with_holes};
    use crate::pretty::pretty_print;

    fn p(src: &str) -> Stmt {
        parse(src).unwrap()
    }

    #[test]
    fn diff2_identical_programs() {
        let s = p("x := 1; while (i < n) { i := i + 1; }");
        let (shared, edit, hedit) = diff2(&s, &s.clone().into());
        assert_eq!(num_holes(&shared), 0);
        assert!(edit.is_empty() && hedit.is_empty());
    }

    #[test]
    fn diff2_against_hole() {
        let s = p("x := 1;");
        let (shared, edit, hedit) = diff2(&s, &HStmt::Hole);
        assert_eq!(shared, HStmt::Hole);
        assert_eq!(edit, vec![s]);
        assert_eq!(hedit, vec![HStmt::Hole]);
    }

    #[test]
    fn diff2_recurses_into_matching_branches() {
        let o = p("if (c > 0) { x := 1; } else { y := 2; } z := 3;");
        let a = p("if (c > 0) { x := 2; } else { y := 2; }");
        let (shared, edit, hedit) = diff2(&a, &o.clone().into());
        let want =
            parse_with_holes("if (c > 0) { <?HOLE?> } else { y := 2; } <?HOLE?>").unwrap();
        assert!(hstmt_equal(&shared, &want), "got {}", pretty_print(&shared));
        assert_eq!(edit, vec![p("x := 2;"), Stmt::skip()]);
        assert_eq!(
            hedit
                .iter()
                .map(|h| pretty_print(h))
                .collect::<Vec<_>>(),
            vec!["x := 1;", "z := 3;"]
        );
    }

    #[test]
    fn different_predicates_become_one_hole() {
        let o = p("if (c > 0) { x := 1; } else { y := 2; }");
        let a = p("if (c < 0) { x := 1; } else { y := 2; }");
        let (shared, edit, _) = diff2(&a, &o.clone().into());
        assert_eq!(shared, HStmt::Hole);
        assert_eq!(edit, vec![a]);
    }

    #[test]
    fn compose_fills_nested_holes() {
        let hedit = vec![
            HStmt::Hole,
            p("y := 2;").into(),
            HStmt::Hole,
        ];
        let edit = vec![p("x := 2;"), Stmt::skip()];
        assert_eq!(
            compose(&hedit, &edit).unwrap(),
            vec![p("x := 2;"), p("y := 2;"), Stmt::skip()]
        );
        assert_eq!(compose(&[], &[]).unwrap(), vec![]);
        let full: Vec<HStmt> = vec![p("x := 1;").into(), p("z := 3;").into()];
        assert_eq!(
            compose(&full, &[]).unwrap(),
            vec![p("x := 1;"), p("z := 3;")]
        );
    }

    #[test]
    fn four_way_three_hole_example() {
        let o = p("if (c > 0) { x := 1; } else { y := 2; } z := 3;");
        let a = p("if (c > 0) { x := 2; } else { y := 2; }");
        let b = p("if (c > 0) { x := 1; } else { y := 3; } z := 3;");
        let m = p("if (c > 0) { x := 2; } else { y := 3; }");
        let d = ndiff(&[o.clone(), a.clone(), b.clone(), m.clone()]);
        let want =
            parse_with_holes("if (c > 0) { <?HOLE?> } else { <?HOLE?> } <?HOLE?>").unwrap();
        assert!(hstmt_equal(&d.shared, &want), "got {}", pretty_print(&d.shared));
        assert_eq!(d.edits[0], vec![p("x := 1;"), p("y := 2;"), p("z := 3;")]);
        assert_eq!(d.edits[1], vec![p("x := 2;"), p("y := 2;"), Stmt::skip()]);
        assert_eq!(d.edits[2], vec![p("x := 1;"), p("y := 3;"), p("z := 3;")]);
        assert_eq!(d.edits[3], vec![p("x := 2;"), p("y := 3;"), Stmt::skip()]);
        for (prog, edit) in [o, a, b, m].iter().zip(&d.edits) {
            assert!(stmt_equal(&apply_edit(&d.shared, edit).unwrap(), prog));
        }
    }

    #[test]
    fn ndiff_of_identical_programs_has_no_holes() {
        let s = p("x := 1; y := 2;");
        let d = ndiff(&[s.clone(), s.clone(), s.clone(), s]);
        assert_eq!(num_holes(&d.shared), 0);
        assert!(d.edits.iter().all(|e| e.is_empty()));
    }
}
