//! Verification reports: one stable machine-readable document (JSON) and a
//! human text rendering of the same data.

use crate::interp::{Valuation, Value};
use crate::rpc::{Diagnostics, Verdict};
use serde::Serialize;

#[derive(Debug, Clone, Serialize, Default)]
pub struct Timings {
    pub diff_ms: u128,
    pub rpc_ms: u128,
    pub solver_ms: u128,
    pub total_ms: u128,
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessEntry {
    pub var: String,
    pub index: String,
    pub value: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantReport {
    pub guard: String,
    pub equalities: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub verdict: String,
    /// Present for conflicts: whether the witness replays to a real
    /// violation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confirmed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<WitnessEntry>>,
    pub hole_count: usize,
    pub rules: std::collections::BTreeMap<String, u32>,
    pub invariants: Vec<InvariantReport>,
    pub solver_queries: u64,
    pub timings: Timings,
    pub tool_version: String,
    pub solver: String,
}

pub fn witness_entries(sigma: &Valuation) -> Vec<WitnessEntry> {
    sigma
        .iter()
        .map(|((var, idx), value)| WitnessEntry {
            var: var.clone(),
            index: idx.to_string(),
            value: match value {
                Value::Int(n) => n.to_string(),
                Value::Bottom => "undefined".to_string(),
            },
        })
        .collect()
}

pub fn build_report(
    verdict: &Verdict,
    diag: &Diagnostics,
    timings: Timings,
    solver: &str,
) -> Report {
    let (name, confirmed, reason, witness) = match verdict {
        Verdict::Verified => ("verified", None, None, None),
        Verdict::Conflict { witness, confirmed } => (
            "conflict",
            Some(*confirmed),
            None,
            witness.as_ref().map(witness_entries),
        ),
        Verdict::Unknown(reason) => ("unknown", None, Some(reason.clone()), None),
    };
    Report {
        verdict: name.to_string(),
        confirmed,
        reason,
        witness,
        hole_count: diag.hole_count,
        rules: diag.rules.clone(),
        invariants: diag
            .invariants
            .iter()
            .map(|inv| InvariantReport {
                guard: inv.guard.clone(),
                equalities: inv.equalities.clone(),
            })
            .collect(),
        solver_queries: diag.solver_queries,
        timings,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        solver: solver.to_string(),
    }
}

pub fn exit_code(verdict: &Verdict) -> i32 {
    match verdict {
        Verdict::Verified => 0,
        Verdict::Conflict { .. } => 1,
        Verdict::Unknown(_) => 2,
    }
}

pub fn render_text(r: &Report) -> String {
    let mut out = String::new();
    out.push_str(&format!("verdict: {}", r.verdict));
    if let Some(c) = r.confirmed {
        out.push_str(if c { " (confirmed)" } else { " (unconfirmed)" });
    }
    if let Some(reason) = &r.reason {
        out.push_str(&format!(" ({reason})"));
    }
    out.push('\n');
    out.push_str(&format!("holes: {}\n", r.hole_count));
    if !r.rules.is_empty() {
        let rules: Vec<String> = r.rules.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.push_str(&format!("rules: {}\n", rules.join(" ")));
    }
    for inv in &r.invariants {
        if inv.equalities.is_empty() {
            out.push_str(&format!("invariant for {}: true\n", inv.guard));
        } else {
            out.push_str(&format!(
                "invariant for {}: {}\n",
                inv.guard,
                inv.equalities.join(" && ")
            ));
        }
    }
    if let Some(w) = &r.witness {
        out.push_str("witness:\n");
        for e in w {
            out.push_str(&format!("  {}[{}] = {}\n", e.var, e.index, e.value));
        }
        if w.is_empty() {
            out.push_str("  (all inputs zero/undefined)\n");
        }
    }
    out.push_str(&format!(
        "queries: {}  time: diff {} ms, analysis {} ms, solver {} ms, total {} ms\n",
        r.solver_queries,
        r.timings.diff_ms,
        r.timings.rpc_ms,
        r.timings.solver_ms,
        r.timings.total_ms
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rpc::Diagnostics;

    #[test]
    fn json_is_stable() {
        let verdict = Verdict::Verified;
        let diag = Diagnostics::default();
        let r1 = build_report(&verdict, &diag, Timings::default(), "z3 -in");
        let r2 = build_report(&verdict, &diag, Timings::default(), "z3 -in");
        assert_eq!(
            serde_json::to_string(&r1).unwrap(),
            serde_json::to_string(&r2).unwrap()
        );
    }

    #[test]
    fn conflict_rendering_mentions_confirmation() {
        let verdict = Verdict::Conflict {
            witness: Some(crate::interp::Valuation::new()),
            confirmed: true,
        };
        let r = build_report(&verdict, &Diagnostics::default(), Timings::default(), "z3");
        let text = render_text(&r);
        assert!(text.contains("conflict (confirmed)"));
        assert_eq!(exit_code(&verdict), 1);
    }
}
