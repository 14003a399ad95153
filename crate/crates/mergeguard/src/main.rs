//! Command-line front end: verify a four-way merge, inspect diffs and
//! products, run the brute-force oracle, or sweep a benchmark corpus.
//!
//! Exit codes: 0 verified, 1 conflict, 2 unknown, 3 usage/parse error,
//! 4 solver error.

use clap::{Parser, Subcommand, ValueEnum};
use mergeguard::ast::{num_holes, Stmt};
use mergeguard::ndiff::ndiff;
use mergeguard::oracle::{self, BruteForceResult, EnumSpace, Scenario};
use mergeguard::parse::parse;
use mergeguard::pretty::{pretty_print, pretty_print_stmt};
use mergeguard::product::{construct_product, rename, ProductError};
use mergeguard::report::{self, Report, Timings};
use mergeguard::rpc::{verify, Diagnostics, Verdict, VerifyError, VerifyMode, VerifyOptions};
use mergeguard::smt::{resolve_solver, SolverSession};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

const EXIT_USAGE: i32 = 3;
const EXIT_SOLVER: i32 = 4;

#[derive(Parser)]
#[command(name = "mergeguard", version, about = "Semantic conflict checker for three-way program merges")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum ModeArg {
    #[default]
    Compositional,
    FullProduct,
    NoDependence,
}

impl From<ModeArg> for VerifyMode {
    fn from(m: ModeArg) -> VerifyMode {
        match m {
            ModeArg::Compositional => VerifyMode::Compositional,
            ModeArg::FullProduct => VerifyMode::FullProduct,
            ModeArg::NoDependence => VerifyMode::NoDependence,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum ReportFormat {
    #[default]
    Text,
    Json,
}

#[derive(Parser)]
struct SolverFlags {
    /// Solver command line; overrides MERGEGUARD_SOLVER and PATH lookup.
    #[arg(long)]
    solver: Option<String>,
    /// Per-query solver timeout in seconds.
    #[arg(long)]
    timeout: Option<u64>,
}

#[derive(Parser)]
struct VerifyFlags {
    /// Extra variables to check for conflict-freedom besides out.
    #[arg(long, value_delimiter = ',')]
    check_vars: Vec<String>,
    /// Check the global three-condition disjunction instead of the
    /// (stronger) per-index output condition.
    #[arg(long)]
    global_otherwise: bool,
    #[arg(long, value_enum, default_value_t)]
    mode: ModeArg,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check semantic conflict-freedom of base, two variants, and a merge.
    Verify {
        base: PathBuf,
        variant_a: PathBuf,
        variant_b: PathBuf,
        merge: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        flags: VerifyFlags,
        #[arg(long, value_enum, default_value_t)]
        report: ReportFormat,
    },
    /// Show the shared program with holes and per-version edits.
    Diff {
        /// Two or more program files.
        #[arg(num_args = 2..)]
        files: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        report: ReportFormat,
    },
    /// Print the product program of the (renamed) input programs.
    Product {
        #[arg(num_args = 1..)]
        files: Vec<PathBuf>,
    },
    /// Brute-force ground truth over a finite input space.
    Oracle {
        base: PathBuf,
        variant_a: PathBuf,
        variant_b: PathBuf,
        merge: PathBuf,
        /// Interpreter loop budget per run.
        #[arg(long)]
        fuel: Option<u64>,
        /// Sampling seed when the space is too large to enumerate.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Verify every scenario directory in a corpus and print a table.
    Bench {
        corpus: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        flags: VerifyFlags,
        #[arg(long, value_enum, default_value_t)]
        report: ReportFormat,
    },
}

fn main() {
    // Whole-program products nest statements deeply; give the analysis a
    // generous stack instead of relying on the platform default.
    let code = std::thread::Builder::new()
        .stack_size(256 * 1024 * 1024)
        .spawn(run)
        .expect("spawn worker")
        .join()
        .expect("worker panicked");
    std::process::exit(code);
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match cli.cmd {
        Cmd::Verify {
            base,
            variant_a,
            variant_b,
            merge,
            solver,
            flags,
            report,
        } => cmd_verify(&[base, variant_a, variant_b, merge], &solver, &flags, report),
        Cmd::Diff { files, report } => cmd_diff(&files, report),
        Cmd::Product { files } => cmd_product(&files),
        Cmd::Oracle {
            base,
            variant_a,
            variant_b,
            merge,
            fuel,
            seed,
        } => cmd_oracle(&[base, variant_a, variant_b, merge], fuel, seed),
        Cmd::Bench {
            corpus,
            solver,
            flags,
            report,
        } => cmd_bench(&corpus, &solver, &flags, report),
    }
}

fn load(path: &Path) -> Result<Stmt, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn make_session(flags: &SolverFlags) -> Result<SolverSession, String> {
    let cmd = resolve_solver(flags.solver.as_deref()).map_err(|e| e.to_string())?;
    let mut session = SolverSession::new(cmd);
    if let Some(secs) = flags.timeout {
        session.timeout = Duration::from_secs(secs);
    }
    Ok(session)
}

fn verify_options(flags: &VerifyFlags) -> VerifyOptions {
    VerifyOptions {
        mode: flags.mode.into(),
        check_vars: flags.check_vars.iter().cloned().collect(),
        global_otherwise: flags.global_otherwise,
        ..VerifyOptions::default()
    }
}

/// Diff + verify with wall-clock bookkeeping.
fn pipeline(
    session: &mut SolverSession,
    programs: &[Stmt],
    opts: &VerifyOptions,
) -> Result<(Verdict, Diagnostics, Timings), VerifyError> {
    let t0 = Instant::now();
    let d = ndiff(programs);
    let diff_ms = t0.elapsed().as_millis();
    let t1 = Instant::now();
    let (verdict, diag) = verify(session, &d.shared, &d.edits, opts)?;
    let verify_ms = t1.elapsed().as_millis();
    let timings = Timings {
        diff_ms,
        rpc_ms: verify_ms.saturating_sub(diag.solver_time_ms),
        solver_ms: diag.solver_time_ms,
        total_ms: t0.elapsed().as_millis(),
    };
    Ok((verdict, diag, timings))
}

fn emit_report(r: &Report, format: ReportFormat) {
    match format {
        ReportFormat::Json => {
            println!("{}", serde_json::to_string_pretty(r).expect("serializable"))
        }
        ReportFormat::Text => print!("{}", report::render_text(r)),
    }
}

fn cmd_verify(
    paths: &[PathBuf],
    solver: &SolverFlags,
    flags: &VerifyFlags,
    format: ReportFormat,
) -> i32 {
    let mut programs = Vec::with_capacity(4);
    for p in paths {
        match load(p) {
            Ok(s) => programs.push(s),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        }
    }
    let mut session = match make_session(solver) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_SOLVER;
        }
    };
    let opts = verify_options(flags);
    match pipeline(&mut session, &programs, &opts) {
        Ok((verdict, diag, timings)) => {
            let r = report::build_report(&verdict, &diag, timings, &session.command_line());
            emit_report(&r, format);
            report::exit_code(&verdict)
        }
        Err(VerifyError::Solver(e)) => {
            eprintln!("error: {e}");
            EXIT_SOLVER
        }
        Err(VerifyError::Arity(e)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

#[derive(Serialize)]
struct DiffReport {
    holes: usize,
    shared: String,
    edits: Vec<Vec<String>>,
}

fn one_line(s: &Stmt) -> String {
    pretty_print_stmt(s).split_whitespace().collect::<Vec<_>>().join(" ")
}

fn cmd_diff(paths: &[PathBuf], format: ReportFormat) -> i32 {
    let mut programs = Vec::new();
    for p in paths {
        match load(p) {
            Ok(s) => programs.push(s),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        }
    }
    let d = ndiff(&programs);
    let r = DiffReport {
        holes: num_holes(&d.shared),
        shared: pretty_print(&d.shared),
        edits: d
            .edits
            .iter()
            .map(|e| e.iter().map(one_line).collect())
            .collect(),
    };
    match format {
        ReportFormat::Json => {
            println!("{}", serde_json::to_string_pretty(&r).expect("serializable"))
        }
        ReportFormat::Text => {
            println!("holes: {}", r.holes);
            println!("shared program:\n{}", r.shared);
            for (path, edit) in paths.iter().zip(&r.edits) {
                println!("edit for {}: [{}]", path.display(), edit.join(", "));
            }
        }
    }
    0
}

fn cmd_product(paths: &[PathBuf]) -> i32 {
    let mut renamed = Vec::new();
    for (i, p) in paths.iter().enumerate() {
        match load(p) {
            Ok(s) => renamed.push(rename(&s, (i + 1) as u8)),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        }
    }
    match construct_product(&renamed) {
        Ok(prod) => {
            println!("{}", pretty_print_stmt(&prod));
            0
        }
        Err(e @ ProductError::TooLarge(_)) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn cmd_oracle(paths: &[PathBuf], fuel: Option<u64>, seed: u64) -> i32 {
    let mut programs = Vec::with_capacity(4);
    for p in paths {
        match load(p) {
            Ok(s) => programs.push(s),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        }
    }
    let scenario = Scenario {
        base: programs[0].clone(),
        var_a: programs[1].clone(),
        var_b: programs[2].clone(),
        merge: programs[3].clone(),
    };
    let mut space = EnumSpace::for_programs(&scenario.programs());
    if let Some(f) = fuel {
        space.fuel = f;
    }
    println!("input space: {} valuations", space.size());
    match oracle::brute_force_cf_seeded(&scenario, &space, seed) {
        BruteForceResult::NoViolationFound => {
            println!("no violation found (full enumeration)");
            0
        }
        BruteForceResult::SampledNoViolation => {
            println!("no violation found (sampled)");
            0
        }
        BruteForceResult::Inconclusive { fuel_exhausted } => {
            println!("no violation found; {fuel_exhausted} runs exhausted fuel");
            0
        }
        BruteForceResult::Violation { sigma, violation } => {
            println!("violation at out[{}]:", violation.index);
            let names = ["base", "variant A", "variant B", "merge"];
            for (name, v) in names.iter().zip(&violation.values) {
                println!("  {name}: {v:?}");
            }
            println!("input:");
            for e in report::witness_entries(&sigma) {
                println!("  {}[{}] = {}", e.var, e.index, e.value);
            }
            1
        }
    }
}

#[derive(Serialize)]
struct BenchRow {
    name: String,
    #[serde(flatten)]
    report: Report,
    #[serde(skip_serializing_if = "Option::is_none")]
    expect: Option<String>,
    matches_expectation: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn cmd_bench(
    corpus: &Path,
    solver: &SolverFlags,
    flags: &VerifyFlags,
    format: ReportFormat,
) -> i32 {
    let mut dirs: Vec<PathBuf> = match std::fs::read_dir(corpus) {
        Ok(rd) => rd
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_dir())
            .collect(),
        Err(e) => {
            eprintln!("error: {}: {e}", corpus.display());
            return EXIT_USAGE;
        }
    };
    dirs.sort();
    let mut session = match make_session(solver) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_SOLVER;
        }
    };
    let opts = verify_options(flags);
    let mut rows = Vec::new();
    let mut mismatches = 0;
    for dir in dirs {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let files = ["base.imp", "a.imp", "b.imp", "merge.imp"];
        let mut programs = Vec::with_capacity(4);
        let mut load_err = None;
        for f in files {
            match load(&dir.join(f)) {
                Ok(s) => programs.push(s),
                Err(e) => {
                    load_err = Some(e);
                    break;
                }
            }
        }
        let expect = std::fs::read_to_string(dir.join("expect"))
            .ok()
            .map(|s| s.trim().to_string());
        let row = if let Some(e) = load_err {
            BenchRow {
                name,
                report: report::build_report(
                    &Verdict::Unknown("scenario failed to load".to_string()),
                    &Diagnostics::default(),
                    Timings::default(),
                    &session.command_line(),
                ),
                expect,
                matches_expectation: false,
                error: Some(e),
            }
        } else {
            match pipeline(&mut session, &programs, &opts) {
                Ok((verdict, diag, timings)) => {
                    let report =
                        report::build_report(&verdict, &diag, timings, &session.command_line());
                    let matches_expectation = expect
                        .as_deref()
                        .map(|e| e == report.verdict)
                        .unwrap_or(true);
                    BenchRow {
                        name,
                        report,
                        expect,
                        matches_expectation,
                        error: None,
                    }
                }
                Err(e) => BenchRow {
                    name,
                    report: report::build_report(
                        &Verdict::Unknown("verification failed".to_string()),
                        &Diagnostics::default(),
                        Timings::default(),
                        &session.command_line(),
                    ),
                    expect,
                    matches_expectation: false,
                    error: Some(e.to_string()),
                },
            }
        };
        if !row.matches_expectation {
            mismatches += 1;
        }
        rows.push(row);
    }
    match format {
        ReportFormat::Json => {
            println!("{}", serde_json::to_string_pretty(&rows).expect("serializable"))
        }
        ReportFormat::Text => {
            println!(
                "{:<28} {:>10} {:>6} {:>8} {:>9}  {}",
                "scenario", "verdict", "holes", "queries", "total_ms", "status"
            );
            for row in &rows {
                let status = match (&row.error, row.matches_expectation) {
                    (Some(e), _) => format!("error: {e}"),
                    (None, false) => format!(
                        "MISMATCH (expected {})",
                        row.expect.as_deref().unwrap_or("?")
                    ),
                    (None, true) => "ok".to_string(),
                };
                println!(
                    "{:<28} {:>10} {:>6} {:>8} {:>9}  {}",
                    row.name,
                    row.report.verdict,
                    row.report.hole_count,
                    row.report.solver_queries,
                    row.report.timings.total_ms,
                    status
                );
            }
        }
    }
    if mismatches > 0 {
        1
    } else {
        0
    }
}
