//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 solver failure or
//! iteration limit, 3 suspected infeasibility, 4 input not PSD-completable.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::admm::{self, AdmmOptions, IterationRecord, Status};
use crate::chordal::{clique_tree, is_chordal, maximal_cliques, perfect_elimination_order};
use crate::completion::{check_completable, min_rank_factor, numerical_rank};
use crate::error::Error;
use crate::io::{self, Csv, SolutionJson};
use crate::problem::{decompose, DecomposedProblem};
use crate::problems::{maxcut, ssc};
use crate::reweight::{self, ReweightOptions, ReweightResult, RoundRecord, StopReason};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NOT_COMPLETABLE: i32 = 4;

/// Default δ for subspace clustering (see `ssc --help`).
pub const SSC_DEFAULT_DELTA: f64 = 1.0;

#[derive(Debug, Parser)]
#[command(name = "chordal-rank", version, about = "Rank-minimized sparse SDPs via chordal decomposition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve an SDP from a problem JSON file.
    Solve(SolveArgs),
    /// Random max-cut instance: reweighted solve and hyperplane rounding.
    Maxcut(MaxcutArgs),
    /// Random subspace-clustering instance: lift, reweighted solve, recovery.
    Ssc(SscArgs),
    /// Minimum-rank PSD completion of a partially specified matrix.
    Complete(CompleteArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SolverFlags {
    /// Initial ADMM penalty.
    #[arg(long, default_value_t = 10.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_abs: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol_rel: f64,
    /// ADMM iteration cap per solve.
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// Target rank ratio λ_max/Σλ for every penalty block.
    #[arg(long, default_value_t = reweight::DEFAULT_RATIO_TARGET)]
    pub ratio: f64,
    /// Maximum number of reweighting rounds.
    #[arg(long, default_value_t = reweight::DEFAULT_MAX_OUTER)]
    pub rounds: usize,
}

impl SolverFlags {
    fn options(&self, delta: f64) -> Result<ReweightOptions, String> {
        let positive = [("--rho", self.rho), ("--delta", delta)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive"));
            }
        }
        if !(self.tol_abs >= 0.0 && self.tol_rel >= 0.0) {
            return Err("tolerances must be nonnegative".into());
        }
        if self.max_iter == 0 || self.rounds == 0 {
            return Err("--max-iter and --rounds must be at least 1".into());
        }
        Ok(ReweightOptions {
            delta,
            ratio_target: self.ratio,
            max_outer: self.rounds,
            admm: AdmmOptions {
                rho: self.rho,
                eps_abs: self.tol_abs,
                eps_rel: self.tol_rel,
                max_iter: self.max_iter,
                ..AdmmOptions::default()
            },
            ..ReweightOptions::default()
        })
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub problem: PathBuf,
    /// Solution JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-iteration CSV.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Per-round CSV.
    #[arg(long)]
    pub rounds_log: Option<PathBuf>,
    /// Single convex solve without the rank penalty.
    #[arg(long)]
    pub no_reweight: bool,
    /// Reweighting regularizer δ.
    #[arg(long, default_value_t = reweight::DEFAULT_DELTA)]
    pub delta: f64,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Args)]
pub struct MaxcutArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.08)]
    pub density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random hyperplanes tried when rounding.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value = "maxcut")]
    pub out_prefix: String,
    #[arg(long, default_value_t = reweight::DEFAULT_DELTA)]
    pub delta: f64,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Args)]
pub struct SscArgs {
    #[arg(long)]
    pub ns: usize,
    #[arg(long)]
    pub np: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "ssc")]
    pub out_prefix: String,
    /// Reweighting regularizer δ. Subspace clustering defaults to 1: smaller
    /// values often stall at non-rank-one fixed points.
    #[arg(long, default_value_t = SSC_DEFAULT_DELTA)]
    pub delta: f64,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Relative eigenvalue threshold for ranks.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

/// Failure of a command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn solver(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_SOLVER,
            message: message.into(),
        }
    }
}

fn write_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::solver(format!("cannot write {}: {e}", path.display()))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32, Failure> {
    match cmd {
        Command::Solve(a) => cmd_solve(&a),
        Command::Maxcut(a) => cmd_maxcut(&a),
        Command::Ssc(a) => cmd_ssc(&a),
        Command::Complete(a) => cmd_complete(&a),
    }
}

fn status_code(status: Status) -> i32 {
    match status {
        Status::Converged => EXIT_OK,
        Status::MaxIter => EXIT_SOLVER,
        Status::InfeasibleSuspected => EXIT_INFEASIBLE,
    }
}

fn solver_error(e: Error) -> Failure {
    Failure::solver(e.to_string())
}

/// Runs the reweighted loop (or one solve) and collects both CSV logs.
fn drive(
    d: &DecomposedProblem,
    opts: &ReweightOptions,
    reweight: bool,
    initial: Option<&crate::symsparse::PatternVec>,
) -> Result<(ReweightResult, Csv), Failure> {
    let mut iters = Csv::new(&io::ITERATION_HEADER);
    let mut log = |_: usize, r: &IterationRecord| iters.row(&io::iteration_cells(r));
    let opts = if reweight {
        opts.clone()
    } else {
        ReweightOptions {
            max_outer: 1,
            ..opts.clone()
        }
    };
    let result = if reweight {
        reweight::run_logged(d, &opts, initial, &mut log).map_err(solver_error)?
    } else {
        single_solve(d, &opts, initial, &mut log)?
    };
    Ok((result, iters))
}

/// One convex solve of `min ⟨C, X⟩`, reported as a single round.
fn single_solve(
    d: &DecomposedProblem,
    opts: &ReweightOptions,
    initial: Option<&crate::symsparse::PatternVec>,
    log: &mut dyn FnMut(usize, &IterationRecord),
) -> Result<ReweightResult, Failure> {
    let mut solver = admm::AdmmSolver::new(d, opts.admm.clone());
    if let Some(x0) = initial {
        solver.set_initial(x0).map_err(solver_error)?;
    }
    let sol = solver.solve(&d.cost, &mut |r| log(1, r)).map_err(solver_error)?;
    let blocks = d.penalty_blocks();
    let ratios: Vec<f64> = reweight::penalty_block_values(d, &sol)
        .map_err(solver_error)?
        .iter()
        .map(reweight::rank_ratio)
        .collect();
    let record = RoundRecord {
        round: 1,
        objective: sol.base_objective,
        max_clique_rank: sol.max_clique_rank(),
        min_rank_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        solver_iters: sol.iterations,
        rank_ratios: ratios,
    };
    let weights = reweight::init_weights(&blocks, opts.delta).map_err(solver_error)?;
    Ok(ReweightResult {
        penalties: Vec::new(),
        history: vec![record],
        weights,
        stop: StopReason::MaxRounds,
        factorizations: solver.factorizations(),
        solution: sol,
    })
}

fn rounds_csv(history: &[RoundRecord]) -> Csv {
    let mut c = Csv::new(&io::ROUND_HEADER);
    for r in history {
        c.row(&io::round_cells(r));
    }
    c
}

pub fn cmd_solve(a: &SolveArgs) -> Result<i32, Failure> {
    let opts = a.solver.options(a.delta).map_err(Failure::input)?;
    let p = io::load_problem(&a.problem).map_err(|e| Failure::input(e.to_string()))?;
    let d = decompose(&p).map_err(|e| Failure::input(e.to_string()))?;
    let (result, iters) = drive(&d, &opts, !a.no_reweight, None)?;
    if let Some(path) = &a.log {
        iters.write(path).map_err(|e| write_failure(path, e))?;
    }
    if let Some(path) = &a.rounds_log {
        rounds_csv(&result.history).write(path).map_err(|e| write_failure(path, e))?;
    }
    let sol = &result.solution;
    if let Some(path) = &a.out {
        let json = SolutionJson::new(sol, p.target_rank, result.rounds(), result.stop.as_str());
        io::write_json(path, &json).map_err(|e| write_failure(path, e))?;
    }
    println!(
        "status {} objective {:.9e} rounds {} max_clique_rank {} (target {})",
        sol.status.as_str(),
        sol.base_objective,
        result.rounds(),
        sol.max_clique_rank(),
        p.target_rank
    );
    Ok(status_code(sol.status))
}

#[derive(Debug, Serialize)]
struct MaxcutSummary {
    n: usize,
    density: f64,
    seed: u64,
    edges: usize,
    cliques: usize,
    max_clique_size: usize,
    initial_max_rank: usize,
    final_max_rank: usize,
    rounds: usize,
    stop: String,
    status: String,
    sdp_bound: f64,
    cut_value: f64,
    /// 1-based vertices on one side of the cut.
    cut: Vec<usize>,
}

fn prefixed(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}_{suffix}"))
}

fn write_csv(c: &Csv, path: &Path) -> Result<(), Failure> {
    c.write(path).map_err(|e| write_failure(path, e))
}

pub fn cmd_maxcut(a: &MaxcutArgs) -> Result<i32, Failure> {
    let opts = a.solver.options(a.delta).map_err(Failure::input)?;
    let (g, p) = maxcut::gen_maxcut(a.n, a.density, a.seed).map_err(|e| Failure::input(e.to_string()))?;
    let d = decompose(&p).map_err(solver_error)?;
    let (result, iters) = drive(&d, &opts, true, None)?;
    let sol = &result.solution;
    let cut = maxcut::round_solution(&g, sol, &d.tree, a.seed, a.trials).map_err(solver_error)?;

    let mut rounds = Csv::new(&["round", "max_clique_rank", "objective"]);
    for r in &result.history {
        rounds.row(&[r.round.to_string(), r.max_clique_rank.to_string(), io::fmt_f64(r.objective)]);
    }
    write_csv(&rounds, &prefixed(&a.out_prefix, "rounds.csv"))?;
    write_csv(&iters, &prefixed(&a.out_prefix, "iters.csv"))?;
    let graph_path = prefixed(&a.out_prefix, "graph.json");
    io::write_json(&graph_path, &io::GraphJson::from_graph(&g)).map_err(|e| write_failure(&graph_path, e))?;

    let summary = MaxcutSummary {
        n: a.n,
        density: a.density,
        seed: a.seed,
        edges: g.num_edges(),
        cliques: d.num_cliques(),
        max_clique_size: d.tree.max_clique_size(),
        initial_max_rank: result.history[0].max_clique_rank,
        final_max_rank: sol.max_clique_rank(),
        rounds: result.rounds(),
        stop: result.stop.as_str().into(),
        status: sol.status.as_str().into(),
        // Round one carries W = I, a constant penalty under diag(X) = 1.
        sdp_bound: -result.history[0].objective,
        cut_value: cut.value,
        cut: (0..g.n()).filter(|&i| cut.side[i]).map(|i| i + 1).collect(),
    };
    let path = prefixed(&a.out_prefix, "summary.json");
    io::write_json(&path, &summary).map_err(|e| write_failure(&path, e))?;
    println!(
        "cliques {} (max size {}), max clique rank {} -> {}, SDP bound {:.6}, cut {}",
        summary.cliques,
        summary.max_clique_size,
        summary.initial_max_rank,
        summary.final_max_rank,
        summary.sdp_bound,
        summary.cut_value
    );
    Ok(status_code(sol.status))
}

#[derive(Debug, Serialize)]
struct SscSummary {
    ns: usize,
    np: usize,
    d: usize,
    eps: f64,
    seed: u64,
    delta: f64,
    lift_size: usize,
    cliques: usize,
    rounds: usize,
    stop: String,
    status: String,
    min_rank_ratio: f64,
    accuracy: f64,
    /// Degrees between each estimated normal and its matched true normal;
    /// `null` for a degenerate block.
    normal_angles_deg: Vec<Option<f64>>,
    labels: Vec<usize>,
}

pub fn cmd_ssc(a: &SscArgs) -> Result<i32, Failure> {
    if a.ns < 1 || a.np < a.ns || a.d < 2 {
        return Err(Failure::input(format!(
            "invalid sizes: need --ns >= 1, --np >= --ns and --d >= 2 (got --ns {} --np {} --d {})\n\
             usage: chordal-rank ssc --ns <NS> --np <NP> --d <D> [--eps <EPS>] [--seed <SEED>]",
            a.ns, a.np, a.d
        )));
    }
    if a.ns > 8 {
        return Err(Failure::input("--ns is limited to 8 (labels are matched exhaustively)"));
    }
    let opts = a.solver.options(a.delta).map_err(Failure::input)?;
    let inst = ssc::gen_ssc(a.ns, a.np, a.d, a.eps, a.seed).map_err(|e| Failure::input(e.to_string()))?;
    let sdp = ssc::build_ssc_sdp(&inst).map_err(solver_error)?;
    let d = decompose(&sdp.problem).map_err(solver_error)?;
    let x0 = ssc::initial_guess(&sdp, &inst, a.seed);
    let (result, iters) = drive(&d, &opts, true, Some(&x0))?;
    let sol = &result.solution;

    let blocks = ssc::normal_blocks_from(&sol.x, &sdp.lift);
    let est = ssc::extract_ssc(&sol.x, &blocks, &sdp.lift);
    let accuracy = ssc::clustering_accuracy(&est.labels, &inst.labels);
    let angles = ssc::normal_angles(&est, &inst);

    let mut rounds = Csv::new(&["round", "min_rank_ratio", "objective"]);
    for r in &result.history {
        rounds.row(&[r.round.to_string(), io::fmt_f64(r.min_rank_ratio), io::fmt_f64(r.objective)]);
    }
    write_csv(&rounds, &prefixed(&a.out_prefix, "rounds.csv"))?;
    write_csv(&iters, &prefixed(&a.out_prefix, "iters.csv"))?;
    let inst_path = prefixed(&a.out_prefix, "instance.json");
    io::write_json(&inst_path, &inst).map_err(|e| write_failure(&inst_path, e))?;

    let summary = SscSummary {
        ns: a.ns,
        np: a.np,
        d: a.d,
        eps: a.eps,
        seed: a.seed,
        delta: a.delta,
        lift_size: sdp.lift.size(),
        cliques: d.num_cliques(),
        rounds: result.rounds(),
        stop: result.stop.as_str().into(),
        status: sol.status.as_str().into(),
        min_rank_ratio: result.history.last().map_or(f64::NAN, |r| r.min_rank_ratio),
        accuracy,
        normal_angles_deg: angles,
        labels: est.labels.clone(),
    };
    let path = prefixed(&a.out_prefix, "summary.json");
    io::write_json(&path, &summary).map_err(|e| write_failure(&path, e))?;
    println!(
        "rounds {} min rank ratio {:.4} accuracy {:.4}",
        summary.rounds, summary.min_rank_ratio, summary.accuracy
    );
    Ok(status_code(sol.status))
}

pub fn cmd_complete(a: &CompleteArgs) -> Result<i32, Failure> {
    let raw: io::CompletionInput = io::read_json(&a.input).map_err(|e| Failure::input(e.to_string()))?;
    let x = raw
        .to_pattern_vec()
        .map_err(|e| Failure::input(format!("{}: {e}", a.input.display())))?;
    let graph = x.pattern().graph();
    if !is_chordal(graph) {
        return Err(Failure::input(format!(
            "{}: the specified entries do not form a chordal pattern",
            a.input.display()
        )));
    }
    let order = perfect_elimination_order(graph).expect("chordal");
    let cliques = maximal_cliques(graph, &order).map_err(solver_error)?;
    let tree = clique_tree(&cliques).map_err(solver_error)?;
    let report = check_completable(&x, tree.cliques(), None).map_err(solver_error)?;
    if !report.completable {
        eprintln!("not PSD-completable:");
        for (k, c) in tree.cliques().iter().enumerate() {
            let verdict = if report.min_eigenvalues[k] < -report.tolerances[k] { "FAIL" } else { "ok" };
            let members: Vec<String> = c.vertices().iter().map(|v| (v + 1).to_string()).collect();
            eprintln!(
                "  clique {} {{{}}}: min eigenvalue {:.6e} {verdict}",
                k + 1,
                members.join(","),
                report.min_eigenvalues[k]
            );
        }
        return Ok(EXIT_NOT_COMPLETABLE);
    }
    let factor = min_rank_factor(&x, &tree, a.tol).map_err(solver_error)?;
    let full = factor.gram();
    let max_clique_rank = tree
        .cliques()
        .iter()
        .map(|c| {
            let s = crate::symsparse::selector(c, x.pattern()).expect("clique in pattern");
            numerical_rank(&crate::symsparse::extract_block(&x, &s), a.tol)
        })
        .max()
        .unwrap_or(0);
    let out = io::CompletionOutput {
        n: raw.n,
        rank: numerical_rank(&full, a.tol),
        max_clique_rank,
        matrix: (0..raw.n).map(|i| (0..raw.n).map(|j| full.get(i, j)).collect()).collect(),
    };
    io::write_json(&a.out, &out).map_err(|e| write_failure(&a.out, e))?;
    println!("rank {}", out.rank);
    Ok(EXIT_OK)
}
