//! Reweighted rank heuristic: each round solves `min ⟨C + W_C, X⟩` and
//! resets every block weight to a normalized `(X_k + δ_k I)⁻¹`.
//!
//! Block weights are scattered into `W_C` on the chordal-extended pattern,
//! so the penalty never adds fill and the KKT factor is shared by all rounds.

use crate::admm::{AdmmOptions, AdmmSolver, IterationRecord, Solution, Status};
use crate::chordal::Clique;
use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use crate::problem::DecomposedProblem;
use crate::symsparse::{selector, DenseSym, Pattern, PatternVec};

pub const DEFAULT_DELTA: f64 = 1e-3;
pub const DEFAULT_RATIO_TARGET: f64 = 0.99;
pub const DEFAULT_MAX_OUTER: usize = 20;

#[derive(Debug, Clone)]
pub struct WeightState {
    pub blocks: Vec<Clique>,
    pub weights: Vec<DenseSym>,
    pub delta: f64,
    pub tau: Vec<f64>,
    pub outer_iter: usize,
}

/// Identity weight on every block, `τ_k = 1`.
pub fn init_weights(blocks: &[Clique], delta: f64) -> Result<WeightState> {
    if blocks.is_empty() {
        return Err(Error::InvalidProblem("no penalty blocks".into()));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidProblem(format!("delta must be positive, got {delta}")));
    }
    Ok(WeightState {
        blocks: blocks.to_vec(),
        weights: blocks.iter().map(|b| DenseSym::identity(b.len())).collect(),
        delta,
        tau: vec![1.0; blocks.len()],
        outer_iter: 0,
    })
}

/// `W_k = τ_k W̃_k / σ_max(W̃_k)` with `W̃_k = (X_k + δ_k I)⁻¹` and
/// `δ_k = δ · max(1, σ_max(X_k))`. Negative eigenvalues of `X_k` are
/// clipped first.
pub fn update_weights(state: &mut WeightState, values: &[DenseSym]) -> Result<()> {
    if values.len() != state.blocks.len() {
        return Err(Error::DimensionMismatch {
            expected: state.blocks.len(),
            got: values.len(),
        });
    }
    for (k, x) in values.iter().enumerate() {
        if x.dim() != state.blocks[k].len() {
            return Err(Error::DimensionMismatch {
                expected: state.blocks[k].len(),
                got: x.dim(),
            });
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("penalty block"));
        }
        let eig = sym_eigen(x);
        let sigma = eig.max_value().max(0.0);
        let delta_k = state.delta * sigma.max(1.0);
        // Largest eigenvalue of W̃ belongs to the smallest clipped λ.
        let w_max = 1.0 / (eig.min_value().max(0.0) + delta_k);
        let tau = state.tau[k];
        state.weights[k] = eig.reconstruct(|l| tau / ((l.max(0.0) + delta_k) * w_max));
    }
    state.outer_iter += 1;
    Ok(())
}

/// `W_C = Σ_k E_kᵀ W_k E_k` on `pattern`.
pub fn aggregate(state: &WeightState, pattern: &std::sync::Arc<Pattern>) -> Result<PatternVec> {
    let mut w = PatternVec::zeros(pattern);
    for (block, weight) in state.blocks.iter().zip(&state.weights) {
        let s = selector(block, pattern)?;
        crate::symsparse::scatter_add(weight, &s, &mut w)?;
    }
    Ok(w)
}

/// `λ_max / Σ λ_i` over clipped eigenvalues; 1 for the zero matrix.
pub fn rank_ratio(block: &DenseSym) -> f64 {
    let values = sym_eigen(block).values;
    let total: f64 = values.iter().map(|l| l.max(0.0)).sum();
    if total <= 0.0 {
        return 1.0;
    }
    values.last().copied().unwrap_or(0.0).max(0.0) / total
}

#[derive(Debug, Clone)]
pub struct ReweightOptions {
    pub delta: f64,
    pub ratio_target: f64,
    pub max_outer: usize,
    /// Relative change of `x` between rounds below which the loop stops.
    pub x_change_tol: f64,
    pub admm: AdmmOptions,
}

impl Default for ReweightOptions {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            ratio_target: DEFAULT_RATIO_TARGET,
            max_outer: DEFAULT_MAX_OUTER,
            x_change_tol: 1e-4,
            admm: AdmmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    RatioReached,
    Stalled,
    MaxRounds,
    SolverStopped,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::RatioReached => "ratio_reached",
            StopReason::Stalled => "stalled",
            StopReason::MaxRounds => "max_rounds",
            StopReason::SolverStopped => "solver_stopped",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// `⟨C, X⟩` without the penalty.
    pub objective: f64,
    pub max_clique_rank: usize,
    pub min_rank_ratio: f64,
    pub solver_iters: usize,
    pub rank_ratios: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ReweightResult {
    pub solution: Solution,
    pub history: Vec<RoundRecord>,
    pub weights: WeightState,
    /// Penalty `W_C` of every round, in order.
    pub penalties: Vec<PatternVec>,
    pub stop: StopReason,
    pub factorizations: usize,
}

impl ReweightResult {
    pub fn rounds(&self) -> usize {
        self.history.len()
    }
}

/// Locates each penalty block inside a decomposition clique.
fn block_locations(d: &DecomposedProblem, blocks: &[Clique]) -> Result<Vec<(usize, Vec<usize>)>> {
    blocks
        .iter()
        .map(|b| {
            let k = d
                .tree
                .cliques()
                .iter()
                .position(|c| b.is_subset_of(c))
                .ok_or_else(|| {
                    Error::InvalidProblem(format!(
                        "penalty block {:?} is not inside any clique of the decomposition",
                        b.vertices()
                    ))
                })?;
            let c = &d.tree.cliques()[k];
            let local = b
                .vertices()
                .iter()
                .map(|&v| c.local_index(v).expect("subset"))
                .collect();
            Ok((k, local))
        })
        .collect()
}

/// Principal sub-blocks of the solution's clique blocks for each penalty block.
fn penalty_values(sol: &Solution, locations: &[(usize, Vec<usize>)]) -> Vec<DenseSym> {
    locations
        .iter()
        .map(|(k, local)| sol.blocks[*k].principal(local))
        .collect()
}

/// Penalty-block values of a solution, read from the clique blocks.
pub fn penalty_block_values(d: &DecomposedProblem, sol: &Solution) -> Result<Vec<DenseSym>> {
    Ok(penalty_values(sol, &block_locations(d, &d.penalty_blocks())?))
}

pub fn run(d: &DecomposedProblem, opts: &ReweightOptions) -> Result<ReweightResult> {
    run_logged(d, opts, None, &mut |_, _| {})
}

/// Outer loop. The first solve starts from `initial` (zero otherwise);
/// `log` receives `(round, record)` for every ADMM iteration.
pub fn run_logged(
    d: &DecomposedProblem,
    opts: &ReweightOptions,
    initial: Option<&PatternVec>,
    log: &mut dyn FnMut(usize, &IterationRecord),
) -> Result<ReweightResult> {
    if opts.max_outer == 0 {
        return Err(Error::InvalidProblem("at least one round is required".into()));
    }
    let blocks = d.penalty_blocks();
    let locations = block_locations(d, &blocks)?;
    let mut weights = init_weights(&blocks, opts.delta)?;
    let mut solver = AdmmSolver::new(d, opts.admm.clone());
    if let Some(x0) = initial {
        solver.set_initial(&d.embed(x0)?)?;
    }
    let mut history = Vec::new();
    let mut penalties = Vec::new();
    let mut previous_x: Option<Vec<f64>> = None;
    let mut stop = StopReason::MaxRounds;
    let mut last = None;

    for round in 1..=opts.max_outer {
        let w_c = aggregate(&weights, &d.pattern)?;
        let mut cost = d.cost.clone();
        cost.axpy(1.0, &w_c)?;
        penalties.push(w_c);
        let sol = solver
            .solve(&cost, &mut |r| log(round, r))
            .map_err(|e| Error::Round {
                round,
                source: Box::new(e),
            })?;
        let values = penalty_values(&sol, &locations);
        let rank_ratios: Vec<f64> = values.iter().map(rank_ratio).collect();
        let min_rank_ratio = rank_ratios.iter().copied().fold(f64::INFINITY, f64::min);
        history.push(RoundRecord {
            round,
            objective: sol.base_objective,
            max_clique_rank: sol.max_clique_rank(),
            min_rank_ratio,
            solver_iters: sol.iterations,
            rank_ratios,
        });

        let x = sol.x.values().to_vec();
        let stalled = previous_x.as_ref().is_some_and(|p| {
            let diff: f64 = p.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let base: f64 = p.iter().map(|a| a * a).sum::<f64>().sqrt();
            diff <= opts.x_change_tol * base.max(1.0)
        });
        let solver_stopped = sol.status == Status::InfeasibleSuspected;
        update_weights(&mut weights, &values).map_err(|e| Error::Round {
            round,
            source: Box::new(e),
        })?;
        previous_x = Some(x);
        last = Some(sol);

        if solver_stopped {
            stop = StopReason::SolverStopped;
            break;
        }
        if min_rank_ratio > opts.ratio_target {
            stop = StopReason::RatioReached;
            break;
        }
        if stalled {
            stop = StopReason::Stalled;
            break;
        }
    }

    assert_eq!(solver.factorizations(), 1, "KKT factor must be shared by all rounds");
    Ok(ReweightResult {
        solution: last.expect("at least one round"),
        history,
        weights,
        penalties,
        stop,
        factorizations: solver.factorizations(),
    })
}
