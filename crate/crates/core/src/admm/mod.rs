//! Decomposed ADMM for `min ⟨C + W_C, X⟩` subject to affine constraints and
//! one PSD cone per clique, with the consensus split `X_k = E_k X E_kᵀ`.
//!
//! Each iteration:
//! 1. affine step: one KKT solve for the global vector `x` (and slacks),
//! 2. projection of every clique block onto the PSD cone (slack copies onto
//!    the nonnegative half-line),
//! 3. dual ascent on the consensus multipliers.
//!
//! Inequality rows `⟨a, X⟩ <= b` become `⟨a, X⟩ + s = b` with a slack `s`
//! handled as a one-dimensional cone block.

mod kkt;

pub use kkt::KktFactor;

use crate::error::{Error, Result};
use crate::linalg::{project_psd, rank_from_eigenvalues};
use crate::problem::DecomposedProblem;
use crate::symsparse::{block_from_scaled, inner, scatter_add_scaled, DenseSym, PatternVec};

#[derive(Debug, Clone)]
pub struct AdmmOptions {
    pub rho: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    /// Relative eigenvalue threshold for clique ranks.
    pub rank_tol: f64,
    /// Residual balancing: ρ is doubled or halved when one residual exceeds
    /// the other by `balance_ratio`.
    pub adaptive_rho: bool,
    pub balance_ratio: f64,
    pub adapt_interval: usize,
    /// Largest clique consensus gap accepted at convergence, relative to
    /// `1 + ‖x‖`.
    pub consensus_tol: f64,
    pub divergence_factor: f64,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self {
            rho: 10.0,
            eps_abs: 1e-6,
            eps_rel: 1e-4,
            max_iter: 10_000,
            rank_tol: 1e-6,
            adaptive_rho: true,
            balance_ratio: 10.0,
            adapt_interval: 10,
            consensus_tol: 1e-5,
            divergence_factor: 1e8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIter,
    InfeasibleSuspected,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIter => "max_iter",
            Status::InfeasibleSuspected => "infeasible_suspected",
        }
    }
}

/// One row of the iteration log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub primal_res: f64,
    pub dual_res: f64,
    pub rho: f64,
    pub max_clique_rank: usize,
}

#[derive(Debug, Clone)]
pub struct AdmmState {
    /// Global variable, scaled half-vector on the decomposed pattern.
    pub x: Vec<f64>,
    pub slacks: Vec<f64>,
    pub blocks: Vec<DenseSym>,
    pub multipliers: Vec<DenseSym>,
    pub slack_copies: Vec<f64>,
    pub slack_multipliers: Vec<f64>,
    pub rho: f64,
    pub iter: usize,
    pub primal_res: f64,
    pub dual_res: f64,
    pub max_clique_rank: usize,
}

impl AdmmState {
    pub fn new(d: &DecomposedProblem, rho: f64) -> Self {
        let ns = d.num_slacks();
        Self {
            x: vec![0.0; d.pattern.len()],
            slacks: vec![0.0; ns],
            blocks: d.selectors.iter().map(|s| DenseSym::zeros(s.dim())).collect(),
            multipliers: d.selectors.iter().map(|s| DenseSym::zeros(s.dim())).collect(),
            slack_copies: vec![0.0; ns],
            slack_multipliers: vec![0.0; ns],
            rho,
            iter: 0,
            primal_res: f64::INFINITY,
            dual_res: f64::INFINITY,
            max_clique_rank: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: PatternVec,
    pub slacks: Vec<f64>,
    pub blocks: Vec<DenseSym>,
    /// `⟨C + W_C, x⟩` for the cost the solve was given.
    pub objective: f64,
    /// `⟨C, x⟩` for the problem's own cost.
    pub base_objective: f64,
    pub clique_ranks: Vec<usize>,
    pub status: Status,
    /// Iterations of this solve (the log's `iter` counts across warm starts).
    pub iterations: usize,
    pub primal_res: f64,
    pub dual_res: f64,
    /// `max_k ‖X_k − E_k X E_kᵀ‖_F`.
    pub consensus_gap: f64,
    /// `‖A x + s − b‖_∞`.
    pub constraint_residual: f64,
    pub kkt_regularized: bool,
}

impl Solution {
    pub fn max_clique_rank(&self) -> usize {
        self.clique_ranks.iter().copied().max().unwrap_or(0)
    }
}

/// Step 1: `x` minimizing `⟨c, x⟩ + ρ/2 Σ_k ‖H_k x − v_k‖²` subject to the
/// affine constraints, with `v_k = vec(X_k + Λ_k/ρ)`.
pub fn step1_affine(d: &DecomposedProblem, kkt: &KktFactor, state: &mut AdmmState, cost_total: &[f64]) {
    let rho = state.rho;
    let mut r_x: Vec<f64> = cost_total.iter().map(|c| -c / rho).collect();
    for (k, s) in d.selectors.iter().enumerate() {
        scatter_add_scaled(&state.blocks[k], s, &mut r_x, 1.0);
        scatter_add_scaled(&state.multipliers[k], s, &mut r_x, 1.0 / rho);
    }
    let r_s: Vec<f64> = state
        .slack_copies
        .iter()
        .zip(&state.slack_multipliers)
        .map(|(z, mu)| z + mu / rho)
        .collect();
    kkt.solve(&r_x, &r_s, &mut state.x, &mut state.slacks);
}

/// Step 2: `X_k = Π_PSD(E_k X E_kᵀ − Λ_k/ρ)`, slack copies clipped at 0.
///
/// Returns `‖Σ_k H_kᵀ vec(ΔX_k)‖` (slack changes included), the unscaled
/// dual residual.
pub fn step2_project(d: &DecomposedProblem, state: &mut AdmmState, rank_tol: f64) -> Result<f64> {
    let rho = state.rho;
    let mut delta = vec![0.0; state.x.len()];
    let mut max_rank = 0;
    for (k, s) in d.selectors.iter().enumerate() {
        let mut v = block_from_scaled(&state.x, s);
        v.add_scaled(-1.0 / rho, &state.multipliers[k]);
        if !v.is_finite() {
            return Err(Error::NonFinite("clique block before projection"));
        }
        let (p, eigenvalues) = project_psd(&v);
        max_rank = max_rank.max(rank_from_eigenvalues(&eigenvalues, rank_tol));
        scatter_add_scaled(&p.sub(&state.blocks[k]), s, &mut delta, 1.0);
        state.blocks[k] = p;
    }
    let mut sq: f64 = delta.iter().map(|v| v * v).sum();
    for i in 0..state.slacks.len() {
        let z = (state.slacks[i] - state.slack_multipliers[i] / rho).max(0.0);
        sq += (z - state.slack_copies[i]).powi(2);
        state.slack_copies[i] = z;
    }
    state.max_clique_rank = max_rank;
    Ok(sq.sqrt())
}

/// Step 3: `Λ_k += ρ (X_k − E_k X E_kᵀ)`. Returns the primal residual
/// `sqrt(Σ_k ‖X_k − E_k X E_kᵀ‖²_F)` and the largest per-clique gap.
pub fn step3_dual(d: &DecomposedProblem, state: &mut AdmmState) -> (f64, f64) {
    let rho = state.rho;
    let mut sq = 0.0;
    let mut max_gap: f64 = 0.0;
    for (k, s) in d.selectors.iter().enumerate() {
        let gap = state.blocks[k].sub(&block_from_scaled(&state.x, s));
        let g2 = gap.dot(&gap);
        sq += g2;
        max_gap = max_gap.max(g2.sqrt());
        state.multipliers[k].add_scaled(rho, &gap);
    }
    for i in 0..state.slacks.len() {
        let gap = state.slack_copies[i] - state.slacks[i];
        sq += gap * gap;
        max_gap = max_gap.max(gap.abs());
        state.slack_multipliers[i] += rho * gap;
    }
    (sq.sqrt(), max_gap)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// ADMM solver bound to one decomposed problem. The KKT factorization is
/// computed once; the iterate persists across [`AdmmSolver::solve`] calls
/// so successive cost updates warm-start from the previous solution.
pub struct AdmmSolver<'a> {
    problem: &'a DecomposedProblem,
    kkt: KktFactor,
    state: AdmmState,
    opts: AdmmOptions,
    factorizations: usize,
}

impl<'a> AdmmSolver<'a> {
    pub fn new(problem: &'a DecomposedProblem, opts: AdmmOptions) -> Self {
        let kkt = KktFactor::new(problem);
        let state = AdmmState::new(problem, opts.rho);
        Self {
            problem,
            kkt,
            state,
            opts,
            factorizations: 1,
        }
    }

    /// Replaces the iterate by `x0` (on the decomposed pattern) with clique
    /// blocks set to the PSD projections of its blocks and zero multipliers.
    pub fn set_initial(&mut self, x0: &PatternVec) -> Result<()> {
        let d = self.problem;
        if x0.values().len() != d.pattern.len() {
            return Err(Error::PatternMismatch);
        }
        let rho = self.state.rho;
        let mut st = AdmmState::new(d, rho);
        st.x.copy_from_slice(x0.values());
        for (k, s) in d.selectors.iter().enumerate() {
            st.blocks[k] = project_psd(&block_from_scaled(&st.x, s)).0;
        }
        self.state = st;
        Ok(())
    }

    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    pub fn state(&self) -> &AdmmState {
        &self.state
    }

    pub fn kkt(&self) -> &KktFactor {
        &self.kkt
    }

    pub fn options(&self) -> &AdmmOptions {
        &self.opts
    }

    /// Iterates from the current state until convergence, `max_iter`, or
    /// divergence. `log` sees every iteration.
    pub fn solve(
        &mut self,
        cost_total: &PatternVec,
        log: &mut dyn FnMut(&IterationRecord),
    ) -> Result<Solution> {
        let d = self.problem;
        if cost_total.values().len() != d.pattern.len() {
            return Err(Error::PatternMismatch);
        }
        let c = cost_total.values();
        let opts = &self.opts;
        let st = &mut self.state;
        let mut status = Status::MaxIter;
        let mut reference: Option<f64> = None;
        let mut max_gap = f64::INFINITY;
        let mut iterations = 0;

        for it in 0..opts.max_iter {
            step1_affine(d, &self.kkt, st, c);
            let dual_raw = step2_project(d, st, opts.rank_tol)?;
            let (primal, gap) = step3_dual(d, st);
            max_gap = gap;
            st.primal_res = primal;
            st.dual_res = st.rho * dual_raw;
            st.iter += 1;
            iterations += 1;

            let objective: f64 = c.iter().zip(&st.x).map(|(a, b)| a * b).sum();
            log(&IterationRecord {
                iter: st.iter,
                objective,
                primal_res: st.primal_res,
                dual_res: st.dual_res,
                rho: st.rho,
                max_clique_rank: st.max_clique_rank,
            });

            if !objective.is_finite() || !primal.is_finite() || !st.dual_res.is_finite() {
                return Err(Error::NonFinite("ADMM iterate"));
            }
            let worst = st.primal_res.max(st.dual_res);
            let reference = *reference.get_or_insert(worst.max(1.0));
            if worst > opts.divergence_factor * reference {
                status = Status::InfeasibleSuspected;
                break;
            }

            let (eps_p, eps_d) = tolerances(d, st, opts);
            let x_norm = norm(&st.x);
            if st.primal_res <= eps_p
                && st.dual_res <= eps_d
                && max_gap <= opts.consensus_tol * (1.0 + x_norm)
            {
                status = Status::Converged;
                break;
            }

            if opts.adaptive_rho && (it + 1) % opts.adapt_interval.max(1) == 0 {
                if st.primal_res > opts.balance_ratio * st.dual_res {
                    st.rho *= 2.0;
                } else if st.dual_res > opts.balance_ratio * st.primal_res {
                    st.rho /= 2.0;
                }
            }
        }

        let x = PatternVec::from_scaled(&d.pattern, st.x.clone())?;
        let base_objective = inner(&d.cost, &x)?;
        let objective = inner(cost_total, &x)?;
        let clique_ranks = st
            .blocks
            .iter()
            .map(|b| crate::completion::numerical_rank(b, opts.rank_tol))
            .collect();
        Ok(Solution {
            constraint_residual: self.kkt.residual_inf(&st.x, &st.slacks),
            x,
            slacks: st.slack_copies.clone(),
            blocks: st.blocks.clone(),
            objective,
            base_objective,
            clique_ranks,
            status,
            iterations,
            primal_res: st.primal_res,
            dual_res: st.dual_res,
            consensus_gap: max_gap,
            kkt_regularized: self.kkt.regularized(),
        })
    }
}

/// `(ε_pri, ε_dual)` from the absolute and relative tolerances.
fn tolerances(d: &DecomposedProblem, st: &AdmmState, opts: &AdmmOptions) -> (f64, f64) {
    let mut hx = 0.0;
    let mut xk = 0.0;
    let mut lam = vec![0.0; st.x.len()];
    for (k, s) in d.selectors.iter().enumerate() {
        let b = block_from_scaled(&st.x, s);
        hx += b.dot(&b);
        xk += st.blocks[k].dot(&st.blocks[k]);
        scatter_add_scaled(&st.multipliers[k], s, &mut lam, 1.0);
    }
    hx += st.slacks.iter().map(|v| v * v).sum::<f64>();
    xk += st.slack_copies.iter().map(|v| v * v).sum::<f64>();
    let lam_sq = lam.iter().map(|v| v * v).sum::<f64>()
        + st.slack_multipliers.iter().map(|v| v * v).sum::<f64>();
    let scale_p = hx.sqrt().max(xk.sqrt());
    let scale_d = lam_sq.sqrt();
    (
        opts.eps_abs + opts.eps_rel * scale_p,
        opts.eps_abs + opts.eps_rel * scale_d,
    )
}

/// One convex solve of `min ⟨C + extra, X⟩` from a cold start.
pub fn solve(d: &DecomposedProblem, extra_cost: Option<&PatternVec>, opts: &AdmmOptions) -> Result<Solution> {
    solve_logged(d, extra_cost, opts, &mut |_| {})
}

pub fn solve_logged(
    d: &DecomposedProblem,
    extra_cost: Option<&PatternVec>,
    opts: &AdmmOptions,
    log: &mut dyn FnMut(&IterationRecord),
) -> Result<Solution> {
    let mut cost = d.cost.clone();
    if let Some(w) = extra_cost {
        cost.axpy(1.0, &d.embed(w)?)?;
    }
    AdmmSolver::new(d, opts.clone()).solve(&cost, log)
}

#[cfg(test)]
mod tests;
