//! Max-cut relaxation `min ⟨−L/4, X⟩  s.t.  X_ii = 1,  X ⪰ 0` and
//! random-hyperplane rounding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::admm::Solution;
use crate::chordal::{CliqueTree, Graph};
use crate::completion::{min_rank_factor_with_tol, CompletionFactor, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::problem::{SdpProblem, Sense, TripletConstraint};
use crate::symsparse::PatternVec;

/// Erdős–Rényi graph: each pair `i < j` is an edge with probability `density`.
pub fn random_graph(n: usize, density: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidProblem(format!("max-cut needs n >= 2, got {n}")));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidProblem(format!("density must lie in (0, 1], got {density}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < density {
                g.add_edge(i, j)?;
            }
        }
    }
    Ok(g)
}

/// SDP relaxation of max-cut on `g` with unit edge weights; target rank 1.
pub fn maxcut_problem(g: &Graph) -> Result<SdpProblem> {
    let n = g.n();
    let mut cost: Vec<(usize, usize, f64)> = (0..n)
        .filter(|&i| g.degree(i) > 0)
        .map(|i| (i, i, -(g.degree(i) as f64) / 4.0))
        .collect();
    cost.extend(g.edges().map(|(i, j)| (i, j, 0.25)));
    let constraints: Vec<_> = (0..n)
        .map(|i| TripletConstraint {
            a: vec![(i, i, 1.0)],
            b: 1.0,
            sense: Sense::Eq,
        })
        .collect();
    SdpProblem::from_triplets(n, Some(g.clone()), &cost, &constraints, 1, None)
}

pub fn gen_maxcut(n: usize, density: f64, seed: u64) -> Result<(Graph, SdpProblem)> {
    let g = random_graph(n, density, seed)?;
    let p = maxcut_problem(&g)?;
    Ok((g, p))
}

/// Number of edges crossing the partition.
pub fn cut_value(g: &Graph, side: &[bool]) -> f64 {
    g.edges().filter(|&(i, j)| side[i] != side[j]).count() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub side: Vec<bool>,
    pub value: f64,
}

/// Best of `trials` random hyperplanes through the rows of `factor`.
pub fn round_factor(g: &Graph, factor: &CompletionFactor, seed: u64, trials: usize) -> Cut {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = factor.n;
    let mut best = Cut {
        side: vec![true; n],
        value: 0.0,
    };
    for _ in 0..trials.max(1) {
        let h: Vec<f64> = (0..factor.width).map(|_| StandardNormal.sample(&mut rng)).collect();
        let side: Vec<bool> = (0..n)
            .map(|i| factor.row(i).iter().zip(&h).map(|(a, b)| a * b).sum::<f64>() >= 0.0)
            .collect();
        let value = cut_value(g, &side);
        if value > best.value {
            best = Cut { side, value };
        }
    }
    best
}

/// Rounds a solution on a chordal pattern through its minimum-rank
/// completion. Clique blocks may be indefinite by `psd_tol` (ADMM iterates
/// satisfy consensus only to tolerance).
pub fn round_maxcut(
    g: &Graph,
    x: &PatternVec,
    tree: &CliqueTree,
    seed: u64,
    trials: usize,
    psd_tol: Option<f64>,
) -> Result<Cut> {
    let factor = min_rank_factor_with_tol(x, tree, DEFAULT_RANK_TOL, psd_tol)?;
    Ok(round_factor(g, &factor, seed, trials))
}

/// Rounds an ADMM solution. Every block of `x` is within the consensus gap
/// of a projected PSD block, which bounds its negative eigenvalues.
pub fn round_solution(g: &Graph, sol: &Solution, tree: &CliqueTree, seed: u64, trials: usize) -> Result<Cut> {
    let psd_tol = sol.consensus_gap * (1.0 + 1e-9) + 1e-12;
    round_maxcut(g, &sol.x, tree, seed, trials, Some(psd_tol))
}

/// Exhaustive maximum cut for small graphs.
pub fn brute_force_maxcut(g: &Graph) -> f64 {
    let n = g.n();
    assert!(n <= 24, "brute force limited to 24 vertices");
    (0u32..1 << (n - 1))
        .map(|mask| {
            let side: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            cut_value(g, &side)
        })
        .fold(0.0, f64::max)
}
