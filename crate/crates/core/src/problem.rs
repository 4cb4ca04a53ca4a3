//! Problem data and its chordal decomposition.

use std::sync::Arc;

use crate::chordal::{decompose_graph, Clique, CliqueTree, Graph};
use crate::error::{Error, Result};
use crate::symsparse::{aggregate_pattern, coverage, selector, Pattern, PatternVec, SelectorMap, SymTriplets};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `⟨A, X⟩ = b`
    Eq,
    /// `⟨A, X⟩ <= b`
    Le,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub a: PatternVec,
    pub b: f64,
    pub sense: Sense,
}

/// `min ⟨C, X⟩  s.t.  ⟨A_i, X⟩ (= | <=) b_i,  X ⪰ 0,  rank(X) <= t`.
///
/// The rank target is monitored and reported, never enforced.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub n: usize,
    pub pattern: Arc<Pattern>,
    pub cost: PatternVec,
    pub constraints: Vec<Constraint>,
    pub target_rank: usize,
    pub penalty_blocks: Option<Vec<Clique>>,
}

/// Constraint given as matrix triplets (unscaled, either triangle).
#[derive(Debug, Clone)]
pub struct TripletConstraint {
    pub a: SymTriplets,
    pub b: f64,
    pub sense: Sense,
}

impl SdpProblem {
    /// Builds a problem from triplets. Without an explicit `pattern` the
    /// aggregate sparsity pattern of the data is used; an explicit pattern
    /// must contain it.
    pub fn from_triplets(
        n: usize,
        pattern: Option<Graph>,
        cost: &[(usize, usize, f64)],
        constraints: &[TripletConstraint],
        target_rank: usize,
        penalty_blocks: Option<Vec<Clique>>,
    ) -> Result<Self> {
        if target_rank == 0 {
            return Err(Error::InvalidProblem("target_rank must be at least 1".into()));
        }
        let aggregate = aggregate_pattern(n, cost, constraints.iter().map(|c| c.a.as_slice()))?;
        let graph = match pattern {
            Some(g) => {
                if g.n() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: g.n() });
                }
                if !g.is_superset_of(&aggregate) {
                    return Err(Error::InvalidProblem(
                        "data support is not contained in the declared pattern".into(),
                    ));
                }
                g
            }
            None => aggregate,
        };
        let pattern = Pattern::new(graph);
        let cost = PatternVec::from_triplets(&pattern, cost)?;
        let constraints = constraints
            .iter()
            .map(|c| {
                Ok(Constraint {
                    a: PatternVec::from_triplets(&pattern, &c.a)?,
                    b: c.b,
                    sense: c.sense,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(blocks) = &penalty_blocks {
            if blocks.iter().flat_map(|c| c.vertices()).any(|&v| v >= n) {
                return Err(Error::InvalidProblem("penalty block vertex out of range".into()));
            }
        }
        Ok(Self {
            n,
            pattern,
            cost,
            constraints,
            target_rank,
            penalty_blocks,
        })
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }
}

/// Re-embeds `v` into a pattern containing its own.
fn embed(v: &PatternVec, pattern: &Arc<Pattern>) -> Result<PatternVec> {
    if Arc::ptr_eq(v.pattern(), pattern) {
        return Ok(v.clone());
    }
    PatternVec::from_triplets(pattern, &v.to_triplets())
}

/// One sparse constraint row on the decomposed pattern.
#[derive(Debug, Clone)]
pub struct ConstraintRow {
    pub coeffs: Vec<(usize, f64)>,
    pub b: f64,
    pub sense: Sense,
}

/// Problem with the PSD cone split over the cliques of a chordal extension.
#[derive(Debug, Clone)]
pub struct DecomposedProblem {
    pub problem: SdpProblem,
    /// Chordal extension of the problem pattern; all iterates live here.
    pub pattern: Arc<Pattern>,
    pub tree: CliqueTree,
    pub selectors: Vec<SelectorMap>,
    /// Diagonal of `D = Σ_k H_kᵀ H_k`.
    pub coverage: Vec<f64>,
    pub cost: PatternVec,
    pub rows: Vec<ConstraintRow>,
}

impl DecomposedProblem {
    pub fn num_cliques(&self) -> usize {
        self.selectors.len()
    }

    pub fn num_slacks(&self) -> usize {
        self.rows.iter().filter(|r| r.sense == Sense::Le).count()
    }

    /// Penalty blocks: explicit list or the decomposition cliques.
    pub fn penalty_blocks(&self) -> Vec<Clique> {
        self.problem
            .penalty_blocks
            .clone()
            .unwrap_or_else(|| self.tree.cliques().to_vec())
    }

    /// Lifts a vector on the original pattern to the decomposed one.
    pub fn embed(&self, v: &PatternVec) -> Result<PatternVec> {
        embed(v, &self.pattern)
    }
}

/// Chordal extension, cliques, selectors and coverage for `p`.
pub fn decompose(p: &SdpProblem) -> Result<DecomposedProblem> {
    let (ext, tree) = decompose_graph(p.pattern.graph());
    let pattern = if &ext == p.pattern.graph() {
        Arc::clone(&p.pattern)
    } else {
        Pattern::new(ext)
    };
    let selectors = tree
        .cliques()
        .iter()
        .map(|c| selector(c, &pattern))
        .collect::<Result<Vec<_>>>()?;
    let coverage = coverage(&selectors, pattern.len());
    debug_assert!(coverage.iter().all(|&d| d >= 1.0));
    let cost = embed(&p.cost, &pattern)?;
    let rows = p
        .constraints
        .iter()
        .map(|c| {
            let a = embed(&c.a, &pattern)?;
            Ok(ConstraintRow {
                coeffs: a
                    .values()
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(k, &v)| (k, v))
                    .collect(),
                b: c.b,
                sense: c.sense,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecomposedProblem {
        problem: p.clone(),
        pattern,
        tree,
        selectors,
        coverage,
        cost,
        rows,
    })
}

/// Single-clique decomposition over the complete pattern (dense reference).
pub fn decompose_dense(p: &SdpProblem) -> Result<DecomposedProblem> {
    let mut dense = p.clone();
    let full = Pattern::new(Graph::complete(p.n));
    dense.pattern = Arc::clone(&full);
    dense.cost = embed(&p.cost, &full)?;
    for c in &mut dense.constraints {
        c.a = embed(&c.a, &full)?;
    }
    decompose(&dense)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_constraints(n: usize) -> Vec<TripletConstraint> {
        (0..n)
            .map(|i| TripletConstraint {
                a: vec![(i, i, 1.0)],
                b: 1.0,
                sense: Sense::Eq,
            })
            .collect()
    }

    #[test]
    fn path_pattern_decomposes_into_three_edges() {
        let cost = vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)];
        let p = SdpProblem::from_triplets(4, None, &cost, &diag_constraints(4), 1, None).unwrap();
        let d = decompose(&p).unwrap();
        assert_eq!(d.num_cliques(), 3);
        assert!(d.tree.cliques().iter().all(|c| c.len() == 2));
        let diag: Vec<f64> = (0..4).map(|i| d.coverage[d.pattern.index(i, i).unwrap()]).collect();
        assert_eq!(diag, vec![1.0, 2.0, 2.0, 1.0]);
    }

    #[test]
    fn dense_pattern_has_identity_coverage() {
        let cost: Vec<_> = (0..3).flat_map(|i| (i..3).map(move |j| (i, j, 1.0))).collect();
        let p = SdpProblem::from_triplets(3, None, &cost, &[], 1, None).unwrap();
        let d = decompose(&p).unwrap();
        assert_eq!(d.num_cliques(), 1);
        assert!(d.coverage.iter().all(|&c| c == 1.0));
    }

    #[test]
    fn four_cycle_is_triangulated() {
        let cost = vec![(0, 1, 1.0), (1, 3, 1.0), (3, 2, 1.0), (2, 0, 1.0)];
        let p = SdpProblem::from_triplets(4, None, &cost, &diag_constraints(4), 1, None).unwrap();
        let d = decompose(&p).unwrap();
        assert_eq!(d.num_cliques(), 2);
        assert!(d.tree.cliques().iter().all(|c| c.len() == 3));
        assert_eq!(d.pattern.graph().num_edges(), 5);
    }

    #[test]
    fn invalid_problems_are_rejected() {
        assert!(SdpProblem::from_triplets(2, None, &[], &[], 0, None).is_err());
        let small = Graph::new(3);
        assert!(SdpProblem::from_triplets(3, Some(small), &[(0, 1, 1.0)], &[], 1, None).is_err());
    }
}
