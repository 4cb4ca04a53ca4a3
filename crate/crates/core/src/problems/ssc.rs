//! Subspace clustering as a rank-one lifted SDP.
//!
//! Unknowns are hyperplane normals `r_i ∈ R^D` and binary labels `s_ij`.
//! With `v = [r_1, …, r_Ns, s_11, …, s_1Np, s_21, …, s_NsNp]` the lift is
//! `X = [1, v][1, v]ᵀ`, and every constraint is linear in `X`:
//!
//! ```text
//! ±Σ_d x_j[d] X[s_ij, r_i[d]] <= ε X[1, s_ij]   orthogonality when assigned
//!   X[s_ij, s_ij] = X[1, s_ij]                     binary labels
//!   Σ_i X[1, s_ij] = 1                             one subspace per point
//!   Σ_d X[r_i[d], r_i[d]] = 1                      unit normals
//! ```

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::chordal::{Clique, Graph};
use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use crate::problem::{SdpProblem, Sense, TripletConstraint};
use crate::symsparse::{DenseSym, PatternVec};

/// Smallest admissible angle between two subspace normals.
pub const MIN_NORMAL_ANGLE_DEG: f64 = 15.0;
/// Resampling budget per point for noise and ambiguity rejection.
const MAX_POINT_ATTEMPTS: usize = 1000;
const MAX_NORMAL_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SscInstance {
    #[serde(rename = "D")]
    pub dim: usize,
    #[serde(rename = "Ns")]
    pub num_subspaces: usize,
    #[serde(rename = "Np")]
    pub num_points: usize,
    pub eps: f64,
    pub seed: u64,
    pub points: Vec<Vec<f64>>,
    pub normals: Vec<Vec<f64>>,
    /// Subspace index of each point, 0-based.
    pub labels: Vec<usize>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Orthonormal basis of `r⊥` by Gram–Schmidt over the coordinate axes,
/// skipping the axis most aligned with `r`.
fn hyperplane_basis(r: &[f64]) -> Vec<Vec<f64>> {
    let d = r.len();
    let skip = (0..d)
        .max_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs()))
        .expect("D >= 1");
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    for axis in (0..d).filter(|&a| a != skip) {
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        for q in std::iter::once(r).chain(basis.iter().map(|b| b.as_slice())) {
            let c = dot(&v, q);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
        normalize(&mut v);
        basis.push(v);
    }
    basis
}

/// Random instance: normals uniform on the sphere with pairwise line angle
/// at least 15°, points split evenly (in contiguous runs) over the
/// subspaces, in-hyperplane coordinates uniform in `[−1, 1]`, plus
/// coordinate noise uniform in `[−ε, ε]`.
///
/// Noise draws are repeated until `|r_labelᵀ x| <= ε`, so the ground truth
/// satisfies the orthogonality constraints at tolerance `ε`. Points within
/// `2ε` of another subspace are redrawn (up to a fixed budget), which keeps
/// the labels identifiable.
pub fn gen_ssc(num_subspaces: usize, num_points: usize, dim: usize, eps: f64, seed: u64) -> Result<SscInstance> {
    if num_subspaces < 1 || num_points < num_subspaces || dim < 2 {
        return Err(Error::InvalidProblem(format!(
            "need Ns >= 1, Np >= Ns, D >= 2 (got Ns={num_subspaces}, Np={num_points}, D={dim})"
        )));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidProblem(format!("eps must be finite and >= 0, got {eps}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cos_max = MIN_NORMAL_ANGLE_DEG.to_radians().cos();

    let mut normals: Vec<Vec<f64>> = Vec::with_capacity(num_subspaces);
    let mut attempts = 0;
    while normals.len() < num_subspaces {
        attempts += 1;
        if attempts > MAX_NORMAL_ATTEMPTS {
            return Err(Error::InvalidProblem(format!(
                "cannot place {num_subspaces} normals in R^{dim} with pairwise angle >= {MIN_NORMAL_ANGLE_DEG} degrees"
            )));
        }
        let mut r: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        if normalize(&mut r) < 1e-12 {
            continue;
        }
        if normals.iter().all(|q| dot(q, &r).abs() <= cos_max) {
            normals.push(r);
        }
    }
    let bases: Vec<Vec<Vec<f64>>> = normals.iter().map(|r| hyperplane_basis(r)).collect();

    let labels: Vec<usize> = (0..num_points).map(|j| j * num_subspaces / num_points).collect();
    let mut points = Vec::with_capacity(num_points);
    for &label in &labels {
        let r = &normals[label];
        let mut point = Vec::new();
        for _ in 0..MAX_POINT_ATTEMPTS {
            let mut x = vec![0.0; dim];
            for b in &bases[label] {
                let t: f64 = rng.random_range(-1.0..=1.0);
                x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += t * bi);
            }
            if eps > 0.0 {
                loop {
                    let noisy: Vec<f64> = x.iter().map(|xi| xi + rng.random_range(-eps..=eps)).collect();
                    if dot(r, &noisy).abs() <= eps {
                        x = noisy;
                        break;
                    }
                }
            }
            point = x;
            let separated = normals
                .iter()
                .enumerate()
                .all(|(i, q)| i == label || dot(q, &point).abs() > 2.0 * eps);
            if separated {
                break;
            }
        }
        points.push(point);
    }
    Ok(SscInstance {
        dim,
        num_subspaces,
        num_points,
        eps,
        seed,
        points,
        normals,
        labels,
    })
}

impl SscInstance {
    pub fn validate(&self) -> Result<()> {
        let ok = self.num_subspaces >= 1
            && self.num_points >= self.num_subspaces
            && self.dim >= 2
            && self.eps >= 0.0
            && self.points.len() == self.num_points
            && self.points.iter().all(|p| p.len() == self.dim)
            && self.normals.len() == self.num_subspaces
            && self.normals.iter().all(|r| r.len() == self.dim)
            && self.labels.len() == self.num_points
            && self.labels.iter().all(|&l| l < self.num_subspaces);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidProblem("inconsistent SSC instance dimensions".into()))
        }
    }
}

/// Index layout of the lifted variable `[1, v]`, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SscLift {
    pub dim: usize,
    pub num_subspaces: usize,
    pub num_points: usize,
}

impl SscLift {
    pub fn new(inst: &SscInstance) -> Self {
        Self {
            dim: inst.dim,
            num_subspaces: inst.num_subspaces,
            num_points: inst.num_points,
        }
    }

    pub const ONE: usize = 0;

    pub fn size(&self) -> usize {
        1 + self.num_subspaces * (self.dim + self.num_points)
    }

    pub fn r(&self, i: usize, d: usize) -> usize {
        1 + i * self.dim + d
    }

    pub fn s(&self, i: usize, j: usize) -> usize {
        1 + self.num_subspaces * self.dim + i * self.num_points + j
    }

    /// `{1} ∪ r_i`.
    pub fn normal_block(&self, i: usize) -> Clique {
        let mut v = vec![Self::ONE];
        v.extend((0..self.dim).map(|d| self.r(i, d)));
        Clique::new(v).expect("distinct indices")
    }

    /// `{1} ∪ r_i ∪ {s_ij}`.
    pub fn clique(&self, i: usize, j: usize) -> Clique {
        let mut v = self.normal_block(i).vertices().to_vec();
        v.push(self.s(i, j));
        Clique::new(v).expect("distinct indices")
    }

    /// `[1, v]` for given normals and labels.
    pub fn lift_vector(&self, normals: &[Vec<f64>], labels: &[usize]) -> Vec<f64> {
        let mut v = vec![0.0; self.size()];
        v[Self::ONE] = 1.0;
        for (i, r) in normals.iter().enumerate() {
            for (d, &x) in r.iter().enumerate() {
                v[self.r(i, d)] = x;
            }
        }
        for (j, &i) in labels.iter().enumerate() {
            v[self.s(i, j)] = 1.0;
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct SscSdp {
    pub problem: SdpProblem,
    pub lift: SscLift,
}

/// Lifted feasibility SDP (zero cost) with the `N_s` blocks `{1} ∪ r_i`
/// as penalty blocks and the pattern spanned by the cliques
/// `{1} ∪ r_i ∪ {s_ij}`.
pub fn build_ssc_sdp(inst: &SscInstance) -> Result<SscSdp> {
    inst.validate()?;
    let lift = SscLift::new(inst);
    let one = SscLift::ONE;
    let mut pattern = Graph::new(lift.size());
    for i in 0..inst.num_subspaces {
        for j in 0..inst.num_points {
            let c = lift.clique(i, j);
            let vs = c.vertices();
            for a in 0..vs.len() {
                for b in a + 1..vs.len() {
                    pattern.add_edge(vs[a], vs[b])?;
                }
            }
        }
    }

    let mut constraints = vec![TripletConstraint {
        a: vec![(one, one, 1.0)],
        b: 1.0,
        sense: Sense::Eq,
    }];
    // Off-diagonal triplets carry half the coefficient of X_ab.
    for i in 0..inst.num_subspaces {
        for (j, x) in inst.points.iter().enumerate() {
            let s = lift.s(i, j);
            for sign in [1.0, -1.0] {
                let mut a: Vec<(usize, usize, f64)> = x
                    .iter()
                    .enumerate()
                    .map(|(d, &xd)| (lift.r(i, d), s, 0.5 * sign * xd))
                    .collect();
                a.push((one, s, -0.5 * inst.eps));
                constraints.push(TripletConstraint { a, b: 0.0, sense: Sense::Le });
            }
            constraints.push(TripletConstraint {
                a: vec![(s, s, 1.0), (one, s, -0.5)],
                b: 0.0,
                sense: Sense::Eq,
            });
        }
    }
    for j in 0..inst.num_points {
        constraints.push(TripletConstraint {
            a: (0..inst.num_subspaces).map(|i| (one, lift.s(i, j), 0.5)).collect(),
            b: 1.0,
            sense: Sense::Eq,
        });
    }
    for i in 0..inst.num_subspaces {
        constraints.push(TripletConstraint {
            a: (0..inst.dim).map(|d| (lift.r(i, d), lift.r(i, d), 1.0)).collect(),
            b: 1.0,
            sense: Sense::Eq,
        });
    }
    let blocks = (0..inst.num_subspaces).map(|i| lift.normal_block(i)).collect();
    let problem = SdpProblem::from_triplets(lift.size(), Some(pattern), &[], &constraints, 1, Some(blocks))?;
    Ok(SscSdp { problem, lift })
}

/// Ground-truth lift `[1, v][1, v]ᵀ` restricted to the problem pattern.
pub fn ground_truth_lift(sdp: &SscSdp, inst: &SscInstance) -> PatternVec {
    lift_on_pattern(sdp, &inst.normals, &inst.labels)
}

/// Seeded starting point for the solver: the rank-one lift of random unit
/// normals with each point assigned to the nearest random hyperplane.
///
/// The lifted problem is invariant under `r_i → −r_i` and under relabeling
/// the subspaces, and the reweighted heuristic preserves that symmetry; a
/// symmetric start would stay at `X[1, r_i] = 0`, which is never rank one.
pub fn initial_guess(sdp: &SscSdp, inst: &SscInstance, seed: u64) -> PatternVec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0ff5_e75e_ed00);
    let normals: Vec<Vec<f64>> = (0..inst.num_subspaces)
        .map(|_| loop {
            let mut r: Vec<f64> = (0..inst.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            if normalize(&mut r) > 1e-12 {
                break r;
            }
        })
        .collect();
    let labels: Vec<usize> = inst
        .points
        .iter()
        .map(|x| {
            (0..normals.len())
                .min_by(|&a, &b| dot(&normals[a], x).abs().total_cmp(&dot(&normals[b], x).abs()))
                .expect("Ns >= 1")
        })
        .collect();
    lift_on_pattern(sdp, &normals, &labels)
}

fn lift_on_pattern(sdp: &SscSdp, normals: &[Vec<f64>], labels: &[usize]) -> PatternVec {
    let v = sdp.lift.lift_vector(normals, labels);
    let pattern: &Arc<_> = &sdp.problem.pattern;
    let values = pattern
        .entries()
        .iter()
        .map(|&(a, b)| v[a] * v[b] * if a == b { 1.0 } else { std::f64::consts::SQRT_2 })
        .collect();
    PatternVec::from_scaled(pattern, values).expect("pattern length")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SscEstimate {
    /// Unit normal per subspace; `None` when the block's leading
    /// eigenvector has a vanishing constant coordinate.
    pub normals: Vec<Option<Vec<f64>>>,
    pub labels: Vec<usize>,
}

/// Normals from the leading eigenvectors of the `{1} ∪ r_i` blocks, labels
/// from `argmax_i X[1, s_ij]` (ties to the lowest `i`).
pub fn extract_ssc(x: &PatternVec, normal_blocks: &[DenseSym], lift: &SscLift) -> SscEstimate {
    let normals = normal_blocks
        .iter()
        .map(|b| {
            let e = sym_eigen(b);
            let top = e.dim() - 1;
            let c = e.vector_entry(0, top);
            if c.abs() < 1e-8 {
                return None;
            }
            let mut r: Vec<f64> = (1..e.dim()).map(|a| e.vector_entry(a, top) / c).collect();
            (normalize(&mut r) > 0.0).then_some(r)
        })
        .collect();
    let labels = (0..lift.num_points)
        .map(|j| {
            let mut best = 0;
            for i in 1..lift.num_subspaces {
                if x.get(SscLift::ONE, lift.s(i, j)) > x.get(SscLift::ONE, lift.s(best, j)) {
                    best = i;
                }
            }
            best
        })
        .collect();
    SscEstimate { normals, labels }
}

/// `{1} ∪ r_i` blocks read from `x`.
pub fn normal_blocks_from(x: &PatternVec, lift: &SscLift) -> Vec<DenseSym> {
    (0..lift.num_subspaces)
        .map(|i| {
            let idx = lift.normal_block(i);
            let v = idx.vertices();
            DenseSym::from_fn(v.len(), |a, b| x.get(v[a], v[b]))
        })
        .collect()
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Relabeling `perm` (estimated index → true index) with the most
/// agreements, and the agreement fraction. Ties go to the first
/// permutation in generation order.
pub fn best_permutation(labels_hat: &[usize], labels_true: &[usize], k: usize) -> (Vec<usize>, f64) {
    assert_eq!(labels_hat.len(), labels_true.len(), "label vectors differ in length");
    assert!(k <= 8, "exhaustive matching is limited to 8 classes");
    let mut best = ((0..k).collect::<Vec<_>>(), 0usize);
    for p in permutations(k) {
        let hits = labels_hat
            .iter()
            .zip(labels_true)
            .filter(|(&h, &t)| h < k && p[h] == t)
            .count();
        if hits > best.1 {
            best = (p, hits);
        }
    }
    let frac = if labels_true.is_empty() {
        1.0
    } else {
        best.1 as f64 / labels_true.len() as f64
    };
    (best.0, frac)
}

/// Best agreement over all relabelings.
pub fn clustering_accuracy(labels_hat: &[usize], labels_true: &[usize]) -> f64 {
    let k = labels_hat.iter().chain(labels_true).copied().max().map_or(0, |m| m + 1);
    best_permutation(labels_hat, labels_true, k).1
}

/// Angle in degrees between the lines spanned by `a` and `b`.
pub fn line_angle_deg(a: &[f64], b: &[f64]) -> f64 {
    let c = dot(a, b).abs() / (dot(a, a).sqrt() * dot(b, b).sqrt());
    c.min(1.0).acos().to_degrees()
}

/// Angle between each estimated normal and its matched true normal, using
/// the best label permutation; `None` for skipped blocks.
pub fn normal_angles(est: &SscEstimate, inst: &SscInstance) -> Vec<Option<f64>> {
    let (perm, _) = best_permutation(&est.labels, &inst.labels, inst.num_subspaces);
    est.normals
        .iter()
        .enumerate()
        .map(|(i, r)| r.as_ref().map(|r| line_angle_deg(r, &inst.normals[perm[i]])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::decompose;
    use crate::symsparse::inner;

    fn constraint_values(sdp: &SscSdp, x: &PatternVec) -> Vec<(f64, f64, Sense)> {
        sdp.problem
            .constraints
            .iter()
            .map(|c| (inner(&c.a, x).unwrap(), c.b, c.sense))
            .collect()
    }

    fn satisfied(values: &[(f64, f64, Sense)], tol: f64) -> bool {
        values.iter().all(|&(v, b, s)| match s {
            Sense::Eq => (v - b).abs() <= tol,
            Sense::Le => v <= b + tol,
        })
    }

    #[test]
    fn zero_noise_points_lie_on_their_hyperplanes() {
        let inst = gen_ssc(3, 30, 4, 0.0, 11).unwrap();
        for (x, &l) in inst.points.iter().zip(&inst.labels) {
            assert!(dot(x, &inst.normals[l]).abs() < 1e-14);
        }
        for r in &inst.normals {
            assert!((dot(r, r) - 1.0).abs() < 1e-14);
        }
        assert_eq!(inst.labels.iter().filter(|&&l| l == 0).count(), 10);
    }

    #[test]
    fn noisy_points_respect_the_bound() {
        let inst = gen_ssc(2, 20, 2, 0.1, 3).unwrap();
        for (x, &l) in inst.points.iter().zip(&inst.labels) {
            assert!(dot(x, &inst.normals[l]).abs() <= 0.1);
        }
        assert_eq!(gen_ssc(2, 20, 2, 0.1, 3).unwrap(), inst);
        assert!(gen_ssc(3, 2, 2, 0.1, 0).is_err());
        assert!(gen_ssc(1, 2, 1, 0.1, 0).is_err());
    }

    #[test]
    fn lift_sizes() {
        let inst = gen_ssc(4, 80, 5, 0.05, 1).unwrap();
        let sdp = build_ssc_sdp(&inst).unwrap();
        assert_eq!(sdp.lift.size(), 341);
        let d = decompose(&sdp.problem).unwrap();
        assert_eq!(d.num_cliques(), 320);
        assert!(d.tree.cliques().iter().all(|c| c.len() == 7));
        let blocks = sdp.problem.penalty_blocks.as_ref().unwrap();
        assert_eq!(blocks.len(), 4);
        assert!(blocks.iter().all(|b| b.len() == 6));
        assert!(Arc::ptr_eq(&d.pattern, &sdp.problem.pattern));
    }

    #[test]
    fn aggregate_pattern_equals_clique_union() {
        let inst = gen_ssc(2, 6, 3, 0.1, 2).unwrap();
        let sdp = build_ssc_sdp(&inst).unwrap();
        let triplets: Vec<Vec<(usize, usize, f64)>> =
            sdp.problem.constraints.iter().map(|c| c.a.to_triplets()).collect();
        let agg = crate::symsparse::aggregate_pattern(
            sdp.lift.size(),
            &[],
            triplets.iter().map(|t| t.as_slice()),
        )
        .unwrap();
        // Entries among {1} ∪ r_i appear only through the cliques; every
        // other pattern edge is used by some constraint.
        for (a, b) in agg.edges() {
            assert!(sdp.problem.pattern.graph().has_edge(a, b));
        }
        for (a, b) in sdp.problem.pattern.graph().edges() {
            let normal_part = 0..=sdp.lift.num_subspaces * sdp.lift.dim;
            let within_normal = normal_part.contains(&a) && normal_part.contains(&b);
            assert!(agg.has_edge(a, b) || within_normal, "({a},{b})");
        }
    }

    #[test]
    fn ground_truth_is_feasible_and_sign_symmetric() {
        let inst = gen_ssc(3, 15, 3, 0.05, 8).unwrap();
        let sdp = build_ssc_sdp(&inst).unwrap();
        let x = ground_truth_lift(&sdp, &inst);
        assert!(satisfied(&constraint_values(&sdp, &x), 1e-12));

        let flipped = SscInstance {
            normals: inst.normals.iter().map(|r| r.iter().map(|v| -v).collect()).collect(),
            ..inst.clone()
        };
        let xf = ground_truth_lift(&sdp, &flipped);
        assert!(satisfied(&constraint_values(&sdp, &xf), 1e-12));

        for (lift, truth) in [(&x, &inst), (&xf, &flipped)] {
            let est = extract_ssc(lift, &normal_blocks_from(lift, &sdp.lift), &sdp.lift);
            assert_eq!(est.labels, inst.labels);
            for (r, t) in est.normals.iter().zip(&truth.normals) {
                assert!(line_angle_deg(r.as_ref().unwrap(), t) < 1e-6);
            }
        }
    }

    #[test]
    fn noisy_data_violates_exact_orthogonality() {
        let inst = gen_ssc(2, 10, 3, 0.1, 4).unwrap();
        let strict = SscInstance { eps: 0.0, ..inst.clone() };
        let sdp = build_ssc_sdp(&strict).unwrap();
        let x = ground_truth_lift(&sdp, &strict);
        assert!(!satisfied(&constraint_values(&sdp, &x), 1e-12));
        let loose = build_ssc_sdp(&SscInstance { eps: 0.2, ..inst.clone() }).unwrap();
        assert!(satisfied(&constraint_values(&loose, &ground_truth_lift(&loose, &inst)), 1e-12));
    }

    #[test]
    fn accuracy_examples() {
        let t = vec![0, 0, 1, 1, 2, 2];
        assert_eq!(clustering_accuracy(&t, &t), 1.0);
        let relabeled: Vec<usize> = t.iter().map(|&l| (l + 1) % 3).collect();
        assert_eq!(clustering_accuracy(&relabeled, &t), 1.0);
        let truth = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let half = vec![0, 0, 1, 1, 0, 0, 1, 1];
        assert_eq!(clustering_accuracy(&half, &truth), 0.5);
    }

    #[test]
    fn degenerate_block_is_skipped() {
        let inst = gen_ssc(1, 2, 2, 0.0, 0).unwrap();
        let sdp = build_ssc_sdp(&inst).unwrap();
        let x = ground_truth_lift(&sdp, &inst);
        let est = extract_ssc(&x, &[DenseSym::diag(&[0.0, 1.0, 0.0])], &sdp.lift);
        assert_eq!(est.normals, vec![None]);
    }
}
