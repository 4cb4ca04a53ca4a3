//! PSD-completability via clique blocks and minimum-rank PSD completion.
//!
//! The completion walks the clique tree from the root and keeps an explicit
//! factor `Y` with `X̂ = Y Yᵀ`. Each new clique block is factored as `Z Zᵀ`
//! and rotated onto the rows already placed for its separator by an
//! orthogonal Procrustes fit, so the factor width (and the rank of the
//! completion) never exceeds the largest clique-block rank.

use nalgebra::DMatrix;

use crate::chordal::{Clique, CliqueTree};
use crate::error::{Error, Result};
use crate::linalg::{rank_from_eigenvalues, sym_eigen};
use crate::symsparse::{extract_block, selector, DenseSym, PatternVec};

pub const DEFAULT_RANK_TOL: f64 = 1e-6;
pub const DEFAULT_PSD_TOL: f64 = 1e-9;

/// Count of eigenvalues above `rel_tol · max(λ_max, rel_tol)`.
pub fn numerical_rank(m: &DenseSym, rel_tol: f64) -> usize {
    rank_from_eigenvalues(&sym_eigen(m).values, rel_tol)
}

/// Per-clique outcome of the Grone test.
#[derive(Debug, Clone)]
pub struct CompletabilityReport {
    pub completable: bool,
    pub min_eigenvalues: Vec<f64>,
    pub tolerances: Vec<f64>,
}

impl CompletabilityReport {
    /// Index of the first clique block that fails.
    pub fn first_failure(&self) -> Option<usize> {
        (0..self.min_eigenvalues.len()).find(|&k| self.min_eigenvalues[k] < -self.tolerances[k])
    }
}

/// Every clique block must have minimum eigenvalue `>= -tol`; `psd_tol`
/// overrides the default `1e-9 · ‖block‖₂`.
pub fn check_completable(
    x: &PatternVec,
    cliques: &[Clique],
    psd_tol: Option<f64>,
) -> Result<CompletabilityReport> {
    let mut min_eigenvalues = Vec::with_capacity(cliques.len());
    let mut tolerances = Vec::with_capacity(cliques.len());
    for c in cliques {
        let s = selector(c, x.pattern())?;
        let eig = sym_eigen(&extract_block(x, &s));
        let norm = eig.max_value().abs().max(eig.min_value().abs());
        min_eigenvalues.push(eig.min_value());
        tolerances.push(psd_tol.unwrap_or(DEFAULT_PSD_TOL * norm));
    }
    let completable = min_eigenvalues
        .iter()
        .zip(&tolerances)
        .all(|(&l, &t)| l >= -t);
    Ok(CompletabilityReport {
        completable,
        min_eigenvalues,
        tolerances,
    })
}

/// Low-rank factor `Y` (`n × width`, row-major) of a PSD completion.
#[derive(Debug, Clone)]
pub struct CompletionFactor {
    pub n: usize,
    pub width: usize,
    pub rows: Vec<f64>,
}

impl CompletionFactor {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.width..(i + 1) * self.width]
    }

    pub fn gram(&self) -> DenseSym {
        DenseSym::gram(self.n, self.width, &self.rows)
    }
}

/// Eigenvalue-thresholded factor `Z` of a PSD block: `|C| × r`.
fn psd_factor(block: &DenseSym, rel_tol: f64) -> DMatrix<f64> {
    let eig = sym_eigen(block);
    let lmax = eig.max_value();
    let thr = rel_tol * lmax.max(rel_tol);
    let keep: Vec<usize> = (0..eig.dim()).filter(|&k| eig.values[k] > thr).collect();
    let d = block.dim();
    DMatrix::from_fn(d, keep.len(), |i, c| {
        let k = keep[c];
        eig.vector_entry(i, k) * eig.values[k].sqrt()
    })
}

/// Orthogonal polar factor `U Vᵀ` of a square `m`, via one-sided Jacobi.
/// Left singular vectors of zero singular values are completed to an
/// orthonormal basis.
fn procrustes(m: &DMatrix<f64>) -> DMatrix<f64> {
    let w = m.ncols();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(w, w);
    for _ in 0..64 {
        let mut rotated = false;
        for p in 0..w {
            for q in p + 1..w {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for r in 0..w {
                        let (xp, xq) = (mat[(r, p)], mat[(r, q)]);
                        mat[(r, p)] = c * xp - s * xq;
                        mat[(r, q)] = s * xp + c * xq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..w).map(|j| a.column(j).norm()).collect();
    let smax = norms.iter().copied().fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..w).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let mut u = DMatrix::<f64>::zeros(w, w);
    let mut filled = Vec::with_capacity(w);
    let mut candidates = order
        .iter()
        .filter(|&&j| norms[j] > w as f64 * f64::EPSILON * smax)
        .map(|&j| (j, a.column(j).into_owned()))
        .collect::<Vec<_>>();
    let kept: Vec<usize> = candidates.iter().map(|c| c.0).collect();
    let null: Vec<usize> = order.iter().copied().filter(|j| !kept.contains(j)).collect();
    let mut basis = (0..w).map(|e| {
        let mut x = nalgebra::DVector::<f64>::zeros(w);
        x[e] = 1.0;
        x
    });
    for &j in &null {
        loop {
            let x = basis.next().expect("standard basis spans the complement");
            let mut y = x.clone();
            for _ in 0..2 {
                for (_, c) in &candidates {
                    let cn = c.normalize();
                    y -= &cn * cn.dot(&y);
                }
            }
            if y.norm() > 0.5 {
                candidates.push((j, y));
                break;
            }
        }
    }
    for (j, col) in candidates {
        let mut y = col;
        for _ in 0..2 {
            for &k in &filled {
                let uk = u.column(k).into_owned();
                y -= &uk * uk.dot(&y);
            }
        }
        u.set_column(j, &y.normalize());
        filled.push(j);
    }
    u * v.transpose()
}

fn pad_columns(m: &DMatrix<f64>, width: usize) -> DMatrix<f64> {
    if m.ncols() == width {
        return m.clone();
    }
    let mut out = DMatrix::zeros(m.nrows(), width);
    out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    out
}

/// Factor of a minimum-rank PSD completion along the clique tree.
pub fn min_rank_factor(x: &PatternVec, tree: &CliqueTree, rel_tol: f64) -> Result<CompletionFactor> {
    min_rank_factor_with_tol(x, tree, rel_tol, None)
}

/// [`min_rank_factor`] with an explicit absolute PSD tolerance for the
/// completability check; eigenvalues below the rank threshold are dropped.
pub fn min_rank_factor_with_tol(
    x: &PatternVec,
    tree: &CliqueTree,
    rel_tol: f64,
    psd_tol: Option<f64>,
) -> Result<CompletionFactor> {
    let report = check_completable(x, tree.cliques(), psd_tol)?;
    if let Some(k) = report.first_failure() {
        return Err(Error::NotCompletable {
            clique: k,
            min_eig: report.min_eigenvalues[k],
        });
    }
    let n = x.pattern().n();
    let mut placed: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut width = 0usize;

    for &k in tree.bfs_order() {
        let clique = &tree.cliques()[k];
        let block = extract_block(x, &selector(clique, x.pattern())?);
        let z = psd_factor(&block, rel_tol);
        let new_width = width.max(z.ncols());
        if new_width > width {
            for row in placed.iter_mut().flatten() {
                row.resize(new_width, 0.0);
            }
            width = new_width;
        }
        let z = pad_columns(&z, width);

        let vs = clique.vertices();
        let sep: Vec<usize> = (0..vs.len()).filter(|&a| placed[vs[a]].is_some()).collect();
        let fresh: Vec<usize> = (0..vs.len()).filter(|&a| placed[vs[a]].is_none()).collect();

        // Rotation Q with Z_S Q ≈ Y_S; identity across an empty separator.
        let q = if sep.is_empty() || width == 0 {
            DMatrix::identity(width, width)
        } else {
            let z_s = DMatrix::from_fn(sep.len(), width, |r, c| z[(sep[r], c)]);
            let y_s = DMatrix::from_fn(sep.len(), width, |r, c| {
                placed[vs[sep[r]]].as_ref().expect("separator vertex is placed")[c]
            });
            procrustes(&(z_s.transpose() * y_s))
        };
        for &a in &fresh {
            let row = z.row(a) * &q;
            placed[vs[a]] = Some(row.iter().copied().collect());
        }
    }

    let mut rows = Vec::with_capacity(n * width);
    for (v, row) in placed.into_iter().enumerate() {
        match row {
            Some(r) => rows.extend(r),
            None => {
                return Err(Error::InvalidProblem(format!(
                    "vertex {v} is not covered by any clique"
                )))
            }
        }
    }
    Ok(CompletionFactor { n, width, rows })
}

/// Dense minimum-rank PSD completion `X̂ = Y Yᵀ`.
pub fn min_rank_complete(x: &PatternVec, tree: &CliqueTree, rel_tol: f64) -> Result<DenseSym> {
    Ok(min_rank_factor(x, tree, rel_tol)?.gram())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chordal::{clique_tree, Graph};
    use crate::symsparse::Pattern;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn factor_matrix(rng: &mut ChaCha8Rng, n: usize, r: usize) -> DenseSym {
        let f: Vec<f64> = (0..n * r).map(|_| StandardNormal.sample(rng)).collect();
        DenseSym::gram(n, r, &f)
    }

    fn cliques(list: &[&[usize]]) -> Vec<Clique> {
        list.iter().map(|c| Clique::new(c.to_vec()).unwrap()).collect()
    }

    /// Pattern of the 4-vertex example: cliques {1,2},{2,3},{1,4}.
    fn star_path() -> (std::sync::Arc<Pattern>, CliqueTree) {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (0, 3)]).unwrap();
        let tree = clique_tree(&cliques(&[&[0, 1], &[0, 3], &[1, 2]])).unwrap();
        (Pattern::new(g), tree)
    }

    #[test]
    fn numerical_rank_examples() {
        assert_eq!(numerical_rank(&DenseSym::diag(&[1.0, 1e-12]), 1e-6), 1);
        assert_eq!(numerical_rank(&DenseSym::zeros(3), 1e-6), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(numerical_rank(&factor_matrix(&mut rng, 6, 3), 1e-6), 3);
    }

    #[test]
    fn completability_examples() {
        let (p, tree) = star_path();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = PatternVec::from_dense(&p, &factor_matrix(&mut rng, 4, 4));
        assert!(check_completable(&x, tree.cliques(), None).unwrap().completable);

        // block [[1,2],[2,1]] on clique {1,2}: eigenvalues 3 and -1
        let path = Pattern::new(Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap());
        let x = PatternVec::from_triplets(
            &path,
            &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 1.0), (1, 2, 0.0), (2, 2, 1.0)],
        )
        .unwrap();
        let rep = check_completable(&x, &cliques(&[&[0, 1], &[1, 2]]), None).unwrap();
        assert!(!rep.completable);
        assert!((rep.min_eigenvalues[0] + 1.0).abs() < 1e-12);
        assert_eq!(rep.first_failure(), Some(0));
    }

    #[test]
    fn three_rank_two_blocks_complete_to_rank_two() {
        let (p, tree) = star_path();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        // rank-2 source: every 2x2 clique block is rank 2
        let m = factor_matrix(&mut rng, 4, 2);
        let x = PatternVec::from_dense(&p, &m);
        let rep = check_completable(&x, tree.cliques(), None).unwrap();
        assert!(rep.completable);
        for c in tree.cliques() {
            let b = extract_block(&x, &selector(c, &p).unwrap());
            assert_eq!(numerical_rank(&b, DEFAULT_RANK_TOL), 2);
        }
        let xhat = min_rank_complete(&x, &tree, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(numerical_rank(&xhat, DEFAULT_RANK_TOL), 2);
        for &(i, j) in p.entries() {
            assert!((xhat.get(i, j) - m.get(i, j)).abs() < 1e-10);
        }
    }

    #[test]
    fn separator_rank_below_block_rank() {
        // Path 1-2-3: 2x2 blocks of rank 2 meet in a single vertex. A
        // pseudo-inverse merge would give rank 3 here.
        let path = Pattern::new(Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap());
        let tree = clique_tree(&cliques(&[&[0, 1], &[1, 2]])).unwrap();
        let x = PatternVec::from_triplets(
            &path,
            &[(0, 0, 2.0), (0, 1, 0.5), (1, 1, 1.0), (1, 2, -0.3), (2, 2, 3.0)],
        )
        .unwrap();
        let xhat = min_rank_complete(&x, &tree, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(numerical_rank(&xhat, DEFAULT_RANK_TOL), 2);
        assert!(sym_eigen(&xhat).min_value() > -1e-10);
    }

    #[test]
    fn complete_pattern_is_returned_unchanged() {
        let p = Pattern::new(Graph::complete(4));
        let tree = clique_tree(&cliques(&[&[0, 1, 2, 3]])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = factor_matrix(&mut rng, 4, 4);
        m.add_scaled(0.1, &DenseSym::identity(4));
        let xhat = min_rank_complete(&PatternVec::from_dense(&p, &m), &tree, DEFAULT_RANK_TOL).unwrap();
        assert!(xhat.sub(&m).max_abs() < 1e-12 * (1.0 + m.max_abs()));
    }

    #[test]
    fn disconnected_pattern_keeps_max_rank() {
        let p = Pattern::new(Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap());
        let tree = clique_tree(&cliques(&[&[0, 1], &[2, 3]])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = factor_matrix(&mut rng, 4, 2);
        let x = PatternVec::from_dense(&p, &m);
        let xhat = min_rank_complete(&x, &tree, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(numerical_rank(&xhat, DEFAULT_RANK_TOL), 2);
        for &(i, j) in p.entries() {
            assert!((xhat.get(i, j) - m.get(i, j)).abs() < 1e-10);
        }
    }

    #[test]
    fn not_completable_is_an_error() {
        let path = Pattern::new(Graph::from_edges(2, &[(0, 1)]).unwrap());
        let tree = clique_tree(&cliques(&[&[0, 1]])).unwrap();
        let x = PatternVec::from_triplets(&path, &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 1.0)]).unwrap();
        assert!(matches!(
            min_rank_complete(&x, &tree, DEFAULT_RANK_TOL),
            Err(Error::NotCompletable { clique: 0, .. })
        ));
    }

    #[test]
    fn procrustes_aligns_rank_deficient_padded_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 1..4 {
            for w in k..6 {
                // Z has a zero trailing column; Y = Z P for an orthogonal P.
                let z = DMatrix::from_fn(k, w, |_, c| if c + 1 == w && w > k { 0.0 } else { StandardNormal.sample(&mut rng) });
                let g = DMatrix::from_fn(w, w, |_, _| StandardNormal.sample(&mut rng));
                let p = g.qr().q();
                let y = &z * &p;
                let q = procrustes(&(z.transpose() * &y));
                assert!((q.transpose() * &q - DMatrix::identity(w, w)).abs().max() < 1e-13);
                assert!((&z * &q - &y).abs().max() < 1e-12 * (1.0 + z.abs().max()), "k {k} w {w}");
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn completion_matches_entries_and_block_rank(
            seed in 0u64..u64::MAX,
            n in 2usize..9,
            r in 1usize..4,
            density in 0.1f64..0.9,
        ) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut g = Graph::new(n);
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random::<f64>() < density {
                        g.add_edge(i, j).unwrap();
                    }
                }
            }
            let (ext, tree) = crate::chordal::decompose_graph(&g);
            let p = Pattern::new(ext);
            let m = factor_matrix(&mut rng, n, r);
            let x = PatternVec::from_dense(&p, &m);
            let xhat = min_rank_complete(&x, &tree, DEFAULT_RANK_TOL).unwrap();
            for &(i, j) in p.entries() {
                proptest::prop_assert!((xhat.get(i, j) - m.get(i, j)).abs() < 1e-9 * (1.0 + m.max_abs()));
            }
            let block_rank = tree
                .cliques()
                .iter()
                .map(|c| numerical_rank(&extract_block(&x, &selector(c, &p).unwrap()), DEFAULT_RANK_TOL))
                .max()
                .unwrap();
            proptest::prop_assert_eq!(numerical_rank(&xhat, DEFAULT_RANK_TOL), block_rank);
        }
    }
}
