//! Small dense kernels: cyclic Jacobi eigensolver, PSD projection and a
//! Cholesky factorization with rank-deficiency detection.

use crate::symsparse::DenseSym;

const MAX_SWEEPS: usize = 64;

/// Eigendecomposition `A = V diag(λ) Vᵀ`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Row-major `d × d`; column `k` is the eigenvector of `values[k]`.
    pub vectors: Vec<f64>,
}

impl SymEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn vector_entry(&self, row: usize, k: usize) -> f64 {
        self.vectors[row * self.dim() + k]
    }

    pub fn max_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn min_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// `V diag(f(λ)) Vᵀ`.
    pub fn reconstruct(&self, mut f: impl FnMut(f64) -> f64) -> DenseSym {
        let d = self.dim();
        let mapped: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        DenseSym::from_fn(d, |i, j| {
            (0..d)
                .filter(|&k| mapped[k] != 0.0)
                .map(|k| mapped[k] * self.vector_entry(i, k) * self.vector_entry(j, k))
                .sum()
        })
    }
}

/// Cyclic Jacobi with row-by-row sweep order.
pub fn sym_eigen(m: &DenseSym) -> SymEigen {
    let d = m.dim();
    let mut a = m.data().to_vec();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let fro = m.frobenius_norm();
    let floor = 1e-300_f64.max(fro * 1e-30);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                if apq.abs() <= floor || apq.abs() <= f64::EPSILON * (app.abs() * aqq.abs()).sqrt() {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                a[p * d + q] = 0.0;
                a[q * d + p] = 0.0;
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&x, &y| a[x * d + x].total_cmp(&a[y * d + y]).then(x.cmp(&y)));
    let values = idx.iter().map(|&k| a[k * d + k]).collect();
    let mut vectors = vec![0.0; d * d];
    for (new, &old) in idx.iter().enumerate() {
        for r in 0..d {
            vectors[r * d + new] = v[r * d + old];
        }
    }
    SymEigen { values, vectors }
}

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues clipped to 0.
/// Also returns the eigenvalues of the input.
pub fn project_psd(m: &DenseSym) -> (DenseSym, Vec<f64>) {
    let eig = sym_eigen(m);
    let p = eig.reconstruct(|l| l.max(0.0));
    (p, eig.values)
}

/// Number of eigenvalues above `rel_tol · max(λ_max, rel_tol)`.
pub fn rank_from_eigenvalues(values: &[f64], rel_tol: f64) -> usize {
    let lmax = values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    if !lmax.is_finite() {
        return 0;
    }
    let thr = rel_tol * lmax.max(rel_tol);
    values.iter().filter(|&&v| v > thr).count()
}

/// Dense lower Cholesky factor of a symmetric positive (semi)definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
    lt: Vec<f64>,
    /// Set when a pivot fell below the deficiency threshold and the matrix
    /// was regularized.
    pub regularized: bool,
}

impl Cholesky {
    /// Factors `m` (row-major `n × n`). A pivot below `1e-12 · max diag`
    /// marks the matrix rank deficient; the factorization is then redone on
    /// `m + 1e-10 · max(1, max diag) · I`.
    pub fn factor(n: usize, m: &[f64]) -> Self {
        let max_diag = (0..n).fold(0.0_f64, |acc, i| acc.max(m[i * n + i].abs()));
        match Self::try_factor(n, m, 0.0, 1e-12 * max_diag.max(f64::MIN_POSITIVE)) {
            Some(l) => Self::from_lower(n, l, false),
            None => {
                let shift = 1e-10 * max_diag.max(1.0);
                let l = Self::try_factor(n, m, shift, 0.0)
                    .or_else(|| Self::try_factor(n, m, shift, f64::NEG_INFINITY))
                    .expect("shifted factorization with clamped pivots");
                Self::from_lower(n, l, true)
            }
        }
    }

    fn from_lower(n: usize, l: Vec<f64>, regularized: bool) -> Self {
        let mut lt = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                lt[j * n + i] = l[i * n + j];
            }
        }
        Self {
            n,
            l,
            lt,
            regularized,
        }
    }

    fn try_factor(n: usize, m: &[f64], shift: f64, min_pivot: f64) -> Option<Vec<f64>> {
        let clamp = min_pivot == f64::NEG_INFINITY;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = m[j * n + j] + shift;
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if clamp {
                d = d.max(shift.max(f64::MIN_POSITIVE));
            } else if !(d > min_pivot) {
                return None;
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in j + 1..n {
                let mut s = m[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Some(l)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `L Lᵀ y = rhs` in place.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&rhs[..i]).map(|(a, b)| a * b).sum();
            rhs[i] = (rhs[i] - s) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let row = &self.lt[i * n + i + 1..(i + 1) * n];
            let s: f64 = row.iter().zip(&rhs[i + 1..]).map(|(a, b)| a * b).sum();
            rhs[i] = (rhs[i] - s) / self.lt[i * n + i];
        }
    }
}
