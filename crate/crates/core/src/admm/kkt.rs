//! KKT system of the affine step, solved by block elimination.
//!
//! ```text
//! [ D  Aᵀ ] [ x ]   [ r ]
//! [ A  0  ] [ ω ] = [ b ]
//! ```
//!
//! `D` is the clique coverage diagonal (one extra unit entry per inequality
//! slack), so `ω` comes from the Schur complement `A D⁻¹ Aᵀ`, factored once.
//! Neither `D` nor `A` depends on ρ, so the factor survives penalty updates
//! and cost changes.

use crate::linalg::Cholesky;
use crate::problem::{DecomposedProblem, Sense};

#[derive(Debug, Clone)]
pub struct KktFactor {
    rows: Vec<Vec<(usize, f64)>>,
    /// Slack index of each row, if it is an inequality.
    slack_of_row: Vec<Option<usize>>,
    b: Vec<f64>,
    d_inv: Vec<f64>,
    schur: Cholesky,
}

impl KktFactor {
    pub fn new(d: &DecomposedProblem) -> Self {
        let m = d.rows.len();
        let n_x = d.pattern.len();
        let d_inv: Vec<f64> = d.coverage.iter().map(|&c| 1.0 / c).collect();
        let mut slack_of_row = Vec::with_capacity(m);
        let mut next_slack = 0;
        for r in &d.rows {
            slack_of_row.push(match r.sense {
                Sense::Le => {
                    next_slack += 1;
                    Some(next_slack - 1)
                }
                Sense::Eq => None,
            });
        }

        let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_x];
        for (i, r) in d.rows.iter().enumerate() {
            for &(k, v) in &r.coeffs {
                columns[k].push((i, v));
            }
        }
        let mut s = vec![0.0; m * m];
        for (k, col) in columns.iter().enumerate() {
            for &(i, vi) in col {
                for &(j, vj) in col {
                    s[i * m + j] += vi * vj * d_inv[k];
                }
            }
        }
        for (i, slack) in slack_of_row.iter().enumerate() {
            if slack.is_some() {
                s[i * m + i] += 1.0;
            }
        }
        Self {
            rows: d.rows.iter().map(|r| r.coeffs.clone()).collect(),
            slack_of_row,
            b: d.rows.iter().map(|r| r.b).collect(),
            d_inv,
            schur: Cholesky::factor(m, &s),
        }
    }

    /// True when the Schur complement was rank deficient (redundant or
    /// inconsistent constraints) and had to be regularized.
    pub fn regularized(&self) -> bool {
        self.schur.regularized
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Solves for `(x, slacks)` given right-hand sides `r_x`, `r_s`.
    pub fn solve(&self, r_x: &[f64], r_s: &[f64], x: &mut [f64], slacks: &mut [f64]) {
        let m = self.rows.len();
        let mut w = vec![0.0; m];
        for i in 0..m {
            let mut acc: f64 = self.rows[i]
                .iter()
                .map(|&(k, v)| v * r_x[k] * self.d_inv[k])
                .sum();
            if let Some(s) = self.slack_of_row[i] {
                acc += r_s[s];
            }
            w[i] = acc - self.b[i];
        }
        self.schur.solve_in_place(&mut w);

        x.copy_from_slice(r_x);
        slacks.copy_from_slice(r_s);
        for i in 0..m {
            let wi = w[i];
            if wi == 0.0 {
                continue;
            }
            for &(k, v) in &self.rows[i] {
                x[k] -= v * wi;
            }
            if let Some(s) = self.slack_of_row[i] {
                slacks[s] -= wi;
            }
        }
        for (xk, dk) in x.iter_mut().zip(&self.d_inv) {
            *xk *= dk;
        }
    }

    /// `max_i |(A x + s)_i - b_i|`.
    pub fn residual_inf(&self, x: &[f64], slacks: &[f64]) -> f64 {
        (0..self.rows.len())
            .map(|i| {
                let mut v: f64 = self.rows[i].iter().map(|&(k, a)| a * x[k]).sum();
                if let Some(s) = self.slack_of_row[i] {
                    v += slacks[s];
                }
                (v - self.b[i]).abs()
            })
            .fold(0.0, f64::max)
    }
}
