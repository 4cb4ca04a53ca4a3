//! Pattern-restricted symmetric matrices and clique selectors.
//!
//! A [`PatternVec`] stores one value per entry `(i, j)`, `i <= j`, of a
//! sparsity pattern with the diagonal always included. Off-diagonal values
//! are scaled by √2 so the plain dot product of two vectors equals the trace
//! inner product of the symmetric matrices they represent, and selecting a
//! clique block is a 0/1 row selection with orthonormal rows.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use crate::chordal::{Clique, Graph};
use crate::error::{Error, Result};

/// Symmetric matrix entries `(i, j, value)`. Either triangle may be given;
/// duplicates are summed.
pub type SymTriplets = Vec<(usize, usize, f64)>;

/// Canonical entry layout of a sparsity pattern (diagonal implicit).
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    graph: Graph,
    entries: Vec<(usize, usize)>,
    row_start: Vec<usize>,
}

impl Pattern {
    pub fn new(graph: Graph) -> Arc<Self> {
        let n = graph.n();
        let mut entries = Vec::with_capacity(n + graph.num_edges());
        let mut row_start = Vec::with_capacity(n + 1);
        for i in 0..n {
            row_start.push(entries.len());
            entries.push((i, i));
            entries.extend(graph.neighbors(i).range(i + 1..).map(|&j| (i, j)));
        }
        row_start.push(entries.len());
        Arc::new(Self {
            graph,
            entries,
            row_start,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    /// Position of entry `(i, j)` (either order) in the canonical layout.
    pub fn index(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if j >= self.n() {
            return None;
        }
        let row = &self.entries[self.row_start[i]..self.row_start[i + 1]];
        row.binary_search_by_key(&j, |&(_, c)| c)
            .ok()
            .map(|k| self.row_start[i] + k)
    }
}

/// Scale applied to a stored entry: 1 on the diagonal, √2 off it.
#[inline]
fn entry_scale(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        SQRT_2
    }
}

/// Half-vectorized symmetric matrix on a pattern.
#[derive(Debug, Clone)]
pub struct PatternVec {
    pattern: Arc<Pattern>,
    values: Vec<f64>,
}

impl PatternVec {
    pub fn zeros(pattern: &Arc<Pattern>) -> Self {
        Self {
            pattern: Arc::clone(pattern),
            values: vec![0.0; pattern.len()],
        }
    }

    /// Wraps already-scaled values.
    pub fn from_scaled(pattern: &Arc<Pattern>, values: Vec<f64>) -> Result<Self> {
        if values.len() != pattern.len() {
            return Err(Error::DimensionMismatch {
                expected: pattern.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            pattern: Arc::clone(pattern),
            values,
        })
    }

    pub fn from_triplets(pattern: &Arc<Pattern>, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut out = Self::zeros(pattern);
        for &(i, j, v) in triplets {
            let k = pattern.index(i, j).ok_or(Error::EntryNotInPattern { i, j })?;
            out.values[k] += v * entry_scale(i, j);
        }
        Ok(out)
    }

    /// Projects a dense symmetric matrix onto the pattern.
    pub fn from_dense(pattern: &Arc<Pattern>, m: &DenseSym) -> Self {
        let values = pattern
            .entries()
            .iter()
            .map(|&(i, j)| m.get(i, j) * entry_scale(i, j))
            .collect();
        Self {
            pattern: Arc::clone(pattern),
            values,
        }
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    /// Stored (scaled) values in canonical order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Unscaled matrix entry; zero outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern
            .index(i, j)
            .map_or(0.0, |k| self.values[k] / entry_scale(i, j))
    }

    /// Unscaled upper-triangle entries, pattern order.
    pub fn to_triplets(&self) -> SymTriplets {
        self.pattern
            .entries()
            .iter()
            .zip(&self.values)
            .map(|(&(i, j), &v)| (i, j, v / entry_scale(i, j)))
            .collect()
    }

    /// Dense matrix with zeros outside the pattern.
    pub fn to_dense(&self) -> DenseSym {
        let mut m = DenseSym::zeros(self.pattern.n());
        for (&(i, j), &v) in self.pattern.entries().iter().zip(&self.values) {
            m.set(i, j, v / entry_scale(i, j));
        }
        m
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn same_pattern(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        if !self.same_pattern(other) {
            return Err(Error::PatternMismatch);
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    /// Indices of entries with a nonzero stored value.
    pub fn support(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&k| self.values[k] != 0.0).collect()
    }
}

/// Trace inner product ⟨A, B⟩ of two pattern vectors.
pub fn inner(a: &PatternVec, b: &PatternVec) -> Result<f64> {
    if !a.same_pattern(b) {
        return Err(Error::PatternMismatch);
    }
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum())
}

/// Union of the off-diagonal supports of the cost and constraint matrices.
pub fn aggregate_pattern<'a>(
    n: usize,
    cost: &[(usize, usize, f64)],
    constraints: impl IntoIterator<Item = &'a [(usize, usize, f64)]>,
) -> Result<Graph> {
    let mut g = Graph::new(n);
    let mut add = |trips: &[(usize, usize, f64)]| -> Result<()> {
        for &(i, j, v) in trips {
            if i >= n || j >= n {
                return Err(Error::VertexOutOfRange { vertex: i.max(j), n });
            }
            if v != 0.0 {
                g.add_edge(i, j)?;
            }
        }
        Ok(())
    };
    add(cost)?;
    for c in constraints {
        add(c)?;
    }
    Ok(g)
}

/// Dense symmetric matrix, full row-major storage mirrored on write.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSym {
    d: usize,
    data: Vec<f64>,
}

impl DenseSym {
    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            data: vec![0.0; d * d],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.data[i * d + i] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Symmetric matrix from the upper triangle of `f(i, j)`, `i <= j`.
    pub fn from_fn(d: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            for j in i..d {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// From full row-major data; symmetrized as (M + Mᵀ)/2.
    pub fn from_row_major(d: usize, data: &[f64]) -> Result<Self> {
        if data.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: data.len(),
            });
        }
        Ok(Self::from_fn(d, |i, j| 0.5 * (data[i * d + j] + data[j * d + i])))
    }

    /// `F Fᵀ` for a row-major `d × r` factor.
    pub fn gram(d: usize, r: usize, factor: &[f64]) -> Self {
        Self::from_fn(d, |i, j| {
            (0..r).map(|c| factor[i * r + c] * factor[j * r + c]).sum()
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.d + j] = v;
        self.data[j * self.d + i] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &DenseSym) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.d).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, alpha: f64) -> DenseSym {
        DenseSym {
            d: self.d,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn sub(&self, other: &DenseSym) -> DenseSym {
        DenseSym {
            d: self.d,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add_scaled(&mut self, alpha: f64, other: &DenseSym) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    /// Principal submatrix on local indices `idx`.
    pub fn principal(&self, idx: &[usize]) -> DenseSym {
        DenseSym::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }
}

/// Entry selector `H_k` of one clique: local half-vector position `t` maps
/// to global pattern entry `rows[t]`.
#[derive(Debug, Clone)]
pub struct SelectorMap {
    clique: Clique,
    rows: Vec<usize>,
}

impl SelectorMap {
    pub fn clique(&self) -> &Clique {
        &self.clique
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn dim(&self) -> usize {
        self.clique.len()
    }

    /// `H x`: scaled half-vector of the clique block.
    pub fn gather(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|&k| x[k]).collect()
    }
}

/// Builds the selector of `clique` over `pattern`.
pub fn selector(clique: &Clique, pattern: &Pattern) -> Result<SelectorMap> {
    let vs = clique.vertices();
    let mut rows = Vec::with_capacity(vs.len() * (vs.len() + 1) / 2);
    for (a, &i) in vs.iter().enumerate() {
        for &j in &vs[a..] {
            rows.push(pattern.index(i, j).ok_or(Error::EntryNotInPattern { i, j })?);
        }
    }
    Ok(SelectorMap {
        clique: clique.clone(),
        rows,
    })
}

/// Dense clique block `E_C X E_Cᵀ` with the √2 scaling undone.
pub fn extract_block(x: &PatternVec, s: &SelectorMap) -> DenseSym {
    block_from_scaled(x.values(), s)
}

/// Dense clique block read from raw scaled global values.
pub fn block_from_scaled(x: &[f64], s: &SelectorMap) -> DenseSym {
    let d = s.dim();
    let mut m = DenseSym::zeros(d);
    let mut t = 0;
    for a in 0..d {
        for b in a..d {
            m.set(a, b, x[s.rows[t]] / entry_scale(a, b));
            t += 1;
        }
    }
    m
}

/// `accum += Hᵀ vec(block)`.
pub fn scatter_add(block: &DenseSym, s: &SelectorMap, accum: &mut PatternVec) -> Result<()> {
    if block.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: block.dim(),
        });
    }
    scatter_add_scaled(block, s, accum.values_mut(), 1.0);
    Ok(())
}

/// `accum += alpha · Hᵀ vec(block)` on raw scaled global values.
pub fn scatter_add_scaled(block: &DenseSym, s: &SelectorMap, accum: &mut [f64], alpha: f64) {
    let d = s.dim();
    let mut t = 0;
    for a in 0..d {
        for b in a..d {
            accum[s.rows[t]] += alpha * block.get(a, b) * entry_scale(a, b);
            t += 1;
        }
    }
}

/// Diagonal of `Σ_k H_kᵀ H_k`: how many selectors cover each entry.
pub fn coverage(selectors: &[SelectorMap], len: usize) -> Vec<f64> {
    let mut d = vec![0.0; len];
    for s in selectors {
        for &k in s.rows() {
            d[k] += 1.0;
        }
    }
    d
}
