//! Compressed sparse row storage shared by all assembled operators.

use std::ops::{Add, Mul};
use std::sync::Arc;

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::scalar::Real;

/// Sparsity pattern with sorted column indices in every row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrPattern {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
}

impl CsrPattern {
    /// Vertex adjacency (including the diagonal) of a triangulation.
    pub fn from_mesh<T: Real>(mesh: &Mesh<T>) -> Self {
        let n = mesh.num_vertices();
        let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for tri in mesh.triangles() {
            for &a in tri {
                for &b in tri {
                    if a != b {
                        rows[a].push(b);
                    }
                }
            }
        }
        Self::from_rows(rows)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows((0..n).map(|i| vec![i]).collect())
    }

    pub(crate) fn from_rows(mut rows: Vec<Vec<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
            cols.extend_from_slice(r);
            row_ptr.push(cols.len());
        }
        CsrPattern { n: rows.len(), row_ptr, cols }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    /// Position of `(i, j)` in the value array.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.row(i).binary_search(&j).ok().map(|k| start + k)
    }
}

/// Square sparse matrix over `S` (real or complex).
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<S> {
    pattern: Arc<CsrPattern>,
    values: Vec<S>,
}

pub type SparseRealMatrix<T> = CsrMatrix<T>;
pub type SparseComplexMatrix<T> = CsrMatrix<Complex<T>>;

impl<S> CsrMatrix<S>
where
    S: Copy + Zero + Add<Output = S> + Mul<Output = S>,
{
    pub fn zeros(pattern: Arc<CsrPattern>) -> Self {
        let values = vec![S::zero(); pattern.nnz()];
        CsrMatrix { pattern, values }
    }

    pub fn from_values(pattern: Arc<CsrPattern>, values: Vec<S>) -> Result<Self> {
        if values.len() != pattern.nnz() {
            return Err(Error::Dimension { expected: pattern.nnz(), got: values.len() });
        }
        Ok(CsrMatrix { pattern, values })
    }

    pub fn identity(n: usize, one: S) -> Self {
        CsrMatrix { pattern: Arc::new(CsrPattern::identity(n)), values: vec![one; n] }
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.pattern.find(i, j).map_or(S::zero(), |k| self.values[k])
    }

    /// Adds `v` at `(i, j)`; the entry must be in the pattern.
    pub fn add_at(&mut self, i: usize, j: usize, v: S) {
        let k = self.pattern.find(i, j).unwrap_or_else(|| panic!("entry ({i}, {j}) outside sparsity pattern"));
        self.values[k] = self.values[k] + v;
    }

    /// `y = A x` for any value type `V` that can be scaled by `S`.
    pub fn mul_vec<V>(&self, x: &[V]) -> Result<Vec<V>>
    where
        V: Copy + Zero + Add<Output = V> + Mul<S, Output = V>,
    {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        Ok((0..self.dim())
            .map(|i| self.pattern.row_range(i).fold(V::zero(), |acc, k| acc + x[self.pattern.cols[k]] * self.values[k]))
            .collect())
    }

    /// Entrywise `a * self + b * other` over a shared pattern.
    pub fn combine<R>(&self, a: R, other: &CsrMatrix<S>, b: R) -> CsrMatrix<R>
    where
        R: Copy + Zero + Add<Output = R> + Mul<S, Output = R>,
    {
        assert!(Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern);
        let values = self.values.iter().zip(&other.values).map(|(&x, &y)| a * x + b * y).collect();
        CsrMatrix { pattern: Arc::clone(&self.pattern), values }
    }

    pub fn map<R, F: Fn(S) -> R>(&self, f: F) -> CsrMatrix<R> {
        CsrMatrix { pattern: Arc::clone(&self.pattern), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Entries `(i, j, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, S)> + '_ {
        (0..self.dim())
            .flat_map(move |i| self.pattern.row_range(i).map(move |k| (i, self.pattern.cols[k], self.values[k])))
    }
}

impl<T: Real> CsrMatrix<T> {
    pub fn to_complex(&self) -> CsrMatrix<Complex<T>> {
        self.map(|v| Complex::new(v, T::zero()))
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.dim()).map(|i| self.pattern.row_range(i).map(|k| self.values[k]).sum()).collect()
    }
}

impl<T: Real> CsrMatrix<Complex<T>> {
    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }
}
