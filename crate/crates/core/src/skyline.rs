//! Envelope (skyline) `L D L^T` factorization for complex-symmetric systems.
//!
//! Helmholtz matrices with an impedance boundary satisfy `A = A^T` (not
//! Hermitian), so the symmetric factorization needs no conjugation. Rows are
//! renumbered with reverse Cuthill-McKee to keep the envelope narrow. No
//! pivoting is performed; a vanishing pivot is reported as an error.

use std::cell::Cell;
use std::collections::VecDeque;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{czero, Real};
use crate::sparse::{CsrMatrix, CsrPattern};

/// Pivots smaller than this multiple of the largest diagonal are rejected.
const PIVOT_TOLERANCE: f64 = 1e-13;

/// Relative residual after which one step of iterative refinement is taken.
const REFINE_ABOVE: f64 = 1e-12;

/// Residual contract of [`SkylineLdlt::solve_checked`] in double precision
/// (see [`Real::solve_tolerance`]).
pub const SOLVE_RESIDUAL_TOLERANCE: f64 = 1e-9;

thread_local! {
    static FACTORIZATIONS: Cell<usize> = const { Cell::new(0) };
}

/// Number of factorizations performed on the current thread.
pub fn factorizations_on_this_thread() -> usize {
    FACTORIZATIONS.with(|c| c.get())
}

/// Reverse Cuthill-McKee ordering: `perm[new] = old`.
pub fn reverse_cuthill_mckee(pattern: &CsrPattern) -> Vec<usize> {
    let n = pattern.dim();
    let degree: Vec<usize> = (0..n).map(|i| pattern.row(i).len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_last = |start: usize| -> (usize, usize) {
        // returns (last node reached, eccentricity)
        let mut level = vec![usize::MAX; n];
        let mut queue = VecDeque::from([start]);
        level[start] = 0;
        let mut last = start;
        while let Some(v) = queue.pop_front() {
            last = v;
            for &w in pattern.row(v) {
                if level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        (last, level[last])
    };

    while order.len() < n {
        let seed = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| (degree[i], i)).expect("unvisited node");
        // pseudo-peripheral start node
        let mut start = seed;
        let (mut far, mut ecc) = bfs_last(start);
        for _ in 0..4 {
            let (f2, e2) = bfs_last(far);
            if e2 <= ecc {
                break;
            }
            start = far;
            far = f2;
            ecc = e2;
        }
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = pattern.row(v).iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Factorization `P A P^T = L D L^T` stored row-wise over the envelope.
#[derive(Debug, Clone)]
pub struct SkylineLdlt<T> {
    n: usize,
    perm: Vec<usize>,
    inv_perm: Vec<usize>,
    /// first column of each (permuted) row's envelope
    first: Vec<usize>,
    /// offset of row `i`'s envelope in `lower`
    offset: Vec<usize>,
    /// strictly lower envelope of `L`, row by row
    lower: Vec<Complex<T>>,
    diag: Vec<Complex<T>>,
    matrix: CsrMatrix<Complex<T>>,
}

impl<T: Real> SkylineLdlt<T> {
    /// Factors a complex-symmetric matrix. Only the lower triangle is read.
    pub fn factor(a: &CsrMatrix<Complex<T>>) -> Result<Self> {
        let n = a.dim();
        let pattern = a.pattern();
        let perm = reverse_cuthill_mckee(pattern);
        let mut inv_perm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv_perm[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (i, f) in first.iter_mut().enumerate() {
            for &c in pattern.row(perm[i]) {
                *f = (*f).min(inv_perm[c]);
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + (i - first[i]));
        }
        let mut lower = vec![czero::<T>(); offset[n]];
        let mut diag = vec![czero::<T>(); n];
        for i in 0..n {
            let old = perm[i];
            for (k, &c) in pattern.row_range(old).zip(pattern.row(old)) {
                let j = inv_perm[c];
                let v = a.values()[k];
                if j == i {
                    diag[i] = v;
                } else if j < i {
                    lower[offset[i] + (j - first[i])] = v;
                }
            }
        }
        let scale = diag.iter().map(|d| d.norm()).fold(T::zero(), T::max).max(T::min_positive_value());
        let tol = scale * T::lit(PIVOT_TOLERANCE);

        // Row-oriented envelope LDL^T. For row i and j < i:
        //   t_j = a_ij - sum_{k < j} t_k L_jk,   L_ij = t_j / d_j,
        //   d_i = a_ii - sum_{k < i} t_k L_ik.
        for i in 0..n {
            let fi = first[i];
            let (done, rest) = lower.split_at_mut(offset[i]);
            let row_i = &mut rest[..i - fi];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let row_j = &done[offset[j]..offset[j] + (j - fj)];
                let mut s = row_i[j - fi];
                for k in lo..j {
                    s -= row_i[k - fi] * row_j[k - fj];
                }
                row_i[j - fi] = s;
            }
            let mut d = diag[i];
            for j in fi..i {
                let t = row_i[j - fi];
                let l = t / diag[j];
                d -= t * l;
                row_i[j - fi] = l;
            }
            if !(d.norm() > tol) || !d.re.is_finite() || !d.im.is_finite() {
                return Err(Error::SingularPivot {
                    index: perm[i],
                    magnitude: d.norm().to_f64_lossy(),
                    scale: scale.to_f64_lossy(),
                });
            }
            diag[i] = d;
        }
        FACTORIZATIONS.with(|c| c.set(c.get() + 1));
        Ok(SkylineLdlt { n, perm, inv_perm, first, offset, lower, diag, matrix: a.clone() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// The factored matrix, in the original numbering.
    pub fn matrix(&self) -> &CsrMatrix<Complex<T>> {
        &self.matrix
    }

    /// Number of stored off-diagonal envelope entries.
    pub fn envelope_size(&self) -> usize {
        self.lower.len()
    }

    fn solve_once(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.n;
        let mut y: Vec<Complex<T>> = (0..n).map(|i| b[self.perm[i]]).collect();
        // L y = b
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.offset[i]..self.offset[i + 1]];
            let mut s = y[i];
            for (k, l) in row.iter().enumerate() {
                s -= *l * y[fi + k];
            }
            y[i] = s;
        }
        for (yi, d) in y.iter_mut().zip(&self.diag) {
            *yi /= *d;
        }
        // L^T x = y
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = y[i];
            let row = &self.lower[self.offset[i]..self.offset[i + 1]];
            for (k, l) in row.iter().enumerate() {
                y[fi + k] -= *l * xi;
            }
        }
        (0..n).map(|old| y[self.inv_perm[old]]).collect()
    }

    /// Solves `A x = b`, with one step of iterative refinement when the
    /// first residual is not already at round-off level.
    pub fn solve(&self, b: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if b.len() != self.n {
            return Err(Error::Dimension { expected: self.n, got: b.len() });
        }
        let bnorm = norm2(b);
        if bnorm == T::zero() {
            return Ok(vec![czero(); self.n]);
        }
        let mut x = self.solve_once(b);
        let r = self.residual(&x, b)?;
        if norm2(&r) > bnorm * T::lit(REFINE_ABOVE) {
            let dx = self.solve_once(&r);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        Ok(x)
    }

    /// Like [`solve`](Self::solve) but fails when the relative residual
    /// exceeds [`Real::solve_tolerance`].
    pub fn solve_checked(&self, b: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let x = self.solve(b)?;
        let rel = relative_residual(&self.matrix, &x, b)?;
        if rel > T::solve_tolerance() {
            return Err(Error::Residual(rel.to_f64_lossy()));
        }
        Ok(x)
    }

    fn residual(&self, x: &[Complex<T>], b: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let ax = self.matrix.mul_vec(x)?;
        Ok(b.iter().zip(ax).map(|(bi, ai)| *bi - ai).collect())
    }
}

pub(crate) fn norm2<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// `||A x - b|| / ||b||` (zero when `b = 0` and `x = 0`).
pub fn relative_residual<T: Real>(a: &CsrMatrix<Complex<T>>, x: &[Complex<T>], b: &[Complex<T>]) -> Result<T> {
    let ax = a.mul_vec(x)?;
    let r: T = ax.iter().zip(b).map(|(p, q)| (*p - *q).norm_sqr()).sum::<T>().sqrt();
    let bn = norm2(b);
    Ok(if bn == T::zero() { r } else { r / bn })
}

/// Solves `A x = b` with a fresh factorization.
pub fn solve<T: Real>(a: &CsrMatrix<Complex<T>>, b: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    SkylineLdlt::factor(a)?.solve_checked(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let a = CsrMatrix::identity(4, c(1.0, 0.0));
        let b = vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, 0.0), c(7.0, -1.0)];
        assert_eq!(solve(&a, &b).unwrap(), b);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = CsrMatrix::identity(3, c(2.0, 1.0));
        assert_eq!(solve(&a, &[c(0.0, 0.0); 3]).unwrap(), vec![c(0.0, 0.0); 3]);
    }

    #[test]
    fn zero_pivot_is_reported() {
        let mut a = CsrMatrix::zeros(Arc::new(CsrPattern::identity(3)));
        a.add_at(0, 0, c(1.0, 0.0));
        a.add_at(2, 2, c(1.0, 0.0));
        match SkylineLdlt::factor(&a) {
            Err(Error::SingularPivot { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected singular pivot, got {other:?}"),
        }
    }

    #[test]
    fn rcm_is_a_permutation() {
        let pattern = CsrPattern::identity(5);
        let mut p = reverse_cuthill_mckee(&pattern);
        p.sort_unstable();
        assert_eq!(p, (0..5).collect::<Vec<_>>());
    }

    /// Dense complex-symmetric tridiagonal-plus-corner system solved against
    /// a dense LU oracle.
    fn dense_oracle(n: usize, diag: &[Complex<f64>], off: &[Complex<f64>], b: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let mut m = nalgebra::DMatrix::<nalgebra::Complex<f64>>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = off[i];
                m[(i + 1, i)] = off[i];
            }
        }
        m[(0, n - 1)] = off[n - 1];
        m[(n - 1, 0)] = off[n - 1];
        let rhs = nalgebra::DVector::from_column_slice(b);
        m.lu().solve(&rhs).unwrap().iter().copied().collect()
    }

    proptest! {
        #[test]
        fn matches_dense_lu(
            raw in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 3..30)
        ) {
            let n = raw.len();
            let diag: Vec<_> = raw.iter().map(|r| c(4.0 + r.0, 0.5 + r.1)).collect();
            let off: Vec<_> = raw.iter().map(|r| c(r.2, r.3)).collect();
            let b: Vec<_> = raw.iter().map(|r| c(r.4, r.5)).collect();
            let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
            for i in 0..n {
                let j = (i + 1) % n;
                rows[i].push(j);
                rows[j].push(i);
            }
            let pattern = Arc::new(CsrPattern::from_rows(rows));
            let mut a = CsrMatrix::zeros(pattern);
            for i in 0..n {
                a.add_at(i, i, diag[i]);
                let j = (i + 1) % n;
                if j != i {
                    let v = if i + 1 < n { off[i] } else { off[n - 1] };
                    a.add_at(i, j, v);
                    a.add_at(j, i, v);
                }
            }
            let x = solve(&a, &b).unwrap();
            let expect = dense_oracle(n, &diag, &off, &b);
            for (p, q) in x.iter().zip(&expect) {
                prop_assert!((p - q).norm() < 1e-10);
            }
        }
    }
}
