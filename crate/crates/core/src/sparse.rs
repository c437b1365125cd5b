//! Compressed-sparse-row matrices and a banded LU solver with partial pivoting.

use crate::error::{Error, Result};

/// Square CSR matrix. Column indices are strictly increasing within each row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, row_ptr: vec![0; n + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self { n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: diag.to_vec() }
    }

    /// Builds from per-row entry lists. Duplicate columns within a row are summed
    /// in the order given; exact zeros are kept so stencil structure is stable.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let start = col_idx.len();
            for (c, v) in row {
                debug_assert!(c < n, "column {c} out of range {n}");
                if col_idx.len() > start && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(p) => self.values[range.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// `out[i] += (self * x)[i]`, summing each row left to right.
    pub fn mul_vec_acc(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for (j, v) in self.row(i) {
                acc += v * x[j];
            }
            *o += acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_vec_acc(x, &mut out);
        out
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= a);
        m
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            for p in m.row_ptr[i]..m.row_ptr[i + 1] {
                m.values[p] *= d[i];
            }
        }
        m
    }

    /// `self * diag(d)`.
    pub fn scale_cols(&self, d: &[f64]) -> Self {
        let mut m = self.clone();
        for p in 0..m.values.len() {
            m.values[p] *= d[m.col_idx[p]];
        }
        m
    }

    pub fn add(&self, other: &Self, b: f64) -> Self {
        let rows = (0..self.n)
            .map(|i| self.row(i).chain(other.row(i).map(|(j, v)| (j, b * v))).collect())
            .collect();
        Self::from_rows(rows)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let mut acc = vec![0.0; self.n];
        let mut touched = vec![false; self.n];
        let mut rows = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let mut cols = Vec::new();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if !touched[j] {
                        touched[j] = true;
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            cols.sort_unstable();
            let row = cols
                .iter()
                .map(|&j| {
                    touched[j] = false;
                    (j, std::mem::take(&mut acc[j]))
                })
                .collect();
            rows.push(row);
        }
        Self::from_rows(rows)
    }

    pub fn transpose(&self) -> Self {
        let mut rows = vec![Vec::new(); self.n];
        for (i, j, v) in self.triplets() {
            rows[j].push((i, v));
        }
        Self::from_rows(rows)
    }

    /// `Some(a)` when the matrix equals `a * I` (including the empty matrix as `a = 0`).
    pub fn as_scalar_identity(&self) -> Option<f64> {
        let mut scalar: Option<f64> = None;
        for i in 0..self.n {
            let mut diag = 0.0;
            for (j, v) in self.row(i) {
                if j != i {
                    if v != 0.0 {
                        return None;
                    }
                } else {
                    diag = v;
                }
            }
            match scalar {
                None => scalar = Some(diag),
                Some(s) if s == diag => {}
                Some(_) => return None,
            }
        }
        Some(scalar.unwrap_or(0.0))
    }

    /// Diagonal entries when the matrix is diagonal.
    pub fn as_diagonal(&self) -> Option<Vec<f64>> {
        (0..self.n)
            .map(|i| {
                let mut d = 0.0;
                for (j, v) in self.row(i) {
                    if j == i {
                        d = v;
                    } else if v != 0.0 {
                        return None;
                    }
                }
                Some(d)
            })
            .collect()
    }

    /// Lower and upper bandwidth of the stored pattern.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for (i, j, _) in self.triplets() {
            if j < i {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        (kl, ku)
    }

    /// Replaces row `i` with the given entries.
    pub fn with_rows_replaced(&self, replacements: &[(usize, Vec<(usize, f64)>)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = (0..self.n).map(|i| self.row(i).collect()).collect();
        for (i, row) in replacements {
            rows[*i] = row.clone();
        }
        Self::from_rows(rows)
    }
}

/// LU factorisation `P A = L U` of a banded matrix, LAPACK `gbtrf` style.
///
/// Each row `i` stores columns `i - kl ..= i + kl + ku`; the extra `kl` upper
/// diagonals hold fill-in from row interchanges.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let (kl, ku) = a.bandwidth();
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            band: vec![0.0; n * width],
            lower: vec![0.0; n * kl.max(1)],
            pivots: vec![0; n],
        };
        for (i, j, v) in a.triplets() {
            *lu.entry_mut(i, j) = v;
        }
        let scale = a.triplets().map(|(_, _, v)| v.abs()).fold(0.0, f64::max);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.entry(k, k).abs();
            for i in k + 1..=last {
                let v = lu.entry(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > f64::EPSILON * scale * 1e-3) || !best.is_finite() {
                return Err(Error::Solve {
                    step: 0,
                    reason: format!("singular pivot {best:e} at column {k} (matrix scale {scale:e})"),
                });
            }
            lu.pivots[k] = p;
            let col_end = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=col_end {
                    let a_kj = lu.entry(k, j);
                    let a_pj = lu.entry(p, j);
                    *lu.entry_mut(k, j) = a_pj;
                    *lu.entry_mut(p, j) = a_kj;
                }
            }
            let pivot = lu.entry(k, k);
            for i in k + 1..=last {
                let m = lu.entry(i, k) / pivot;
                lu.lower[k * kl.max(1) + (i - k - 1)] = m;
                *lu.entry_mut(i, k) = 0.0;
                if m != 0.0 {
                    for j in k + 1..=col_end {
                        let u = lu.entry(k, j);
                        if u != 0.0 {
                            *lu.entry_mut(i, j) -= m * u;
                        }
                    }
                }
            }
        }
        Ok(lu)
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.band[self.offset(i, j)]
    }

    fn entry_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let o = self.offset(i, j);
        &mut self.band[o]
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let kl = self.kl;
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    x[i] -= self.lower[k * kl.max(1) + (i - k - 1)] * xk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + kl + self.ku).min(n - 1) {
                s -= self.entry(i, j) * x[j];
            }
            x[i] = s / self.entry(i, i);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense(m: &CsrMatrix) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; m.dim()]; m.dim()];
        for (i, j, v) in m.triplets() {
            d[i][j] = v;
        }
        d
    }

    #[test]
    fn from_rows_merges_duplicates() {
        let m = CsrMatrix::from_rows(vec![vec![(1, 2.0), (0, 1.0), (1, 3.0)], vec![]]);
        assert_eq!(m.get(0, 1), 5.0);
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn matmul_matches_dense_product() {
        let a = CsrMatrix::from_rows(vec![
            vec![(0, 1.0), (2, 2.0)],
            vec![(1, -1.0)],
            vec![(0, 3.0), (1, 4.0), (2, 5.0)],
        ]);
        let b = a.transpose();
        let c = dense(&a.matmul(&b));
        let (da, db) = (dense(&a), dense(&b));
        for i in 0..3 {
            for j in 0..3 {
                let expect: f64 = (0..3).map(|k| da[i][k] * db[k][j]).sum();
                assert_eq!(c[i][j], expect);
            }
        }
    }

    #[test]
    fn scalar_identity_detection() {
        assert_eq!(CsrMatrix::identity(4).scale(0.3).as_scalar_identity(), Some(0.3));
        assert_eq!(CsrMatrix::diagonal(&[1.0, 2.0]).as_scalar_identity(), None);
        assert_eq!(CsrMatrix::zeros(3).as_scalar_identity(), Some(0.0));
    }

    #[test]
    fn banded_lu_needs_pivoting() {
        // Leading zero forces a row interchange.
        let a = CsrMatrix::from_rows(vec![
            vec![(0, 0.0), (1, 2.0)],
            vec![(0, 1.0), (1, 1.0), (2, 1.0)],
            vec![(1, 3.0), (2, 1.0), (3, 2.0)],
            vec![(2, 1.0), (3, 4.0)],
        ]);
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let b = a.mul_vec(&x_true);
        let x = BandedLu::factor(&a).unwrap().solve(&b);
        for (u, v) in x.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = CsrMatrix::from_rows(vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0), (1, 1.0)]]);
        assert!(matches!(BandedLu::factor(&a), Err(Error::Solve { .. })));
    }

    proptest! {
        #[test]
        fn banded_solve_residual(seed in prop::collection::vec(-1.0f64..1.0, 60), kl in 1usize..4, ku in 1usize..4) {
            let n = 20;
            let rows = (0..n)
                .map(|i| {
                    let mut row = vec![(i, 4.0 + seed[i])];
                    for d in 1..=kl {
                        if i >= d { row.push((i - d, seed[(i + 3 * d) % 60])); }
                    }
                    for d in 1..=ku {
                        if i + d < n { row.push((i + d, seed[(2 * i + d) % 60])); }
                    }
                    row
                })
                .collect();
            let a = CsrMatrix::from_rows(rows);
            let b: Vec<f64> = (0..n).map(|i| seed[(i * 7) % 60]).collect();
            let x = BandedLu::factor(&a).unwrap().solve(&b);
            let r = a.mul_vec(&x);
            for (u, v) in r.iter().zip(&b) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }
    }
}
