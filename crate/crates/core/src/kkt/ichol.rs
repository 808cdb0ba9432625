//! Zero-fill incomplete Cholesky factorization.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// `A ≈ L Lᵀ` with `L` restricted to the lower-triangular pattern of `A`.
#[derive(Clone, Debug)]
pub struct IncompleteCholesky {
    n: usize,
    /// Row-wise strictly lower part plus diagonal (last entry of each row).
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    /// Relative diagonal shift that was needed (0 if none).
    pub shift: f64,
}

impl IncompleteCholesky {
    /// Factorizes `A`, retrying with diagonal shifts `1e-3, 1e-2, 1e-1` on breakdown.
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let mut shift = 0.0;
        for attempt in 0..4 {
            match Self::try_factor(a, shift) {
                Ok(mut f) => {
                    f.shift = shift;
                    if attempt > 0 {
                        log::warn!("incomplete Cholesky needed relative diagonal shift {shift:e}");
                    }
                    return Ok(f);
                }
                Err(_) => shift = if shift == 0.0 { 1e-3 } else { shift * 10.0 },
            }
        }
        Err(Error::Factorization("incomplete Cholesky broke down after three diagonal shifts".into()))
    }

    fn try_factor(a: &CsrMatrix, shift: f64) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::invalid("incomplete Cholesky of a non-square matrix"));
        }
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(a.nnz() / 2 + n);
        let mut values = Vec::with_capacity(a.nnz() / 2 + n);
        for i in 0..n {
            let mut has_diag = false;
            for (j, v) in a.row(i) {
                if j < i {
                    col_idx.push(j);
                    values.push(v);
                } else if j == i {
                    has_diag = true;
                    col_idx.push(i);
                    values.push(v * (1.0 + shift));
                }
            }
            if !has_diag {
                return Err(Error::Factorization(format!("zero diagonal in row {i}")));
            }
            row_ptr[i + 1] = col_idx.len();
        }
        for i in 0..n {
            let (rs, re) = (row_ptr[i], row_ptr[i + 1]);
            for p in rs..re - 1 {
                let k = col_idx[p];
                // Sparse dot of rows i and k over columns < k.
                let (ks, ke) = (row_ptr[k], row_ptr[k + 1] - 1);
                let (mut pi, mut pk) = (rs, ks);
                let mut s = 0.0;
                while pi < p && pk < ke {
                    let (ci, ck) = (col_idx[pi], col_idx[pk]);
                    if ci == ck {
                        s += values[pi] * values[pk];
                        pi += 1;
                        pk += 1;
                    } else if ci < ck {
                        pi += 1;
                    } else {
                        pk += 1;
                    }
                }
                values[p] = (values[p] - s) / values[ke];
            }
            let d = values[re - 1] - values[rs..re - 1].iter().map(|v| v * v).sum::<f64>();
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Factorization(format!("nonpositive pivot in row {i}")));
            }
            values[re - 1] = d.sqrt();
        }
        Ok(Self { n, row_ptr, col_idx, values, shift })
    }

    /// Solves `L Lᵀ z = r`.
    pub fn solve_into(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        for i in 0..self.n {
            let (rs, re) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut s = z[i];
            for p in rs..re - 1 {
                s -= self.values[p] * z[self.col_idx[p]];
            }
            z[i] = s / self.values[re - 1];
        }
        for i in (0..self.n).rev() {
            let (rs, re) = (self.row_ptr[i], self.row_ptr[i + 1]);
            z[i] /= self.values[re - 1];
            let zi = z[i];
            for p in rs..re - 1 {
                z[self.col_idx[p]] -= self.values[p] * zi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_tridiagonal() {
        // IC(0) of a tridiagonal matrix is its exact Cholesky factor.
        let n = 20;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.5));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, t);
        let f = IncompleteCholesky::new(&a).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        f.solve_into(&b, &mut x);
        let r = a.matvec(&x);
        for i in 0..n {
            assert!((r[i] - b[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn indefinite_matrix_fails() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 3.0), (1, 0, 3.0), (1, 1, 1.0)]);
        assert!(IncompleteCholesky::new(&a).is_err());
    }
}
