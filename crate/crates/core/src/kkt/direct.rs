//! Sparse direct solvers backed by faer.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::{MatMut, Side};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Sparse Cholesky factorization that reuses the symbolic analysis while the
/// sparsity pattern stays the same.
#[derive(Default)]
pub struct SparseCholesky {
    pattern: Option<(Vec<usize>, Vec<usize>)>,
    symbolic: Option<SymbolicLlt<usize>>,
    numeric: Option<Llt<usize, f64>>,
}

impl SparseCholesky {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factor(&mut self, a: &CsrMatrix) -> Result<()> {
        let fa = a.to_faer()?;
        let same = self
            .pattern
            .as_ref()
            .is_some_and(|(rp, ci)| rp.as_slice() == a.row_ptr() && ci.as_slice() == a.col_idx());
        if !same || self.symbolic.is_none() {
            let sym = SymbolicLlt::try_new(fa.symbolic(), Side::Lower)
                .map_err(|e| Error::Factorization(format!("symbolic Cholesky: {e:?}")))?;
            self.symbolic = Some(sym);
            self.pattern = Some((a.row_ptr().to_vec(), a.col_idx().to_vec()));
        }
        let sym = self.symbolic.clone().unwrap();
        let llt = Llt::try_new_with_symbolic(sym, fa.as_ref(), Side::Lower)
            .map_err(|e| Error::Factorization(format!("sparse Cholesky: {e:?}")))?;
        self.numeric = Some(llt);
        Ok(())
    }

    pub fn is_factored(&self) -> bool {
        self.numeric.is_some()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        let llt = self.numeric.as_ref().ok_or_else(|| Error::Factorization("solve before factor".into()))?;
        let n = b.len();
        llt.solve_in_place(MatMut::from_column_major_slice_mut(b, n, 1));
        Ok(())
    }
}

/// Solves a general sparse system by LU with partial pivoting.
pub fn lu_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let fa = a.to_faer()?;
    let lu = fa.sp_lu().map_err(|e| Error::Factorization(format!("sparse LU: {e:?}")))?;
    let mut x = b.to_vec();
    let n = x.len();
    lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, n, 1));
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Factorization("singular system in sparse LU".into()));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reuses_symbolic() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)]);
        let mut c = SparseCholesky::new();
        c.factor(&a).unwrap();
        let mut b = vec![1.0, 2.0];
        c.solve_in_place(&mut b).unwrap();
        let r = a.matvec(&b);
        assert!((r[0] - 1.0).abs() < 1e-14 && (r[1] - 2.0).abs() < 1e-14);
        let a2 = a.scaled(2.0);
        c.factor(&a2).unwrap();
        let mut b = vec![1.0, 2.0];
        c.solve_in_place(&mut b).unwrap();
        let r = a2.matvec(&b);
        assert!((r[0] - 1.0).abs() < 1e-14 && (r[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn lu_solves_indefinite() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0)]);
        let x = lu_solve(&a, &[3.0, 2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }
}
