//! Block-diagonal nodal constraints and their orthonormal kernel bases.

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Orthonormal basis of the orthogonal complement of `b ∈ R^d`, `d ∈ {2,3}`.
///
/// For `b ∥ e₁` the remaining canonical vectors are returned; otherwise
/// `b^⊥` in 2D and the normalized `(b×e₁, b×(b×e₁))` in 3D. When `b` is
/// close to (but not exactly) parallel to `e₁`, `e₂` replaces `e₁` in the
/// cross products so that the normalization stays well conditioned.
pub fn orthonormal_complement(b: &[f64]) -> Result<Vec<Vec<f64>>> {
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(nb > 0.0) || !nb.is_finite() {
        return Err(Error::invalid("orthonormal complement of a zero vector"));
    }
    match b.len() {
        2 => Ok(vec![vec![-b[1] / nb, b[0] / nb]]),
        3 => {
            if b[1] == 0.0 && b[2] == 0.0 {
                return Ok(vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
            }
            let e: [f64; 3] = if (b[1] * b[1] + b[2] * b[2]).sqrt() < 0.1 * nb {
                [0.0, 1.0, 0.0]
            } else {
                [1.0, 0.0, 0.0]
            };
            let c1 = cross(b, &e);
            let c2 = cross(b, &c1);
            Ok(vec![normalize(c1), normalize(c2)])
        }
        d => Err(Error::invalid(format!("orthonormal complement needs d ∈ {{2,3}}, got {d}"))),
    }
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize(v: [f64; 3]) -> Vec<f64> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.iter().map(|x| x / n).collect()
}

/// Orthonormal kernel basis of a full-rank `m×ℓ` block (row-major), returned
/// column-major as `ℓ×(ℓ−m)`. Uses Householder QR of `Bᵀ` with column
/// pivoting (largest remaining norm first).
pub fn kernel_basis(b: &[f64], m: usize, l: usize) -> Result<Vec<f64>> {
    if b.len() != m * l || m >= l {
        return Err(Error::invalid(format!("constraint block must be m×ℓ with m < ℓ (m={m}, ℓ={l})")));
    }
    // a = Bᵀ, column-major ℓ×m: column j is row j of B.
    let mut a: Vec<Vec<f64>> = (0..m).map(|j| b[j * l..(j + 1) * l].to_vec()).collect();
    let scale = b.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::RankDeficient { block: 0 });
    }
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(m);
    for k in 0..m {
        let (piv, _) = (k..m)
            .map(|j| (j, a[j][k..].iter().map(|v| v * v).sum::<f64>()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        a.swap(k, piv);
        let x = &a[k][k..];
        let alpha = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if alpha <= 1e-12 * scale {
            return Err(Error::RankDeficient { block: 0 });
        }
        let mut v = x.to_vec();
        v[0] += alpha.copysign(x[0]);
        let vn = v.iter().map(|t| t * t).sum::<f64>();
        for col in a.iter_mut().skip(k) {
            let s = 2.0 * v.iter().zip(&col[k..]).map(|(p, q)| p * q).sum::<f64>() / vn;
            for (c, p) in col[k..].iter_mut().zip(&v) {
                *c -= s * p;
            }
        }
        let mut full = vec![0.0; l];
        full[k..].copy_from_slice(&v);
        let fnorm = vn.sqrt();
        full.iter_mut().for_each(|t| *t /= fnorm);
        vs.push(full);
    }
    // Columns m..ℓ of Q = H_0 H_1 … H_{m−1}.
    let k = l - m;
    let mut c = vec![0.0; l * k];
    for j in 0..k {
        let col = &mut c[j * l..(j + 1) * l];
        col[m + j] = 1.0;
        for v in vs.iter().rev() {
            let s = 2.0 * v.iter().zip(col.iter()).map(|(p, q)| p * q).sum::<f64>();
            for (t, p) in col.iter_mut().zip(v) {
                *t -= s * p;
            }
        }
    }
    Ok(c)
}

/// One constraint block `B_i` acting on a DOF group.
#[derive(Clone, Debug)]
pub struct ConstraintBlock {
    pub dofs: Vec<usize>,
    pub rows: usize,
    /// Row-major `rows × dofs.len()`.
    pub matrix: Vec<f64>,
}

/// Block-diagonal constraint matrix `B` on `n` DOFs.
#[derive(Clone, Debug)]
pub struct NodalConstraintSet {
    n: usize,
    blocks: Vec<ConstraintBlock>,
    owner: Vec<bool>,
}

impl NodalConstraintSet {
    pub fn new(n: usize) -> Self {
        Self { n, blocks: Vec::new(), owner: vec![false; n] }
    }

    pub fn n_dofs(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[ConstraintBlock] {
        &self.blocks
    }

    pub fn n_rows(&self) -> usize {
        self.blocks.iter().map(|b| b.rows).sum()
    }

    pub fn push(&mut self, dofs: Vec<usize>, rows: usize, matrix: Vec<f64>) -> Result<()> {
        if matrix.len() != rows * dofs.len() || rows >= dofs.len() {
            return Err(Error::invalid(format!(
                "block with {} DOFs, {} rows and {} entries",
                dofs.len(),
                rows,
                matrix.len()
            )));
        }
        for &d in &dofs {
            if d >= self.n {
                return Err(Error::invalid(format!("constraint DOF {d} out of range")));
            }
            if self.owner[d] {
                return Err(Error::invalid(format!("DOF {d} appears in two constraint blocks")));
            }
            self.owner[d] = true;
        }
        self.blocks.push(ConstraintBlock { dofs, rows, matrix });
        Ok(())
    }

    /// Assembled `B` (`p × n`).
    pub fn to_csr(&self) -> CsrMatrix {
        let mut t = TripletBuilder::new(self.n_rows(), self.n);
        let mut row = 0;
        for b in &self.blocks {
            let l = b.dofs.len();
            for r in 0..b.rows {
                for (j, &d) in b.dofs.iter().enumerate() {
                    let v = b.matrix[r * l + j];
                    if v != 0.0 {
                        t.push(row + r, d, v);
                    }
                }
            }
            row += b.rows;
        }
        t.build()
    }
}

#[derive(Clone, Debug)]
struct Group {
    dofs: Vec<usize>,
    /// Column-major `dofs.len() × k`.
    basis: Vec<f64>,
    k: usize,
    offset: usize,
}

/// The isomorphism `C` from reduced coordinates onto `ker B ∩ {x_fixed = 0}`.
#[derive(Clone, Debug)]
pub struct NullspaceMap {
    n_full: usize,
    n_reduced: usize,
    groups: Vec<Group>,
    fixed: Vec<bool>,
    constraints: NodalConstraintSet,
}

const CHUNK: usize = 1024;

impl NullspaceMap {
    /// Builds kernel bases for all blocks; DOFs marked in `fixed` are
    /// eliminated and all remaining DOFs outside blocks pass through.
    pub fn build(constraints: NodalConstraintSet, fixed: &[bool], exec: Exec) -> Result<Self> {
        let n = constraints.n;
        if fixed.len() != n {
            return Err(Error::invalid("fixed-DOF mask length differs from the DOF count"));
        }
        for (i, b) in constraints.blocks.iter().enumerate() {
            if b.dofs.iter().any(|&d| fixed[d]) {
                return Err(Error::invalid(format!("constraint block {i} touches a fixed DOF")));
            }
        }
        let bases = exec::map_chunks(exec, constraints.blocks.len(), CHUNK, |range| {
            range
                .map(|i| {
                    let b = &constraints.blocks[i];
                    let l = b.dofs.len();
                    let basis = if b.rows == 1 && (l == 2 || l == 3) {
                        orthonormal_complement(&b.matrix).map(|cols| cols.concat())
                    } else {
                        kernel_basis(&b.matrix, b.rows, l)
                    };
                    basis.map_err(|e| match e {
                        Error::RankDeficient { .. } => Error::RankDeficient { block: i },
                        Error::InvalidArgument(_) => Error::RankDeficient { block: i },
                        other => other,
                    })
                })
                .collect::<Vec<_>>()
        });
        let mut groups = Vec::with_capacity(n);
        let mut it = bases.into_iter().flatten();
        for b in &constraints.blocks {
            let basis = it.next().unwrap()?;
            let k = b.dofs.len() - b.rows;
            groups.push(Group { dofs: b.dofs.clone(), basis, k, offset: 0 });
        }
        for d in 0..n {
            if !fixed[d] && !constraints.owner[d] {
                groups.push(Group { dofs: vec![d], basis: vec![1.0], k: 1, offset: 0 });
            }
        }
        groups.sort_by_key(|g| *g.dofs.iter().min().unwrap());
        let mut offset = 0;
        for g in &mut groups {
            g.offset = offset;
            offset += g.k;
        }
        Ok(Self { n_full: n, n_reduced: offset, groups, fixed: fixed.to_vec(), constraints })
    }

    pub fn n_full(&self) -> usize {
        self.n_full
    }

    pub fn n_reduced(&self) -> usize {
        self.n_reduced
    }

    pub fn constraints(&self) -> &NodalConstraintSet {
        &self.constraints
    }

    pub fn fixed(&self) -> &[bool] {
        &self.fixed
    }

    /// `x = C x̂`.
    pub fn apply(&self, xr: &[f64], x: &mut [f64]) {
        x.iter_mut().for_each(|v| *v = 0.0);
        for g in &self.groups {
            let l = g.dofs.len();
            for (r, &d) in g.dofs.iter().enumerate() {
                let mut s = 0.0;
                for j in 0..g.k {
                    s += g.basis[j * l + r] * xr[g.offset + j];
                }
                x[d] = s;
            }
        }
    }

    /// `x̂ = Cᵀ x`.
    pub fn apply_t(&self, x: &[f64], xr: &mut [f64]) {
        for g in &self.groups {
            let l = g.dofs.len();
            for j in 0..g.k {
                let mut s = 0.0;
                for (r, &d) in g.dofs.iter().enumerate() {
                    s += g.basis[j * l + r] * x[d];
                }
                xr[g.offset + j] = s;
            }
        }
    }

    /// `C` as an `n × n̂` sparse matrix.
    pub fn to_csr(&self) -> CsrMatrix {
        let mut t = TripletBuilder::new(self.n_full, self.n_reduced);
        for g in &self.groups {
            let l = g.dofs.len();
            for (r, &d) in g.dofs.iter().enumerate() {
                for j in 0..g.k {
                    t.push(d, g.offset + j, g.basis[j * l + r]);
                }
            }
        }
        t.build()
    }

    /// Diagonal of `CᵀAC` without forming the product.
    pub fn reduced_diagonal(&self, a: &CsrMatrix) -> Vec<f64> {
        let mut diag = vec![0.0; self.n_reduced];
        for g in &self.groups {
            let l = g.dofs.len();
            for j in 0..g.k {
                let c = &g.basis[j * l..(j + 1) * l];
                let mut s = 0.0;
                for (r, &dr) in g.dofs.iter().enumerate() {
                    for (q, &dq) in g.dofs.iter().enumerate() {
                        s += c[r] * a.get(dr, dq) * c[q];
                    }
                }
                diag[g.offset + j] = s;
            }
        }
        diag
    }

    /// Largest `‖C_iᵀC_i − I‖_max` and `‖B_iC_i‖_max` over all blocks.
    pub fn block_residuals(&self) -> (f64, f64) {
        let mut orth: f64 = 0.0;
        let mut kern: f64 = 0.0;
        let by_first: std::collections::HashMap<usize, &Group> =
            self.groups.iter().map(|g| (g.dofs[0], g)).collect();
        for b in &self.constraints.blocks {
            let g = by_first[&b.dofs[0]];
            let l = g.dofs.len();
            for i in 0..g.k {
                for j in 0..g.k {
                    let s: f64 = (0..l).map(|r| g.basis[i * l + r] * g.basis[j * l + r]).sum();
                    orth = orth.max((s - if i == j { 1.0 } else { 0.0 }).abs());
                }
                for row in 0..b.rows {
                    let s: f64 = (0..l).map(|r| b.matrix[row * l + r] * g.basis[i * l + r]).sum();
                    kern = kern.max(s.abs());
                }
            }
        }
        (orth, kern)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_canonical_cases() {
        let c = orthonormal_complement(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(c, vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let c = orthonormal_complement(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(c[0], vec![0.0, 1.0, 0.0]);
        assert_eq!(c[1], vec![-1.0, 0.0, 0.0]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let c = orthonormal_complement(&[s, s]).unwrap();
        assert!((c[0][0] + s).abs() < 1e-15 && (c[0][1] - s).abs() < 1e-15);
        assert!(orthonormal_complement(&[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn kernel_of_selector_block() {
        let b = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let c = kernel_basis(&b, 2, 4).unwrap();
        // Projector onto the kernel is diag(0,0,1,1).
        for i in 0..4 {
            for j in 0..4 {
                let p: f64 = (0..2).map(|k| c[k * 4 + i] * c[k * 4 + j]).sum();
                let want = if i == j && i >= 2 { 1.0 } else { 0.0 };
                assert!((p - want).abs() < 1e-15);
            }
        }
        assert!(matches!(kernel_basis(&[1.0, 2.0, 2.0, 4.0], 2, 2), Err(Error::InvalidArgument(_))));
        assert!(matches!(kernel_basis(&[1.0, 2.0, 3.0, 2.0, 4.0, 6.0], 2, 3), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn map_passes_free_dofs_and_eliminates_fixed() {
        let mut set = NodalConstraintSet::new(5);
        set.push(vec![1, 2, 3], 1, vec![0.0, 0.6, 0.8]).unwrap();
        let fixed = [true, false, false, false, false];
        let map = NullspaceMap::build(set, &fixed, Exec::Serial).unwrap();
        assert_eq!(map.n_reduced(), 3);
        let mut x = vec![0.0; 5];
        map.apply(&[1.0, 2.0, 3.0], &mut x);
        assert_eq!(x[0], 0.0);
        assert_eq!(x[4], 3.0);
        assert!((0.6 * x[2] + 0.8 * x[3]).abs() < 1e-15);
        let (o, k) = map.block_residuals();
        assert!(o < 1e-14 && k < 1e-14);
    }

    #[test]
    fn overlapping_blocks_rejected() {
        let mut set = NodalConstraintSet::new(4);
        set.push(vec![0, 1], 1, vec![1.0, 0.0]).unwrap();
        assert!(set.push(vec![1, 2], 1, vec![1.0, 0.0]).is_err());
    }
}
