//! Preconditioned conjugate gradients.

use crate::sparse::{axpy, dot, norm2};

#[derive(Clone, Debug)]
pub struct PcgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖b − Ax‖ / ‖b‖` of the returned iterate.
    pub rel_residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` for SPD `A` given as an operator, preconditioned by `P ≈ A⁻¹`.
/// Stops once the relative residual `‖b − Ax‖/‖b‖` drops to `tol`.
pub fn pcg<FA, FP>(mut apply_a: FA, mut apply_p: FP, b: &[f64], x0: Option<&[f64]>, tol: f64, maxit: usize) -> PcgResult
where
    FA: FnMut(&[f64], &mut [f64]),
    FP: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return PcgResult { x: vec![0.0; n], iterations: 0, rel_residual: 0.0, converged: true };
    }
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut r = b.to_vec();
    let mut q = vec![0.0; n];
    if x0.is_some() {
        apply_a(&x, &mut q);
        axpy(-1.0, &q, &mut r);
    }
    let mut rel = norm2(&r) / bnorm;
    if rel <= tol {
        return PcgResult { x, iterations: 0, rel_residual: rel, converged: true };
    }
    let mut z = vec![0.0; n];
    apply_p(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=maxit {
        apply_a(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return PcgResult { x, iterations: it, rel_residual: rel, converged: false };
        }
        let alpha = rz / pq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        rel = norm2(&r) / bnorm;
        if rel <= tol {
            return PcgResult { x, iterations: it, rel_residual: rel, converged: true };
        }
        apply_p(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    PcgResult { x, iterations: maxit, rel_residual: rel, converged: false }
}
