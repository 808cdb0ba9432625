//! Finite element spaces, quadrature and assembly.

pub mod dkt;
pub mod hermite;
pub mod p1;
pub mod quadrature;

pub use dkt::{assemble_dkt, dkt_elements, dkt_gradient, dkt_hessian, DktElement, DktField, DktForm, P2VecField};
pub use hermite::{assemble_hermite, HermiteField, HermiteForm};
pub use p1::{assemble_p1_interval, assemble_p1_tet, assemble_p1_tri, P1Field, P1Form};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::mesh::{Mesh1D, TriMesh};
use crate::sparse::CsrMatrix;

/// Inner product used to define a gradient flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    L2,
    H1,
    /// Discrete H²: `‖·″‖` for curves, `‖D_h²·‖` for plates.
    H2,
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(MetricKind::L2),
            "h1" => Ok(MetricKind::H1),
            "h2" => Ok(MetricKind::H2),
            _ => Err(Error::invalid(format!("unknown metric '{s}' (expected l2, h1 or h2)"))),
        }
    }
}

/// Lumped inner product `Σ_z m_z v(z)·w(z)` of node-major nodal data.
pub fn lumped_product(weights: &[f64], comps: usize, v: &[f64], w: &[f64]) -> Result<f64> {
    if v.len() != weights.len() * comps || w.len() != v.len() {
        return Err(Error::MeshMismatch(format!(
            "nodal data of lengths {} and {} do not match {} nodes with {} components",
            v.len(),
            w.len(),
            weights.len(),
            comps
        )));
    }
    Ok(weights
        .iter()
        .enumerate()
        .map(|(z, m)| m * (0..comps).map(|c| v[z * comps + c] * w[z * comps + c]).sum::<f64>())
        .sum())
}

/// Lumped norm `(Σ_z m_z |v(z)|^p)^{1/p}`; `p = ∞` gives the nodal maximum.
pub fn lumped_norm_p(weights: &[f64], comps: usize, v: &[f64], p: f64) -> Result<f64> {
    if v.len() != weights.len() * comps {
        return Err(Error::MeshMismatch("nodal data length does not match mesh".into()));
    }
    let node_norm = |z: usize| (0..comps).map(|c| v[z * comps + c].powi(2)).sum::<f64>().sqrt();
    if p.is_infinite() {
        return Ok((0..weights.len()).map(node_norm).fold(0.0, f64::max));
    }
    if !(p >= 1.0) {
        return Err(Error::invalid(format!("lumped norm exponent must be ≥ 1, got {p}")));
    }
    let s: f64 = weights.iter().enumerate().map(|(z, m)| m * node_norm(z).powf(p)).sum();
    Ok(s.powf(1.0 / p))
}

/// Metric matrix on an `ℓ`-component Hermite space. `mass` adds a multiple
/// of the consistent mass matrix to the H² seminorm.
pub fn hermite_metric(mesh: &Mesh1D, comps: usize, kind: MetricKind, mass: f64, exec: Exec) -> Result<CsrMatrix> {
    let m = assemble_hermite(mesh, comps, HermiteForm::Mass, exec);
    match kind {
        MetricKind::L2 => Ok(m),
        MetricKind::H1 => {
            let k = assemble_hermite(mesh, comps, HermiteForm::FirstDerivative, exec);
            CsrMatrix::lin_comb(1.0, &k, 1.0, &m)
        }
        MetricKind::H2 => {
            let k = assemble_hermite(mesh, comps, HermiteForm::SecondDerivative, exec);
            CsrMatrix::lin_comb(1.0, &k, mass, &m)
        }
    }
}

/// Metric matrix on an `ℓ`-component P1 space over an interval mesh.
pub fn p1_interval_metric(mesh: &Mesh1D, comps: usize, kind: MetricKind, exec: Exec) -> Result<CsrMatrix> {
    match kind {
        MetricKind::L2 => Ok(assemble_p1_interval(mesh, comps, P1Form::LumpedMass, exec)),
        MetricKind::H1 => {
            let k = assemble_p1_interval(mesh, comps, P1Form::Stiffness, exec);
            let m = assemble_p1_interval(mesh, comps, P1Form::Mass, exec);
            CsrMatrix::lin_comb(1.0, &k, 1.0, &m)
        }
        MetricKind::H2 => Err(Error::Unsupported("H² metric on a P1 space".into())),
    }
}

/// Metric matrix on an `ℓ`-component DKT space. `mass` adds a multiple of the
/// lumped value mass to the H² seminorm.
pub fn dkt_metric(
    mesh: &TriMesh,
    elements: &[DktElement],
    comps: usize,
    kind: MetricKind,
    mass: f64,
    exec: Exec,
) -> Result<CsrMatrix> {
    let lumped = || assemble_dkt(mesh, elements, comps, DktForm::LumpedValue, exec);
    match kind {
        MetricKind::L2 => Err(Error::Unsupported("L² metric on a DKT space (gradient DOFs are not controlled)".into())),
        MetricKind::H1 => {
            let g = assemble_dkt(mesh, elements, comps, DktForm::Gradient, exec);
            CsrMatrix::lin_comb(1.0, &g, 1.0, &lumped())
        }
        MetricKind::H2 => {
            let k = assemble_dkt(mesh, elements, comps, DktForm::Hessian, exec);
            if mass == 0.0 {
                Ok(k)
            } else {
                CsrMatrix::lin_comb(1.0, &k, mass, &lumped())
            }
        }
    }
}

/// Small 3-vector helpers used across the models.
pub(crate) mod v3 {
    #[inline]
    pub fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    }

    #[inline]
    pub fn sub(a: &[f64], b: &[f64]) -> [f64; 3] {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lumped_product_of_ones_is_length() {
        let m = Mesh1D::uniform(3.0, 7, false).unwrap();
        let w = m.lumped_weights();
        let ones = vec![1.0; 8];
        assert!((lumped_product(&w, 1, &ones, &ones).unwrap() - 3.0).abs() < 1e-14);
        assert!(lumped_product(&w, 1, &ones[..7], &ones[..7]).is_err());
    }

    #[test]
    fn hat_function_norm() {
        let m = Mesh1D::uniform(1.0, 8, false).unwrap();
        let w = m.lumped_weights();
        let mut phi = vec![0.0; 9];
        phi[3] = 1.0;
        assert!((lumped_norm_p(&w, 1, &phi, 2.0).unwrap().powi(2) - 0.125).abs() < 1e-15);
        assert_eq!(lumped_norm_p(&w, 1, &phi, f64::INFINITY).unwrap(), 1.0);
    }

    #[test]
    fn l1_of_nonnegative_p1_is_exact() {
        let m = Mesh1D::uniform(2.0, 5, false).unwrap();
        let w = m.lumped_weights();
        let v: Vec<f64> = m.nodes().iter().map(|x| 1.0 + x).collect();
        assert!((lumped_norm_p(&w, 1, &v, 1.0).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn dkt_l2_metric_is_unsupported() {
        let mesh = crate::mesh::rect_tri_mesh(1.0, 1.0, 1, 1).unwrap();
        let els = dkt_elements(&mesh);
        assert!(matches!(
            dkt_metric(&mesh, &els, 1, MetricKind::L2, 0.0, Exec::Serial),
            Err(Error::Unsupported(_))
        ));
    }
}
