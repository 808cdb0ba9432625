//! Piecewise cubic C¹ (Hermite) fields on interval partitions.

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::fem::quadrature::gauss_legendre;
use crate::mesh::Mesh1D;
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Vector-valued Hermite field. DOF layout per node: `ℓ` values, then `ℓ`
/// derivatives, i.e. index `node·2ℓ + kind·ℓ + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermiteField {
    comps: usize,
    pub dofs: Vec<f64>,
}

/// Local shape functions on `[0,1]` for element length `h`, ordered
/// (value a, derivative a, value b, derivative b), differentiated `order`
/// times in the physical variable.
#[inline]
pub fn hermite_basis(t: f64, h: f64, order: usize) -> [f64; 4] {
    match order {
        0 => [
            1.0 - 3.0 * t * t + 2.0 * t * t * t,
            h * (t - 2.0 * t * t + t * t * t),
            3.0 * t * t - 2.0 * t * t * t,
            h * (t * t * t - t * t),
        ],
        1 => [
            (6.0 * t * t - 6.0 * t) / h,
            1.0 - 4.0 * t + 3.0 * t * t,
            (6.0 * t - 6.0 * t * t) / h,
            3.0 * t * t - 2.0 * t,
        ],
        2 => [
            (12.0 * t - 6.0) / (h * h),
            (6.0 * t - 4.0) / h,
            (6.0 - 12.0 * t) / (h * h),
            (6.0 * t - 2.0) / h,
        ],
        3 => [12.0 / (h * h * h), 6.0 / (h * h), -12.0 / (h * h * h), 6.0 / (h * h)],
        _ => [0.0; 4],
    }
}

/// Closed-form element matrices in the local order of [`hermite_basis`].
pub fn element_second_derivative(h: f64) -> [[f64; 4]; 4] {
    let s = 1.0 / (h * h * h);
    [
        [12.0 * s, 6.0 * h * s, -12.0 * s, 6.0 * h * s],
        [6.0 * h * s, 4.0 * h * h * s, -6.0 * h * s, 2.0 * h * h * s],
        [-12.0 * s, -6.0 * h * s, 12.0 * s, -6.0 * h * s],
        [6.0 * h * s, 2.0 * h * h * s, -6.0 * h * s, 4.0 * h * h * s],
    ]
}

pub fn element_first_derivative(h: f64) -> [[f64; 4]; 4] {
    let s = 1.0 / (30.0 * h);
    [
        [36.0 * s, 3.0 * h * s, -36.0 * s, 3.0 * h * s],
        [3.0 * h * s, 4.0 * h * h * s, -3.0 * h * s, -h * h * s],
        [-36.0 * s, -3.0 * h * s, 36.0 * s, -3.0 * h * s],
        [3.0 * h * s, -h * h * s, -3.0 * h * s, 4.0 * h * h * s],
    ]
}

pub fn element_mass(h: f64) -> [[f64; 4]; 4] {
    let s = h / 420.0;
    [
        [156.0 * s, 22.0 * h * s, 54.0 * s, -13.0 * h * s],
        [22.0 * h * s, 4.0 * h * h * s, 13.0 * h * s, -3.0 * h * h * s],
        [54.0 * s, 13.0 * h * s, 156.0 * s, -22.0 * h * s],
        [-13.0 * h * s, -3.0 * h * h * s, -22.0 * h * s, 4.0 * h * h * s],
    ]
}

/// Bilinear forms assembled on Hermite spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HermiteForm {
    /// `∫ y″·w″`
    SecondDerivative,
    /// `∫ y′·w′`
    FirstDerivative,
    /// `∫ y·w`
    Mass,
}

impl HermiteField {
    pub fn zeros(n_nodes: usize, comps: usize) -> Self {
        Self { comps, dofs: vec![0.0; 2 * comps * n_nodes] }
    }

    pub fn from_dofs(comps: usize, dofs: Vec<f64>) -> Result<Self> {
        if comps == 0 || dofs.len() % (2 * comps) != 0 {
            return Err(Error::invalid("DOF vector length is not a multiple of 2ℓ"));
        }
        Ok(Self { comps, dofs })
    }

    /// Nodal interpolation of `f(x) = (v(x), v′(x))`.
    pub fn interpolate<F>(mesh: &Mesh1D, comps: usize, f: F) -> Self
    where
        F: Fn(f64) -> (Vec<f64>, Vec<f64>),
    {
        let mut u = Self::zeros(mesh.n_nodes(), comps);
        for (i, &x) in mesh.nodes().iter().enumerate() {
            let (v, d) = f(x);
            u.value_mut(i).copy_from_slice(&v[..comps]);
            u.deriv_mut(i).copy_from_slice(&d[..comps]);
        }
        u
    }

    pub fn comps(&self) -> usize {
        self.comps
    }

    pub fn n_nodes(&self) -> usize {
        self.dofs.len() / (2 * self.comps)
    }

    #[inline]
    pub fn dof_index(comps: usize, node: usize, kind: usize, c: usize) -> usize {
        node * 2 * comps + kind * comps + c
    }

    pub fn value(&self, node: usize) -> &[f64] {
        let o = node * 2 * self.comps;
        &self.dofs[o..o + self.comps]
    }

    pub fn deriv(&self, node: usize) -> &[f64] {
        let o = node * 2 * self.comps + self.comps;
        &self.dofs[o..o + self.comps]
    }

    pub fn value_mut(&mut self, node: usize) -> &mut [f64] {
        let o = node * 2 * self.comps;
        &mut self.dofs[o..o + self.comps]
    }

    pub fn deriv_mut(&mut self, node: usize) -> &mut [f64] {
        let o = node * 2 * self.comps + self.comps;
        &mut self.dofs[o..o + self.comps]
    }

    /// Node-major nodal values (length `n_nodes·ℓ`).
    pub fn nodal_values(&self) -> Vec<f64> {
        (0..self.n_nodes()).flat_map(|i| self.value(i).to_vec()).collect()
    }

    pub fn nodal_derivatives(&self) -> Vec<f64> {
        (0..self.n_nodes()).flat_map(|i| self.deriv(i).to_vec()).collect()
    }

    fn check_mesh(&self, mesh: &Mesh1D) -> Result<()> {
        if mesh.n_nodes() != self.n_nodes() {
            return Err(Error::MeshMismatch(format!(
                "field has {} nodes, mesh has {}",
                self.n_nodes(),
                mesh.n_nodes()
            )));
        }
        Ok(())
    }

    /// Evaluates derivative `order` on element `e` at local coordinate `t`.
    pub fn eval_local(&self, mesh: &Mesh1D, e: usize, t: f64, order: usize) -> Vec<f64> {
        let (a, b) = mesh.element(e);
        let phi = hermite_basis(t, mesh.element_length(e), order);
        (0..self.comps)
            .map(|c| {
                phi[0] * self.value(a)[c]
                    + phi[1] * self.deriv(a)[c]
                    + phi[2] * self.value(b)[c]
                    + phi[3] * self.deriv(b)[c]
            })
            .collect()
    }

    /// Evaluates derivative `order` at the physical point `x`.
    pub fn eval(&self, mesh: &Mesh1D, x: f64, order: usize) -> Result<Vec<f64>> {
        self.check_mesh(mesh)?;
        let (e, t) = mesh.locate(x)?;
        Ok(self.eval_local(mesh, e, t, order))
    }

    /// Elementwise average of derivative `order`, one `ℓ`-vector per element.
    pub fn element_average(&self, mesh: &Mesh1D, order: usize) -> Vec<Vec<f64>> {
        let (x, w) = gauss_legendre(2);
        (0..mesh.n_elements())
            .map(|e| {
                let mut avg = vec![0.0; self.comps];
                for (t, wq) in x.iter().zip(&w) {
                    for (a, v) in avg.iter_mut().zip(self.eval_local(mesh, e, *t, order)) {
                        *a += wq * v;
                    }
                }
                avg
            })
            .collect()
    }

    /// Curve length `∫|y′|` with `nq` Gauss points per element.
    pub fn arc_length(&self, mesh: &Mesh1D, nq: usize) -> f64 {
        let (x, w) = gauss_legendre(nq);
        (0..mesh.n_elements())
            .map(|e| {
                let h = mesh.element_length(e);
                x.iter()
                    .zip(&w)
                    .map(|(t, wq)| {
                        let d = self.eval_local(mesh, e, *t, 1);
                        wq * h * d.iter().map(|v| v * v).sum::<f64>().sqrt()
                    })
                    .sum::<f64>()
            })
            .sum()
    }
}

/// Global DOF indices of element `e` in local basis order, for component `c`.
#[inline]
pub fn element_dofs(mesh: &Mesh1D, comps: usize, e: usize, c: usize) -> [usize; 4] {
    let (a, b) = mesh.element(e);
    [
        HermiteField::dof_index(comps, a, 0, c),
        HermiteField::dof_index(comps, a, 1, c),
        HermiteField::dof_index(comps, b, 0, c),
        HermiteField::dof_index(comps, b, 1, c),
    ]
}

const CHUNK: usize = 256;

/// Assembles `form` for an `ℓ`-component Hermite space.
pub fn assemble_hermite(mesh: &Mesh1D, comps: usize, form: HermiteForm, exec: Exec) -> CsrMatrix {
    let n = 2 * comps * mesh.n_nodes();
    let parts = exec::map_chunks(exec, mesh.n_elements(), CHUNK, |range| {
        let mut t = TripletBuilder::with_capacity(n, n, range.len() * 16 * comps);
        for e in range {
            let h = mesh.element_length(e);
            let k = match form {
                HermiteForm::SecondDerivative => element_second_derivative(h),
                HermiteForm::FirstDerivative => element_first_derivative(h),
                HermiteForm::Mass => element_mass(h),
            };
            for c in 0..comps {
                let d = element_dofs(mesh, comps, e, c);
                for i in 0..4 {
                    for j in 0..4 {
                        t.push(d[i], d[j], k[i][j]);
                    }
                }
            }
        }
        t
    });
    let mut all = TripletBuilder::new(n, n);
    for p in parts {
        all.extend(p);
    }
    all.build()
}
