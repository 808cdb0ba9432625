//! Continuous piecewise affine fields on intervals, triangles and tetrahedra.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::mesh::{Mesh1D, TetMesh, TriMesh};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Vector-valued P1 field, node-major layout `node·ℓ + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct P1Field {
    comps: usize,
    pub values: Vec<f64>,
}

impl P1Field {
    pub fn zeros(n_nodes: usize, comps: usize) -> Self {
        Self { comps, values: vec![0.0; n_nodes * comps] }
    }

    pub fn from_values(comps: usize, values: Vec<f64>) -> Result<Self> {
        if comps == 0 || values.len() % comps != 0 {
            return Err(Error::invalid("value vector length is not a multiple of ℓ"));
        }
        Ok(Self { comps, values })
    }

    pub fn comps(&self) -> usize {
        self.comps
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len() / self.comps
    }

    pub fn at(&self, node: usize) -> &[f64] {
        &self.values[node * self.comps..(node + 1) * self.comps]
    }

    pub fn at_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.values[node * self.comps..(node + 1) * self.comps]
    }

    /// Elementwise averages on an interval mesh.
    pub fn element_average(&self, mesh: &Mesh1D) -> Vec<Vec<f64>> {
        (0..mesh.n_elements())
            .map(|e| {
                let (a, b) = mesh.element(e);
                (0..self.comps).map(|c| 0.5 * (self.at(a)[c] + self.at(b)[c])).collect()
            })
            .collect()
    }
}

/// Bilinear forms on P1 spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum P1Form {
    /// `∫ ∇u·∇v`
    Stiffness,
    /// `∫ u·v`
    Mass,
    /// `(u, v)_h`
    LumpedMass,
}

/// Local matrices for a simplex with `nv` vertices, measure `vol` and
/// barycentric gradients `grads` (of dimension `nv - 1`).
fn local_matrix(form: P1Form, nv: usize, vol: f64, grads: &[[f64; 3]]) -> [[f64; 4]; 4] {
    let mut k = [[0.0; 4]; 4];
    let d = nv - 1;
    for i in 0..nv {
        for j in 0..nv {
            k[i][j] = match form {
                P1Form::Stiffness => vol * (0..d).map(|a| grads[i][a] * grads[j][a]).sum::<f64>(),
                P1Form::Mass => {
                    let denom = ((d + 1) * (d + 2)) as f64;
                    vol * if i == j { 2.0 } else { 1.0 } / denom
                }
                P1Form::LumpedMass => {
                    if i == j {
                        vol / nv as f64
                    } else {
                        0.0
                    }
                }
            };
        }
    }
    k
}

const CHUNK: usize = 512;

fn assemble_cells<G>(n_nodes: usize, n_cells: usize, comps: usize, nv: usize, form: P1Form, exec: Exec, geom: G) -> CsrMatrix
where
    G: Fn(usize) -> ([usize; 4], f64, [[f64; 3]; 4]) + Sync + Send,
{
    let n = n_nodes * comps;
    let parts = exec::map_chunks(exec, n_cells, CHUNK, |range| {
        let mut t = TripletBuilder::with_capacity(n, n, range.len() * nv * nv * comps);
        for cell in range {
            let (verts, vol, grads) = geom(cell);
            let k = local_matrix(form, nv, vol, &grads);
            for i in 0..nv {
                for j in 0..nv {
                    if k[i][j] == 0.0 {
                        continue;
                    }
                    for c in 0..comps {
                        t.push(verts[i] * comps + c, verts[j] * comps + c, k[i][j]);
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

pub fn assemble_p1_interval(mesh: &Mesh1D, comps: usize, form: P1Form, exec: Exec) -> CsrMatrix {
    assemble_cells(mesh.n_nodes(), mesh.n_elements(), comps, 2, form, exec, |e| {
        let (a, b) = mesh.element(e);
        let h = mesh.element_length(e);
        let mut g = [[0.0; 3]; 4];
        g[0][0] = -1.0 / h;
        g[1][0] = 1.0 / h;
        ([a, b, 0, 0], h, g)
    })
}

/// Area and barycentric gradients of a triangle.
pub fn triangle_gradients(p: &[[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let j = Matrix2::new(p[1][0] - p[0][0], p[2][0] - p[0][0], p[1][1] - p[0][1], p[2][1] - p[0][1]);
    let det = j.determinant();
    let jinv_t = j.try_inverse().expect("degenerate triangle").transpose();
    let g1 = jinv_t * Vector2::new(1.0, 0.0);
    let g2 = jinv_t * Vector2::new(0.0, 1.0);
    let g0 = -(g1 + g2);
    (0.5 * det.abs(), [[g0.x, g0.y], [g1.x, g1.y], [g2.x, g2.y]])
}

pub fn assemble_p1_tri(mesh: &TriMesh, comps: usize, form: P1Form, exec: Exec) -> CsrMatrix {
    assemble_cells(mesh.n_vertices(), mesh.n_triangles(), comps, 3, form, exec, |t| {
        let tri = mesh.triangles()[t];
        let (area, g) = triangle_gradients(&mesh.corners(t));
        let mut g3 = [[0.0; 3]; 4];
        for i in 0..3 {
            g3[i][..2].copy_from_slice(&g[i]);
        }
        ([tri[0], tri[1], tri[2], 0], area, g3)
    })
}

/// Volume and barycentric gradients of a tetrahedron.
pub fn tet_gradients(p: &[[f64; 3]; 4]) -> (f64, [[f64; 3]; 4]) {
    let col = |i: usize| Vector3::new(p[i][0] - p[0][0], p[i][1] - p[0][1], p[i][2] - p[0][2]);
    let j = Matrix3::from_columns(&[col(1), col(2), col(3)]);
    let det = j.determinant();
    let jinv_t = j.try_inverse().expect("degenerate tetrahedron").transpose();
    let mut g = [[0.0; 3]; 4];
    let mut g0 = Vector3::zeros();
    for k in 0..3 {
        let mut e = Vector3::zeros();
        e[k] = 1.0;
        let gk = jinv_t * e;
        g0 -= gk;
        g[k + 1] = [gk.x, gk.y, gk.z];
    }
    g[0] = [g0.x, g0.y, g0.z];
    (det.abs() / 6.0, g)
}

pub fn assemble_p1_tet(mesh: &TetMesh, comps: usize, form: P1Form, exec: Exec) -> CsrMatrix {
    assemble_cells(mesh.n_vertices(), mesh.n_tets(), comps, 4, form, exec, |t| {
        let (vol, g) = tet_gradients(&mesh.corners(t));
        (mesh.tets()[t], vol, g)
    })
}

/// Lumped mass weights `Σ_{T∋z} |T|/4` on a tetrahedral mesh.
pub fn tet_lumped_weights(mesh: &TetMesh) -> Vec<f64> {
    let mut m = vec![0.0; mesh.n_vertices()];
    for (t, tet) in mesh.tets().iter().enumerate() {
        let v = mesh.volume(t) / 4.0;
        for &i in tet {
            m[i] += v;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{cube_tet_mesh, rect_tri_mesh};

    #[test]
    fn stiffness_rows_sum_to_zero() {
        let m = rect_tri_mesh(2.0, 1.0, 4, 3).unwrap();
        let s = assemble_p1_tri(&m, 1, P1Form::Stiffness, Exec::Serial);
        for i in 0..s.nrows() {
            assert!(s.row(i).map(|(_, v)| v).sum::<f64>().abs() < 1e-13);
        }
        let c = cube_tet_mesh(1).unwrap();
        let s = assemble_p1_tet(&c, 1, P1Form::Stiffness, Exec::Serial);
        for i in 0..s.nrows() {
            assert!(s.row(i).map(|(_, v)| v).sum::<f64>().abs() < 1e-13);
        }
    }

    #[test]
    fn mass_totals_equal_measure() {
        let m = rect_tri_mesh(2.0, 1.0, 4, 3).unwrap();
        let ones = vec![1.0; m.n_vertices()];
        for form in [P1Form::Mass, P1Form::LumpedMass] {
            let a = assemble_p1_tri(&m, 1, form, Exec::Serial);
            assert!((a.bilinear(&ones, &ones) - 2.0).abs() < 1e-13);
        }
        let c = cube_tet_mesh(2).unwrap();
        let ones = vec![1.0; c.n_vertices()];
        let a = assemble_p1_tet(&c, 1, P1Form::Mass, Exec::Serial);
        assert!((a.bilinear(&ones, &ones) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn dirichlet_energy_of_linear_function() {
        let c = cube_tet_mesh(2).unwrap();
        let u: Vec<f64> = c.vertices().iter().map(|p| 2.0 * p[0] - p[1] + 0.5 * p[2]).collect();
        let s = assemble_p1_tet(&c, 1, P1Form::Stiffness, Exec::Parallel);
        assert!((s.bilinear(&u, &u) - 5.25).abs() < 1e-12);
    }

    #[test]
    fn interval_hat_norm() {
        let m = Mesh1D::uniform(1.0, 10, false).unwrap();
        let l = assemble_p1_interval(&m, 1, P1Form::LumpedMass, Exec::Serial);
        let mut phi = vec![0.0; 11];
        phi[4] = 1.0;
        assert!((l.bilinear(&phi, &phi) - 0.1).abs() < 1e-15);
    }
}
