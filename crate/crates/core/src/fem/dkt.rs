//! Discrete Kirchhoff triangles: nodal values and gradients as DOFs, with
//! the reconstructed quadratic gradient `∇_h` and `D_h² = ∇∇_h`.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::fem::p1::triangle_gradients;
use crate::fem::quadrature::tri_rule;
use crate::mesh::TriMesh;
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Local data of one triangle. Local DOFs are ordered
/// `(w_0, ∂₁w_0, ∂₂w_0, w_1, …, ∂₂w_2)`.
#[derive(Clone, Debug)]
pub struct DktElement {
    pub corners: [[f64; 2]; 3],
    pub area: f64,
    /// Barycentric gradients.
    pub grads: [[f64; 2]; 3],
    /// `∇_h w` at the six quadratic nodes (vertices, then the midpoint of the
    /// side opposite vertex k) as linear maps of the local DOFs.
    q: [[[f64; 9]; 2]; 6],
}

impl DktElement {
    pub fn new(corners: [[f64; 2]; 3]) -> Self {
        let (area, grads) = triangle_gradients(&corners);
        let mut q = [[[0.0; 9]; 2]; 6];
        for i in 0..3 {
            q[i][0][3 * i + 1] = 1.0;
            q[i][1][3 * i + 2] = 1.0;
        }
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            let d = [corners[j][0] - corners[i][0], corners[j][1] - corners[i][1]];
            let len = d[0].hypot(d[1]);
            let t = [d[0] / len, d[1] / len];
            let n = [-t[1], t[0]];
            let node = &mut q[3 + k];
            for a in 0..2 {
                node[a][3 * i] = -1.5 / len * t[a];
                node[a][3 * j] = 1.5 / len * t[a];
                for b in 0..2 {
                    let p = 0.5 * n[a] * n[b] - 0.25 * t[a] * t[b];
                    node[a][3 * i + 1 + b] = p;
                    node[a][3 * j + 1 + b] = p;
                }
            }
        }
        Self { corners, area, grads, q }
    }

    fn p2_values(l: &[f64; 3]) -> [f64; 6] {
        [
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
            4.0 * l[0] * l[1],
        ]
    }

    fn p2_gradients(&self, l: &[f64; 3]) -> [[f64; 2]; 6] {
        let g = &self.grads;
        let mut out = [[0.0; 2]; 6];
        for i in 0..3 {
            for b in 0..2 {
                out[i][b] = (4.0 * l[i] - 1.0) * g[i][b];
            }
        }
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            for b in 0..2 {
                out[3 + k][b] = 4.0 * (l[i] * g[j][b] + l[j] * g[i][b]);
            }
        }
        out
    }

    /// `∇_h w(λ)` as a 2×9 map.
    pub fn gradient_map(&self, l: &[f64; 3]) -> [[f64; 9]; 2] {
        let n = Self::p2_values(l);
        let mut m = [[0.0; 9]; 2];
        for (a, na) in n.iter().enumerate() {
            for al in 0..2 {
                for d in 0..9 {
                    m[al][d] += na * self.q[a][al][d];
                }
            }
        }
        m
    }

    /// `D_h² w(λ)` as a 4×9 map; row `2α+β` holds `∂_β (∇_h w)_α`.
    pub fn hessian_map(&self, l: &[f64; 3]) -> [[f64; 9]; 4] {
        let dn = self.p2_gradients(l);
        let mut m = [[0.0; 9]; 4];
        for (a, dna) in dn.iter().enumerate() {
            for al in 0..2 {
                for be in 0..2 {
                    for d in 0..9 {
                        m[2 * al + be][d] += self.q[a][al][d] * dna[be];
                    }
                }
            }
        }
        m
    }

    /// `∫_T D_h²v : D_h²w` (the integrand is quadratic; the midpoint rule is exact).
    pub fn hessian_stiffness(&self) -> [[f64; 9]; 9] {
        self.gram(2, |l| self.hessian_map(l).to_vec())
    }

    /// `∫_T ∇_h v · ∇_h w`.
    pub fn gradient_stiffness(&self) -> [[f64; 9]; 9] {
        self.gram(4, |l| self.gradient_map(l).to_vec())
    }

    fn gram<F: Fn(&[f64; 3]) -> Vec<[f64; 9]>>(&self, degree: usize, map: F) -> [[f64; 9]; 9] {
        let rule = tri_rule(degree);
        let mut k = [[0.0; 9]; 9];
        for (l, w) in rule.points.iter().zip(rule.weights) {
            let rows = map(l);
            let wa = w * self.area;
            for r in &rows {
                for i in 0..9 {
                    if r[i] == 0.0 {
                        continue;
                    }
                    for j in 0..9 {
                        k[i][j] += wa * r[i] * r[j];
                    }
                }
            }
        }
        k
    }

    /// Shape function values of the reduced cubic at `λ`.
    pub fn value_map(&self, l: &[f64; 3]) -> [f64; 9] {
        let c = &self.corners;
        let s = self.area.sqrt();
        let loc = |p: [f64; 2]| [(p[0] - c[0][0]) / s, (p[1] - c[0][1]) / s];
        // Monomials 1, ξ, η, ξ², ξη, η², ξ³, ξ²η, ξη², η³ and their gradients.
        let mono = |p: [f64; 2]| -> [f64; 10] {
            let (x, y) = (p[0], p[1]);
            [1.0, x, y, x * x, x * y, y * y, x * x * x, x * x * y, x * y * y, y * y * y]
        };
        let dmono = |p: [f64; 2]| -> [[f64; 10]; 2] {
            let (x, y) = (p[0], p[1]);
            [
                [0.0, 1.0, 0.0, 2.0 * x, y, 0.0, 3.0 * x * x, 2.0 * x * y, y * y, 0.0],
                [0.0, 0.0, 1.0, 0.0, x, 2.0 * y, 0.0, x * x, 2.0 * x * y, 3.0 * y * y],
            ]
        };
        let mut a = SMatrix::<f64, 10, 10>::zeros();
        let zt = [(c[0][0] + c[1][0] + c[2][0]) / 3.0, (c[0][1] + c[1][1] + c[2][1]) / 3.0];
        let zt_loc = loc(zt);
        let m_t = mono(zt_loc);
        for col in 0..10 {
            a[(9, col)] = m_t[col];
        }
        for i in 0..3 {
            let p = loc(c[i]);
            let (m, dm) = (mono(p), dmono(p));
            let shift = [zt_loc[0] - p[0], zt_loc[1] - p[1]];
            for col in 0..10 {
                a[(3 * i, col)] = m[col];
                // Physical derivatives carry the 1/s scaling.
                a[(3 * i + 1, col)] = dm[0][col] / s;
                a[(3 * i + 2, col)] = dm[1][col] / s;
                // p(z_T) = ⅓Σ p(z) + ⅙Σ ∇p(z)·(z_T − z), exact on quadratics.
                a[(9, col)] -= m[col] / 3.0 + (dm[0][col] * shift[0] + dm[1][col] * shift[1]) / 6.0;
            }
        }
        let inv = a.try_inverse().expect("reduced cubic interpolation is unisolvent");
        let x = [
            l[0] * c[0][0] + l[1] * c[1][0] + l[2] * c[2][0],
            l[0] * c[0][1] + l[1] * c[1][1] + l[2] * c[2][1],
        ];
        let m = SVector::<f64, 10>::from(mono(loc(x)));
        let row = m.transpose() * inv;
        let mut out = [0.0; 9];
        out.copy_from_slice(&row.as_slice()[..9]);
        out
    }
}

/// Precomputes element data for every triangle.
pub fn dkt_elements(mesh: &TriMesh) -> Vec<DktElement> {
    (0..mesh.n_triangles()).map(|t| DktElement::new(mesh.corners(t))).collect()
}

/// Vector-valued DKT field; layout `node·3ℓ + c·3 + k` with `k = 0` the value
/// and `k = 1, 2` the partial derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct DktField {
    comps: usize,
    pub dofs: Vec<f64>,
}

impl DktField {
    pub fn zeros(n_nodes: usize, comps: usize) -> Self {
        Self { comps, dofs: vec![0.0; 3 * comps * n_nodes] }
    }

    pub fn from_dofs(comps: usize, dofs: Vec<f64>) -> Result<Self> {
        if comps == 0 || dofs.len() % (3 * comps) != 0 {
            return Err(Error::invalid("DOF vector length is not a multiple of 3ℓ"));
        }
        Ok(Self { comps, dofs })
    }

    /// Nodal interpolation from values and gradients, `f(x) = (v, [∇v_c])`.
    pub fn interpolate<F>(mesh: &TriMesh, comps: usize, f: F) -> Self
    where
        F: Fn([f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>),
    {
        let mut u = Self::zeros(mesh.n_vertices(), comps);
        for (i, &p) in mesh.vertices().iter().enumerate() {
            let (v, g) = f(p);
            for c in 0..comps {
                let o = Self::dof_index(comps, i, c, 0);
                u.dofs[o] = v[c];
                u.dofs[o + 1] = g[c][0];
                u.dofs[o + 2] = g[c][1];
            }
        }
        u
    }

    pub fn comps(&self) -> usize {
        self.comps
    }

    pub fn n_nodes(&self) -> usize {
        self.dofs.len() / (3 * self.comps)
    }

    #[inline]
    pub fn dof_index(comps: usize, node: usize, c: usize, k: usize) -> usize {
        node * 3 * comps + c * 3 + k
    }

    pub fn value(&self, node: usize, c: usize) -> f64 {
        self.dofs[Self::dof_index(self.comps, node, c, 0)]
    }

    pub fn grad(&self, node: usize, c: usize) -> [f64; 2] {
        let o = Self::dof_index(self.comps, node, c, 1);
        [self.dofs[o], self.dofs[o + 1]]
    }

    /// Columns `(∂₁y(z), ∂₂y(z))` of the nodal Jacobian, each of length ℓ.
    pub fn nodal_jacobian(&self, node: usize) -> (Vec<f64>, Vec<f64>) {
        let g: Vec<[f64; 2]> = (0..self.comps).map(|c| self.grad(node, c)).collect();
        (g.iter().map(|v| v[0]).collect(), g.iter().map(|v| v[1]).collect())
    }

    pub fn nodal_value(&self, node: usize) -> Vec<f64> {
        (0..self.comps).map(|c| self.value(node, c)).collect()
    }

    /// Local DOF vector of component `c` on triangle `tri`.
    #[inline]
    pub fn local(&self, tri: &[usize; 3], c: usize) -> [f64; 9] {
        let mut d = [0.0; 9];
        for i in 0..3 {
            let o = Self::dof_index(self.comps, tri[i], c, 0);
            d[3 * i..3 * i + 3].copy_from_slice(&self.dofs[o..o + 3]);
        }
        d
    }

    fn check_mesh(&self, mesh: &TriMesh) -> Result<()> {
        if mesh.n_vertices() != self.n_nodes() {
            return Err(Error::MeshMismatch(format!(
                "field has {} nodes, mesh has {}",
                self.n_nodes(),
                mesh.n_vertices()
            )));
        }
        Ok(())
    }

    /// Value of the reduced cubic on triangle `t` at barycentric `λ`.
    pub fn eval(&self, mesh: &TriMesh, t: usize, l: [f64; 3]) -> Result<Vec<f64>> {
        self.check_mesh(mesh)?;
        let el = DktElement::new(mesh.corners(t));
        let phi = el.value_map(&l);
        let tri = mesh.triangles()[t];
        Ok((0..self.comps).map(|c| dot9(&phi, &self.local(&tri, c))).collect())
    }
}

#[inline]
pub(crate) fn dot9(a: &[f64; 9], b: &[f64; 9]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Continuous piecewise quadratic vector field given by its values at the
/// vertices and side midpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct P2VecField {
    pub vertex: Vec<[f64; 2]>,
    pub side: Vec<[f64; 2]>,
}

impl P2VecField {
    pub fn eval(&self, mesh: &TriMesh, t: usize, l: [f64; 3]) -> [f64; 2] {
        let tri = mesh.triangles()[t];
        let sides = mesh.triangle_sides(t);
        let n = DktElement::p2_values(&l);
        let mut out = [0.0; 2];
        for a in 0..6 {
            let v = if a < 3 { self.vertex[tri[a]] } else { self.side[sides[a - 3]] };
            out[0] += n[a] * v[0];
            out[1] += n[a] * v[1];
        }
        out
    }
}

/// `∇_h` of component `c`, built from the global side data.
pub fn dkt_gradient(mesh: &TriMesh, w: &DktField, c: usize) -> Result<P2VecField> {
    w.check_mesh(mesh)?;
    let vertex = (0..mesh.n_vertices()).map(|v| w.grad(v, c)).collect();
    let side = mesh
        .sides()
        .iter()
        .map(|s| {
            let [a, b] = s.vertices;
            let (ga, gb) = (w.grad(a, c), w.grad(b, c));
            let avg = [0.5 * (ga[0] + gb[0]), 0.5 * (ga[1] + gb[1])];
            let (n, t) = (s.normal, s.tangent);
            let qn = avg[0] * n[0] + avg[1] * n[1];
            let qt = 1.5 / s.length * (w.value(b, c) - w.value(a, c))
                - 0.5 * (avg[0] * t[0] + avg[1] * t[1]);
            [qn * n[0] + qt * t[0], qn * n[1] + qt * t[1]]
        })
        .collect();
    Ok(P2VecField { vertex, side })
}

/// `D_h² w` of component `c` on triangle `t` at `λ`; entry `[α][β] = ∂_β(∇_h w)_α`.
pub fn dkt_hessian(mesh: &TriMesh, w: &DktField, c: usize, t: usize, l: [f64; 3]) -> Result<[[f64; 2]; 2]> {
    w.check_mesh(mesh)?;
    let el = DktElement::new(mesh.corners(t));
    let d = w.local(&mesh.triangles()[t], c);
    let m = el.hessian_map(&l);
    Ok([[dot9(&m[0], &d), dot9(&m[1], &d)], [dot9(&m[2], &d), dot9(&m[3], &d)]])
}

/// Bilinear forms on DKT spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DktForm {
    /// `∫ D_h²v : D_h²w`
    Hessian,
    /// `∫ ∇_h v · ∇_h w`
    Gradient,
    /// `(v, w)_h` on nodal values
    LumpedValue,
}

const CHUNK: usize = 256;

/// Assembles `form` for an `ℓ`-component DKT space.
pub fn assemble_dkt(mesh: &TriMesh, elements: &[DktElement], comps: usize, form: DktForm, exec: Exec) -> CsrMatrix {
    let n = 3 * comps * mesh.n_vertices();
    let parts = exec::map_chunks(exec, mesh.n_triangles(), CHUNK, |range| {
        let mut t = TripletBuilder::with_capacity(n, n, range.len() * 81 * comps);
        for e in range {
            let el = &elements[e];
            let tri = mesh.triangles()[e];
            let k = match form {
                DktForm::Hessian => el.hessian_stiffness(),
                DktForm::Gradient => el.gradient_stiffness(),
                DktForm::LumpedValue => {
                    let mut k = [[0.0; 9]; 9];
                    for i in 0..3 {
                        k[3 * i][3 * i] = el.area / 3.0;
                    }
                    k
                }
            };
            for c in 0..comps {
                let g = |i: usize| DktField::dof_index(comps, tri[i / 3], c, i % 3);
                for i in 0..9 {
                    for j in 0..9 {
                        if k[i][j] != 0.0 {
                            t.push(g(i), g(j), k[i][j]);
                        }
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::rect_tri_mesh;

    fn element() -> DktElement {
        DktElement::new([[0.1, 0.2], [1.3, 0.4], [0.5, 1.1]])
    }

    fn quad_dofs(el: &DktElement, p: impl Fn(f64, f64) -> (f64, f64, f64)) -> [f64; 9] {
        let mut d = [0.0; 9];
        for i in 0..3 {
            let (v, gx, gy) = p(el.corners[i][0], el.corners[i][1]);
            d[3 * i] = v;
            d[3 * i + 1] = gx;
            d[3 * i + 2] = gy;
        }
        d
    }

    #[test]
    fn gradient_exact_for_quadratics() {
        let el = element();
        let p = |x: f64, y: f64| {
            (0.3 * x * x - 1.1 * x * y + 0.7 * y * y + 2.0 * x - y + 0.5, 0.6 * x - 1.1 * y + 2.0, -1.1 * x + 1.4 * y - 1.0)
        };
        let d = quad_dofs(&el, p);
        for l in [[0.2, 0.3, 0.5], [1.0, 0.0, 0.0], [0.0, 0.5, 0.5], [1.0 / 3.0; 3]] {
            let x = l[0] * el.corners[0][0] + l[1] * el.corners[1][0] + l[2] * el.corners[2][0];
            let y = l[0] * el.corners[0][1] + l[1] * el.corners[1][1] + l[2] * el.corners[2][1];
            let g = el.gradient_map(&l);
            let (_, gx, gy) = p(x, y);
            assert!((dot9(&g[0], &d) - gx).abs() < 1e-13);
            assert!((dot9(&g[1], &d) - gy).abs() < 1e-13);
            let h = el.hessian_map(&l);
            let want = [0.6, -1.1, -1.1, 1.4];
            for r in 0..4 {
                assert!((dot9(&h[r], &d) - want[r]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reduced_cubic_reproduces_quadratics_and_midpoint_rule() {
        let el = element();
        let p = |x: f64, y: f64| (x * x - 2.0 * x * y + 3.0 * y + 1.0, 2.0 * x - 2.0 * y, -2.0 * x + 3.0);
        let d = quad_dofs(&el, p);
        let l = [0.15, 0.6, 0.25];
        let x = l[0] * el.corners[0][0] + l[1] * el.corners[1][0] + l[2] * el.corners[2][0];
        let y = l[0] * el.corners[0][1] + l[1] * el.corners[1][1] + l[2] * el.corners[2][1];
        assert!((dot9(&el.value_map(&l), &d) - p(x, y).0).abs() < 1e-12);
        let rd: [f64; 9] = std::array::from_fn(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0);
        let zt = [1.0 / 3.0; 3];
        let pz = dot9(&el.value_map(&zt), &rd);
        let c = el.corners;
        let xt = [(c[0][0] + c[1][0] + c[2][0]) / 3.0, (c[0][1] + c[1][1] + c[2][1]) / 3.0];
        let expected: f64 = (0..3)
            .map(|i| rd[3 * i] / 3.0 + (rd[3 * i + 1] * (xt[0] - c[i][0]) + rd[3 * i + 2] * (xt[1] - c[i][1])) / 6.0)
            .sum::<f64>();
        assert!((pz - expected).abs() < 1e-12);
    }

    #[test]
    fn global_gradient_matches_local_maps() {
        let mesh = rect_tri_mesh(1.0, 1.0, 3, 2).unwrap();
        let mut w = DktField::zeros(mesh.n_vertices(), 1);
        for (i, v) in w.dofs.iter_mut().enumerate() {
            *v = ((i * 7 + 3) % 10) as f64 * 0.1 - 0.4;
        }
        let q = dkt_gradient(&mesh, &w, 0).unwrap();
        let els = dkt_elements(&mesh);
        for (t, el) in els.iter().enumerate() {
            let d = w.local(&mesh.triangles()[t], 0);
            for l in [[0.0, 0.5, 0.5], [0.2, 0.2, 0.6]] {
                let m = el.gradient_map(&l);
                let g = q.eval(&mesh, t, l);
                assert!((dot9(&m[0], &d) - g[0]).abs() < 1e-13);
                assert!((dot9(&m[1], &d) - g[1]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn hessian_form_kernel_is_affine() {
        let mesh = rect_tri_mesh(1.0, 1.0, 2, 2).unwrap();
        let els = dkt_elements(&mesh);
        let k = assemble_dkt(&mesh, &els, 1, DktForm::Hessian, Exec::Serial);
        let w = DktField::interpolate(&mesh, 1, |p| (vec![2.0 * p[0] - p[1] + 1.0], vec![[2.0, -1.0]]));
        let r = k.matvec(&w.dofs);
        assert!(r.iter().all(|v| v.abs() < 1e-12));
        assert!(k.is_symmetric(1e-13));
    }
}
