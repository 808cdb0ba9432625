//! Kirchhoff plates on DKT fields with nodal isometry constraints, optional
//! spontaneous curvature (bilayers) and a constant dead load.

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::fem::dkt::{dkt_elements, dot9, DktElement};
use crate::fem::v3::cross;
use crate::fem::{assemble_dkt, dkt_metric, DktField, DktForm, MetricKind};
use crate::flow::{Energy, FlowModel, StepInfo, Violation};
use crate::kkt::{NodalConstraintSet, NullspaceMap, ReducedSolver, SolverOptions};
use crate::mesh::TriMesh;
use crate::sparse::{dot, CsrMatrix};

/// Plate rigidity and the coefficients of `Q_plate(M) = c₁|M|² + c₂ tr(M)²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlateRigidities {
    pub c_b: f64,
    pub c1: f64,
    pub c2: f64,
}

impl PlateRigidities {
    pub fn q_plate(&self, m: [[f64; 2]; 2]) -> f64 {
        let frob: f64 = m.iter().flatten().map(|v| v * v).sum();
        let tr = m[0][0] + m[1][1];
        self.c1 * frob + self.c2 * tr * tr
    }
}

pub fn plate_rigidities(lambda: f64, mu: f64) -> Result<PlateRigidities> {
    if !(lambda >= 0.0 && mu > 0.0) {
        return Err(Error::invalid(format!("need λ ≥ 0 and μ > 0 (λ={lambda}, μ={mu})")));
    }
    Ok(PlateRigidities {
        c_b: 2.0 * mu + lambda * 2.0 * mu / (2.0 * mu + lambda),
        c1: 2.0 * mu,
        c2: lambda * mu / (mu + 0.5 * lambda),
    })
}

/// Spontaneous curvature term `α c_sc ∫ Î_h[Δ_h y · (∂₁y × ∂₂y)]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bilayer {
    pub alpha: f64,
    pub c_sc: f64,
}

#[derive(Clone, Debug)]
pub struct PlateParams {
    pub c_b: f64,
    pub bilayer: Option<Bilayer>,
    /// Constant dead load `f`, entering as `−(f, y)_h`.
    pub load: [f64; 3],
    pub metric: MetricKind,
    pub metric_mass: f64,
    pub solver: SolverOptions,
    pub exec: Exec,
}

impl Default for PlateParams {
    fn default() -> Self {
        Self {
            c_b: 1.0,
            bilayer: None,
            load: [0.0; 3],
            metric: MetricKind::H2,
            metric_mass: 0.0,
            solver: SolverOptions::default(),
            exec: Exec::default(),
        }
    }
}

/// Clamped vertices; their values and gradients keep the initial data.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlateBc {
    pub clamped: Vec<usize>,
}

impl PlateBc {
    pub fn where_vertices(mesh: &TriMesh, pred: impl Fn([f64; 2]) -> bool) -> Self {
        Self { clamped: (0..mesh.n_vertices()).filter(|&v| pred(mesh.vertices()[v])).collect() }
    }
}

/// Plate energy components.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PlateEnergy {
    pub bend: f64,
    pub spontaneous: f64,
    pub load: f64,
}

impl PlateEnergy {
    pub fn total(&self) -> f64 {
        self.bend + self.spontaneous + self.load
    }
}

/// Nodal isometry residual `(∂₁y·∂₁y − 1, ∂₁y·∂₂y, ∂₂y·∂₂y − 1)`.
pub fn isometry_defects(y: &DktField) -> Vec<[f64; 3]> {
    (0..y.n_nodes())
        .map(|z| {
            let (g1, g2) = y.nodal_jacobian(z);
            [dot(&g1, &g1) - 1.0, dot(&g1, &g2), dot(&g2, &g2) - 1.0]
        })
        .collect()
}

fn frobenius(d: &[f64; 3]) -> f64 {
    (d[0] * d[0] + 2.0 * d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Linearized isometry constraints `sym((∇y)ᵀ∇w)(z) = 0` on the six gradient
/// DOFs `[∂₁w_0..2, ∂₂w_0..2]` of every non-clamped node.
pub fn isometry_constraints(y: &DktField, fixed: &[bool]) -> Result<NodalConstraintSet> {
    if y.comps() != 3 {
        return Err(Error::invalid("isometry constraints need a 3-component deformation"));
    }
    let mut set = NodalConstraintSet::new(y.dofs.len());
    for z in 0..y.n_nodes() {
        if fixed[DktField::dof_index(3, z, 0, 1)] {
            continue;
        }
        let (g1, g2) = y.nodal_jacobian(z);
        let dofs: Vec<usize> = (1..3).flat_map(|k| (0..3).map(move |c| DktField::dof_index(3, z, c, k))).collect();
        let mut m = vec![0.0; 18];
        for c in 0..3 {
            m[c] = 2.0 * g1[c];
            m[6 + 3 + c] = 2.0 * g2[c];
            m[12 + c] = g2[c];
            m[12 + 3 + c] = g1[c];
        }
        set.push(dofs, 3, m)?;
    }
    Ok(set)
}

/// Elementwise data at a vertex: Laplacian rows per vertex of the element.
fn laplacian_rows(el: &DktElement) -> [[f64; 9]; 3] {
    std::array::from_fn(|i| {
        let mut l = [0.0; 3];
        l[i] = 1.0;
        let h = el.hessian_map(&l);
        std::array::from_fn(|d| h[0][d] + h[3][d])
    })
}

pub struct PlateFlow {
    mesh: TriMesh,
    elements: Vec<DktElement>,
    laplacians: Vec<[[f64; 9]; 3]>,
    params: PlateParams,
    k_h: CsrMatrix,
    metric: CsrMatrix,
    weights: Vec<f64>,
    fixed: Vec<bool>,
    solver: ReducedSolver,
    tau: Option<f64>,
}

impl PlateFlow {
    pub fn new(mesh: TriMesh, params: PlateParams, bc: &PlateBc) -> Result<Self> {
        if !(params.c_b > 0.0) {
            return Err(Error::invalid("plate needs c_b > 0"));
        }
        let elements = dkt_elements(&mesh);
        let laplacians = elements.iter().map(laplacian_rows).collect();
        let k_h = assemble_dkt(&mesh, &elements, 3, DktForm::Hessian, params.exec);
        let metric = dkt_metric(&mesh, &elements, 3, params.metric, params.metric_mass, params.exec)?;
        let mut fixed = vec![false; 9 * mesh.n_vertices()];
        for &v in &bc.clamped {
            if v >= mesh.n_vertices() {
                return Err(Error::invalid(format!("clamped vertex {v} out of range")));
            }
            fixed[9 * v..9 * v + 9].iter_mut().for_each(|f| *f = true);
        }
        let weights = mesh.lumped_weights();
        let solver = ReducedSolver::new(params.solver.clone());
        Ok(Self { mesh, elements, laplacians, params, k_h, metric, weights, fixed, solver, tau: None })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn params(&self) -> &PlateParams {
        &self.params
    }

    fn check(&self, y: &DktField) -> Result<()> {
        if y.comps() != 3 || y.n_nodes() != self.mesh.n_vertices() {
            return Err(Error::MeshMismatch("plate deformation does not match the mesh".into()));
        }
        Ok(())
    }

    /// Checks that clamped gradients have orthonormal columns.
    pub fn check_boundary_data(&self, y: &DktField, tol: f64) -> Result<()> {
        for (z, d) in isometry_defects(y).iter().enumerate() {
            if self.fixed[9 * z] && frobenius(d) > tol {
                return Err(Error::invalid(format!("clamped gradient at vertex {z} is not orthonormal")));
            }
        }
        Ok(())
    }

    /// `Δ_h y` of all three components at local vertex `i` of triangle `t`.
    fn laplacian_at(&self, y: &DktField, t: usize, i: usize) -> [f64; 3] {
        let tri = self.mesh.triangles()[t];
        std::array::from_fn(|c| dot9(&self.laplacians[t][i], &y.local(&tri, c)))
    }

    pub fn energy_components(&self, y: &DktField) -> PlateEnergy {
        let bend = 0.5 * self.params.c_b * self.k_h.bilinear(&y.dofs, &y.dofs);
        let spontaneous = match self.params.bilayer {
            Some(b) => {
                let s = exec::sum(self.params.exec, self.mesh.n_triangles(), 256, |t| {
                    let tri = self.mesh.triangles()[t];
                    let mut acc = 0.0;
                    for i in 0..3 {
                        let (g1, g2) = y.nodal_jacobian(tri[i]);
                        acc += dot(&self.laplacian_at(y, t, i), &cross(&g1, &g2));
                    }
                    acc * self.elements[t].area / 3.0
                });
                b.alpha * b.c_sc * s
            }
            None => 0.0,
        };
        let load = -(0..self.mesh.n_vertices())
            .map(|z| self.weights[z] * dot(&self.params.load, &y.nodal_value(z)))
            .sum::<f64>();
        PlateEnergy { bend, spontaneous, load }
    }

    /// First variation of the spontaneous curvature term at `y`.
    pub fn spontaneous_gradient(&self, y: &DktField) -> Vec<f64> {
        let n = y.dofs.len();
        let Some(b) = self.params.bilayer else {
            return vec![0.0; n];
        };
        let scale = b.alpha * b.c_sc;
        let mesh = &self.mesh;
        exec::accumulate(self.params.exec, mesh.n_triangles(), 256, n, |t, out| {
            let tri = mesh.triangles()[t];
            let w = scale * self.elements[t].area / 3.0;
            for i in 0..3 {
                let z = tri[i];
                let (g1, g2) = y.nodal_jacobian(z);
                let nrm = cross(&g1, &g2);
                let lap = self.laplacian_at(y, t, i);
                let row = &self.laplacians[t][i];
                for c in 0..3 {
                    for (j, r) in row.iter().enumerate() {
                        out[DktField::dof_index(3, tri[j / 3], c, j % 3)] += w * nrm[c] * r;
                    }
                }
                let d1 = cross(&g2, &lap);
                let d2 = cross(&lap, &g1);
                for c in 0..3 {
                    out[DktField::dof_index(3, z, c, 1)] += w * d1[c];
                    out[DktField::dof_index(3, z, c, 2)] += w * d2[c];
                }
            }
        })
    }

    /// Nodal `Δ_h y · ν` with the unit normal `ν`, averaged over the
    /// triangles adjacent to each vertex.
    pub fn mean_curvature(&self, y: &DktField) -> Result<Vec<f64>> {
        self.check(y)?;
        let nv = self.mesh.n_vertices();
        let mut sum = vec![0.0; nv];
        let mut count = vec![0usize; nv];
        for t in 0..self.mesh.n_triangles() {
            let tri = self.mesh.triangles()[t];
            for i in 0..3 {
                let (g1, g2) = y.nodal_jacobian(tri[i]);
                let nrm = cross(&g1, &g2);
                let len = dot(&nrm, &nrm).sqrt();
                if len == 0.0 {
                    return Err(Error::RankDeficient { block: tri[i] });
                }
                sum[tri[i]] += dot(&self.laplacian_at(y, t, i), &nrm) / len;
                count[tri[i]] += 1;
            }
        }
        Ok(sum.iter().zip(&count).map(|(s, c)| s / (*c).max(1) as f64).collect())
    }

    /// One step; returns the new deformation, `‖d_t y‖_⋆` and inner iterations.
    pub fn plate_step(&mut self, y: &DktField, tau: f64) -> Result<(DktField, f64, usize)> {
        self.check(y)?;
        let p = &self.params;
        if self.tau != Some(tau) {
            let a = CsrMatrix::lin_comb(1.0, &self.metric, tau * p.c_b, &self.k_h)?;
            self.solver.set_matrix(a);
            self.tau = Some(tau);
        }
        let ky = self.k_h.matvec(&y.dofs);
        let gs = self.spontaneous_gradient(y);
        let mut f: Vec<f64> = ky.iter().zip(&gs).map(|(k, g)| -p.c_b * k - g).collect();
        if p.load != [0.0; 3] {
            for z in 0..self.mesh.n_vertices() {
                for c in 0..3 {
                    f[DktField::dof_index(3, z, c, 0)] += self.weights[z] * p.load[c];
                }
            }
        }
        let map = NullspaceMap::build(isometry_constraints(y, &self.fixed)?, &self.fixed, p.exec)?;
        let out = self.solver.solve(&map, &f)?;
        if !out.converged {
            return Err(Error::NotConverged { iterations: out.iterations, residual: out.rel_residual });
        }
        let mut next = y.clone();
        for (v, d) in next.dofs.iter_mut().zip(&out.x) {
            *v += tau * d;
        }
        Ok((next, self.metric.bilinear(&out.x, &out.x).max(0.0).sqrt(), out.iterations))
    }
}

impl FlowModel for PlateFlow {
    type State = DktField;

    fn energy(&self, y: &DktField) -> Energy {
        let e = self.energy_components(y);
        Energy { bend: e.bend, other: e.spontaneous + e.load, ..Default::default() }
    }

    fn violation(&self, y: &DktField) -> Violation {
        let d: Vec<f64> = isometry_defects(y).iter().map(frobenius).collect();
        Violation {
            l1: d.iter().zip(&self.weights).map(|(a, m)| a * m).sum(),
            linf: d.iter().fold(0.0, |m: f64, a| m.max(*a)),
        }
    }

    fn step(&mut self, y: &DktField, tau: f64) -> Result<(DktField, StepInfo)> {
        let (next, norm, iters) = self.plate_step(y, tau)?;
        Ok((next, StepInfo { tau, next_tau: tau, dt_norm: norm, stop_norm: None, solver_iters: iters }))
    }
}

/// Flat embedding `y(x) = (x, 0)`.
pub fn flat_plate(mesh: &TriMesh) -> DktField {
    DktField::interpolate(mesh, 3, |p| (vec![p[0], p[1], 0.0], vec![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::rect_tri_mesh;

    #[test]
    fn rigidities() {
        let r = plate_rigidities(1.0, 1.0).unwrap();
        assert!((r.c_b - 8.0 / 3.0).abs() < 1e-15);
        let r0 = plate_rigidities(0.0, 1.5).unwrap();
        assert_eq!((r0.c_b, r0.c2), (3.0, 0.0));
        assert!((r.q_plate([[1.0, 0.0], [0.0, 1.0]]) - (2.0 * r.c1 + 4.0 * r.c2)).abs() < 1e-15);
    }

    #[test]
    fn flat_plate_constraints_annihilate_kernel() {
        let mesh = rect_tri_mesh(1.0, 1.0, 2, 2).unwrap();
        let y = flat_plate(&mesh);
        let fixed = vec![false; y.dofs.len()];
        let set = isometry_constraints(&y, &fixed).unwrap();
        let map = NullspaceMap::build(set.clone(), &fixed, Exec::Serial).unwrap();
        let b = set.to_csr();
        let c = map.to_csr();
        let bc = b.matmul(&c);
        assert!(bc.values().iter().all(|v| v.abs() < 1e-14));
        assert_eq!(map.n_reduced(), y.dofs.len() - 3 * mesh.n_vertices());
    }

    #[test]
    fn flat_plate_has_zero_energy_and_is_stationary() {
        let mesh = rect_tri_mesh(2.0, 1.0, 4, 2).unwrap();
        let y = flat_plate(&mesh);
        let bc = PlateBc::where_vertices(&mesh, |p| p[0] == 0.0);
        let mut f = PlateFlow::new(mesh, PlateParams::default(), &bc).unwrap();
        assert!(f.energy_components(&y).total().abs() < 1e-12);
        let (_, n, _) = f.plate_step(&y, 0.1).unwrap();
        assert!(n < 1e-12);
        assert!(f.mean_curvature(&y).unwrap().iter().all(|h| h.abs() < 1e-12));
    }
}
