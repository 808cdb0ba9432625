//! Harmonic maps into the unit sphere with P1 elements and nodal unit-length
//! constraints; the benchmark problem for the constrained solvers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fem::p1::tet_lumped_weights;
use crate::fem::{assemble_p1_tet, assemble_p1_tri, MetricKind, P1Field, P1Form};
use crate::flow::{Energy, FlowModel, StepInfo, Violation};
use crate::kkt::{NodalConstraintSet, NullspaceMap, ReducedSolver, SolverOptions};
use crate::mesh::{TetMesh, TriMesh};
use crate::sparse::{dot, CsrMatrix};

#[derive(Clone, Debug)]
pub struct HmParams {
    /// Target dimension `d` of the sphere `S^{d−1}`.
    pub comps: usize,
    pub metric: MetricKind,
    pub solver: SolverOptions,
    pub exec: Exec,
}

impl Default for HmParams {
    fn default() -> Self {
        Self { comps: 3, metric: MetricKind::H1, solver: SolverOptions::default(), exec: Exec::default() }
    }
}

/// `x/|x|` at the boundary vertices; zero elsewhere.
pub fn radial_boundary_data(mesh: &TetMesh) -> Result<P1Field> {
    let mut u = P1Field::zeros(mesh.n_vertices(), 3);
    for v in mesh.boundary_vertices() {
        let x = mesh.vertices()[v];
        let r = dot(&x, &x).sqrt();
        if r == 0.0 {
            return Err(Error::invalid(format!("boundary vertex {v} sits at the origin")));
        }
        u.at_mut(v).copy_from_slice(&[x[0] / r, x[1] / r, x[2] / r]);
    }
    Ok(u)
}

/// Seeded uniform samples on the unit sphere at every vertex not flagged in
/// `keep`; flagged vertices retain their values from `u`.
pub fn random_unit_init(u: &P1Field, keep: &[bool], seed: u64) -> P1Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = u.clone();
    let l = u.comps();
    for z in 0..u.n_nodes() {
        if keep[z] {
            continue;
        }
        loop {
            let v: Vec<f64> = (0..l).map(|_| StandardNormal.sample(&mut rng)).collect();
            let r = dot(&v, &v).sqrt();
            if r > 1e-12 {
                out.at_mut(z).iter_mut().zip(&v).for_each(|(o, x)| *o = x / r);
                break;
            }
        }
    }
    out
}

pub struct HarmonicMapFlow {
    comps: usize,
    stiffness: CsrMatrix,
    metric: CsrMatrix,
    weights: Vec<f64>,
    boundary: Vec<bool>,
    fixed: Vec<bool>,
    solver: ReducedSolver,
    exec: Exec,
    tau: Option<f64>,
}

impl HarmonicMapFlow {
    fn build(
        comps: usize,
        stiffness: CsrMatrix,
        metric: CsrMatrix,
        weights: Vec<f64>,
        boundary: Vec<bool>,
        params: &HmParams,
    ) -> Result<Self> {
        let fixed = boundary.iter().flat_map(|&b| std::iter::repeat_n(b, comps)).collect();
        Ok(Self { comps, stiffness, metric, weights, boundary, fixed, solver: ReducedSolver::new(params.solver.clone()), exec: params.exec, tau: None })
    }

    fn metric_matrix(params: &HmParams, k: &CsrMatrix, mass: impl Fn(P1Form) -> CsrMatrix) -> Result<CsrMatrix> {
        match params.metric {
            MetricKind::L2 => Ok(mass(P1Form::LumpedMass)),
            MetricKind::H1 => CsrMatrix::lin_comb(1.0, k, 1.0, &mass(P1Form::Mass)),
            MetricKind::H2 => Err(Error::Unsupported("H² metric for P1 harmonic maps".into())),
        }
    }

    /// Dirichlet conditions on all boundary vertices.
    pub fn on_tets(mesh: &TetMesh, params: HmParams) -> Result<Self> {
        let l = params.comps;
        let k = assemble_p1_tet(mesh, l, P1Form::Stiffness, params.exec);
        let metric = Self::metric_matrix(&params, &k, |f| assemble_p1_tet(mesh, l, f, params.exec))?;
        let boundary = (0..mesh.n_vertices()).map(|v| mesh.is_boundary_vertex(v)).collect();
        Self::build(l, k, metric, tet_lumped_weights(mesh), boundary, &params)
    }

    pub fn on_triangles(mesh: &TriMesh, params: HmParams) -> Result<Self> {
        let l = params.comps;
        let k = assemble_p1_tri(mesh, l, P1Form::Stiffness, params.exec);
        let metric = Self::metric_matrix(&params, &k, |f| assemble_p1_tri(mesh, l, f, params.exec))?;
        let boundary = (0..mesh.n_vertices()).map(|v| mesh.is_boundary_vertex(v)).collect();
        Self::build(l, k, metric, mesh.lumped_weights(), boundary, &params)
    }

    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }

    pub fn solver_options(&self) -> &SolverOptions {
        self.solver.options()
    }

    /// `½ ∫ |∇u|²`.
    pub fn hm_energy(&self, u: &P1Field) -> f64 {
        0.5 * self.stiffness.bilinear(&u.values, &u.values)
    }

    fn check(&self, u: &P1Field) -> Result<()> {
        if u.comps() != self.comps || u.n_nodes() != self.boundary.len() {
            return Err(Error::MeshMismatch("harmonic map field does not match the mesh".into()));
        }
        Ok(())
    }

    /// Computes `d_t u` without advancing the state.
    pub fn update(&mut self, u: &P1Field, tau: f64) -> Result<(Vec<f64>, usize)> {
        self.check(u)?;
        if self.tau != Some(tau) {
            let a = CsrMatrix::lin_comb(1.0, &self.metric, tau, &self.stiffness)?;
            self.solver.set_matrix(a);
            self.tau = Some(tau);
        }
        let l = self.comps;
        let mut set = NodalConstraintSet::new(u.values.len());
        for z in 0..u.n_nodes() {
            if self.boundary[z] {
                continue;
            }
            let uz = u.at(z);
            if dot(uz, uz) == 0.0 {
                return Err(Error::RankDeficient { block: z });
            }
            set.push((l * z..l * z + l).collect(), 1, uz.to_vec())?;
        }
        let map = NullspaceMap::build(set, &self.fixed, self.exec)?;
        let f: Vec<f64> = self.stiffness.matvec(&u.values).iter().map(|v| -v).collect();
        let out = self.solver.solve(&map, &f)?;
        if !out.converged {
            return Err(Error::NotConverged { iterations: out.iterations, residual: out.rel_residual });
        }
        Ok((out.x, out.iterations))
    }

    pub fn hm_step(&mut self, u: &P1Field, tau: f64) -> Result<(P1Field, f64, usize)> {
        let (d, iters) = self.update(u, tau)?;
        let mut next = u.clone();
        for (v, x) in next.values.iter_mut().zip(&d) {
            *v += tau * x;
        }
        Ok((next, self.metric.bilinear(&d, &d).max(0.0).sqrt(), iters))
    }
}

impl FlowModel for HarmonicMapFlow {
    type State = P1Field;

    fn energy(&self, u: &P1Field) -> Energy {
        Energy { bend: self.hm_energy(u), ..Default::default() }
    }

    fn violation(&self, u: &P1Field) -> Violation {
        let d: Vec<f64> = (0..u.n_nodes()).map(|z| (dot(u.at(z), u.at(z)) - 1.0).abs()).collect();
        Violation { l1: d.iter().zip(&self.weights).map(|(a, m)| a * m).sum(), linf: d.iter().fold(0.0, |m: f64, a| m.max(*a)) }
    }

    fn step(&mut self, u: &P1Field, tau: f64) -> Result<(P1Field, StepInfo)> {
        let (next, norm, iters) = self.hm_step(u, tau)?;
        Ok((next, StepInfo { tau, next_tau: tau, dt_norm: norm, stop_norm: None, solver_iters: iters }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::cube_tet_mesh;

    #[test]
    fn radial_data_and_seeded_init() {
        let mesh = cube_tet_mesh(1).unwrap();
        let ub = radial_boundary_data(&mesh).unwrap();
        let corner = mesh.vertices().iter().position(|v| *v == [0.5, 0.5, 0.5]).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!(ub.at(corner).iter().all(|v| (v - s).abs() < 1e-15));
        let keep: Vec<bool> = (0..mesh.n_vertices()).map(|v| mesh.is_boundary_vertex(v)).collect();
        let a = random_unit_init(&ub, &keep, 7);
        let b = random_unit_init(&ub, &keep, 7);
        let c = random_unit_init(&ub, &keep, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((0..mesh.n_vertices()).all(|z| (dot(a.at(z), a.at(z)) - 1.0).abs() < 1e-14));
    }

    #[test]
    fn constant_map_is_stationary() {
        let mesh = cube_tet_mesh(1).unwrap();
        let mut u = P1Field::zeros(mesh.n_vertices(), 3);
        for z in 0..mesh.n_vertices() {
            u.at_mut(z)[0] = 1.0;
        }
        let mut f = HarmonicMapFlow::on_tets(&mesh, HmParams::default()).unwrap();
        let (_, n, _) = f.hm_step(&u, 0.5).unwrap();
        assert!(n < 1e-14);
    }
}
