//! Föppl–von Kármán plates: in-plane displacement `u` (P1) and deflection
//! `w` (DKT), decoupled semi-implicit flow with a Newton solve for `w` and
//! Newton-driven adaptive step sizes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fem::dkt::dkt_elements;
use crate::fem::p1::triangle_gradients;
use crate::fem::{assemble_dkt, dkt_metric, DktField, DktForm, MetricKind, P1Field};
use crate::flow::{Energy, FlowModel, StepInfo, Violation};
use crate::kkt::{NodalConstraintSet, NullspaceMap, ReducedSolver, SolverOptions, Strategy};
use crate::mesh::TriMesh;
use crate::sparse::{norm2, CsrMatrix, TripletBuilder};

#[derive(Clone, Debug)]
pub struct FvkParams {
    /// Thickness `δ`, weighting the bending term by `δ²`.
    pub thickness: f64,
    pub newton_tol: f64,
    pub newton_max: usize,
    /// Step sizes are capped at `10^r`.
    pub r: f64,
    /// Double the step after every accepted step.
    pub adaptive: bool,
    /// Weight `s` of the metric `s(D_h²·, D_h²·) + m(·,·)_h`; `None` uses `δ²`.
    pub metric_weight: Option<f64>,
    pub metric_mass: f64,
    pub exec: Exec,
}

impl Default for FvkParams {
    fn default() -> Self {
        Self { thickness: 1.0 / 40.0, newton_tol: 1e-10, newton_max: 8, r: 2.0, adaptive: true, metric_weight: None, metric_mass: 0.0, exec: Exec::default() }
    }
}

/// Smallest step size before the controller gives up.
pub const TAU_MIN: f64 = 1e-14;

/// Step size after a Newton outcome: halve on rejection, otherwise double
/// up to `10^r`.
pub fn adaptive_controller(tau: f64, accepted: bool, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::invalid(format!("step size exponent must be nonnegative, got {r}")));
    }
    let next = if accepted { (2.0 * tau).min(10f64.powf(r)) } else { 0.5 * tau };
    if next < TAU_MIN {
        return Err(Error::StepSizeUnderflow { tau: next });
    }
    Ok(next)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FvkState {
    pub u: P1Field,
    pub w: DktField,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FvkEnergy {
    pub bend: f64,
    pub membrane: f64,
}

/// Result of the Newton iteration for `d_t w`.
#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub dw: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Residual norms, one per iteration.
    pub residuals: Vec<f64>,
}

/// `ε̃(u) = ∇u + ∇uᵀ` of the local basis function `(vertex i, component c)`.
fn sym_grad_basis(grads: &[[f64; 2]; 3], i: usize, c: usize) -> [[f64; 2]; 2] {
    let mut e = [[0.0; 2]; 2];
    for b in 0..2 {
        e[c][b] += grads[i][b];
        e[b][c] += grads[i][b];
    }
    e
}

fn ddot(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

pub struct FvkFlow {
    mesh: TriMesh,
    params: FvkParams,
    areas: Vec<f64>,
    grads: Vec<[[f64; 2]; 3]>,
    weights: Vec<f64>,
    k_h: CsrMatrix,
    metric_w: CsrMatrix,
    /// `(ε̃(a), ε̃(b))`.
    elastic: CsrMatrix,
    fixed_w: Vec<bool>,
    fixed_u: Vec<bool>,
    map_w: NullspaceMap,
    map_u: NullspaceMap,
    solver_u: ReducedSolver,
    tau_u: Option<f64>,
    /// Newton iterations of the last accepted step.
    pub last_newton: usize,
    /// Number of rejected step sizes so far.
    pub rejections: usize,
}

impl FvkFlow {
    /// `clamped` vertices keep their initial `w` value and gradient and their
    /// initial `u`.
    pub fn new(mesh: TriMesh, params: FvkParams, clamped: &[usize]) -> Result<Self> {
        if !(params.thickness > 0.0 && params.newton_tol > 0.0 && params.newton_max > 0) {
            return Err(Error::invalid("FvK needs δ > 0, ε_N > 0 and N_max > 0"));
        }
        let exec = params.exec;
        let elements = dkt_elements(&mesh);
        let k_h = assemble_dkt(&mesh, &elements, 1, DktForm::Hessian, exec);
        let weight = params.metric_weight.unwrap_or(params.thickness * params.thickness);
        if !(weight > 0.0) {
            return Err(Error::invalid("FvK metric weight must be positive"));
        }
        let metric_w = dkt_metric(&mesh, &elements, 1, MetricKind::H2, params.metric_mass / weight, exec)?.scaled(weight);
        let nv = mesh.n_vertices();
        let mut areas = Vec::with_capacity(mesh.n_triangles());
        let mut grads = Vec::with_capacity(mesh.n_triangles());
        for t in 0..mesh.n_triangles() {
            let (a, g) = triangle_gradients(&mesh.corners(t));
            areas.push(a);
            grads.push(g);
        }
        let mut tb = TripletBuilder::with_capacity(2 * nv, 2 * nv, 36 * mesh.n_triangles());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            for i in 0..3 {
                for c in 0..2 {
                    let ei = sym_grad_basis(&grads[t], i, c);
                    for j in 0..3 {
                        for d in 0..2 {
                            let ej = sym_grad_basis(&grads[t], j, d);
                            tb.push(2 * tri[i] + c, 2 * tri[j] + d, areas[t] * ddot(&ei, &ej));
                        }
                    }
                }
            }
        }
        let elastic = tb.build();
        let mut fixed_w = vec![false; 3 * nv];
        let mut fixed_u = vec![false; 2 * nv];
        for &v in clamped {
            if v >= nv {
                return Err(Error::invalid(format!("clamped vertex {v} out of range")));
            }
            fixed_w[3 * v..3 * v + 3].iter_mut().for_each(|f| *f = true);
            fixed_u[2 * v..2 * v + 2].iter_mut().for_each(|f| *f = true);
        }
        let map_w = NullspaceMap::build(NodalConstraintSet::new(3 * nv), &fixed_w, exec)?;
        let map_u = NullspaceMap::build(NodalConstraintSet::new(2 * nv), &fixed_u, exec)?;
        let weights = mesh.lumped_weights();
        Ok(Self {
            mesh,
            params,
            areas,
            grads,
            weights,
            k_h,
            metric_w,
            elastic,
            fixed_w,
            fixed_u,
            map_w,
            map_u,
            solver_u: ReducedSolver::new(SolverOptions::with_strategy(Strategy::ReducedDirect)),
            tau_u: None,
            last_newton: 0,
            rejections: 0,
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn params(&self) -> &FvkParams {
        &self.params
    }

    fn check(&self, s: &FvkState) -> Result<()> {
        let nv = self.mesh.n_vertices();
        if s.u.comps() != 2 || s.u.n_nodes() != nv || s.w.comps() != 1 || s.w.n_nodes() != nv {
            return Err(Error::MeshMismatch("FvK state does not match the mesh".into()));
        }
        Ok(())
    }

    fn strain(&self, u: &P1Field, t: usize) -> [[f64; 2]; 2] {
        let tri = self.mesh.triangles()[t];
        let mut e = [[0.0; 2]; 2];
        for i in 0..3 {
            for c in 0..2 {
                let b = sym_grad_basis(&self.grads[t], i, c);
                let v = u.at(tri[i])[c];
                for a in 0..2 {
                    for d in 0..2 {
                        e[a][d] += v * b[a][d];
                    }
                }
            }
        }
        e
    }

    pub fn energy_components(&self, s: &FvkState) -> FvkEnergy {
        let d2 = self.params.thickness * self.params.thickness;
        let bend = 0.5 * d2 * self.k_h.bilinear(&s.w.dofs, &s.w.dofs);
        let mut membrane = 0.0;
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let e = self.strain(&s.u, t);
            for &z in tri {
                let g = s.w.grad(z, 0);
                let m = [[e[0][0] + g[0] * g[0], e[0][1] + g[0] * g[1]], [e[1][0] + g[1] * g[0], e[1][1] + g[1] * g[1]]];
                membrane += self.areas[t] / 3.0 * 0.5 * ddot(&m, &m);
            }
        }
        FvkEnergy { bend, membrane }
    }

    /// Nodal `Σ_{T∋z} |T|/3 ε̃_T(u)`.
    fn nodal_strains(&self, u: &P1Field) -> Vec<[[f64; 2]; 2]> {
        let mut s = vec![[[0.0; 2]; 2]; self.mesh.n_vertices()];
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let e = self.strain(u, t);
            for &z in tri {
                for a in 0..2 {
                    for b in 0..2 {
                        s[z][a][b] += self.areas[t] / 3.0 * e[a][b];
                    }
                }
            }
        }
        s
    }

    /// Newton iteration for `d_t w` at step size `tau` from the initial guess `dw0`.
    pub fn w_update_from(&self, s: &FvkState, tau: f64, dw0: &[f64]) -> Result<NewtonOutcome> {
        self.check(s)?;
        let p = &self.params;
        let d2 = p.thickness * p.thickness;
        let nv = self.mesh.n_vertices();
        let strains = self.nodal_strains(&s.u);
        let base = CsrMatrix::lin_comb(1.0, &self.metric_w, tau * d2, &self.k_h)?;
        let kw = self.k_h.matvec(&s.w.dofs);
        let mut dw = dw0.to_vec();
        for (d, f) in dw.iter_mut().zip(&self.fixed_w) {
            if *f {
                *d = 0.0;
            }
        }
        let mut chol = crate::kkt::SparseCholesky::new();
        let mut residuals = Vec::new();
        for it in 1..=p.newton_max {
            // Residual R(d) = (M_⋆ + τδ²K) d + δ²K w + 2 N(g) with nodal terms.
            let mut r = base.matvec(&dw);
            for (ri, k) in r.iter_mut().zip(&kw) {
                *ri += d2 * k;
            }
            let mut jt = TripletBuilder::with_capacity(3 * nv, 3 * nv, 4 * nv);
            for z in 0..nv {
                let g0 = s.w.grad(z, 0);
                let dg = [dw[3 * z + 1], dw[3 * z + 2]];
                let g = [g0[0] + tau * dg[0], g0[1] + tau * dg[1]];
                let gh = [g0[0] + 0.5 * tau * dg[0], g0[1] + 0.5 * tau * dg[1]];
                let m = self.weights[z];
                let gg = g[0] * g[0] + g[1] * g[1];
                let sz = &strains[z];
                for a in 0..2 {
                    r[3 * z + 1 + a] += 2.0 * m * gg * g[a] + 2.0 * (sz[a][0] * gh[0] + sz[a][1] * gh[1]);
                    for b in 0..2 {
                        let delta = if a == b { 1.0 } else { 0.0 };
                        let jab = 2.0 * tau * m * (gg * delta + 2.0 * g[a] * g[b]) + tau * sz[a][b];
                        jt.push(3 * z + 1 + a, 3 * z + 1 + b, jab);
                    }
                }
            }
            for (ri, f) in r.iter_mut().zip(&self.fixed_w) {
                if *f {
                    *ri = 0.0;
                }
            }
            let res = norm2(&r);
            residuals.push(res);
            if !res.is_finite() {
                break;
            }
            if res <= p.newton_tol {
                return Ok(NewtonOutcome { dw, iterations: it, converged: true, residuals });
            }
            if it == p.newton_max {
                break;
            }
            let jac = CsrMatrix::lin_comb(1.0, &base, 1.0, &jt.build())?;
            let ar = jac.congruence(&self.map_w.to_csr());
            let mut rr = vec![0.0; self.map_w.n_reduced()];
            self.map_w.apply_t(&r, &mut rr);
            if chol.factor(&ar).is_err() {
                break;
            }
            chol.solve_in_place(&mut rr)?;
            let mut delta = vec![0.0; dw.len()];
            self.map_w.apply(&rr, &mut delta);
            for (d, x) in dw.iter_mut().zip(&delta) {
                *d -= x;
            }
        }
        let n = residuals.len();
        Ok(NewtonOutcome { dw, iterations: n, converged: false, residuals })
    }

    /// `d_t u` for the given deflection (already advanced).
    pub fn u_update(&mut self, u: &P1Field, w: &DktField, tau: f64) -> Result<Vec<f64>> {
        if self.tau_u != Some(tau) {
            self.solver_u.set_matrix(self.elastic.scaled(1.0 + tau));
            self.tau_u = Some(tau);
        }
        let mut f: Vec<f64> = self.elastic.matvec(&u.values).iter().map(|v| -v).collect();
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let mut gm = [[0.0; 2]; 2];
            for &z in tri {
                let g = w.grad(z, 0);
                for a in 0..2 {
                    for b in 0..2 {
                        gm[a][b] += self.areas[t] / 3.0 * g[a] * g[b];
                    }
                }
            }
            for i in 0..3 {
                for c in 0..2 {
                    f[2 * tri[i] + c] -= ddot(&gm, &sym_grad_basis(&self.grads[t], i, c));
                }
            }
        }
        let out = self.solver_u.solve(&self.map_u, &f)?;
        Ok(out.x)
    }

    /// One accepted step: halves `tau` until Newton succeeds, then updates `u`.
    /// Returns the new state, accepted step size and `(‖d_t w‖_⋆, ‖d_t ε̃(u)‖_†)`.
    pub fn fvk_step(&mut self, s: &FvkState, tau: f64) -> Result<(FvkState, f64, [f64; 2])> {
        self.check(s)?;
        let mut tau = tau;
        let zero = vec![0.0; s.w.dofs.len()];
        let out = loop {
            let out = self.w_update_from(s, tau, &zero)?;
            if out.converged {
                break out;
            }
            self.rejections += 1;
            log::debug!("Newton rejected τ = {tau:e} after {} iterations", out.iterations);
            tau = adaptive_controller(tau, false, self.params.r)?;
        };
        self.last_newton = out.iterations;
        let mut w = s.w.clone();
        for (v, d) in w.dofs.iter_mut().zip(&out.dw) {
            *v += tau * d;
        }
        let du = self.u_update(&s.u, &w, tau)?;
        let mut u = s.u.clone();
        for (v, d) in u.values.iter_mut().zip(&du) {
            *v += tau * d;
        }
        let nw = self.metric_w.bilinear(&out.dw, &out.dw).max(0.0).sqrt();
        let nu = self.elastic.bilinear(&du, &du).max(0.0).sqrt();
        Ok((FvkState { u, w }, tau, [nw, nu]))
    }

    /// Values of `w` at the vertices on the line `x₂ = c` (within `tol`),
    /// ordered by `x₁`.
    pub fn section(&self, w: &DktField, c: f64, tol: f64) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = (0..self.mesh.n_vertices())
            .filter(|&v| (self.mesh.vertices()[v][1] - c).abs() <= tol)
            .map(|v| (self.mesh.vertices()[v][0], w.value(v, 0)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts
    }

    pub fn fixed_u(&self) -> &[bool] {
        &self.fixed_u
    }
}

/// Number of sign changes in a sequence, ignoring entries with
/// `|v| ≤ rel·max|v|`.
pub fn sign_changes(values: &[f64], rel: f64) -> usize {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut last = 0.0f64;
    let mut count = 0;
    for &v in values {
        if v.abs() <= rel * scale {
            continue;
        }
        if last != 0.0 && v.signum() != last.signum() {
            count += 1;
        }
        last = v;
    }
    count
}

impl FlowModel for FvkFlow {
    type State = FvkState;

    fn energy(&self, s: &FvkState) -> Energy {
        let e = self.energy_components(s);
        Energy { bend: e.bend, membrane: e.membrane, ..Default::default() }
    }

    fn violation(&self, _: &FvkState) -> Violation {
        Violation::default()
    }

    fn step(&mut self, s: &FvkState, tau: f64) -> Result<(FvkState, StepInfo)> {
        let (next, tau, [nw, nu]) = self.fvk_step(s, tau)?;
        let next_tau = if self.params.adaptive { adaptive_controller(tau, true, self.params.r)? } else { tau };
        Ok((
            next,
            StepInfo { tau, next_tau, dt_norm: nw.hypot(nu), stop_norm: Some(nw + nu), solver_iters: self.last_newton },
        ))
    }

    fn scaled_stopping(&self) -> bool {
        true
    }
}

/// Unit square with the edge `x₂ = 0` compressed by `compression` (relative)
/// and clamped for `w`; `w` starts from a seeded perturbation of size
/// `amplitude` away from the clamped edge.
pub fn compression_setup(mesh: &TriMesh, compression: f64, amplitude: f64, seed: u64) -> (FvkState, Vec<usize>) {
    let nv = mesh.n_vertices();
    let clamped: Vec<usize> = (0..nv).filter(|&v| mesh.vertices()[v][1].abs() <= 1e-12).collect();
    let mut u = P1Field::zeros(nv, 2);
    for v in 0..nv {
        u.at_mut(v)[0] = -compression * (mesh.vertices()[v][0] - 0.5);
    }
    let mut w = DktField::zeros(nv, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new(-amplitude, amplitude).expect("amplitude must be positive");
    for v in 0..nv {
        if clamped.contains(&v) {
            continue;
        }
        for k in 0..3 {
            w.dofs[3 * v + k] = dist.sample(&mut rng);
        }
    }
    (FvkState { u, w }, clamped)
}
