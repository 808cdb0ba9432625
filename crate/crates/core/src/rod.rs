//! Bending–torsion rods: Hermite centerline `y`, P1 director `b`, penalized
//! orthogonality `y′·b = 0`, and the two decoupled constrained steps.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fem::hermite::{element_dofs, element_second_derivative};
use crate::fem::quadrature::gauss_legendre;
use crate::fem::{assemble_hermite, assemble_p1_interval, hermite_metric, p1_interval_metric, HermiteField, HermiteForm, MetricKind, P1Field, P1Form};
use crate::flow::{Energy, FlowModel, StepInfo, Violation};
use crate::kkt::{NodalConstraintSet, NullspaceMap, ReducedSolver, SolverOptions};
use crate::mesh::Mesh1D;
use crate::sparse::{dot, CsrMatrix, TripletBuilder};

/// Bending and torsion rigidities from the Lamé parameters.
pub fn rod_rigidities(lambda: f64, mu: f64) -> Result<(f64, f64)> {
    if !(lambda > 0.0 && mu > 0.0) {
        return Err(Error::invalid(format!("Lamé parameters must be positive (λ={lambda}, μ={mu})")));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok((mu * (3.0 * lambda + 2.0 * mu) / (two_pi * (lambda + mu)), mu / two_pi))
}

/// Boundary condition at one rod end.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RodEnd {
    /// Position, tangent and director kept at their initial values.
    Clamped,
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RodBc {
    pub left: RodEnd,
    pub right: RodEnd,
}

impl RodBc {
    pub const CLAMPED: RodBc = RodBc { left: RodEnd::Clamped, right: RodEnd::Clamped };
}

#[derive(Clone, Debug)]
pub struct RodParams {
    pub c_b: f64,
    pub c_t: f64,
    /// Penalty parameter for `y′·b = 0`.
    pub eps: f64,
    /// Metric `⋆` for the centerline update.
    pub metric_y: MetricKind,
    /// Metric `†` for the director update.
    pub metric_b: MetricKind,
    /// Mass added to the H² seminorm in `⋆`.
    pub metric_mass: f64,
    pub solver: SolverOptions,
    pub exec: Exec,
}

impl RodParams {
    pub fn new(c_b: f64, c_t: f64, eps: f64) -> Self {
        Self {
            c_b,
            c_t,
            eps,
            metric_y: MetricKind::H2,
            metric_b: MetricKind::H1,
            metric_mass: 0.0,
            solver: SolverOptions::default(),
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RodState {
    pub y: HermiteField,
    pub b: P1Field,
}

/// Energy components of the penalized rod functional.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RodEnergy {
    pub bend: f64,
    pub twist_director: f64,
    /// `−(c_t/2) ∫ (Q_h b · y″)²`, never positive.
    pub twist_coupling: f64,
    pub penalty: f64,
}

impl RodEnergy {
    pub fn total(&self) -> f64 {
        self.bend + self.twist_director + self.twist_coupling + self.penalty
    }

    /// Torsion contribution `T_tor`.
    pub fn torsion(&self) -> f64 {
        self.twist_director + self.twist_coupling
    }
}

/// Block of nodal tangent constraints `w′(z)·y′(z) = 0` on the derivative
/// DOFs of every non-fixed node.
pub(crate) fn tangent_constraints(y: &HermiteField, fixed: &[bool]) -> Result<NodalConstraintSet> {
    let l = y.comps();
    let mut set = NodalConstraintSet::new(y.dofs.len());
    for z in 0..y.n_nodes() {
        let d0 = HermiteField::dof_index(l, z, 1, 0);
        if fixed[d0] {
            continue;
        }
        set.push((d0..d0 + l).collect(), 1, y.deriv(z).to_vec())?;
    }
    Ok(set)
}

pub struct RodFlow {
    mesh: Mesh1D,
    params: RodParams,
    k2: CsrMatrix,
    k1_b: CsrMatrix,
    m_y: CsrMatrix,
    m_b: CsrMatrix,
    weights: Vec<f64>,
    fixed_y: Vec<bool>,
    fixed_b: Vec<bool>,
    solver_y: ReducedSolver,
    solver_b: ReducedSolver,
}

impl RodFlow {
    pub fn new(mesh: Mesh1D, params: RodParams, bc: RodBc) -> Result<Self> {
        if !(params.c_b > 0.0 && params.c_t >= 0.0 && params.eps > 0.0) {
            return Err(Error::invalid("rod needs c_b > 0, c_t ≥ 0 and ε > 0"));
        }
        let exec = params.exec;
        let k2 = assemble_hermite(&mesh, 3, HermiteForm::SecondDerivative, exec);
        let k1_b = assemble_p1_interval(&mesh, 3, P1Form::Stiffness, exec);
        let m_y = hermite_metric(&mesh, 3, params.metric_y, params.metric_mass, exec)?;
        let m_b = p1_interval_metric(&mesh, 3, params.metric_b, exec)?;
        let n = mesh.n_nodes();
        let mut fixed_y = vec![false; 6 * n];
        let mut fixed_b = vec![false; 3 * n];
        if !mesh.is_periodic() {
            for (end, node) in [(bc.left, 0), (bc.right, n - 1)] {
                if end == RodEnd::Clamped {
                    fixed_y[6 * node..6 * node + 6].iter_mut().for_each(|f| *f = true);
                    fixed_b[3 * node..3 * node + 3].iter_mut().for_each(|f| *f = true);
                }
            }
        }
        let weights = mesh.lumped_weights();
        let solver_y = ReducedSolver::new(params.solver.clone());
        let solver_b = ReducedSolver::new(params.solver.clone());
        Ok(Self { mesh, params, k2, k1_b, m_y, m_b, weights, fixed_y, fixed_b, solver_y, solver_b })
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn params(&self) -> &RodParams {
        &self.params
    }

    fn check(&self, s: &RodState) -> Result<()> {
        let n = self.mesh.n_nodes();
        if s.y.n_nodes() != n || s.b.n_nodes() != n || s.y.comps() != 3 || s.b.comps() != 3 {
            return Err(Error::MeshMismatch("rod state does not match the mesh".into()));
        }
        Ok(())
    }

    /// Elementwise averages `Q_h b`.
    fn averages(&self, b: &P1Field) -> Vec<[f64; 3]> {
        (0..self.mesh.n_elements())
            .map(|e| {
                let (a, c) = self.mesh.element(e);
                std::array::from_fn(|i| 0.5 * (b.at(a)[i] + b.at(c)[i]))
            })
            .collect()
    }

    pub fn energy_components(&self, s: &RodState) -> RodEnergy {
        let p = &self.params;
        let bend = 0.5 * p.c_b * self.k2.bilinear(&s.y.dofs, &s.y.dofs);
        let twist_director = 0.5 * p.c_t * self.k1_b.bilinear(&s.b.values, &s.b.values);
        let beta = self.averages(&s.b);
        let (xq, wq) = gauss_legendre(2);
        let mut coupling = 0.0;
        for (e, be) in beta.iter().enumerate() {
            let h = self.mesh.element_length(e);
            for (t, w) in xq.iter().zip(&wq) {
                let ypp = s.y.eval_local(&self.mesh, e, *t, 2);
                coupling += w * h * dot(be, &ypp).powi(2);
            }
        }
        let penalty: f64 = (0..self.mesh.n_nodes())
            .map(|z| self.weights[z] * dot(s.y.deriv(z), s.b.at(z)).powi(2))
            .sum::<f64>()
            / (2.0 * p.eps);
        RodEnergy { bend, twist_director, twist_coupling: -0.5 * p.c_t * coupling, penalty }
    }

    /// Nodal defects `|y′(z)|² − 1` and `|b(z)|² − 1`.
    pub fn nodal_defects(&self, s: &RodState) -> (Vec<f64>, Vec<f64>) {
        let n = self.mesh.n_nodes();
        (
            (0..n).map(|z| dot(s.y.deriv(z), s.y.deriv(z)) - 1.0).collect(),
            (0..n).map(|z| dot(s.b.at(z), s.b.at(z)) - 1.0).collect(),
        )
    }

    /// `Σ_e (ββᵀ) ⊗ K2_e` applied to `y`, with `β = Q_h b` on each element.
    fn coupling_action(&self, beta: &[[f64; 3]], y: &HermiteField) -> Vec<f64> {
        let mut out = vec![0.0; y.dofs.len()];
        for (e, be) in beta.iter().enumerate() {
            let k = element_second_derivative(self.mesh.element_length(e));
            let dofs: [[usize; 4]; 3] = std::array::from_fn(|c| element_dofs(&self.mesh, 3, e, c));
            // β·y″ as coefficients on the local basis.
            let mut by = [0.0; 4];
            for c in 0..3 {
                for i in 0..4 {
                    by[i] += be[c] * y.dofs[dofs[c][i]];
                }
            }
            for c in 0..3 {
                for i in 0..4 {
                    let s: f64 = (0..4).map(|j| k[i][j] * by[j]).sum();
                    out[dofs[c][i]] += be[c] * s;
                }
            }
        }
        out
    }

    /// Nodal penalty blocks `m_z v vᵀ` on the given DOF offsets.
    fn penalty_matrix(&self, n_dofs: usize, dof0: impl Fn(usize) -> usize, v: impl Fn(usize) -> [f64; 3]) -> CsrMatrix {
        let mut t = TripletBuilder::with_capacity(n_dofs, n_dofs, 9 * self.mesh.n_nodes());
        for z in 0..self.mesh.n_nodes() {
            let d = dof0(z);
            let vz = v(z);
            for i in 0..3 {
                for j in 0..3 {
                    t.push(d + i, d + j, self.weights[z] * vz[i] * vz[j]);
                }
            }
        }
        t.build()
    }

    fn step_y(&mut self, s: &RodState, tau: f64) -> Result<(Vec<f64>, usize)> {
        let p = self.params.clone();
        let n = s.y.dofs.len();
        let pb = self.penalty_matrix(n, |z| HermiteField::dof_index(3, z, 1, 0), |z| {
            let b = s.b.at(z);
            [b[0], b[1], b[2]]
        });
        let a = CsrMatrix::lin_comb(1.0, &self.m_y, tau * p.c_b, &self.k2)?;
        let a = CsrMatrix::lin_comb(1.0, &a, tau / p.eps, &pb)?;
        let beta = self.averages(&s.b);
        let k2y = self.k2.matvec(&s.y.dofs);
        let pby = pb.matvec(&s.y.dofs);
        let ty = self.coupling_action(&beta, &s.y);
        let f: Vec<f64> = (0..n).map(|i| -p.c_b * k2y[i] - pby[i] / p.eps + p.c_t * ty[i]).collect();
        let set = tangent_constraints(&s.y, &self.fixed_y)?;
        let map = NullspaceMap::build(set, &self.fixed_y, p.exec)?;
        self.solver_y.set_matrix(a);
        let out = self.solver_y.solve(&map, &f)?;
        if !out.converged {
            return Err(Error::NotConverged { iterations: out.iterations, residual: out.rel_residual });
        }
        Ok((out.x, out.iterations))
    }

    fn step_b(&mut self, y: &HermiteField, b_old: &P1Field, tau: f64) -> Result<(Vec<f64>, usize)> {
        let p = self.params.clone();
        let n = b_old.values.len();
        let py = self.penalty_matrix(n, |z| 3 * z, |z| {
            let d = y.deriv(z);
            [d[0], d[1], d[2]]
        });
        let a = CsrMatrix::lin_comb(1.0, &self.m_b, tau * p.c_t, &self.k1_b)?;
        let a = CsrMatrix::lin_comb(1.0, &a, tau / p.eps, &py)?;
        let k1b = self.k1_b.matvec(&b_old.values);
        let pyb = py.matvec(&b_old.values);
        // c_t ∫ (Q_h b^{k−1}·y″)(Q_h r·y″) with Q_h r = (r_a + r_b)/2.
        let beta = self.averages(b_old);
        let (xq, wq) = gauss_legendre(2);
        let mut g = vec![0.0; n];
        for (e, be) in beta.iter().enumerate() {
            let h = self.mesh.element_length(e);
            let (za, zb) = self.mesh.element(e);
            for (t, w) in xq.iter().zip(&wq) {
                let ypp = y.eval_local(&self.mesh, e, *t, 2);
                let s = w * h * dot(be, &ypp);
                for c in 0..3 {
                    g[3 * za + c] += 0.5 * s * ypp[c];
                    g[3 * zb + c] += 0.5 * s * ypp[c];
                }
            }
        }
        let f: Vec<f64> = (0..n).map(|i| -p.c_t * k1b[i] - pyb[i] / p.eps + p.c_t * g[i]).collect();
        let mut set = NodalConstraintSet::new(n);
        for z in 0..self.mesh.n_nodes() {
            if !self.fixed_b[3 * z] {
                set.push(vec![3 * z, 3 * z + 1, 3 * z + 2], 1, b_old.at(z).to_vec())?;
            }
        }
        let map = NullspaceMap::build(set, &self.fixed_b, p.exec)?;
        self.solver_b.set_matrix(a);
        let out = self.solver_b.solve(&map, &f)?;
        if !out.converged {
            return Err(Error::NotConverged { iterations: out.iterations, residual: out.rel_residual });
        }
        Ok((out.x, out.iterations))
    }

    /// One step of the scheme; returns the new state, `(‖d_t y‖_⋆, ‖d_t b‖_†)`
    /// and the inner iteration count.
    pub fn rod_step(&mut self, s: &RodState, tau: f64) -> Result<(RodState, [f64; 2], usize)> {
        self.check(s)?;
        let (dy, it_y) = self.step_y(s, tau)?;
        let mut y = s.y.clone();
        for (v, d) in y.dofs.iter_mut().zip(&dy) {
            *v += tau * d;
        }
        let (db, it_b) = self.step_b(&y, &s.b, tau)?;
        let mut b = s.b.clone();
        for (v, d) in b.values.iter_mut().zip(&db) {
            *v += tau * d;
        }
        let ny = self.m_y.bilinear(&dy, &dy).max(0.0).sqrt();
        let nb = self.m_b.bilinear(&db, &db).max(0.0).sqrt();
        Ok((RodState { y, b }, [ny, nb], it_y + it_b))
    }
}

impl FlowModel for RodFlow {
    type State = RodState;

    fn energy(&self, s: &RodState) -> Energy {
        let e = self.energy_components(s);
        Energy { bend: e.bend, twist: e.torsion(), penalty: e.penalty, ..Default::default() }
    }

    fn violation(&self, s: &RodState) -> Violation {
        let (dy, db) = self.nodal_defects(s);
        let l1 = self.weights.iter().zip(dy.iter().zip(&db)).map(|(m, (a, b))| m * (a.abs() + b.abs())).sum();
        let linf = dy.iter().chain(&db).fold(0.0f64, |m, v| m.max(v.abs()));
        Violation { l1, linf }
    }

    fn step(&mut self, s: &RodState, tau: f64) -> Result<(RodState, StepInfo)> {
        let (next, [ny, nb], iters) = self.rod_step(s, tau)?;
        Ok((
            next,
            StepInfo { tau, next_tau: tau, dt_norm: ny.hypot(nb), stop_norm: Some(ny + nb), solver_iters: iters },
        ))
    }
}

/// Straight rod along `e₁` with director `e₂`.
pub fn straight_rod(mesh: &Mesh1D) -> RodState {
    let y = HermiteField::interpolate(mesh, 3, |x| (vec![x, 0.0, 0.0], vec![1.0, 0.0, 0.0]));
    let mut b = P1Field::zeros(mesh.n_nodes(), 3);
    for z in 0..mesh.n_nodes() {
        b.at_mut(z)[1] = 1.0;
    }
    RodState { y, b }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rigidities_at_unit_lame() {
        let (cb, ct) = rod_rigidities(1.0, 1.0).unwrap();
        assert!((cb - 5.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert!((ct - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert!(rod_rigidities(0.0, 1.0).is_err());
    }

    #[test]
    fn straight_rod_is_stationary() {
        let mesh = Mesh1D::uniform(1.0, 8, false).unwrap();
        let s = straight_rod(&mesh);
        let mut f = RodFlow::new(mesh, RodParams::new(2.0, 1.0, 0.125), RodBc::CLAMPED).unwrap();
        assert_eq!(f.energy_components(&s).total(), 0.0);
        let (next, n, _) = f.rod_step(&s, 0.1).unwrap();
        assert!(n[0] < 1e-14 && n[1] < 1e-14);
        assert!(next.y.dofs.iter().zip(&s.y.dofs).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn tilted_director_penalty() {
        let mesh = Mesh1D::uniform(1.0, 4, false).unwrap();
        let mut s = straight_rod(&mesh);
        let th: f64 = 0.3;
        s.b.at_mut(2).copy_from_slice(&[th.sin(), th.cos(), 0.0]);
        let f = RodFlow::new(mesh, RodParams::new(1.0, 0.0, 0.5), RodBc::CLAMPED).unwrap();
        let e = f.energy_components(&s);
        assert!((e.penalty - 0.25 * th.sin().powi(2) / (2.0 * 0.5)).abs() < 1e-15);
    }
}
