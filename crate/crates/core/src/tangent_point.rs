//! Tangent-point self-avoidance energy for closed Hermite curves and the
//! self-avoiding bending flow with explicit treatment of the potential.

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::fem::hermite::{element_dofs, hermite_basis};
use crate::fem::quadrature::gauss_legendre;
use crate::fem::v3::{cross, sub};
use crate::fem::{assemble_hermite, hermite_metric, HermiteField, HermiteForm, MetricKind};
use crate::flow::{Energy, FlowModel, StepInfo, Violation};
use crate::kkt::{NullspaceMap, ReducedSolver, SolverOptions};
use crate::mesh::Mesh1D;
use crate::rod::tangent_constraints;
use crate::sparse::{dot, CsrMatrix};

#[derive(Clone, Debug)]
pub struct TpParams {
    /// Exponent, must exceed 2.
    pub q: f64,
    /// Weight of the potential in the total energy.
    pub rho: f64,
    /// Gauss points per element.
    pub quad_points: usize,
}

impl Default for TpParams {
    fn default() -> Self {
        Self { q: 3.9, rho: 1e-3, quad_points: 3 }
    }
}

impl TpParams {
    fn validate(&self) -> Result<()> {
        if !(self.q > 2.0) {
            return Err(Error::invalid(format!("tangent-point exponent must exceed 2, got {}", self.q)));
        }
        if self.quad_points == 0 {
            return Err(Error::invalid("need at least one quadrature point per element"));
        }
        Ok(())
    }
}

/// Radius of the circle tangent to the curve at `yx` (unit tangent `t`) that
/// passes through `yz`. Infinite if `yz` lies on the tangent line.
pub fn tp_radius(yx: &[f64; 3], t: &[f64; 3], yz: &[f64; 3]) -> Result<f64> {
    let d = sub(yx, yz);
    let d2 = dot(&d, &d);
    if d2 == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let c = cross(t, &d);
    let g = dot(&c, &c).sqrt() / dot(t, t).sqrt();
    if g == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(d2 / (2.0 * g))
}

/// Quadrature point data: position, first and second derivative, weight.
struct QPoint {
    p: [f64; 3],
    a: [f64; 3],
    s: [f64; 3],
    w: f64,
    elem: usize,
    t: f64,
}

fn quad_points(mesh: &Mesh1D, y: &HermiteField, nq: usize) -> Vec<QPoint> {
    let (xq, wq) = gauss_legendre(nq);
    let mut out = Vec::with_capacity(mesh.n_elements() * nq);
    for e in 0..mesh.n_elements() {
        let h = mesh.element_length(e);
        for (t, w) in xq.iter().zip(&wq) {
            let v = |o| {
                let r = y.eval_local(mesh, e, *t, o);
                [r[0], r[1], r[2]]
            };
            out.push(QPoint { p: v(0), a: v(1), s: v(2), w: w * h, elem: e, t: *t });
        }
    }
    out
}

/// Pair contribution `(2^q/q) |a||c| r^{-q}` without the weights, with its
/// partial derivatives in `(p_x, a, p_z, c)` when requested.
#[inline]
fn pair_term(q: f64, x: &QPoint, z: &QPoint, grad: bool) -> Option<(f64, [[f64; 3]; 3])> {
    let d = sub(&x.p, &z.p);
    let d2 = dot(&d, &d);
    if d2 == 0.0 {
        return None;
    }
    let a = &x.a;
    let a2 = dot(a, a);
    let c2 = dot(&z.a, &z.a);
    let ad = dot(a, &d);
    let g2 = (a2 * d2 - ad * ad).max(0.0);
    if g2 == 0.0 {
        return Some((0.0, [[0.0; 3]; 3]));
    }
    let g = g2.sqrt();
    let f = 2f64.powf(q) / q * (2.0 * g).powf(q) * a2.powf(0.5 * (1.0 - q)) * d2.powf(-q) * c2.sqrt();
    if !grad {
        return Some((f, [[0.0; 3]; 3]));
    }
    // ∂f/∂d, ∂f/∂a, ∂f/∂c
    let mut fd = [0.0; 3];
    let mut fa = [0.0; 3];
    let mut fc = [0.0; 3];
    for i in 0..3 {
        fd[i] = f * (q * (a2 * d[i] - ad * a[i]) / g2 - 2.0 * q * d[i] / d2);
        fa[i] = f * (q * (d2 * a[i] - ad * d[i]) / g2 + (1.0 - q) * a[i] / a2);
        fc[i] = f * z.a[i] / c2;
    }
    Some((f, [fd, fa, fc]))
}

/// Diagonal limit `(2^q/q) κ^q |a|²` with `κ = |a×s|/|a|³`, and its
/// derivatives in `(a, s)`.
#[inline]
fn diagonal_term(q: f64, x: &QPoint, grad: bool) -> (f64, [f64; 3], [f64; 3]) {
    let (a, s) = (&x.a, &x.s);
    let a2 = dot(a, a);
    let s2 = dot(s, s);
    let as_ = dot(a, s);
    let g2 = (a2 * s2 - as_ * as_).max(0.0);
    if g2 == 0.0 {
        return (0.0, [0.0; 3], [0.0; 3]);
    }
    let f = 2f64.powf(q) / q * g2.powf(0.5 * q) * a2.powf(1.0 - 1.5 * q);
    if !grad {
        return (f, [0.0; 3], [0.0; 3]);
    }
    let mut fa = [0.0; 3];
    let mut fs = [0.0; 3];
    for i in 0..3 {
        fa[i] = f * (q * (s2 * a[i] - as_ * s[i]) / g2 + (2.0 - 3.0 * q) * a[i] / a2);
        fs[i] = f * q * (a2 * s[i] - as_ * a[i]) / g2;
    }
    (f, fa, fs)
}

fn check_curve(mesh: &Mesh1D, y: &HermiteField) -> Result<()> {
    if y.comps() != 3 || y.n_nodes() != mesh.n_nodes() {
        return Err(Error::MeshMismatch("tangent-point energy needs a 3-component curve on the mesh".into()));
    }
    Ok(())
}

/// Tensor Gauss quadrature of `(2^q/q) ∬ r^{-q} |y′(x)||y′(z)|` over all
/// ordered pairs of quadrature points. Coinciding points of the same element
/// use the curvature limit. Returns `∞` if two distinct points coincide.
pub fn tp_energy(mesh: &Mesh1D, y: &HermiteField, params: &TpParams, exec: Exec) -> Result<f64> {
    params.validate()?;
    check_curve(mesh, y)?;
    let pts = quad_points(mesh, y, params.quad_points);
    let n = pts.len();
    let parts = exec::map_chunks(exec, n, 16, |range| {
        let mut acc = 0.0;
        for i in range {
            let x = &pts[i];
            for (j, z) in pts.iter().enumerate() {
                if i == j {
                    acc += x.w * x.w * diagonal_term(params.q, x, false).0;
                } else {
                    match pair_term(params.q, x, z, false) {
                        Some((f, _)) => acc += x.w * z.w * f,
                        None => return f64::INFINITY,
                    }
                }
            }
        }
        acc
    });
    Ok(parts.iter().sum())
}

/// Exact derivative of [`tp_energy`] with respect to all Hermite DOFs.
pub fn tp_gradient(mesh: &Mesh1D, y: &HermiteField, params: &TpParams, exec: Exec) -> Result<Vec<f64>> {
    params.validate()?;
    check_curve(mesh, y)?;
    let pts = quad_points(mesh, y, params.quad_points);
    let n = pts.len();
    // Per point: ∂/∂p, ∂/∂a, ∂/∂s.
    let mut failed = std::sync::atomic::AtomicBool::new(false);
    let buf = exec::accumulate(exec, n, 16, 9 * n, |i, out| {
        let x = &pts[i];
        let (_, fa, fs) = diagonal_term(params.q, x, true);
        for c in 0..3 {
            out[9 * i + 3 + c] += x.w * x.w * fa[c];
            out[9 * i + 6 + c] += x.w * x.w * fs[c];
        }
        for (j, z) in pts.iter().enumerate() {
            if i == j {
                continue;
            }
            match pair_term(params.q, x, z, true) {
                Some((_, [fd, fa, fc])) => {
                    let w = x.w * z.w;
                    for c in 0..3 {
                        out[9 * i + c] += w * fd[c];
                        out[9 * j + c] -= w * fd[c];
                        out[9 * i + 3 + c] += w * fa[c];
                        out[9 * j + 3 + c] += w * fc[c];
                    }
                }
                None => failed.store(true, std::sync::atomic::Ordering::Relaxed),
            }
        }
    });
    if *failed.get_mut() {
        return Err(Error::CoincidentPoints);
    }
    let mut g = vec![0.0; y.dofs.len()];
    for (i, x) in pts.iter().enumerate() {
        let h = mesh.element_length(x.elem);
        let phi = [hermite_basis(x.t, h, 0), hermite_basis(x.t, h, 1), hermite_basis(x.t, h, 2)];
        for c in 0..3 {
            let dofs = element_dofs(mesh, 3, x.elem, c);
            for (k, &dof) in dofs.iter().enumerate() {
                g[dof] += (0..3).map(|o| buf[9 * i + 3 * o + c] * phi[o][k]).sum::<f64>();
            }
        }
    }
    Ok(g)
}

/// Smallest distance between quadrature points of elements that do not
/// share a node.
pub fn min_nonneighbor_distance(mesh: &Mesh1D, y: &HermiteField, nq: usize) -> f64 {
    let pts = quad_points(mesh, y, nq);
    let ne = mesh.n_elements();
    let adjacent = |e: usize, f: usize| {
        let d = e.abs_diff(f);
        d <= 1 || (mesh.is_periodic() && d == ne - 1)
    };
    let mut best = f64::INFINITY;
    for (i, x) in pts.iter().enumerate() {
        for z in &pts[i + 1..] {
            if !adjacent(x.elem, z.elem) {
                let d = sub(&x.p, &z.p);
                best = best.min(dot(&d, &d).sqrt());
            }
        }
    }
    best
}

#[derive(Clone, Debug)]
pub struct KnotParams {
    pub c_b: f64,
    pub tp: TpParams,
    pub metric: MetricKind,
    pub metric_mass: f64,
    pub solver: SolverOptions,
    pub exec: Exec,
}

impl Default for KnotParams {
    fn default() -> Self {
        Self { c_b: 10.0, tp: TpParams::default(), metric: MetricKind::H2, metric_mass: 1.0, solver: SolverOptions::default(), exec: Exec::default() }
    }
}

/// Bending flow of a closed inextensible curve with tangent-point repulsion.
pub struct KnotFlow {
    mesh: Mesh1D,
    params: KnotParams,
    k2: CsrMatrix,
    metric: CsrMatrix,
    weights: Vec<f64>,
    fixed: Vec<bool>,
    solver: ReducedSolver,
    tau: Option<f64>,
}

impl KnotFlow {
    pub fn new(mesh: Mesh1D, params: KnotParams) -> Result<Self> {
        params.tp.validate()?;
        if !(params.c_b > 0.0 && params.tp.rho >= 0.0) {
            return Err(Error::invalid("knot flow needs c_b > 0 and ϱ ≥ 0"));
        }
        let k2 = assemble_hermite(&mesh, 3, HermiteForm::SecondDerivative, params.exec);
        let metric = hermite_metric(&mesh, 3, params.metric, params.metric_mass, params.exec)?;
        let weights = mesh.lumped_weights();
        let fixed = vec![false; 6 * mesh.n_nodes()];
        let solver = ReducedSolver::new(params.solver.clone());
        Ok(Self { mesh, params, k2, metric, weights, fixed, solver, tau: None })
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn bending_energy(&self, y: &HermiteField) -> f64 {
        0.5 * self.params.c_b * self.k2.bilinear(&y.dofs, &y.dofs)
    }

    pub fn tp_energy(&self, y: &HermiteField) -> f64 {
        tp_energy(&self.mesh, y, &self.params.tp, self.params.exec).unwrap_or(f64::INFINITY)
    }

    /// Returns the new curve, `‖d_t y‖_⋆` and the inner iteration count.
    pub fn knot_step(&mut self, y: &HermiteField, tau: f64) -> Result<(HermiteField, f64, usize)> {
        check_curve(&self.mesh, y)?;
        let p = &self.params;
        if self.tau != Some(tau) {
            let a = CsrMatrix::lin_comb(1.0, &self.metric, tau * p.c_b, &self.k2)?;
            self.solver.set_matrix(a);
            self.tau = Some(tau);
        }
        let g = tp_gradient(&self.mesh, y, &p.tp, p.exec)?;
        let k2y = self.k2.matvec(&y.dofs);
        let f: Vec<f64> = k2y.iter().zip(&g).map(|(k, g)| -p.c_b * k - p.tp.rho * g).collect();
        let map = NullspaceMap::build(tangent_constraints(y, &self.fixed)?, &self.fixed, p.exec)?;
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

impl FlowModel for KnotFlow {
    type State = HermiteField;

    fn energy(&self, y: &HermiteField) -> Energy {
        Energy { bend: self.bending_energy(y), tp: self.params.tp.rho * self.tp_energy(y), ..Default::default() }
    }

    fn violation(&self, y: &HermiteField) -> Violation {
        let defects: Vec<f64> = (0..y.n_nodes()).map(|z| (dot(y.deriv(z), y.deriv(z)) - 1.0).abs()).collect();
        Violation {
            l1: defects.iter().zip(&self.weights).map(|(d, m)| d * m).sum(),
            linf: defects.iter().fold(0.0, |m: f64, d| m.max(*d)),
        }
    }

    fn step(&mut self, y: &HermiteField, tau: f64) -> Result<(HermiteField, StepInfo)> {
        let (next, norm, iters) = self.knot_step(y, tau)?;
        Ok((next, StepInfo { tau, next_tau: tau, dt_norm: norm, stop_norm: None, solver_iters: iters }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_of_circle_and_line() {
        let r = 1.7;
        let (a, b) = (0.3f64, 2.1f64);
        let yx = [r * a.cos(), r * a.sin(), 0.0];
        let t = [-a.sin(), a.cos(), 0.0];
        let yz = [r * b.cos(), r * b.sin(), 0.0];
        assert!((tp_radius(&yx, &t, &yz).unwrap() - r).abs() < 1e-12);
        assert_eq!(tp_radius(&[0.0; 3], &[1.0, 0.0, 0.0], &[2.0, 0.0, 0.0]).unwrap(), f64::INFINITY);
        assert!(matches!(tp_radius(&[1.0; 3], &[1.0, 0.0, 0.0], &[1.0; 3]), Err(Error::CoincidentPoints)));
    }

    #[test]
    fn rejects_small_exponent() {
        let mesh = Mesh1D::uniform(1.0, 4, true).unwrap();
        let y = HermiteField::zeros(4, 3);
        let p = TpParams { q: 2.0, ..Default::default() };
        assert!(tp_energy(&mesh, &y, &p, Exec::Serial).is_err());
    }
}
