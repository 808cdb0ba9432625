//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use bendflow::kkt::NodalConstraintSet;
use bendflow::sparse::CsrMatrix;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Random SPD system with nodal constraint blocks and some fixed nodes.
pub struct Instance {
    pub a: CsrMatrix,
    pub set: NodalConstraintSet,
    pub fixed: Vec<bool>,
    pub f: Vec<f64>,
}

pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let nodes = rng.random_range(3..9);
    let l = rng.random_range(2..4);
    let n = nodes * l;
    let g: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut dense = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let s: f64 = (0..n).map(|k| g[k * n + i] * g[k * n + j]).sum();
            dense[i * n + j] = s + if i == j { 0.5 } else { 0.0 };
        }
    }
    let mut set = NodalConstraintSet::new(n);
    let mut fixed = vec![false; n];
    for z in 0..nodes {
        let dofs: Vec<usize> = (z * l..z * l + l).collect();
        match rng.random_range(0..4) {
            0 => dofs.iter().for_each(|&d| fixed[d] = true),
            1 => {}
            _ => {
                let m = rng.random_range(1..l);
                let b: Vec<f64> = (0..m * l).map(|_| rng.random_range(-1.0..1.0)).collect();
                set.push(dofs, m, b).unwrap();
            }
        }
    }
    let f = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Instance { a: CsrMatrix::from_dense(n, n, &dense), set, fixed, f }
}

/// Dense LU solve of the full KKT system with fixed DOFs as extra constraint rows.
pub fn dense_kkt_oracle(inst: &Instance) -> Vec<f64> {
    let n = inst.a.nrows();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for blk in inst.set.blocks() {
        let l = blk.dofs.len();
        for r in 0..blk.rows {
            let mut row = vec![0.0; n];
            for (j, &d) in blk.dofs.iter().enumerate() {
                row[d] = blk.matrix[r * l + j];
            }
            rows.push(row);
        }
    }
    for (d, &fx) in inst.fixed.iter().enumerate() {
        if fx {
            let mut row = vec![0.0; n];
            row[d] = 1.0;
            rows.push(row);
        }
    }
    let p = rows.len();
    let a = inst.a.to_dense();
    let mut k = DMatrix::zeros(n + p, n + p);
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = a[i * n + j];
        }
    }
    for (r, row) in rows.iter().enumerate() {
        for j in 0..n {
            k[(n + r, j)] = row[j];
            k[(j, n + r)] = row[j];
        }
    }
    let mut rhs = DVector::zeros(n + p);
    for i in 0..n {
        rhs[i] = inst.f[i];
    }
    let sol = k.lu().solve(&rhs).expect("KKT oracle is singular");
    sol.as_slice()[..n].to_vec()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

use bendflow::fem::quadrature::{gauss_legendre, tri_rule};
use bendflow::fem::{dkt_gradient, dkt_hessian, DktField, HermiteField};
use bendflow::mesh::{rect_tri_mesh, Mesh1D, TriMesh};

/// Unit square mesh with interior vertices moved randomly by up to 20% of
/// the grid spacing.
pub fn jittered_mesh(n: usize, seed: u64) -> TriMesh {
    use rand::SeedableRng;
    let base = rect_tri_mesh(1.0, 1.0, n, n).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let h = 1.0 / n as f64;
    let verts = base
        .vertices()
        .iter()
        .map(|&p| {
            let interior = p[0] > 1e-12 && p[0] < 1.0 - 1e-12 && p[1] > 1e-12 && p[1] < 1.0 - 1e-12;
            if interior {
                [p[0] + 0.2 * h * rng.random_range(-1.0..1.0), p[1] + 0.2 * h * rng.random_range(-1.0..1.0)]
            } else {
                p
            }
        })
        .collect();
    TriMesh::new(verts, base.triangles().to_vec()).unwrap()
}

/// `∫ y^(k)·w^(k)` by 4-point Gauss quadrature per element.
pub fn hermite_form_by_quadrature(mesh: &Mesh1D, y: &HermiteField, w: &HermiteField, order: usize) -> f64 {
    let (x, wt) = gauss_legendre(4);
    (0..mesh.n_elements())
        .map(|e| {
            let h = mesh.element_length(e);
            x.iter()
                .zip(&wt)
                .map(|(t, q)| {
                    let a = y.eval_local(mesh, e, *t, order);
                    let b = w.eval_local(mesh, e, *t, order);
                    q * h * a.iter().zip(&b).map(|(p, r)| p * r).sum::<f64>()
                })
                .sum::<f64>()
        })
        .sum()
}

/// `∫ D_h²v : D_h²w` (component 0) with a degree-5 rule.
pub fn dkt_hessian_by_quadrature(mesh: &TriMesh, v: &DktField, w: &DktField) -> f64 {
    let rule = tri_rule(5);
    let mut s = 0.0;
    for t in 0..mesh.n_triangles() {
        for (l, q) in rule.points.iter().zip(rule.weights) {
            let a = dkt_hessian(mesh, v, 0, t, *l).unwrap();
            let b = dkt_hessian(mesh, w, 0, t, *l).unwrap();
            let d = a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1];
            s += q * mesh.area(t) * d;
        }
    }
    s
}

/// `∫ ∇_h v · ∇_h w` (component 0) with a degree-5 rule.
pub fn dkt_gradient_by_quadrature(mesh: &TriMesh, v: &DktField, w: &DktField) -> f64 {
    let rule = tri_rule(5);
    let (gv, gw) = (dkt_gradient(mesh, v, 0).unwrap(), dkt_gradient(mesh, w, 0).unwrap());
    let mut s = 0.0;
    for t in 0..mesh.n_triangles() {
        for (l, q) in rule.points.iter().zip(rule.weights) {
            let a = gv.eval(mesh, t, *l);
            let b = gw.eval(mesh, t, *l);
            s += q * mesh.area(t) * (a[0] * b[0] + a[1] * b[1]);
        }
    }
    s
}

/// Random smooth scalar DKT field from its values and exact gradients.
pub fn smooth_dkt(mesh: &TriMesh, a: f64, b: f64) -> DktField {
    DktField::interpolate(mesh, 1, |p| {
        let v = (a * p[0]).sin() * (b * p[1]).cos() + p[0] * p[1] * p[1];
        let g = [a * (a * p[0]).cos() * (b * p[1]).cos() + p[1] * p[1], -b * (a * p[0]).sin() * (b * p[1]).sin() + 2.0 * p[0] * p[1]];
        (vec![v], vec![g])
    })
}

use bendflow::fem::P1Field;
use bendflow::plate::isometry_defects;
use bendflow::rod::{RodFlow, RodState};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest nodal deviation from `|y′_new|² − |y′_old|² = |y′_new − y′_old|²`
/// and the same for the director.
pub fn rod_identity_residual(flow: &RodFlow, old: &RodState, new: &RodState) -> f64 {
    let (dy0, db0) = flow.nodal_defects(old);
    let (dy1, db1) = flow.nodal_defects(new);
    let mut worst = 0.0f64;
    for z in 0..old.y.n_nodes() {
        let a: Vec<f64> = new.y.deriv(z).iter().zip(old.y.deriv(z)).map(|(p, q)| p - q).collect();
        let b: Vec<f64> = new.b.at(z).iter().zip(old.b.at(z)).map(|(p, q)| p - q).collect();
        worst = worst.max((dy1[z] - dy0[z] - dot(&a, &a)).abs());
        worst = worst.max((db1[z] - db0[z] - dot(&b, &b)).abs());
    }
    worst
}

/// Same identity for the entries of the nodal first fundamental form.
pub fn plate_identity_residual(old: &DktField, new: &DktField) -> f64 {
    let (d0, d1) = (isometry_defects(old), isometry_defects(new));
    let mut worst = 0.0f64;
    for z in 0..old.n_nodes() {
        let (a1, a2) = old.nodal_jacobian(z);
        let (b1, b2) = new.nodal_jacobian(z);
        let g1: Vec<f64> = b1.iter().zip(&a1).map(|(p, q)| p - q).collect();
        let g2: Vec<f64> = b2.iter().zip(&a2).map(|(p, q)| p - q).collect();
        let inc = [dot(&g1, &g1), dot(&g1, &g2), dot(&g2, &g2)];
        for k in 0..3 {
            worst = worst.max((d1[z][k] - d0[z][k] - inc[k]).abs());
        }
    }
    worst
}

/// Same identity for a sphere-valued P1 map.
pub fn hm_identity_residual(old: &P1Field, new: &P1Field) -> f64 {
    let mut worst = 0.0f64;
    for z in 0..old.n_nodes() {
        let d: Vec<f64> = new.at(z).iter().zip(old.at(z)).map(|(p, q)| p - q).collect();
        let lhs = dot(new.at(z), new.at(z)) - dot(old.at(z), old.at(z));
        worst = worst.max((lhs - dot(&d, &d)).abs());
    }
    worst
}
