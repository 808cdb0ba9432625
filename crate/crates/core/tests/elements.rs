mod common;

use bendflow::fem::quadrature::tri_rule;
use bendflow::fem::{
    assemble_dkt, assemble_hermite, dkt_elements, dkt_gradient, dkt_hessian, DktField, DktForm, HermiteField, HermiteForm,
};
use bendflow::mesh::{Mesh1D, TriMesh};
use bendflow::Exec;
use common::*;
use proptest::prelude::*;

fn physical(mesh: &TriMesh, t: usize, l: [f64; 3]) -> [f64; 2] {
    let c = mesh.corners(t);
    [0, 1].map(|k| l[0] * c[0][k] + l[1] * c[1][k] + l[2] * c[2][k])
}

/// `q(x) = a + b·x + xᵀCx/2` with symmetric `C`.
fn quadratic(coef: [f64; 6]) -> impl Fn([f64; 2]) -> (f64, [f64; 2]) {
    move |p| {
        let [a, b0, b1, c00, c01, c11] = coef;
        let v = a + b0 * p[0] + b1 * p[1] + 0.5 * (c00 * p[0] * p[0] + 2.0 * c01 * p[0] * p[1] + c11 * p[1] * p[1]);
        (v, [b0 + c00 * p[0] + c01 * p[1], b1 + c01 * p[0] + c11 * p[1]])
    }
}

#[test]
fn dkt_reproduces_quadratics() {
    let mesh = jittered_mesh(5, 3);
    let coef = [0.3, -1.2, 0.7, 2.0, -0.4, 1.1];
    let q = quadratic(coef);
    let w = DktField::interpolate(&mesh, 1, |p| {
        let (v, g) = q(p);
        (vec![v], vec![g])
    });
    let grad = dkt_gradient(&mesh, &w, 0).unwrap();
    let rule = tri_rule(5);
    for t in 0..mesh.n_triangles() {
        for l in rule.points {
            let x = physical(&mesh, t, *l);
            let (v, g) = q(x);
            let gh = grad.eval(&mesh, t, *l);
            assert!((gh[0] - g[0]).abs() < 1e-12 && (gh[1] - g[1]).abs() < 1e-12, "gradient on {t}");
            let hh = dkt_hessian(&mesh, &w, 0, t, *l).unwrap();
            let exact = [[coef[3], coef[4]], [coef[4], coef[5]]];
            for i in 0..2 {
                for j in 0..2 {
                    assert!((hh[i][j] - exact[i][j]).abs() < 1e-10, "hessian on {t}");
                }
            }
            assert!((w.eval(&mesh, t, *l).unwrap()[0] - v).abs() < 1e-12);
        }
    }
}

#[test]
fn hermite_reproduces_cubics() {
    let mesh = Mesh1D::from_nodes(vec![0.0, 0.13, 0.4, 0.55, 0.9, 1.3], 1.3, false).unwrap();
    let p = |x: f64| (1.0 - 2.0 * x + 0.5 * x * x - 0.7 * x * x * x, -2.0 + x - 2.1 * x * x, 1.0 - 4.2 * x);
    let y = HermiteField::interpolate(&mesh, 1, |x| (vec![p(x).0], vec![p(x).1]));
    for k in 0..=40 {
        let x = 1.3 * k as f64 / 40.0;
        let (v, d, dd) = p(x);
        assert!((y.eval(&mesh, x, 0).unwrap()[0] - v).abs() < 1e-12);
        assert!((y.eval(&mesh, x, 1).unwrap()[0] - d).abs() < 1e-11);
        assert!((y.eval(&mesh, x, 2).unwrap()[0] - dd).abs() < 1e-10);
    }
}

#[test]
fn hermite_forms_match_quadrature() {
    for periodic in [false, true] {
        let mesh = Mesh1D::from_nodes(vec![0.0, 0.2, 0.45, 0.5, 0.8, 1.1, 1.7], 2.0, periodic).unwrap();
        let y = HermiteField::interpolate(&mesh, 2, |x| (vec![x.sin(), x * x], vec![x.cos(), 2.0 * x]));
        let w = HermiteField::interpolate(&mesh, 2, |x| (vec![(2.0 * x).cos(), 1.0 - x], vec![-2.0 * (2.0 * x).sin(), -1.0]));
        for (form, order) in [(HermiteForm::Mass, 0), (HermiteForm::FirstDerivative, 1), (HermiteForm::SecondDerivative, 2)] {
            let a = assemble_hermite(&mesh, 2, form, Exec::Serial);
            let assembled = a.bilinear(&y.dofs, &w.dofs);
            let quad = hermite_form_by_quadrature(&mesh, &y, &w, order);
            assert!((assembled - quad).abs() < 1e-12 * (1.0 + quad.abs()), "{form:?} periodic={periodic}: {assembled} vs {quad}");
        }
    }
}

#[test]
fn dkt_forms_match_quadrature() {
    let mesh = jittered_mesh(6, 11);
    let el = dkt_elements(&mesh);
    let v = smooth_dkt(&mesh, 2.0, 3.0);
    let w = smooth_dkt(&mesh, -1.5, 0.7);
    let kh = assemble_dkt(&mesh, &el, 1, DktForm::Hessian, Exec::Serial);
    let q = dkt_hessian_by_quadrature(&mesh, &v, &w);
    assert!((kh.bilinear(&v.dofs, &w.dofs) - q).abs() < 1e-12 * (1.0 + q.abs()));
    let kg = assemble_dkt(&mesh, &el, 1, DktForm::Gradient, Exec::Serial);
    let q = dkt_gradient_by_quadrature(&mesh, &v, &w);
    assert!((kg.bilinear(&v.dofs, &w.dofs) - q).abs() < 1e-12 * (1.0 + q.abs()));
    let m = assemble_dkt(&mesh, &el, 1, DktForm::LumpedValue, Exec::Serial);
    let beta = mesh.lumped_weights();
    let q: f64 = (0..mesh.n_vertices()).map(|z| beta[z] * v.value(z, 0) * w.value(z, 0)).sum();
    assert!((m.bilinear(&v.dofs, &w.dofs) - q).abs() < 1e-12 * (1.0 + q.abs()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hessian_form_is_symmetric_and_kills_affine(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0) {
        let mesh = jittered_mesh(4, seed);
        let el = dkt_elements(&mesh);
        let k = assemble_dkt(&mesh, &el, 1, DktForm::Hessian, Exec::Serial);
        let affine = DktField::interpolate(&mesh, 1, |p| (vec![a + b * p[0] + c * p[1]], vec![[b, c]]));
        let ka = k.matvec(&affine.dofs);
        prop_assert!(max_abs(&ka) < 1e-10);
        let d = k.to_dense();
        let n = k.nrows();
        for i in 0..n {
            for j in 0..i {
                prop_assert!((d[i * n + j] - d[j * n + i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn parallel_assembly_matches_serial(seed in 0u64..1000, comps in 1usize..4) {
        let mesh = jittered_mesh(5, seed);
        let el = dkt_elements(&mesh);
        for form in [DktForm::Hessian, DktForm::Gradient, DktForm::LumpedValue] {
            let s = assemble_dkt(&mesh, &el, comps, form, Exec::Serial).to_dense();
            let p = assemble_dkt(&mesh, &el, comps, form, Exec::Parallel).to_dense();
            prop_assert!(max_abs_diff(&s, &p) < 1e-13);
        }
    }

    #[test]
    fn dkt_gradient_exact_on_random_quadratics(seed in 0u64..1000, coef in prop::array::uniform6(-3.0f64..3.0)) {
        let mesh = jittered_mesh(3, seed);
        let q = quadratic(coef);
        let w = DktField::interpolate(&mesh, 1, |p| { let (v, g) = q(p); (vec![v], vec![g]) });
        let grad = dkt_gradient(&mesh, &w, 0).unwrap();
        for t in 0..mesh.n_triangles() {
            let l = [0.2, 0.3, 0.5];
            let (_, g) = q(physical(&mesh, t, l));
            let gh = grad.eval(&mesh, t, l);
            prop_assert!((gh[0] - g[0]).abs() < 1e-11 && (gh[1] - g[1]).abs() < 1e-11);
        }
    }
}
