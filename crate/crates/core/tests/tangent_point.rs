mod common;

use std::f64::consts::PI;

use bendflow::fem::HermiteField;
use bendflow::mesh::Mesh1D;
use bendflow::scenarios::{closed_curve_from_points, torus_knot};
use bendflow::tangent_point::{tp_energy, tp_gradient, TpParams};
use bendflow::Exec;
use common::max_abs;
use proptest::prelude::*;

fn circle(radius: f64, n: usize) -> (Mesh1D, HermiteField) {
    let mesh = Mesh1D::uniform(2.0 * PI * radius, n, true).unwrap();
    let y = HermiteField::interpolate(&mesh, 3, |s| {
        let t = s / radius;
        (vec![radius * t.cos(), radius * t.sin(), 0.0], vec![-t.sin(), t.cos(), 0.0])
    });
    (mesh, y)
}

#[test]
fn circle_energy_matches_closed_form() {
    let p = TpParams::default();
    for radius in [0.5, 1.0, 2.0] {
        let (mesh, y) = circle(radius, 64);
        let e = tp_energy(&mesh, &y, &p, Exec::Serial).unwrap();
        let exact = 2f64.powf(p.q) / p.q * (2.0 * PI * radius).powi(2) * radius.powf(-p.q);
        assert!(((e - exact) / exact).abs() < 1e-2, "radius {radius}: {e} vs {exact}");
    }
}

#[test]
fn energy_scales_with_power_two_minus_q() {
    let (mesh, y) = closed_curve_from_points(&torus_knot(2, 3, 40, 2.0, 1.0)).unwrap();
    for q in [2.5, 3.9, 5.0] {
        let p = TpParams { q, ..TpParams::default() };
        let e = tp_energy(&mesh, &y, &p, Exec::Serial).unwrap();
        for lambda in [0.5, 3.0] {
            let scaled = HermiteField::from_dofs(3, y.dofs.iter().map(|v| lambda * v).collect()).unwrap();
            let es = tp_energy(&mesh, &scaled, &p, Exec::Serial).unwrap();
            let expect = lambda.powf(2.0 - q) * e;
            assert!(((es - expect) / expect).abs() < 1e-12, "q={q} λ={lambda}");
        }
    }
}

#[test]
fn gradient_matches_central_differences() {
    let (mesh, y) = closed_curve_from_points(&torus_knot(2, 3, 24, 2.0, 1.0)).unwrap();
    let p = TpParams::default();
    let g = tp_gradient(&mesh, &y, &p, Exec::Serial).unwrap();
    let h = 1e-6;
    let fd: Vec<f64> = (0..y.dofs.len())
        .map(|i| {
            let mut a = y.clone();
            let mut b = y.clone();
            a.dofs[i] += h;
            b.dofs[i] -= h;
            (tp_energy(&mesh, &a, &p, Exec::Serial).unwrap() - tp_energy(&mesh, &b, &p, Exec::Serial).unwrap()) / (2.0 * h)
        })
        .collect();
    let err: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(err / norm < 1e-6, "relative gradient error {}", err / norm);
}

#[test]
fn parallel_matches_serial() {
    let (mesh, y) = closed_curve_from_points(&torus_knot(2, 3, 30, 2.0, 1.0)).unwrap();
    let p = TpParams::default();
    let es = tp_energy(&mesh, &y, &p, Exec::Serial).unwrap();
    let ep = tp_energy(&mesh, &y, &p, Exec::Parallel).unwrap();
    assert!((es - ep).abs() < 1e-12 * es);
    let gs = tp_gradient(&mesh, &y, &p, Exec::Serial).unwrap();
    let gp = tp_gradient(&mesh, &y, &p, Exec::Parallel).unwrap();
    let diff: Vec<f64> = gs.iter().zip(&gp).map(|(a, b)| a - b).collect();
    assert!(max_abs(&diff) < 1e-10 * max_abs(&gs));
}

/// Rotation about a unit axis by `angle` (Rodrigues).
fn rotation(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let [x, y, z] = axis.map(|a| a / n);
    let (s, c) = angle.sin_cos();
    let k = 1.0 - c;
    [
        [c + x * x * k, x * y * k - z * s, x * z * k + y * s],
        [y * x * k + z * s, c + y * y * k, y * z * k - x * s],
        [z * x * k - y * s, z * y * k + x * s, c + z * z * k],
    ]
}

fn apply(r: &[[f64; 3]; 3], v: &[f64]) -> [f64; 3] {
    [0, 1, 2].map(|i| r[i][0] * v[0] + r[i][1] * v[1] + r[i][2] * v[2])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn invariant_under_rigid_motions(
        axis in prop::array::uniform3(-1.0f64..1.0).prop_filter("nonzero", |a| a.iter().map(|v| v * v).sum::<f64>() > 1e-2),
        angle in 0.0f64..6.28,
        shift in prop::array::uniform3(-5.0f64..5.0),
    ) {
        let (mesh, y) = closed_curve_from_points(&torus_knot(2, 3, 30, 2.0, 1.0)).unwrap();
        let r = rotation(axis, angle);
        let mut moved = y.clone();
        for z in 0..mesh.n_nodes() {
            let v = apply(&r, y.value(z));
            let d = apply(&r, y.deriv(z));
            for c in 0..3 {
                moved.value_mut(z)[c] = v[c] + shift[c];
                moved.deriv_mut(z)[c] = d[c];
            }
        }
        let p = TpParams::default();
        let e0 = tp_energy(&mesh, &y, &p, Exec::Serial).unwrap();
        let e1 = tp_energy(&mesh, &moved, &p, Exec::Serial).unwrap();
        prop_assert!((e0 - e1).abs() < 1e-10 * e0);
    }
}
