mod common;

use bendflow::flow::{check_trace, run_flow, FlowParams};
use bendflow::harmonic_map::{HarmonicMapFlow, HmParams};
use bendflow::mesh::{rect_tri_mesh, Mesh1D};
use bendflow::plate::{flat_plate, Bilayer, PlateFlow, PlateParams};
use bendflow::rod::{RodBc, RodFlow, RodParams};
use bendflow::scenarios::{cube_harmonic_map, moebius_initial, strip_ends, strip_left_end, twisted_loop};
use common::*;
use proptest::prelude::*;

fn small_rod() -> (RodFlow, bendflow::rod::RodState, f64) {
    let mesh = Mesh1D::uniform(10.0, 60, false).unwrap();
    let h = mesh.h_max();
    let s0 = twisted_loop(&mesh, 2.0, 2.0).unwrap();
    (RodFlow::new(mesh, RodParams::new(2.0, 1.0, h), RodBc::CLAMPED).unwrap(), s0, h)
}

#[test]
fn rod_nodal_identity() {
    let (mut flow, mut s, h) = small_rod();
    for _ in 0..20 {
        let (next, _, _) = flow.rod_step(&s, h).unwrap();
        let r = rod_identity_residual(&flow, &s, &next);
        assert!(r < 1e-12, "identity residual {r}");
        s = next;
    }
}

#[test]
fn rod_energy_law() {
    let (mut flow, s0, h) = small_rod();
    let (_, trace) = run_flow(&mut flow, s0, &FlowParams::new(h, 1e-3).max_steps(300), |_, _, _| {}).unwrap();
    for c in check_trace(&trace) {
        assert!(c.passed, "{c}");
    }
    assert!(trace.last().unwrap().energy.total() < trace.initial().unwrap().energy.total());
}

#[test]
fn moebius_identity_and_energy_law() {
    let mesh = rect_tri_mesh(10.0, 1.0, 20, 2).unwrap();
    let y0 = moebius_initial(&mesh, 10.0, 1.0);
    let bc = strip_ends(&mesh, 10.0);
    let params = PlateParams { load: [0.0, 0.0, -1e-3], ..Default::default() };
    let mut flow = PlateFlow::new(mesh, params, &bc).unwrap();
    let mut y = y0.clone();
    for _ in 0..5 {
        let (next, _, _) = flow.plate_step(&y, 0.01).unwrap();
        let r = plate_identity_residual(&y, &next);
        assert!(r < 1e-12, "identity residual {r}");
        y = next;
    }
    let (_, trace) = run_flow(&mut flow, y0, &FlowParams::new(0.01, 5e-3).max_steps(100), |_, _, _| {}).unwrap();
    for c in check_trace(&trace) {
        assert!(c.passed, "{c}");
    }
}

#[test]
fn bilayer_energy_decreases() {
    let mesh = rect_tri_mesh(10.0, 4.0, 10, 4).unwrap();
    let h = mesh.h_max();
    let bc = strip_left_end(&mesh);
    let params = PlateParams { bilayer: Some(Bilayer { alpha: -1.0, c_sc: 1.0 }), ..Default::default() };
    let mut flow = PlateFlow::new(mesh.clone(), params, &bc).unwrap();
    let (_, trace) = run_flow(&mut flow, flat_plate(&mesh), &FlowParams::new(h / 20.0, 1e-3).max_steps(60), |_, _, _| {}).unwrap();
    for w in trace.rows.windows(2) {
        assert!(w[1].energy.total() <= w[0].energy.total() + 1e-12);
    }
    assert!(trace.last().unwrap().energy.total() < 0.0);
}

#[test]
fn harmonic_map_energy_law() {
    let (mesh, u0) = cube_harmonic_map(2, 5).unwrap();
    let mut flow = HarmonicMapFlow::on_tets(&mesh, HmParams::default()).unwrap();
    let (_, trace) = run_flow(&mut flow, u0, &FlowParams::new(0.25, 0.025), |_, _, _| {}).unwrap();
    assert!(trace.converged);
    for c in check_trace(&trace) {
        assert!(c.passed, "{c}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn harmonic_map_nodal_identity(seed in 0u64..10_000, tau in 0.01f64..1.0) {
        let (mesh, u0) = cube_harmonic_map(1, seed).unwrap();
        let mut flow = HarmonicMapFlow::on_tets(&mesh, HmParams::default()).unwrap();
        let mut u = u0;
        for _ in 0..3 {
            let (next, _, _) = flow.hm_step(&u, tau).unwrap();
            prop_assert!(hm_identity_residual(&u, &next) < 1e-12);
            u = next;
        }
    }

    #[test]
    fn rod_violation_never_decreases(steps in 1usize..8, fac in 0.2f64..2.0) {
        let (mut flow, mut s, h) = small_rod();
        let mut prev = 0.0;
        for _ in 0..steps {
            s = flow.rod_step(&s, fac * h).unwrap().0;
            let (dy, db) = flow.nodal_defects(&s);
            let total: f64 = dy.iter().chain(&db).sum();
            prop_assert!(dy.iter().chain(&db).all(|v| *v >= -1e-12));
            prop_assert!(total >= prev - 1e-12);
            prev = total;
        }
    }
}
