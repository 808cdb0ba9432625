use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use bendflow::fem::dkt::dkt_elements;
use bendflow::fem::{assemble_dkt, DktForm};
use bendflow::mesh::rect_tri_mesh;
use bendflow::scenarios::{closed_curve_from_points, torus_knot};
use bendflow::tangent_point::{tp_gradient, TpParams};
use bendflow::Exec;

fn modes() -> [(&'static str, Exec); 2] {
    [("serial", Exec::Serial), ("parallel", Exec::Parallel)]
}

fn tangent_point(c: &mut Criterion) {
    let (mesh, y) = closed_curve_from_points(&torus_knot(2, 3, 120, 2.0, 1.0)).unwrap();
    let params = TpParams::default();
    let mut g = c.benchmark_group("tp_gradient");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_with_input(BenchmarkId::new(name, mesh.n_elements()), &exec, |b, &exec| {
            b.iter(|| tp_gradient(&mesh, &y, &params, exec).unwrap())
        });
    }
    g.finish();
}

fn dkt_assembly(c: &mut Criterion) {
    let mesh = rect_tri_mesh(10.0, 4.0, 80, 32).unwrap();
    let elements = dkt_elements(&mesh);
    let mut g = c.benchmark_group("dkt_hessian_assembly");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_with_input(BenchmarkId::new(name, mesh.n_triangles()), &exec, |b, &exec| {
            b.iter(|| assemble_dkt(&mesh, &elements, 3, DktForm::Hessian, exec))
        });
    }
    g.finish();
}

criterion_group!(benches, tangent_point, dkt_assembly);
criterion_main!(benches);
