//! Initial states and boundary data for the experiments.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::fem::{DktField, HermiteField, P1Field};
use crate::harmonic_map::{radial_boundary_data, random_unit_init};
use crate::mesh::{cube_tet_mesh, Mesh1D, TetMesh, TriMesh};
use crate::plate::PlateBc;
use crate::sparse::dot;
use crate::rod::RodState;

/// Planar circle traversed `loops` times, starting at the origin with tangent
/// `e₁`, carrying a director that rotates `turns` times about the tangent.
pub fn twisted_loop(mesh: &Mesh1D, loops: f64, turns: f64) -> Result<RodState> {
    if !(loops > 0.0) {
        return Err(Error::invalid("loop count must be positive"));
    }
    let l = mesh.length();
    let r = l / (2.0 * PI * loops);
    let y = HermiteField::interpolate(mesh, 3, |s| {
        let th = s / r;
        (vec![r * th.sin(), r * (1.0 - th.cos()), 0.0], vec![th.cos(), th.sin(), 0.0])
    });
    let mut b = P1Field::zeros(mesh.n_nodes(), 3);
    for (z, &s) in mesh.nodes().iter().enumerate().take(mesh.n_nodes()) {
        let th = s / r;
        let phi = 2.0 * PI * turns * s / l;
        b.at_mut(z).copy_from_slice(&[-phi.cos() * th.sin(), phi.cos() * th.cos(), phi.sin()]);
    }
    Ok(RodState { y, b })
}

/// Closed curve through the given points, parametrized by cumulative chord
/// length, with centered-difference unit tangents at the nodes.
pub fn closed_curve_from_points(points: &[[f64; 3]]) -> Result<(Mesh1D, HermiteField)> {
    let n = points.len();
    if n < 3 {
        return Err(Error::invalid("a closed curve needs at least three points"));
    }
    let chord = |i: usize| {
        let (a, b) = (points[i], points[(i + 1) % n]);
        let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        dot(&d, &d).sqrt()
    };
    let mut nodes = Vec::with_capacity(n);
    let mut s = 0.0;
    for i in 0..n {
        nodes.push(s);
        let c = chord(i);
        if c == 0.0 {
            return Err(Error::invalid(format!("points {i} and {} coincide", (i + 1) % n)));
        }
        s += c;
    }
    let mesh = Mesh1D::from_nodes(nodes, s, true)?;
    let mut y = HermiteField::zeros(n, 3);
    for i in 0..n {
        let (a, b) = (points[(i + n - 1) % n], points[(i + 1) % n]);
        let t = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let nt = dot(&t, &t).sqrt();
        if nt == 0.0 {
            return Err(Error::invalid(format!("degenerate tangent at point {i}")));
        }
        y.value_mut(i).copy_from_slice(&points[i]);
        y.deriv_mut(i).copy_from_slice(&[t[0] / nt, t[1] / nt, t[2] / nt]);
    }
    Ok((mesh, y))
}

/// `n` points on the `(p, q)` torus knot with radii `big_r > small_r`.
pub fn torus_knot(p: u32, q: u32, n: usize, big_r: f64, small_r: f64) -> Vec<[f64; 3]> {
    (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            let rr = big_r + small_r * (q as f64 * t).cos();
            [rr * (p as f64 * t).cos(), rr * (p as f64 * t).sin(), small_r * (q as f64 * t).sin()]
        })
        .collect()
}

/// Parses one `x y z` triple per line; blank lines and `#` comments are skipped.
pub fn parse_polyline(text: &str) -> Result<Vec<[f64; 3]>> {
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        if vals.len() != 3 {
            return Err(Error::Parse { line: i + 1, message: format!("expected 3 coordinates, found {}", vals.len()) });
        }
        pts.push([vals[0], vals[1], vals[2]]);
    }
    Ok(pts)
}

/// Strip `(0,L)×(0,w)` bent into a circle of circumference `L` whose width
/// direction turns by π about the tangent, so that the end `x₁ = L` lands on
/// `x₁ = 0` with reversed orientation. Nodal gradients are orthonormal.
pub fn moebius_initial(mesh: &TriMesh, length: f64, width: f64) -> DktField {
    let r = length / (2.0 * PI);
    DktField::interpolate(mesh, 3, |p| {
        let th = p[0] / r;
        let t = [th.cos(), 0.0, th.sin()];
        let nrm = [-th.sin(), 0.0, th.cos()];
        let (c, s) = ((0.5 * th).cos(), (0.5 * th).sin());
        let d = [s * nrm[0], c, s * nrm[2]];
        let off = p[1] - 0.5 * width;
        let v = vec![r * th.sin() + off * d[0], 0.5 * width + off * d[1], r * (1.0 - th.cos()) + off * d[2]];
        (v, (0..3).map(|k| [t[k], d[k]]).collect())
    })
}

/// Vertices on the short ends `x₁ = 0` and `x₁ = L`.
pub fn strip_ends(mesh: &TriMesh, length: f64) -> PlateBc {
    let tol = 1e-12 * length;
    PlateBc::where_vertices(mesh, |p| p[0].abs() <= tol || (p[0] - length).abs() <= tol)
}

/// Vertices on the end `x₁ = 0`.
pub fn strip_left_end(mesh: &TriMesh) -> PlateBc {
    PlateBc::where_vertices(mesh, |p| p[0].abs() <= 1e-12)
}

/// Least-squares cylinder through points with given unit normals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CylinderFit {
    pub axis: [f64; 3],
    pub radius: f64,
    /// Root mean square of the radial residuals.
    pub rms: f64,
}

/// The axis is the direction least aligned with the normals; the radius
/// comes from an algebraic circle fit of the projected points.
pub fn fit_cylinder(points: &[[f64; 3]], normals: &[[f64; 3]]) -> Result<CylinderFit> {
    if points.len() < 3 || points.len() != normals.len() {
        return Err(Error::invalid("cylinder fit needs at least three points with normals"));
    }
    let mut nn = Matrix3::zeros();
    for n in normals {
        let v = Vector3::from(*n);
        nn += v * v.transpose();
    }
    let eig = SymmetricEigen::new(nn);
    let (imin, _) = eig.eigenvalues.iter().enumerate().fold((0, f64::INFINITY), |b, (i, &l)| if l < b.1 { (i, l) } else { b });
    let a: Vector3<f64> = eig.eigenvectors.column(imin).into();
    let seed = if a.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = a.cross(&seed).normalize();
    let v = a.cross(&u);
    let proj: Vec<(f64, f64)> = points.iter().map(|p| {
        let p = Vector3::from(*p);
        (p.dot(&u), p.dot(&v))
    }).collect();
    // x² + y² + D x + E y + F = 0
    let mut m = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for &(x, y) in &proj {
        let row = Vector3::new(x, y, 1.0);
        m += row * row.transpose();
        rhs -= row * (x * x + y * y);
    }
    let sol = m.lu().solve(&rhs).ok_or_else(|| Error::invalid("degenerate point set in circle fit"))?;
    let (cx, cy) = (-0.5 * sol.x, -0.5 * sol.y);
    let r2 = cx * cx + cy * cy - sol.z;
    if !(r2 > 0.0) {
        return Err(Error::invalid("circle fit produced no real radius"));
    }
    let radius = r2.sqrt();
    let rms = (proj.iter().map(|&(x, y)| ((x - cx).hypot(y - cy) - radius).powi(2)).sum::<f64>() / proj.len() as f64).sqrt();
    Ok(CylinderFit { axis: [a.x, a.y, a.z], radius, rms })
}

/// Deformed positions and unit normals `∂₁y × ∂₂y / |·|` at the vertices
/// selected by `pred`.
pub fn surface_samples(mesh: &TriMesh, y: &DktField, pred: impl Fn([f64; 2]) -> bool) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for v in (0..mesh.n_vertices()).filter(|&v| pred(mesh.vertices()[v])) {
        let p = y.nodal_value(v);
        let (a, b) = y.nodal_jacobian(v);
        let n = crate::fem::v3::cross(&a, &b);
        let len = dot(&n, &n).sqrt();
        points.push([p[0], p[1], p[2]]);
        normals.push([n[0] / len, n[1] / len, n[2] / len]);
    }
    (points, normals)
}

/// Cube `(-1/2,1/2)³` refined `level` times with boundary data `x/|x|` and
/// seeded random unit vectors inside.
pub fn cube_harmonic_map(level: u32, seed: u64) -> Result<(TetMesh, P1Field)> {
    let mesh = cube_tet_mesh(level)?;
    let ub = radial_boundary_data(&mesh)?;
    let keep: Vec<bool> = (0..mesh.n_vertices()).map(|v| mesh.is_boundary_vertex(v)).collect();
    let u0 = random_unit_init(&ub, &keep, seed);
    Ok((mesh, u0))
}
