//! Structured interval, triangle and tetrahedral meshes.

mod vtk;

pub use vtk::{read_vtk_points, write_vtk, VtkCells, VtkField, VtkGeometry};

use crate::error::{Error, Result};

/// Partition of `[0, L]`, optionally periodic.
#[derive(Clone, Debug)]
pub struct Mesh1D {
    nodes: Vec<f64>,
    length: f64,
    periodic: bool,
}

impl Mesh1D {
    /// Uniform partition with `n` elements.
    pub fn uniform(length: f64, n: usize, periodic: bool) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::invalid(format!("interval length must be positive, got {length}")));
        }
        if n == 0 {
            return Err(Error::invalid("interval mesh needs at least one element"));
        }
        let count = if periodic { n } else { n + 1 };
        let nodes = (0..count).map(|i| length * i as f64 / n as f64).collect();
        Ok(Self { nodes, length, periodic })
    }

    /// Partition from strictly increasing nodes; for periodic meshes the last
    /// element closes from the last node back to `length`.
    pub fn from_nodes(nodes: Vec<f64>, length: f64, periodic: bool) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::invalid("need at least two nodes"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("nodes must be strictly increasing"));
        }
        if periodic && !(length > *nodes.last().unwrap() - nodes[0]) {
            return Err(Error::invalid("periodic length must exceed the node span"));
        }
        let length = if periodic { length } else { nodes[nodes.len() - 1] - nodes[0] };
        Ok(Self { nodes, length, periodic })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        if self.periodic {
            self.nodes.len()
        } else {
            self.nodes.len() - 1
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Node indices of element `e`.
    #[inline]
    pub fn element(&self, e: usize) -> (usize, usize) {
        (e, (e + 1) % self.nodes.len())
    }

    /// Left coordinate of element `e`.
    #[inline]
    pub fn element_start(&self, e: usize) -> f64 {
        self.nodes[e]
    }

    #[inline]
    pub fn element_length(&self, e: usize) -> f64 {
        if e + 1 < self.nodes.len() {
            self.nodes[e + 1] - self.nodes[e]
        } else {
            self.nodes[0] + self.length - self.nodes[e]
        }
    }

    pub fn h_max(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.element_length(e)).fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.element_length(e)).fold(f64::INFINITY, f64::min)
    }

    /// Lumped mass `Σ_{T∋z} |T|/2` per node.
    pub fn lumped_weights(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_nodes()];
        for e in 0..self.n_elements() {
            let (a, b) = self.element(e);
            let h = self.element_length(e);
            m[a] += h / 2.0;
            m[b] += h / 2.0;
        }
        m
    }

    /// Element containing `x` and the local coordinate `t ∈ [0,1]`.
    pub fn locate(&self, x: f64) -> Result<(usize, f64)> {
        let x0 = self.nodes[0];
        let x = if self.periodic {
            x0 + (x - x0).rem_euclid(self.length)
        } else {
            let xe = *self.nodes.last().unwrap();
            if x < x0 - 1e-12 * self.length || x > xe + 1e-12 * self.length {
                return Err(Error::invalid(format!("point {x} outside [{x0}, {xe}]")));
            }
            x.clamp(x0, xe)
        };
        let e = match self.nodes.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.n_elements() - 1),
            Err(i) => (i - 1).min(self.n_elements() - 1),
        };
        let t = ((x - self.nodes[e]) / self.element_length(e)).clamp(0.0, 1.0);
        Ok((e, t))
    }
}

/// Side of a triangulation.
#[derive(Clone, Copy, Debug)]
pub struct Side {
    /// Endpoints with `vertices[0] < vertices[1]`.
    pub vertices: [usize; 2],
    /// Adjacent triangles, lower index first; `None` on the boundary.
    pub triangles: [Option<usize>; 2],
    pub midpoint: [f64; 2],
    /// Unit normal, pointing from the lower into the higher triangle (outward on the boundary).
    pub normal: [f64; 2],
    /// Unit tangent from `vertices[0]` to `vertices[1]`.
    pub tangent: [f64; 2],
    pub length: f64,
}

/// Conforming triangulation of a planar domain with counter-clockwise triangles.
#[derive(Clone, Debug)]
pub struct TriMesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    sides: Vec<Side>,
    /// Side indices of each triangle; entry `k` is opposite vertex `k`.
    tri_sides: Vec<[usize; 3]>,
    boundary_vertex: Vec<bool>,
}

impl TriMesh {
    pub fn new(vertices: Vec<[f64; 2]>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::MeshMismatch(format!("triangle {t} references a missing vertex")));
            }
            let a = signed_area(&vertices, tri);
            if a.abs() < 1e-300 {
                return Err(Error::MeshMismatch(format!("triangle {t} is degenerate")));
            }
            if a < 0.0 {
                tri.swap(1, 2);
            }
        }
        let mut map = std::collections::HashMap::new();
        let mut sides: Vec<Side> = Vec::new();
        let mut tri_sides = vec![[0usize; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let key = (a.min(b), a.max(b));
                let s = *map.entry(key).or_insert_with(|| {
                    sides.push(Side {
                        vertices: [key.0, key.1],
                        triangles: [None, None],
                        midpoint: [0.0; 2],
                        normal: [0.0; 2],
                        tangent: [0.0; 2],
                        length: 0.0,
                    });
                    sides.len() - 1
                });
                let side = &mut sides[s];
                if side.triangles[0].is_none() {
                    side.triangles[0] = Some(t);
                } else if side.triangles[1].is_none() {
                    side.triangles[1] = Some(t);
                } else {
                    return Err(Error::MeshMismatch(format!("side {key:?} shared by more than two triangles")));
                }
                tri_sides[t][k] = s;
            }
        }
        let mut boundary_vertex = vec![false; vertices.len()];
        for side in &mut sides {
            let [a, b] = side.vertices;
            let (pa, pb) = (vertices[a], vertices[b]);
            let d = [pb[0] - pa[0], pb[1] - pa[1]];
            let len = d[0].hypot(d[1]);
            side.length = len;
            side.tangent = [d[0] / len, d[1] / len];
            side.midpoint = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
            let mut n = [side.tangent[1], -side.tangent[0]];
            let t0 = side.triangles[0].unwrap();
            let c = centroid(&vertices, &triangles[t0]);
            let into_t0 = n[0] * (c[0] - side.midpoint[0]) + n[1] * (c[1] - side.midpoint[1]) > 0.0;
            // Points away from the lower-index triangle in both interior and boundary cases.
            if into_t0 {
                n = [-n[0], -n[1]];
            }
            side.normal = n;
            if side.triangles[1].is_none() {
                boundary_vertex[a] = true;
                boundary_vertex[b] = true;
            }
        }
        Ok(Self { vertices, triangles, sides, tri_sides, boundary_vertex })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    pub fn triangle_sides(&self, t: usize) -> [usize; 3] {
        self.tri_sides[t]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| self.boundary_vertex[v]).collect()
    }

    pub fn boundary_sides(&self) -> Vec<usize> {
        (0..self.sides.len()).filter(|&s| self.sides[s].triangles[1].is_none()).collect()
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn corners(&self, t: usize) -> [[f64; 2]; 3] {
        let tri = self.triangles[t];
        [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]]
    }

    pub fn h_max(&self) -> f64 {
        self.sides.iter().map(|s| s.length).fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        self.sides.iter().map(|s| s.length).fold(f64::INFINITY, f64::min)
    }

    /// Lumped mass `Σ_{T∋z} |T|/3` per vertex.
    pub fn lumped_weights(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let a = self.area(t) / 3.0;
            for &v in tri {
                m[v] += a;
            }
        }
        m
    }

    /// Triangles adjacent to each vertex.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                adj[v].push(t);
            }
        }
        adj
    }
}

fn signed_area(v: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let (a, b, c) = (v[tri[0]], v[tri[1]], v[tri[2]]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn centroid(v: &[[f64; 2]], tri: &[usize; 3]) -> [f64; 2] {
    let s = tri.iter().fold([0.0, 0.0], |acc, &i| [acc[0] + v[i][0], acc[1] + v[i][1]]);
    [s[0] / 3.0, s[1] / 3.0]
}

/// Rectangle `(0,lx)×(0,ly)` split into `nx×ny` squares, each cut along the
/// diagonal from the lower-left to the upper-right corner.
pub fn rect_tri_mesh(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<TriMesh> {
    if !(lx > 0.0 && ly > 0.0) || nx == 0 || ny == 0 {
        return Err(Error::invalid("rectangle dimensions and counts must be positive"));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([lx * i as f64 / nx as f64, ly * j as f64 / ny as f64]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriMesh::new(vertices, triangles)
}

/// Red refinement: every triangle is split into four by its side midpoints.
pub fn uniform_refine(mesh: &TriMesh) -> Result<TriMesh> {
    let nv = mesh.n_vertices();
    let mut vertices = mesh.vertices.clone();
    vertices.extend(mesh.sides.iter().map(|s| s.midpoint));
    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let s = mesh.tri_sides[t];
        // Midpoint opposite vertex k.
        let m = [nv + s[0], nv + s[1], nv + s[2]];
        triangles.push([tri[0], m[2], m[1]]);
        triangles.push([m[2], tri[1], m[0]]);
        triangles.push([m[1], m[0], tri[2]]);
        triangles.push([m[0], m[1], m[2]]);
    }
    TriMesh::new(vertices, triangles)
}

/// Tetrahedral mesh of a 3D domain.
#[derive(Clone, Debug)]
pub struct TetMesh {
    vertices: Vec<[f64; 3]>,
    tets: Vec<[usize; 4]>,
    boundary_vertex: Vec<bool>,
}

impl TetMesh {
    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices()).filter(|&v| self.boundary_vertex[v]).collect()
    }

    pub fn volume(&self, t: usize) -> f64 {
        signed_volume(&self.vertices, &self.tets[t])
    }

    pub fn corners(&self, t: usize) -> [[f64; 3]; 4] {
        let k = self.tets[t];
        [self.vertices[k[0]], self.vertices[k[1]], self.vertices[k[2]], self.vertices[k[3]]]
    }
}

fn signed_volume(v: &[[f64; 3]], t: &[usize; 4]) -> f64 {
    let p0 = v[t[0]];
    let d = |i: usize| [v[t[i]][0] - p0[0], v[t[i]][1] - p0[1], v[t[i]][2] - p0[2]];
    let (a, b, c) = (d(1), d(2), d(3));
    let det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0]);
    det / 6.0
}

/// Cube `(-1/2,1/2)³` with `2^ℓ` cells per direction, each cell split into six
/// Kuhn tetrahedra sharing the main diagonal. This is the mesh obtained from
/// `ℓ` regular refinements of the six-tetrahedron reference cube.
pub fn cube_tet_mesh(refinements: u32) -> Result<TetMesh> {
    if refinements > 9 {
        return Err(Error::invalid("cube refinement level too large"));
    }
    let n = 1usize << refinements;
    let np = n + 1;
    let mut vertices = Vec::with_capacity(np * np * np);
    let mut boundary_vertex = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                let c = |m: usize| -0.5 + m as f64 / n as f64;
                vertices.push([c(i), c(j), c(k)]);
                boundary_vertex.push([i, j, k].iter().any(|&m| m == 0 || m == n));
            }
        }
    }
    let id = |i: usize, j: usize, k: usize| (k * np + j) * np + i;
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for p in PERMS {
                    let mut c = [i, j, k];
                    let mut tet = [id(c[0], c[1], c[2]), 0, 0, 0];
                    for (s, &axis) in p.iter().enumerate() {
                        c[axis] += 1;
                        tet[s + 1] = id(c[0], c[1], c[2]);
                    }
                    if signed_volume(&vertices, &tet) < 0.0 {
                        tet.swap(2, 3);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    Ok(TetMesh { vertices, tets, boundary_vertex })
}
