//! Legacy ASCII VTK output.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub enum VtkCells {
    /// Polyline through all points, closed if requested.
    Polyline { closed: bool },
    Triangles(Vec<[usize; 3]>),
    /// Quadratic triangles (corner, corner, corner, mid01, mid12, mid20).
    QuadraticTriangles(Vec<[usize; 6]>),
    Tetrahedra(Vec<[usize; 4]>),
}

#[derive(Clone, Debug)]
pub struct VtkGeometry {
    pub points: Vec<[f64; 3]>,
    pub cells: VtkCells,
}

#[derive(Clone, Debug)]
pub enum VtkField {
    Scalars(String, Vec<f64>),
    Vectors(String, Vec<[f64; 3]>),
}

impl VtkField {
    fn len(&self) -> usize {
        match self {
            VtkField::Scalars(_, v) => v.len(),
            VtkField::Vectors(_, v) => v.len(),
        }
    }

    fn name(&self) -> &str {
        match self {
            VtkField::Scalars(n, _) | VtkField::Vectors(n, _) => n,
        }
    }
}

fn render(geom: &VtkGeometry, fields: &[VtkField], title: &str) -> Result<String> {
    let np = geom.points.len();
    for f in fields {
        if f.len() != np {
            return Err(Error::MeshMismatch(format!(
                "field '{}' has {} values for {} points",
                f.name(),
                f.len(),
                np
            )));
        }
        if f.name().contains(char::is_whitespace) || f.name().is_empty() {
            return Err(Error::invalid(format!("invalid VTK field name '{}'", f.name())));
        }
    }
    let mut s = String::new();
    let title = title.lines().next().unwrap_or("");
    writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII").unwrap();
    let polydata = matches!(geom.cells, VtkCells::Polyline { .. });
    if polydata {
        s.push_str("DATASET POLYDATA\n");
    } else {
        s.push_str("DATASET UNSTRUCTURED_GRID\n");
    }
    writeln!(s, "POINTS {np} double").unwrap();
    for p in &geom.points {
        writeln!(s, "{:.16e} {:.16e} {:.16e}", p[0], p[1], p[2]).unwrap();
    }
    match &geom.cells {
        VtkCells::Polyline { closed } => {
            let mut idx: Vec<usize> = (0..np).collect();
            if *closed && np > 0 {
                idx.push(0);
            }
            writeln!(s, "LINES 1 {}", idx.len() + 1).unwrap();
            write!(s, "{}", idx.len()).unwrap();
            for i in idx {
                write!(s, " {i}").unwrap();
            }
            s.push('\n');
        }
        VtkCells::Triangles(c) => write_cells(&mut s, c, 5),
        VtkCells::QuadraticTriangles(c) => write_cells(&mut s, c, 22),
        VtkCells::Tetrahedra(c) => write_cells(&mut s, c, 10),
    }
    if !fields.is_empty() {
        writeln!(s, "POINT_DATA {np}").unwrap();
        for f in fields {
            match f {
                VtkField::Scalars(name, v) => {
                    writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
                    for x in v {
                        writeln!(s, "{x:.16e}").unwrap();
                    }
                }
                VtkField::Vectors(name, v) => {
                    writeln!(s, "VECTORS {name} double").unwrap();
                    for x in v {
                        writeln!(s, "{:.16e} {:.16e} {:.16e}", x[0], x[1], x[2]).unwrap();
                    }
                }
            }
        }
    }
    Ok(s)
}

fn write_cells<const K: usize>(s: &mut String, cells: &[[usize; K]], kind: u8) {
    writeln!(s, "CELLS {} {}", cells.len(), cells.len() * (K + 1)).unwrap();
    for c in cells {
        write!(s, "{K}").unwrap();
        for i in c {
            write!(s, " {i}").unwrap();
        }
        s.push('\n');
    }
    writeln!(s, "CELL_TYPES {}", cells.len()).unwrap();
    for _ in cells {
        writeln!(s, "{kind}").unwrap();
    }
}

/// Writes a legacy ASCII VTK file with point data.
pub fn write_vtk(path: &Path, geom: &VtkGeometry, fields: &[VtkField], title: &str) -> Result<()> {
    let s = render(geom, fields, title)?;
    std::fs::write(path, s)?;
    Ok(())
}

/// Reads back the `POINTS` block of a legacy ASCII VTK file.
pub fn read_vtk_points(path: &Path) -> Result<Vec<[f64; 3]>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let n = loop {
        let (i, line) = lines.next().ok_or(Error::Parse { line: 0, message: "no POINTS section".into() })?;
        if let Some(rest) = line.strip_prefix("POINTS ") {
            let count = rest.split_whitespace().next().unwrap_or("");
            break count.parse::<usize>().map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        }
    };
    let mut nums = Vec::with_capacity(3 * n);
    for (i, line) in lines {
        for tok in line.split_whitespace() {
            if nums.len() == 3 * n {
                break;
            }
            nums.push(tok.parse::<f64>().map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?);
        }
        if nums.len() == 3 * n {
            break;
        }
    }
    if nums.len() != 3 * n {
        return Err(Error::Parse { line: 0, message: "truncated POINTS section".into() });
    }
    Ok(nums.chunks(3).map(|c| [c[0], c[1], c[2]]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyline_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.vtk");
        let pts: Vec<[f64; 3]> = (0..17)
            .map(|i| {
                let t = i as f64 * 0.1234567891234;
                [t.cos(), t.sin(), 1.0 / 3.0 + t * 1e-9]
            })
            .collect();
        let geom = VtkGeometry { points: pts.clone(), cells: VtkCells::Polyline { closed: true } };
        let curv = VtkField::Scalars("curvature".into(), vec![1.0; 17]);
        write_vtk(&path, &geom, &[curv], "curve").unwrap();
        let back = read_vtk_points(&path).unwrap();
        assert_eq!(back, pts);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("DATASET POLYDATA"));
        assert!(text.contains("LINES 1 19"));
    }

    #[test]
    fn triangle_cells_and_geometry_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tri.vtk");
        let geom = VtkGeometry {
            points: vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            cells: VtkCells::Triangles(vec![[0, 1, 2]]),
        };
        write_vtk(&path, &geom, &[], "t").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("CELLS 1 4"));
        assert!(!text.contains("POINT_DATA"));
        let bad = VtkField::Scalars("mean_curvature".into(), vec![0.0; 2]);
        assert!(write_vtk(&path, &geom, &[bad], "t").is_err());
    }
}
