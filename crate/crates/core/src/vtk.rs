//! Legacy ASCII VTK output for triangle meshes.

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::Vector2;

use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy)]
pub enum Field<'a> {
    Scalar(&'a str, &'a [f64]),
    Vector(&'a str, &'a [Vector2<f64>]),
}

impl Field<'_> {
    fn len(&self) -> usize {
        match self {
            Field::Scalar(_, v) => v.len(),
            Field::Vector(_, v) => v.len(),
        }
    }
}

fn push_field(s: &mut String, f: &Field) {
    match f {
        Field::Scalar(name, values) => {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in *values {
                let _ = writeln!(s, "{v:.16e}");
            }
        }
        Field::Vector(name, values) => {
            let _ = writeln!(s, "VECTORS {name} double");
            for v in *values {
                let _ = writeln!(s, "{:.16e} {:.16e} 0", v.x, v.y);
            }
        }
    }
}

/// Writes `mesh` with per-cell and per-point fields. Field names must not
/// contain whitespace.
pub fn write_vtk(
    mut out: impl Write,
    title: &str,
    mesh: &Mesh,
    cell_data: &[Field],
    point_data: &[Field],
) -> std::io::Result<()> {
    let nv = mesh.n_vertices();
    let nt = mesh.n_elements();
    let mut s = String::with_capacity(64 * (nv + nt));
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {nv} double");
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:.16e} {:.16e} 0", p.x, p.y);
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(s, "3 {a} {b} {c}");
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    if !cell_data.is_empty() {
        let _ = writeln!(s, "CELL_DATA {nt}");
        for f in cell_data {
            assert_eq!(f.len(), nt, "cell field length");
            push_field(&mut s, f);
        }
    }
    if !point_data.is_empty() {
        let _ = writeln!(s, "POINT_DATA {nv}");
        for f in point_data {
            assert_eq!(f.len(), nv, "point field length");
            push_field(&mut s, f);
        }
    }
    out.write_all(s.as_bytes())
}
