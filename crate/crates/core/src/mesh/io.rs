//! Plain-text mesh exchange.
//!
//! ```text
//! nv nt
//! x y              (nv lines)
//! i j k tag        (nt lines, 0-based counterclockwise vertex indices)
//! [nb              (optional boundary section)
//!  i j D|N         (nb lines)]
//! ```
//!
//! `tag` is an integer element attribute carried through refinement.
//! Boundary edges not listed in the optional section are Dirichlet.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::Point2;

use super::{BoundaryTag, Mesh, MeshError};

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_text(reader: impl BufRead) -> Result<Mesh, MeshError> {
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.split('#').next().unwrap_or("").trim().to_string();
        if !trimmed.is_empty() {
            lines.push((i + 1, trimmed));
        }
    }
    let mut it = lines.into_iter();
    let (ln, header) = it.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let counts: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|e| parse_err(ln, format!("bad header: {e}")))?;
    let [nv, nt] = counts[..] else {
        return Err(parse_err(ln, "header must be `nv nt`"));
    };

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = it.next().ok_or_else(|| parse_err(ln, "missing vertex line"))?;
        let xy: Vec<f64> = l
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(ln, format!("bad coordinate: {e}")))?;
        let [x, y] = xy[..] else {
            return Err(parse_err(ln, "vertex line must be `x y`"));
        };
        vertices.push(Point2::new(x, y));
    }

    let mut triangles = Vec::with_capacity(nt);
    let mut tags = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, l) = it.next().ok_or_else(|| parse_err(ln, "missing triangle line"))?;
        let v: Vec<usize> = l
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(ln, format!("bad triangle: {e}")))?;
        let [i, j, k, tag] = v[..] else {
            return Err(parse_err(ln, "triangle line must be `i j k tag`"));
        };
        triangles.push([i, j, k]);
        tags.push(tag as u32);
    }

    let mut overrides = HashMap::new();
    if let Some((ln, l)) = it.next() {
        let nb: usize = l.parse().map_err(|_| parse_err(ln, "expected boundary edge count"))?;
        for _ in 0..nb {
            let (ln, l) = it.next().ok_or_else(|| parse_err(ln, "missing boundary line"))?;
            let parts: Vec<&str> = l.split_whitespace().collect();
            let [a, b, kind] = parts[..] else {
                return Err(parse_err(ln, "boundary line must be `i j D|N`"));
            };
            let a: usize = a.parse().map_err(|_| parse_err(ln, "bad vertex index"))?;
            let b: usize = b.parse().map_err(|_| parse_err(ln, "bad vertex index"))?;
            let tag = match kind {
                "D" => BoundaryTag::Dirichlet,
                "N" => BoundaryTag::Neumann,
                other => return Err(parse_err(ln, format!("unknown boundary kind `{other}`"))),
            };
            overrides.insert((a.min(b), a.max(b)), tag);
        }
    }
    if let Some((ln, _)) = it.next() {
        return Err(parse_err(ln, "trailing content"));
    }

    Mesh::with_attributes(vertices, triangles, tags, |_, _, a, b| {
        overrides
            .get(&(a.min(b), a.max(b)))
            .copied()
            .unwrap_or(BoundaryTag::Dirichlet)
    })
}

pub fn write_text(mesh: &Mesh, mut out: impl Write) -> std::io::Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "{} {}", mesh.n_vertices(), mesh.n_elements());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:.16e} {:.16e}", p.x, p.y);
    }
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let _ = writeln!(s, "{} {} {} {}", tri[0], tri[1], tri[2], mesh.element_tag(t));
    }
    let neumann: Vec<usize> = (0..mesh.n_edges())
        .filter(|&e| mesh.boundary_tag(e) == Some(BoundaryTag::Neumann))
        .collect();
    if !neumann.is_empty() {
        let _ = writeln!(s, "{}", neumann.len());
        for e in neumann {
            let [a, b] = mesh.edge(e);
            let _ = writeln!(s, "{a} {b} N");
        }
    }
    out.write_all(s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "4 2
0 0
1 0
1 1
0 1
0 1 2 3
0 2 3 7
1
0 1 N
";

    #[test]
    fn reads_tags_and_neumann_edges() {
        let m = read_text(SQUARE.as_bytes()).unwrap();
        assert_eq!(m.n_elements(), 2);
        assert_eq!(m.element_tags(), &[3, 7]);
        let bottom = (0..m.n_edges()).find(|&e| m.edge(e) == [0, 1]).unwrap();
        assert_eq!(m.boundary_tag(bottom), Some(BoundaryTag::Neumann));
        let left = (0..m.n_edges()).find(|&e| m.edge(e) == [0, 3]).unwrap();
        assert_eq!(m.boundary_tag(left), Some(BoundaryTag::Dirichlet));
    }

    #[test]
    fn write_then_read_preserves_mesh() {
        let m = read_text(SQUARE.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_text(&m, &mut buf).unwrap();
        let back = read_text(buf.as_slice()).unwrap();
        assert_eq!(back.triangles(), m.triangles());
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.element_tags(), m.element_tags());
        for e in 0..m.n_edges() {
            assert_eq!(back.boundary_tag(e), m.boundary_tag(e));
        }
    }

    #[test]
    fn malformed_input_reports_line() {
        let err = read_text("3 1\n0 0\n1 0\n0 1\n0 1 2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, MeshError::Parse { line: 5, .. }), "{err}");
        let err = read_text("3 1\n0 0\n1 0\n0 1\n0 2 1 0\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("element 0"));
    }
}
