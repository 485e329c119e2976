//! Conforming triangle meshes with boundary classification.
//!
//! Triangles are stored counterclockwise. Local edge `i` of a triangle is the
//! edge opposite local vertex `i`, running from vertex `i+1` to vertex `i+2`.
//! Every edge carries a global unit normal: outward with respect to the
//! lower-indexed adjacent element (and therefore outward on the boundary).

mod io;
mod refine;

use std::collections::HashMap;

use nalgebra::{Matrix2, Point2, Vector2};
use thiserror::Error;

pub use io::{read_text, write_text};
pub use refine::{refine, uniform_refine};

/// Relative tolerance used when comparing edge lengths.
pub const LENGTH_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("element {element} is degenerate or clockwise (signed area {area:e})")]
    BadOrientation { element: usize, area: f64 },
    #[error("element {element} references vertex {vertex}, but only {n_vertices} vertices exist")]
    VertexOutOfRange {
        element: usize,
        vertex: usize,
        n_vertices: usize,
    },
    #[error("edge ({0}, {1}) is shared by more than two elements (element {2})")]
    NonManifoldEdge(usize, usize, usize),
    #[error("edge ({0}, {1}) is traversed in the same direction by two elements")]
    InconsistentOrientation(usize, usize),
    #[error("the Dirichlet boundary is empty")]
    NoDirichletBoundary,
    #[error("mesh has no elements")]
    Empty,
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

/// Built-in domains plus user supplied coordinate lists.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    /// `(-1,1)x(0,1) ∪ (-1,0)x(-1,0)`, six right triangles.
    LShape,
    /// `(-1,1)^2`, eight right triangles aligned with the four quadrants.
    Square,
    /// The unit reference triangle `(0,0), (1,0), (0,1)`.
    ReferenceTriangle,
    Custom {
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
    },
}

/// Elements adjacent to an edge; `first < second` when both exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeAdjacency {
    pub first: usize,
    pub second: Option<usize>,
}

impl EdgeAdjacency {
    pub fn is_boundary(&self) -> bool {
        self.second.is_none()
    }

    pub fn elements(&self) -> impl Iterator<Item = usize> {
        std::iter::once(self.first).chain(self.second)
    }
}

/// Affine data of one element: `F_T(x̂) = x_0 + DF_T x̂`.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub vertices: [Point2<f64>; 3],
    pub jacobian: Matrix2<f64>,
    /// `J_T = |det DF_T|`.
    pub det: f64,
    pub area: f64,
    pub diameter: f64,
}

impl ElementGeometry {
    pub fn from_vertices(vertices: [Point2<f64>; 3]) -> Self {
        let e1 = vertices[1] - vertices[0];
        let e2 = vertices[2] - vertices[0];
        let jacobian = Matrix2::from_columns(&[e1, e2]);
        let signed = jacobian.determinant();
        let diameter = (0..3)
            .map(|i| (vertices[(i + 1) % 3] - vertices[(i + 2) % 3]).norm())
            .fold(0.0, f64::max);
        ElementGeometry {
            vertices,
            jacobian,
            det: signed.abs(),
            area: 0.5 * signed.abs(),
            diameter,
        }
    }

    /// Maps a reference point to the physical element.
    pub fn map(&self, xhat: Point2<f64>) -> Point2<f64> {
        self.vertices[0] + self.jacobian * xhat.coords
    }

    pub fn inverse_map(&self, x: Point2<f64>) -> Point2<f64> {
        let inv = self
            .jacobian
            .try_inverse()
            .expect("element geometry is non-degenerate");
        Point2::from(inv * (x - self.vertices[0]))
    }

    pub fn centroid(&self) -> Point2<f64> {
        Point2::from((self.vertices[0].coords + self.vertices[1].coords + self.vertices[2].coords) / 3.0)
    }

    /// Barycentric coordinates of `x`.
    pub fn barycentric(&self, x: Point2<f64>) -> [f64; 3] {
        let r = self.inverse_map(x);
        [1.0 - r.x - r.y, r.x, r.y]
    }

    /// Gradients of the three barycentric coordinate functions.
    pub fn barycentric_gradients(&self) -> [Vector2<f64>; 3] {
        let inv_t = self
            .jacobian
            .try_inverse()
            .expect("element geometry is non-degenerate")
            .transpose();
        let g1 = inv_t * Vector2::new(1.0, 0.0);
        let g2 = inv_t * Vector2::new(0.0, 1.0);
        [-g1 - g2, g1, g2]
    }

    /// Outward unit normal of local edge `i`.
    pub fn outward_normal(&self, i: usize) -> Vector2<f64> {
        let d = self.vertices[(i + 2) % 3] - self.vertices[(i + 1) % 3];
        Vector2::new(d.y, -d.x) / d.norm()
    }

    pub fn edge_length(&self, i: usize) -> f64 {
        (self.vertices[(i + 2) % 3] - self.vertices[(i + 1) % 3]).norm()
    }

    /// Smallest interior angle in radians.
    pub fn min_angle(&self) -> f64 {
        (0..3)
            .map(|i| {
                let a = self.vertices[(i + 1) % 3] - self.vertices[i];
                let b = self.vertices[(i + 2) % 3] - self.vertices[i];
                (a.dot(&b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point2<f64>>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    adjacency: Vec<EdgeAdjacency>,
    element_edges: Vec<[usize; 3]>,
    boundary_tags: Vec<Option<BoundaryTag>>,
    element_tags: Vec<u32>,
    levels: Vec<u32>,
    parents: Vec<usize>,
}

impl Mesh {
    /// Builds a mesh, tagging each boundary edge with `tagger(a, b)`.
    pub fn new(
        vertices: Vec<Point2<f64>>,
        triangles: Vec<[usize; 3]>,
        tagger: impl Fn(Point2<f64>, Point2<f64>) -> BoundaryTag,
    ) -> Result<Self, MeshError> {
        let n = triangles.len();
        Self::with_attributes(vertices, triangles, vec![0; n], |a, b, _, _| tagger(a, b))
    }

    /// Full constructor. `tagger` receives the edge endpoints and vertex indices.
    pub(crate) fn with_attributes(
        vertices: Vec<Point2<f64>>,
        triangles: Vec<[usize; 3]>,
        element_tags: Vec<u32>,
        tagger: impl Fn(Point2<f64>, Point2<f64>, usize, usize) -> BoundaryTag,
    ) -> Result<Self, MeshError> {
        let n = triangles.len();
        Self::assemble(vertices, triangles, element_tags, vec![0; n], (0..n).collect(), tagger)
    }

    fn assemble(
        vertices: Vec<Point2<f64>>,
        triangles: Vec<[usize; 3]>,
        element_tags: Vec<u32>,
        levels: Vec<u32>,
        parents: Vec<usize>,
        tagger: impl Fn(Point2<f64>, Point2<f64>, usize, usize) -> BoundaryTag,
    ) -> Result<Self, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(MeshError::VertexOutOfRange {
                        element: t,
                        vertex: v,
                        n_vertices: vertices.len(),
                    });
                }
            }
            let g = ElementGeometry::from_vertices(tri.map(|v| vertices[v]));
            let signed = 0.5 * g.jacobian.determinant();
            if !(signed > 0.0) {
                return Err(MeshError::BadOrientation { element: t, area: signed });
            }
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len());
        let mut edges = Vec::new();
        let mut adjacency: Vec<EdgeAdjacency> = Vec::new();
        let mut directed: Vec<(usize, usize)> = Vec::new();
        let mut element_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0usize; 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                match lookup.get(&key) {
                    Some(&e) => {
                        let adj = &mut adjacency[e];
                        if adj.second.is_some() {
                            return Err(MeshError::NonManifoldEdge(key.0, key.1, t));
                        }
                        if directed[e] == (a, b) {
                            return Err(MeshError::InconsistentOrientation(key.0, key.1));
                        }
                        adj.second = Some(t);
                        *slot = e;
                    }
                    None => {
                        let e = edges.len();
                        lookup.insert(key, e);
                        edges.push([key.0, key.1]);
                        adjacency.push(EdgeAdjacency { first: t, second: None });
                        directed.push((a, b));
                        *slot = e;
                    }
                }
            }
            element_edges.push(local);
        }

        let boundary_tags: Vec<Option<BoundaryTag>> = edges
            .iter()
            .zip(&adjacency)
            .map(|(&[a, b], adj)| {
                adj.is_boundary()
                    .then(|| tagger(vertices[a], vertices[b], a, b))
            })
            .collect();
        if !boundary_tags.contains(&Some(BoundaryTag::Dirichlet)) {
            return Err(MeshError::NoDirichletBoundary);
        }

        Ok(Mesh {
            vertices,
            triangles,
            edges,
            adjacency,
            element_edges,
            boundary_tags,
            element_tags,
            levels,
            parents,
        })
    }

    /// Builds one of the initial meshes; all boundary edges are Dirichlet.
    pub fn build_initial(domain: &DomainSpec) -> Result<Self, MeshError> {
        let (vertices, triangles): (Vec<[f64; 2]>, Vec<[usize; 3]>) = match domain {
            DomainSpec::LShape => (
                vec![
                    [-1.0, -1.0],
                    [0.0, -1.0],
                    [-1.0, 0.0],
                    [0.0, 0.0],
                    [1.0, 0.0],
                    [-1.0, 1.0],
                    [0.0, 1.0],
                    [1.0, 1.0],
                ],
                // Every square is split along its diagonal through the origin.
                vec![[0, 1, 3], [0, 3, 2], [2, 3, 5], [3, 6, 5], [3, 4, 7], [3, 7, 6]],
            ),
            DomainSpec::Square => (
                vec![
                    [-1.0, -1.0],
                    [0.0, -1.0],
                    [1.0, -1.0],
                    [-1.0, 0.0],
                    [0.0, 0.0],
                    [1.0, 0.0],
                    [-1.0, 1.0],
                    [0.0, 1.0],
                    [1.0, 1.0],
                ],
                vec![
                    [4, 5, 8],
                    [4, 8, 7],
                    [4, 7, 6],
                    [4, 6, 3],
                    [4, 3, 0],
                    [4, 0, 1],
                    [4, 1, 2],
                    [4, 2, 5],
                ],
            ),
            DomainSpec::ReferenceTriangle => (vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]),
            DomainSpec::Custom { vertices, triangles } => (vertices.clone(), triangles.clone()),
        };
        let vertices = vertices.into_iter().map(|[x, y]| Point2::new(x, y)).collect();
        Mesh::new(vertices, triangles, |_, _| BoundaryTag::Dirichlet)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point2<f64>] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point2<f64> {
        self.vertices[v]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    /// Vertex pair `(a, b)` with `a < b`.
    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn adjacency(&self, e: usize) -> EdgeAdjacency {
        self.adjacency[e]
    }

    pub fn element_edges(&self, t: usize) -> [usize; 3] {
        self.element_edges[t]
    }

    pub fn boundary_tag(&self, e: usize) -> Option<BoundaryTag> {
        self.boundary_tags[e]
    }

    pub fn element_tag(&self, t: usize) -> u32 {
        self.element_tags[t]
    }

    pub fn element_tags(&self) -> &[u32] {
        &self.element_tags
    }

    /// Number of bisections separating element `t` from its initial ancestor.
    pub fn level(&self, t: usize) -> u32 {
        self.levels[t]
    }

    /// Index of the element in the previous mesh that `t` descends from.
    pub fn parent(&self, t: usize) -> usize {
        self.parents[t]
    }

    pub fn geometry(&self, t: usize) -> ElementGeometry {
        ElementGeometry::from_vertices(self.triangles[t].map(|v| self.vertices[v]))
    }

    pub fn area(&self, t: usize) -> f64 {
        self.geometry(t).area
    }

    /// `h_T`, the element diameter.
    pub fn diameter(&self, t: usize) -> f64 {
        self.geometry(t).diameter
    }

    pub fn centroid(&self, t: usize) -> Point2<f64> {
        self.geometry(t).centroid()
    }

    /// `h_E`.
    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        (self.vertices[b] - self.vertices[a]).norm()
    }

    pub fn edge_midpoint(&self, e: usize) -> Point2<f64> {
        let [a, b] = self.edges[e];
        nalgebra::center(&self.vertices[a], &self.vertices[b])
    }

    /// Global unit normal `n_E`.
    pub fn edge_normal(&self, e: usize) -> Vector2<f64> {
        let first = self.adjacency[e].first;
        let i = self.local_edge_index(first, e);
        self.geometry(first).outward_normal(i)
    }

    /// Position of global edge `e` among the local edges of `t`.
    pub fn local_edge_index(&self, t: usize, e: usize) -> usize {
        self.element_edges[t]
            .iter()
            .position(|&x| x == e)
            .unwrap_or_else(|| panic!("edge {e} is not an edge of element {t}"))
    }

    /// `+1` when the outward normal of `t` on local edge `i` equals `n_E`.
    pub fn edge_sign(&self, t: usize, i: usize) -> f64 {
        let e = self.element_edges[t][i];
        if self.adjacency[e].first == t {
            1.0
        } else {
            -1.0
        }
    }

    /// The element across local edge `i` of `t`.
    pub fn neighbor(&self, t: usize, i: usize) -> Option<usize> {
        let adj = self.adjacency[self.element_edges[t][i]];
        if adj.first == t {
            adj.second
        } else {
            Some(adj.first)
        }
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.adjacency[e].is_boundary()
    }

    /// Elements incident to each vertex, in ascending order.
    pub fn vertex_elements(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(t);
            }
        }
        out
    }

    pub fn h_max(&self) -> f64 {
        (0..self.n_elements()).map(|t| self.diameter(t)).fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        (0..self.n_elements())
            .map(|t| self.diameter(t))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest interior angle over all elements, in radians.
    pub fn min_angle(&self) -> f64 {
        (0..self.n_elements())
            .map(|t| self.geometry(t).min_angle())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_elements()).map(|t| self.area(t)).sum()
    }

    /// Checks the structural invariants: positive orientation, every interior
    /// edge shared by exactly two elements traversing it in opposite
    /// directions, no hanging vertices, and tags on exactly the boundary edges.
    pub fn audit(&self) -> Result<(), String> {
        let mut count: HashMap<(usize, usize), Vec<(usize, bool)>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            let signed = 0.5 * self.geometry(t).jacobian.determinant();
            if !(signed > 0.0) {
                return Err(format!("element {t} has signed area {signed:e}"));
            }
            for i in 0..3 {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                count.entry((a.min(b), a.max(b))).or_default().push((t, a < b));
            }
        }
        for (&(a, b), users) in &count {
            match users.as_slice() {
                [_] => {}
                [(_, d0), (_, d1)] if d0 != d1 => {}
                _ => return Err(format!("edge ({a}, {b}) has incidence {users:?}")),
            }
        }
        if count.len() != self.edges.len() {
            return Err("edge table out of sync with triangles".into());
        }
        for (e, adj) in self.adjacency.iter().enumerate() {
            if adj.is_boundary() != self.boundary_tags[e].is_some() {
                return Err(format!("edge {e}: boundary tag mismatch"));
            }
        }
        // Refinement only ever inserts edge midpoints, so a hanging node shows
        // up as a vertex sitting exactly on the midpoint of an edge that is
        // used by a single element.
        let by_coords: HashMap<(u64, u64), usize> = self
            .vertices
            .iter()
            .enumerate()
            .map(|(v, p)| ((p.x.to_bits(), p.y.to_bits()), v))
            .collect();
        for (e, adj) in self.adjacency.iter().enumerate() {
            if adj.is_boundary() {
                let m = self.edge_midpoint(e);
                if let Some(v) = by_coords.get(&(m.x.to_bits(), m.y.to_bits())) {
                    return Err(format!("hanging vertex {v} on edge {e}"));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn from_refinement(
        vertices: Vec<Point2<f64>>,
        triangles: Vec<[usize; 3]>,
        element_tags: Vec<u32>,
        levels: Vec<u32>,
        parents: Vec<usize>,
        boundary: &HashMap<(usize, usize), BoundaryTag>,
    ) -> Self {
        Self::assemble(vertices, triangles, element_tags, levels, parents, |_, _, a, b| {
            boundary[&(a.min(b), a.max(b))]
        })
        .expect("refinement preserves mesh validity")
    }

    pub(crate) fn boundary_map(&self) -> HashMap<(usize, usize), BoundaryTag> {
        self.edges
            .iter()
            .zip(&self.boundary_tags)
            .filter_map(|(&[a, b], tag)| tag.map(|t| ((a, b), t)))
            .collect()
    }
}

/// Element indices selected for refinement.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarkedSet(Vec<usize>);

impl MarkedSet {
    /// Sorts and deduplicates; panics if an index is out of range.
    pub fn new(mut indices: Vec<usize>, n_elements: usize) -> Self {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            assert!(last < n_elements, "marked element {last} out of range ({n_elements} elements)");
        }
        MarkedSet(indices)
    }

    pub fn all(n_elements: usize) -> Self {
        MarkedSet((0..n_elements).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn initial_l_shape() {
        let m = Mesh::build_initial(&DomainSpec::LShape).unwrap();
        assert_eq!(m.n_elements(), 6);
        assert_eq!(m.n_vertices(), 8);
        assert_relative_eq!(m.total_area(), 3.0, epsilon = 1e-14);
        m.audit().unwrap();
        for t in 0..6 {
            assert_relative_eq!(m.geometry(t).min_angle(), std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
        }
        // no element covers the missing fourth quadrant
        for t in 0..6 {
            let c = m.centroid(t);
            assert!(!(c.x > 0.0 && c.y < 0.0));
        }
    }

    #[test]
    fn initial_square_is_quadrant_aligned() {
        let m = Mesh::build_initial(&DomainSpec::Square).unwrap();
        assert_eq!(m.n_elements(), 8);
        assert_eq!(m.n_vertices(), 9);
        assert_relative_eq!(m.total_area(), 4.0, epsilon = 1e-14);
        for t in 0..8 {
            let tri = m.triangle(t);
            let xs: Vec<f64> = tri.iter().map(|&v| m.vertex(v).x).collect();
            let ys: Vec<f64> = tri.iter().map(|&v| m.vertex(v).y).collect();
            assert!(xs.iter().all(|&x| x >= 0.0) || xs.iter().all(|&x| x <= 0.0));
            assert!(ys.iter().all(|&y| y >= 0.0) || ys.iter().all(|&y| y <= 0.0));
        }
    }

    #[test]
    fn reference_triangle_geometry() {
        let m = Mesh::build_initial(&DomainSpec::ReferenceTriangle).unwrap();
        assert_eq!(m.n_elements(), 1);
        assert!((0..3).all(|e| m.is_boundary_edge(e)));
        let g = m.geometry(0);
        assert_eq!(g.jacobian, Matrix2::identity());
        assert_eq!(g.det, 1.0);
        assert_relative_eq!(g.diameter, 2f64.sqrt());
    }

    #[test]
    fn scaled_triangle_geometry() {
        let g = ElementGeometry::from_vertices([Point2::new(0.0, 0.0), Point2::new(2.0, 0.0), Point2::new(0.0, 2.0)]);
        assert_eq!(g.det, 4.0);
        assert_eq!(g.area, 2.0);
        let g = ElementGeometry::from_vertices([Point2::new(0.0, 0.0), Point2::new(3.0, 0.0), Point2::new(0.0, 4.0)]);
        assert_relative_eq!(g.diameter, 5.0);
        assert_relative_eq!(g.det, 2.0 * g.area);
    }

    #[test]
    fn clockwise_triangle_is_rejected() {
        let err = Mesh::build_initial(&DomainSpec::Custom {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            triangles: vec![[0, 1, 2], [1, 2, 3]],
        })
        .unwrap_err();
        assert!(matches!(err, MeshError::BadOrientation { element: 1, .. }), "{err}");
    }

    #[test]
    fn degenerate_triangle_is_rejected() {
        let err = Mesh::build_initial(&DomainSpec::Custom {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            triangles: vec![[0, 1, 2]],
        })
        .unwrap_err();
        assert!(err.to_string().contains("element 0"));
    }

    #[test]
    fn normals_point_from_lower_to_higher_element() {
        let m = Mesh::build_initial(&DomainSpec::LShape).unwrap();
        for e in 0..m.n_edges() {
            let n = m.edge_normal(e);
            let adj = m.adjacency(e);
            let mid = m.edge_midpoint(e);
            // points away from the first element's centroid
            assert!((mid - m.centroid(adj.first)).dot(&n) > 0.0);
            if let Some(s) = adj.second {
                assert!(adj.first < s);
                assert!((m.centroid(s) - mid).dot(&n) > 0.0);
            }
        }
    }

    #[test]
    fn empty_dirichlet_boundary_is_rejected() {
        let err = Mesh::new(
            vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
            vec![[0, 1, 2]],
            |_, _| BoundaryTag::Neumann,
        )
        .unwrap_err();
        assert!(matches!(err, MeshError::NoDirichletBoundary));
    }
}
