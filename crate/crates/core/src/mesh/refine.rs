//! Conforming longest-edge bisection.
//!
//! Marked elements are refined with Rivara's longest-edge propagation path
//! (LEPP): walk from the element across longest edges until a terminal edge
//! is found (a boundary longest edge, or an edge that is the longest edge of
//! both neighbours), bisect the terminal pair at the edge midpoint, and repeat
//! until the marked element itself has been bisected. Every split is a
//! longest-edge bisection, so no hanging nodes are ever created and the
//! smallest angle stays above half of the initial smallest angle.

use std::collections::HashMap;

use nalgebra::Point2;

use super::{BoundaryTag, MarkedSet, Mesh, LENGTH_TIE_TOL};

type EdgeKey = (usize, usize);

fn key(a: usize, b: usize) -> EdgeKey {
    (a.min(b), a.max(b))
}

struct Workspace {
    vertices: Vec<Point2<f64>>,
    triangles: Vec<[usize; 3]>,
    alive: Vec<bool>,
    tags: Vec<u32>,
    levels: Vec<u32>,
    origin: Vec<usize>,
    edge_elements: HashMap<EdgeKey, [Option<usize>; 2]>,
    boundary: HashMap<EdgeKey, BoundaryTag>,
}

impl Workspace {
    fn new(mesh: &Mesh) -> Self {
        let mut edge_elements = HashMap::with_capacity(2 * mesh.n_edges());
        for (e, &[a, b]) in mesh.edges().iter().enumerate() {
            let adj = mesh.adjacency(e);
            edge_elements.insert((a, b), [Some(adj.first), adj.second]);
        }
        let n = mesh.n_elements();
        Workspace {
            vertices: mesh.vertices().to_vec(),
            triangles: mesh.triangles().to_vec(),
            alive: vec![true; n],
            tags: mesh.element_tags().to_vec(),
            levels: (0..n).map(|t| mesh.level(t)).collect(),
            origin: (0..n).collect(),
            edge_elements,
            boundary: mesh.boundary_map(),
        }
    }

    /// Local index `i` of the longest edge (opposite vertex `i`). Ties within
    /// `LENGTH_TIE_TOL` go to the edge with the smaller vertex-pair key, a
    /// property shared by both elements adjacent to the edge.
    fn longest_edge(&self, t: usize) -> usize {
        let tri = self.triangles[t];
        let len = |i: usize| (self.vertices[tri[(i + 1) % 3]] - self.vertices[tri[(i + 2) % 3]]).norm();
        let k = |i: usize| key(tri[(i + 1) % 3], tri[(i + 2) % 3]);
        let mut best = 0;
        for i in 1..3 {
            let (li, lb) = (len(i), len(best));
            if li > lb * (1.0 + LENGTH_TIE_TOL) || (li >= lb * (1.0 - LENGTH_TIE_TOL) && k(i) < k(best)) {
                best = i;
            }
        }
        best
    }

    fn edge_key(&self, t: usize, i: usize) -> EdgeKey {
        let tri = self.triangles[t];
        key(tri[(i + 1) % 3], tri[(i + 2) % 3])
    }

    fn other_element(&self, e: EdgeKey, t: usize) -> Option<usize> {
        let [a, b] = self.edge_elements[&e];
        if a == Some(t) {
            b
        } else {
            a
        }
    }

    fn replace_incidence(&mut self, e: EdgeKey, old: usize, new: usize) {
        let slot = self.edge_elements.get_mut(&e).expect("edge exists");
        for s in slot.iter_mut() {
            if *s == Some(old) {
                *s = Some(new);
                return;
            }
        }
        unreachable!("element {old} is not incident to edge {e:?}");
    }

    fn add_incidence(&mut self, e: EdgeKey, t: usize) {
        let slot = self.edge_elements.entry(e).or_insert([None, None]);
        if slot[0].is_none() {
            slot[0] = Some(t);
        } else {
            debug_assert!(slot[1].is_none());
            slot[1] = Some(t);
        }
    }

    fn push_child(&mut self, parent: usize, tri: [usize; 3]) -> usize {
        let id = self.triangles.len();
        self.triangles.push(tri);
        self.alive.push(true);
        self.tags.push(self.tags[parent]);
        self.levels.push(self.levels[parent] + 1);
        self.origin.push(self.origin[parent]);
        id
    }

    /// Splits every element sharing edge `e` at its midpoint.
    fn bisect_edge(&mut self, e: EdgeKey) {
        let (a, b) = e;
        let m = self.vertices.len();
        self.vertices.push(nalgebra::center(&self.vertices[a], &self.vertices[b]));
        let users = self.edge_elements.remove(&e).expect("bisected edge exists");
        for t in users.into_iter().flatten() {
            let tri = self.triangles[t];
            let i = (0..3)
                .find(|&i| self.edge_key(t, i) == e)
                .expect("element contains the bisected edge");
            // tri = [c, p, q] after rotation, with edge (p, q) being bisected
            let c = tri[i];
            let p = tri[(i + 1) % 3];
            let q = tri[(i + 2) % 3];
            self.alive[t] = false;
            let left = self.push_child(t, [c, p, m]);
            let right = self.push_child(t, [c, m, q]);
            self.replace_incidence(key(c, p), t, left);
            self.replace_incidence(key(q, c), t, right);
            self.add_incidence(key(p, m), left);
            self.add_incidence(key(m, q), right);
            self.add_incidence(key(c, m), left);
            self.add_incidence(key(c, m), right);
        }
        if let Some(tag) = self.boundary.remove(&e) {
            self.boundary.insert(key(a, m), tag);
            self.boundary.insert(key(m, b), tag);
        }
    }

    fn refine_element(&mut self, t: usize) {
        while self.alive[t] {
            let mut current = t;
            loop {
                let i = self.longest_edge(current);
                let e = self.edge_key(current, i);
                match self.other_element(e, current) {
                    None => {
                        self.bisect_edge(e);
                        break;
                    }
                    Some(nb) => {
                        let j = self.longest_edge(nb);
                        if self.edge_key(nb, j) == e {
                            self.bisect_edge(e);
                            break;
                        }
                        current = nb;
                    }
                }
            }
        }
    }

    fn finish(self) -> Mesh {
        let mut vertices_used = vec![false; self.vertices.len()];
        let mut triangles = Vec::new();
        let mut tags = Vec::new();
        let mut levels = Vec::new();
        let mut parents = Vec::new();
        for t in 0..self.triangles.len() {
            if self.alive[t] {
                for &v in &self.triangles[t] {
                    vertices_used[v] = true;
                }
                triangles.push(self.triangles[t]);
                tags.push(self.tags[t]);
                levels.push(self.levels[t]);
                parents.push(self.origin[t]);
            }
        }
        debug_assert!(vertices_used.iter().all(|&u| u));
        Mesh::from_refinement(self.vertices, triangles, tags, levels, parents, &self.boundary)
    }
}

/// Bisects each marked element across its longest edge and closes the mesh.
///
/// Old vertices keep their indices and coordinates; new vertices are appended.
/// `parent(t)` of the result maps each element to the element of `mesh` it
/// was cut from.
pub fn refine(mesh: &Mesh, marked: &MarkedSet) -> Mesh {
    if marked.is_empty() {
        let mut out = mesh.clone();
        out.parents = (0..mesh.n_elements()).collect();
        return out;
    }
    let mut ws = Workspace::new(mesh);
    for &t in marked.indices() {
        ws.refine_element(t);
    }
    ws.finish()
}

pub fn uniform_refine(mesh: &Mesh) -> Mesh {
    refine(mesh, &MarkedSet::all(mesh.n_elements()))
}
