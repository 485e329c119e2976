//! BDM1 / RT0 / P0 spaces on triangles.
//!
//! BDM1 degrees of freedom are the normal components `v(z)·n_E` at both
//! endpoints `z` of every edge `E`, with the global normal `n_E`. Global index
//! of the DOF at endpoint `k` of edge `e = (a, b)`, `a < b`, is `2e + k`.
//! RT0 has one DOF per edge, the (constant) normal component on that edge.
//! Coefficient vectors always use this full numbering; Neumann DOFs are
//! stored as zero and dropped by [`DofMap`]'s free numbering.

use std::sync::OnceLock;

use nalgebra::{Matrix2, Matrix6, Point2, Vector2};
use rayon::prelude::*;

use crate::mesh::{BoundaryTag, ElementGeometry, Mesh};
use crate::quadrature::{LineRule, QuadRule, VertexValues};

/// Reference triangle vertices `r̂_0, r̂_1, r̂_2`.
pub const REFERENCE_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

fn ref_vertex(i: usize) -> Point2<f64> {
    Point2::new(REFERENCE_VERTICES[i][0], REFERENCE_VERTICES[i][1])
}

/// Outward unit normal of reference edge `i` (opposite `r̂_i`).
pub fn reference_normal(i: usize) -> Vector2<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [Vector2::new(s, s), Vector2::new(-1.0, 0.0), Vector2::new(0.0, -1.0)][i]
}

pub fn reference_edge_length(i: usize) -> f64 {
    if i == 0 {
        std::f64::consts::SQRT_2
    } else {
        1.0
    }
}

/// Local vertex at endpoint `k ∈ {0, 1}` of local edge `i`.
pub fn edge_endpoint(i: usize, k: usize) -> usize {
    (i + 1 + k) % 3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    Bdm1,
    Rt0,
    P0,
}

struct ReferenceBdm1 {
    /// Values at the reference vertices of basis `2i + k`.
    vertex_values: [VertexValues; 6],
    divergence: [f64; 6],
    /// Coefficients in the monomials (1,0), (x,0), (y,0), (0,1), (0,x), (0,y).
    coefficients: Matrix6<f64>,
}

fn monomials(p: Point2<f64>) -> [Vector2<f64>; 6] {
    [
        Vector2::new(1.0, 0.0),
        Vector2::new(p.x, 0.0),
        Vector2::new(p.y, 0.0),
        Vector2::new(0.0, 1.0),
        Vector2::new(0.0, p.x),
        Vector2::new(0.0, p.y),
    ]
}

fn reference_bdm1() -> &'static ReferenceBdm1 {
    static CACHE: OnceLock<ReferenceBdm1> = OnceLock::new();
    CACHE.get_or_init(|| {
        // Row `2i + k`: functional v ↦ v(r̂_z)·n̂_i at endpoint z of edge i.
        let mut functionals = Matrix6::zeros();
        for i in 0..3 {
            for k in 0..2 {
                let z = ref_vertex(edge_endpoint(i, k));
                for (c, m) in monomials(z).iter().enumerate() {
                    functionals[(2 * i + k, c)] = m.dot(&reference_normal(i));
                }
            }
        }
        let coefficients = functionals.try_inverse().expect("BDM1 duality system is invertible");
        let mut vertex_values = [[Vector2::zeros(); 3]; 6];
        let mut divergence = [0.0; 6];
        for j in 0..6 {
            for (m, value) in vertex_values[j].iter_mut().enumerate() {
                *value = monomials(ref_vertex(m))
                    .iter()
                    .enumerate()
                    .map(|(c, mono)| mono * coefficients[(c, j)])
                    .sum();
            }
            divergence[j] = coefficients[(1, j)] + coefficients[(5, j)];
        }
        ReferenceBdm1 {
            vertex_values,
            divergence,
            coefficients,
        }
    })
}

/// Values and divergences of the six reference BDM1 basis functions at `p`.
/// Basis `2i + k` is dual to `v(r̂_z)·n̂_i`, `z` the `k`-th endpoint of edge `i`.
pub fn bdm1_reference_basis(p: Point2<f64>) -> ([Vector2<f64>; 6], [f64; 6]) {
    let r = reference_bdm1();
    let m = monomials(p);
    let values = std::array::from_fn(|j| (0..6).map(|c| m[c] * r.coefficients[(c, j)]).sum());
    (values, r.divergence)
}

/// Reference BDM1 basis as vertex values (each function is P1).
pub fn bdm1_reference_vertex_values() -> &'static [VertexValues; 6] {
    &reference_bdm1().vertex_values
}

/// RT0 reference basis `φ̂_i = |ê_i| (x̂ − r̂_i) / (2|T̂|)`, dual to the edge
/// mean of the normal component.
pub fn rt0_reference_basis(p: Point2<f64>) -> ([Vector2<f64>; 3], [f64; 3]) {
    let values = std::array::from_fn(|i| (p - ref_vertex(i)) * reference_edge_length(i));
    let div = std::array::from_fn(|i| 2.0 * reference_edge_length(i));
    (values, div)
}

/// Piola transform of a reference vector: `DF v̂ / J`.
pub fn piola(geom: &ElementGeometry, vhat: Vector2<f64>) -> Vector2<f64> {
    geom.jacobian * vhat / geom.det
}

/// Divergence of a Piola-mapped field: `div̂ v̂ / J`.
pub fn piola_divergence(geom: &ElementGeometry, div_hat: f64) -> f64 {
    div_hat / geom.det
}

/// Inverse Piola transform: `J DF⁻¹ v`.
pub fn inverse_piola(geom: &ElementGeometry, v: Vector2<f64>) -> Vector2<f64> {
    geom.jacobian.try_inverse().expect("non-degenerate element") * v * geom.det
}

/// Element-local BDM1 basis with global orientation applied.
#[derive(Debug, Clone)]
pub struct LocalBdm1 {
    /// Reference pre-images of the physical basis functions.
    pub reference: [VertexValues; 6],
    /// Physical values at the element vertices.
    pub physical: [VertexValues; 6],
    pub divergence: [f64; 6],
    /// Full global DOF index of each local function.
    pub dofs: [usize; 6],
}

/// Global BDM1 DOF of endpoint `k` of local edge `i` in element `t`.
pub fn bdm1_global_dof(mesh: &Mesh, t: usize, i: usize, k: usize) -> usize {
    let e = mesh.element_edges(t)[i];
    let z = mesh.triangle(t)[edge_endpoint(i, k)];
    2 * e + usize::from(mesh.edge(e)[0] != z)
}

pub fn local_bdm1(mesh: &Mesh, t: usize) -> LocalBdm1 {
    let geom = mesh.geometry(t);
    let reference_basis = bdm1_reference_vertex_values();
    let mut out = LocalBdm1 {
        reference: [[Vector2::zeros(); 3]; 6],
        physical: [[Vector2::zeros(); 3]; 6],
        divergence: [0.0; 6],
        dofs: [0; 6],
    };
    for i in 0..3 {
        let scale = mesh.edge_sign(t, i) * geom.edge_length(i) / reference_edge_length(i);
        for k in 0..2 {
            let j = 2 * i + k;
            out.reference[j] = reference_basis[j].map(|v| v * scale);
            out.physical[j] = out.reference[j].map(|v| piola(&geom, v));
            out.divergence[j] = piola_divergence(&geom, scale * reference_bdm1().divergence[j]);
            out.dofs[j] = bdm1_global_dof(mesh, t, i, k);
        }
    }
    out
}

/// Element-local RT0 basis (sum of the two BDM1 functions of each edge).
#[derive(Debug, Clone)]
pub struct LocalRt0 {
    pub reference: [VertexValues; 3],
    pub physical: [VertexValues; 3],
    pub divergence: [f64; 3],
    pub dofs: [usize; 3],
}

pub fn local_rt0(mesh: &Mesh, t: usize) -> LocalRt0 {
    let b = local_bdm1(mesh, t);
    let sum = |x: &VertexValues, y: &VertexValues| std::array::from_fn(|m| x[m] + y[m]);
    LocalRt0 {
        reference: std::array::from_fn(|i| sum(&b.reference[2 * i], &b.reference[2 * i + 1])),
        physical: std::array::from_fn(|i| sum(&b.physical[2 * i], &b.physical[2 * i + 1])),
        divergence: std::array::from_fn(|i| b.divergence[2 * i] + b.divergence[2 * i + 1]),
        dofs: mesh.element_edges(t),
    }
}

/// Global numbering of a velocity or pressure space.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub kind: SpaceKind,
    n_full: usize,
    free_index: Vec<Option<usize>>,
    free_to_full: Vec<usize>,
    owner: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &Mesh, kind: SpaceKind) -> Self {
        let per_edge = match kind {
            SpaceKind::Bdm1 => 2,
            SpaceKind::Rt0 => 1,
            SpaceKind::P0 => 0,
        };
        if kind == SpaceKind::P0 {
            let n = mesh.n_elements();
            return DofMap {
                kind,
                n_full: n,
                free_index: (0..n).map(Some).collect(),
                free_to_full: (0..n).collect(),
                owner: Vec::new(),
            };
        }
        let n_full = per_edge * mesh.n_edges();
        let mut free_index = vec![None; n_full];
        let mut free_to_full = Vec::new();
        let mut owner = Vec::with_capacity(n_full);
        for e in 0..mesh.n_edges() {
            let neumann = mesh.boundary_tag(e) == Some(BoundaryTag::Neumann);
            for k in 0..per_edge {
                let d = per_edge * e + k;
                owner.push(mesh.edge(e)[k]);
                if !neumann {
                    free_index[d] = Some(free_to_full.len());
                    free_to_full.push(d);
                }
            }
        }
        DofMap {
            kind,
            n_full,
            free_index,
            free_to_full,
            owner,
        }
    }

    /// Total DOF count including constrained Neumann DOFs.
    pub fn n_full(&self) -> usize {
        self.n_full
    }

    pub fn n_free(&self) -> usize {
        self.free_to_full.len()
    }

    pub fn free_index(&self, full: usize) -> Option<usize> {
        self.free_index[full]
    }

    pub fn full_index(&self, free: usize) -> usize {
        self.free_to_full[free]
    }

    /// Vertex a BDM1 DOF sits at (first edge vertex for RT0).
    pub fn owner_vertex(&self, full: usize) -> usize {
        self.owner[full]
    }

    /// Expands a free-numbered vector to full numbering with zeros at constrained DOFs.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_full];
        for (i, &f) in self.free_to_full.iter().enumerate() {
            out[f] = free[i];
        }
        out
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_to_full.iter().map(|&f| full[f]).collect()
    }
}

/// A linear vector field on one element, stored by its vertex values.
#[derive(Debug, Clone, Copy)]
pub struct LinearField {
    pub geom: ElementGeometry,
    pub values: VertexValues,
}

impl LinearField {
    pub fn eval(&self, x: Point2<f64>) -> Vector2<f64> {
        let l = self.geom.barycentric(x);
        self.values[0] * l[0] + self.values[1] * l[1] + self.values[2] * l[2]
    }

    /// `G[(i, j)] = ∂u_i/∂x_j`.
    pub fn gradient(&self) -> Matrix2<f64> {
        let g = self.geom.barycentric_gradients();
        (0..3).map(|k| self.values[k] * g[k].transpose()).sum()
    }

    pub fn divergence(&self) -> f64 {
        self.gradient().trace()
    }

    /// `‖u‖²_T`, exact for linear fields.
    pub fn l2_norm_sq(&self) -> f64 {
        let s: Vector2<f64> = self.values.iter().sum();
        let sq: f64 = self.values.iter().map(|v| v.norm_squared()).sum();
        self.geom.area / 12.0 * (sq + s.norm_squared())
    }

    /// `‖∇u‖²_T`.
    pub fn grad_norm_sq(&self) -> f64 {
        self.gradient().norm_squared() * self.geom.area
    }

    /// `‖u‖²_{1,T} = ‖u‖²_T + ‖∇u‖²_T`.
    pub fn h1_norm_sq(&self) -> f64 {
        self.l2_norm_sq() + self.grad_norm_sq()
    }
}

/// Discrete velocity in BDM1 or RT0, coefficients in full numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub kind: SpaceKind,
    pub coeffs: Vec<f64>,
}

impl VelocityField {
    pub fn zeros(mesh: &Mesh, kind: SpaceKind) -> Self {
        let n = match kind {
            SpaceKind::Bdm1 => 2 * mesh.n_edges(),
            SpaceKind::Rt0 => mesh.n_edges(),
            SpaceKind::P0 => panic!("P0 is not a velocity space"),
        };
        VelocityField { kind, coeffs: vec![0.0; n] }
    }

    /// Physical vertex values of the field restricted to `t`.
    pub fn element_values(&self, mesh: &Mesh, t: usize) -> LinearField {
        let geom = mesh.geometry(t);
        let mut values = [Vector2::zeros(); 3];
        match self.kind {
            SpaceKind::Bdm1 => {
                let b = local_bdm1(mesh, t);
                for j in 0..6 {
                    let c = self.coeffs[b.dofs[j]];
                    for m in 0..3 {
                        values[m] += b.physical[j][m] * c;
                    }
                }
            }
            SpaceKind::Rt0 => {
                let b = local_rt0(mesh, t);
                for j in 0..3 {
                    let c = self.coeffs[b.dofs[j]];
                    for m in 0..3 {
                        values[m] += b.physical[j][m] * c;
                    }
                }
            }
            SpaceKind::P0 => unreachable!(),
        }
        LinearField { geom, values }
    }

    /// The field as BDM1 coefficients (RT0 ⊂ BDM1).
    pub fn to_bdm1(&self) -> VelocityField {
        match self.kind {
            SpaceKind::Bdm1 => self.clone(),
            SpaceKind::Rt0 => VelocityField {
                kind: SpaceKind::Bdm1,
                coeffs: self.coeffs.iter().flat_map(|&c| [c, c]).collect(),
            },
            SpaceKind::P0 => unreachable!(),
        }
    }

    pub fn scaled(&self, s: f64) -> VelocityField {
        VelocityField {
            kind: self.kind,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn sub(&self, other: &VelocityField) -> VelocityField {
        let a = self.to_bdm1();
        let b = other.to_bdm1();
        VelocityField {
            kind: SpaceKind::Bdm1,
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x - y).collect(),
        }
    }
}

/// Piecewise-constant scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureField(pub Vec<f64>);

impl PressureField {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// `Q_h f`: per-element mean by the degree-5 rule. `f` receives the point and element.
pub fn project_qh(mesh: &Mesh, f: impl Fn(Point2<f64>, usize) -> f64 + Sync) -> PressureField {
    PressureField(
        (0..mesh.n_elements())
            .into_par_iter()
            .map(|t| {
                let g = mesh.geometry(t);
                QuadRule::gauss7().integrate(&g, |x| f(x, t)) / g.area
            })
            .collect(),
    )
}

/// Sources of normal traces `v·n_E` on mesh edges.
pub trait NormalTrace {
    /// `v(x)·n_E` for a point `x` on edge `e`.
    fn normal_component(&self, mesh: &Mesh, e: usize, x: Point2<f64>) -> f64;
}

/// An analytic vector field `x ↦ v(x)`.
pub struct AnalyticField<F>(pub F);

impl<F: Fn(Point2<f64>) -> Vector2<f64>> NormalTrace for AnalyticField<F> {
    fn normal_component(&self, mesh: &Mesh, e: usize, x: Point2<f64>) -> f64 {
        (self.0)(x).dot(&mesh.edge_normal(e))
    }
}

impl NormalTrace for VelocityField {
    fn normal_component(&self, mesh: &Mesh, e: usize, x: Point2<f64>) -> f64 {
        let t = mesh.adjacency(e).first;
        self.element_values(mesh, t).eval(x).dot(&mesh.edge_normal(e))
    }
}

/// `Π₀ v`: RT0 DOF = edge mean of `v·n_E` (three-point Gauss).
pub fn interpolate_pi0(mesh: &Mesh, v: &(impl NormalTrace + Sync)) -> VelocityField {
    let rule = LineRule::edge3();
    let coeffs = (0..mesh.n_edges())
        .into_par_iter()
        .map(|e| {
            let [a, b] = mesh.edge(e);
            rule.integrate(mesh.vertex(a), mesh.vertex(b), |x, _| v.normal_component(mesh, e, x)) / mesh.edge_length(e)
        })
        .collect();
    VelocityField {
        kind: SpaceKind::Rt0,
        coeffs,
    }
}

/// `Π v`: BDM1 DOFs = `v·n_E` at both edge endpoints.
pub fn interpolate_pi(mesh: &Mesh, v: &(impl NormalTrace + Sync)) -> VelocityField {
    let coeffs = (0..mesh.n_edges())
        .into_par_iter()
        .flat_map_iter(|e| {
            let [a, b] = mesh.edge(e);
            [
                v.normal_component(mesh, e, mesh.vertex(a)),
                v.normal_component(mesh, e, mesh.vertex(b)),
            ]
        })
        .collect();
    VelocityField {
        kind: SpaceKind::Bdm1,
        coeffs,
    }
}

/// Per-element divergence of a discrete velocity (constant on each element).
pub fn element_divergence(mesh: &Mesh, u: &VelocityField) -> Vec<f64> {
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| u.element_values(mesh, t).divergence())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::DomainSpec;
    use approx::assert_relative_eq;

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    #[test]
    fn bdm1_functionals_are_dual() {
        for j in 0..6 {
            for i in 0..3 {
                for k in 0..2 {
                    let z = ref_vertex(edge_endpoint(i, k));
                    let (vals, _) = bdm1_reference_basis(z);
                    let got = vals[j].dot(&reference_normal(i));
                    let want = if 2 * i + k == j { 1.0 } else { 0.0 };
                    assert_relative_eq!(got, want, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn bdm1_divergence_is_constant() {
        // divergence from coefficients must match finite differences anywhere
        let (_, div) = bdm1_reference_basis(p(0.2, 0.3));
        let h = 1e-6;
        for j in 0..6 {
            let (px, _) = bdm1_reference_basis(p(0.2 + h, 0.3));
            let (mx, _) = bdm1_reference_basis(p(0.2 - h, 0.3));
            let (py, _) = bdm1_reference_basis(p(0.2, 0.3 + h));
            let (my, _) = bdm1_reference_basis(p(0.2, 0.3 - h));
            let fd = (px[j].x - mx[j].x + py[j].y - my[j].y) / (2.0 * h);
            assert_relative_eq!(fd, div[j], epsilon = 1e-8);
        }
    }

    #[test]
    fn edge_pair_integrates_to_edge_length() {
        let rule = LineRule::gauss(3);
        for i in 0..3 {
            let a = ref_vertex(edge_endpoint(i, 0));
            let b = ref_vertex(edge_endpoint(i, 1));
            let got = rule.integrate(a, b, |x, _| {
                let (v, _) = bdm1_reference_basis(x);
                (v[2 * i] + v[2 * i + 1]).dot(&reference_normal(i))
            });
            assert_relative_eq!(got, reference_edge_length(i), epsilon = 1e-14);
        }
    }

    #[test]
    fn rt0_reference_basis_duality_and_divergence() {
        let rule = LineRule::gauss(3);
        for j in 0..3 {
            for i in 0..3 {
                let a = ref_vertex(edge_endpoint(i, 0));
                let b = ref_vertex(edge_endpoint(i, 1));
                let flux = rule.integrate(a, b, |x, _| rt0_reference_basis(x).0[j].dot(&reference_normal(i)));
                let want = if i == j { reference_edge_length(i) } else { 0.0 };
                assert_relative_eq!(flux, want, epsilon = 1e-14);
            }
            // div φ̂_j = |ê_j| / |T̂|
            assert_relative_eq!(rt0_reference_basis(p(0.1, 0.1)).1[j], reference_edge_length(j) / 0.5);
        }
    }

    #[test]
    fn rt0_expands_in_bdm1() {
        for x in [p(0.0, 0.0), p(0.3, 0.2), p(0.1, 0.7)] {
            let (b, bd) = bdm1_reference_basis(x);
            let (r, rd) = rt0_reference_basis(x);
            for i in 0..3 {
                assert_relative_eq!(r[i], b[2 * i] + b[2 * i + 1], epsilon = 1e-14);
                assert_relative_eq!(rd[i], bd[2 * i] + bd[2 * i + 1], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn piola_on_identity_and_scaled_elements() {
        let id = ElementGeometry::from_vertices([p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)]);
        let v = Vector2::new(0.3, -0.4);
        assert_eq!(piola(&id, v), v);
        let scaled = ElementGeometry::from_vertices([p(0.0, 0.0), p(2.0, 0.0), p(0.0, 2.0)]);
        assert_relative_eq!(piola(&scaled, Vector2::new(1.0, 0.0)), Vector2::new(0.5, 0.0));
        assert_relative_eq!(inverse_piola(&scaled, piola(&scaled, v)), v, epsilon = 1e-15);
    }

    #[test]
    fn piola_preserves_edge_fluxes() {
        let geom = ElementGeometry::from_vertices([p(0.3, -0.2), p(1.7, 0.4), p(0.1, 1.3)]);
        let vhat = |x: Point2<f64>| Vector2::new(1.0 + x.x * x.y, x.x - 2.0 * x.y * x.y);
        let rule = LineRule::gauss(5);
        for i in 0..3 {
            let ra = ref_vertex(edge_endpoint(i, 0));
            let rb = ref_vertex(edge_endpoint(i, 1));
            let reference = rule.integrate(ra, rb, |x, _| vhat(x).dot(&reference_normal(i)));
            let a = geom.vertices[edge_endpoint(i, 0)];
            let b = geom.vertices[edge_endpoint(i, 1)];
            let physical = rule.integrate(a, b, |x, _| piola(&geom, vhat(geom.inverse_map(x))).dot(&geom.outward_normal(i)));
            assert_relative_eq!(physical, reference, epsilon = 1e-12);
        }
    }

    #[test]
    fn local_basis_is_dual_to_global_functionals() {
        let mesh = Mesh::build_initial(&DomainSpec::LShape).unwrap();
        for t in 0..mesh.n_elements() {
            let b = local_bdm1(&mesh, t);
            let tri = mesh.triangle(t);
            for j in 0..6 {
                for i in 0..3 {
                    let e = mesh.element_edges(t)[i];
                    let n = mesh.edge_normal(e);
                    for k in 0..2 {
                        let m = edge_endpoint(i, k);
                        let dof = 2 * e + usize::from(mesh.edge(e)[0] != tri[m]);
                        let want = if dof == b.dofs[j] { 1.0 } else { 0.0 };
                        assert_relative_eq!(b.physical[j][m].dot(&n), want, epsilon = 1e-13);
                    }
                }
                // ∫_T div ψ = ±|e|/2
                let i = j / 2;
                let expected = mesh.edge_sign(t, i) * mesh.geometry(t).edge_length(i) / 2.0;
                assert_relative_eq!(b.divergence[j] * mesh.area(t), expected, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn normal_traces_agree_across_edges() {
        let mesh = crate::mesh::uniform_refine(&Mesh::build_initial(&DomainSpec::Square).unwrap());
        let u = VelocityField {
            kind: SpaceKind::Bdm1,
            coeffs: (0..2 * mesh.n_edges()).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect(),
        };
        for e in 0..mesh.n_edges() {
            let adj = mesh.adjacency(e);
            let Some(s) = adj.second else { continue };
            let n = mesh.edge_normal(e);
            let [a, b] = mesh.edge(e);
            for t in [0.1, 0.5, 0.9] {
                let x = mesh.vertex(a) + (mesh.vertex(b) - mesh.vertex(a)) * t;
                let l = u.element_values(&mesh, adj.first).eval(x).dot(&n);
                let r = u.element_values(&mesh, s).eval(x).dot(&n);
                assert_relative_eq!(l, r, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn dof_counts_and_neumann_constraints() {
        let mesh = Mesh::new(
            vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)],
            vec![[0, 1, 2], [0, 2, 3]],
            |a, b| if a.y == 0.0 && b.y == 0.0 { BoundaryTag::Neumann } else { BoundaryTag::Dirichlet },
        )
        .unwrap();
        let bdm = DofMap::new(&mesh, SpaceKind::Bdm1);
        assert_eq!(bdm.n_full(), 2 * mesh.n_edges());
        assert_eq!(bdm.n_free(), 2 * mesh.n_edges() - 2);
        let rt = DofMap::new(&mesh, SpaceKind::Rt0);
        assert_eq!(rt.n_full(), mesh.n_edges());
        assert_eq!(rt.n_free(), mesh.n_edges() - 1);
        assert_eq!(DofMap::new(&mesh, SpaceKind::P0).n_full(), 2);
        let x: Vec<f64> = (0..bdm.n_free()).map(|i| i as f64 + 1.0).collect();
        let full = bdm.expand(&x);
        assert_eq!(full.iter().filter(|&&v| v == 0.0).count(), 2);
        assert_eq!(bdm.restrict(&full), x);
    }

    #[test]
    fn qh_projection_examples() {
        let mesh = Mesh::build_initial(&DomainSpec::ReferenceTriangle).unwrap();
        assert_relative_eq!(project_qh(&mesh, |_, _| 2.5).0[0], 2.5);
        assert_relative_eq!(project_qh(&mesh, |x, _| x.x).0[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(project_qh(&mesh, |x, _| x.x * x.x).0[0], 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn qh_is_idempotent() {
        let mesh = crate::mesh::uniform_refine(&Mesh::build_initial(&DomainSpec::LShape).unwrap());
        let q = project_qh(&mesh, |x, _| (3.0 * x.x).sin() * x.y);
        let qq = project_qh(&mesh, |_, t| q.0[t]);
        for (a, b) in q.0.iter().zip(&qq.0) {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
    }

    #[test]
    fn pi0_reproduces_constants_and_commutes() {
        let mesh = crate::mesh::uniform_refine(&Mesh::build_initial(&DomainSpec::LShape).unwrap());
        let c = interpolate_pi0(&mesh, &AnalyticField(|_| Vector2::new(0.7, -1.1)));
        for t in 0..mesh.n_elements() {
            for v in c.element_values(&mesh, t).values {
                assert_relative_eq!(v, Vector2::new(0.7, -1.1), epsilon = 1e-13);
            }
        }
        let pi0 = interpolate_pi0(&mesh, &AnalyticField(|x: Point2<f64>| Vector2::new(x.x * x.x, 0.0)));
        let qdiv = project_qh(&mesh, |x, _| 2.0 * x.x);
        let div = element_divergence(&mesh, &pi0);
        for t in 0..mesh.n_elements() {
            assert_relative_eq!(div[t], qdiv.0[t], epsilon = 1e-12);
        }
    }

    #[test]
    fn pi0_of_bdm1_keeps_means_and_divergence() {
        let mesh = crate::mesh::uniform_refine(&Mesh::build_initial(&DomainSpec::Square).unwrap());
        let u = VelocityField {
            kind: SpaceKind::Bdm1,
            coeffs: (0..2 * mesh.n_edges()).map(|i| (i as f64 * 0.37).sin()).collect(),
        };
        let pi0 = interpolate_pi0(&mesh, &u);
        for e in 0..mesh.n_edges() {
            assert_relative_eq!(pi0.coeffs[e], 0.5 * (u.coeffs[2 * e] + u.coeffs[2 * e + 1]), epsilon = 1e-13);
        }
        let d0 = element_divergence(&mesh, &pi0);
        let d1 = element_divergence(&mesh, &u);
        for t in 0..mesh.n_elements() {
            assert_relative_eq!(d0[t], d1[t], epsilon = 1e-12);
        }
    }

    #[test]
    fn pi_is_a_projection() {
        let mesh = crate::mesh::uniform_refine(&Mesh::build_initial(&DomainSpec::LShape).unwrap());
        let u = VelocityField {
            kind: SpaceKind::Bdm1,
            coeffs: (0..2 * mesh.n_edges()).map(|i| (i as f64 * 0.91).cos()).collect(),
        };
        let back = interpolate_pi(&mesh, &u);
        for (a, b) in back.coeffs.iter().zip(&u.coeffs) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        let c = interpolate_pi(&mesh, &AnalyticField(|_| Vector2::new(1.0, 0.0)));
        for t in 0..mesh.n_elements() {
            for v in c.element_values(&mesh, t).values {
                assert_relative_eq!(v, Vector2::new(1.0, 0.0), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn pi_edge_means_for_quadratic_trace() {
        // v = (xy, 0) has a quadratic normal trace; Π matches its endpoint
        // values, so the edge-mean mismatch is the trapezoid error of the trace.
        let mesh = Mesh::build_initial(&DomainSpec::LShape).unwrap();
        let f = |x: Point2<f64>| Vector2::new(x.x * x.y, 0.0);
        let pi = interpolate_pi(&mesh, &AnalyticField(f));
        let rule = LineRule::gauss(2);
        for e in 0..mesh.n_edges() {
            let [a, b] = mesh.edge(e);
            let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
            let n = mesh.edge_normal(e);
            let len = mesh.edge_length(e);
            let exact = rule.integrate(pa, pb, |x, _| f(x).dot(&n)) / len;
            let interp = rule.integrate(pa, pb, |x, _| pi.normal_component(&mesh, e, x)) / len;
            // the trace is t ↦ c t² + ...; the trapezoid error is -c/6 with c = n_x d_x d_y
            let d = pb - pa;
            let c = n.x * d.x * d.y;
            assert_relative_eq!(interp - exact, c / 6.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn linear_field_norms() {
        let geom = ElementGeometry::from_vertices([p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)]);
        let f = LinearField {
            geom,
            values: [Vector2::new(0.0, 0.0), Vector2::new(1.0, 0.0), Vector2::new(0.0, 0.0)],
        };
        assert_relative_eq!(f.l2_norm_sq(), 1.0 / 12.0, epsilon = 1e-15);
        assert_relative_eq!(f.gradient(), Matrix2::new(1.0, 0.0, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(f.grad_norm_sq(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(f.divergence(), 1.0, epsilon = 1e-15);
    }
}
