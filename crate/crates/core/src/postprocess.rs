//! RT0 auxiliary problem with element-mean coefficients, the quadratic
//! pressure reconstruction built from it, and nodal averaging for plots.

use nalgebra::{Matrix2, Point2, Vector2};
use rayon::prelude::*;
use thiserror::Error;

use crate::benchmarks::DarcyProblem;
use crate::fem::{interpolate_pi0, PressureField, SpaceKind, VelocityField};
use crate::mesh::{BoundaryTag, Mesh};
use crate::quadrature::{LineRule, QuadRule};
use crate::solver::{assemble_general, solve_saddle_direct, SolverError};

#[derive(Debug, Error)]
pub enum PostprocessError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("velocity gradient on element {element} does not give a symmetric Hessian (asymmetry {asymmetry:e})")]
    AsymmetricHessian { element: usize, asymmetry: f64 },
}

/// `K̄⁻¹|_T = (1/|T|) ∫_T K⁻¹` by the degree-5 rule.
pub fn mean_inverse_permeability(mesh: &Mesh, problem: &dyn DarcyProblem) -> Vec<Matrix2<f64>> {
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let geom = mesh.geometry(t);
            let hint = geom.centroid();
            let rule = QuadRule::gauss7();
            let mut m = Matrix2::zeros();
            for (xh, w) in rule.points.iter().zip(&rule.weights) {
                let k = problem.permeability(geom.map(*xh), hint);
                m += k.try_inverse().expect("positive definite permeability") * (w * geom.det);
            }
            let m = m / geom.area;
            (m + m.transpose()) * 0.5
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct AuxiliarySolution {
    pub u: VelocityField,
    pub p: PressureField,
    pub kbar_inv: Vec<Matrix2<f64>>,
}

/// RT0/P0 mixed solution with coefficient `K̄⁻¹`, integrated exactly.
pub fn solve_auxiliary_rt0(mesh: &Mesh, problem: &dyn DarcyProblem) -> Result<AuxiliarySolution, PostprocessError> {
    let kbar_inv = mean_inverse_permeability(mesh, problem);
    let kbar: Vec<Matrix2<f64>> = kbar_inv
        .iter()
        .map(|m| m.try_inverse().expect("positive definite mean coefficient"))
        .collect();
    let perm = |t: usize, _: Point2<f64>| kbar[t];
    let system = assemble_general(mesh, problem, SpaceKind::Rt0, QuadRule::gauss7(), &perm)?;
    let sol = solve_saddle_direct(&system)?;
    Ok(AuxiliarySolution {
        u: sol.u,
        p: sol.p,
        kbar_inv,
    })
}

/// `l(x) = cᵀ(x−x₀) + ½(x−x₀)ᵀM(x−x₀) + d` on one element, `x₀` the centroid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalQuadratic {
    pub x0: Point2<f64>,
    pub c: Vector2<f64>,
    pub m: Matrix2<f64>,
    pub d: f64,
}

impl LocalQuadratic {
    pub fn eval(&self, x: Point2<f64>) -> f64 {
        let y = x - self.x0;
        self.c.dot(&y) + 0.5 * y.dot(&(self.m * y)) + self.d
    }

    pub fn gradient(&self, x: Point2<f64>) -> Vector2<f64> {
        self.c + self.m * (x - self.x0)
    }
}

#[derive(Debug, Clone)]
pub struct PostprocessedPressure {
    pub elements: Vec<LocalQuadratic>,
}

impl PostprocessedPressure {
    /// Values at the three vertices of each element (discontinuous across elements).
    pub fn vertex_values(&self, mesh: &Mesh) -> Vec<[f64; 3]> {
        (0..mesh.n_elements())
            .map(|t| {
                let tri = mesh.triangle(t);
                std::array::from_fn(|i| self.elements[t].eval(mesh.vertex(tri[i])))
            })
            .collect()
    }
}

/// Builds the quadratic with `∇l_h = −K̄⁻¹ũ_h` and element mean `p̃_h`.
pub fn build_l_h(
    mesh: &Mesh,
    u: &VelocityField,
    p: &PressureField,
    kbar_inv: &[Matrix2<f64>],
) -> Result<PostprocessedPressure, PostprocessError> {
    let elements = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let geom = mesh.geometry(t);
            let x0 = geom.centroid();
            let field = u.element_values(mesh, t);
            let c = -(kbar_inv[t] * field.eval(x0));
            let m = -(kbar_inv[t] * field.gradient());
            let asymmetry = (m - m.transpose()).abs().max();
            let scale = 1.0 + m.abs().max() + c.norm() / mesh.diameter(t);
            if asymmetry > 1e-10 * scale {
                return Err(PostprocessError::AsymmetricHessian { element: t, asymmetry });
            }
            let m = (m + m.transpose()) * 0.5;
            let mut q = LocalQuadratic { x0, c, m, d: 0.0 };
            let mean = QuadRule::gauss7().integrate(&geom, |x| q.eval(x)) / geom.area;
            q.d = p.0[t] - mean;
            Ok(q)
        })
        .collect::<Result<_, _>>()?;
    Ok(PostprocessedPressure { elements })
}

/// Worst violations of the defining properties of `l_h`, each relative to
/// `scale = 1 + max|p̃_h|` (and divided by `h_E` for the edge checks).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostprocessAudit {
    pub gradient: f64,
    pub mean: f64,
    pub trace_continuity: f64,
    pub dirichlet_mean: f64,
}

impl PostprocessAudit {
    pub fn passes(&self, tol: f64) -> bool {
        self.gradient <= tol && self.mean <= tol && self.trace_continuity <= tol && self.dirichlet_mean <= tol
    }
}

pub fn audit_l_h(
    mesh: &Mesh,
    problem: &dyn DarcyProblem,
    aux: &AuxiliarySolution,
    l_h: &PostprocessedPressure,
) -> PostprocessAudit {
    let scale = 1.0 + aux.p.0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rule = QuadRule::gauss7();
    let (gradient, mean) = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let geom = mesh.geometry(t);
            let q = &l_h.elements[t];
            let field = aux.u.element_values(mesh, t);
            let gscale = 1.0 + (aux.kbar_inv[t] * field.eval(q.x0)).norm();
            let g = geom
                .vertices
                .iter()
                .map(|&x| (q.gradient(x) + aux.kbar_inv[t] * field.eval(x)).norm() / gscale)
                .fold(0.0, f64::max);
            let m = (rule.integrate(&geom, |x| q.eval(x)) / geom.area - aux.p.0[t]).abs() / scale;
            (g, m)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    let edge_rule = LineRule::edge3();
    let (trace_continuity, dirichlet_mean) = (0..mesh.n_edges())
        .into_par_iter()
        .map(|e| {
            let [a, b] = mesh.edge(e);
            let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
            let adj = mesh.adjacency(e);
            let he = mesh.edge_length(e);
            let first = edge_rule.integrate(pa, pb, |x, _| l_h.elements[adj.first].eval(x));
            match (adj.second, mesh.boundary_tag(e)) {
                (Some(s), _) => {
                    let second = edge_rule.integrate(pa, pb, |x, _| l_h.elements[s].eval(x));
                    ((first - second).abs() / (he * scale), 0.0)
                }
                (None, Some(BoundaryTag::Dirichlet)) => {
                    let hint = mesh.centroid(adj.first);
                    let g = edge_rule.integrate(pa, pb, |x, _| problem.dirichlet(x, hint).value);
                    (0.0, (first - g).abs() / (he * scale))
                }
                _ => (0.0, 0.0),
            }
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    PostprocessAudit {
        gradient,
        mean,
        trace_continuity,
        dirichlet_mean,
    }
}

/// `‖K̄^{-1/2}(ũ_h − Π₀u_h)‖`.
pub fn auxiliary_velocity_gap(mesh: &Mesh, aux: &AuxiliarySolution, u_h: &VelocityField) -> f64 {
    let pi0 = interpolate_pi0(mesh, u_h);
    let diff = aux.u.sub(&pi0);
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let geom = mesh.geometry(t);
            let field = diff.element_values(mesh, t);
            QuadRule::gauss7().integrate(&geom, |x| {
                let d = field.eval(x);
                d.dot(&(aux.kbar_inv[t] * d))
            })
        })
        .sum::<f64>()
        .sqrt()
}

/// Unweighted mean of the values of the elements sharing each vertex.
pub fn nodal_average_pressure(mesh: &Mesh, p: &PressureField) -> Vec<f64> {
    let mut sum = vec![0.0; mesh.n_vertices()];
    let mut count = vec![0usize; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for &v in tri {
            sum[v] += p.0[t];
            count[v] += 1;
        }
    }
    sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect()
}
