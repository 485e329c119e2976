//! Residual-type error indicators.
//!
//! ```text
//! η_h² = Σ_T [ h_T²‖f − ∇·u_h‖²_T + Σ_{E⊂∂T} h_E J_E² ]
//! η_Q² = Σ_T h_T² ‖u_h‖²_{1,T}
//! ```
//!
//! Interior edges enter the jump sum once from each side. The tangential
//! component uses `t_E = (−n₂, n₁)` with the global edge normal; the Dirichlet
//! data are differentiated along `s = −t_E`, which makes `J_E` vanish when
//! `u_h = −K∇p` exactly and `g = p`.

use std::io::Write;

use nalgebra::{Point2, Vector2};
use rayon::prelude::*;

use crate::benchmarks::{element_errors, DarcyProblem, ProblemError};
use crate::fem::{PressureField, VelocityField};
use crate::mesh::{BoundaryTag, Mesh};
use crate::quadrature::{LineRule, QuadRule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOptions {
    /// Keep `h_T²‖f − ∇·u_h‖²` and `h_E²‖∂²g/∂s²‖²` in η_h.
    pub include_hot: bool,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions { include_hot: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementIndicator {
    pub h: f64,
    /// `h_T²‖f − ∇·u_h‖²_T` (zero when high-order terms are excluded)
    pub residual: f64,
    /// `Σ_{E⊂∂T} h_E J_E²`
    pub jump: f64,
    /// `h_T²‖u_h‖²_{1,T}`
    pub eta_q_sq: f64,
    /// Marking indicator `residual + jump + eta_q_sq`.
    pub eta_sq: f64,
}

/// Data-dependent terms reported next to the indicators.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HigherOrderTerms {
    /// `‖h(f − ∇·u_h)‖`
    pub residual: f64,
    /// `‖h(f − Q_h f)‖`
    pub oscillation: f64,
    /// `(Σ_{E⊂Γ_D} h_E³‖∂²g/∂s²‖²_E)^½`
    pub boundary: f64,
    /// `‖h K⁻¹u_h‖`
    pub weighted_velocity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    pub elements: Vec<ElementIndicator>,
    /// `J_E` per edge.
    pub edge_jumps: Vec<f64>,
    pub eta_h: f64,
    pub eta_q: f64,
    pub eta_total: f64,
    pub hot: HigherOrderTerms,
    pub include_hot: bool,
}

impl EstimatorReport {
    pub fn indicators_sq(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.eta_sq).collect()
    }

    /// One row per element plus a trailing summary row.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        let mut s = String::from("element,h_T,residual,jump,eta_Q_sq,eta_T_sq\n");
        for (t, e) in self.elements.iter().enumerate() {
            s.push_str(&format!(
                "{t},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                e.h, e.residual, e.jump, e.eta_q_sq, e.eta_sq
            ));
        }
        let total = |f: fn(&ElementIndicator) -> f64| self.elements.iter().map(f).sum::<f64>();
        s.push_str(&format!(
            "total,,{:.16e},{:.16e},{:.16e},{:.16e}\n",
            total(|e| e.residual),
            total(|e| e.jump),
            total(|e| e.eta_q_sq),
            total(|e| e.eta_sq)
        ));
        out.write_all(s.as_bytes())
    }
}

/// Unit tangent `t_E = (−n₂, n₁)` of edge `e`.
pub fn edge_tangent(mesh: &Mesh, e: usize) -> Vector2<f64> {
    let n = mesh.edge_normal(e);
    Vector2::new(-n.y, n.x)
}

/// `γ_t(K⁻¹u_h)` from element `t` at a point `x` of edge `e`.
fn tangential_component(
    mesh: &Mesh,
    problem: &dyn DarcyProblem,
    u_h: &VelocityField,
    t: usize,
    e: usize,
    x: Point2<f64>,
) -> f64 {
    let hint = mesh.centroid(t);
    let k = problem.permeability(x, hint);
    let v = u_h.element_values(mesh, t).eval(x);
    let kinv_u = k.try_inverse().expect("positive definite permeability") * v;
    kinv_u.dot(&edge_tangent(mesh, e))
}

/// `J_E²`, and for Dirichlet edges also `‖∂²g/∂s²‖²_E`.
fn edge_jump_sq(
    mesh: &Mesh,
    problem: &dyn DarcyProblem,
    u_h: &VelocityField,
    e: usize,
    include_hot: bool,
) -> (f64, f64) {
    let rule = LineRule::edge3();
    let [a, b] = mesh.edge(e);
    let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
    let adj = mesh.adjacency(e);
    match (adj.second, mesh.boundary_tag(e)) {
        (Some(second), _) => {
            let j = rule.integrate(pa, pb, |x, _| {
                let d = tangential_component(mesh, problem, u_h, adj.first, e, x)
                    - tangential_component(mesh, problem, u_h, second, e, x);
                d * d
            });
            (j, 0.0)
        }
        (None, Some(BoundaryTag::Dirichlet)) => {
            let s = -edge_tangent(mesh, e);
            let hint = mesh.centroid(adj.first);
            let first = rule.integrate(pa, pb, |x, _| {
                let (dg, _) = problem.dirichlet(x, hint).directional(s);
                (tangential_component(mesh, problem, u_h, adj.first, e, x) - dg).powi(2)
            });
            let second = rule.integrate(pa, pb, |x, _| problem.dirichlet(x, hint).directional(s).1.powi(2));
            let he = mesh.edge_length(e);
            let hot = if include_hot { he * he * second } else { 0.0 };
            (first + hot, second)
        }
        _ => (0.0, 0.0),
    }
}

struct ElementParts {
    residual_sq: f64,
    oscillation_sq: f64,
    eta_q_sq: f64,
    weighted_velocity_sq: f64,
}

/// Evaluates all indicators for a discrete velocity of either solver.
pub fn compute_report(
    mesh: &Mesh,
    u_h: &VelocityField,
    problem: &dyn DarcyProblem,
    options: &EstimatorOptions,
) -> EstimatorReport {
    let edges: Vec<(f64, f64)> = (0..mesh.n_edges())
        .into_par_iter()
        .map(|e| edge_jump_sq(mesh, problem, u_h, e, options.include_hot))
        .collect();
    let rule = QuadRule::gauss7();
    let parts: Vec<ElementParts> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let geom = mesh.geometry(t);
            let hint = geom.centroid();
            let field = u_h.element_values(mesh, t);
            let div = field.divergence();
            let h2 = geom.diameter * geom.diameter;
            let qf = rule.integrate(&geom, |x| problem.source(x, hint)) / geom.area;
            let residual_sq = h2 * rule.integrate(&geom, |x| (problem.source(x, hint) - div).powi(2));
            let oscillation_sq = h2 * rule.integrate(&geom, |x| (problem.source(x, hint) - qf).powi(2));
            let weighted_velocity_sq = h2
                * rule.integrate(&geom, |x| {
                    let k = problem.permeability(x, hint);
                    (k.try_inverse().expect("positive definite permeability") * field.eval(x)).norm_squared()
                });
            ElementParts {
                residual_sq,
                oscillation_sq,
                eta_q_sq: h2 * field.h1_norm_sq(),
                weighted_velocity_sq,
            }
        })
        .collect();

    let elements: Vec<ElementIndicator> = (0..mesh.n_elements())
        .map(|t| {
            let jump: f64 = mesh
                .element_edges(t)
                .iter()
                .map(|&e| mesh.edge_length(e) * edges[e].0)
                .sum();
            let p = &parts[t];
            let residual = if options.include_hot { p.residual_sq } else { 0.0 };
            ElementIndicator {
                h: mesh.diameter(t),
                residual,
                jump,
                eta_q_sq: p.eta_q_sq,
                eta_sq: residual + jump + p.eta_q_sq,
            }
        })
        .collect();

    let eta_h_sq: f64 = elements.iter().map(|e| e.residual + e.jump).sum();
    let eta_q_sq: f64 = elements.iter().map(|e| e.eta_q_sq).sum();
    let boundary_sq: f64 = (0..mesh.n_edges())
        .filter(|&e| mesh.boundary_tag(e) == Some(BoundaryTag::Dirichlet))
        .map(|e| mesh.edge_length(e).powi(3) * edges[e].1)
        .sum();
    let sum = |f: fn(&ElementParts) -> f64| parts.iter().map(f).sum::<f64>().sqrt();
    EstimatorReport {
        edge_jumps: edges.iter().map(|(j, _)| j.sqrt()).collect(),
        eta_h: eta_h_sq.sqrt(),
        eta_q: eta_q_sq.sqrt(),
        eta_total: (eta_h_sq + eta_q_sq).sqrt(),
        hot: HigherOrderTerms {
            residual: sum(|p| p.residual_sq),
            oscillation: sum(|p| p.oscillation_sq),
            boundary: boundary_sq.sqrt(),
            weighted_velocity: sum(|p| p.weighted_velocity_sq),
        },
        include_hot: options.include_hot,
        elements,
    }
}

/// `a / b` with `0/0 = 0` and `a/0 = ∞` for `a > 0`.
pub fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else if a == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Both sides of the reliability, pressure and efficiency inequalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremMeasurements {
    pub err_u: f64,
    /// `err_u / (η_h² + η_Q²)^½`
    pub c_rel: f64,
    /// `η_h + η_Q + h_max⁻¹‖hK⁻¹u_h‖`
    pub efficiency_lhs: f64,
    /// `err_u + ‖h⁻¹(p − p_h)‖ + ‖h(f − Q_h f)‖ + (Σ h_E³‖∂²g/∂s²‖²)^½`
    pub efficiency_rhs: f64,
    pub efficiency_ratio: f64,
    /// `‖Q_h p − p_h‖`
    pub pressure_lhs: f64,
    /// `h_max(η_h + η_Q) + ‖h(f − ∇·u_h)‖`
    pub pressure_rhs: f64,
    pub pressure_ratio: f64,
    /// `‖p − p_h‖`
    pub full_pressure_lhs: f64,
    /// `h_max(η_h + η_Q) + ‖hK⁻¹u_h‖ + ‖h(f − ∇·u_h)‖`
    pub full_pressure_rhs: f64,
    pub full_pressure_ratio: f64,
    /// `(η_h² + η_Q²)^½ / err_u`
    pub efficiency_index: f64,
}

/// Measures the inequalities for a solution with known exact fields. With
/// `include_eta_q = false` the quadrature indicator is dropped from every
/// bound, as appropriate for the exactly integrated mixed method.
pub fn measure_theorems(
    mesh: &Mesh,
    u_h: &VelocityField,
    p_h: &PressureField,
    problem: &dyn DarcyProblem,
    report: &EstimatorReport,
    include_eta_q: bool,
) -> Result<TheoremMeasurements, ProblemError> {
    let parts = element_errors(mesh, u_h, p_h, problem)?;
    let err_u = parts.iter().map(|e| e[0]).sum::<f64>().sqrt();
    let err_p = parts.iter().map(|e| e[1]).sum::<f64>().sqrt();
    let err_qhp = parts.iter().map(|e| e[2]).sum::<f64>().sqrt();
    let inv_h_err_p = (0..mesh.n_elements())
        .map(|t| parts[t][1] / mesh.diameter(t).powi(2))
        .sum::<f64>()
        .sqrt();
    let eta_q = if include_eta_q { report.eta_q } else { 0.0 };
    let eta = (report.eta_h.powi(2) + eta_q.powi(2)).sqrt();
    let h_max = mesh.h_max();
    let efficiency_lhs = report.eta_h + eta_q + report.hot.weighted_velocity / h_max;
    let efficiency_rhs = err_u + inv_h_err_p + report.hot.oscillation + report.hot.boundary;
    let pressure_rhs = h_max * (report.eta_h + eta_q) + report.hot.residual;
    let full_pressure_rhs = pressure_rhs + report.hot.weighted_velocity;
    Ok(TheoremMeasurements {
        err_u,
        c_rel: ratio(err_u, eta),
        efficiency_lhs,
        efficiency_rhs,
        efficiency_ratio: ratio(efficiency_lhs, efficiency_rhs),
        pressure_lhs: err_qhp,
        pressure_rhs,
        pressure_ratio: ratio(err_qhp, pressure_rhs),
        full_pressure_lhs: err_p,
        full_pressure_rhs,
        full_pressure_ratio: ratio(err_p, full_pressure_rhs),
        efficiency_index: ratio(eta, err_u),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::ConstantPatch;
    use crate::fem::SpaceKind;
    use crate::mesh::DomainSpec;
    use approx::assert_relative_eq;

    #[test]
    fn ratio_conventions() {
        assert_eq!(ratio(0.0, 0.0), 0.0);
        assert_eq!(ratio(1.0, 0.0), f64::INFINITY);
        assert_eq!(ratio(1.0, 4.0), 0.25);
    }

    #[test]
    fn zero_velocity_with_constant_data() {
        let mesh = ConstantPatch.initial_mesh();
        let u = VelocityField::zeros(&mesh, SpaceKind::Bdm1);
        let r = compute_report(&mesh, &u, &ConstantPatch, &EstimatorOptions::default());
        assert_eq!(r.eta_h, 0.0);
        assert_eq!(r.eta_q, 0.0);
        assert!(r.edge_jumps.iter().all(|&j| j == 0.0));
    }

    #[test]
    fn unit_flow_on_reference_triangle() {
        let mesh = Mesh::build_initial(&DomainSpec::ReferenceTriangle).unwrap();
        let u = crate::fem::interpolate_pi(&mesh, &crate::fem::AnalyticField(|_| Vector2::new(1.0, 0.0)));
        let r = compute_report(&mesh, &u, &ConstantPatch, &EstimatorOptions::default());
        // h_T = √2, ‖u‖² = 1/2, no gradient
        assert_relative_eq!(r.eta_q, 1.0, epsilon = 1e-14);
        assert!(r.elements[0].residual <= 1e-28);
    }
}
