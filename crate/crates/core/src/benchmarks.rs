//! Model problems with known solutions.
//!
//! Coefficients and data may be discontinuous across element boundaries, so
//! every pointwise evaluation receives a `hint`: a point strictly inside the
//! element the evaluation belongs to (the element centroid in practice).

use std::f64::consts::PI;

use nalgebra::{Complex, Matrix2, Point2, Vector2};
use rayon::prelude::*;
use thiserror::Error;

use crate::fem::{PressureField, VelocityField};
use crate::mesh::{BoundaryTag, DomainSpec, Mesh};
use crate::quadrature::QuadRule;

/// Value, gradient and Hessian of a scalar function at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarJet {
    pub value: f64,
    pub gradient: Vector2<f64>,
    pub hessian: Matrix2<f64>,
}

impl ScalarJet {
    pub fn zero() -> Self {
        ScalarJet {
            value: 0.0,
            gradient: Vector2::zeros(),
            hessian: Matrix2::zeros(),
        }
    }

    /// First and second derivatives along the unit direction `s`.
    pub fn directional(&self, s: Vector2<f64>) -> (f64, f64) {
        (self.gradient.dot(&s), s.dot(&(self.hessian * s)))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("unknown problem `{0}` (expected example71_r04, example71_r01, example72, linear_patch or constant_patch)")]
    UnknownProblem(String),
    #[error("problem `{0}` has no exact solution")]
    NoExactSolution(String),
}

/// Darcy problem `u = -K∇p`, `∇·u = f`, `p = g` on Γ_D, `u·n = 0` on Γ_N.
pub trait DarcyProblem: Send + Sync {
    fn name(&self) -> &str;

    fn domain(&self) -> DomainSpec;

    fn permeability(&self, x: Point2<f64>, hint: Point2<f64>) -> Matrix2<f64>;

    fn source(&self, x: Point2<f64>, hint: Point2<f64>) -> f64;

    /// Exact pressure jet, if known.
    fn exact_pressure(&self, _x: Point2<f64>, _hint: Point2<f64>) -> Option<ScalarJet> {
        None
    }

    /// Dirichlet data `g` with derivatives; defaults to the exact pressure.
    fn dirichlet(&self, x: Point2<f64>, hint: Point2<f64>) -> ScalarJet {
        self.exact_pressure(x, hint)
            .expect("problems without an exact pressure must provide Dirichlet data")
    }

    fn boundary_tag(&self, _a: Point2<f64>, _b: Point2<f64>) -> BoundaryTag {
        BoundaryTag::Dirichlet
    }

    /// `(k₀, k₁)` with `k₀|ξ|² ≤ ξᵀKξ ≤ k₁|ξ|²`.
    fn permeability_bounds(&self) -> (f64, f64);

    fn has_exact_solution(&self) -> bool {
        false
    }

    /// `u = -K∇p`.
    fn exact_velocity(&self, x: Point2<f64>, hint: Point2<f64>) -> Option<Vector2<f64>> {
        self.exact_pressure(x, hint)
            .map(|p| -(self.permeability(x, hint) * p.gradient))
    }

    /// Whether each element of `mesh` lies inside a single coefficient region.
    fn is_region_aligned(&self, _mesh: &Mesh) -> bool {
        true
    }

    /// Initial mesh with boundary tags from [`DarcyProblem::boundary_tag`].
    fn initial_mesh(&self) -> Mesh {
        let base = Mesh::build_initial(&self.domain()).expect("built-in domains are valid");
        Mesh::new(base.vertices().to_vec(), base.triangles().to_vec(), |a, b| self.boundary_tag(a, b))
            .expect("built-in domains are valid")
    }
}

/// `p ≡ 1` with `K = I` on `(-1,1)²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantPatch;

impl DarcyProblem for ConstantPatch {
    fn name(&self) -> &str {
        "constant_patch"
    }
    fn domain(&self) -> DomainSpec {
        DomainSpec::Square
    }
    fn permeability(&self, _: Point2<f64>, _: Point2<f64>) -> Matrix2<f64> {
        Matrix2::identity()
    }
    fn source(&self, _: Point2<f64>, _: Point2<f64>) -> f64 {
        0.0
    }
    fn exact_pressure(&self, _: Point2<f64>, _: Point2<f64>) -> Option<ScalarJet> {
        Some(ScalarJet {
            value: 1.0,
            ..ScalarJet::zero()
        })
    }
    fn permeability_bounds(&self) -> (f64, f64) {
        (1.0, 1.0)
    }
    fn has_exact_solution(&self) -> bool {
        true
    }
}

/// `p = x + y`, `u = (-1, -1)` with `K = I` on `(-1,1)²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearPatch;

impl DarcyProblem for LinearPatch {
    fn name(&self) -> &str {
        "linear_patch"
    }
    fn domain(&self) -> DomainSpec {
        DomainSpec::Square
    }
    fn permeability(&self, _: Point2<f64>, _: Point2<f64>) -> Matrix2<f64> {
        Matrix2::identity()
    }
    fn source(&self, _: Point2<f64>, _: Point2<f64>) -> f64 {
        0.0
    }
    fn exact_pressure(&self, x: Point2<f64>, _: Point2<f64>) -> Option<ScalarJet> {
        Some(ScalarJet {
            value: x.x + x.y,
            gradient: Vector2::new(1.0, 1.0),
            hessian: Matrix2::zeros(),
        })
    }
    fn permeability_bounds(&self) -> (f64, f64) {
        (1.0, 1.0)
    }
    fn has_exact_solution(&self) -> bool {
        true
    }
}

/// Jet of `Re(c z^r)` where `z^r = ρ^r e^{irθ}` on the given angle branch.
fn harmonic_power_jet(c: Complex<f64>, r: f64, rho: f64, theta: f64) -> ScalarJet {
    if rho == 0.0 {
        // value and derivatives by the limit convention at the singular point
        return ScalarJet::zero();
    }
    let pow = |alpha: f64| Complex::from_polar(rho.powf(alpha), alpha * theta);
    let f = c * pow(r);
    let f1 = c * r * pow(r - 1.0);
    let f2 = c * r * (r - 1.0) * pow(r - 2.0);
    ScalarJet {
        value: f.re,
        gradient: Vector2::new(f1.re, -f1.im),
        hessian: Matrix2::new(f2.re, -f2.im, -f2.im, -f2.re),
    }
}

/// Angle of `x` in `[0, 2π)`.
fn polar_angle(x: Point2<f64>) -> f64 {
    let t = x.y.atan2(x.x);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

/// Corner singularity `p = ρ^r sin(rθ)` on the L-shape, `K = I`, `f = 0`,
/// with `θ ∈ [0, 3π/2]` measured from the positive x-axis.
#[derive(Debug, Clone)]
pub struct LShapeCorner {
    pub r: f64,
    name: String,
}

impl LShapeCorner {
    pub fn new(r: f64) -> Self {
        assert!(r > 0.0 && r < 1.0, "exponent must lie in (0, 1)");
        LShapeCorner {
            r,
            name: format!("example71_r{r}"),
        }
    }

    pub fn with_name(r: f64, name: &str) -> Self {
        LShapeCorner {
            name: name.to_string(),
            ..Self::new(r)
        }
    }
}

impl DarcyProblem for LShapeCorner {
    fn name(&self) -> &str {
        &self.name
    }
    fn domain(&self) -> DomainSpec {
        DomainSpec::LShape
    }
    fn permeability(&self, _: Point2<f64>, _: Point2<f64>) -> Matrix2<f64> {
        Matrix2::identity()
    }
    fn source(&self, _: Point2<f64>, _: Point2<f64>) -> f64 {
        0.0
    }
    fn exact_pressure(&self, x: Point2<f64>, _: Point2<f64>) -> Option<ScalarJet> {
        // sin(rθ) ρ^r = Re(-i z^r)
        Some(harmonic_power_jet(
            Complex::new(0.0, -1.0),
            self.r,
            x.coords.norm(),
            polar_angle(x),
        ))
    }
    fn permeability_bounds(&self) -> (f64, f64) {
        (1.0, 1.0)
    }
    fn has_exact_solution(&self) -> bool {
        true
    }
}

/// Four-quadrant discontinuous permeability on `(-1,1)²`: `K = s_i I` on
/// quadrant `Ω_i` (counterclockwise from the first), `f = 0`, and
/// `p = ρ^r (a_i sin rθ + b_i cos rθ)` on `Ω_i`.
#[derive(Debug, Clone)]
pub struct Checkerboard {
    pub r: f64,
    pub s: [f64; 4],
    pub a: [f64; 4],
    pub b: [f64; 4],
}

impl Default for Checkerboard {
    fn default() -> Self {
        Checkerboard {
            r: 0.53544095,
            s: [5.0, 1.0, 5.0, 1.0],
            a: [0.44721360, -0.74535599, -0.94411759, -2.40170264],
            b: [1.00000000, 2.33333333, 0.55555555, -0.48148148],
        }
    }
}

impl Checkerboard {
    /// Quadrant index `0..4` of an interior point.
    pub fn region(hint: Point2<f64>) -> usize {
        match (hint.x > 0.0, hint.y > 0.0) {
            (true, true) => 0,
            (false, true) => 1,
            (false, false) => 2,
            (true, false) => 3,
        }
    }

    /// Pressure jet evaluated with the data of quadrant `i` at `x` in its closure.
    pub fn pressure_in_region(&self, i: usize, x: Point2<f64>) -> ScalarJet {
        let mut theta = polar_angle(x);
        // the positive x-axis closes the fourth quadrant at θ = 2π
        if i == 3 && theta < 0.5 * PI {
            theta += 2.0 * PI;
        }
        harmonic_power_jet(Complex::new(self.b[i], -self.a[i]), self.r, x.coords.norm(), theta)
    }
}

impl DarcyProblem for Checkerboard {
    fn name(&self) -> &str {
        "example72"
    }
    fn domain(&self) -> DomainSpec {
        DomainSpec::Square
    }
    fn permeability(&self, _: Point2<f64>, hint: Point2<f64>) -> Matrix2<f64> {
        Matrix2::identity() * self.s[Self::region(hint)]
    }
    fn source(&self, _: Point2<f64>, _: Point2<f64>) -> f64 {
        0.0
    }
    fn exact_pressure(&self, x: Point2<f64>, hint: Point2<f64>) -> Option<ScalarJet> {
        Some(self.pressure_in_region(Self::region(hint), x))
    }
    fn permeability_bounds(&self) -> (f64, f64) {
        (1.0, 5.0)
    }
    fn has_exact_solution(&self) -> bool {
        true
    }
    fn is_region_aligned(&self, mesh: &Mesh) -> bool {
        (0..mesh.n_elements()).all(|t| {
            let q = Self::region(mesh.centroid(t));
            let (sx, sy) = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)][q];
            mesh.triangle(t)
                .iter()
                .all(|&v| mesh.vertex(v).x * sx >= 0.0 && mesh.vertex(v).y * sy >= 0.0)
        })
    }
}

/// Looks up a built-in problem by its configuration id.
pub fn problem_by_id(id: &str) -> Result<Box<dyn DarcyProblem>, ProblemError> {
    Ok(match id {
        "example71_r04" => Box::new(LShapeCorner::with_name(0.4, id)),
        "example71_r01" => Box::new(LShapeCorner::with_name(0.1, id)),
        "example72" => Box::new(Checkerboard::default()),
        "linear_patch" => Box::new(LinearPatch),
        "constant_patch" => Box::new(ConstantPatch),
        other => return Err(ProblemError::UnknownProblem(other.to_string())),
    })
}

/// Errors against the exact solution, each an L² norm over Ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactErrors {
    /// `‖K^{-1/2}(u − u_h)‖`
    pub err_u: f64,
    /// `‖p − p_h‖`
    pub err_p: f64,
    /// `‖Q_h p − p_h‖`
    pub err_qhp: f64,
}

/// Per-element squared errors `(‖K^{-1/2}(u−u_h)‖²_T, ‖p−p_h‖²_T, ‖Q_h p−p_h‖²_T)`.
pub fn element_errors(
    mesh: &Mesh,
    u_h: &VelocityField,
    p_h: &PressureField,
    problem: &dyn DarcyProblem,
) -> Result<Vec<[f64; 3]>, ProblemError> {
    if !problem.has_exact_solution() {
        return Err(ProblemError::NoExactSolution(problem.name().to_string()));
    }
    let rule = QuadRule::gauss7();
    Ok((0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let geom = mesh.geometry(t);
            let hint = geom.centroid();
            let uh = u_h.element_values(mesh, t);
            let ph = p_h.0[t];
            let mut eu = 0.0;
            let mut ep = 0.0;
            let mut mean_p = 0.0;
            for (xh, w) in rule.points.iter().zip(&rule.weights) {
                let x = geom.map(*xh);
                let k = problem.permeability(x, hint);
                let p = problem.exact_pressure(x, hint).expect("exact solution");
                let d = -(k * p.gradient) - uh.eval(x);
                let kinv_d = k.try_inverse().expect("positive definite permeability") * d;
                let jw = w * geom.det;
                eu += jw * kinv_d.dot(&d);
                ep += jw * (p.value - ph).powi(2);
                mean_p += jw * p.value;
            }
            let qhp = mean_p / geom.area;
            [eu, ep, geom.area * (qhp - ph).powi(2)]
        })
        .collect())
}

pub fn exact_errors(
    mesh: &Mesh,
    u_h: &VelocityField,
    p_h: &PressureField,
    problem: &dyn DarcyProblem,
) -> Result<ExactErrors, ProblemError> {
    let parts = element_errors(mesh, u_h, p_h, problem)?;
    let sum = |i: usize| parts.iter().map(|e| e[i]).sum::<f64>().sqrt();
    Ok(ExactErrors {
        err_u: sum(0),
        err_p: sum(1),
        err_qhp: sum(2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    fn finite_difference_check(jet: impl Fn(Point2<f64>) -> ScalarJet, x: Point2<f64>) {
        let h = 1e-5;
        let j = jet(x);
        let ex = Vector2::new(h, 0.0);
        let ey = Vector2::new(0.0, h);
        let gx = (jet(x + ex).value - jet(x - ex).value) / (2.0 * h);
        let gy = (jet(x + ey).value - jet(x - ey).value) / (2.0 * h);
        let scale = 1.0 + j.gradient.norm();
        assert!((gx - j.gradient.x).abs() < 1e-6 * scale, "{gx} {:?}", j.gradient);
        assert!((gy - j.gradient.y).abs() < 1e-6 * scale);
        let hx = (jet(x + ex).gradient - jet(x - ex).gradient) / (2.0 * h);
        let hy = (jet(x + ey).gradient - jet(x - ey).gradient) / (2.0 * h);
        let hs = 1.0 + j.hessian.norm();
        assert!((hx - j.hessian.column(0)).norm() < 1e-5 * hs);
        assert!((hy - j.hessian.column(1)).norm() < 1e-5 * hs);
    }

    #[test]
    fn corner_value_at_diagonal_point() {
        let prob = LShapeCorner::new(0.4);
        let x = p(0.5f64.sqrt(), 0.5f64.sqrt());
        assert_relative_eq!(prob.exact_pressure(x, x).unwrap().value, (0.1 * PI).sin(), epsilon = 1e-14);
    }

    #[test]
    fn corner_branch_is_continuous_and_vanishes_on_theta_zero() {
        let prob = LShapeCorner::new(0.4);
        assert_eq!(prob.exact_pressure(p(0.5, 0.0), p(0.5, 0.1)).unwrap().value, 0.0);
        // θ = 3π/2 on the negative y-axis
        let v = prob.exact_pressure(p(0.0, -0.5), p(-0.1, -0.5)).unwrap().value;
        assert_relative_eq!(v, 0.5f64.powf(0.4) * (0.4 * 1.5 * PI).sin(), epsilon = 1e-14);
        let left = prob.exact_pressure(p(-1e-12, -0.5), p(-0.1, -0.5)).unwrap().value;
        assert_relative_eq!(v, left, epsilon = 1e-10);
    }

    #[test]
    fn corner_solution_is_harmonic_with_consistent_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for r in [0.4, 0.1] {
            let prob = LShapeCorner::new(r);
            for _ in 0..100 {
                let x = loop {
                    let x = p(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    if !(x.x > -0.05 && x.y < 0.05) && x.coords.norm() > 0.1 {
                        break x;
                    }
                };
                let jet = prob.exact_pressure(x, x).unwrap();
                assert!(jet.hessian.trace().abs() < 1e-10 * (1.0 + jet.hessian.norm()));
                finite_difference_check(|y| prob.exact_pressure(y, x).unwrap(), x);
                let lap = {
                    let h = 1e-4;
                    let f = |dx: f64, dy: f64| prob.exact_pressure(p(x.x + dx, x.y + dy), x).unwrap().value;
                    (f(h, 0.0) + f(-h, 0.0) + f(0.0, h) + f(0.0, -h) - 4.0 * f(0.0, 0.0)) / (h * h)
                };
                assert!(lap.abs() < 1e-6 * 1e2, "{lap}");
                let u = prob.exact_velocity(x, x).unwrap();
                assert_relative_eq!(u, -jet.gradient, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn checkerboard_constants_and_interfaces() {
        let prob = Checkerboard::default();
        assert_eq!(prob.s, [5.0, 1.0, 5.0, 1.0]);
        assert_eq!(prob.r, 0.53544095);
        // interfaces: θ = π/2 between Ω1|Ω2, π between Ω2|Ω3, 3π/2 between Ω3|Ω4, 0 between Ω4|Ω1
        let interfaces = [(0usize, 1usize, Vector2::new(0.0, 1.0)), (1, 2, Vector2::new(-1.0, 0.0)), (2, 3, Vector2::new(0.0, -1.0)), (3, 0, Vector2::new(1.0, 0.0))];
        let mut max_flux_jump: f64 = 0.0;
        let mut max_pressure_jump: f64 = 0.0;
        for (i, j, dir) in interfaces {
            // normal across a ray along `dir`
            let normal = Vector2::new(-dir.y, dir.x);
            for k in 1..=50 {
                let rho = k as f64 / 50.0;
                let x = Point2::from(dir * rho);
                let pi = prob.pressure_in_region(i, x);
                let pj = prob.pressure_in_region(j, x);
                let fi = -(prob.s[i] * pi.gradient).dot(&normal);
                let fj = -(prob.s[j] * pj.gradient).dot(&normal);
                max_flux_jump = max_flux_jump.max((fi - fj).abs());
                max_pressure_jump = max_pressure_jump.max((pi.value - pj.value).abs());
            }
        }
        assert!(max_flux_jump < 1e-6, "{max_flux_jump}");
        // the tabulated data is in fact continuous up to its 8-digit rounding
        assert!(max_pressure_jump < 1e-7, "{max_pressure_jump}");
    }

    #[test]
    fn checkerboard_is_harmonic_per_quadrant() {
        let prob = Checkerboard::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let x = p(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if x.x.abs() < 0.05 || x.y.abs() < 0.05 {
                continue;
            }
            let jet = prob.exact_pressure(x, x).unwrap();
            assert!(jet.hessian.trace().abs() < 1e-10 * (1.0 + jet.hessian.norm()));
            finite_difference_check(|y| prob.exact_pressure(y, x).unwrap(), x);
            let k = prob.permeability(x, x);
            assert_relative_eq!(prob.exact_velocity(x, x).unwrap(), -(k * jet.gradient), epsilon = 1e-12);
        }
    }

    #[test]
    fn checkerboard_mesh_alignment() {
        let prob = Checkerboard::default();
        let mut mesh = prob.initial_mesh();
        for _ in 0..4 {
            assert!(prob.is_region_aligned(&mesh));
            mesh = crate::mesh::uniform_refine(&mesh);
        }
        let bad = Mesh::build_initial(&DomainSpec::Custom {
            vertices: vec![[-0.5, -0.5], [0.5, -0.5], [0.0, 0.5]],
            triangles: vec![[0, 1, 2]],
        })
        .unwrap();
        assert!(!prob.is_region_aligned(&bad));
    }

    #[test]
    fn problem_lookup() {
        for id in ["example71_r04", "example71_r01", "example72", "linear_patch", "constant_patch"] {
            assert_eq!(problem_by_id(id).unwrap().name(), id);
        }
        assert!(problem_by_id("nope").is_err());
    }

    #[test]
    fn directional_derivatives() {
        let jet = LinearPatch.exact_pressure(p(0.0, 0.0), p(0.0, 0.0)).unwrap();
        let s = Vector2::new(1.0, 0.0);
        assert_eq!(jet.directional(s), (1.0, 0.0));
    }

    #[test]
    fn zero_velocity_error_is_the_velocity_norm() {
        let prob = LShapeCorner::new(0.4);
        let mesh = prob.initial_mesh();
        let zero = VelocityField::zeros(&mesh, crate::fem::SpaceKind::Bdm1);
        let p0 = PressureField(vec![0.0; mesh.n_elements()]);
        let e = exact_errors(&mesh, &zero, &p0, &prob).unwrap();
        // independent evaluation: ∫|∇p|² with |∇p| = r ρ^{r-1} and the same rule
        let rule = QuadRule::gauss7();
        let mut want = 0.0;
        for t in 0..mesh.n_elements() {
            let g = mesh.geometry(t);
            for (xh, w) in rule.points.iter().zip(&rule.weights) {
                let rho = g.map(*xh).coords.norm();
                want += w * g.det * (0.4 * rho.powf(-0.6)).powi(2);
            }
        }
        assert_relative_eq!(e.err_u, want.sqrt(), max_relative = 1e-12);
        assert!(e.err_qhp <= e.err_p);
    }
}
