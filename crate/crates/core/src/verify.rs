//! Property audits behind the `verify` command, and the measured constants of
//! the quadrature-error bounds.

use nalgebra::{Matrix2, Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::adaptivity::dorfler_mark;
use crate::benchmarks::{Checkerboard, DarcyProblem, LShapeCorner, ScalarJet};
use crate::estimator::{compute_report, EstimatorOptions};
use crate::fem::{element_divergence, piola, project_qh, reference_normal, rt0_reference_basis, LinearField};
use crate::mesh::{uniform_refine, DomainSpec, Mesh};
use crate::postprocess::{audit_l_h, build_l_h, solve_auxiliary_rt0};
use crate::quadrature::{eval_reference, pairing, sigma_t, LineRule, QuadRule, VertexValues};
use crate::solver::{assemble, audit_system, solve_mfmfe, SolveOptions};

pub const SIGMA_SEED: u64 = 0x5eed_0f_5167a;

/// Which of the two quadrature-error bounds to measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaBound {
    /// `|σ_T(K⁻¹q, v)| ≤ C h_T ‖q‖_{1,T} ‖v‖_T`, `q` BDM1, `v` RT0.
    Rt0,
    /// `|σ_T(K⁻¹q, v)| ≤ C h_T² ‖q‖_{1,T} ‖v‖_{1,T}`, `q, v` BDM1.
    Bdm1,
}

fn random_values(rng: &mut ChaCha8Rng) -> VertexValues {
    std::array::from_fn(|_| Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn random_rt0(rng: &mut ChaCha8Rng) -> VertexValues {
    let c: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
    let corners = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
    corners.map(|p| {
        let (phi, _) = rt0_reference_basis(p);
        phi[0] * c[0] + phi[1] * c[1] + phi[2] * c[2]
    })
}

/// Largest observed `|σ_T| / bound_T` over `samples` random local field pairs
/// per element; element `t` draws from stream `t` of a ChaCha generator.
pub fn sigma_constant(
    mesh: &Mesh,
    perm: &(dyn Fn(Point2<f64>) -> Matrix2<f64> + Sync),
    bound: SigmaBound,
    samples: usize,
    seed: u64,
) -> f64 {
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let geom = mesh.geometry(t);
            let h = geom.diameter;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let physical = |v: &VertexValues| LinearField {
                geom,
                values: v.map(|x| piola(&geom, x)),
            };
            let mut worst = 0.0f64;
            for _ in 0..samples {
                let q = random_values(&mut rng);
                let v = match bound {
                    SigmaBound::Rt0 => random_rt0(&mut rng),
                    SigmaBound::Bdm1 => random_values(&mut rng),
                };
                let s = sigma_t(t, &geom, perm, &q, &v).expect("positive definite permeability");
                let (qf, vf) = (physical(&q), physical(&v));
                let denom = match bound {
                    SigmaBound::Rt0 => h * (qf.h1_norm_sq() * vf.l2_norm_sq()).sqrt(),
                    SigmaBound::Bdm1 => h * h * (qf.h1_norm_sq() * vf.h1_norm_sq()).sqrt(),
                };
                worst = worst.max(s.abs() / denom);
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Outcome of one audit; `id` is stable and printed by the CLI.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditOutcome {
    pub id: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl AuditOutcome {
    fn new(id: &'static str, passed: bool, detail: String) -> Self {
        AuditOutcome { id, passed, detail }
    }
}

/// Vertex rule exactness: with constant `𝒦⁻¹` and constant `q̂` the integrand
/// is linear, so `rule` must agree with the degree-5 rule to 1e-13 relative.
pub fn sigma_exactness(rule: &QuadRule, cases: &[(&dyn DarcyProblem, &Mesh)]) -> AuditOutcome {
    let worst = cases
        .iter()
        .map(|(problem, mesh)| sigma_exactness_defect(rule, mesh, *problem))
        .fold(0.0, f64::max);
    AuditOutcome::new("sigma-exactness", worst <= 1e-13, format!("max relative deviation {worst:.3e}"))
}

fn sigma_exactness_defect(rule: &QuadRule, mesh: &Mesh, problem: &dyn DarcyProblem) -> f64 {
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let geom = mesh.geometry(t);
            let k = problem.permeability(geom.centroid(), geom.centroid());
            let perm = move |_: Point2<f64>| k;
            let mut rng = ChaCha8Rng::seed_from_u64(SIGMA_SEED);
            rng.set_stream(t as u64);
            let c = Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let q = [c; 3];
            let v = random_values(&mut rng);
            let approx = pairing(rule, t, &geom, perm, &q, &v).expect("positive definite permeability");
            let exact = pairing(QuadRule::gauss7(), t, &geom, perm, &q, &v).expect("positive definite permeability");
            (approx - exact).abs() / exact.abs().max(f64::MIN_POSITIVE)
        })
        .reduce(|| 0.0, f64::max)
}

/// Smooth fixture with a nonconstant source: `p = x³ + xy²`, constant full tensor.
struct SmoothFixture;

const FIXTURE_K: Matrix2<f64> = Matrix2::new(2.0, 0.5, 0.5, 1.0);

impl DarcyProblem for SmoothFixture {
    fn name(&self) -> &str {
        "smooth_fixture"
    }

    fn domain(&self) -> DomainSpec {
        DomainSpec::Square
    }

    fn permeability(&self, _: Point2<f64>, _: Point2<f64>) -> Matrix2<f64> {
        FIXTURE_K
    }

    fn source(&self, x: Point2<f64>, _: Point2<f64>) -> f64 {
        -14.0 * x.x - 2.0 * x.y
    }

    fn exact_pressure(&self, x: Point2<f64>, _: Point2<f64>) -> Option<ScalarJet> {
        let (a, b) = (x.x, x.y);
        Some(ScalarJet {
            value: a * a * a + a * b * b,
            gradient: Vector2::new(3.0 * a * a + b * b, 2.0 * a * b),
            hessian: Matrix2::new(6.0 * a, 2.0 * b, 2.0 * b, 2.0 * a),
        })
    }

    fn permeability_bounds(&self) -> (f64, f64) {
        let e = FIXTURE_K.symmetric_eigenvalues();
        (e.min(), e.max())
    }

    fn has_exact_solution(&self) -> bool {
        true
    }
}

fn refined(problem: &dyn DarcyProblem, levels: usize) -> Mesh {
    (0..levels).fold(problem.initial_mesh(), |m, _| uniform_refine(&m))
}

fn mesh_conformity(meshes: &[(&str, &Mesh)]) -> AuditOutcome {
    for (name, m) in meshes {
        if let Err(e) = m.audit() {
            return AuditOutcome::new("mesh-conformity", false, format!("{name}: {e}"));
        }
    }
    AuditOutcome::new("mesh-conformity", true, format!("{} meshes conforming", meshes.len()))
}

fn system_structure(cases: &[(&dyn DarcyProblem, &Mesh)]) -> AuditOutcome {
    let mut detail = Vec::new();
    for (problem, mesh) in cases {
        let audit = match assemble(mesh, *problem) {
            Ok(system) => audit_system(&system),
            Err(e) => return AuditOutcome::new("system-structure", false, format!("{}: {e}", problem.name())),
        };
        if !audit.passes() {
            return AuditOutcome::new("system-structure", false, format!("{}: {audit:?}", problem.name()));
        }
        detail.push(format!(
            "{}: off-block {:.1e}, min block eig {:.2e}, min Schur eig {:.2e}",
            problem.name(),
            audit.off_block_ratio,
            audit.min_block_eigenvalue,
            audit.schur_min_eigenvalue
        ));
    }
    AuditOutcome::new("system-structure", true, detail.join("; "))
}

fn divergence_identity(problem: &dyn DarcyProblem, mesh: &Mesh) -> AuditOutcome {
    let sol = match solve_mfmfe(mesh, problem, &SolveOptions::default()) {
        Ok(s) => s,
        Err(e) => return AuditOutcome::new("divergence-identity", false, e.to_string()),
    };
    let qf = project_qh(mesh, |x, t| problem.source(x, mesh.centroid(t)));
    let div = element_divergence(mesh, &sol.u);
    let scale = 1.0 + qf.0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = div.iter().zip(&qf.0).map(|(d, f)| (d - f).abs()).fold(0.0, f64::max) / scale;
    AuditOutcome::new("divergence-identity", worst <= 1e-10, format!("max |div u_h - Q_h f| {worst:.3e} (scaled)"))
}

fn piola_flux(mesh: &Mesh) -> AuditOutcome {
    let rule = LineRule::edge3();
    let corners = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
    let worst = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let geom = mesh.geometry(t);
            let mut rng = ChaCha8Rng::seed_from_u64(SIGMA_SEED);
            rng.set_stream(t as u64);
            let q = random_values(&mut rng);
            (0..3)
                .map(|i| {
                    let (j0, j1) = ((i + 1) % 3, (i + 2) % 3);
                    let nh = reference_normal(i);
                    let n = geom.outward_normal(i);
                    let reference = rule.integrate(corners[j0], corners[j1], |x, _| eval_reference(&q, x).dot(&nh));
                    let physical = rule.integrate(geom.vertices[j0], geom.vertices[j1], |x, _| {
                        piola(&geom, eval_reference(&q, geom.inverse_map(x))).dot(&n)
                    });
                    (reference - physical).abs() / (1.0 + reference.abs())
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    AuditOutcome::new("piola-flux", worst <= 1e-12, format!("max edge flux deviation {worst:.3e}"))
}

fn postprocess_continuity(cases: &[(&dyn DarcyProblem, &Mesh)]) -> AuditOutcome {
    let mut detail = Vec::new();
    for (problem, mesh) in cases {
        let result = solve_auxiliary_rt0(mesh, *problem)
            .and_then(|aux| build_l_h(mesh, &aux.u, &aux.p, &aux.kbar_inv).map(|l| audit_l_h(mesh, *problem, &aux, &l)));
        match result {
            Ok(audit) if audit.passes(1e-10) => detail.push(format!(
                "{}: trace {:.1e}, dirichlet {:.1e}",
                problem.name(),
                audit.trace_continuity,
                audit.dirichlet_mean
            )),
            Ok(audit) => {
                return AuditOutcome::new("postprocess-continuity", false, format!("{}: {audit:?}", problem.name()))
            }
            Err(e) => return AuditOutcome::new("postprocess-continuity", false, format!("{}: {e}", problem.name())),
        }
    }
    AuditOutcome::new("postprocess-continuity", true, detail.join("; "))
}

/// Max/min of the measured constants over five uniform levels of the L-shape,
/// for `K = I` and for a smooth variable tensor.
pub fn sigma_bound_bands(samples: usize) -> Vec<(SigmaBound, &'static str, Vec<f64>)> {
    let smooth = |x: Point2<f64>| {
        Matrix2::new(2.0 + 0.5 * (3.0 * x.x).sin(), 0.3 * x.y, 0.3 * x.y, 1.5 + 0.5 * x.x * x.y)
    };
    let identity = |_: Point2<f64>| Matrix2::identity();
    let mut meshes = vec![LShapeCorner::new(0.4).initial_mesh()];
    for _ in 1..5 {
        meshes.push(uniform_refine(meshes.last().unwrap()));
    }
    let mut out = Vec::new();
    for bound in [SigmaBound::Rt0, SigmaBound::Bdm1] {
        for (name, perm) in [
            ("identity", &identity as &(dyn Fn(Point2<f64>) -> Matrix2<f64> + Sync)),
            ("smooth", &smooth),
        ] {
            let c = meshes.iter().map(|m| sigma_constant(m, perm, bound, samples, SIGMA_SEED)).collect();
            out.push((bound, name, c));
        }
    }
    out
}

pub fn band(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

fn sigma_bounds() -> AuditOutcome {
    let bands = sigma_bound_bands(32);
    let mut passed = true;
    let mut detail = Vec::new();
    for (bound, name, c) in &bands {
        let b = band(c);
        passed &= b <= 3.0 && c.iter().all(|v| v.is_finite() && *v > 0.0);
        detail.push(format!("{bound:?}/{name}: C in [{:.3e}, {:.3e}]", c.iter().cloned().fold(f64::INFINITY, f64::min), c.iter().cloned().fold(0.0, f64::max)));
    }
    AuditOutcome::new("sigma-bounds", passed, detail.join("; "))
}

/// Checks the marked set is the shortest sorted prefix reaching `θ`.
pub fn marking_is_minimal(eta_sq: &[f64], theta: f64) -> bool {
    let marked = dorfler_mark(eta_sq, theta);
    let total: f64 = eta_sq.iter().sum();
    if total <= 0.0 {
        return marked.is_empty();
    }
    let sum: f64 = marked.indices().iter().map(|&t| eta_sq[t]).sum();
    let smallest = marked.indices().iter().map(|&t| eta_sq[t]).fold(f64::INFINITY, f64::min);
    let unmarked_max = (0..eta_sq.len())
        .filter(|t| marked.indices().binary_search(t).is_err())
        .map(|t| eta_sq[t])
        .fold(0.0, f64::max);
    let covers = sum >= theta * total || theta >= 1.0;
    let shortest = theta >= 1.0 || sum - smallest < theta * total;
    covers && shortest && unmarked_max <= smallest
}

fn marking_minimality(problem: &dyn DarcyProblem, mesh: &Mesh) -> AuditOutcome {
    let sol = match solve_mfmfe(mesh, problem, &SolveOptions::default()) {
        Ok(s) => s,
        Err(e) => return AuditOutcome::new("marking-minimality", false, e.to_string()),
    };
    let eta = compute_report(mesh, &sol.u, problem, &EstimatorOptions::default()).indicators_sq();
    let thetas = [0.1, 0.3, 0.5, 0.8, 1.0];
    let bad: Vec<f64> = thetas.iter().cloned().filter(|&th| !marking_is_minimal(&eta, th)).collect();
    AuditOutcome::new(
        "marking-minimality",
        bad.is_empty(),
        if bad.is_empty() {
            format!("theta in {thetas:?}")
        } else {
            format!("not minimal for theta {bad:?}")
        },
    )
}

/// Runs every audit with the given vertex rule (the production rule unless a
/// mutation test substitutes one).
pub fn run_audits_with(vertex_rule: &QuadRule) -> Vec<AuditOutcome> {
    let ex71 = LShapeCorner::new(0.4);
    let ex72 = Checkerboard::default();
    let fixture = SmoothFixture;
    let m71 = refined(&ex71, 3);
    let m72 = refined(&ex72, 3);
    let mfix = refined(&fixture, 3);
    vec![
        mesh_conformity(&[("example71", &m71), ("example72", &m72), ("fixture", &mfix)]),
        system_structure(&[(&ex71, &m71), (&ex72, &m72), (&fixture, &mfix)]),
        divergence_identity(&fixture, &mfix),
        piola_flux(&m72),
        sigma_exactness(vertex_rule, &[(&ex71, &m71), (&fixture, &mfix)]),
        sigma_bounds(),
        postprocess_continuity(&[(&ex71, &m71), (&ex72, &m72)]),
        marking_minimality(&ex71, &m71),
    ]
}

pub fn run_audits() -> Vec<AuditOutcome> {
    run_audits_with(QuadRule::vertex())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_audits_pass() {
        for a in run_audits() {
            assert!(a.passed, "{}: {}", a.id, a.detail);
        }
    }

    #[test]
    fn perturbed_vertex_weight_fails_exactness() {
        let mut rule = QuadRule::vertex().clone();
        rule.weights[0] += 1e-3;
        let outcomes = run_audits_with(&rule);
        let failed: Vec<_> = outcomes.iter().filter(|a| !a.passed).map(|a| a.id).collect();
        assert_eq!(failed, ["sigma-exactness"]);
    }

    #[test]
    fn minimality_of_small_examples() {
        assert!(marking_is_minimal(&[9.0, 4.0, 1.0], 0.5));
        assert!(marking_is_minimal(&[0.0, 0.0], 0.5));
    }
}
