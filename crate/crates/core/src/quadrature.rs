//! Quadrature rules and the velocity mass pairings.
//!
//! Pairings are evaluated on the reference triangle with the mapped tensor
//! `𝒦 = J_T DF_T⁻¹ K (DF_T⁻¹)ᵀ`, so for Piola-mapped fields `q = DF q̂ / J`
//! the reference integral `∫ 𝒦⁻¹ q̂·v̂` equals the physical `∫_T K⁻¹ q·v`.

use std::sync::OnceLock;

use nalgebra::{Matrix2, Point2, Vector2};
use thiserror::Error;

use crate::mesh::ElementGeometry;

/// Reference P1 vector field given by its values at the three reference vertices.
pub type VertexValues = [Vector2<f64>; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("mapped permeability is singular in element {element} at quadrature point {point} (det {det:e})")]
    SingularTensor { element: usize, point: usize, det: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    /// Nodes at the reference vertices, weight `|T̂|/3`.
    Vertex,
    /// Seven-point, degree-5 triangle rule.
    TriangleGauss7,
    /// `k`-point Gauss–Legendre on the unit interval.
    EdgeGauss(usize),
}

/// Triangle rule on the reference element; weights sum to `|T̂| = 1/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub kind: RuleKind,
    pub points: Vec<Point2<f64>>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn vertex() -> &'static QuadRule {
        static RULE: OnceLock<QuadRule> = OnceLock::new();
        RULE.get_or_init(|| QuadRule {
            kind: RuleKind::Vertex,
            points: vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
            weights: vec![1.0 / 6.0; 3],
        })
    }

    pub fn gauss7() -> &'static QuadRule {
        static RULE: OnceLock<QuadRule> = OnceLock::new();
        RULE.get_or_init(|| {
            let s15 = 15f64.sqrt();
            let a1 = (6.0 - s15) / 21.0;
            let a2 = (6.0 + s15) / 21.0;
            let w1 = (155.0 - s15) / 1200.0;
            let w2 = (155.0 + s15) / 1200.0;
            let mut points = vec![Point2::new(1.0 / 3.0, 1.0 / 3.0)];
            let mut weights = vec![9.0 / 40.0];
            for (a, w) in [(a1, w1), (a2, w2)] {
                let b = 1.0 - 2.0 * a;
                points.extend([Point2::new(a, a), Point2::new(b, a), Point2::new(a, b)]);
                weights.extend([w; 3]);
            }
            QuadRule {
                kind: RuleKind::TriangleGauss7,
                points,
                weights: weights.into_iter().map(|w| 0.5 * w).collect(),
            }
        })
    }

    /// `∫_T f` for a physical integrand.
    pub fn integrate(&self, geom: &ElementGeometry, f: impl Fn(Point2<f64>) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(geom.map(*p)))
            .sum::<f64>()
            * geom.det
    }
}

/// Gauss–Legendre rule on `[0, 1]`; weights sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LineRule {
    pub kind: RuleKind,
    pub params: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LineRule {
    /// `k`-point rule, exact for polynomials of degree `2k - 1`. Panics unless `k ∈ 2..=5`.
    pub fn gauss(k: usize) -> LineRule {
        let (nodes, weights): (Vec<f64>, Vec<f64>) = match k {
            2 => {
                let x = 1.0 / 3f64.sqrt();
                (vec![-x, x], vec![1.0, 1.0])
            }
            3 => {
                let x = (0.6f64).sqrt();
                (vec![-x, 0.0, x], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
            }
            4 => {
                let r = (6.0f64 / 5.0).sqrt();
                let x1 = (3.0 / 7.0 - 2.0 / 7.0 * r).sqrt();
                let x2 = (3.0 / 7.0 + 2.0 / 7.0 * r).sqrt();
                let w1 = (18.0 + 30f64.sqrt()) / 36.0;
                let w2 = (18.0 - 30f64.sqrt()) / 36.0;
                (vec![-x2, -x1, x1, x2], vec![w2, w1, w1, w2])
            }
            5 => {
                let r = (10.0f64 / 7.0).sqrt();
                let x1 = (5.0 - 2.0 * r).sqrt() / 3.0;
                let x2 = (5.0 + 2.0 * r).sqrt() / 3.0;
                let w1 = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
                let w2 = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
                (vec![-x2, -x1, 0.0, x1, x2], vec![w2, w1, 128.0 / 225.0, w1, w2])
            }
            _ => panic!("edge Gauss rule with {k} points is not available"),
        };
        LineRule {
            kind: RuleKind::EdgeGauss(k),
            params: nodes.iter().map(|x| 0.5 * (1.0 + x)).collect(),
            weights: weights.iter().map(|w| 0.5 * w).collect(),
        }
    }

    /// The default three-point rule used for edge integrals.
    pub fn edge3() -> &'static LineRule {
        static RULE: OnceLock<LineRule> = OnceLock::new();
        RULE.get_or_init(|| LineRule::gauss(3))
    }

    /// `∫_a^b f ds` along the straight segment; `f` receives the point and the
    /// arclength fraction `t ∈ [0, 1]`.
    pub fn integrate(&self, a: Point2<f64>, b: Point2<f64>, f: impl Fn(Point2<f64>, f64) -> f64) -> f64 {
        let len = (b - a).norm();
        self.params
            .iter()
            .zip(&self.weights)
            .map(|(&t, w)| w * f(a + (b - a) * t, t))
            .sum::<f64>()
            * len
    }
}

/// Evaluates a reference P1 field at a reference point.
pub fn eval_reference(values: &VertexValues, xhat: Point2<f64>) -> Vector2<f64> {
    values[0] * (1.0 - xhat.x - xhat.y) + values[1] * xhat.x + values[2] * xhat.y
}

/// `𝒦⁻¹` for permeability `k` at one point, inverted by the adjugate formula.
pub fn mapped_inverse_tensor(geom: &ElementGeometry, k: &Matrix2<f64>) -> Option<Matrix2<f64>> {
    let jinv = geom.jacobian.try_inverse()?;
    let mapped = jinv * k * jinv.transpose() * geom.det;
    let det = mapped.determinant();
    if !(det > 0.0) || !det.is_finite() {
        return None;
    }
    let adj = Matrix2::new(mapped[(1, 1)], -mapped[(0, 1)], -mapped[(1, 0)], mapped[(0, 0)]);
    Some(adj / det)
}

/// `𝒦⁻¹` at every node of `rule`.
pub fn mapped_inverse_at(
    rule: &QuadRule,
    element: usize,
    geom: &ElementGeometry,
    perm: impl Fn(Point2<f64>) -> Matrix2<f64>,
) -> Result<Vec<Matrix2<f64>>, QuadratureError> {
    rule.points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let k = perm(geom.map(*p));
            mapped_inverse_tensor(geom, &k).ok_or_else(|| QuadratureError::SingularTensor {
                element,
                point: i,
                det: k.determinant(),
            })
        })
        .collect()
}

/// `Σ_i w_i 𝒦⁻¹(r̂_i) q̂(r̂_i)·v̂(r̂_i)` with the given rule.
pub fn pairing(
    rule: &QuadRule,
    element: usize,
    geom: &ElementGeometry,
    perm: impl Fn(Point2<f64>) -> Matrix2<f64>,
    q: &VertexValues,
    v: &VertexValues,
) -> Result<f64, QuadratureError> {
    let kinv = mapped_inverse_at(rule, element, geom, perm)?;
    Ok(rule
        .points
        .iter()
        .zip(&rule.weights)
        .zip(&kinv)
        .map(|((p, w), m)| w * (m * eval_reference(q, *p)).dot(&eval_reference(v, *p)))
        .sum())
}

/// `(K⁻¹q, v)_{Q,T}`, the vertex quadrature pairing.
pub fn vertex_quadrature_pairing(
    element: usize,
    geom: &ElementGeometry,
    perm: impl Fn(Point2<f64>) -> Matrix2<f64>,
    q: &VertexValues,
    v: &VertexValues,
) -> Result<f64, QuadratureError> {
    pairing(QuadRule::vertex(), element, geom, perm, q, v)
}

/// `(K⁻¹q, v)_T` with the degree-5 rule.
pub fn exact_pairing(
    element: usize,
    geom: &ElementGeometry,
    perm: impl Fn(Point2<f64>) -> Matrix2<f64>,
    q: &VertexValues,
    v: &VertexValues,
) -> Result<f64, QuadratureError> {
    pairing(QuadRule::gauss7(), element, geom, perm, q, v)
}

/// `σ_T(K⁻¹q, v) = (K⁻¹q, v)_T − (K⁻¹q, v)_{Q,T}`.
pub fn sigma_t(
    element: usize,
    geom: &ElementGeometry,
    perm: impl Fn(Point2<f64>) -> Matrix2<f64> + Copy,
    q: &VertexValues,
    v: &VertexValues,
) -> Result<f64, QuadratureError> {
    Ok(exact_pairing(element, geom, perm, q, v)? - vertex_quadrature_pairing(element, geom, perm, q, v)?)
}

/// Local matrix `M[i][j] = Σ w 𝒦⁻¹ basis_j · basis_i` for reference P1 fields.
pub fn local_matrix(
    rule: &QuadRule,
    element: usize,
    geom: &ElementGeometry,
    perm: impl Fn(Point2<f64>) -> Matrix2<f64>,
    basis: &[VertexValues],
) -> Result<Vec<Vec<f64>>, QuadratureError> {
    let kinv = mapped_inverse_at(rule, element, geom, perm)?;
    let n = basis.len();
    let mut m = vec![vec![0.0; n]; n];
    for ((p, w), km) in rule.points.iter().zip(&rule.weights).zip(&kinv) {
        let vals: Vec<Vector2<f64>> = basis.iter().map(|b| eval_reference(b, *p)).collect();
        let kv: Vec<Vector2<f64>> = vals.iter().map(|v| km * v).collect();
        for i in 0..n {
            for j in 0..n {
                m[i][j] += w * kv[j].dot(&vals[i]);
            }
        }
    }
    Ok(m)
}
