//! Assembly of the mixed system and its solution.
//!
//! Unknowns are ordered as free velocity DOFs `U` and element pressures `P`:
//!
//! ```text
//! [ A  Bᵀ ] [U]   [G]        a_ij = (K⁻¹v_j, v_i)_Q
//! [-B  0  ] [P] = [F]        b_lj = −(∇·v_j, w_l),  G_i = −<g, v_i·n>_Γ_D,  F_l = (f, w_l)
//! ```
//!
//! With the vertex rule `A` is block diagonal by owner vertex, so `U` is
//! eliminated blockwise and `S P = F + B A⁻¹ G` with `S = B A⁻¹ Bᵀ` SPD.

pub mod sparse;

use std::path::Path;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::{Col, Side};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix2, Point2};
use rayon::prelude::*;
use thiserror::Error;

pub use sparse::CsrMatrix;

use crate::benchmarks::DarcyProblem;
use crate::fem::{local_bdm1, local_rt0, DofMap, PressureField, SpaceKind, VelocityField};
use crate::mesh::{BoundaryTag, Mesh};
use crate::quadrature::{local_matrix, LineRule, QuadRule, QuadratureError, VertexValues};

/// Off-block entries of `A` above this multiple of `max |a_ij|` are rejected.
pub const BLOCK_TOL: f64 = 1e-13;
/// Saddle-point residuals above this are reported as failures.
pub const RESIDUAL_FAIL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("velocity block of vertex {vertex} is not positive definite")]
    BlockNotSpd { vertex: usize },
    #[error("velocity matrix is not block diagonal by vertex (off-block ratio {ratio:e})")]
    NotBlockDiagonal { ratio: f64 },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("conjugate gradients stopped after {iterations} iterations at relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("saddle-point residual {residual:e} exceeds {RESIDUAL_FAIL:e}")]
    Residual { residual: f64 },
}

/// Assembled mixed system in free velocity numbering.
#[derive(Debug, Clone)]
pub struct MfmfeSystem {
    pub velocity_dofs: DofMap,
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub g: Vec<f64>,
    pub f: Vec<f64>,
    /// Free velocity DOFs grouped by owner vertex (BDM1 only).
    pub vertex_blocks: Vec<VertexBlock>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexBlock {
    pub vertex: usize,
    pub dofs: Vec<usize>,
}

impl MfmfeSystem {
    pub fn n_velocity(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_pressure(&self) -> usize {
        self.b.nrows()
    }

    /// Writes `A.mtx`, `B.mtx` and, when `A` is block diagonal, `S.mtx`.
    pub fn write_matrix_market(&self, dir: &Path) -> Result<(), Box<dyn std::error::Error>> {
        std::fs::create_dir_all(dir)?;
        self.a.write_matrix_market(std::fs::File::create(dir.join("A.mtx"))?)?;
        self.b.write_matrix_market(std::fs::File::create(dir.join("B.mtx"))?)?;
        let blocks = BlockInverse::new(self)?;
        blocks
            .schur(self)
            .write_matrix_market(std::fs::File::create(dir.join("S.mtx"))?)?;
        Ok(())
    }

    /// `(‖AU + BᵀP − G‖² + ‖BU + F‖²)^½ / ‖(G, F)‖` (absolute if the data vanish).
    pub fn relative_residual(&self, u: &[f64], p: &[f64]) -> f64 {
        let au = self.a.matvec(u);
        let btp = self.b.matvec_transpose(p);
        let bu = self.b.matvec(u);
        let r1: f64 = (0..u.len()).map(|i| (au[i] + btp[i] - self.g[i]).powi(2)).sum();
        let r2: f64 = (0..p.len()).map(|l| (bu[l] + self.f[l]).powi(2)).sum();
        let scale = (norm_sq(&self.g) + norm_sq(&self.f)).sqrt();
        let r = (r1 + r2).sqrt();
        if scale > 0.0 {
            r / scale
        } else {
            r
        }
    }
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

struct LocalContribution {
    a: Vec<(usize, usize, f64)>,
    b: Vec<(usize, usize, f64)>,
    f: f64,
}

/// Assembles the mixed system for `kind ∈ {Bdm1, Rt0}` with the given pairing
/// rule; `perm(t, x)` is the permeability used in element `t`.
pub fn assemble_general(
    mesh: &Mesh,
    problem: &dyn DarcyProblem,
    kind: SpaceKind,
    rule: &QuadRule,
    perm: &(dyn Fn(usize, Point2<f64>) -> Matrix2<f64> + Sync),
) -> Result<MfmfeSystem, SolverError> {
    let dofs = DofMap::new(mesh, kind);
    let source_rule = QuadRule::gauss7();
    let locals: Vec<LocalContribution> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let geom = mesh.geometry(t);
            let hint = geom.centroid();
            let (reference, divergence, full): (Vec<VertexValues>, Vec<f64>, Vec<usize>) = match kind {
                SpaceKind::Bdm1 => {
                    let l = local_bdm1(mesh, t);
                    (l.reference.to_vec(), l.divergence.to_vec(), l.dofs.to_vec())
                }
                SpaceKind::Rt0 => {
                    let l = local_rt0(mesh, t);
                    (l.reference.to_vec(), l.divergence.to_vec(), l.dofs.to_vec())
                }
                SpaceKind::P0 => panic!("P0 is not a velocity space"),
            };
            let m = local_matrix(rule, t, &geom, |x| perm(t, x), &reference)?;
            let free: Vec<Option<usize>> = full.iter().map(|&d| dofs.free_index(d)).collect();
            let mut a = Vec::with_capacity(full.len() * full.len());
            let mut b = Vec::with_capacity(full.len());
            for i in 0..full.len() {
                let Some(fi) = free[i] else { continue };
                b.push((t, fi, -divergence[i] * geom.area));
                for j in 0..full.len() {
                    if let Some(fj) = free[j] {
                        a.push((fi, fj, m[i][j]));
                    }
                }
            }
            let f = source_rule.integrate(&geom, |x| problem.source(x, hint));
            Ok(LocalContribution { a, b, f })
        })
        .collect::<Result<_, QuadratureError>>()?;

    let n_u = dofs.n_free();
    let n_p = mesh.n_elements();
    let mut a_trip = Vec::new();
    let mut b_trip = Vec::new();
    let mut f = Vec::with_capacity(n_p);
    for l in locals {
        a_trip.extend(l.a);
        b_trip.extend(l.b);
        f.push(l.f);
    }

    let mut g = vec![0.0; n_u];
    let edge_rule = LineRule::edge3();
    for e in 0..mesh.n_edges() {
        if mesh.boundary_tag(e) != Some(BoundaryTag::Dirichlet) {
            continue;
        }
        let [va, vb] = mesh.edge(e);
        let hint = mesh.centroid(mesh.adjacency(e).first);
        let (pa, pb) = (mesh.vertex(va), mesh.vertex(vb));
        match kind {
            SpaceKind::Bdm1 => {
                for k in 0..2 {
                    let weight = |s: f64| if k == 0 { 1.0 - s } else { s };
                    let val = edge_rule.integrate(pa, pb, |x, s| problem.dirichlet(x, hint).value * weight(s));
                    if let Some(i) = dofs.free_index(2 * e + k) {
                        g[i] -= val;
                    }
                }
            }
            SpaceKind::Rt0 => {
                let val = edge_rule.integrate(pa, pb, |x, _| problem.dirichlet(x, hint).value);
                if let Some(i) = dofs.free_index(e) {
                    g[i] -= val;
                }
            }
            SpaceKind::P0 => unreachable!(),
        }
    }

    let vertex_blocks = if kind == SpaceKind::Bdm1 {
        let mut by_vertex: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_vertices()];
        for i in 0..n_u {
            by_vertex[dofs.owner_vertex(dofs.full_index(i))].push(i);
        }
        by_vertex
            .into_iter()
            .enumerate()
            .filter(|(_, d)| !d.is_empty())
            .map(|(vertex, dofs)| VertexBlock { vertex, dofs })
            .collect()
    } else {
        Vec::new()
    };

    Ok(MfmfeSystem {
        a: CsrMatrix::from_triplets(n_u, n_u, a_trip),
        b: CsrMatrix::from_triplets(n_p, n_u, b_trip),
        g,
        f,
        velocity_dofs: dofs,
        vertex_blocks,
    })
}

fn problem_perm<'a>(mesh: &Mesh, problem: &'a dyn DarcyProblem) -> impl Fn(usize, Point2<f64>) -> Matrix2<f64> + Sync + 'a {
    let hints: Vec<Point2<f64>> = (0..mesh.n_elements()).map(|t| mesh.centroid(t)).collect();
    move |t, x| problem.permeability(x, hints[t])
}

/// BDM1/P0 system with an arbitrary velocity pairing rule.
pub fn assemble_with_rule(mesh: &Mesh, problem: &dyn DarcyProblem, rule: &QuadRule) -> Result<MfmfeSystem, SolverError> {
    let perm = problem_perm(mesh, problem);
    assemble_general(mesh, problem, SpaceKind::Bdm1, rule, &perm)
}

/// The MFMFE system (vertex quadrature for the velocity mass matrix).
pub fn assemble(mesh: &Mesh, problem: &dyn DarcyProblem) -> Result<MfmfeSystem, SolverError> {
    assemble_with_rule(mesh, problem, QuadRule::vertex())
}

/// Blockwise inverse of a vertex-block-diagonal `A`.
pub struct BlockInverse {
    blocks: Vec<(Vec<usize>, Cholesky<f64, Dyn>)>,
}

impl BlockInverse {
    /// Verifies block diagonality, then factors every block.
    pub fn new(system: &MfmfeSystem) -> Result<Self, SolverError> {
        let ratio = off_block_ratio(system);
        if ratio > BLOCK_TOL {
            return Err(SolverError::NotBlockDiagonal { ratio });
        }
        let blocks = system
            .vertex_blocks
            .par_iter()
            .map(|blk| {
                let m = dense_block(&system.a, &blk.dofs);
                Cholesky::new(m)
                    .map(|c| (blk.dofs.clone(), c))
                    .ok_or(SolverError::BlockNotSpd { vertex: blk.vertex })
            })
            .collect::<Result<_, _>>()?;
        Ok(BlockInverse { blocks })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (dofs, chol) in &self.blocks {
            let rhs = DVector::from_iterator(dofs.len(), dofs.iter().map(|&d| x[d]));
            let sol = chol.solve(&rhs);
            for (k, &d) in dofs.iter().enumerate() {
                y[d] = sol[k];
            }
        }
        y
    }

    /// `S = B A⁻¹ Bᵀ`, assembled vertex by vertex.
    pub fn schur(&self, system: &MfmfeSystem) -> CsrMatrix {
        let bt = system.b.transpose();
        let triplets: Vec<(usize, usize, f64)> = self
            .blocks
            .par_iter()
            .flat_map_iter(|(dofs, chol)| {
                let mut elems: Vec<usize> = dofs.iter().flat_map(|&d| bt.row(d).map(|(t, _)| t)).collect();
                elems.sort_unstable();
                elems.dedup();
                // local Bᵀ restricted to this block: |dofs| × |elems|
                let mut btv = DMatrix::zeros(dofs.len(), elems.len());
                for (k, &d) in dofs.iter().enumerate() {
                    for (t, v) in bt.row(d) {
                        let c = elems.binary_search(&t).unwrap();
                        btv[(k, c)] = v;
                    }
                }
                let x = chol.solve(&btv);
                let s = btv.transpose() * x;
                let mut out = Vec::with_capacity(elems.len() * elems.len());
                for (i, &ti) in elems.iter().enumerate() {
                    for (j, &tj) in elems.iter().enumerate() {
                        out.push((ti, tj, s[(i, j)]));
                    }
                }
                out
            })
            .collect();
        let n = system.n_pressure();
        CsrMatrix::from_triplets(n, n, triplets)
    }
}

fn dense_block(a: &CsrMatrix, dofs: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(dofs.len(), dofs.len(), |i, j| a.get(dofs[i], dofs[j]))
}

/// `max |a_ij|` over DOF pairs with different owner vertices, relative to `max |a_ij|`.
pub fn off_block_ratio(system: &MfmfeSystem) -> f64 {
    let mut owner = vec![usize::MAX; system.n_velocity()];
    for blk in &system.vertex_blocks {
        for &d in &blk.dofs {
            owner[d] = blk.vertex;
        }
    }
    let max = system.a.max_abs();
    if max == 0.0 {
        return 0.0;
    }
    system
        .a
        .triplets()
        .filter(|&(i, j, _)| owner[i] != owner[j])
        .map(|(_, _, v)| v.abs())
        .fold(0.0, f64::max)
        / max
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SchurMethod {
    /// Sparse Cholesky up to `cholesky_limit` elements, PCG above.
    #[default]
    Auto,
    Cholesky,
    Pcg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub schur: SchurMethod,
    pub cholesky_limit: usize,
    pub pcg_tolerance: f64,
    pub pcg_max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            schur: SchurMethod::Auto,
            cholesky_limit: 2_000_000,
            pcg_tolerance: 1e-12,
            pcg_max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    SchurCholesky,
    SchurPcg,
    SaddleLu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    pub method: SolveMethod,
    /// PCG iterations (0 for direct solves).
    pub iterations: usize,
    pub relative_residual: f64,
    pub n_velocity: usize,
    pub n_pressure: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSolution {
    pub u: VelocityField,
    pub p: PressureField,
    pub diagnostics: SolveDiagnostics,
}

fn cholesky_solve(s: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
    let llt: Llt<usize, f64> = s
        .to_faer()
        .sp_cholesky(Side::Lower)
        .map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
    let x = llt.solve(Col::<f64>::from_fn(rhs.len(), |i| rhs[i]));
    Ok((0..rhs.len()).map(|i| x[i]).collect())
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
pub fn pcg(s: &CsrMatrix, rhs: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize), SolverError> {
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let bnorm = norm_sq(rhs).sqrt();
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let dinv: Vec<f64> = s.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let sp = s.matvec(&p);
        let alpha = rz / dot(&p, &sp);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * sp[i];
        }
        let res = norm_sq(&r).sqrt() / bnorm;
        if res <= tol {
            return Ok((x, it));
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = norm_sq(&r).sqrt() / bnorm;
    Err(SolverError::NotConverged {
        iterations: max_iter,
        residual: res,
    })
}

fn finish(
    system: &MfmfeSystem,
    u: Vec<f64>,
    p: Vec<f64>,
    method: SolveMethod,
    iterations: usize,
) -> Result<DiscreteSolution, SolverError> {
    let relative_residual = system.relative_residual(&u, &p);
    if !(relative_residual <= RESIDUAL_FAIL) {
        return Err(SolverError::Residual {
            residual: relative_residual,
        });
    }
    let kind = system.velocity_dofs.kind;
    Ok(DiscreteSolution {
        u: VelocityField {
            kind,
            coeffs: system.velocity_dofs.expand(&u),
        },
        p: PressureField(p),
        diagnostics: SolveDiagnostics {
            method,
            iterations,
            relative_residual,
            n_velocity: system.n_velocity(),
            n_pressure: system.n_pressure(),
        },
    })
}

/// Eliminates the velocity vertex by vertex and solves the pressure system.
pub fn eliminate_and_solve(system: &MfmfeSystem, options: &SolveOptions) -> Result<DiscreteSolution, SolverError> {
    let inv = BlockInverse::new(system)?;
    let s = inv.schur(system);
    let ainv_g = inv.apply(&system.g);
    let b_ainv_g = system.b.matvec(&ainv_g);
    let rhs: Vec<f64> = system.f.iter().zip(&b_ainv_g).map(|(f, v)| f + v).collect();
    let use_cholesky = match options.schur {
        SchurMethod::Auto => system.n_pressure() <= options.cholesky_limit,
        SchurMethod::Cholesky => true,
        SchurMethod::Pcg => false,
    };
    let (p, method, iterations) = if use_cholesky {
        (cholesky_solve(&s, &rhs)?, SolveMethod::SchurCholesky, 0)
    } else {
        let (p, it) = pcg(&s, &rhs, options.pcg_tolerance, options.pcg_max_iterations)?;
        (p, SolveMethod::SchurPcg, it)
    };
    let btp = system.b.matvec_transpose(&p);
    let rhs_u: Vec<f64> = system.g.iter().zip(&btp).map(|(g, v)| g - v).collect();
    let u = inv.apply(&rhs_u);
    finish(system, u, p, method, iterations)
}

/// Solves the full saddle-point system `[A Bᵀ; B 0] [U; P] = [G; −F]` by sparse LU.
pub fn solve_saddle_direct(system: &MfmfeSystem) -> Result<DiscreteSolution, SolverError> {
    let n_u = system.n_velocity();
    let n_p = system.n_pressure();
    // Symmetric Jacobi scaling of the velocity block: A is O(h²) and B is O(h)
    // per row, so unscaled LU loses accuracy on strongly graded meshes.
    let s: Vec<f64> = system
        .a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 1.0 })
        .collect();
    let mut trip: Vec<(usize, usize, f64)> = system.a.triplets().map(|(i, j, v)| (i, j, s[i] * v * s[j])).collect();
    for (l, j, v) in system.b.triplets() {
        trip.push((n_u + l, j, v * s[j]));
        trip.push((j, n_u + l, v * s[j]));
    }
    let k = CsrMatrix::from_triplets(n_u + n_p, n_u + n_p, trip);
    let rhs: Vec<f64> = system
        .g
        .iter()
        .zip(&s)
        .map(|(g, s)| g * s)
        .chain(system.f.iter().map(|f| -f))
        .collect();
    let lu = k
        .to_faer()
        .sp_lu()
        .map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
    let x = lu.solve(Col::<f64>::from_fn(rhs.len(), |i| rhs[i]));
    let u = (0..n_u).map(|i| x[i] * s[i]).collect();
    let p = (0..n_p).map(|l| x[n_u + l]).collect();
    finish(system, u, p, SolveMethod::SaddleLu, 0)
}

/// MFMFE assembly followed by vertex elimination.
pub fn solve_mfmfe(mesh: &Mesh, problem: &dyn DarcyProblem, options: &SolveOptions) -> Result<DiscreteSolution, SolverError> {
    eliminate_and_solve(&assemble(mesh, problem)?, options)
}

/// BDM1/P0 mixed method with the velocity mass matrix integrated by the
/// degree-5 rule instead of the vertex rule.
pub fn solve_mixed_exact(mesh: &Mesh, problem: &dyn DarcyProblem) -> Result<DiscreteSolution, SolverError> {
    solve_saddle_direct(&assemble_with_rule(mesh, problem, QuadRule::gauss7())?)
}

/// Quantified structural checks of an assembled MFMFE system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemAudit {
    /// `max |a_ij − a_ji| / max |a_ij|`
    pub a_asymmetry: f64,
    pub off_block_ratio: f64,
    pub blocks_spd: bool,
    /// Smallest eigenvalue over all vertex blocks.
    pub min_block_eigenvalue: f64,
    pub schur_asymmetry: f64,
    /// Smallest Ritz value of `S` from inverse iteration.
    pub schur_min_eigenvalue: f64,
}

impl SystemAudit {
    pub fn passes(&self) -> bool {
        self.a_asymmetry <= 1e-13
            && self.off_block_ratio <= BLOCK_TOL
            && self.blocks_spd
            && self.min_block_eigenvalue > 0.0
            && self.schur_asymmetry <= 1e-12
            && self.schur_min_eigenvalue > 0.0
    }
}

pub fn audit_system(system: &MfmfeSystem) -> SystemAudit {
    let amax = system.a.max_abs().max(f64::MIN_POSITIVE);
    let min_block_eigenvalue = system
        .vertex_blocks
        .par_iter()
        .map(|blk| dense_block(&system.a, &blk.dofs).symmetric_eigenvalues().min())
        .reduce(|| f64::INFINITY, f64::min);
    let mut audit = SystemAudit {
        a_asymmetry: system.a.asymmetry() / amax,
        off_block_ratio: off_block_ratio(system),
        blocks_spd: false,
        min_block_eigenvalue,
        schur_asymmetry: f64::INFINITY,
        schur_min_eigenvalue: f64::NAN,
    };
    let Ok(inv) = BlockInverse::new(system) else {
        return audit;
    };
    audit.blocks_spd = true;
    let s = inv.schur(system);
    audit.schur_asymmetry = s.asymmetry() / s.max_abs().max(f64::MIN_POSITIVE);
    audit.schur_min_eigenvalue = smallest_eigenvalue(&s).unwrap_or(f64::NAN);
    audit
}

/// Inverse iteration with a sparse Cholesky factor; `None` if `s` is not SPD.
fn smallest_eigenvalue(s: &CsrMatrix) -> Option<f64> {
    let n = s.nrows();
    let llt = s.to_faer().sp_cholesky(Side::Lower).ok()?;
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
    for _ in 0..50 {
        let nx = norm_sq(&x).sqrt();
        x.iter_mut().for_each(|v| *v /= nx);
        let y = llt.solve(Col::<f64>::from_fn(n, |i| x[i]));
        x = (0..n).map(|i| y[i]).collect();
    }
    let nx = norm_sq(&x).sqrt();
    x.iter_mut().for_each(|v| *v /= nx);
    let sx = s.matvec(&x);
    Some(dot(&x, &sx))
}
