//! Assembly and solution of the discrete mixed problem
//!
//! ```text
//! (a p, q) − (q, b u) + (div q, u) = ⟨q·n, g⟩   for q ∈ RT_r
//! −(div p, v) + (c u, v)           = (f, v)     for v ∈ P_r (broken)
//! ```
//!
//! The second equation is multiplied by −1, so the block matrix reads
//! `[[A, Bᵀ − D], [B, −C]]` and is symmetric whenever `b = 0`.
//!
//! Element blocks are kept separately. The default solver hybridizes them:
//! normal continuity across interior edges is enforced by one multiplier per
//! edge Gauss point, each element is condensed locally, and the resulting
//! symmetric positive semidefinite multiplier system is factored with a sparse
//! Cholesky (falling back to LU). [`SolveMethod::Direct`] instead factors the
//! assembled global matrix with a sparse LU.

use std::fmt;
use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::SolverError;
use crate::mesh::Mesh;
use crate::quadrature::{triangle_rule, unit_gauss, MAX_TRIANGLE_DEGREE};
use crate::spaces::{
    bary_monomial, divergence_moments, dof_rule, edge_test_function, lattice, poly_dim, rt_dim,
    DofMap, LocalRtBasis, PiecewiseScalar, RtField,
};
use crate::Point;

/// Relative residual accepted for the full system.
pub const RESIDUAL_TOL: f64 = 1e-9;

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point) -> Point + Send + Sync>;

/// Known solution of a manufactured problem.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: ScalarFn,
    pub p: VectorFn,
    pub div_p: ScalarFn,
}

/// Coefficients and data of `a p − b u − ∇u = 0`, `−div p + c u = f`, `u = g` on ∂Ω.
#[derive(Clone)]
pub struct ProblemSpec {
    pub a: ScalarFn,
    pub b: Option<VectorFn>,
    pub c: Option<ScalarFn>,
    pub f: ScalarFn,
    pub g: ScalarFn,
    pub exact: Option<ExactSolution>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("b", &self.b.is_some())
            .field("c", &self.c.is_some())
            .field("exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// `−Δu = f` with `u = g` on the boundary.
    pub fn poisson(
        f: impl Fn(Point) -> f64 + Send + Sync + 'static,
        g: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ProblemSpec {
            a: Arc::new(|_| 1.0),
            b: None,
            c: None,
            f: Arc::new(f),
            g: Arc::new(g),
            exact: None,
        }
    }

    pub fn with_a(mut self, a: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        self.a = Arc::new(a);
        self
    }

    pub fn with_b(mut self, b: impl Fn(Point) -> Point + Send + Sync + 'static) -> Self {
        self.b = Some(Arc::new(b));
        self
    }

    pub fn with_c(mut self, c: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        self.c = Some(Arc::new(c));
        self
    }

    pub fn with_exact(
        mut self,
        u: impl Fn(Point) -> f64 + Send + Sync + 'static,
        p: impl Fn(Point) -> Point + Send + Sync + 'static,
        div_p: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.exact = Some(ExactSolution {
            u: Arc::new(u),
            p: Arc::new(p),
            div_p: Arc::new(div_p),
        });
        self
    }
}

/// Default quadrature exactness for assembly.
pub fn assembly_degree(r: usize) -> usize {
    (2 * (r + 1) + 4).min(MAX_TRIANGLE_DEGREE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMethod {
    /// Static condensation onto edge multipliers.
    #[default]
    Hybridized,
    /// Sparse LU of the full block system.
    Direct,
}

/// Element matrix and load vector in local numbering: RT DOFs first (in the
/// local order of [`LocalRtBasis`], outward normals), then the scalar DOFs.
#[derive(Debug, Clone)]
pub struct ElementBlock {
    pub matrix: DMatrix<f64>,
    pub load: DVector<f64>,
}

/// The assembled mixed system, stored as element blocks.
#[derive(Debug, Clone)]
pub struct MixedSystem {
    mesh: Arc<Mesh>,
    dofs: DofMap,
    elements: Vec<ElementBlock>,
    symmetric: bool,
}

impl MixedSystem {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.dofs.degree()
    }

    pub fn dof_map(&self) -> &DofMap {
        &self.dofs
    }

    pub fn elements(&self) -> &[ElementBlock] {
        &self.elements
    }

    /// Number of RT unknowns.
    pub fn num_flux(&self) -> usize {
        self.dofs.total()
    }

    /// Number of scalar unknowns.
    pub fn num_scalar(&self) -> usize {
        self.mesh.num_triangles() * poly_dim(self.degree())
    }

    pub fn dim(&self) -> usize {
        self.num_flux() + self.num_scalar()
    }

    /// True when `b = 0`, so the matrix is symmetric.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Global index and sign of every local unknown of `t`.
    pub fn local_to_global(&self, t: usize) -> Vec<(usize, f64)> {
        let nu = poly_dim(self.degree());
        let mut map = self.dofs.local_to_global(&self.mesh, t);
        let base = self.num_flux() + t * nu;
        map.extend((0..nu).map(|j| (base + j, 1.0)));
        map
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (t, el) in self.elements.iter().enumerate() {
            let map = self.local_to_global(t);
            for (i, &(gi, si)) in map.iter().enumerate() {
                for (k, &(gk, sk)) in map.iter().enumerate() {
                    let v = el.matrix[(i, k)];
                    if v != 0.0 {
                        out.push((gi, gk, si * sk * v));
                    }
                }
            }
        }
        out
    }

    pub fn matrix(&self) -> Result<SparseColMat<usize, f64>, SolverError> {
        let trips: Vec<Triplet<usize, usize, f64>> = self
            .triplets()
            .into_iter()
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        SparseColMat::try_new_from_triplets(self.dim(), self.dim(), &trips)
            .map_err(|e| SolverError::Factorization(format!("{e:?}")))
    }

    /// Dense copy of the global matrix; intended for small systems.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn rhs(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.dim()];
        for (t, el) in self.elements.iter().enumerate() {
            for (i, &(g, s)) in self.local_to_global(t).iter().enumerate() {
                b[g] += s * el.load[i];
            }
        }
        b
    }

    /// Matrix-vector product with the global matrix.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        for (t, el) in self.elements.iter().enumerate() {
            let map = self.local_to_global(t);
            let xl = DVector::from_iterator(map.len(), map.iter().map(|&(g, s)| s * x[g]));
            let yl = &el.matrix * xl;
            for (i, &(g, s)) in map.iter().enumerate() {
                y[g] += s * yl[i];
            }
        }
        y
    }

    /// `‖M x − rhs‖ / ‖rhs‖` (absolute when the right-hand side vanishes).
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let b = self.rhs();
        let y = self.apply(x);
        let res = y
            .iter()
            .zip(&b)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nb > 0.0 {
            res / nb
        } else {
            res
        }
    }

    /// Splits a global solution vector into typed fields.
    pub fn unpack(&self, x: &[f64]) -> Result<(RtField, PiecewiseScalar), SolverError> {
        let r = self.degree();
        let p = RtField::new(self.mesh.clone(), r, x[..self.num_flux()].to_vec())?;
        let u = PiecewiseScalar::new(self.mesh.clone(), r, x[self.num_flux()..].to_vec())?;
        Ok((p, u))
    }
}

/// Assembles the mixed system with the default quadrature degree.
pub fn assemble_mixed(
    mesh: &Arc<Mesh>,
    r: usize,
    problem: &ProblemSpec,
) -> Result<MixedSystem, SolverError> {
    assemble_mixed_with_degree(mesh, r, problem, assembly_degree(r))
}

pub fn assemble_mixed_with_degree(
    mesh: &Arc<Mesh>,
    r: usize,
    problem: &ProblemSpec,
    quad_degree: usize,
) -> Result<MixedSystem, SolverError> {
    let dofs = DofMap::new(mesh, r)?;
    let rule = triangle_rule(quad_degree.clamp(1, MAX_TRIANGLE_DEGREE)).expect("degree clamped");
    let edge_quad = unit_gauss(r + 8);
    let dof = dof_rule(r);
    let scalar_basis = lattice(r);
    let nq = rt_dim(r);
    let nu = scalar_basis.len();
    let elements: Result<Vec<ElementBlock>, SolverError> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let g = mesh.geometry(t);
            let basis = LocalRtBasis::new(&g, r).map_err(|e| match e {
                crate::error::SpaceError::Degenerate { condition, .. } => {
                    crate::error::SpaceError::Degenerate { tri: t, condition }
                }
                other => other,
            })?;
            let mut k = DMatrix::<f64>::zeros(nq + nu, nq + nu);
            let mut load = DVector::<f64>::zeros(nq + nu);
            let mut vals = vec![[0.0; 2]; nq];
            let mut divs = vec![0.0; nq];
            let mut v = vec![0.0; nu];
            for (bc, w) in rule.points.iter().zip(&rule.weights) {
                let x = g.point(*bc);
                let wt = w * g.area;
                let a = (problem.a)(x);
                if a <= 0.0 || !a.is_finite() {
                    return Err(SolverError::NonPositiveCoefficient {
                        tri: t,
                        point: x,
                        value: a,
                    });
                }
                basis.eval_into(x, &mut vals, &mut divs);
                for (j, alpha) in scalar_basis.iter().enumerate() {
                    v[j] = bary_monomial(*alpha, *bc);
                }
                let b = problem.b.as_ref().map(|b| b(x));
                let c = problem.c.as_ref().map(|c| c(x));
                let f = (problem.f)(x);
                for i in 0..nq {
                    for l in i..nq {
                        let m = wt * a * (vals[i][0] * vals[l][0] + vals[i][1] * vals[l][1]);
                        k[(i, l)] += m;
                        if l != i {
                            k[(l, i)] += m;
                        }
                    }
                    if let Some(b) = b {
                        for j in 0..nu {
                            k[(i, nq + j)] -= wt * (vals[i][0] * b[0] + vals[i][1] * b[1]) * v[j];
                        }
                    }
                }
                for j in 0..nu {
                    if let Some(c) = c {
                        for l in 0..nu {
                            k[(nq + j, nq + l)] -= wt * c * v[j] * v[l];
                        }
                    }
                    load[nq + j] -= wt * f * v[j];
                }
            }
            let dm = divergence_moments(&g, r);
            for i in 0..nq {
                for j in 0..nu {
                    k[(nq + j, i)] += dm[(j, i)];
                    k[(i, nq + j)] += dm[(j, i)];
                }
            }
            for (kk, &e) in mesh.triangle_edges(t).iter().enumerate() {
                if !mesh.is_boundary_edge(e) {
                    continue;
                }
                let a = g.vertices[(kk + 1) % 3];
                let b = g.vertices[(kk + 2) % 3];
                let len = g.lengths[kk];
                for j in 0..=r {
                    let wj = dof.weights[j];
                    load[kk * (r + 1) + j] += len
                        * wj
                        * edge_quad.integrate(|s| {
                            let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                            (problem.g)(x) * edge_test_function(&dof, j, s)
                        });
                }
            }
            Ok(ElementBlock { matrix: k, load })
        })
        .collect();
    Ok(MixedSystem {
        mesh: mesh.clone(),
        dofs,
        elements: elements?,
        symmetric: problem.b.is_none(),
    })
}

/// Discrete solution together with the achieved relative residual.
#[derive(Debug, Clone)]
pub struct MixedSolution {
    pub p: RtField,
    pub u: PiecewiseScalar,
    pub residual: f64,
}

pub fn solve_mixed(system: &MixedSystem) -> Result<MixedSolution, SolverError> {
    solve_mixed_with(system, SolveMethod::default())
}

pub fn solve_mixed_with(
    system: &MixedSystem,
    method: SolveMethod,
) -> Result<MixedSolution, SolverError> {
    let x = match method {
        SolveMethod::Hybridized => solve_hybridized(system)?,
        SolveMethod::Direct => solve_direct(system)?,
    };
    let residual = system.relative_residual(&x);
    if !(residual <= RESIDUAL_TOL) {
        return Err(SolverError::Residual(residual));
    }
    let (p, u) = system.unpack(&x)?;
    Ok(MixedSolution { p, u, residual })
}

enum Factor {
    Llt(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

impl Factor {
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = faer::Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = match self {
            Factor::Llt(f) => f.solve(&b),
            Factor::Lu(f) => f.solve(&b),
        };
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }
}

/// Steps of iterative refinement after the first solve.
const REFINEMENT_STEPS: usize = 4;

fn matrix_residual(trips: &[Triplet<usize, usize, f64>], x: &[f64], rhs: &[f64]) -> Vec<f64> {
    let mut r = rhs.to_vec();
    for t in trips {
        r[t.row] -= t.val * x[t.col];
    }
    r
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Factors with Cholesky when `spd` (falling back to LU) and returns the
/// factorization with the first solution.
fn factor_sparse(
    n: usize,
    trips: &[Triplet<usize, usize, f64>],
    rhs: &[f64],
    spd: bool,
) -> Result<(Factor, Vec<f64>), SolverError> {
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, trips)
        .map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
    if spd {
        if let Ok(llt) = a.sp_cholesky(Side::Lower) {
            let f = Factor::Llt(llt);
            let x = f.solve(rhs);
            if x.iter().all(|v| v.is_finite()) {
                return Ok((f, x));
            }
        }
    }
    let f = Factor::Lu(
        a.sp_lu()
            .map_err(|e| SolverError::Factorization(format!("{e:?}")))?,
    );
    let x = f.solve(rhs);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::Factorization(
            "non-finite solution (singular matrix)".into(),
        ));
    }
    Ok((f, x))
}

/// Iterative refinement `x ← x + F⁻¹ res(x)` while the residual keeps shrinking.
fn refine(factor: &Factor, mut x: Vec<f64>, residual: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let mut res = residual(&x);
    let mut res_norm = norm(&res);
    for _ in 0..REFINEMENT_STEPS {
        if res_norm == 0.0 {
            break;
        }
        let dx = factor.solve(&res);
        let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let trial_res = residual(&trial);
        let trial_norm = norm(&trial_res);
        if !(trial_norm < res_norm) {
            break;
        }
        let gain = res_norm / trial_norm;
        x = trial;
        res = trial_res;
        res_norm = trial_norm;
        if gain < 2.0 {
            break;
        }
    }
    x
}

fn solve_direct(system: &MixedSystem) -> Result<Vec<f64>, SolverError> {
    let trips: Vec<Triplet<usize, usize, f64>> = system
        .triplets()
        .into_iter()
        .map(|(i, j, v)| Triplet::new(i, j, v))
        .collect();
    let rhs = system.rhs();
    let (factor, x) = factor_sparse(system.dim(), &trips, &rhs, false)?;
    Ok(refine(&factor, x, |x| matrix_residual(&trips, x, &rhs)))
}

struct Condensed {
    /// Global multiplier index of each local multiplier.
    mult: Vec<usize>,
    /// Row and value of the single nonzero in each column of `L_T`.
    lrows: Vec<(usize, f64)>,
    kinv_l: DMatrix<f64>,
    kinv_f: DVector<f64>,
    /// `K⁻¹L·1`, the response to a constant trace.
    kinv_one: DVector<f64>,
}

impl Condensed {
    /// Element state `K⁻¹f + K⁻¹L λ` for `λ = hi + lo`. The trace is split into
    /// its mean and the deviation from it: the columns of `K⁻¹L` are large and
    /// nearly cancel on a constant trace, and keeping `lo` apart stops the
    /// rounding of `λ` itself from being amplified into the fluxes.
    fn state(&self, hi: &[f64], lo: &[f64]) -> DVector<f64> {
        if self.mult.is_empty() {
            return self.kinv_f.clone();
        }
        let n = self.mult.len() as f64;
        let mean = self.mult.iter().map(|&g| hi[g]).sum::<f64>() / n;
        let dev = DVector::from_iterator(
            self.mult.len(),
            self.mult.iter().map(|&g| (hi[g] - mean) + lo[g]),
        );
        &self.kinv_f + &self.kinv_one * mean + &self.kinv_l * dev
    }
}

fn solve_hybridized(system: &MixedSystem) -> Result<Vec<f64>, SolverError> {
    let mesh = &system.mesh;
    let r = system.degree();
    let per_edge = r + 1;
    let dof = dof_rule(r);
    let mut interior_index = vec![usize::MAX; mesh.num_edges()];
    let mut n_mult = 0;
    for e in mesh.interior_edges() {
        interior_index[e] = n_mult;
        n_mult += per_edge;
    }
    let condensed: Result<Vec<Condensed>, SolverError> = system
        .elements
        .par_iter()
        .enumerate()
        .map(|(t, el)| {
            let n = el.matrix.nrows();
            let mut mult = Vec::new();
            let mut cols = Vec::new();
            for (k, &e) in mesh.triangle_edges(t).iter().enumerate() {
                if interior_index[e] == usize::MAX {
                    continue;
                }
                let forward = mesh.local_edge_forward(t, k);
                let len = mesh.edge_length(e);
                for j in 0..=r {
                    let jg = if forward { j } else { r - j };
                    mult.push(interior_index[e] + jg);
                    cols.push((k * per_edge + j, len * dof.weights[j]));
                }
            }
            let mut l = DMatrix::<f64>::zeros(n, mult.len());
            for (c, &(row, val)) in cols.iter().enumerate() {
                l[(row, c)] = val;
            }
            let lu = el.matrix.clone().lu();
            let singular =
                || SolverError::Factorization(format!("singular element matrix on triangle {t}"));
            let kinv_l = lu.solve(&l).ok_or_else(singular)?;
            let kinv_f = lu.solve(&el.load).ok_or_else(singular)?;
            let ones = DVector::from_iterator(n, (0..n).map(|i| l.row(i).sum()));
            let kinv_one = lu.solve(&ones).ok_or_else(singular)?;
            Ok(Condensed {
                mult,
                lrows: cols,
                kinv_l,
                kinv_f,
                kinv_one,
            })
        })
        .collect();
    let condensed = condensed?;

    let mut lambda = vec![0.0; n_mult];
    let mut lambda_lo = vec![0.0; n_mult];
    if n_mult > 0 {
        let mut trips = Vec::new();
        let mut rhs = vec![0.0; n_mult];
        for c in &condensed {
            for (a, &ga) in c.mult.iter().enumerate() {
                let (row, val) = c.lrows[a];
                for (b, &gb) in c.mult.iter().enumerate() {
                    trips.push(Triplet::new(ga, gb, val * c.kinv_l[(row, b)]));
                }
                rhs[ga] -= val * c.kinv_f[row];
            }
        }
        let (factor, first) = factor_sparse(n_mult, &trips, &rhs, system.symmetric)?;
        // the residual is the normal-flux jump of the element solutions, which
        // is more accurate than rhs − Sλ with the rounded entries of S
        let jump = |hi: &[f64], lo: &[f64]| {
            let states: Vec<DVector<f64>> = condensed.par_iter().map(|c| c.state(hi, lo)).collect();
            let mut res = vec![0.0; n_mult];
            for (c, xl) in condensed.iter().zip(&states) {
                for (a, &g) in c.mult.iter().enumerate() {
                    let (row, val) = c.lrows[a];
                    res[g] -= val * xl[row];
                }
            }
            res
        };
        lambda = first;
        lambda_lo = refine(&factor, vec![0.0; n_mult], |lo| jump(&lambda, lo));
    }

    let mut x = vec![0.0; system.dim()];
    let mut written = vec![false; system.num_flux()];
    let states: Vec<DVector<f64>> = condensed
        .par_iter()
        .map(|c| c.state(&lambda, &lambda_lo))
        .collect();
    for (t, xl) in states.iter().enumerate() {
        for (i, &(g, s)) in system.local_to_global(t).iter().enumerate() {
            if g >= system.num_flux() || !written[g] {
                x[g] = s * xl[i];
                if g < system.num_flux() {
                    written[g] = true;
                }
            }
        }
    }
    Ok(x)
}
