//! Element-level RT_r machinery: the spanning set, DOF functionals and the
//! dual (nodal) basis, plus the principal-lattice Lagrange basis.

use nalgebra::DMatrix;

use crate::error::SpaceError;
use crate::mesh::TriangleGeometry;
use crate::quadrature::{triangle_rule, unit_gauss, EdgeRule, TriangleRule};
use crate::Point;

/// Highest supported RT degree.
pub const MAX_DEGREE: usize = 3;

/// Local dimension of RT_r: `(r+1)(r+3)`.
pub const fn rt_dim(r: usize) -> usize {
    (r + 1) * (r + 3)
}

/// Number of degree-`n` polynomials in two variables.
pub const fn poly_dim(n: usize) -> usize {
    (n + 1) * (n + 2) / 2
}

pub(crate) fn check_degree(r: usize) -> Result<(), SpaceError> {
    if r > MAX_DEGREE {
        Err(SpaceError::UnsupportedDegree(r))
    } else {
        Ok(())
    }
}

/// Multi-indices `α` with `|α| = n`, in a fixed order.
pub fn lattice(n: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(poly_dim(n));
    for i in (0..=n).rev() {
        for j in (0..=n - i).rev() {
            out.push([i, j, n - i - j]);
        }
    }
    out
}

/// Degree-`n` Lagrange basis function of lattice node `α / n` at barycentric `b`.
pub fn lattice_basis(n: usize, alpha: [usize; 3], b: [f64; 3]) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let nf = n as f64;
    let mut v = 1.0;
    for k in 0..3 {
        for j in 0..alpha[k] {
            v *= (nf * b[k] - j as f64) / (j as f64 + 1.0);
        }
    }
    v
}

/// Gauss rule with `r + 1` points on an edge: the edge DOF points.
pub(crate) fn dof_rule(r: usize) -> EdgeRule {
    unit_gauss(r + 1)
}

/// Matrix `D` with `D[(a, i)] = ∫_T div φ_i λ^a` for the nodal basis `φ_i` and
/// the barycentric monomials `λ^a`, `a ∈ lattice(r)`.
///
/// Computed from the DOFs alone by Green's formula, so it does not inherit the
/// conditioning of the dual basis.
pub(crate) fn divergence_moments(g: &TriangleGeometry, r: usize) -> DMatrix<f64> {
    let basis = lattice(r);
    let rule = dof_rule(r);
    let nodes: Vec<[f64; 3]> = match r {
        0 => Vec::new(),
        1 => vec![[1.0 / 3.0; 3]],
        _ => lattice(r - 1)
            .iter()
            .map(|a| a.map(|v| v as f64 / (r - 1) as f64))
            .collect(),
    };
    let n_int = nodes.len();
    let mut d = DMatrix::zeros(basis.len(), rt_dim(r));
    for (ia, &alpha) in basis.iter().enumerate() {
        for k in 0..3 {
            for (j, (&sj, &wj)) in rule.params.iter().zip(&rule.weights).enumerate() {
                let mut lam = [0.0; 3];
                lam[(k + 1) % 3] = 1.0 - sj;
                lam[(k + 2) % 3] = sj;
                d[(ia, k * (r + 1) + j)] = g.lengths[k] * wj * super::bary_monomial(alpha, lam);
            }
        }
        // −∫ q·∇λ^a, with each λ^{a − e_i} expanded in the interior test
        // functions through its lattice values
        for i in 0..3 {
            if alpha[i] == 0 {
                continue;
            }
            let mut lower = alpha;
            lower[i] -= 1;
            for (l, node) in nodes.iter().enumerate() {
                let w = alpha[i] as f64 * super::bary_monomial(lower, *node) * g.area;
                for m in 0..2 {
                    d[(ia, 3 * (r + 1) + m * n_int + l)] -= w * g.grad_lambda[i][m];
                }
            }
        }
    }
    d
}

/// Edge test function `v_j = L_j / w_j`, with `L_j` the Lagrange basis on the
/// Gauss points.
pub(crate) fn edge_test_function(rule: &EdgeRule, j: usize, s: f64) -> f64 {
    let mut l = 1.0;
    for (i, &si) in rule.params.iter().enumerate() {
        if i != j {
            l *= (s - si) / (rule.params[j] - si);
        }
    }
    l / rule.weights[j]
}

/// Evaluates the scaled RT_r spanning set at `x`.
///
/// With `x̂ = (x − c)/h` the set is `(m, 0)`, `(0, m)` for monomials `m` of
/// degree ≤ r, followed by `(x̂ m, ŷ m)` for homogeneous `m` of degree r.
pub(crate) fn span_eval(
    r: usize,
    center: Point,
    h: f64,
    x: Point,
    vals: &mut [Point],
    divs: &mut [f64],
) {
    let xh = (x[0] - center[0]) / h;
    let yh = (x[1] - center[1]) / h;
    let mut px = [1.0; MAX_DEGREE + 2];
    let mut py = [1.0; MAX_DEGREE + 2];
    for i in 1..=r + 1 {
        px[i] = px[i - 1] * xh;
        py[i] = py[i - 1] * yh;
    }
    let np = poly_dim(r);
    let mut s = 0;
    for deg in 0..=r {
        for i in 0..=deg {
            let a = deg - i;
            let m = px[a] * py[i];
            vals[s] = [m, 0.0];
            vals[np + s] = [0.0, m];
            divs[s] = if a > 0 {
                a as f64 * px[a - 1] * py[i] / h
            } else {
                0.0
            };
            divs[np + s] = if i > 0 {
                i as f64 * px[a] * py[i - 1] / h
            } else {
                0.0
            };
            s += 1;
        }
    }
    for i in 0..=r {
        let m = px[r - i] * py[i];
        vals[2 * np + i] = [xh * m, yh * m];
        divs[2 * np + i] = (r + 2) as f64 * m / h;
    }
}

/// Scaling used for the spanning set of a triangle: centroid and longest edge.
pub(crate) fn span_frame(g: &TriangleGeometry) -> (Point, f64) {
    (g.centroid(), g.lengths.iter().cloned().fold(0.0, f64::max))
}

/// Nodal RT_r basis on one triangle, dual to the local DOF functionals.
///
/// Local DOFs are ordered as: for each local edge `k`, the `r+1` point values
/// `q(g_j)·n_k` with Gauss points ordered along the counterclockwise traversal
/// and `n_k` the outward normal; then the interior moments
/// `(1/|T|)∫ q_m λ_l`, component-major.
#[derive(Debug, Clone)]
pub struct LocalRtBasis {
    r: usize,
    center: Point,
    h: f64,
    /// Column `i` holds the spanning-set coefficients of basis function `i`.
    coeffs: DMatrix<f64>,
    condition: f64,
}

impl LocalRtBasis {
    pub fn new(g: &TriangleGeometry, r: usize) -> Result<Self, SpaceError> {
        check_degree(r)?;
        let n = rt_dim(r);
        let (center, h) = span_frame(g);
        let mut m = DMatrix::<f64>::zeros(n, n);
        let mut vals = vec![[0.0; 2]; n];
        let mut divs = vec![0.0; n];
        let rule = dof_rule(r);
        for k in 0..3 {
            let a = g.vertices[(k + 1) % 3];
            let b = g.vertices[(k + 2) % 3];
            let nk = g.normals[k];
            for (j, &s) in rule.params.iter().enumerate() {
                let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                span_eval(r, center, h, x, &mut vals, &mut divs);
                for (c, v) in vals.iter().enumerate() {
                    m[(k * (r + 1) + j, c)] = v[0] * nk[0] + v[1] * nk[1];
                }
            }
        }
        if r > 0 {
            let nodes = lattice(r - 1);
            let nl = nodes.len();
            let tri = interior_rule(r);
            let row0 = 3 * (r + 1);
            for (p, w) in tri.points.iter().zip(&tri.weights) {
                let x = g.point(*p);
                span_eval(r, center, h, x, &mut vals, &mut divs);
                for (l, &alpha) in nodes.iter().enumerate() {
                    let lw = w * lattice_basis(r - 1, alpha, *p);
                    for (c, v) in vals.iter().enumerate() {
                        m[(row0 + l, c)] += lw * v[0];
                        m[(row0 + nl + l, c)] += lw * v[1];
                    }
                }
            }
        }
        let norm1 = |a: &DMatrix<f64>| {
            a.column_iter()
                .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let inv = m.clone().lu().try_inverse();
        let Some(inv) = inv else {
            return Err(SpaceError::Degenerate {
                tri: usize::MAX,
                condition: f64::INFINITY,
            });
        };
        let condition = norm1(&m) * norm1(&inv);
        if !condition.is_finite() || condition > 1e12 {
            return Err(SpaceError::Degenerate {
                tri: usize::MAX,
                condition,
            });
        }
        Ok(LocalRtBasis {
            r,
            center,
            h,
            coeffs: inv,
            condition,
        })
    }

    pub fn degree(&self) -> usize {
        self.r
    }

    pub fn dim(&self) -> usize {
        rt_dim(self.r)
    }

    /// 1-norm condition number of the DOF-to-span matrix.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub(crate) fn frame(&self) -> (Point, f64) {
        (self.center, self.h)
    }

    /// Values and divergences of all basis functions at `x`.
    pub fn eval_into(&self, x: Point, vals: &mut [Point], divs: &mut [f64]) {
        let n = self.dim();
        let mut sv = [[0.0; 2]; rt_dim(MAX_DEGREE)];
        let mut sd = [0.0; rt_dim(MAX_DEGREE)];
        span_eval(self.r, self.center, self.h, x, &mut sv[..n], &mut sd[..n]);
        for i in 0..n {
            let col = self.coeffs.column(i);
            let mut v = [0.0; 2];
            let mut d = 0.0;
            for s in 0..n {
                let c = col[s];
                v[0] += c * sv[s][0];
                v[1] += c * sv[s][1];
                d += c * sd[s];
            }
            vals[i] = v;
            divs[i] = d;
        }
    }

    pub fn eval(&self, x: Point) -> Vec<Point> {
        let mut v = vec![[0.0; 2]; self.dim()];
        let mut d = vec![0.0; self.dim()];
        self.eval_into(x, &mut v, &mut d);
        v
    }

    pub fn div(&self, x: Point) -> Vec<f64> {
        let mut v = vec![[0.0; 2]; self.dim()];
        let mut d = vec![0.0; self.dim()];
        self.eval_into(x, &mut v, &mut d);
        d
    }

    /// Spanning-set coefficients of `Σ_i c_i φ_i`.
    pub(crate) fn span_coefficients(&self, c: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|s| (0..n).map(|i| self.coeffs[(s, i)] * c[i]).sum())
            .collect()
    }
}

/// Rule for the interior moments of a member of RT_r (integrand degree 2r).
pub(crate) fn interior_rule(r: usize) -> TriangleRule {
    triangle_rule((2 * r).max(1)).expect("degree within table")
}

/// Local DOFs of a general field, using moment formulas on the edges.
///
/// `edge_points` is the size of the edge rule used for the edge moments and
/// `degree` the exactness of the triangle rule for the interior moments.
pub fn local_dofs(
    g: &TriangleGeometry,
    r: usize,
    q: impl Fn(Point) -> Point,
    edge_points: usize,
    degree: usize,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(rt_dim(r));
    let dof = dof_rule(r);
    let quad = unit_gauss(edge_points);
    for k in 0..3 {
        let a = g.vertices[(k + 1) % 3];
        let b = g.vertices[(k + 2) % 3];
        let nk = g.normals[k];
        for j in 0..=r {
            out.push(quad.integrate(|s| {
                let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                let v = q(x);
                (v[0] * nk[0] + v[1] * nk[1]) * edge_test_function(&dof, j, s)
            }));
        }
    }
    if r > 0 {
        let nodes = lattice(r - 1);
        let tri = triangle_rule(degree.clamp(1, crate::quadrature::MAX_TRIANGLE_DEGREE))
            .expect("degree clamped");
        let mut mom = vec![[0.0; 2]; nodes.len()];
        for (p, w) in tri.points.iter().zip(&tri.weights) {
            let v = q(g.point(*p));
            for (l, &alpha) in nodes.iter().enumerate() {
                let lw = w * lattice_basis(r - 1, alpha, *p);
                mom[l][0] += lw * v[0];
                mom[l][1] += lw * v[1];
            }
        }
        out.extend(mom.iter().map(|m| m[0]));
        out.extend(mom.iter().map(|m| m[1]));
    }
    out
}
