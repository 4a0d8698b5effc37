//! Local error-expansion identities of the RT_1 interpolant on one triangle.
//!
//! Edges and directions follow [`TriangleGeometry`]: edge `k` is opposite
//! vertex `k`, `t_k` runs counterclockwise and `n_k` points outward. Direction
//! index 0 stands for `t_k` and 1 for `n_k`, so `D^{jl}_{i,k}(q) =
//! d_i · ∂_{d_j} ∂_{d_l} q` with `d_0 = t_k`, `d_1 = n_k`. Coefficient arrays are
//! indexed `[k][i][j][l]` with this 0-based convention.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Error;
use crate::mesh::{Mesh, TriangleGeometry};
use crate::quadrature::triangle_rule;
use crate::spaces::{interpolate_rt, lattice, RtField};
use crate::Point;

/// `c0 + c1 ξ + c2 η + c3 ξ² + c4 ξη + c5 η²` in `(ξ, η) = (x − center)/scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub coeffs: [f64; 6],
    pub center: Point,
    pub scale: f64,
}

impl Quadratic {
    /// Coefficients in global coordinates.
    pub fn new(coeffs: [f64; 6]) -> Self {
        Quadratic {
            coeffs,
            center: [0.0, 0.0],
            scale: 1.0,
        }
    }

    /// Coefficients in coordinates centered at `center` and scaled by `scale`.
    pub fn local(coeffs: [f64; 6], center: Point, scale: f64) -> Self {
        Quadratic {
            coeffs,
            center,
            scale,
        }
    }

    fn xi(&self, x: Point) -> Point {
        [
            (x[0] - self.center[0]) / self.scale,
            (x[1] - self.center[1]) / self.scale,
        ]
    }

    pub fn eval(&self, x: Point) -> f64 {
        let c = &self.coeffs;
        let [u, v] = self.xi(x);
        c[0] + c[1] * u + c[2] * v + c[3] * u * u + c[4] * u * v + c[5] * v * v
    }

    pub fn grad(&self, x: Point) -> Point {
        let c = &self.coeffs;
        let [u, v] = self.xi(x);
        [
            (c[1] + 2.0 * c[3] * u + c[4] * v) / self.scale,
            (c[2] + c[4] * u + 2.0 * c[5] * v) / self.scale,
        ]
    }

    pub fn hessian(&self) -> [[f64; 2]; 2] {
        let c = &self.coeffs;
        let s2 = self.scale * self.scale;
        [[2.0 * c[3] / s2, c[4] / s2], [c[4] / s2, 2.0 * c[5] / s2]]
    }

    /// `∂_a ∂_b`.
    pub fn second(&self, a: Point, b: Point) -> f64 {
        let h = self.hessian();
        a[0] * (h[0][0] * b[0] + h[0][1] * b[1]) + a[1] * (h[1][0] * b[0] + h[1][1] * b[1])
    }

    /// Frobenius norm of the Hessian.
    pub fn seminorm2(&self) -> f64 {
        let h = self.hessian();
        (h[0][0].powi(2) + 2.0 * h[0][1].powi(2) + h[1][1].powi(2)).sqrt()
    }
}

/// A vector field with quadratic components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticVec(pub [Quadratic; 2]);

impl QuadraticVec {
    pub fn eval(&self, x: Point) -> Point {
        [self.0[0].eval(x), self.0[1].eval(x)]
    }

    pub fn div(&self, x: Point) -> f64 {
        self.0[0].grad(x)[0] + self.0[1].grad(x)[1]
    }

    pub fn second(&self, a: Point, b: Point) -> Point {
        [self.0[0].second(a, b), self.0[1].second(a, b)]
    }

    pub fn seminorm2(&self) -> f64 {
        self.0[0].seminorm2().hypot(self.0[1].seminorm2())
    }
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `ℓ_k, ℓ_{k−1}, ℓ_{k+1}`.
fn local_lengths(g: &TriangleGeometry, k: usize) -> (f64, f64, f64) {
    (g.lengths[k], g.lengths[(k + 2) % 3], g.lengths[(k + 1) % 3])
}

/// The μ (length⁴) and α (length³) coefficient tables of a triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeCoefficients {
    pub mu: [[[[f64; 2]; 2]; 2]; 3],
    pub alpha: [[[[f64; 2]; 2]; 2]; 3],
}

/// Fills a table from its three independent entries per `i`, using the
/// symmetry in `(j, l)` and the cross relations of the second row.
fn table(v111: f64, v112: f64, v122: f64, v211: f64) -> [[[f64; 2]; 2]; 2] {
    [
        [[v111, v112], [v112, v122]],
        [[v211, -v111], [-v111, -v112]],
    ]
}

pub fn edge_coefficients(g: &TriangleGeometry) -> EdgeCoefficients {
    let d = g.circumdiameter;
    let prod = g.lengths[0] * g.lengths[1] * g.lengths[2];
    let mut mu = [[[[0.0; 2]; 2]; 2]; 3];
    let mut alpha = [[[[0.0; 2]; 2]; 2]; 3];
    for k in 0..3 {
        let (lk, lm, lp) = local_lengths(g, k);
        let dl = lm * lm - lp * lp;
        let lk2 = lk * lk;
        let lk4 = lk2 * lk2;
        let m111 = (3.0 * lk4 - 3.0 * dl * dl - 4.0 * lk2 * (lm * lm + lp * lp)) / 5760.0;
        let m112 = prod * dl / (1440.0 * d);
        let m122 = -prod * prod / (1440.0 * d * d);
        let m211 =
            d * dl * (4.0 * lk4 - dl * dl - 3.0 * lk2 * (lm * lm + lp * lp)) / (2880.0 * prod);
        mu[k] = table(m111, m112, m122, m211);
        let a111 = lm * lp * (3.0 * lk4 - dl * dl) / (24.0 * d * lk2);
        let a112 = lm * lm * lp * lp * dl / (12.0 * d * d * lk);
        let a122 = -(lm * lp).powi(3) / (6.0 * d.powi(3));
        let a211 = dl * (9.0 * lk4 - dl * dl) / (48.0 * lk2 * lk);
        alpha[k] = table(a111, a112, a122, a211);
    }
    EdgeCoefficients { mu, alpha }
}

/// `D^{jl}_{i,k}(p2)`.
pub fn d_operator(
    p2: &QuadraticVec,
    g: &TriangleGeometry,
    k: usize,
    i: usize,
    j: usize,
    l: usize,
) -> f64 {
    let dirs = [g.tangents[k], g.normals[k]];
    dot(dirs[i], p2.second(dirs[j], dirs[l]))
}

fn contract(c: &[[[f64; 2]; 2]; 2], p2: &QuadraticVec, g: &TriangleGeometry, k: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for l in 0..2 {
                s += c[i][j][l] * d_operator(p2, g, k, i, j, l);
            }
        }
    }
    s
}

/// `B_k(p2) = Σ μ^i_{jl,k} D^{jl}_{i,k}(p2)`.
pub fn apply_bk(p2: &QuadraticVec, g: &TriangleGeometry, k: usize) -> f64 {
    contract(&edge_coefficients(g).mu[k], p2, g, k)
}

/// Cubic bubbles `ψ_0 = λ_1λ_2λ_3`, `ψ_k = λ_{k−1}λ_{k+1}(λ_{k−1} − λ_{k+1})`
/// and quadratic edge bubbles `φ_k = λ_{k−1}λ_{k+1}`.
pub mod bubbles {
    use crate::mesh::TriangleGeometry;
    use crate::Point;

    fn prev_next(k: usize) -> (usize, usize) {
        ((k + 2) % 3, (k + 1) % 3)
    }

    /// `ψ_k(λ)` for `k = 0..=3`; `k ≥ 1` refers to edge `k − 1`.
    pub fn psi(k: usize, b: [f64; 3]) -> f64 {
        if k == 0 {
            return b[0] * b[1] * b[2];
        }
        let (m, p) = prev_next(k - 1);
        b[m] * b[p] * (b[m] - b[p])
    }

    pub fn phi(k: usize, b: [f64; 3]) -> f64 {
        let (m, p) = prev_next(k);
        b[m] * b[p]
    }

    /// Gradient of `ψ_k`.
    pub fn grad_psi(k: usize, b: [f64; 3], g: &TriangleGeometry) -> Point {
        let gl = &g.grad_lambda;
        let comb = |w: [f64; 3]| {
            [
                w[0] * gl[0][0] + w[1] * gl[1][0] + w[2] * gl[2][0],
                w[0] * gl[0][1] + w[1] * gl[1][1] + w[2] * gl[2][1],
            ]
        };
        if k == 0 {
            return comb([b[1] * b[2], b[0] * b[2], b[0] * b[1]]);
        }
        let (m, p) = prev_next(k - 1);
        let mut w = [0.0; 3];
        // ∂/∂λ_m (λ_m² λ_p − λ_m λ_p²) and likewise for λ_p
        w[m] = 2.0 * b[m] * b[p] - b[p] * b[p];
        w[p] = b[m] * b[m] - 2.0 * b[m] * b[p];
        comb(w)
    }
}

/// Lattice points of degree 5 plus the centroid, as barycentric coordinates.
pub fn sample_points() -> Vec<[f64; 3]> {
    let mut pts: Vec<[f64; 3]> = lattice(5)
        .iter()
        .map(|a| a.map(|v| v as f64 / 5.0))
        .collect();
    pts.push([1.0 / 3.0; 3]);
    pts
}

fn single_mesh(g: &TriangleGeometry) -> Arc<Mesh> {
    Arc::new(Mesh::new(g.vertices.to_vec(), vec![[0, 1, 2]]).expect("nondegenerate triangle"))
}

fn interpolate_rt1(g: &TriangleGeometry, p2: &QuadraticVec) -> RtField {
    let q = |x: Point| p2.eval(x);
    interpolate_rt(&q, &single_mesh(g), 1).expect("RT_1 interpolation on a valid triangle")
}

fn diameter(g: &TriangleGeometry) -> f64 {
    g.lengths.iter().fold(0.0f64, |a, &b| a.max(b))
}

/// Both sides of an identity with the magnitude used to judge their difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub lhs: f64,
    pub rhs: f64,
    pub scale: f64,
}

impl Residual {
    pub fn absolute(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }

    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.absolute() / self.scale
        } else {
            self.absolute()
        }
    }
}

/// `∫_T (p2 − Π p2)·∇⊥w2` against `Σ_k ∫_{e_k} B_k(p2) ∂²_{t_k} w2`.
///
/// The scale is `|p2|_2 h⁴ (|w2|_2 h + max_T |∇w2|)`, the size either side
/// can reach before cancellation.
pub fn check_rt1err2(g: &TriangleGeometry, p2: &QuadraticVec, w2: &Quadratic) -> Residual {
    let pi = interpolate_rt1(g, p2);
    let rule = triangle_rule(6).expect("degree within table");
    let mut lhs = 0.0;
    for (b, w) in rule.points.iter().zip(&rule.weights) {
        let x = g.point(*b);
        let d = pi.value_and_div(0, x).0;
        let p = p2.eval(x);
        let gw = w2.grad(x);
        lhs += w * ((p[0] - d[0]) * -gw[1] + (p[1] - d[1]) * gw[0]);
    }
    lhs *= g.area;
    let coeffs = edge_coefficients(g);
    let rhs: f64 = (0..3)
        .map(|k| {
            g.lengths[k]
                * contract(&coeffs.mu[k], p2, g, k)
                * w2.second(g.tangents[k], g.tangents[k])
        })
        .sum();
    let h = diameter(g);
    let grad_max = g
        .vertices
        .iter()
        .map(|&v| w2.grad(v))
        .map(|v| v[0].hypot(v[1]))
        .fold(0.0f64, f64::max);
    let scale = p2.seminorm2() * h.powi(4) * (w2.seminorm2() * h + grad_max);
    Residual { lhs, rhs, scale }
}

/// Outcome of [`check_rt1err1`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rt1Err1 {
    /// `max |(p2 − Π p2) − ∇⊥w|` over the sample points, relative to `|p2|_2 h²`.
    pub residual: f64,
    /// Spread of the `ψ_0` coefficient over the three choices of edge, relative to `|p2|_2 h³`.
    pub beta_spread: f64,
    /// `max |div(p2 − Π p2)|` relative to `|p2|_2 h`.
    pub divergence: f64,
}

/// The `ψ_0` coefficient `Σ α^i_{jl,β} D^{jl}_{i,β}(p2)` computed with edge `β`.
pub fn psi0_coefficient(g: &TriangleGeometry, p2: &QuadraticVec, beta: usize) -> f64 {
    contract(&edge_coefficients(g).alpha[beta], p2, g, beta)
}

/// Checks `p2 − Π p2 = ∇⊥w` with `w = c_0 ψ_0 + Σ_k (ℓ_k³/12) D^{11}_{2,k}(p2) ψ_k`.
pub fn check_rt1err1(g: &TriangleGeometry, p2: &QuadraticVec) -> Rt1Err1 {
    let pi = interpolate_rt1(g, p2);
    let c0s: Vec<f64> = (0..3).map(|b| psi0_coefficient(g, p2, b)).collect();
    let ck: Vec<f64> = (0..3)
        .map(|k| g.lengths[k].powi(3) / 12.0 * d_operator(p2, g, k, 1, 0, 0))
        .collect();
    let h = diameter(g);
    let s2 = p2.seminorm2();
    let (mut res, mut div) = (0.0f64, 0.0f64);
    for b in sample_points() {
        let x = g.point(b);
        let mut gw = bubbles::grad_psi(0, b, g).map(|v| c0s[0] * v);
        for k in 0..3 {
            let gp = bubbles::grad_psi(k + 1, b, g);
            gw[0] += ck[k] * gp[0];
            gw[1] += ck[k] * gp[1];
        }
        let (d, dd) = pi.value_and_div(0, x);
        let p = p2.eval(x);
        res = res
            .max((p[0] - d[0] + gw[1]).abs())
            .max((p[1] - d[1] - gw[0]).abs());
        div = div.max((p2.div(x) - dd).abs());
    }
    let spread =
        c0s.iter().fold(f64::MIN, |a, &b| a.max(b)) - c0s.iter().fold(f64::MAX, |a, &b| a.min(b));
    let rel = |v: f64, s: f64| if s > 0.0 { v / s } else { v };
    Rt1Err1 {
        residual: rel(res, s2 * h * h),
        beta_spread: rel(spread, s2 * h.powi(3)),
        divergence: rel(div, s2 * h),
    }
}

/// Outcome of [`check_hierarchy`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hierarchy {
    /// `w − I w + ½ Σ ℓ_k² φ_k ∂²_{t_k} w`, relative to `|w|_2 h²`.
    pub hierarchy: f64,
    /// `Δw − (1/(4|T|²)) Σ ℓ_k² ℓ_{k−1} ℓ_{k+1} cos θ_k ∂²_{t_k} w`, relative to `|w|_2`.
    pub laplacian: f64,
}

pub fn check_hierarchy(g: &TriangleGeometry, w2: &Quadratic) -> Hierarchy {
    let tt: Vec<f64> = (0..3)
        .map(|k| w2.second(g.tangents[k], g.tangents[k]))
        .collect();
    let vals: Vec<f64> = g.vertices.iter().map(|&v| w2.eval(v)).collect();
    let h = diameter(g);
    let s2 = w2.seminorm2();
    let mut hier = 0.0f64;
    for b in sample_points() {
        let x = g.point(b);
        let iw: f64 = (0..3).map(|k| b[k] * vals[k]).sum();
        let corr: f64 = (0..3)
            .map(|k| 0.5 * g.lengths[k].powi(2) * bubbles::phi(k, b) * tt[k])
            .sum();
        hier = hier.max((w2.eval(x) - iw + corr).abs());
    }
    let lap_edges: f64 = (0..3)
        .map(|k| {
            let (lk, lm, lp) = local_lengths(g, k);
            lk * lk * lm * lp * g.angles[k].cos() * tt[k]
        })
        .sum::<f64>()
        / (4.0 * g.area * g.area);
    let hs = w2.hessian();
    let lap = hs[0][0] + hs[1][1];
    let rel = |v: f64, s: f64| if s > 0.0 { v / s } else { v };
    Hierarchy {
        hierarchy: rel(hier, s2 * h * h),
        laplacian: rel((lap - lap_edges).abs(), s2),
    }
}

/// `ℓ_max² / (2|T|)`: longest edge over the altitude onto it.
pub fn aspect_ratio(g: &TriangleGeometry) -> f64 {
    diameter(g).powi(2) / (2.0 * g.area)
}

/// A random counterclockwise triangle with aspect ratio at most `aspect_max`,
/// randomly placed, rotated and scaled over three orders of magnitude.
pub fn random_triangle(rng: &mut impl Rng, aspect_max: f64) -> TriangleGeometry {
    let min_aspect = 2.0 / 3f64.sqrt();
    let aspect_max = aspect_max.max(min_aspect * 1.01);
    loop {
        // base (0,0)-(1,0), apex with height from a log-uniform aspect target
        let target = (min_aspect.ln() + rng.random::<f64>() * (aspect_max / min_aspect).ln()).exp();
        let height = 1.0 / target;
        let apex = [rng.random_range(0.0..1.0), height];
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let scale = 10f64.powf(rng.random_range(-2.0..1.0));
        let shift = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let (s, c) = theta.sin_cos();
        let map = |p: Point| {
            [
                shift[0] + scale * (c * p[0] - s * p[1]),
                shift[1] + scale * (s * p[0] + c * p[1]),
            ]
        };
        let g = TriangleGeometry::new([map([0.0, 0.0]), map([1.0, 0.0]), map(apex)]);
        if g.area > 0.0 && aspect_ratio(&g) <= aspect_max {
            return g;
        }
    }
}

/// Random coefficients in `[−1, 1]` in the scaled local coordinates of `g`.
pub fn random_quadratic(rng: &mut impl Rng, g: &TriangleGeometry) -> Quadratic {
    Quadratic::local(
        std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
        g.centroid(),
        diameter(g),
    )
}

/// Base tolerances at aspect ratio 20.
pub const TOL_RT1ERR2: f64 = 1e-9;
pub const TOL_RT1ERR1: f64 = 1e-9;
pub const TOL_BETA: f64 = 1e-10;
pub const TOL_DIV: f64 = 1e-11;
pub const TOL_HIERARCHY: f64 = 1e-10;
pub const TOL_BK_FD: f64 = 1e-6;

/// Tolerance multiplier for aspect ratios beyond 20: round-off in the
/// interpolant grows with the square of the aspect ratio.
pub fn tolerance_factor(aspect_max: f64) -> f64 {
    (aspect_max / 20.0).powi(2).max(1.0)
}

/// One line of the suite table.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub name: &'static str,
    pub max_residual: f64,
    pub tolerance: f64,
    pub worst: Option<[Point; 3]>,
}

impl SuiteRow {
    pub fn passed(&self) -> bool {
        self.max_residual <= self.tolerance
    }
}

/// All checks over one random sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSummary {
    pub samples: usize,
    pub aspect_max: f64,
    pub rows: Vec<SuiteRow>,
}

impl SuiteSummary {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(SuiteRow::passed)
    }

    /// Vertices of the worst triangle among the failing checks.
    pub fn worst_triangle(&self) -> Option<[Point; 3]> {
        self.rows
            .iter()
            .filter(|r| !r.passed())
            .max_by(|a, b| {
                (a.max_residual / a.tolerance).total_cmp(&(b.max_residual / b.tolerance))
            })
            .and_then(|r| r.worst)
    }
}

impl fmt::Display for SuiteSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} random triangles, aspect ratio <= {}",
            self.samples, self.aspect_max
        )?;
        writeln!(
            f,
            "{:<22} {:>12} {:>12}  result",
            "check", "max", "tolerance"
        )?;
        for r in &self.rows {
            let status = if r.passed() { "pass" } else { "FAIL" };
            writeln!(
                f,
                "{:<22} {:>12.3e} {:>12.3e}  {status}",
                r.name, r.max_residual, r.tolerance
            )?;
        }
        Ok(())
    }
}

/// Second directional derivative of `p2` by central differences.
fn fd_second(p2: &QuadraticVec, x: Point, a: Point, b: Point, eps: f64) -> Point {
    let at = |sa: f64, sb: f64| {
        p2.eval([
            x[0] + eps * (sa * a[0] + sb * b[0]),
            x[1] + eps * (sa * a[1] + sb * b[1]),
        ])
    };
    let (pp, pm, mp, mm) = (at(1.0, 1.0), at(1.0, -1.0), at(-1.0, 1.0), at(-1.0, -1.0));
    std::array::from_fn(|c| (pp[c] - pm[c] - mp[c] + mm[c]) / (4.0 * eps * eps))
}

/// Relative difference between `B_k` from exact derivatives and from finite differences.
pub fn bk_finite_difference_gap(g: &TriangleGeometry, p2: &QuadraticVec) -> f64 {
    let coeffs = edge_coefficients(g);
    let h = diameter(g);
    let x = g.centroid();
    let mut worst = 0.0f64;
    for k in 0..3 {
        let dirs = [g.tangents[k], g.normals[k]];
        let (mut exact, mut fd, mut size) = (0.0, 0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    let c = coeffs.mu[k][i][j][l];
                    exact += c * d_operator(p2, g, k, i, j, l);
                    fd += c * dot(dirs[i], fd_second(p2, x, dirs[j], dirs[l], 1e-2 * h));
                    size += (c * p2.seminorm2()).abs();
                }
            }
        }
        worst = worst.max((exact - fd).abs() / size.max(f64::MIN_POSITIVE));
    }
    worst
}

struct Sample {
    g: TriangleGeometry,
    err2: f64,
    err1: Rt1Err1,
    hier: Hierarchy,
    bk: f64,
    mu_sign: f64,
}

/// Runs every check on `samples` random triangles; deterministic for a seed.
pub fn run_suite(samples: usize, aspect_max: f64, seed: u64) -> Result<SuiteSummary, Error> {
    if samples == 0 {
        return Err(Error::Config("samples must be positive".into()));
    }
    if !(aspect_max > 1.2) {
        return Err(Error::Config(format!(
            "aspect-max must exceed 1.2 (got {aspect_max})"
        )));
    }
    let results: Vec<Sample> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
                    .wrapping_add(i as u64),
            );
            let g = random_triangle(&mut rng, aspect_max);
            let p2 = QuadraticVec([
                random_quadratic(&mut rng, &g),
                random_quadratic(&mut rng, &g),
            ]);
            let w2 = random_quadratic(&mut rng, &g);
            let coeffs = edge_coefficients(&g);
            let mu_sign = (0..3)
                .map(|k| coeffs.mu[k][0][1][1])
                .fold(f64::MIN, f64::max);
            Sample {
                err2: check_rt1err2(&g, &p2, &w2).relative(),
                err1: check_rt1err1(&g, &p2),
                hier: check_hierarchy(&g, &w2),
                bk: bk_finite_difference_gap(&g, &p2),
                mu_sign,
                g,
            }
        })
        .collect();
    let factor = tolerance_factor(aspect_max);
    let row = |name: &'static str, tol: f64, get: &dyn Fn(&Sample) -> f64| {
        let (mut max, mut worst) = (f64::MIN, None);
        for s in &results {
            let v = get(s);
            if v > max || v.is_nan() {
                max = v;
                worst = Some(s.g.vertices);
            }
        }
        SuiteRow {
            name,
            max_residual: max,
            tolerance: tol,
            worst,
        }
    };
    let rows = vec![
        // μ¹_{22,k} < 0 is reported as its largest value against tolerance 0
        row("mu122 < 0", 0.0, &|s| {
            if s.mu_sign < 0.0 {
                s.mu_sign.min(0.0)
            } else {
                1.0
            }
        }),
        row("apply_Bk vs FD", TOL_BK_FD * factor, &|s| s.bk),
        row("rt1err2", TOL_RT1ERR2 * factor, &|s| s.err2),
        row("rt1err1", TOL_RT1ERR1 * factor, &|s| s.err1.residual),
        row("rt1err1 beta spread", TOL_BETA * factor, &|s| {
            s.err1.beta_spread
        }),
        row("div(p - Pi p)", TOL_DIV * factor, &|s| s.err1.divergence),
        row("hierarchy", TOL_HIERARCHY * factor, &|s| s.hier.hierarchy),
        row("laplacian", TOL_HIERARCHY * factor, &|s| s.hier.laplacian),
    ];
    Ok(SuiteSummary {
        samples,
        aspect_max,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn right() -> TriangleGeometry {
        TriangleGeometry::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    }

    fn equilateral() -> TriangleGeometry {
        TriangleGeometry::new([[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]])
    }

    #[test]
    fn equilateral_has_no_mu112() {
        let c = edge_coefficients(&equilateral());
        for k in 0..3 {
            assert!(c.mu[k][0][0][1].abs() < 1e-15);
            assert!(c.mu[k][1][0][0].abs() < 1e-15);
        }
    }

    #[test]
    fn mu122_closed_form() {
        let g = TriangleGeometry::new([[0.1, -0.2], [1.3, 0.4], [0.2, 0.9]]);
        let c = edge_coefficients(&g);
        let l = g.lengths;
        let expect = -(l[0] * l[1] * l[2]).powi(2) / (1440.0 * g.circumdiameter.powi(2));
        for k in 0..3 {
            assert!((c.mu[k][0][1][1] - expect).abs() <= 1e-14 * expect.abs());
            assert!(c.mu[k][0][1][1] < 0.0);
        }
    }

    #[test]
    fn isosceles_degeneracy() {
        // edges 1 and 2 equal: vertex 0 is the apex
        let g = TriangleGeometry::new([[0.5, 2.0], [0.0, 0.0], [1.0, 0.0]]);
        let c = edge_coefficients(&g);
        assert!(c.mu[0][0][0][1].abs() < 1e-15 && c.mu[0][1][0][0].abs() < 1e-15);
    }

    #[test]
    fn linear_field_has_zero_bk() {
        let p = QuadraticVec([
            Quadratic::new([1.0, 2.0, -1.0, 0.0, 0.0, 0.0]),
            Quadratic::new([0.5, 0.0, 3.0, 0.0, 0.0, 0.0]),
        ]);
        for k in 0..3 {
            assert_eq!(apply_bk(&p, &right(), k), 0.0);
        }
    }

    #[test]
    fn bk_of_x_squared_matches_finite_differences() {
        let p = QuadraticVec([
            Quadratic::new([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
            Quadratic::new([0.0; 6]),
        ]);
        let g = TriangleGeometry::new([[0.0, 0.0], [1.0, 0.2], [0.3, 0.8]]);
        assert!(bk_finite_difference_gap(&g, &p) < 1e-8);
    }

    #[test]
    fn bubbles_vanish_at_vertices_and_midpoints() {
        let pts = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.5, 0.5, 0.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
        ];
        for k in 0..4 {
            for b in pts {
                assert!(bubbles::psi(k, b).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn bubble_integrals() {
        let g = TriangleGeometry::new([[0.0, 0.0], [2.0, 0.5], [0.4, 1.5]]);
        let rule = triangle_rule(4).unwrap();
        for k in 0..4 {
            let s: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(b, w)| w * bubbles::psi(k, *b))
                .sum::<f64>()
                * g.area;
            let expect = if k == 0 { g.area / 60.0 } else { 0.0 };
            assert!((s - expect).abs() < 1e-15, "k={k}: {s}");
        }
    }

    #[test]
    fn bubble_gradients_match_finite_differences() {
        let g = TriangleGeometry::new([[0.0, 0.0], [2.0, 0.5], [0.4, 1.5]]);
        let b = [0.2, 0.3, 0.5];
        let x = g.point(b);
        let eps = 1e-6;
        for k in 0..4 {
            let f = |y: Point| bubbles::psi(k, g.barycentric(y));
            let fd = [
                (f([x[0] + eps, x[1]]) - f([x[0] - eps, x[1]])) / (2.0 * eps),
                (f([x[0], x[1] + eps]) - f([x[0], x[1] - eps])) / (2.0 * eps),
            ];
            let gp = bubbles::grad_psi(k, b, &g);
            assert!((fd[0] - gp[0]).abs() < 1e-8 && (fd[1] - gp[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn shape_space_member_has_zero_sides() {
        // (x², xy) = x (x, y) lies in RT_1
        let p = QuadraticVec([
            Quadratic::new([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
            Quadratic::new([0.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
        ]);
        let w = Quadratic::new([0.3, 0.1, -0.2, 1.0, 0.5, -0.7]);
        let g = TriangleGeometry::new([[0.1, 0.0], [1.0, 0.3], [0.2, 0.9]]);
        let res = check_rt1err2(&g, &p, &w);
        assert!(res.lhs.abs() <= 1e-12 && res.rhs.abs() <= 1e-12, "{res:?}");
    }

    #[test]
    fn linear_w_gives_zero() {
        let p = QuadraticVec([
            Quadratic::new([0.1, 0.2, 0.3, 1.0, -0.5, 0.2]),
            Quadratic::new([0.0, 1.0, 0.0, 0.3, 0.7, -1.0]),
        ]);
        let w = Quadratic::new([1.0, 2.0, -3.0, 0.0, 0.0, 0.0]);
        let res = check_rt1err2(&right(), &p, &w);
        assert!(res.lhs.abs() <= 1e-12 && res.rhs == 0.0);
    }

    #[test]
    fn constant_field_has_zero_w() {
        let p = QuadraticVec([
            Quadratic::new([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            Quadratic::new([-2.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        ]);
        let r = check_rt1err1(&right(), &p);
        assert!(r.residual < 1e-13 && r.beta_spread == 0.0);
    }

    #[test]
    fn laplacian_on_unit_right_triangle() {
        let w = Quadratic::new([0.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let g = right();
        let h = check_hierarchy(&g, &w);
        assert!(h.laplacian * w.seminorm2() < 1e-12 && h.hierarchy < 1e-14);
    }

    #[test]
    fn dilation_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let g = random_triangle(&mut rng, 20.0);
            let s = 3.7;
            let gs = TriangleGeometry::new(g.vertices.map(|v| [s * v[0], s * v[1]]));
            let (a, b) = (edge_coefficients(&g), edge_coefficients(&gs));
            for k in 0..3 {
                for i in 0..2 {
                    for j in 0..2 {
                        for l in 0..2 {
                            let (m, ms) = (a.mu[k][i][j][l], b.mu[k][i][j][l]);
                            assert!((ms - s.powi(4) * m).abs() <= 1e-12 * ms.abs().max(1e-300));
                            let (x, xs) = (a.alpha[k][i][j][l], b.alpha[k][i][j][l]);
                            assert!((xs - s.powi(3) * x).abs() <= 1e-12 * xs.abs().max(1e-300));
                        }
                    }
                }
            }
            // B_k on the dilated field p(x/s) scales by s²
            let p = QuadraticVec([
                random_quadratic(&mut rng, &g),
                random_quadratic(&mut rng, &g),
            ]);
            let ps = QuadraticVec(
                p.0.map(|q| Quadratic::local(q.coeffs, q.center.map(|c| s * c), s * q.scale)),
            );
            for k in 0..3 {
                let (v, vs) = (apply_bk(&p, &g, k), apply_bk(&ps, &gs, k));
                assert!((vs - s * s * v).abs() <= 1e-10 * (vs.abs() + 1e-300));
            }
        }
    }

    #[test]
    fn random_triangles_respect_aspect_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut max = 0.0f64;
        for _ in 0..500 {
            let a = aspect_ratio(&random_triangle(&mut rng, 20.0));
            assert!(a <= 20.0);
            max = max.max(a);
        }
        assert!(max > 10.0, "thin triangles are sampled: {max}");
    }

    #[test]
    fn small_suite_passes() {
        let s = run_suite(200, 20.0, 1).unwrap();
        assert!(s.passed(), "{s}");
    }
}
