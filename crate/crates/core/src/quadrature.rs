//! Quadrature rules.
//!
//! Edge rules are Gauss–Legendre rules on the affine parameter `s ∈ [0, 1]`;
//! their points define the edge degrees of freedom of the RT spaces.
//! Triangle rules are collapsed (Duffy) products of Gauss–Legendre rules, stored
//! in barycentric coordinates. Both are normalized so the weights sum to one;
//! multiply by `|e|` or `|T|` when integrating.

use std::f64::consts::PI;

use crate::error::QuadratureError;
use crate::mesh::Mesh;
use crate::Point;

/// Largest edge rule exposed through [`edge_gauss`].
pub const MAX_EDGE_POINTS: usize = 6;
/// Largest triangle exactness degree exposed through [`triangle_rule`].
pub const MAX_TRIANGLE_DEGREE: usize = 20;

/// Gauss rule on a segment, parameterized by `s ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRule {
    pub params: Vec<f64>,
    pub weights: Vec<f64>,
}

impl EdgeRule {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Polynomials of degree up to this value are integrated exactly.
    pub fn exactness(&self) -> usize {
        2 * self.len() - 1
    }

    /// Integrates `f(s)` over `[0, 1]`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.params
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| w * f(s))
            .sum()
    }
}

/// Rule on a triangle with points in barycentric coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
    /// Set when any weight is negative. Collapsed Gauss rules never have any.
    pub has_negative_weights: bool,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Physical quadrature points on the triangle with the given vertices.
    pub fn map_points(&self, v: &[Point; 3]) -> impl Iterator<Item = Point> + '_ {
        let v = *v;
        self.points.iter().map(move |b| {
            [
                b[0] * v[0][0] + b[1] * v[1][0] + b[2] * v[2][0],
                b[0] * v[0][1] + b[1] * v[1][1] + b[2] * v[2][1],
            ]
        })
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` for any `n ≥ 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss rule on `[0, 1]` with any number of points (no range restriction).
pub(crate) fn unit_gauss(n: usize) -> EdgeRule {
    let (x, w) = gauss_legendre(n);
    EdgeRule {
        params: x.iter().map(|&t| 0.5 * (t + 1.0)).collect(),
        weights: w.iter().map(|&t| 0.5 * t).collect(),
    }
}

/// Gauss rule with `n` points on an edge, exact for degree `2n − 1`.
pub fn edge_gauss(n: usize) -> Result<EdgeRule, QuadratureError> {
    if !(1..=MAX_EDGE_POINTS).contains(&n) {
        return Err(QuadratureError::UnsupportedPointCount(n));
    }
    Ok(unit_gauss(n))
}

/// Triangle rule exact for bivariate polynomials of total degree `degree`.
pub fn triangle_rule(degree: usize) -> Result<TriangleRule, QuadratureError> {
    if !(1..=MAX_TRIANGLE_DEGREE).contains(&degree) {
        return Err(QuadratureError::UnsupportedDegree(degree));
    }
    Ok(collapsed_rule(degree))
}

/// Collapsed Gauss product rule; the `(1 − s)` Jacobian costs one extra degree.
fn collapsed_rule(degree: usize) -> TriangleRule {
    let n = (degree + 2).div_ceil(2);
    let g = unit_gauss(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&s, &ws) in g.params.iter().zip(&g.weights) {
        for (&t, &wt) in g.params.iter().zip(&g.weights) {
            let xi = s;
            let eta = (1.0 - s) * t;
            points.push([1.0 - xi - eta, xi, eta]);
            weights.push(2.0 * ws * wt * (1.0 - s));
        }
    }
    let has_negative_weights = weights.iter().any(|&w| w < 0.0);
    TriangleRule {
        points,
        weights,
        degree,
        has_negative_weights,
    }
}

/// `|T| Σ_q w_q f(x_q)` on triangle `t` of `mesh`.
pub fn integrate_triangle(
    mesh: &Mesh,
    t: usize,
    rule: &TriangleRule,
    f: impl Fn(Point) -> f64,
) -> f64 {
    let v = mesh.triangle_vertices(t);
    let area = mesh.area(t);
    area * rule
        .map_points(&v)
        .zip(&rule.weights)
        .map(|(x, &w)| w * f(x))
        .sum::<f64>()
}

/// Exact value of `∫_T λ_1^a λ_2^b λ_3^c` for a triangle of the given area.
pub fn barycentric_monomial_integral(area: f64, m: [u32; 3]) -> f64 {
    let fact = |k: u32| (1..=k).map(|i| i as f64).product::<f64>();
    2.0 * area * fact(m[0]) * fact(m[1]) * fact(m[2]) / fact(m[0] + m[1] + m[2] + 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_rule() {
        let r = edge_gauss(1).unwrap();
        assert_eq!(r.params, vec![0.5]);
        assert_eq!(r.weights, vec![1.0]);
    }

    #[test]
    fn two_point_rule_parameters() {
        let r = edge_gauss(2).unwrap();
        let s3 = 3f64.sqrt();
        assert!((r.params[0] - (3.0 - s3) / 6.0).abs() < 1e-15);
        assert!((r.params[1] - (3.0 + s3) / 6.0).abs() < 1e-15);
        assert!((r.integrate(|s| s.powi(3)) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn unsupported_sizes() {
        assert_eq!(
            edge_gauss(0),
            Err(QuadratureError::UnsupportedPointCount(0))
        );
        assert_eq!(
            edge_gauss(7),
            Err(QuadratureError::UnsupportedPointCount(7))
        );
        assert_eq!(
            triangle_rule(0).unwrap_err(),
            QuadratureError::UnsupportedDegree(0)
        );
        assert_eq!(
            triangle_rule(21).unwrap_err(),
            QuadratureError::UnsupportedDegree(21)
        );
    }

    #[test]
    fn edge_rules_exact_and_symmetric() {
        for n in 1..=MAX_EDGE_POINTS {
            let r = edge_gauss(n).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for k in 0..=(2 * n - 1) {
                let exact = 1.0 / (k as f64 + 1.0);
                let got = r.integrate(|s| s.powi(k as i32));
                assert!((got - exact).abs() <= 1e-13 * exact, "n={n} k={k}");
            }
            for i in 0..n {
                assert!((r.params[i] + r.params[n - 1 - i] - 1.0).abs() < 1e-15);
                assert!((r.weights[i] - r.weights[n - 1 - i]).abs() < 1e-15);
                assert!(r.params[i] > 0.0 && r.params[i] < 1.0);
            }
        }
    }

    #[test]
    fn triangle_rules_exact_on_barycentric_monomials() {
        for degree in 1..=MAX_TRIANGLE_DEGREE {
            let rule = triangle_rule(degree).unwrap();
            assert!(!rule.has_negative_weights);
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for p in &rule.points {
                assert!(p.iter().all(|&b| (-1e-15..=1.0 + 1e-15).contains(&b)));
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let c = degree as u32 - a - b;
                    let exact = barycentric_monomial_integral(1.0, [a, b, c]);
                    let got: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| {
                            w * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32)
                        })
                        .sum();
                    assert!(
                        (got - exact).abs() <= 1e-12 * exact,
                        "degree {degree} m=({a},{b},{c})"
                    );
                }
            }
        }
    }

    #[test]
    fn known_barycentric_integrals() {
        let area = 0.37;
        assert!((barycentric_monomial_integral(area, [1, 0, 0]) - area / 3.0).abs() < 1e-16);
        assert!((barycentric_monomial_integral(area, [1, 1, 1]) - area / 60.0).abs() < 1e-16);
        assert!((barycentric_monomial_integral(area, [1, 1, 0]) - area / 12.0).abs() < 1e-16);
    }

    #[test]
    fn gauss_legendre_large_n() {
        let (x, w) = gauss_legendre(12);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert!((int - 2.0 / 23.0).abs() < 1e-14);
    }
}
