use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use super::local::{poly_dim, rt_dim, span_eval, LocalRtBasis, MAX_DEGREE};
use super::{
    bary_monomial, barycentric, divergence_moments, lattice, lattice_basis, reference_gram_inverse,
    DofMap, ScalarField, VectorField,
};
use crate::error::SpaceError;
use crate::mesh::Mesh;
use crate::Point;

/// Barycentric slack allowed when checking that a point lies in a triangle.
const INSIDE_TOL: f64 = 1e-10;

fn check_inside(mesh: &Mesh, t: usize, x: Point) -> Result<[f64; 3], SpaceError> {
    if t >= mesh.num_triangles() {
        return Err(SpaceError::Index(format!("triangle {t}")));
    }
    let b = barycentric(&mesh.triangle_vertices(t), x);
    if b.iter().any(|&c| c < -INSIDE_TOL) {
        return Err(SpaceError::OutsideTriangle { tri: t, point: x });
    }
    Ok(b)
}

/// A member of the global RT_r space.
///
/// Besides the global coefficients the field keeps, per triangle, the
/// coefficients of its restriction in the scaled spanning set, so evaluation
/// does not need the dual basis.
#[derive(Debug, Clone)]
pub struct RtField {
    mesh: Arc<Mesh>,
    dofs: DofMap,
    coeffs: Vec<f64>,
    frames: Vec<(Point, f64)>,
    span: Vec<f64>,
}

impl RtField {
    pub fn new(mesh: Arc<Mesh>, r: usize, coeffs: Vec<f64>) -> Result<Self, SpaceError> {
        let dofs = DofMap::new(&mesh, r)?;
        if coeffs.len() != dofs.total() {
            return Err(SpaceError::Index(format!(
                "{} coefficients for {} DOFs",
                coeffs.len(),
                dofs.total()
            )));
        }
        let n = rt_dim(r);
        let per_tri: Vec<Result<((Point, f64), Vec<f64>), SpaceError>> = (0..mesh.num_triangles())
            .into_par_iter()
            .map(|t| {
                let g = mesh.geometry(t);
                let basis = LocalRtBasis::new(&g, r).map_err(|e| match e {
                    SpaceError::Degenerate { condition, .. } => {
                        SpaceError::Degenerate { tri: t, condition }
                    }
                    other => other,
                })?;
                let local: Vec<f64> = dofs
                    .local_to_global(&mesh, t)
                    .iter()
                    .map(|&(i, s)| s * coeffs[i])
                    .collect();
                Ok((basis.frame(), basis.span_coefficients(&local)))
            })
            .collect();
        let mut frames = Vec::with_capacity(mesh.num_triangles());
        let mut span = Vec::with_capacity(n * mesh.num_triangles());
        for item in per_tri {
            let (f, s) = item?;
            frames.push(f);
            span.extend(s);
        }
        Ok(RtField {
            mesh,
            dofs,
            coeffs,
            frames,
            span,
        })
    }

    pub fn zeros(mesh: Arc<Mesh>, r: usize) -> Result<Self, SpaceError> {
        let n = DofMap::new(&mesh, r)?.total();
        Self::new(mesh, r, vec![0.0; n])
    }

    pub fn degree(&self) -> usize {
        self.dofs.degree()
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn dof_map(&self) -> &DofMap {
        &self.dofs
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Signed coefficients of the restriction to `t` in the local nodal basis.
    pub fn local_coefficients(&self, t: usize) -> Vec<f64> {
        self.dofs
            .local_to_global(&self.mesh, t)
            .iter()
            .map(|&(i, s)| s * self.coeffs[i])
            .collect()
    }

    pub fn eval(&self, t: usize, x: Point) -> Result<Point, SpaceError> {
        check_inside(&self.mesh, t, x)?;
        Ok(self.value_and_div(t, x).0)
    }

    pub fn eval_div(&self, t: usize, x: Point) -> Result<f64, SpaceError> {
        check_inside(&self.mesh, t, x)?;
        Ok(self.value_and_div(t, x).1)
    }

    /// Value and divergence without the containment check.
    pub fn value_and_div(&self, t: usize, x: Point) -> (Point, f64) {
        let r = self.degree();
        let n = rt_dim(r);
        let mut sv = [[0.0; 2]; rt_dim(MAX_DEGREE)];
        let mut sd = [0.0; rt_dim(MAX_DEGREE)];
        let (c, h) = self.frames[t];
        span_eval(r, c, h, x, &mut sv[..n], &mut sd[..n]);
        let a = &self.span[t * n..(t + 1) * n];
        let mut v = [0.0; 2];
        let mut d = 0.0;
        for s in 0..n {
            v[0] += a[s] * sv[s][0];
            v[1] += a[s] * sv[s][1];
            d += a[s] * sd[s];
        }
        (v, d)
    }

    /// The divergence as a scalar field.
    pub fn divergence(&self) -> impl ScalarField + '_ {
        Divergence(self)
    }

    /// The divergence as a [`PiecewiseScalar`], computed from the DOFs through
    /// `(div q, v) = Σ_k ∫_{e_k} q·n v − ∫_T q·∇v` for `v ∈ P_r`.
    ///
    /// Both integrals are exact in terms of the edge point values and interior
    /// moments, so this avoids the conditioning of the local dual basis.
    pub fn divergence_projection(&self) -> PiecewiseScalar {
        let r = self.degree();
        let nb = poly_dim(r);
        let ginv = reference_gram_inverse(r);
        let mesh = &self.mesh;
        let coeffs: Vec<f64> = (0..mesh.num_triangles())
            .into_par_iter()
            .flat_map_iter(|t| {
                let g = mesh.geometry(t);
                let d = DVector::from_column_slice(&self.local_coefficients(t));
                let b = &ginv * (divergence_moments(&g, r) * d) / g.area;
                (0..nb).map(move |i| b[i])
            })
            .collect();
        PiecewiseScalar::new(self.mesh.clone(), r, coeffs).expect("sizes match")
    }
}

struct Divergence<'a>(&'a RtField);

impl ScalarField for Divergence<'_> {
    fn value(&self, t: usize, x: Point) -> f64 {
        self.0.value_and_div(t, x).1
    }
}

impl VectorField for RtField {
    fn value(&self, t: usize, x: Point) -> Point {
        self.value_and_div(t, x).0
    }
}

/// Discontinuous piecewise polynomial of degree `r` in the barycentric monomial
/// basis `λ^α`, `|α| = r`.
#[derive(Debug, Clone)]
pub struct PiecewiseScalar {
    mesh: Arc<Mesh>,
    r: usize,
    basis: Vec<[usize; 3]>,
    coeffs: Vec<f64>,
}

impl PiecewiseScalar {
    pub fn new(mesh: Arc<Mesh>, r: usize, coeffs: Vec<f64>) -> Result<Self, SpaceError> {
        let basis = lattice(r);
        if coeffs.len() != basis.len() * mesh.num_triangles() {
            return Err(SpaceError::Index(format!(
                "{} coefficients for {} triangles of degree {r}",
                coeffs.len(),
                mesh.num_triangles()
            )));
        }
        Ok(PiecewiseScalar {
            mesh,
            r,
            basis,
            coeffs,
        })
    }

    pub fn degree(&self) -> usize {
        self.r
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Number of coefficients per triangle, `(r+1)(r+2)/2`.
    pub fn local_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn local_coefficients(&self, t: usize) -> &[f64] {
        let n = self.local_dim();
        &self.coeffs[t * n..(t + 1) * n]
    }

    /// Basis multi-indices `α`, matching the coefficient order.
    pub fn basis(&self) -> &[[usize; 3]] {
        &self.basis
    }

    pub fn eval(&self, t: usize, x: Point) -> Result<f64, SpaceError> {
        let b = check_inside(&self.mesh, t, x)?;
        Ok(self.eval_bary(t, b))
    }

    pub fn eval_bary(&self, t: usize, b: [f64; 3]) -> f64 {
        self.local_coefficients(t)
            .iter()
            .zip(&self.basis)
            .map(|(c, a)| c * bary_monomial(*a, b))
            .sum()
    }
}

impl ScalarField for PiecewiseScalar {
    fn value(&self, t: usize, x: Point) -> f64 {
        self.eval_bary(t, barycentric(&self.mesh.triangle_vertices(t), x))
    }
}

/// A node of a [`LagrangeVecField`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LagrangeNode {
    Vertex(usize),
    /// Node `index` (0-based) of the interior edge nodes, which sit at
    /// parameters `(index+1)/k` along the global edge orientation.
    Edge {
        edge: usize,
        index: usize,
    },
    /// Interior lattice node of a triangle, with its barycentric coordinates.
    Interior {
        tri: usize,
        bary: [f64; 3],
    },
}

/// Continuous piecewise polynomial vector field of degree `k ≥ 1`.
#[derive(Debug, Clone)]
pub struct LagrangeVecField {
    mesh: Arc<Mesh>,
    k: usize,
    lattice: Vec<[usize; 3]>,
    interior: Vec<[usize; 3]>,
    values: Vec<Point>,
}

impl LagrangeVecField {
    pub fn new(mesh: Arc<Mesh>, k: usize, values: Vec<Point>) -> Result<Self, SpaceError> {
        if k == 0 {
            return Err(SpaceError::UnsupportedDegree(0));
        }
        let n = Self::node_count(&mesh, k);
        if values.len() != n {
            return Err(SpaceError::Index(format!(
                "{} nodal values for {n} nodes",
                values.len()
            )));
        }
        let lattice = lattice(k);
        let interior = lattice
            .iter()
            .copied()
            .filter(|a| a.iter().all(|&x| x > 0))
            .collect();
        Ok(LagrangeVecField {
            mesh,
            k,
            lattice,
            interior,
            values,
        })
    }

    /// Nodal interpolant of a continuous field.
    pub fn interpolate(
        mesh: Arc<Mesh>,
        k: usize,
        f: impl Fn(Point) -> Point,
    ) -> Result<Self, SpaceError> {
        let values = Self::nodes(&mesh, k).iter().map(|&(_, x)| f(x)).collect();
        Self::new(mesh, k, values)
    }

    pub fn node_count(mesh: &Mesh, k: usize) -> usize {
        mesh.num_vertices()
            + mesh.num_edges() * (k - 1)
            + mesh.num_triangles() * (k - 1) * k.saturating_sub(2) / 2
    }

    /// All nodes with their positions, in global node order.
    pub fn nodes(mesh: &Mesh, k: usize) -> Vec<(LagrangeNode, Point)> {
        let mut out = Vec::with_capacity(Self::node_count(mesh, k));
        for v in 0..mesh.num_vertices() {
            out.push((LagrangeNode::Vertex(v), mesh.vertex(v)));
        }
        for e in 0..mesh.num_edges() {
            for i in 0..k - 1 {
                out.push((
                    LagrangeNode::Edge { edge: e, index: i },
                    mesh.edge_point(e, (i + 1) as f64 / k as f64),
                ));
            }
        }
        let interior: Vec<[usize; 3]> = lattice(k)
            .into_iter()
            .filter(|a| a.iter().all(|&x| x > 0))
            .collect();
        for t in 0..mesh.num_triangles() {
            let g = mesh.geometry(t);
            for a in &interior {
                let b = a.map(|x| x as f64 / k as f64);
                out.push((LagrangeNode::Interior { tri: t, bary: b }, g.point(b)));
            }
        }
        out
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[Point] {
        &self.values
    }

    /// Global node index of lattice node `α` of triangle `t`.
    fn node_index(&self, t: usize, a: [usize; 3]) -> usize {
        let k = self.k;
        let tri = self.mesh.triangle(t);
        let nonzero = a.iter().filter(|&&x| x > 0).count();
        match nonzero {
            1 => tri[a.iter().position(|&x| x > 0).expect("one nonzero")],
            2 => {
                let z = a.iter().position(|&x| x == 0).expect("one zero");
                let e = self.mesh.triangle_edges(t)[z];
                let steps = a[(z + 2) % 3];
                let along = if self.mesh.local_edge_forward(t, z) {
                    steps
                } else {
                    k - steps
                };
                self.mesh.num_vertices() + e * (k - 1) + along - 1
            }
            _ => {
                let i = self
                    .interior
                    .iter()
                    .position(|x| *x == a)
                    .expect("interior node");
                self.mesh.num_vertices()
                    + self.mesh.num_edges() * (k - 1)
                    + t * self.interior.len()
                    + i
            }
        }
    }

    pub fn eval(&self, t: usize, x: Point) -> Result<Point, SpaceError> {
        let b = check_inside(&self.mesh, t, x)?;
        Ok(self.eval_bary(t, b))
    }

    pub fn eval_bary(&self, t: usize, b: [f64; 3]) -> Point {
        let mut v = [0.0; 2];
        for &a in &self.lattice {
            let w = lattice_basis(self.k, a, b);
            let n = self.values[self.node_index(t, a)];
            v[0] += w * n[0];
            v[1] += w * n[1];
        }
        v
    }
}

impl VectorField for LagrangeVecField {
    fn value(&self, t: usize, x: Point) -> Point {
        self.eval_bary(t, barycentric(&self.mesh.triangle_vertices(t), x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square_delaunay;
    use crate::spaces::interpolate_rt;

    fn mesh() -> Arc<Mesh> {
        Arc::new(unit_square_delaunay(86, 0).unwrap())
    }

    #[test]
    fn zero_field_is_zero() {
        let f = RtField::zeros(mesh(), 2).unwrap();
        assert_eq!(f.eval(3, f.mesh().centroid(3)).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn position_field_reproduced() {
        let m = mesh();
        for r in 0..=3 {
            let f = interpolate_rt(&|x: Point| x, &m, r).unwrap();
            for t in [0, 40, 85] {
                let x = m.centroid(t);
                let v = f.eval(t, x).unwrap();
                assert!((v[0] - x[0]).abs() < 1e-12 && (v[1] - x[1]).abs() < 1e-12);
                assert!((f.eval_div(t, x).unwrap() - 2.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn divergence_projection_matches_pointwise_divergence() {
        let m = mesh();
        let q = |x: Point| {
            [
                x[0].sin() * x[1].powi(3),
                (x[0] * x[1]).cos() + x[1].powi(2),
            ]
        };
        for r in 0..=3 {
            let f = interpolate_rt(&q, &m, r).unwrap();
            let d = f.divergence_projection();
            for t in [0, 17, 85] {
                let g = m.geometry(t);
                for b in [[1.0 / 3.0; 3], [0.6, 0.3, 0.1], [0.05, 0.05, 0.9]] {
                    let x = g.point(b);
                    let a = f.eval_div(t, x).unwrap();
                    assert!(
                        (d.value(t, x) - a).abs() < 1e-9 * (1.0 + a.abs()),
                        "r={r} t={t}"
                    );
                }
            }
        }
    }

    #[test]
    fn outside_point_rejected() {
        let f = RtField::zeros(mesh(), 0).unwrap();
        assert!(matches!(
            f.eval(0, [5.0, 5.0]),
            Err(SpaceError::OutsideTriangle { .. })
        ));
    }

    #[test]
    fn lagrange_field_continuous_and_exact() {
        let m = mesh();
        for k in 1..=4 {
            let f = |x: Point| [x[0].powi(k as i32) - x[1], x[0] * x[1].powi(k as i32 - 1)];
            let l = LagrangeVecField::interpolate(m.clone(), k, f).unwrap();
            for t in 0..m.num_triangles() {
                let x = m.centroid(t);
                let v = l.eval(t, x).unwrap();
                let e = f(x);
                assert!(
                    (v[0] - e[0]).abs() < 1e-12 && (v[1] - e[1]).abs() < 1e-12,
                    "k={k}"
                );
            }
            for e in m.interior_edges() {
                let (t0, t1) = m.edge_triangles(e);
                let x = m.edge_point(e, 0.3);
                let a = l.eval(t0, x).unwrap();
                let b = l.eval(t1.unwrap(), x).unwrap();
                assert!((a[0] - b[0]).abs() < 1e-13 && (a[1] - b[1]).abs() < 1e-13);
            }
        }
    }
}
