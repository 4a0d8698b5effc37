//! Discrete spaces: RT_r fluxes, discontinuous scalars and continuous vector
//! Lagrange fields, with the canonical interpolant and the L² projection.

mod fields;
mod local;

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::SpaceError;
use crate::mesh::Mesh;
use crate::quadrature::{
    barycentric_monomial_integral, triangle_rule, unit_gauss, EdgeRule, MAX_TRIANGLE_DEGREE,
};
use crate::Point;

pub use fields::{LagrangeNode, LagrangeVecField, PiecewiseScalar, RtField};
pub(crate) use local::{check_degree, divergence_moments, dof_rule, edge_test_function};
pub use local::{lattice, lattice_basis, local_dofs, poly_dim, rt_dim, LocalRtBasis, MAX_DEGREE};

/// A vector field that may be discontinuous across triangles; `t` names the
/// triangle whose closure contains `x`.
pub trait VectorField: Sync {
    fn value(&self, t: usize, x: Point) -> Point;
}

/// Scalar counterpart of [`VectorField`].
pub trait ScalarField: Sync {
    fn value(&self, t: usize, x: Point) -> f64;
}

impl<F: Fn(Point) -> Point + Sync> VectorField for F {
    fn value(&self, _t: usize, x: Point) -> Point {
        self(x)
    }
}

impl<F: Fn(Point) -> f64 + Sync> ScalarField for F {
    fn value(&self, _t: usize, x: Point) -> f64 {
        self(x)
    }
}

/// Global numbering of RT_r degrees of freedom.
///
/// Edge `e` owns DOFs `e(r+1) .. e(r+1)+r`, one per Gauss point ordered along
/// the global edge orientation and measured against the global normal. The
/// `r(r+1)` interior DOFs of each triangle follow all edge DOFs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMap {
    r: usize,
    num_edges: usize,
    num_triangles: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh, r: usize) -> Result<Self, SpaceError> {
        check_degree(r)?;
        Ok(DofMap {
            r,
            num_edges: mesh.num_edges(),
            num_triangles: mesh.num_triangles(),
        })
    }

    pub fn degree(&self) -> usize {
        self.r
    }

    pub fn per_edge(&self) -> usize {
        self.r + 1
    }

    pub fn per_triangle(&self) -> usize {
        self.r * (self.r + 1)
    }

    pub fn num_edge_dofs(&self) -> usize {
        self.num_edges * self.per_edge()
    }

    pub fn total(&self) -> usize {
        self.num_edge_dofs() + self.num_triangles * self.per_triangle()
    }

    pub fn edge_dof(&self, e: usize, j: usize) -> usize {
        e * self.per_edge() + j
    }

    /// Interior DOF for Lagrange index `l` and component `m`.
    pub fn interior_dof(&self, t: usize, l: usize, m: usize) -> usize {
        self.num_edge_dofs() + t * self.per_triangle() + m * (self.per_triangle() / 2) + l
    }

    /// Global index and sign of every local DOF of `t`, in local order.
    pub fn local_to_global(&self, mesh: &Mesh, t: usize) -> Vec<(usize, f64)> {
        let r = self.r;
        let mut out = Vec::with_capacity(rt_dim(r));
        let te = mesh.triangle_edges(t);
        for (k, &e) in te.iter().enumerate() {
            let forward = mesh.local_edge_forward(t, k);
            for j in 0..=r {
                if forward {
                    out.push((self.edge_dof(e, j), 1.0));
                } else {
                    out.push((self.edge_dof(e, r - j), -1.0));
                }
            }
        }
        let base = self.num_edge_dofs() + t * self.per_triangle();
        out.extend((0..self.per_triangle()).map(|i| (base + i, 1.0)));
        out
    }
}

/// Edge points used for moment DOFs of general fields.
fn moment_points(r: usize) -> usize {
    r + 8
}

/// Triangle rule degree used when sampling general fields.
fn sampling_degree(r: usize) -> usize {
    (2 * r + 6).min(MAX_TRIANGLE_DEGREE)
}

/// `N_e^j(q) = (1/|e|)∫_e q·n_e v_j`, evaluated with an `(r+8)`-point rule.
///
/// For `q·n_e ∈ P_{r+1}(e)` this equals `q(g_j)·n_e`.
pub fn dof_edge(
    q: &(impl VectorField + ?Sized),
    mesh: &Mesh,
    e: usize,
    j: usize,
    r: usize,
) -> Result<f64, SpaceError> {
    check_degree(r)?;
    if e >= mesh.num_edges() || j > r {
        return Err(SpaceError::Index(format!("edge {e}, Gauss index {j}")));
    }
    Ok(edge_moments(q, mesh, e, &dof_rule(r), &unit_gauss(moment_points(r)))[j])
}

fn edge_moments(
    q: &(impl VectorField + ?Sized),
    mesh: &Mesh,
    e: usize,
    dof: &EdgeRule,
    quad: &EdgeRule,
) -> Vec<f64> {
    let t = mesh.edge_triangles(e).0;
    let n = mesh.edge_normal(e);
    let mut out = vec![0.0; dof.len()];
    for (&s, &w) in quad.params.iter().zip(&quad.weights) {
        let v = q.value(t, mesh.edge_point(e, s));
        let qn = w * (v[0] * n[0] + v[1] * n[1]);
        for (j, o) in out.iter_mut().enumerate() {
            *o += qn * edge_test_function(dof, j, s);
        }
    }
    out
}

/// `N_T^{lm}(q) = (1/|T|)∫_T q_m λ_l`.
pub fn dof_interior(
    q: &(impl VectorField + ?Sized),
    mesh: &Mesh,
    t: usize,
    l: usize,
    m: usize,
    r: usize,
) -> Result<f64, SpaceError> {
    check_degree(r)?;
    if r == 0 {
        return Err(SpaceError::NoInteriorDofs);
    }
    let nodes = lattice(r - 1);
    if t >= mesh.num_triangles() || l >= nodes.len() || m > 1 {
        return Err(SpaceError::Index(format!(
            "triangle {t}, Lagrange index {l}, component {m}"
        )));
    }
    let rule = triangle_rule(sampling_degree(r)).expect("degree within table");
    let g = mesh.geometry(t);
    Ok(rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(p, w)| w * q.value(t, g.point(*p))[m] * lattice_basis(r - 1, nodes[l], *p))
        .sum())
}

/// The canonical RT_r interpolant Π_h^r q.
pub fn interpolate_rt(
    q: &(impl VectorField + ?Sized),
    mesh: &Arc<Mesh>,
    r: usize,
) -> Result<RtField, SpaceError> {
    interpolate_rt_with_degree(q, mesh, r, sampling_degree(r))
}

/// [`interpolate_rt`] with an explicit exactness degree for the interior moments.
pub fn interpolate_rt_with_degree(
    q: &(impl VectorField + ?Sized),
    mesh: &Arc<Mesh>,
    r: usize,
    degree: usize,
) -> Result<RtField, SpaceError> {
    let dofs = DofMap::new(mesh, r)?;
    let mut coeffs = vec![0.0; dofs.total()];
    let (edge_part, tri_part) = coeffs.split_at_mut(dofs.num_edge_dofs());
    let dof = dof_rule(r);
    let quad = unit_gauss(moment_points(r));
    edge_part
        .par_chunks_mut(r + 1)
        .enumerate()
        .for_each(|(e, c)| {
            c.copy_from_slice(&edge_moments(q, mesh, e, &dof, &quad));
        });
    if r > 0 {
        let nodes = lattice(r - 1);
        let rule = triangle_rule(degree.clamp(1, MAX_TRIANGLE_DEGREE)).expect("degree clamped");
        tri_part
            .par_chunks_mut(dofs.per_triangle())
            .enumerate()
            .for_each(|(t, c)| {
                let g = mesh.geometry(t);
                let nl = nodes.len();
                c.fill(0.0);
                for (p, w) in rule.points.iter().zip(&rule.weights) {
                    let v = q.value(t, g.point(*p));
                    for (l, &alpha) in nodes.iter().enumerate() {
                        let lw = w * lattice_basis(r - 1, alpha, *p);
                        c[l] += lw * v[0];
                        c[nl + l] += lw * v[1];
                    }
                }
            });
    }
    RtField::new(mesh.clone(), r, coeffs)
}

/// Inverse of the reference Gram matrix of barycentric monomials of degree `r`
/// (the Gram matrix on `T` is `|T|` times the reference one).
pub(crate) fn reference_gram_inverse(r: usize) -> nalgebra::DMatrix<f64> {
    let basis = lattice(r);
    let n = basis.len();
    let g = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        let a = basis[i];
        let b = basis[j];
        barycentric_monomial_integral(
            1.0,
            [
                (a[0] + b[0]) as u32,
                (a[1] + b[1]) as u32,
                (a[2] + b[2]) as u32,
            ],
        )
    });
    g.lu().try_inverse().expect("Gram matrix is SPD")
}

/// Elementwise L² projection P_h^r v.
pub fn project_l2(
    v: &(impl ScalarField + ?Sized),
    mesh: &Arc<Mesh>,
    r: usize,
) -> Result<PiecewiseScalar, SpaceError> {
    project_l2_with_degree(v, mesh, r, sampling_degree(r))
}

/// [`project_l2`] with an explicit quadrature exactness degree.
pub fn project_l2_with_degree(
    v: &(impl ScalarField + ?Sized),
    mesh: &Arc<Mesh>,
    r: usize,
    degree: usize,
) -> Result<PiecewiseScalar, SpaceError> {
    let rule = triangle_rule(degree.clamp(1, MAX_TRIANGLE_DEGREE)).expect("degree clamped");
    let basis = lattice(r);
    let n = basis.len();
    let ginv = reference_gram_inverse(r);
    let mut coeffs = vec![0.0; n * mesh.num_triangles()];
    coeffs.par_chunks_mut(n).enumerate().for_each(|(t, c)| {
        let g = mesh.geometry(t);
        let mut rhs = vec![0.0; n];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let f = w * v.value(t, g.point(*p));
            for (i, a) in basis.iter().enumerate() {
                rhs[i] += f * bary_monomial(*a, *p);
            }
        }
        // rhs is (1/|T|)∫ v λ^a and the Gram matrix is |T| G_ref
        for i in 0..n {
            c[i] = (0..n).map(|j| ginv[(i, j)] * rhs[j]).sum();
        }
    });
    PiecewiseScalar::new(mesh.clone(), r, coeffs)
}

pub fn bary_monomial(a: [usize; 3], b: [f64; 3]) -> f64 {
    b[0].powi(a[0] as i32) * b[1].powi(a[1] as i32) * b[2].powi(a[2] as i32)
}

pub(crate) fn barycentric(v: &[Point; 3], x: Point) -> [f64; 3] {
    let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
    let l1 =
        ((x[0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (x[1] - v[0][1])) / det;
    let l2 =
        ((v[1][0] - v[0][0]) * (x[1] - v[0][1]) - (x[0] - v[0][0]) * (v[1][1] - v[0][1])) / det;
    [1.0 - l1 - l2, l1, l2]
}
