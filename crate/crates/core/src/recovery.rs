//! Least-squares patch recovery of RT fluxes.
//!
//! For each vertex `z` a vector polynomial `q_z ∈ P_{r+1}²` is fitted to the
//! degrees of freedom of `p_h` on the patch around `z`: every edge point value
//! `q(g_j)·n_e` and every interior moment `(1/|T|)∫ q_m λ_l` contributes one
//! row. The polynomial is written in monomials of `(x − z)/h_z`, with
//! `h_z = |ω_z|^{1/2}`, which keeps the rows well scaled on graded meshes.
//! The vertex polynomials are then blended into a continuous field of degree
//! `r+1`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::RecoveryError;
use crate::mesh::{Mesh, Patch};
use crate::quadrature::triangle_rule;
use crate::spaces::{
    dof_rule, lattice, lattice_basis, poly_dim, DofMap, LagrangeNode, LagrangeVecField, RtField,
};
use crate::Point;

/// Smallest accepted `σ_min / σ_max` of the scaled row matrix.
pub const RANK_TOL: f64 = 1e-8;
/// Minimum patch size at boundary vertices.
pub const MIN_BOUNDARY_TRIANGLES: usize = 8;

/// Sufficient condition for a unique patch fit at `z`.
///
/// For `r = 0` the patch needs at least five triangles and, for every edge at
/// `z` shared by two patch triangles, the two angles at `z` of those triangles
/// must sum to at most π. For `r = 1` four triangles suffice. Higher degrees
/// have no such criterion; use the singular values of [`PatchLs`] instead.
pub fn check_uniqueness(mesh: &Mesh, z: usize, r: usize) -> Result<bool, RecoveryError> {
    let star = mesh.vertex_triangles(z);
    match r {
        0 => {
            if star.len() < 5 {
                return Ok(false);
            }
            let angle_at = |t: usize| {
                let k = mesh
                    .triangle(t)
                    .iter()
                    .position(|&v| v == z)
                    .expect("z in its star");
                mesh.geometry(t).angles[k]
            };
            for &t in star {
                for &e in &mesh.triangle_edges(t) {
                    if !mesh.edge(e).contains(&z) {
                        continue;
                    }
                    if let (a, Some(b)) = mesh.edge_triangles(e) {
                        if a == t && angle_at(a) + angle_at(b) > PI + 1e-12 {
                            return Ok(false);
                        }
                    }
                }
            }
            Ok(true)
        }
        1 => Ok(star.len() >= 4),
        _ => Err(RecoveryError::CriterionUnavailable(r)),
    }
}

/// Monomials `x̂^{d−i} ŷ^i` of total degree ≤ `k`, in that order.
fn monomials(k: usize, xh: f64, yh: f64, out: &mut [f64]) {
    let mut s = 0;
    for d in 0..=k {
        for i in 0..=d {
            out[s] = xh.powi((d - i) as i32) * yh.powi(i as i32);
            s += 1;
        }
    }
}

/// A vector polynomial in the scaled monomials around `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchPolynomial {
    pub center: Point,
    pub scale: f64,
    pub degree: usize,
    /// First component coefficients, then second.
    pub coeffs: Vec<f64>,
}

impl PatchPolynomial {
    pub fn eval(&self, x: Point) -> Point {
        let n = poly_dim(self.degree);
        let mut m = vec![0.0; n];
        monomials(
            self.degree,
            (x[0] - self.center[0]) / self.scale,
            (x[1] - self.center[1]) / self.scale,
            &mut m,
        );
        let a: f64 = m.iter().zip(&self.coeffs[..n]).map(|(m, c)| m * c).sum();
        let b: f64 = m.iter().zip(&self.coeffs[n..]).map(|(m, c)| m * c).sum();
        [a, b]
    }
}

/// The scaled least-squares problem at one vertex.
#[derive(Debug, Clone)]
pub struct PatchLs {
    pub vertex: usize,
    pub patch: Patch,
    pub center: Point,
    pub scale: f64,
    pub degree: usize,
    /// `Â_z`: one row per DOF functional of the patch, one column per basis polynomial.
    pub rows: DMatrix<f64>,
    /// `d_z`: the same functionals applied to `p_h`.
    pub data: DVector<f64>,
    /// Singular values of `Â_z`, in decreasing order.
    pub singular_values: Vec<f64>,
}

impl PatchLs {
    /// Assembles the problem for a given patch and scale.
    pub fn assemble(mesh: &Mesh, z: usize, p_h: &RtField, patch: Patch, scale: f64) -> PatchLs {
        let r = p_h.degree();
        let k = r + 1;
        let np = poly_dim(k);
        let dofs: &DofMap = p_h.dof_map();
        let coeffs = p_h.coefficients();
        let center = mesh.vertex(z);
        let n_rows = (r + 1) * patch.edges.len() + r * (r + 1) * patch.triangles.len();
        let mut rows = DMatrix::<f64>::zeros(n_rows, 2 * np);
        let mut data = DVector::<f64>::zeros(n_rows);
        let mut m = vec![0.0; np];
        let gauss = dof_rule(r);
        let mut row = 0;
        for &e in &patch.edges {
            let n = mesh.edge_normal(e);
            for (j, &s) in gauss.params.iter().enumerate() {
                let x = mesh.edge_point(e, s);
                monomials(
                    k,
                    (x[0] - center[0]) / scale,
                    (x[1] - center[1]) / scale,
                    &mut m,
                );
                for c in 0..np {
                    rows[(row, c)] = m[c] * n[0];
                    rows[(row, np + c)] = m[c] * n[1];
                }
                data[row] = coeffs[dofs.edge_dof(e, j)];
                row += 1;
            }
        }
        if r > 0 {
            let nodes = lattice(r - 1);
            let rule = triangle_rule(2 * r).expect("degree within table");
            for &t in &patch.triangles {
                let g = mesh.geometry(t);
                let base = row;
                for (p, w) in rule.points.iter().zip(&rule.weights) {
                    let x = g.point(*p);
                    monomials(
                        k,
                        (x[0] - center[0]) / scale,
                        (x[1] - center[1]) / scale,
                        &mut m,
                    );
                    for (l, &alpha) in nodes.iter().enumerate() {
                        let lw = w * lattice_basis(r - 1, alpha, *p);
                        for c in 0..np {
                            rows[(base + l, c)] += lw * m[c];
                            rows[(base + nodes.len() + l, np + c)] += lw * m[c];
                        }
                    }
                }
                for comp in 0..2 {
                    for l in 0..nodes.len() {
                        data[row] = coeffs[dofs.interior_dof(t, l, comp)];
                        row += 1;
                    }
                }
            }
        }
        let singular_values = {
            let mut s: Vec<f64> = if rows.nrows() >= rows.ncols() {
                rows.clone()
                    .qr()
                    .r()
                    .singular_values()
                    .iter()
                    .copied()
                    .collect()
            } else {
                rows.singular_values().iter().copied().collect()
            };
            s.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
            s
        };
        PatchLs {
            vertex: z,
            patch,
            center,
            scale,
            degree: k,
            rows,
            data,
            singular_values,
        }
    }

    /// `σ_min / σ_max`, zero when the system is underdetermined.
    pub fn sigma_ratio(&self) -> f64 {
        if self.rows.nrows() < self.rows.ncols() {
            return 0.0;
        }
        match (self.singular_values.first(), self.singular_values.last()) {
            (Some(&max), Some(&min)) if max > 0.0 => min / max,
            _ => 0.0,
        }
    }

    pub fn is_full_rank(&self) -> bool {
        self.sigma_ratio() >= RANK_TOL
    }
}

/// Builds the patch problem at `z`, enlarging the star of `z` by whole layers
/// until the rows have full rank (and, at boundary vertices, the patch holds at
/// least [`MIN_BOUNDARY_TRIANGLES`] triangles).
pub fn build_patch_ls(mesh: &Mesh, z: usize, p_h: &RtField) -> Result<PatchLs, RecoveryError> {
    let boundary = mesh.is_boundary_vertex(z);
    let mut result = None;
    mesh.vertex_patch_until(z, |patch| {
        if boundary && patch.triangles.len() < MIN_BOUNDARY_TRIANGLES {
            return false;
        }
        let ls = PatchLs::assemble(mesh, z, p_h, patch.clone(), patch.scale);
        let ok = ls.is_full_rank();
        result = Some(ls);
        ok
    });
    match result {
        Some(ls) if ls.is_full_rank() => Ok(ls),
        Some(ls) => Err(RecoveryError::RankDeficient {
            vertex: z,
            ratio: ls.sigma_ratio(),
        }),
        None => {
            // the whole mesh is smaller than the boundary minimum
            let patch = mesh.vertex_patch(z, mesh.num_triangles());
            let scale = patch.scale;
            let ls = PatchLs::assemble(mesh, z, p_h, patch, scale);
            if ls.is_full_rank() {
                Ok(ls)
            } else {
                Err(RecoveryError::RankDeficient {
                    vertex: z,
                    ratio: ls.sigma_ratio(),
                })
            }
        }
    }
}

/// Least-squares solution through a QR factorization of `Â_z`.
pub fn solve_patch_ls(ls: &PatchLs) -> Result<PatchPolynomial, RecoveryError> {
    if !ls.is_full_rank() {
        return Err(RecoveryError::RankDeficient {
            vertex: ls.vertex,
            ratio: ls.sigma_ratio(),
        });
    }
    let qr = ls.rows.clone().qr();
    let qtd = qr.q().transpose() * &ls.data;
    let c = qr
        .r()
        .solve_upper_triangular(&qtd)
        .ok_or(RecoveryError::RankDeficient {
            vertex: ls.vertex,
            ratio: ls.sigma_ratio(),
        })?;
    Ok(PatchPolynomial {
        center: ls.center,
        scale: ls.scale,
        degree: ls.degree,
        coeffs: c.iter().copied().collect(),
    })
}

/// The vertex polynomials `q_z` for every vertex of the mesh.
pub fn vertex_polynomials(p_h: &RtField) -> Result<Vec<PatchPolynomial>, RecoveryError> {
    let mesh = p_h.mesh();
    (0..mesh.num_vertices())
        .into_par_iter()
        .map(|z| build_patch_ls(mesh, z, p_h).and_then(|ls| solve_patch_ls(&ls)))
        .collect()
}

/// The recovered field `R_h^r p_h`, continuous and of degree `r+1`.
pub fn recover(p_h: &RtField) -> Result<LagrangeVecField, RecoveryError> {
    let polys = vertex_polynomials(p_h)?;
    blend(p_h.mesh(), p_h.degree() + 1, &polys)
}

/// Blends vertex polynomials into nodal values: vertex nodes take `q_z(z)`,
/// edge nodes the affine combination of the two endpoint polynomials, and
/// interior nodes the barycentric combination of the three vertex polynomials.
pub fn blend(
    mesh: &Arc<Mesh>,
    k: usize,
    polys: &[PatchPolynomial],
) -> Result<LagrangeVecField, RecoveryError> {
    let nodes = LagrangeVecField::nodes(mesh, k);
    let values: Vec<Point> = nodes
        .par_iter()
        .map(|&(node, x)| match node {
            LagrangeNode::Vertex(v) => polys[v].eval(x),
            LagrangeNode::Edge { edge, index } => {
                let [a, b] = mesh.edge(edge);
                let s = (index + 1) as f64 / k as f64;
                let qa = polys[a].eval(x);
                let qb = polys[b].eval(x);
                [(1.0 - s) * qa[0] + s * qb[0], (1.0 - s) * qa[1] + s * qb[1]]
            }
            LagrangeNode::Interior { tri, bary } => {
                let mut v = [0.0; 2];
                for (i, &z) in mesh.triangle(tri).iter().enumerate() {
                    let q = polys[z].eval(x);
                    v[0] += bary[i] * q[0];
                    v[1] += bary[i] * q[1];
                }
                v
            }
        })
        .collect();
    Ok(LagrangeVecField::new(mesh.clone(), k, values)?)
}
