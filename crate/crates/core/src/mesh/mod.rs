//! Triangulations.
//!
//! A [`Mesh`] is immutable once built; refinement returns a new mesh. Local
//! numbering follows the usual convention: local edge `k` of a triangle is the
//! edge opposite local vertex `k`, running from vertex `k+1` to vertex `k+2`
//! (indices mod 3) when the triangle is traversed counterclockwise.
//!
//! Every edge carries a global orientation from its lower to its higher vertex
//! index. The global unit normal is that tangent rotated by −π/2.

mod generate;
mod io;
mod refine;

use std::collections::{BTreeSet, HashMap};

use crate::error::MeshError;
use crate::Point;

pub use generate::{
    slit_square, star_mesh, two_triangle_square, uniform_grid, unit_square_delaunay, SLIT_ANGLE,
};

/// Relative tolerance used to decide that two edges tie for "longest".
const LENGTH_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_tris: Vec<(usize, Option<usize>)>,
    tri_edges: Vec<[usize; 3]>,
    refine_edge: Vec<u8>,
    vertex_tris: Vec<Vec<usize>>,
}

impl Mesh {
    /// Builds a mesh from raw vertices and index triples.
    ///
    /// Clockwise triangles are flipped. The refinement edge of every triangle
    /// is its longest edge, with ties going to the edge whose opposite vertex
    /// has the lowest global index.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let n = vertices.len();
        let mut tris = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i >= n {
                    return Err(MeshError::IndexOutOfRange {
                        tri: t,
                        index: i,
                        count: n,
                    });
                }
            }
            if tri[0] == tri[1] || tri[0] == tri[2] {
                return Err(MeshError::DuplicateVertex {
                    tri: t,
                    vertex: tri[0],
                });
            }
            if tri[1] == tri[2] {
                return Err(MeshError::DuplicateVertex {
                    tri: t,
                    vertex: tri[1],
                });
            }
            let v = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            let area = signed_area(&v);
            let scale = sq_len(sub(v[1], v[0]))
                .max(sq_len(sub(v[2], v[0])))
                .max(sq_len(sub(v[2], v[1])));
            if area.abs() <= 1e-14 * scale || scale == 0.0 {
                return Err(MeshError::ZeroArea { tri: t });
            }
            tris.push(if area > 0.0 {
                *tri
            } else {
                [tri[0], tri[2], tri[1]]
            });
        }
        let refine_edge = tris
            .iter()
            .map(|tri| longest_edge(&vertices, tri))
            .collect();
        Self::from_parts(vertices, tris, refine_edge)
    }

    /// Builds topology for counterclockwise triangles with known refinement edges.
    pub(crate) fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        refine_edge: Vec<u8>,
    ) -> Result<Self, MeshError> {
        let mut index: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 2);
        let mut edges: Vec<[usize; 2]> = Vec::with_capacity(triangles.len() * 2);
        let mut edge_tris: Vec<(usize, Option<usize>)> = Vec::with_capacity(triangles.len() * 2);
        let mut first_forward: Vec<bool> = Vec::with_capacity(triangles.len() * 2);
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0; 3];
            for k in 0..3 {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                let key = (a.min(b), a.max(b));
                let e = match index.get(&key) {
                    Some(&e) => {
                        let (first, second) = edge_tris[e];
                        if second.is_some() {
                            return Err(MeshError::NonManifoldEdge { a: key.0, b: key.1 });
                        }
                        if first_forward[e] == (a < b) {
                            return Err(MeshError::Overlap {
                                first,
                                second: t,
                                a: key.0,
                                b: key.1,
                            });
                        }
                        edge_tris[e].1 = Some(t);
                        e
                    }
                    None => {
                        let e = edges.len();
                        index.insert(key, e);
                        edges.push([key.0, key.1]);
                        edge_tris.push((t, None));
                        first_forward.push(a < b);
                        e
                    }
                };
                te[k] = e;
            }
            tri_edges.push(te);
        }
        let mut vertex_tris = vec![Vec::new(); vertices.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_tris[v].push(t);
            }
        }
        Ok(Mesh {
            vertices,
            triangles,
            edges,
            edge_tris,
            tri_edges,
            refine_edge,
            vertex_tris,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    /// Triangles incident to edge `e`; the second is `None` on the boundary.
    pub fn edge_triangles(&self, e: usize) -> (usize, Option<usize>) {
        self.edge_tris[e]
    }

    /// Global edge indices of triangle `t`, ordered by local edge.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    /// Local index of the refinement edge of `t`.
    pub fn refinement_edge(&self, t: usize) -> usize {
        self.refine_edge[t] as usize
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_tris[v]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_tris[e].1.is_none()
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| self.is_boundary_edge(e))
    }

    pub fn interior_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| !self.is_boundary_edge(e))
    }

    /// True when `v` is an endpoint of a boundary edge.
    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.vertex_tris[v].iter().any(|&t| {
            self.tri_edges[t]
                .iter()
                .any(|&e| self.is_boundary_edge(e) && self.edges[e].contains(&v))
        })
    }

    /// True when local edge `k` of `t`, traversed counterclockwise, runs along
    /// the global orientation (lower to higher vertex index).
    pub fn local_edge_forward(&self, t: usize, k: usize) -> bool {
        let tri = self.triangles[t];
        tri[(k + 1) % 3] < tri[(k + 2) % 3]
    }

    /// `+1` when the global normal of local edge `k` points out of `t`.
    pub fn local_edge_sign(&self, t: usize, k: usize) -> f64 {
        if self.local_edge_forward(t, k) {
            1.0
        } else {
            -1.0
        }
    }

    pub fn triangle_vertices(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(&self.triangle_vertices(t))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let v = self.triangle_vertices(t);
        [
            (v[0][0] + v[1][0] + v[2][0]) / 3.0,
            (v[0][1] + v[1][1] + v[2][1]) / 3.0,
        ]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        sq_len(sub(self.vertices[b], self.vertices[a])).sqrt()
    }

    /// Point at affine parameter `s` along the global orientation of `e`.
    pub fn edge_point(&self, e: usize, s: f64) -> Point {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]
    }

    /// Global unit normal of `e`: the lower-to-higher tangent rotated by −π/2.
    pub fn edge_normal(&self, e: usize) -> Point {
        let [a, b] = self.edges[e];
        let d = sub(self.vertices[b], self.vertices[a]);
        let l = sq_len(d).sqrt();
        [d[1] / l, -d[0] / l]
    }

    pub fn geometry(&self, t: usize) -> TriangleGeometry {
        TriangleGeometry::new(self.triangle_vertices(t))
    }

    /// Mesh size `h = max_T |T|^{1/2}`.
    pub fn h_max(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| self.area(t).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn min_angle(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| {
                self.geometry(t)
                    .angles
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks every structural invariant: positive orientation, edge incidence,
    /// a single closed boundary loop without hanging vertices, and the Euler
    /// relation of a simply connected domain.
    pub fn validate(&self) -> Result<(), MeshError> {
        for t in 0..self.num_triangles() {
            if self.area(t) <= 0.0 {
                return Err(MeshError::ZeroArea { tri: t });
            }
        }
        let mut degree = vec![0usize; self.num_vertices()];
        let mut next: HashMap<usize, usize> = HashMap::new();
        for e in self.boundary_edges() {
            let [a, b] = self.edges[e];
            degree[a] += 1;
            degree[b] += 1;
            let t = self.edge_tris[e].0;
            let k = self.tri_edges[t]
                .iter()
                .position(|&x| x == e)
                .expect("edge belongs to its triangle");
            let tri = self.triangles[t];
            next.insert(tri[(k + 1) % 3], tri[(k + 2) % 3]);
        }
        if let Some(v) = degree.iter().position(|&d| d != 0 && d != 2) {
            return Err(MeshError::NonConforming(format!(
                "vertex {v} touches {} boundary edges (hanging vertex or pinched boundary)",
                degree[v]
            )));
        }
        if let Some((&start, _)) = next.iter().min_by_key(|(k, _)| **k) {
            let mut v = start;
            let mut steps = 0;
            loop {
                v = *next
                    .get(&v)
                    .ok_or_else(|| MeshError::NonConforming("open boundary chain".into()))?;
                steps += 1;
                if v == start {
                    break;
                }
                if steps > next.len() {
                    return Err(MeshError::NonConforming("boundary does not close".into()));
                }
            }
            if steps != next.len() {
                return Err(MeshError::NonConforming(format!(
                    "boundary splits into several loops ({steps} of {} edges in the first)",
                    next.len()
                )));
            }
        }
        let used = self.vertex_tris.iter().filter(|ts| !ts.is_empty()).count();
        let euler = used as i64 - self.num_edges() as i64 + self.num_triangles() as i64;
        if euler != 1 {
            return Err(MeshError::Euler(euler));
        }
        Ok(())
    }

    /// The star of `z` grown by `extra_layers` layers of vertex neighbours.
    pub fn vertex_patch(&self, z: usize, extra_layers: usize) -> Patch {
        let mut tris: BTreeSet<usize> = self.vertex_tris[z].iter().copied().collect();
        for _ in 0..extra_layers {
            tris = self.grow(&tris);
        }
        self.patch_from(PatchCenter::Vertex(z), tris)
    }

    /// Grows the star of `z` one whole layer at a time until `accept` holds or
    /// the patch covers the mesh.
    pub fn vertex_patch_until(&self, z: usize, mut accept: impl FnMut(&Patch) -> bool) -> Patch {
        let mut tris: BTreeSet<usize> = self.vertex_tris[z].iter().copied().collect();
        loop {
            let patch = self.patch_from(PatchCenter::Vertex(z), tris.clone());
            if accept(&patch) || tris.len() == self.num_triangles() {
                return patch;
            }
            tris = self.grow(&tris);
        }
    }

    /// ω_e: the (one or two) triangles sharing `e`.
    pub fn edge_patch(&self, e: usize) -> Patch {
        let (a, b) = self.edge_tris[e];
        let tris = std::iter::once(a).chain(b).collect();
        self.patch_from(PatchCenter::Edge(e), tris)
    }

    /// ω_T: `t` together with every triangle sharing a vertex with it.
    pub fn triangle_patch(&self, t: usize) -> Patch {
        let tris = self.triangles[t]
            .iter()
            .flat_map(|&v| self.vertex_tris[v].iter().copied())
            .collect();
        self.patch_from(PatchCenter::Triangle(t), tris)
    }

    fn grow(&self, tris: &BTreeSet<usize>) -> BTreeSet<usize> {
        let verts: BTreeSet<usize> = tris.iter().flat_map(|&t| self.triangles[t]).collect();
        verts
            .iter()
            .flat_map(|&v| self.vertex_tris[v].iter().copied())
            .collect()
    }

    fn patch_from(&self, center: PatchCenter, tris: BTreeSet<usize>) -> Patch {
        let edges: BTreeSet<usize> = tris.iter().flat_map(|&t| self.tri_edges[t]).collect();
        let vertices: BTreeSet<usize> = tris.iter().flat_map(|&t| self.triangles[t]).collect();
        let area: f64 = tris.iter().map(|&t| self.area(t)).sum();
        Patch {
            center,
            triangles: tris.into_iter().collect(),
            edges: edges.into_iter().collect(),
            vertices: vertices.into_iter().collect(),
            scale: area.sqrt(),
        }
    }

    /// `max_i | |e_i| − |e_i'| |` over the corresponding edge pairs of the two
    /// triangles sharing interior edge `e`, matched by walking each boundary
    /// counterclockwise from `e`.
    pub fn parallelogram_deviation(&self, e: usize) -> Result<f64, MeshError> {
        if e >= self.num_edges() {
            return Err(MeshError::InvalidIndex {
                index: e,
                count: self.num_edges(),
            });
        }
        let (t0, t1) = self.edge_tris[e];
        let t1 = t1.ok_or(MeshError::BoundaryEdge { edge: e })?;
        let walk = |t: usize| {
            let k = self.tri_edges[t]
                .iter()
                .position(|&x| x == e)
                .expect("edge in triangle");
            let tri = self.triangles[t];
            let len = |i: usize, j: usize| {
                sq_len(sub(self.vertices[tri[j]], self.vertices[tri[i]])).sqrt()
            };
            // after e (k+1 -> k+2) come (k+2 -> k) and (k -> k+1)
            [len((k + 2) % 3, k), len(k, (k + 1) % 3)]
        };
        let a = walk(t0);
        let b = walk(t1);
        Ok((a[0] - b[0]).abs().max((a[1] - b[1]).abs()))
    }

    /// Splits interior edges by the approximate-parallelogram test
    /// `deviation ≤ c·h^{1+α}` and measures the region covered by the failures.
    pub fn alpha_beta_report(&self, alpha: f64, c: f64) -> AlphaBetaReport {
        let threshold = c * self.h_max().powf(1.0 + alpha);
        let mut good = Vec::new();
        let mut bad = Vec::new();
        for e in self.interior_edges() {
            let dev = self.parallelogram_deviation(e).expect("interior edge");
            if dev <= threshold {
                good.push(e);
            } else {
                bad.push(e);
            }
        }
        let covered: BTreeSet<usize> = bad
            .iter()
            .flat_map(|&e| {
                let (a, b) = self.edge_tris[e];
                std::iter::once(a).chain(b)
            })
            .collect();
        let bad_area = covered.iter().map(|&t| self.area(t)).sum();
        AlphaBetaReport {
            threshold,
            parallel_edges: good,
            other_edges: bad,
            other_area: bad_area,
        }
    }
}

/// Result of [`Mesh::alpha_beta_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaBetaReport {
    pub threshold: f64,
    /// Interior edges whose patch is an approximate parallelogram.
    pub parallel_edges: Vec<usize>,
    /// The remaining interior edges.
    pub other_edges: Vec<usize>,
    /// Area of the union of the patches of `other_edges`.
    pub other_area: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchCenter {
    Vertex(usize),
    Edge(usize),
    Triangle(usize),
}

/// A union of triangles around a vertex, edge or triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub center: PatchCenter,
    pub triangles: Vec<usize>,
    pub edges: Vec<usize>,
    pub vertices: Vec<usize>,
    /// `|ω|^{1/2}`.
    pub scale: f64,
}

/// Quantities attached to one counterclockwise triangle. Index `k` refers to
/// vertex `k`, the edge opposite it, and the angle at it.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleGeometry {
    pub vertices: [Point; 3],
    pub lengths: [f64; 3],
    pub angles: [f64; 3],
    /// Distance from vertex `k` to edge `k`.
    pub altitudes: [f64; 3],
    /// Diameter of the circumscribed circle.
    pub circumdiameter: f64,
    /// Counterclockwise unit tangents.
    pub tangents: [Point; 3],
    /// Outward unit normals.
    pub normals: [Point; 3],
    pub area: f64,
    pub grad_lambda: [Point; 3],
}

impl TriangleGeometry {
    pub fn new(vertices: [Point; 3]) -> Self {
        let area = signed_area(&vertices);
        let mut lengths = [0.0; 3];
        let mut tangents = [[0.0; 2]; 3];
        let mut normals = [[0.0; 2]; 3];
        let mut angles = [0.0; 3];
        for k in 0..3 {
            let d = sub(vertices[(k + 2) % 3], vertices[(k + 1) % 3]);
            let l = sq_len(d).sqrt();
            lengths[k] = l;
            tangents[k] = [d[0] / l, d[1] / l];
            normals[k] = [d[1] / l, -d[0] / l];
            let u = sub(vertices[(k + 1) % 3], vertices[k]);
            let w = sub(vertices[(k + 2) % 3], vertices[k]);
            angles[k] = (u[0] * w[1] - u[1] * w[0]).atan2(u[0] * w[0] + u[1] * w[1]);
        }
        let circumdiameter = lengths[0] * lengths[1] * lengths[2] / (2.0 * area);
        let mut altitudes = [0.0; 3];
        let mut grad_lambda = [[0.0; 2]; 3];
        for k in 0..3 {
            altitudes[k] = 2.0 * area / lengths[k];
            grad_lambda[k] = [-normals[k][0] / altitudes[k], -normals[k][1] / altitudes[k]];
        }
        TriangleGeometry {
            vertices,
            lengths,
            angles,
            altitudes,
            circumdiameter,
            tangents,
            normals,
            area,
            grad_lambda,
        }
    }

    pub fn barycentric(&self, x: Point) -> [f64; 3] {
        let mut b = [0.0; 3];
        for (k, bk) in b.iter_mut().enumerate() {
            let d = sub(x, self.vertices[(k + 1) % 3]);
            *bk = d[0] * self.grad_lambda[k][0] + d[1] * self.grad_lambda[k][1];
        }
        b
    }

    pub fn point(&self, b: [f64; 3]) -> Point {
        let v = &self.vertices;
        [
            b[0] * v[0][0] + b[1] * v[1][0] + b[2] * v[2][0],
            b[0] * v[0][1] + b[1] * v[1][1] + b[2] * v[2][1],
        ]
    }

    pub fn centroid(&self) -> Point {
        self.point([1.0 / 3.0; 3])
    }

    /// `|T|^{1/2}`.
    pub fn size(&self) -> f64 {
        self.area.sqrt()
    }
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn sq_len(a: Point) -> f64 {
    a[0] * a[0] + a[1] * a[1]
}

pub(crate) fn signed_area(v: &[Point; 3]) -> f64 {
    let a = sub(v[1], v[0]);
    let b = sub(v[2], v[0]);
    0.5 * (a[0] * b[1] - a[1] * b[0])
}

fn longest_edge(vertices: &[Point], tri: &[usize; 3]) -> u8 {
    let len2 = |k: usize| sq_len(sub(vertices[tri[(k + 2) % 3]], vertices[tri[(k + 1) % 3]]));
    let mut best = 0usize;
    for k in 1..3 {
        let (lk, lb) = (len2(k), len2(best));
        if lk > lb * (1.0 + LENGTH_TIE_TOL)
            || (lk >= lb * (1.0 - LENGTH_TIE_TOL) && tri[k] < tri[best])
        {
            best = k;
        }
    }
    best as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn square() -> Mesh {
        two_triangle_square()
    }

    #[test]
    fn two_triangle_square_counts() {
        let m = square();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_triangles(), 2);
        assert_eq!(m.num_edges(), 5);
        assert_eq!(m.interior_edges().count(), 1);
        m.validate().unwrap();
    }

    #[test]
    fn zero_area_rejected() {
        let err = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 0.0]], vec![[0, 1, 2]]).unwrap_err();
        assert_eq!(err, MeshError::ZeroArea { tri: 0 });
        let err = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], vec![[0, 1, 2]]).unwrap_err();
        assert_eq!(err, MeshError::ZeroArea { tri: 0 });
    }

    #[test]
    fn bad_indices_rejected() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(
            Mesh::new(v.clone(), vec![[0, 1, 3]]),
            Err(MeshError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            Mesh::new(v, vec![[0, 1, 1]]),
            Err(MeshError::DuplicateVertex { .. })
        ));
    }

    #[test]
    fn non_manifold_rejected() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.5, 1.0], [0.5, -1.0], [0.5, 2.0]];
        let err = Mesh::new(v, vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]).unwrap_err();
        assert!(matches!(
            err,
            MeshError::NonManifoldEdge { .. } | MeshError::Overlap { .. }
        ));
    }

    #[test]
    fn clockwise_input_is_flipped() {
        let m = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 2, 1]]).unwrap();
        assert!(m.area(0) > 0.0);
    }

    #[test]
    fn right_triangle_geometry() {
        let g = TriangleGeometry::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!((g.lengths[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((g.lengths[1] - 1.0).abs() < 1e-15);
        assert!((g.lengths[2] - 1.0).abs() < 1e-15);
        assert!((g.area - 0.5).abs() < 1e-15);
        assert!((g.angles[0] - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn equilateral_geometry() {
        let g = TriangleGeometry::new([[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]]);
        let oracle = 1.0 / (PI / 3.0).sin();
        assert!((g.circumdiameter - oracle).abs() < 1e-14);
        assert!((g.circumdiameter - 2.0 / 3f64.sqrt()).abs() < 1e-14);
        for a in g.angles {
            assert!((a - PI / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn geometry_identities_on_skewed_triangle() {
        let g = TriangleGeometry::new([[0.1, -0.2], [2.3, 0.4], [0.7, 1.9]]);
        for k in 0..3 {
            let (km, kp) = ((k + 2) % 3, (k + 1) % 3);
            let (l, lm, lp) = (g.lengths[k], g.lengths[km], g.lengths[kp]);
            assert!((g.angles[k].sin() - l / g.circumdiameter).abs() < 1e-12);
            assert!((g.altitudes[k] - lm * lp / g.circumdiameter).abs() < 1e-12);
            let cos = (lm * lm + lp * lp - l * l) / (2.0 * lm * lp);
            assert!((g.angles[k].cos() - cos).abs() < 1e-12);
            let n = g.normals[k];
            let t = g.tangents[k];
            // n^⊥ = t and t^⊥ = −n with v^⊥ = (−v2, v1)
            assert!((-n[1] - t[0]).abs() < 1e-15 && (n[0] - t[1]).abs() < 1e-15);
            assert!((-t[1] + n[0]).abs() < 1e-15 && (t[0] + n[1]).abs() < 1e-15);
        }
        let s: f64 = g.angles.iter().sum();
        assert!((s - PI).abs() < 1e-13);
    }

    #[test]
    fn barycentric_roundtrip() {
        let g = TriangleGeometry::new([[0.1, -0.2], [2.3, 0.4], [0.7, 1.9]]);
        let b = g.barycentric([0.9, 0.5]);
        let x = g.point(b);
        assert!((x[0] - 0.9).abs() < 1e-14 && (x[1] - 0.5).abs() < 1e-14);
        for k in 0..3 {
            let bk = g.barycentric(g.vertices[k]);
            for j in 0..3 {
                assert!((bk[j] - if j == k { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn star_patch_counts() {
        let m = star_mesh(
            &[0.0, 60.0, 120.0, 180.0, 240.0, 300.0].map(|d: f64| d.to_radians()),
            &[1.0; 6],
        );
        let p = m.vertex_patch(0, 0);
        assert_eq!(p.triangles.len(), 6);
        assert_eq!(p.edges.len(), 12);
        assert!((p.scale * p.scale - m.total_area()).abs() < 1e-14);
    }

    #[test]
    fn corner_patch_and_enlargement() {
        let m = square();
        let corner = (0..4).find(|&v| m.vertex_triangles(v).len() == 1).unwrap();
        assert_eq!(m.vertex_patch(corner, 0).triangles.len(), 1);
        let fine = m.refine_regular().refine_regular();
        let c = fine
            .vertices()
            .iter()
            .position(|p| p == &[0.0, 0.0])
            .unwrap();
        let patch = fine.vertex_patch_until(c, |p| p.triangles.len() >= 8);
        assert!(patch.triangles.len() >= 8);
        let smaller = fine.vertex_patch(c, 0);
        assert!(smaller
            .triangles
            .iter()
            .all(|t| patch.triangles.contains(t)));
    }

    #[test]
    fn parallelogram_deviation_uniform_grid() {
        let m = uniform_grid(4);
        for e in m.interior_edges() {
            assert!(m.parallelogram_deviation(e).unwrap() < 1e-14);
        }
        let b = m.boundary_edges().next().unwrap();
        assert_eq!(
            m.parallelogram_deviation(b),
            Err(MeshError::BoundaryEdge { edge: b })
        );
        let rep = m.alpha_beta_report(1.0, 1.0);
        assert!(rep.other_edges.is_empty());
        assert_eq!(rep.other_area, 0.0);
    }
}
