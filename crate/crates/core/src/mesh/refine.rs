//! Regular refinement, newest-vertex bisection and their combination.
//!
//! All three operations share one engine: decide which edges get a midpoint,
//! close that set so every triangle with a split edge also splits its
//! refinement edge, then cut each triangle either into four similar children
//! ("red") or by one to three bisections.

use super::Mesh;
use crate::error::MeshError;
use crate::Point;

impl Mesh {
    /// Splits every triangle into four similar children through its edge midpoints.
    pub fn refine_regular(&self) -> Mesh {
        let red = vec![true; self.num_triangles()];
        self.split(&red, vec![true; self.num_edges()])
            .expect("regular refinement of a valid mesh is conforming")
    }

    /// Newest-vertex bisection of the marked triangles plus conforming closure.
    pub fn refine_bisection(&self, marked: &[usize]) -> Result<Mesh, MeshError> {
        self.check_marked(marked)?;
        let mut edges = vec![false; self.num_edges()];
        for &t in marked {
            edges[self.tri_edges[t][self.refinement_edge(t)]] = true;
        }
        self.split(&vec![false; self.num_triangles()], edges)
    }

    /// Bisects every edge once; each triangle becomes four by three bisections.
    ///
    /// This is two sweeps of newest-vertex bisection over the whole mesh. The
    /// result is conforming and has exactly four times as many triangles.
    pub fn refine_bisection_uniform(&self) -> Result<Mesh, MeshError> {
        self.split(
            &vec![false; self.num_triangles()],
            vec![true; self.num_edges()],
        )
    }

    /// Regular refinement of the marked triangles, closed by bisection.
    pub fn refine_adaptive(&self, marked: &[usize]) -> Result<Mesh, MeshError> {
        self.check_marked(marked)?;
        let mut red = vec![false; self.num_triangles()];
        let mut edges = vec![false; self.num_edges()];
        for &t in marked {
            red[t] = true;
            for e in self.tri_edges[t] {
                edges[e] = true;
            }
        }
        self.split(&red, edges)
    }

    fn check_marked(&self, marked: &[usize]) -> Result<(), MeshError> {
        match marked.iter().find(|&&t| t >= self.num_triangles()) {
            Some(&t) => Err(MeshError::InvalidIndex {
                index: t,
                count: self.num_triangles(),
            }),
            None => Ok(()),
        }
    }

    fn split(&self, red: &[bool], mut marked: Vec<bool>) -> Result<Mesh, MeshError> {
        let limit = self.num_edges() + 1;
        let mut passes = 0;
        loop {
            let mut changed = false;
            for t in 0..self.num_triangles() {
                let te = self.tri_edges[t];
                let base = te[self.refinement_edge(t)];
                if !marked[base] && te.iter().any(|&e| marked[e]) {
                    marked[base] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            passes += 1;
            if passes > limit {
                return Err(MeshError::ClosureDepth { limit });
            }
        }
        if !marked.iter().any(|&m| m) {
            return Ok(self.clone());
        }

        let mut vertices: Vec<Point> = self.vertices.clone();
        let mut midpoint = vec![usize::MAX; self.num_edges()];
        for e in 0..self.num_edges() {
            if marked[e] {
                midpoint[e] = vertices.len();
                vertices.push(self.edge_point(e, 0.5));
            }
        }

        let mut triangles = Vec::with_capacity(self.num_triangles() * 4);
        for t in 0..self.num_triangles() {
            let k = self.refinement_edge(t);
            let tri = self.triangles[t];
            let te = self.tri_edges[t];
            let (a, b, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            // edges opposite a, b and c
            let (bc, ca, ab) = (te[k], te[(k + 1) % 3], te[(k + 2) % 3]);
            if !marked[bc] {
                triangles.push([a, b, c]);
                continue;
            }
            let ma = midpoint[bc];
            if red[t] {
                let (mb, mc) = (midpoint[ca], midpoint[ab]);
                triangles.push([a, mc, mb]);
                triangles.push([mc, b, ma]);
                triangles.push([mb, ma, c]);
                triangles.push([ma, mb, mc]);
                continue;
            }
            if marked[ab] {
                let m1 = midpoint[ab];
                triangles.push([m1, ma, a]);
                triangles.push([m1, b, ma]);
            } else {
                triangles.push([ma, a, b]);
            }
            if marked[ca] {
                let m2 = midpoint[ca];
                triangles.push([m2, ma, c]);
                triangles.push([m2, a, ma]);
            } else {
                triangles.push([ma, c, a]);
            }
        }
        let refine_edge = vec![0u8; triangles.len()];
        Mesh::from_parts(vertices, triangles, refine_edge)
    }
}

#[cfg(test)]
mod tests {
    use crate::mesh::{two_triangle_square, uniform_grid, unit_square_delaunay};

    fn sorted_angles(m: &crate::Mesh, t: usize) -> [f64; 3] {
        let mut a = m.geometry(t).angles;
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        a
    }

    #[test]
    fn regular_refinement_quadruples_and_keeps_shape() {
        let m = two_triangle_square();
        let f = m.refine_regular();
        assert_eq!(f.num_triangles(), 8);
        f.validate().unwrap();
        for t in 0..m.num_triangles() {
            let parent = sorted_angles(&m, t);
            for c in 0..4 {
                let child = 4 * t + c;
                assert!((f.area(child) - m.area(t) / 4.0).abs() <= 1e-14 * m.area(t));
                let ca = sorted_angles(&f, child);
                for i in 0..3 {
                    assert!((ca[i] - parent[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn delaunay_sequence_counts() {
        let mut m = unit_square_delaunay(86, 7).unwrap();
        let mut counts = vec![m.num_triangles()];
        for _ in 0..3 {
            m = m.refine_regular();
            m.validate().unwrap();
            counts.push(m.num_triangles());
        }
        assert_eq!(counts, vec![86, 344, 1376, 5504]);
    }

    #[test]
    fn empty_marking_is_identity() {
        let m = unit_square_delaunay(86, 3).unwrap();
        assert_eq!(m.refine_bisection(&[]).unwrap(), m);
        assert_eq!(m.refine_adaptive(&[]).unwrap(), m);
    }

    #[test]
    fn uniform_bisection_quadruples() {
        let m = unit_square_delaunay(86, 1).unwrap();
        let b = m.refine_bisection_uniform().unwrap();
        b.validate().unwrap();
        assert_eq!(b.num_triangles(), 344);
        let bb = b.refine_bisection_uniform().unwrap();
        bb.validate().unwrap();
        assert_eq!(bb.num_triangles(), 1376);
        assert!((bb.total_area() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn single_bisection_is_conforming() {
        let m = unit_square_delaunay(86, 2).unwrap();
        for t in [0, 17, 40, 85] {
            let b = m.refine_bisection(&[t]).unwrap();
            b.validate().unwrap();
            assert!(b.num_triangles() > m.num_triangles());
            assert!((b.total_area() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn adaptive_all_equals_regular() {
        let m = unit_square_delaunay(86, 4).unwrap();
        let all: Vec<usize> = (0..m.num_triangles()).collect();
        assert_eq!(m.refine_adaptive(&all).unwrap(), m.refine_regular());
    }

    #[test]
    fn adaptive_single_triangle_of_square() {
        let m = two_triangle_square();
        let a = m.refine_adaptive(&[0]).unwrap();
        a.validate().unwrap();
        assert!(a.num_triangles() >= 6);
    }

    #[test]
    fn adaptive_corner_refinement_keeps_min_angle() {
        let mut m = uniform_grid(2);
        let initial = m.min_angle();
        let mut worst = initial;
        for _ in 0..10 {
            let near: Vec<usize> = (0..m.num_triangles())
                .filter(|&t| m.triangle(t).iter().any(|&v| m.vertex(v) == [0.0, 0.0]))
                .collect();
            m = m.refine_adaptive(&near).unwrap();
            m.validate().unwrap();
            worst = worst.min(m.min_angle());
        }
        assert!(worst >= initial / 2.0 - 1e-12, "min angle fell to {worst}");
        assert!(m.num_triangles() > 40);
    }

    #[test]
    fn out_of_range_marks_rejected() {
        let m = two_triangle_square();
        assert!(m.refine_bisection(&[2]).is_err());
        assert!(m.refine_adaptive(&[9]).is_err());
    }
}
