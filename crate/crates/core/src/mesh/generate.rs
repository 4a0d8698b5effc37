//! Built-in meshes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Mesh;
use crate::error::MeshError;
use crate::Point;

/// Opening angle of the wedge removed from the slit square.
pub const SLIT_ANGLE: f64 = std::f64::consts::PI / 24.0;

/// The unit square cut along the diagonal from (0,0) to (1,1).
pub fn two_triangle_square() -> Mesh {
    Mesh::new(
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        vec![[0, 1, 2], [0, 2, 3]],
    )
    .expect("valid square mesh")
}

/// `n × n` squares on the unit square, each cut by its (0,0)–(1,1) diagonal.
pub fn uniform_grid(n: usize) -> Mesh {
    assert!(n >= 1);
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    Mesh::new(vertices, triangles).expect("valid grid")
}

/// A closed fan around the origin (vertex 0) with ring vertices at the given
/// polar angles and radii. Angles must increase and span less than a full turn
/// between consecutive entries.
pub fn star_mesh(angles: &[f64], radii: &[f64]) -> Mesh {
    assert_eq!(angles.len(), radii.len());
    let n = angles.len();
    let mut vertices = vec![[0.0, 0.0]];
    for (a, r) in angles.iter().zip(radii) {
        vertices.push([r * a.cos(), r * a.sin()]);
    }
    let triangles = (0..n).map(|i| [0, 1 + i, 1 + (i + 1) % n]).collect();
    Mesh::new(vertices, triangles).expect("valid star")
}

/// Delaunay triangulation of the unit square with exactly `target_nt` triangles.
///
/// Boundary points are equispaced with `k` segments per side; the remaining
/// points are drawn uniformly from the interior with a minimum spacing. For a
/// convex domain `#T = 2V − B − 2`, which fixes the number of interior points.
pub fn unit_square_delaunay(target_nt: usize, seed: u64) -> Result<Mesh, MeshError> {
    if target_nt < 2 || !target_nt.is_multiple_of(2) {
        return Err(MeshError::Generation(format!(
            "a triangulation of the square has an even number of triangles, got {target_nt}"
        )));
    }
    let k = ((target_nt as f64).sqrt() / 2.0).round().max(1.0) as usize;
    let b = 4 * k;
    if target_nt + 2 < b {
        return Err(MeshError::Generation(format!(
            "{target_nt} triangles is too few"
        )));
    }
    let interior = (target_nt + 2 - b) / 2;
    for attempt in 0..64u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(attempt),
        );
        let mut points: Vec<Point> = Vec::with_capacity(b + interior);
        for side in 0..4 {
            for i in 0..k {
                let s = i as f64 / k as f64;
                points.push(match side {
                    0 => [s, 0.0],
                    1 => [1.0, s],
                    2 => [1.0 - s, 1.0],
                    _ => [0.0, 1.0 - s],
                });
            }
        }
        let spacing = 0.6 / ((b + interior) as f64).sqrt();
        let margin = 0.35 / k as f64;
        let mut tries = 0;
        while points.len() < b + interior && tries < 200_000 {
            tries += 1;
            let p = [
                rng.random_range(margin..1.0 - margin),
                rng.random_range(margin..1.0 - margin),
            ];
            if points
                .iter()
                .all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) >= spacing)
            {
                points.push(p);
            }
        }
        if points.len() < b + interior {
            continue;
        }
        let input: Vec<delaunator::Point> = points
            .iter()
            .map(|p| delaunator::Point { x: p[0], y: p[1] })
            .collect();
        let tri = delaunator::triangulate(&input);
        let triangles: Vec<[usize; 3]> = tri
            .triangles
            .chunks(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        if triangles.len() != target_nt {
            continue;
        }
        let Ok(mesh) = Mesh::new(points, triangles) else {
            continue;
        };
        if mesh.validate().is_ok() && mesh.min_angle() > 10f64.to_radians() {
            return Ok(mesh);
        }
    }
    Err(MeshError::Generation(format!(
        "no valid Delaunay mesh with {target_nt} triangles"
    )))
}

/// `[−1,1]²` minus the wedge with corners (0,0), (1,0), (1, tan ω), ω = π/24.
///
/// The coarse mesh is a fan of eight triangles around the re-entrant corner at
/// the origin; it is refined regularly until it has at least `min_nt` triangles.
pub fn slit_square(min_nt: usize) -> Mesh {
    let ring: [Point; 9] = [
        [1.0, SLIT_ANGLE.tan()],
        [1.0, 1.0],
        [0.0, 1.0],
        [-1.0, 1.0],
        [-1.0, 0.0],
        [-1.0, -1.0],
        [0.0, -1.0],
        [1.0, -1.0],
        [1.0, 0.0],
    ];
    let mut vertices = vec![[0.0, 0.0]];
    vertices.extend_from_slice(&ring);
    let triangles = (1..9).map(|i| [0, i, i + 1]).collect();
    let mut mesh = Mesh::new(vertices, triangles).expect("valid slit fan");
    while mesh.num_triangles() < min_nt {
        mesh = mesh.refine_regular();
    }
    mesh
}
