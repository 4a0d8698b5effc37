use proptest::prelude::*;
use rtrec::mesh::{uniform_grid, unit_square_delaunay};
use rtrec::Mesh;

fn perturbed_grid(n: usize, vertex: usize, delta: [f64; 2]) -> Mesh {
    let g = uniform_grid(n);
    let mut v = g.vertices().to_vec();
    v[vertex][0] += delta[0];
    v[vertex][1] += delta[1];
    Mesh::new(v, g.triangles().to_vec()).unwrap()
}

#[test]
fn moved_vertex_deviation_bounded_by_twice_shift() {
    let n = 4;
    let center = 2 * (n + 1) + 2;
    for delta in [1e-3, 1e-2, 0.05] {
        let m = perturbed_grid(n, center, [delta * 0.6, delta * 0.8]);
        let mut worst: f64 = 0.0;
        for e in m.interior_edges() {
            let dev = m.parallelogram_deviation(e).unwrap();
            assert!(dev <= 2.0 * delta + 1e-15, "edge {e}: {dev} > 2*{delta}");
            worst = worst.max(dev);
        }
        assert!(worst > 0.0);
    }
}

#[test]
fn regular_refinement_shrinks_nonparallel_region() {
    let mut m = unit_square_delaunay(86, 0).unwrap();
    let mut areas = Vec::new();
    for _ in 0..5 {
        areas.push(m.alpha_beta_report(1.0, 0.1).other_area);
        m = m.refine_regular();
    }
    assert!(areas.windows(2).all(|w| w[1] < w[0]), "{areas:?}");
    // the non-parallel region is a strip of width O(h) along the coarse edges
    let ratio = areas[4] / areas[3];
    assert!(
        (0.4..0.6).contains(&ratio),
        "area ratio {ratio} in {areas:?}"
    );
}

#[test]
fn bisection_refinement_keeps_nonparallel_region() {
    let mut m = unit_square_delaunay(86, 0).unwrap();
    let mut areas = Vec::new();
    for _ in 0..4 {
        areas.push(m.alpha_beta_report(0.5, 1.0).other_area);
        m = m.refine_bisection_uniform().unwrap();
    }
    let last = *areas.last().unwrap();
    assert!(last > 0.2, "{areas:?}");
}

#[test]
fn patch_layers_are_nested() {
    let m = unit_square_delaunay(86, 9).unwrap().refine_regular();
    for z in [0, 7, 30, 60] {
        let mut prev = m.vertex_patch(z, 0);
        assert!(prev.triangles.iter().all(|&t| m.triangle(t).contains(&z)));
        for k in 1..4 {
            let next = m.vertex_patch(z, k);
            assert!(prev
                .triangles
                .iter()
                .all(|t| next.triangles.binary_search(t).is_ok()));
            let area: f64 = next.triangles.iter().map(|&t| m.area(t)).sum();
            assert!((next.scale * next.scale - area).abs() < 1e-14);
            prev = next;
        }
    }
}

proptest! {
    #[test]
    fn deviation_symmetric_under_relabeling(seed in 0u64..200, e in 0usize..400) {
        let m = unit_square_delaunay(86, seed % 7).unwrap();
        let interior: Vec<usize> = m.interior_edges().collect();
        let e = interior[e % interior.len()];
        let (t0, t1) = m.edge_triangles(e);
        let t1 = t1.unwrap();
        // swap which triangle is seen first by reversing the triangle order
        let mut tris = m.triangles().to_vec();
        tris.swap(t0, t1);
        let swapped = Mesh::new(m.vertices().to_vec(), tris).unwrap();
        let [a, b] = m.edge(e);
        let e2 = (0..swapped.num_edges()).find(|&x| swapped.edge(x) == [a, b]).unwrap();
        let d1 = m.parallelogram_deviation(e).unwrap();
        let d2 = swapped.parallelogram_deviation(e2).unwrap();
        prop_assert!((d1 - d2).abs() < 1e-15);
        prop_assert!(d1 >= 0.0);
    }

    #[test]
    fn refinements_preserve_invariants(seed in 0u64..50, picks in proptest::collection::vec(0usize..1000, 1..6)) {
        let m = unit_square_delaunay(86, seed).unwrap().refine_regular();
        let marked: Vec<usize> = picks.iter().map(|p| p % m.num_triangles()).collect();
        for r in [m.refine_bisection(&marked).unwrap(), m.refine_adaptive(&marked).unwrap()] {
            r.validate().unwrap();
            prop_assert!((r.total_area() - 1.0).abs() < 1e-12);
        }
    }
}
