use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtrec::mesh::unit_square_delaunay;
use rtrec::quadrature::triangle_rule;
use rtrec::spaces::{interpolate_rt, project_l2, project_l2_with_degree, VectorField};
use rtrec::{Mesh, Point, RtField};

fn single(v: [Point; 3]) -> Arc<Mesh> {
    Arc::new(Mesh::new(v.to_vec(), vec![[0, 1, 2]]).unwrap())
}

fn random_shape_regular(rng: &mut ChaCha8Rng) -> [Point; 3] {
    loop {
        let v: [Point; 3] =
            std::array::from_fn(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
        let m = Mesh::new(v.to_vec(), vec![[0, 1, 2]]);
        if let Ok(m) = m {
            if m.min_angle() > PI / 12.0 {
                return v;
            }
        }
    }
}

fn l2_error(f: &RtField, q: impl Fn(Point) -> Point) -> f64 {
    let m = f.mesh();
    let rule = triangle_rule(14).unwrap();
    let mut s = 0.0;
    for t in 0..m.num_triangles() {
        let v = m.triangle_vertices(t);
        let a = m.area(t);
        for (x, w) in rule.map_points(&v).zip(&rule.weights) {
            let d = f.value(t, x);
            let e = q(x);
            s += a * w * ((d[0] - e[0]).powi(2) + (d[1] - e[1]).powi(2));
        }
    }
    s.sqrt()
}

#[test]
fn interpolation_converges_at_order_r_plus_one() {
    let q = |x: Point| [(PI * x[0]).sin() * (PI * x[1]).sin(), 0.0];
    for r in 0..=3 {
        let mut m = unit_square_delaunay(86, 0).unwrap();
        let mut errs = Vec::new();
        for _ in 0..3 {
            let mesh = Arc::new(m.clone());
            errs.push(l2_error(&interpolate_rt(&q, &mesh, r).unwrap(), q));
            m = m.refine_regular();
        }
        let rate = (errs[1] / errs[2]).log2();
        assert!(
            (rate - (r + 1) as f64).abs() < 0.2,
            "r={r}: rate {rate} from {errs:?}"
        );
    }
}

#[test]
fn interpolation_is_a_projection() {
    let mesh = Arc::new(unit_square_delaunay(86, 2).unwrap());
    let q = |x: Point| [(2.0 * x[0]).exp() * x[1], (x[0] - x[1]).cos()];
    for r in 0..=3 {
        let f = interpolate_rt(&q, &mesh, r).unwrap();
        let g = interpolate_rt(&f, &mesh, r).unwrap();
        let scale = f.coefficients().iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for (a, b) in f.coefficients().iter().zip(g.coefficients()) {
            assert!((a - b).abs() <= 1e-11 * scale, "r={r}: {a} vs {b}");
        }
    }
}

#[test]
fn normal_component_is_continuous() {
    let mesh = Arc::new(unit_square_delaunay(86, 3).unwrap());
    let q = |x: Point| [x[0].sin() + x[1], (x[0] * x[1]).exp()];
    for r in 0..=3 {
        let f = interpolate_rt(&q, &mesh, r).unwrap();
        for e in mesh.interior_edges() {
            let (t0, t1) = mesh.edge_triangles(e);
            let n = mesh.edge_normal(e);
            for s in [0.1, 0.37, 0.8] {
                let x = mesh.edge_point(e, s);
                let a = f.value(t0, x);
                let b = f.value(t1.unwrap(), x);
                let (an, bn) = (a[0] * n[0] + a[1] * n[1], b[0] * n[0] + b[1] * n[1]);
                assert!((an - bn).abs() <= 1e-11 * (1.0 + an.abs()), "r={r} e={e}");
            }
        }
    }
}

#[test]
fn linf_stability_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let probe = triangle_rule(12).unwrap();
    let mut worst: f64 = 0.0;
    for sample in 0..1000 {
        let v = random_shape_regular(&mut rng);
        let mesh = single(v);
        let c: [f64; 20] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let q = move |x: Point| {
            let mut m = [0.0; 10];
            let mut i = 0;
            for d in 0..=3 {
                for j in 0..=d {
                    m[i] = x[0].powi(d - j) * x[1].powi(j);
                    i += 1;
                }
            }
            let a: f64 = (0..10).map(|k| c[k] * m[k]).sum();
            let b: f64 = (0..10).map(|k| c[10 + k] * m[k]).sum();
            [a, b]
        };
        let r = sample % 4;
        let f = interpolate_rt(&q, &mesh, r).unwrap();
        let (mut num, mut den) = (0.0f64, 0.0f64);
        let pts: Vec<Point> = probe.map_points(&v).chain(v.iter().copied()).collect();
        for x in pts {
            let a = f.value(0, x);
            let b = q(x);
            num = num.max(a[0].hypot(a[1]));
            den = den.max(b[0].hypot(b[1]));
        }
        worst = worst.max(num / den);
    }
    assert!(worst <= 10.0, "stability constant {worst}");
}

#[test]
fn divergence_matches_finite_differences() {
    let mesh = Arc::new(unit_square_delaunay(86, 4).unwrap());
    let q = |x: Point| [(3.0 * x[0]).sin() * x[1], x[0] * x[0] * (2.0 * x[1]).cos()];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for r in 0..=3 {
        let f = interpolate_rt(&q, &mesh, r).unwrap();
        let scale = f.coefficients().iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for _ in 0..10 {
            let t = rng.random_range(0..mesh.num_triangles());
            let mut b = [
                rng.random_range(0.1..1.0),
                rng.random_range(0.1..1.0),
                rng.random_range(0.1..1.0),
            ];
            let s: f64 = b.iter().sum();
            b.iter_mut().for_each(|x| *x /= s);
            let v = mesh.triangle_vertices(t);
            let x = [
                b[0] * v[0][0] + b[1] * v[1][0] + b[2] * v[2][0],
                b[0] * v[0][1] + b[1] * v[1][1] + b[2] * v[2][1],
            ];
            let eps = 1e-5;
            let fd = (f.value(t, [x[0] + eps, x[1]])[0] - f.value(t, [x[0] - eps, x[1]])[0]
                + f.value(t, [x[0], x[1] + eps])[1]
                - f.value(t, [x[0], x[1] - eps])[1])
                / (2.0 * eps);
            let d = f.eval_div(t, x).unwrap();
            assert!(
                (fd - d).abs() <= 1e-6 * scale.max(1.0) * 100.0,
                "r={r}: {fd} vs {d}"
            );
        }
    }
}

#[test]
fn projection_is_galerkin_orthogonal() {
    let mesh = Arc::new(unit_square_delaunay(86, 6).unwrap());
    let v = |x: Point| (x[0] * 3.0).exp() * (x[1] * 2.0).sin();
    for r in 0..=3 {
        let p = project_l2_with_degree(&v, &mesh, r, 20).unwrap();
        let rule = triangle_rule(20).unwrap();
        for t in 0..mesh.num_triangles() {
            let pts: Vec<Point> = rule.map_points(&mesh.triangle_vertices(t)).collect();
            let g = mesh.geometry(t);
            for a in p.basis() {
                let mut res = 0.0;
                let mut norm = 0.0;
                for (x, w) in pts.iter().zip(&rule.weights) {
                    let b = g.barycentric(*x);
                    let test =
                        b[0].powi(a[0] as i32) * b[1].powi(a[1] as i32) * b[2].powi(a[2] as i32);
                    res += w * (v(*x) - p.eval_bary(t, b)) * test;
                    norm += w * v(*x).abs();
                }
                assert!(res.abs() <= 1e-11 * norm, "r={r} t={t}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn commuting_diagram(seed in 0u64..1000, r in 0usize..4, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mesh = Arc::new(unit_square_delaunay(86, seed % 5).unwrap());
        let q = move |x: Point| [(a * x[0] + x[1]).sin(), (b * x[1]).cos() * x[0]];
        let div = move |x: Point| a * (a * x[0] + x[1]).cos() - b * (b * x[1]).sin() * x[0];
        let f = interpolate_rt(&q, &mesh, r).unwrap();
        let lhs = project_l2(&f.divergence(), &mesh, r).unwrap();
        let rhs = project_l2(&div, &mesh, r).unwrap();
        for (x, y) in lhs.coefficients().iter().zip(rhs.coefficients()) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()), "{} vs {}", x, y);
        }
    }
}
