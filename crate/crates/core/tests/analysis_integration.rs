use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtrec::analysis::{dorfler_mark, estimator, fit_order, fit_order_asymptotic, l2_error_scalar};
use rtrec::mesh::unit_square_delaunay;
use rtrec::quadrature::triangle_rule;
use rtrec::spaces::{interpolate_rt, lattice, PiecewiseScalar};
use rtrec::{recover, Point, ScalarField};

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `∫_T λ^a = 2|T| a₀! a₁! a₂! / (|a| + 2)!`
fn monomial_integral(area: f64, a: [usize; 3]) -> f64 {
    2.0 * area * factorial(a[0]) * factorial(a[1]) * factorial(a[2])
        / factorial(a[0] + a[1] + a[2] + 2)
}

#[test]
fn l2_norm_matches_mass_matrix() {
    let mesh = Arc::new(unit_square_delaunay(86, 5).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for r in 0..=3 {
        let basis = lattice(r);
        let coeffs: Vec<f64> = (0..basis.len() * mesh.num_triangles())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let u = PiecewiseScalar::new(mesh.clone(), r, coeffs).unwrap();
        let mut exact = 0.0;
        for t in 0..mesh.num_triangles() {
            let c = u.local_coefficients(t);
            for (i, a) in basis.iter().enumerate() {
                for (j, b) in basis.iter().enumerate() {
                    exact += c[i]
                        * c[j]
                        * monomial_integral(mesh.area(t), [a[0] + b[0], a[1] + b[1], a[2] + b[2]]);
                }
            }
        }
        let zero = |_: Point| 0.0;
        let got = l2_error_scalar(&u, &zero, &mesh, (2 * r).max(1)).unwrap();
        assert!(
            (got - exact.sqrt()).abs() < 1e-12 * exact.sqrt(),
            "r={r}: {got} vs {}",
            exact.sqrt()
        );
    }
}

#[test]
fn estimator_matches_independent_quadrature() {
    let mesh = Arc::new(unit_square_delaunay(86, 6).unwrap());
    let q = |x: Point| [(3.0 * x[0]).sin() * x[1], (2.0 * x[1]).cos() + x[0] * x[0]];
    for r in 0..=2 {
        let p_h = interpolate_rt(&q, &mesh, r).unwrap();
        let rec = recover(&p_h).unwrap();
        let etas = estimator(&p_h, &rec);
        let rule = triangle_rule(20).unwrap();
        for t in [0, 13, 42, 85] {
            let v = mesh.triangle_vertices(t);
            let s: f64 = rule
                .map_points(&v)
                .zip(&rule.weights)
                .map(|(x, w)| {
                    let a = p_h.eval(t, x).unwrap();
                    let b = rec.eval(t, x).unwrap();
                    w * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
                })
                .sum();
            let expect = (mesh.area(t) * s).sqrt();
            assert!(
                (etas[t] - expect).abs() < 1e-12 + 1e-10 * expect,
                "r={r} t={t}: {} vs {expect}",
                etas[t]
            );
        }
    }
}

#[test]
fn published_orders_are_reproduced() {
    let nt = [86.0, 344.0, 1376.0, 5504.0, 22016.0];
    let columns: [([f64; 5], f64); 6] = [
        ([3.176e-1, 8.000e-2, 2.006e-2, 5.022e-3, 1.256e-3], 1.998),
        ([4.297e-2, 7.852e-3, 1.397e-3, 2.461e-4, 4.336e-5], 2.501),
        ([5.186e-1, 5.560e-2, 5.344e-3, 4.929e-4, 4.616e-5], 3.414),
        ([3.176e-1, 1.325e-1, 3.401e-2, 8.604e-3, 2.164e-3], 1.979),
        ([4.297e-2, 1.092e-1, 2.682e-2, 6.607e-3, 1.637e-3], 2.020),
        ([5.186e-1, 7.453e-2, 1.005e-2, 1.610e-3, 3.336e-4], 2.605),
    ];
    for (errs, p) in columns {
        let got = fit_order_asymptotic(&errs, &nt).unwrap();
        assert!((got - p).abs() < 6e-4, "{got} vs {p}");
    }
}

#[test]
fn order_fit_is_stable_under_small_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ndofs: Vec<f64> = (0..6).map(|k| 500.0 * 4f64.powi(k)).collect();
    for p in [1.0, 2.0, 3.5] {
        let clean: Vec<f64> = ndofs.iter().map(|n| n.powf(-p / 2.0)).collect();
        for _ in 0..200 {
            let noisy: Vec<f64> = clean
                .iter()
                .map(|e| e * (1.0 + rng.random_range(-0.01..0.01)))
                .collect();
            let got = fit_order(&noisy, &ndofs).unwrap();
            assert!((got - p).abs() < 0.05, "{got} vs {p}");
        }
    }
}

/// Smallest number of triangles whose squared estimators reach `theta` of the total.
fn brute_force_minimum(etas: &[f64], theta: f64) -> usize {
    let total: f64 = etas.iter().map(|e| e * e).sum();
    let n = etas.len();
    (0u32..1 << n)
        .filter(|mask| {
            let s: f64 = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| etas[i] * etas[i])
                .sum();
            s >= theta * total
        })
        .map(|mask| mask.count_ones() as usize)
        .min()
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dorfler_marks_a_minimal_set(etas in prop::collection::vec(0.01f64..1.0, 1..13), theta in 0.05f64..0.95) {
        let marked = dorfler_mark(&etas, theta).unwrap();
        let total: f64 = etas.iter().map(|e| e * e).sum();
        let s: f64 = marked.iter().map(|&i| etas[i] * etas[i]).sum();
        prop_assert!(s >= theta * total * (1.0 - 1e-14));
        prop_assert_eq!(marked.len(), brute_force_minimum(&etas, theta));
        // dropping the smallest marked value falls below the threshold
        let smallest = marked.iter().map(|&i| etas[i] * etas[i]).fold(f64::INFINITY, f64::min);
        prop_assert!(s - smallest < theta * total);
    }
}

#[test]
fn piecewise_scalar_evaluates_its_basis() {
    let mesh = Arc::new(unit_square_delaunay(86, 0).unwrap());
    let basis = lattice(2);
    let mut coeffs = vec![0.0; basis.len() * mesh.num_triangles()];
    coeffs[3 * basis.len() + 1] = 1.0;
    let u = PiecewiseScalar::new(mesh.clone(), 2, coeffs).unwrap();
    let g = mesh.geometry(3);
    let b: [f64; 3] = [0.2, 0.5, 0.3];
    let a = basis[1];
    let expect = b[0].powi(a[0] as i32) * b[1].powi(a[1] as i32) * b[2].powi(a[2] as i32);
    assert!((u.value(3, g.point(b)) - expect).abs() < 1e-14);
}
