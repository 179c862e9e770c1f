mod common;

use approx::assert_relative_eq;
use proptest::prelude::*;
use sweep_core::geometry::{hausdorff_factor, MovingPolyhedron, Polyhedron, Track, Vector};
use sweep_core::SweepError;

use common::oracles::{brute_projection, nnls_cone_distance};
use common::v;

fn unit(xs: &[f64]) -> Vector {
    let a = v(xs);
    let n = a.norm();
    a / n
}

/// Polyhedron containing `center`, with normals bounded away from zero.
fn polyhedron_strategy(n: usize) -> impl Strategy<Value = (Polyhedron, Vector)> {
    let center = prop::collection::vec(-1.0..1.0f64, n);
    let rows = prop::collection::vec((prop::collection::vec(-1.0..1.0f64, n), 0.0..1.0f64), 1..=5);
    (center, rows)
        .prop_filter("degenerate normal", |(_, rows)| {
            rows.iter().all(|(a, _)| a.iter().map(|x| x * x).sum::<f64>() > 1e-2)
        })
        .prop_map(|(c, rows)| {
            let c = v(&c);
            let (normals, offsets): (Vec<_>, Vec<_>) = rows
                .into_iter()
                .map(|(a, slack)| {
                    let a = unit(&a);
                    let b = a.dot(&c) + slack;
                    (a, b)
                })
                .unzip();
            (Polyhedron::new(normals, offsets).unwrap(), c)
        })
}

fn point(n: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-3.0..3.0f64, n).prop_map(|x| v(&x))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn projection_matches_enumeration(((poly, _), y) in (1usize..=3).prop_flat_map(|n| (polyhedron_strategy(n), point(n)))) {
        let p = poly.project(&y).unwrap();
        let oracle = brute_projection(poly.normals(), poly.offsets(), &y);
        prop_assert!((&p.point - &oracle).norm() <= 1e-9);
        prop_assert!(poly.max_violation(&p.point) <= 1e-12);
        prop_assert!(p.kkt_residual(&poly, &y) <= 1e-10);
    }

    #[test]
    fn projection_is_firmly_nonexpansive(((poly, _), y1, y2) in (1usize..=3).prop_flat_map(|n| (polyhedron_strategy(n), point(n), point(n)))) {
        let p1 = poly.project(&y1).unwrap().point;
        let p2 = poly.project(&y2).unwrap().point;
        let lhs = (&p1 - &p2).norm_squared();
        let rhs = (&p1 - &p2).dot(&(&y1 - &y2));
        prop_assert!(lhs <= rhs + 1e-9);
    }

    #[test]
    fn cone_distance_matches_nnls(((poly, _), y, w) in (1usize..=3).prop_flat_map(|n| (polyhedron_strategy(n), point(n), point(n)))) {
        let x = poly.project(&y).unwrap().point;
        let gens: Vec<Vector> = poly.active_set(&x).into_iter().map(|j| poly.normals()[j].clone()).collect();
        let d = poly.dist_to_normal_cone(&x, &w).unwrap();
        prop_assert!((d - nnls_cone_distance(&gens, &w)).abs() <= 1e-9);
        let dec = poly.normal_cone_decompose(&x, &w).unwrap();
        prop_assert!((&dec.zeta + &dec.residual - &w).norm() <= 1e-12);
        prop_assert!(dec.weights.iter().all(|&l| l >= 0.0));
        // the residual is orthogonal to the cone projection
        prop_assert!(dec.residual.dot(&dec.zeta).abs() <= 1e-9);
    }

    #[test]
    fn residual_of_projection_is_in_normal_cone(((poly, _), y) in (1usize..=3).prop_flat_map(|n| (polyhedron_strategy(n), point(n)))) {
        let x = poly.project(&y).unwrap().point;
        prop_assert!(poly.normal_cone_contains(&x, &(&y - &x), 1e-9).unwrap());
    }
}

#[test]
fn projection_onto_box_clamps() {
    let b = Polyhedron::boxed(&[-1.0, 0.0], &[1.0, 2.0]).unwrap();
    let p = b.project(&v(&[3.0, -1.0])).unwrap();
    assert_relative_eq!(p.point, v(&[1.0, 0.0]), epsilon = 1e-14);
    assert_eq!(b.distance(&v(&[0.5, 1.0])).unwrap(), 0.0);
}

#[test]
fn large_constraint_count_uses_iterative_projection() {
    // regular 40-gon circumscribing the unit circle
    let s = 40;
    let normals: Vec<Vector> = (0..s)
        .map(|j| {
            let a = 2.0 * std::f64::consts::PI * j as f64 / s as f64;
            v(&[a.cos(), a.sin()])
        })
        .collect();
    let poly = Polyhedron::new(normals, vec![1.0; s]).unwrap();
    let y = v(&[3.0, 0.0]);
    let p = poly.project(&y).unwrap();
    assert!((&p.point - v(&[1.0, 0.0])).norm() <= 1e-8);
    assert!(poly.max_violation(&p.point) <= 1e-9);
}

#[test]
fn empty_polyhedron_is_rejected() {
    let err = Polyhedron::new(vec![v(&[1.0]), v(&[-1.0])], vec![0.0, -1.0]).unwrap_err();
    assert!(matches!(err, SweepError::InfeasiblePolyhedron(_)));
}

#[test]
fn square_corner_factor() {
    let f = hausdorff_factor(&[v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
    assert_relative_eq!(f, 2f64.sqrt(), epsilon = 1e-12);
    let g = hausdorff_factor(&[v(&[1.0]), v(&[-1.0])]).unwrap();
    assert_relative_eq!(g, 1.0, epsilon = 1e-12);
}

#[test]
fn moving_interval_snapshots_and_rate() {
    let set = MovingPolyhedron::new(
        vec![v(&[-1.0]), v(&[1.0])],
        vec![Track::new(vec![0.0, 1.0], vec![0.0, -1.0]).unwrap(), Track::new(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap()],
        (0.0, 1.0),
    )
    .unwrap();
    let c = set.snapshot(0.25).unwrap();
    assert_relative_eq!(c.project(&v(&[0.0])).unwrap().point[0], 0.25, epsilon = 1e-14);
    assert_relative_eq!(c.project(&v(&[2.0])).unwrap().point[0], 1.25, epsilon = 1e-14);
    assert_relative_eq!(set.modulus_rate(), 1.0, epsilon = 1e-12);
    assert!(!set.is_static());
    assert!(matches!(set.snapshot(1.5), Err(SweepError::TimeOutOfRange { .. })));
}

#[test]
fn hausdorff_distance_within_modulus() {
    // translate a square corner: the Hausdorff distance of the snapshots is
    // bounded by the rate times the elapsed time
    let set = MovingPolyhedron::new(
        vec![v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[-1.0, 0.0]), v(&[0.0, -1.0])],
        vec![
            Track::new(vec![0.0, 1.0], vec![1.0, 0.5]).unwrap(),
            Track::new(vec![0.0, 1.0], vec![1.0, 0.5]).unwrap(),
            Track::constant(1.0),
            Track::constant(1.0),
        ],
        (0.0, 1.0),
    )
    .unwrap();
    let a = set.snapshot(0.0).unwrap();
    let b = set.snapshot(1.0).unwrap();
    // the corner (1, 1) is the farthest point of C(0) from C(1)
    let d = b.distance(&v(&[1.0, 1.0])).unwrap();
    assert_relative_eq!(d, 0.5 * 2f64.sqrt(), epsilon = 1e-12);
    assert!(d <= set.modulus_rate() * 1.0 + 1e-12);
    assert_eq!(a.distance(&v(&[0.5, 0.5])).unwrap(), 0.0);
}
