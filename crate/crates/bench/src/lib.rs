//! Fixtures shared by the benchmarks.

use nalgebra::DMatrix;
use sweep_core::geometry::{MovingPolyhedron, Polyhedron, Track, Vector};
use sweep_core::problem::{ControlSet, ControlSignal, DelaySpec, History, Perturbation, SweepingProblem};

pub fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

/// Regular `s`-gon circumscribing the unit circle.
pub fn polygon(s: usize) -> Polyhedron {
    let normals = (0..s)
        .map(|j| {
            let a = std::f64::consts::TAU * j as f64 / s as f64;
            v(&[a.cos(), a.sin()])
        })
        .collect();
    Polyhedron::new(normals, vec![1.0; s]).expect("polygon is nonempty")
}

/// `x' = -y` below an unreached ceiling, delay 0.5.
pub fn delayed_feedback() -> SweepingProblem {
    let set = MovingPolyhedron::fixed(Polyhedron::half_space(v(&[1.0]), 5.0).unwrap(), (0.0, 1.0)).unwrap();
    let m = |a| DMatrix::from_element(1, 1, a);
    let g = Perturbation::affine(m(0.0), m(1.0), m(0.0), None, 1.0).unwrap();
    let delay = DelaySpec::constant(0.5, (0.0, 1.0)).unwrap();
    let history = History::constant(v(&[1.0]), -0.5, 0.0).unwrap();
    SweepingProblem::new(set, g, delay, history, ControlSet::singleton(v(&[0.0]))).unwrap()
}

/// A shrinking 2-D box with weak delayed feedback.
pub fn shrinking_box() -> SweepingProblem {
    let horizon = (0.0, 1.0);
    let normals = vec![v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[-1.0, 0.0]), v(&[0.0, -1.0])];
    let tracks = vec![
        Track::new(vec![0.0, 1.0], vec![1.0, 0.4]).unwrap(),
        Track::new(vec![0.0, 1.0], vec![1.0, 0.4]).unwrap(),
        Track::constant(0.0),
        Track::constant(0.0),
    ];
    let set = MovingPolyhedron::new(normals, tracks, horizon).unwrap();
    let g = Perturbation::affine(
        DMatrix::from_row_slice(2, 2, &[0.0, 0.02, -0.02, 0.0]),
        DMatrix::from_diagonal_element(2, 2, 0.02),
        DMatrix::from_diagonal_element(2, 2, 0.05),
        None,
        0.1,
    )
    .unwrap();
    let delay = DelaySpec::constant(0.2, horizon).unwrap();
    let history = History::constant(v(&[0.9, 0.95]), -0.2, 0.0).unwrap();
    let controls = ControlSet::boxed(v(&[-1.0, -1.0]), v(&[1.0, 1.0])).unwrap();
    SweepingProblem::new(set, g, delay, history, controls).unwrap()
}

/// `x' = u` against the wall `x <= 0`, `U = [-1, 1]`.
pub fn steering() -> SweepingProblem {
    let set = MovingPolyhedron::fixed(Polyhedron::half_space(v(&[1.0]), 0.0).unwrap(), (0.0, 1.0)).unwrap();
    let m = |a| DMatrix::from_element(1, 1, a);
    let g = Perturbation::affine(m(0.0), m(0.0), m(-1.0), None, 1.0).unwrap();
    let delay = DelaySpec::constant(0.25, (0.0, 1.0)).unwrap();
    let history = History::constant(v(&[-0.2]), -0.25, 0.0).unwrap();
    let controls = ControlSet::boxed(v(&[-1.0]), v(&[1.0])).unwrap();
    SweepingProblem::new(set, g, delay, history, controls).unwrap()
}

pub fn constant_control(p: &SweepingProblem, u: &[f64]) -> ControlSignal {
    ControlSignal::constant(v(u), p.horizon())
}
