//! Scenarios shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use sweep_core::geometry::{MovingPolyhedron, Polyhedron, Track, Vector};
use sweep_core::problem::{ControlSet, ControlSignal, DelaySpec, History, Perturbation, SweepingProblem};

pub fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

pub fn m1(a: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, a)
}

/// `C(t) = [t, t + 1]`, `g = 0`, `x0 = 0.5`, `T = 1`. Exact solution
/// `max(0.5, t)`.
pub fn moving_interval() -> SweepingProblem {
    let normals = vec![v(&[-1.0]), v(&[1.0])];
    let tracks =
        vec![Track::new(vec![0.0, 1.0], vec![0.0, -1.0]).unwrap(), Track::new(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap()];
    let set = MovingPolyhedron::new(normals, tracks, (0.0, 1.0)).unwrap();
    let delay = DelaySpec::constant(0.5, (0.0, 1.0)).unwrap();
    let history = History::constant(v(&[0.5]), -0.5, 0.0).unwrap();
    SweepingProblem::new(set, Perturbation::zero(1, 1), delay, history, ControlSet::singleton(v(&[0.0]))).unwrap()
}

/// `C = (-∞, 5]`, `g = y`, `δ = 0.5`, `φ = 1`, `T = 1`.
pub fn delayed_feedback() -> SweepingProblem {
    let set = MovingPolyhedron::fixed(Polyhedron::half_space(v(&[1.0]), 5.0).unwrap(), (0.0, 1.0)).unwrap();
    let g = Perturbation::affine(m1(0.0), m1(1.0), m1(0.0), None, 1.0).unwrap().with_lipschitz(1.0);
    let delay = DelaySpec::constant(0.5, (0.0, 1.0)).unwrap();
    let history = History::constant(v(&[1.0]), -0.5, 0.0).unwrap();
    SweepingProblem::new(set, g, delay, history, ControlSet::singleton(v(&[0.0]))).unwrap()
}

/// `C = (-∞, 0]`, `g = u`, `U = [-1, 1]`, `δ = 0.25`, `φ = -0.2`, `T = 1`.
pub fn steering() -> SweepingProblem {
    let set = MovingPolyhedron::fixed(Polyhedron::half_space(v(&[1.0]), 0.0).unwrap(), (0.0, 1.0)).unwrap();
    let g = Perturbation::affine(m1(0.0), m1(0.0), m1(1.0), None, 1.0).unwrap().with_lipschitz(0.0);
    let delay = DelaySpec::constant(0.25, (0.0, 1.0)).unwrap();
    let history = History::constant(v(&[-0.2]), -0.25, 0.0).unwrap();
    let controls = ControlSet::boxed(v(&[-1.0]), v(&[1.0])).unwrap();
    SweepingProblem::new(set, g, delay, history, controls).unwrap()
}

/// Velocity `u + y/2` (`g = -u - y/2`) below the unreached ceiling `x <= 5`,
/// `U = [-1, 1]`, `δ = 0.25`, `φ = 0`, `T = 1`.
pub fn tracking() -> SweepingProblem {
    let set = MovingPolyhedron::fixed(Polyhedron::half_space(v(&[1.0]), 5.0).unwrap(), (0.0, 1.0)).unwrap();
    let g = Perturbation::affine(m1(0.0), m1(-0.5), m1(-1.0), None, 1.0).unwrap();
    let delay = DelaySpec::constant(0.25, (0.0, 1.0)).unwrap();
    let history = History::constant(v(&[0.0]), -0.25, 0.0).unwrap();
    let controls = ControlSet::boxed(v(&[-1.0]), v(&[1.0])).unwrap();
    SweepingProblem::new(set, g, delay, history, controls).unwrap()
}

/// Unit box shrinking toward its lower-left corner, weak delayed feedback,
/// nonincreasing delay track.
pub fn shrinking_box() -> SweepingProblem {
    let horizon = (0.0, 1.0);
    let normals = vec![v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[-1.0, 0.0]), v(&[0.0, -1.0])];
    let tracks = vec![
        Track::new(vec![0.0, 1.0], vec![1.0, 0.4]).unwrap(),
        Track::new(vec![0.0, 0.5, 1.0], vec![1.0, 0.8, 0.4]).unwrap(),
        Track::constant(0.0),
        Track::constant(0.0),
    ];
    let set = MovingPolyhedron::new(normals, tracks, horizon).unwrap();
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.02, -0.02, 0.0]);
    let b = DMatrix::from_diagonal_element(2, 2, 0.02);
    let d = DMatrix::from_diagonal_element(2, 2, 0.05);
    let g = Perturbation::affine(a, b, d, None, 0.1).unwrap();
    let delay = DelaySpec::track(Track::new(vec![0.0, 0.5, 1.0], vec![0.3, 0.2, 0.2]).unwrap(), horizon).unwrap();
    let history = History::new(vec![-0.3, -0.1, 0.0], vec![v(&[0.2, 0.1]), v(&[0.8, 0.5]), v(&[0.9, 0.95])]).unwrap();
    let controls = ControlSet::boxed(v(&[-1.0, -1.0]), v(&[1.0, 1.0])).unwrap();
    SweepingProblem::new(set, g, delay, history, controls).unwrap()
}

/// Static triangle `{x1 <= 1, x2 <= 1, x1 + x2 >= 0}` with sine forcing.
pub fn forced_triangle() -> SweepingProblem {
    let horizon = (0.0, 1.25);
    let poly = Polyhedron::new(vec![v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[-1.0, -1.0])], vec![1.0, 1.0, 0.0]).unwrap();
    let set = MovingPolyhedron::fixed(poly, horizon).unwrap();
    let mut params = BTreeMap::new();
    params.insert("amplitude".to_string(), 0.05);
    params.insert("frequency".to_string(), 6.0);
    params.insert("ky".to_string(), -0.01);
    params.insert("ku".to_string(), 0.01);
    let g = Perturbation::catalog("sine_forcing", &params, 2, 0.09).unwrap();
    let delay = DelaySpec::constant(0.4, horizon).unwrap();
    let history = History::constant(v(&[0.5, 0.0]), -0.4, 0.0).unwrap();
    let controls = ControlSet::boxed(v(&[-1.0, -1.0]), v(&[1.0, 1.0])).unwrap();
    SweepingProblem::new(set, g, delay, history, controls).unwrap()
}

pub fn constant_control(p: &SweepingProblem, u: &[f64]) -> ControlSignal {
    ControlSignal::constant(v(u), p.horizon())
}

/// Suite scenarios with the control used to simulate them.
pub fn suite() -> Vec<(&'static str, SweepingProblem, ControlSignal)> {
    let mut out = Vec::new();
    let p = moving_interval();
    out.push(("moving_interval", p.clone(), constant_control(&p, &[0.0])));
    let p = delayed_feedback();
    out.push(("delayed_feedback", p.clone(), constant_control(&p, &[0.0])));
    let p = steering();
    let u = ControlSignal::new(vec![0.0, 0.25, 0.6], vec![v(&[0.5]), v(&[-1.0]), v(&[1.0])], (0.0, 1.0)).unwrap();
    out.push(("steering", p, u));
    let p = tracking();
    out.push(("tracking", p.clone(), constant_control(&p, &[0.5])));
    let p = shrinking_box();
    let u = ControlSignal::new(vec![0.0, 0.5], vec![v(&[1.0, 1.0]), v(&[-1.0, 0.5])], (0.0, 1.0)).unwrap();
    out.push(("shrinking_box", p, u));
    let p = forced_triangle();
    out.push(("forced_triangle", p.clone(), constant_control(&p, &[1.0, -1.0])));
    out
}

pub mod oracles;
