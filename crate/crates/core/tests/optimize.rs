mod common;

use sweep_core::catchup::{solve_delayed, SolveOptions, Trajectory};
use sweep_core::geometry::Vector;
use sweep_core::optimize::{solve_local, solve_oracle, LocalOptions};
use sweep_core::{DiscreteOcp, MayerCost, SweepError, SweepingProblem};

use common::oracles::midpoint_l2;
use common::*;

fn reference(p: &SweepingProblem, u: &sweep_core::ControlSignal) -> Trajectory {
    solve_delayed(p, u, 1 << 10, &SolveOptions::default()).unwrap().0
}

fn steering_ocp(m: u32) -> DiscreteOcp {
    let p = steering();
    let u = constant_control(&p, &[0.0]);
    let xbar = reference(&p, &u);
    DiscreteOcp::new(&p, MayerCost::Quadratic { target: v(&[-0.5]) }, &xbar, &u, m, 1.0, Some(2.0)).unwrap()
}

/// Energy by brute-force midpoint quadrature of the three squared
/// differences.
fn quadrature_energy(ocp: &DiscreteOcp, c: &sweep_core::Candidate) -> f64 {
    let p = ocp.problem();
    let mesh = ocp.mesh();
    let h = mesh.step();
    let (t0, t1) = p.horizon();
    let piece = |vals: Vec<Vector>| move |t: f64| vals[mesh.interval_of(t).min(vals.len() - 1)].clone();
    let omega: Vec<Vector> = c.states.windows(2).map(|w| (&w[1] - &w[0]) / h).collect();
    let psi: Vec<Vector> = c.delayed.windows(2).map(|w| (&w[1] - &w[0]) / h).collect();
    let xbar = ocp.reference();
    let ubar = ocp.reference_control();
    let n = 1 << 18;
    let ex = midpoint_l2(piece(omega), |t| xbar.velocity_at(t), t0, t1, n);
    let ey = midpoint_l2(piece(psi), |t| xbar.velocity_at(p.lag(t).unwrap()), t0, t1, n);
    let eu = midpoint_l2(piece(c.controls.clone()), |t| ubar.eval(t).unwrap(), t0, t1, n);
    ex * ex + ey * ey + eu * eu
}

#[test]
fn objective_audit_against_quadrature() {
    let ocp = steering_ocp(3);
    let res = solve_local(&ocp, &LocalOptions { starts: 3, ..Default::default() }).unwrap();
    let c = &res.candidate;
    let energy = ocp.energy(c).unwrap();
    assert!((energy - quadrature_energy(&ocp, c)).abs() <= 1e-4, "{energy}");
    let phi = ocp.cost().eval(c.states.last().unwrap());
    assert!((res.objective - (phi + energy)).abs() <= 1e-12);
    assert_eq!(res.objective, ocp.objective(c).unwrap());
    assert_eq!(res.feasibility, ocp.feasibility(c));
    assert!(res.feasible && res.feasibility.is_feasible(1e-9));
}

#[test]
fn local_solution_is_rollout_of_its_controls() {
    let ocp = steering_ocp(3);
    let res = solve_local(&ocp, &LocalOptions { starts: 2, ..Default::default() }).unwrap();
    let again = ocp.rollout(&res.candidate.controls).unwrap();
    assert_eq!(again, res.candidate);
    let set = ocp.problem().set_at(0.0);
    assert!(res.candidate.states.iter().all(|x| set.max_violation(x) <= 1e-12));
}

#[test]
fn local_search_dominates_grid_oracle_on_tracking() {
    let p = tracking();
    let u = constant_control(&p, &[0.5]);
    let xbar = reference(&p, &u);
    let cost = MayerCost::Quadratic { target: xbar.final_state().clone() };
    let ocp = DiscreteOcp::new(&p, cost, &xbar, &u, 2, 1.0, None).unwrap();
    let oracle = solve_oracle(&ocp, 5, 1e-9).unwrap();
    let local = solve_local(&ocp, &LocalOptions { starts: 4, ..Default::default() }).unwrap();
    assert_eq!(oracle.trace.evaluations, 625);
    assert!(local.objective <= oracle.objective + 1e-3);
    assert!(local.objective <= ocp.objective(&ocp.sampled_candidate()).unwrap() + 1e-12);
}

#[test]
fn solver_is_deterministic_and_traces_are_monotone() {
    let ocp = steering_ocp(2);
    let opts = LocalOptions { starts: 4, seed: 11, ..Default::default() };
    let a = solve_local(&ocp, &opts).unwrap();
    let b = solve_local(&ocp, &opts).unwrap();
    assert_eq!(a.candidate, b.candidate);
    assert_eq!(a.trace, b.trace);
    for start in &a.trace.starts {
        for stage in &start.stages {
            assert!(stage.values.windows(2).all(|w| w[1] <= w[0]), "start {}", start.start);
        }
    }
    assert!(a.trace.best_start.is_some());
}

#[test]
fn linear_cost_pushes_to_boundary() {
    let p = steering();
    let u = constant_control(&p, &[0.0]);
    let xbar = reference(&p, &u);
    // maximise x(T): the boundary x = 0 is the best reachable endpoint
    let ocp = DiscreteOcp::new(&p, MayerCost::Linear { q: v(&[-1.0]) }, &xbar, &u, 2, 1.0, Some(2.0)).unwrap();
    let res = solve_local(&ocp, &LocalOptions { starts: 4, ..Default::default() }).unwrap();
    let end = res.candidate.states.last().unwrap()[0];
    assert!(end > -0.2 && end <= 1e-12, "{end}");
    assert!(res.feasibility.endpoint == 0.0);
}

#[test]
fn enumeration_guard_and_infeasible_grid() {
    let ocp = steering_ocp(6);
    assert!(matches!(solve_oracle(&ocp, 2, 1e-9), Err(SweepError::EnumerationTooLarge { .. })));
    // ε = 0 leaves no feasible candidate other than the exact samples
    let p = steering();
    let u = constant_control(&p, &[0.0]);
    let xbar = reference(&p, &u);
    let ocp = DiscreteOcp::new(&p, MayerCost::Quadratic { target: v(&[-0.5]) }, &xbar, &u, 1, 0.0, Some(2.0)).unwrap();
    assert!(matches!(solve_oracle(&ocp, 2, 1e-9), Err(SweepError::NoFeasibleCandidate(4))));
    assert!(DiscreteOcp::new(&p, MayerCost::Linear { q: v(&[1.0]) }, &xbar, &u, 1, -1.0, None).is_err());
}

#[test]
fn moving_sets_are_rejected() {
    let p = moving_interval();
    let u = constant_control(&p, &[0.0]);
    let xbar = reference(&p, &u);
    assert!(DiscreteOcp::new(&p, MayerCost::Linear { q: v(&[1.0]) }, &xbar, &u, 2, 1.0, None).is_err());
}
