//! Discrete Mayer problems around a reference pair: objective, constraint
//! report, control-parameterized rollout, a multi-start local solver and a
//! brute-force grid oracle.
//!
//! States are eliminated by the catching-up rollout
//! `x_{i+1} = proj_C(x_i + h (drift_i + r_i ρ_i))`, so the decision variables
//! are the interval controls alone. Proximity and energy constraints are
//! enforced by an exact penalty with ramped weights and re-checked hard.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{dist_l2, dist_w12, Signal};
use crate::catchup::{arc_lookup, Mesh, Trajectory};
use crate::discretize::{compute_residuals, sample_pair, DiscretePair};
use crate::error::{Result, SweepError};
use crate::geometry::{Polyhedron, Vector};
use crate::problem::{ControlSet, ControlSignal, SweepingProblem};

/// Largest number of rollouts the grid oracle will enumerate.
pub const ENUMERATION_GUARD: f64 = 1e7;

#[derive(Clone, Debug, PartialEq)]
pub enum MayerCost {
    /// `|x - target|²`
    Quadratic { target: Vector },
    /// `<q, x>`
    Linear { q: Vector },
}

impl MayerCost {
    pub fn eval(&self, x: &Vector) -> f64 {
        match self {
            Self::Quadratic { target } => (x - target).norm_squared(),
            Self::Linear { q } => q.dot(x),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Quadratic { target } => target.len(),
            Self::Linear { q } => q.len(),
        }
    }
}

/// Decision vector of a discrete problem with its derived delayed states.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    /// `2^m + 1` node states.
    pub states: Vec<Vector>,
    /// `y_i = x_m(t_i - δ(t_i))` for the `2^m + 1` nodes.
    pub delayed: Vec<Vector>,
    /// `2^m` interval controls.
    pub controls: Vec<Vector>,
}

impl Candidate {
    fn lexicographic(&self, other: &Self) -> Ordering {
        let a = self.controls.iter().flat_map(|u| u.iter());
        let b = other.controls.iter().flat_map(|u| u.iter());
        for (x, y) in a.zip(b) {
            match x.total_cmp(y) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }
}

/// Per-constraint violations; zero means satisfied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct FeasibilityReport {
    /// Distance of `drift_i + r_i ρ_i - ω_i` to `N_C(x_i)`.
    pub dynamics: f64,
    /// Largest distance of a node state to `C`.
    pub state_in_set: f64,
    /// Largest `<a_j, x_N> - c_j` deficit at the final node.
    pub endpoint: f64,
    /// `|x_0 - φ(t0)|`.
    pub initial: f64,
    /// Largest excess of `|ω_i|` over the Lipschitz cap.
    pub lipschitz: f64,
    /// Largest excess of `|x_i - x̄(t_i)|` over `ε/2`.
    pub state_proximity: f64,
    /// Largest excess of `|y_i - x̄(t_i - δ(t_i))|` over `ε/2`.
    pub delayed_proximity: f64,
    /// Largest distance of a control to `U`.
    pub control: f64,
    /// Excess of the proximity energy over `ε/2`.
    pub energy: f64,
}

impl FeasibilityReport {
    fn values(&self) -> [f64; 9] {
        [
            self.dynamics,
            self.state_in_set,
            self.endpoint,
            self.initial,
            self.lipschitz,
            self.state_proximity,
            self.delayed_proximity,
            self.control,
            self.energy,
        ]
    }

    pub fn max_violation(&self) -> f64 {
        self.values().into_iter().fold(0.0, f64::max)
    }

    /// Sum of all violations, the exact-penalty measure.
    pub fn total(&self) -> f64 {
        self.values().iter().sum()
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }
}

/// Integrals over one mesh interval of the reference velocity, lagged
/// reference velocity and reference control, and of their squared norms.
#[derive(Clone, Debug, PartialEq)]
struct Moments {
    x1: Vector,
    x2: f64,
    y1: Vector,
    y2: f64,
    u1: Vector,
    u2: f64,
}

/// The discrete problem of level `m` around a reference pair.
#[derive(Clone, Debug)]
pub struct DiscreteOcp {
    level: u32,
    mesh: Mesh,
    problem: SweepingProblem,
    set: Polyhedron,
    cost: MayerCost,
    reference: Trajectory,
    ubar: ControlSignal,
    epsilon: f64,
    lipschitz_cap: f64,
    sampled: DiscretePair,
    lags: Vec<f64>,
    xbar_nodes: Vec<Vector>,
    ybar_nodes: Vec<Vector>,
    moments: Vec<Moments>,
}

impl DiscreteOcp {
    /// Builds the problem; the Lipschitz cap defaults to 1.5 times the
    /// reference's.
    pub fn new(
        problem: &SweepingProblem,
        cost: MayerCost,
        reference: &Trajectory,
        ubar: &ControlSignal,
        level: u32,
        epsilon: f64,
        lipschitz_cap: Option<f64>,
    ) -> Result<Self> {
        if !problem.moving_set().is_static() {
            return Err(SweepError::InvalidInput("discrete problems need a static set".into()));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(SweepError::InvalidInput(format!("epsilon {epsilon} must be finite and >= 0")));
        }
        if cost.dim() != problem.dim() {
            return Err(SweepError::DimensionMismatch(format!(
                "cost acts on dimension {}, state has {}",
                cost.dim(),
                problem.dim()
            )));
        }
        problem.check_control(ubar)?;
        let lipschitz_cap = lipschitz_cap.unwrap_or(1.5 * reference.lipschitz());
        if !(lipschitz_cap >= 0.0) {
            return Err(SweepError::InvalidInput(format!("Lipschitz cap {lipschitz_cap} must be >= 0")));
        }
        let sampled = compute_residuals(&sample_pair(problem, reference, ubar, level)?, problem)?;
        let mesh = sampled.mesh;
        let lags = sampled.lags.clone();
        let xbar_nodes = sampled.states.clone();
        let ybar_nodes = lags.iter().map(|&s| reference.eval(s)).collect::<Result<Vec<_>>>()?;
        let moments = interval_moments(problem, &mesh, reference, ubar);
        Ok(Self {
            level,
            mesh,
            problem: problem.clone(),
            set: problem.moving_set().initial().clone(),
            cost,
            reference: reference.clone(),
            ubar: ubar.clone(),
            epsilon,
            lipschitz_cap,
            sampled,
            lags,
            xbar_nodes,
            ybar_nodes,
            moments,
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn problem(&self) -> &SweepingProblem {
        &self.problem
    }

    pub fn cost(&self) -> &MayerCost {
        &self.cost
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn lipschitz_cap(&self) -> f64 {
        self.lipschitz_cap
    }

    pub fn reference(&self) -> &Trajectory {
        &self.reference
    }

    pub fn reference_control(&self) -> &ControlSignal {
        &self.ubar
    }

    /// The sampled reference pair with its residual schedule.
    pub fn sampled(&self) -> &DiscretePair {
        &self.sampled
    }

    /// Cost of the reference pair, `φ(x̄(T))`.
    pub fn reference_objective(&self) -> f64 {
        self.cost.eval(self.reference.final_state())
    }

    /// The sampled reference pair as a candidate.
    pub fn sampled_candidate(&self) -> Candidate {
        Candidate {
            states: self.sampled.states.clone(),
            delayed: self.sampled.delayed.clone(),
            controls: self.sampled.controls.clone(),
        }
    }

    fn intervals(&self) -> usize {
        self.mesh.k()
    }

    /// Candidate with the given states and controls; delayed states are
    /// derived.
    pub fn candidate(&self, states: Vec<Vector>, controls: Vec<Vector>) -> Result<Candidate> {
        let k = self.intervals();
        if states.len() != k + 1 || controls.len() != k {
            return Err(SweepError::DimensionMismatch(format!(
                "{} states and {} controls for {} intervals",
                states.len(),
                controls.len(),
                k
            )));
        }
        let delayed =
            (0..=k).map(|i| arc_lookup(&states, &self.mesh, self.problem.history(), self.lags[i], i)).collect();
        Ok(Candidate { states, delayed, controls })
    }

    fn check_dims(&self, c: &Candidate) -> Result<()> {
        let k = self.intervals();
        let (n, d) = (self.problem.dim(), self.problem.control_dim());
        let ok = c.states.len() == k + 1
            && c.delayed.len() == k + 1
            && c.controls.len() == k
            && c.states.iter().chain(&c.delayed).all(|x| x.len() == n)
            && c.controls.iter().all(|u| u.len() == d);
        if ok {
            Ok(())
        } else {
            Err(SweepError::DimensionMismatch(format!("candidate does not match level {}", self.level)))
        }
    }

    /// Proximity energy: the sum over intervals of the integrals of
    /// `|ω_i - x̄'|² + |ψ_i - x̄'(· - δ)|² + |u_i - ū|²`.
    pub fn energy(&self, c: &Candidate) -> Result<f64> {
        self.check_dims(c)?;
        Ok(self.energy_unchecked(c))
    }

    fn energy_unchecked(&self, c: &Candidate) -> f64 {
        let h = self.mesh.step();
        let quad = |a: &Vector, m1: &Vector, m2: f64| (h * a.norm_squared() - 2.0 * a.dot(m1) + m2).max(0.0);
        (0..self.intervals())
            .map(|i| {
                let m = &self.moments[i];
                let w = (&c.states[i + 1] - &c.states[i]) / h;
                let psi = (&c.delayed[i + 1] - &c.delayed[i]) / h;
                quad(&w, &m.x1, m.x2) + quad(&psi, &m.y1, m.y2) + quad(&c.controls[i], &m.u1, m.u2)
            })
            .sum()
    }

    /// `φ(x_N)` plus the proximity energy.
    pub fn objective(&self, c: &Candidate) -> Result<f64> {
        self.check_dims(c)?;
        Ok(self.objective_unchecked(c))
    }

    fn objective_unchecked(&self, c: &Candidate) -> f64 {
        self.cost.eval(c.states.last().unwrap()) + self.energy_unchecked(c)
    }

    /// Constraint violations of `c`. Report-only; mismatched dimensions give
    /// infinite violations.
    pub fn feasibility(&self, c: &Candidate) -> FeasibilityReport {
        if self.check_dims(c).is_err() {
            let inf = f64::INFINITY;
            return FeasibilityReport {
                dynamics: inf,
                state_in_set: inf,
                endpoint: inf,
                initial: inf,
                lipschitz: inf,
                state_proximity: inf,
                delayed_proximity: inf,
                control: inf,
                energy: inf,
            };
        }
        let k = self.intervals();
        let h = self.mesh.step();
        let half = 0.5 * self.epsilon;
        let res = self.sampled.residuals.as_ref().expect("residuals computed at construction");
        let mut rep = FeasibilityReport::default();
        for i in 0..k {
            let t = self.mesh.node(i);
            let x = &c.states[i];
            let w = (&c.states[i + 1] - x) / h;
            let mut target = self.problem.drift(t, x, &c.delayed[i], &c.controls[i]);
            target.axpy(res.radii[i], &res.directions[i], 1.0);
            target -= &w;
            let dyn_viol = match self.set.normal_cone_decompose(x, &target) {
                Ok(dec) => dec.distance(),
                Err(_) => target.norm(),
            };
            rep.dynamics = rep.dynamics.max(dyn_viol);
            rep.lipschitz = rep.lipschitz.max(w.norm() - self.lipschitz_cap);
            rep.state_proximity = rep.state_proximity.max((x - &self.xbar_nodes[i]).norm() - half);
            rep.delayed_proximity = rep.delayed_proximity.max((&c.delayed[i] - &self.ybar_nodes[i]).norm() - half);
            rep.control = rep.control.max(self.problem.controls().distance(&c.controls[i]));
        }
        for x in &c.states {
            rep.state_in_set = rep.state_in_set.max(self.set.max_violation(x));
        }
        rep.endpoint = self.set.max_violation(&c.states[k]).max(0.0);
        rep.initial = (&c.states[0] - self.problem.x0()).norm();
        rep.energy = self.energy_unchecked(c) - half;
        rep.lipschitz = rep.lipschitz.max(0.0);
        rep.state_proximity = rep.state_proximity.max(0.0);
        rep.delayed_proximity = rep.delayed_proximity.max(0.0);
        rep.energy = rep.energy.max(0.0);
        rep
    }

    /// States generated by the catching-up step with the residual schedule.
    pub fn rollout(&self, controls: &[Vector]) -> Result<Candidate> {
        let k = self.intervals();
        if controls.len() != k || controls.iter().any(|u| u.len() != self.problem.control_dim()) {
            return Err(SweepError::DimensionMismatch(format!("{} controls for {} intervals", controls.len(), k)));
        }
        let mut c = Candidate {
            states: vec![self.problem.x0(); k + 1],
            delayed: vec![self.problem.x0(); k + 1],
            controls: controls.to_vec(),
        };
        self.rollout_from(&mut c, 0)?;
        Ok(c)
    }

    /// Recomputes states after node `from` and the delayed states from
    /// `from` on, for controls changed at intervals `>= from`.
    fn rollout_from(&self, c: &mut Candidate, from: usize) -> Result<()> {
        let k = self.intervals();
        let h = self.mesh.step();
        let res = self.sampled.residuals.as_ref().expect("residuals computed at construction");
        let history = self.problem.history();
        for i in from..k {
            let t = self.mesh.node(i);
            c.delayed[i] = arc_lookup(&c.states, &self.mesh, history, self.lags[i], i);
            let mut z = self.problem.drift(t, &c.states[i], &c.delayed[i], &c.controls[i]);
            z.axpy(res.radii[i], &res.directions[i], 1.0);
            z *= h;
            z += &c.states[i];
            c.states[i + 1] = self.set.project(&z)?.point;
        }
        c.delayed[k] = arc_lookup(&c.states, &self.mesh, history, self.lags[k], k);
        Ok(())
    }

    /// `x̂` as a trajectory joined with the history.
    pub fn state_trajectory(&self, c: &Candidate) -> Result<Trajectory> {
        Trajectory::from_nodes(self.mesh, c.states.clone(), self.problem.history().clone())
    }

    pub fn control_signal(&self, c: &Candidate) -> Result<Signal> {
        let nodes = self.mesh.nodes();
        Signal::step(nodes[..self.intervals()].to_vec(), c.controls.clone(), self.mesh.horizon().1)
    }
}

/// Exact interval integrals of the piecewise-constant reference velocity,
/// lagged velocity (history slope before `t0`) and reference control, on the
/// partition merging all their breakpoints.
fn interval_moments(p: &SweepingProblem, mesh: &Mesh, xbar: &Trajectory, ubar: &ControlSignal) -> Vec<Moments> {
    let (t0, t1) = mesh.horizon();
    let fine = xbar.fine_mesh().nodes();
    let mut sources: Vec<f64> = fine.clone();
    sources.extend(xbar.history().times().iter().copied());
    sources.sort_by(f64::total_cmp);
    sources.dedup();

    let mut cuts = mesh.nodes();
    cuts.extend(fine.iter().copied());
    cuts.extend(ubar.times().iter().copied().filter(|&t| t > t0 && t < t1));
    cuts.extend(p.delay().breakpoints());
    cuts.extend(p.delay().lag_preimages(&sources));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let (n, d) = (p.dim(), p.control_dim());
    let mut out: Vec<Moments> = (0..mesh.k())
        .map(|_| Moments {
            x1: Vector::zeros(n),
            x2: 0.0,
            y1: Vector::zeros(n),
            y2: 0.0,
            u1: Vector::zeros(d),
            u2: 0.0,
        })
        .collect();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        let len = b - a;
        let mid = 0.5 * (a + b);
        let m = &mut out[mesh.interval_of(mid)];
        let fx = xbar.velocity_at(mid);
        let fy = xbar.velocity_at(p.delay().lag_unchecked(mid));
        let fu = ubar.eval_unchecked(mid);
        m.x1.axpy(len, &fx, 1.0);
        m.x2 += len * fx.norm_squared();
        m.y1.axpy(len, &fy, 1.0);
        m.y2 += len * fy.norm_squared();
        m.u1.axpy(len, fu, 1.0);
        m.u2 += len * fu.norm_squared();
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_sweeps: usize,
    pub golden_iters: usize,
    /// Penalty weights of the successive stages.
    pub penalty_weights: Vec<f64>,
    pub feasibility_tol: f64,
}

impl Default for LocalOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            seed: 0,
            max_sweeps: 60,
            golden_iters: 40,
            penalty_weights: vec![1e1, 1e2, 1e3, 1e4],
            feasibility_tol: 1e-9,
        }
    }
}

/// Penalized objective after each sweep of one stage, starting with the
/// value at entry.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageTrace {
    pub weight: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StartTrace {
    pub start: usize,
    pub stages: Vec<StageTrace>,
    pub objective: f64,
    pub max_violation: f64,
    pub evaluations: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolverTrace {
    pub starts: Vec<StartTrace>,
    pub best_start: Option<usize>,
    pub evaluations: u64,
    pub feasible_evaluations: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub candidate: Candidate,
    pub objective: f64,
    pub feasibility: FeasibilityReport,
    pub feasible: bool,
    pub trace: SolverTrace,
}

/// Orders results: feasible first, then by objective, then lexicographically
/// by controls.
fn better(a: (&Candidate, f64, bool), b: (&Candidate, f64, bool)) -> Ordering {
    b.2.cmp(&a.2).then(a.1.total_cmp(&b.1)).then_with(|| a.0.lexicographic(b.0))
}

struct Search<'a> {
    ocp: &'a DiscreteOcp,
    weight: f64,
    evaluations: u64,
}

impl Search<'_> {
    fn penalized(&mut self, c: &Candidate) -> f64 {
        self.evaluations += 1;
        self.ocp.objective_unchecked(c) + self.weight * self.ocp.feasibility(c).total()
    }

    /// Value of the penalized objective with `controls[i][j] = value`.
    fn try_scalar(&mut self, c: &mut Candidate, i: usize, j: usize, value: f64) -> Result<f64> {
        c.controls[i][j] = value;
        self.ocp.rollout_from(c, i)?;
        Ok(self.penalized(c))
    }

    fn try_point(&mut self, c: &mut Candidate, i: usize, value: &Vector) -> Result<f64> {
        c.controls[i].copy_from(value);
        self.ocp.rollout_from(c, i)?;
        Ok(self.penalized(c))
    }

    /// One pass over all control coordinates; returns the new value.
    fn sweep(&mut self, c: &mut Candidate, mut current: f64, golden_iters: usize) -> Result<f64> {
        let k = self.ocp.intervals();
        match self.ocp.problem.controls() {
            ControlSet::Box { lower, upper } => {
                for i in 0..k {
                    for j in 0..lower.len() {
                        let (lo, hi) = (lower[j], upper[j]);
                        if hi <= lo {
                            continue;
                        }
                        let keep = c.controls[i][j];
                        let mut best = (current, keep);
                        for v in [lo, hi] {
                            let f = self.try_scalar(c, i, j, v)?;
                            if f < best.0 {
                                best = (f, v);
                            }
                        }
                        let (v, f) = self.golden(c, i, j, lo, hi, golden_iters)?;
                        if f < best.0 {
                            best = (f, v);
                        }
                        self.try_scalar(c, i, j, best.1)?;
                        self.evaluations -= 1;
                        current = best.0;
                    }
                }
            }
            ControlSet::Finite(points) => {
                for i in 0..k {
                    let keep = c.controls[i].clone();
                    let mut best = (current, keep);
                    for pnt in points {
                        let f = self.try_point(c, i, pnt)?;
                        if f < best.0 {
                            best = (f, pnt.clone());
                        }
                    }
                    self.try_point(c, i, &best.1)?;
                    self.evaluations -= 1;
                    current = best.0;
                }
            }
        }
        Ok(current)
    }

    fn golden(&mut self, c: &mut Candidate, i: usize, j: usize, lo: f64, hi: f64, iters: usize) -> Result<(f64, f64)> {
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (lo, hi);
        let mut x1 = b - ratio * (b - a);
        let mut x2 = a + ratio * (b - a);
        let mut f1 = self.try_scalar(c, i, j, x1)?;
        let mut f2 = self.try_scalar(c, i, j, x2)?;
        for _ in 0..iters {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - ratio * (b - a);
                f1 = self.try_scalar(c, i, j, x1)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + ratio * (b - a);
                f2 = self.try_scalar(c, i, j, x2)?;
            }
        }
        Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
    }
}

fn run_start(
    ocp: &DiscreteOcp,
    start: usize,
    controls: Vec<Vector>,
    opts: &LocalOptions,
) -> Result<(Candidate, StartTrace)> {
    let mut c = ocp.rollout(&controls)?;
    let mut search = Search { ocp, weight: 0.0, evaluations: 0 };
    let mut stages = Vec::new();
    for &weight in &opts.penalty_weights {
        search.weight = weight;
        let mut current = search.penalized(&c);
        let mut values = vec![current];
        for _ in 0..opts.max_sweeps {
            let next = search.sweep(&mut c, current, opts.golden_iters)?;
            values.push(next);
            let gain = current - next;
            current = next;
            if gain <= 1e-14 * (1.0 + current.abs()) {
                break;
            }
        }
        stages.push(StageTrace { weight, values });
    }
    let objective = ocp.objective_unchecked(&c);
    let max_violation = ocp.feasibility(&c).max_violation();
    let trace = StartTrace { start, stages, objective, max_violation, evaluations: search.evaluations };
    Ok((c, trace))
}

fn start_controls(ocp: &DiscreteOcp, start: usize, seed: u64) -> Vec<Vector> {
    if start == 0 {
        return ocp.sampled.controls.iter().map(|u| ocp.problem.controls().project(u)).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(start as u64);
    (0..ocp.intervals()).map(|_| ocp.problem.controls().sample(&mut rng)).collect()
}

/// Multi-start projected coordinate descent with golden-section line search.
/// Start 0 is the sampled reference control; the rest are seeded uniform
/// draws from `U`. Starts run concurrently and merge deterministically.
pub fn solve_local(ocp: &DiscreteOcp, opts: &LocalOptions) -> Result<SolveResult> {
    if opts.starts == 0 {
        return Err(SweepError::InvalidInput("at least one start is required".into()));
    }
    let sampled = ocp.feasibility(&ocp.sampled_candidate());
    if !sampled.is_feasible(opts.feasibility_tol) {
        return Err(SweepError::NoFeasibleStart(sampled.max_violation()));
    }
    let runs = (0..opts.starts)
        .into_par_iter()
        .map(|s| run_start(ocp, s, start_controls(ocp, s, opts.seed), opts))
        .collect::<Result<Vec<_>>>()?;
    let tol = opts.feasibility_tol;
    let best = (0..runs.len())
        .min_by(|&a, &b| {
            let (ca, ta) = &runs[a];
            let (cb, tb) = &runs[b];
            better((ca, ta.objective, ta.max_violation <= tol), (cb, tb.objective, tb.max_violation <= tol))
        })
        .expect("at least one start");
    let evaluations = runs.iter().map(|(_, t)| t.evaluations).sum();
    let candidate = runs[best].0.clone();
    let feasibility = ocp.feasibility(&candidate);
    let trace = SolverTrace {
        starts: runs.into_iter().map(|(_, t)| t).collect(),
        best_start: Some(best),
        evaluations,
        feasible_evaluations: 0,
    };
    Ok(SolveResult {
        objective: ocp.objective_unchecked(&candidate),
        feasible: feasibility.is_feasible(tol),
        feasibility,
        candidate,
        trace,
    })
}

/// Control values tried per interval by the oracle.
/// Number of rollouts the grid oracle enumerates over `intervals` controls.
pub fn oracle_rollout_count(set: &ControlSet, per_control: usize, intervals: usize) -> f64 {
    let per_interval: f64 = match set {
        ControlSet::Finite(points) => points.len() as f64,
        ControlSet::Box { lower, upper } => (0..lower.len())
            .map(|j| if per_control <= 1 || upper[j] == lower[j] { 1.0 } else { per_control as f64 })
            .product(),
    };
    per_interval.powf(intervals as f64)
}

fn grid_points(set: &ControlSet, per_control: usize) -> Vec<Vector> {
    match set {
        ControlSet::Finite(points) => points.clone(),
        ControlSet::Box { lower, upper } => {
            let d = lower.len();
            let axis = |j: usize| -> Vec<f64> {
                if per_control <= 1 || upper[j] == lower[j] {
                    vec![0.5 * (lower[j] + upper[j])]
                } else {
                    (0..per_control)
                        .map(|g| lower[j] + (upper[j] - lower[j]) * (g as f64 / (per_control - 1) as f64))
                        .collect()
                }
            };
            let mut out = vec![Vector::zeros(d)];
            for j in 0..d {
                let vals = axis(j);
                out = out
                    .iter()
                    .flat_map(|p| {
                        vals.iter().map(move |&v| {
                            let mut q = p.clone();
                            q[j] = v;
                            q
                        })
                    })
                    .collect();
            }
            out
        }
    }
}

/// Exhaustive search over the control grid (the set itself for finite `U`),
/// keeping the best feasible candidate.
pub fn solve_oracle(ocp: &DiscreteOcp, grid_per_control: usize, feasibility_tol: f64) -> Result<SolveResult> {
    if grid_per_control == 0 {
        return Err(SweepError::InvalidInput("grid needs at least one value per control".into()));
    }
    let k = ocp.intervals();
    let count_f = oracle_rollout_count(ocp.problem.controls(), grid_per_control, k);
    if count_f > ENUMERATION_GUARD {
        return Err(SweepError::EnumerationTooLarge { count: count_f, limit: ENUMERATION_GUARD });
    }
    let points = grid_points(ocp.problem.controls(), grid_per_control);
    let count = count_f as u64;
    let base = points.len() as u64;
    let evaluate = |idx: u64| -> Result<Option<(Candidate, f64)>> {
        let mut rest = idx;
        let mut controls = vec![points[0].clone(); k];
        for i in (0..k).rev() {
            controls[i] = points[(rest % base) as usize].clone();
            rest /= base;
        }
        let c = ocp.rollout(&controls)?;
        if ocp.feasibility(&c).is_feasible(feasibility_tol) {
            let j = ocp.objective_unchecked(&c);
            Ok(Some((c, j)))
        } else {
            Ok(None)
        }
    };
    let pick = |a: Option<(Candidate, f64)>, b: Option<(Candidate, f64)>| match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            if better((&a.0, a.1, true), (&b.0, b.1, true)) == Ordering::Greater {
                Some(b)
            } else {
                Some(a)
            }
        }
    };
    let (best, feasible_count) = (0..count)
        .into_par_iter()
        .map(|idx| {
            evaluate(idx).map(|r| {
                let n = r.is_some() as u64;
                (r, n)
            })
        })
        .try_reduce(|| (None, 0), |a, b| Ok((pick(a.0, b.0), a.1 + b.1)))?;
    let (candidate, objective) = best.ok_or(SweepError::NoFeasibleCandidate(count))?;
    let feasibility = ocp.feasibility(&candidate);
    Ok(SolveResult {
        candidate,
        objective,
        feasible: true,
        feasibility,
        trace: SolverTrace {
            starts: Vec::new(),
            best_start: None,
            evaluations: count,
            feasible_evaluations: feasible_count,
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StudyRow {
    pub level: u32,
    pub objective: f64,
    /// `J[x̄, ū] = φ(x̄(T))`.
    pub reference_objective: f64,
    pub x_w12: f64,
    pub u_l2: f64,
    pub feasible: bool,
}

impl StudyRow {
    pub const HEADER: [&'static str; 6] = ["level", "objective", "reference_objective", "x_w12", "u_l2", "feasible"];
}

/// Solves the discrete problems for each level and measures the solutions
/// against the reference pair.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study_optimal(
    problem: &SweepingProblem,
    cost: &MayerCost,
    reference: &Trajectory,
    ubar: &ControlSignal,
    levels: &[u32],
    epsilon: f64,
    lipschitz_cap: Option<f64>,
    opts: &LocalOptions,
) -> Result<Vec<StudyRow>> {
    let xs = reference.signal();
    let us = Signal::from_control(ubar);
    levels
        .iter()
        .map(|&m| {
            let ocp = DiscreteOcp::new(problem, cost.clone(), reference, ubar, m, epsilon, lipschitz_cap)?;
            let sol = solve_local(&ocp, opts)?;
            Ok(StudyRow {
                level: m,
                objective: sol.objective,
                reference_objective: ocp.reference_objective(),
                x_w12: dist_w12(&ocp.state_trajectory(&sol.candidate)?.signal(), &xs)?,
                u_l2: dist_l2(&ocp.control_signal(&sol.candidate)?, &us)?,
                feasible: sol.feasible,
            })
        })
        .collect()
}
