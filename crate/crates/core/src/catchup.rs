//! Frozen-delay catching-up solver.
//!
//! The horizon is split into `k` outer intervals. On `[t_i, t_{i+1}]` the
//! forcing `h(t) = g(t, x(t_i), x(t_i - δ(t_i)), u(t_i))` is frozen in its
//! state arguments and the undelayed process is stepped with
//! `x+ = proj_{C(t+)}(x - τ h(t))` on `substeps` equal substeps. The delayed
//! state is read from the arc already built, or from the history before `t0`.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::analysis::{gronwall_envelope, sup_dist, Signal};
use crate::error::{Result, SweepError};
use crate::geometry::{MovingPolyhedron, Vector};
use crate::problem::{ControlSignal, History, SweepingProblem};

/// Uniform mesh `t_i = t0 + i (T - t0) / k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Mesh {
    t0: f64,
    t1: f64,
    k: usize,
}

impl Mesh {
    pub fn new(horizon: (f64, f64), k: usize) -> Result<Self> {
        let (t0, t1) = horizon;
        if k == 0 {
            return Err(SweepError::InvalidInput("mesh needs at least one interval".into()));
        }
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(SweepError::InvalidInput(format!("mesh horizon [{t0}, {t1}] is empty")));
        }
        Ok(Self { t0, t1, k })
    }

    /// Mesh of `2^m` intervals.
    pub fn dyadic(horizon: (f64, f64), m: u32) -> Result<Self> {
        if m > 40 {
            return Err(SweepError::LevelTooLarge { level: m, limit: 40 });
        }
        Self::new(horizon, 1usize << m)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn horizon(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    pub fn step(&self) -> f64 {
        (self.t1 - self.t0) / self.k as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.k {
            self.t1
        } else {
            self.t0 + (self.t1 - self.t0) * (i as f64 / self.k as f64)
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.k).map(|i| self.node(i)).collect()
    }

    /// `m` with `k = 2^m`, if `k` is a power of two.
    pub fn level(&self) -> Option<u32> {
        self.k.is_power_of_two().then(|| self.k.trailing_zeros())
    }

    pub fn refined(&self, factor: usize) -> Self {
        Self { k: self.k * factor, ..*self }
    }

    /// Index of the interval `[t_i, t_{i+1})` holding `t`, clamped to the mesh.
    pub fn interval_of(&self, t: f64) -> usize {
        let pos = (t - self.t0) / self.step();
        if pos <= 0.0 {
            return 0;
        }
        let mut i = (pos.floor() as usize).min(self.k - 1);
        // guard against rounding on either side of a node
        while i > 0 && self.node(i) > t {
            i -= 1;
        }
        while i + 1 < self.k && self.node(i + 1) <= t {
            i += 1;
        }
        i
    }
}

/// Piecewise-affine state arc on a fine mesh of `k * substeps` intervals,
/// joined with the history before `t0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    mesh: Mesh,
    substeps: usize,
    states: Vec<Vector>,
    controls: Vec<Vector>,
    forcing: Option<Vec<Vector>>,
    history: History,
}

impl Trajectory {
    /// Arc through the given node states, without controls or forcing record.
    pub fn from_nodes(mesh: Mesh, states: Vec<Vector>, history: History) -> Result<Self> {
        Self::from_parts(mesh, 1, states, Vec::new(), None, history)
    }

    pub fn from_parts(
        mesh: Mesh,
        substeps: usize,
        states: Vec<Vector>,
        controls: Vec<Vector>,
        forcing: Option<Vec<Vector>>,
        history: History,
    ) -> Result<Self> {
        let fine = mesh.k() * substeps;
        if substeps == 0 || states.len() != fine + 1 {
            return Err(SweepError::DimensionMismatch(format!("{} states for {} fine intervals", states.len(), fine)));
        }
        if states.iter().any(|x| x.len() != history.dim()) {
            return Err(SweepError::DimensionMismatch("state length differs from history".into()));
        }
        if !controls.is_empty() && controls.len() != mesh.k() {
            return Err(SweepError::DimensionMismatch("one control per outer interval expected".into()));
        }
        if let Some(f) = &forcing {
            if f.len() != fine {
                return Err(SweepError::DimensionMismatch("one forcing value per substep expected".into()));
            }
        }
        let gap = (&states[0] - history.initial()).norm();
        if gap > 1e-9 * (1.0 + states[0].norm()) {
            return Err(SweepError::InvalidInput(format!("arc starts {gap:.3e} away from the history at t0")));
        }
        Ok(Self { mesh, substeps, states, controls, forcing, history })
    }

    /// The same trajectory with different fine states.
    pub fn with_fine_states(&self, states: Vec<Vector>) -> Result<Self> {
        Self::from_parts(
            self.mesh,
            self.substeps,
            states,
            self.controls.clone(),
            self.forcing.clone(),
            self.history.clone(),
        )
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn fine_mesh(&self) -> Mesh {
        self.mesh.refined(self.substeps)
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn horizon(&self) -> (f64, f64) {
        self.mesh.horizon()
    }

    pub fn dim(&self) -> usize {
        self.history.dim()
    }

    pub fn fine_states(&self) -> &[Vector] {
        &self.states
    }

    /// State at outer node `i`.
    pub fn node_state(&self, i: usize) -> &Vector {
        &self.states[i * self.substeps]
    }

    pub fn node_states(&self) -> Vec<Vector> {
        self.states.iter().step_by(self.substeps).cloned().collect()
    }

    pub fn final_state(&self) -> &Vector {
        self.states.last().unwrap()
    }

    /// Frozen control per outer interval; empty for arcs built from nodes.
    pub fn controls(&self) -> &[Vector] {
        &self.controls
    }

    /// Forcing `h` used on each substep.
    pub fn forcing(&self) -> Option<&[Vector]> {
        self.forcing.as_deref()
    }

    /// State at `s`, from the history when `s < t0`.
    pub fn eval(&self, s: f64) -> Result<Vector> {
        let (t0, t1) = self.horizon();
        if s < t0 {
            return self.history.eval(s);
        }
        if s > t1 + 1e-12 * (1.0 + t1.abs()) {
            return Err(SweepError::TimeOutOfRange { t: s, lo: self.history.domain().0, hi: t1 });
        }
        Ok(interpolate(&self.states, &self.fine_mesh(), s, self.states.len() - 1))
    }

    /// Difference quotients on the fine mesh.
    pub fn velocities(&self) -> Vec<Vector> {
        let fine = self.fine_mesh();
        self.states.windows(2).enumerate().map(|(j, w)| (&w[1] - &w[0]) / (fine.node(j + 1) - fine.node(j))).collect()
    }

    /// Velocity on the fine interval holding `s` (right-continuous); the history
    /// slope before `t0`.
    pub fn velocity_at(&self, s: f64) -> Vector {
        let (t0, _) = self.horizon();
        if s < t0 {
            return self.history.slope(s);
        }
        let fine = self.fine_mesh();
        let j = fine.interval_of(s);
        (&self.states[j + 1] - &self.states[j]) / (fine.node(j + 1) - fine.node(j))
    }

    pub fn lipschitz(&self) -> f64 {
        self.velocities().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_state_norm(&self) -> f64 {
        self.states.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// The arc on `[t0, T]` as a linear signal over the fine nodes.
    pub fn signal(&self) -> Signal {
        Signal::linear(self.fine_mesh().nodes(), self.states.clone()).expect("mesh nodes increase")
    }
}

/// State of the arc `states` on `mesh` at `s`, or of the history before the
/// mesh starts, reading no index above `upto`.
pub(crate) fn arc_lookup(states: &[Vector], mesh: &Mesh, history: &History, s: f64, upto: usize) -> Vector {
    if s <= mesh.horizon().0 {
        history.eval_clamped(s)
    } else {
        interpolate(states, mesh, s, upto)
    }
}

/// Interpolates the arc `states` on `mesh` at `s`, reading no index above
/// `upto`.
fn interpolate(states: &[Vector], mesh: &Mesh, s: f64, upto: usize) -> Vector {
    let j = mesh.interval_of(s).min(upto);
    if j == upto {
        return states[j].clone();
    }
    let (a, b) = (mesh.node(j), mesh.node(j + 1));
    let w = ((s - a) / (b - a)).clamp(0.0, 1.0);
    if w == 0.0 {
        return states[j].clone();
    }
    let mut out = states[j].clone() * (1.0 - w);
    out.axpy(w, &states[j + 1], 1.0);
    out
}

/// Substep states and forcing record of one undelayed run.
#[derive(Clone, Debug, PartialEq)]
pub struct UndelayedRun {
    /// `substeps + 1` states, starting with the initial state.
    pub states: Vec<Vector>,
    pub forcing: Vec<Vector>,
}

/// Catching-up steps `x+ = proj_{C(t+)}(x - τ h(t))` on `[a, b]`.
pub fn solve_undelayed(
    set: &MovingPolyhedron,
    h_fn: impl Fn(f64) -> Vector,
    x_init: &Vector,
    interval: (f64, f64),
    substeps: usize,
) -> Result<UndelayedRun> {
    let (a, b) = interval;
    if substeps == 0 {
        return Err(SweepError::InvalidInput("substeps must be at least 1".into()));
    }
    if !(b > a) {
        return Err(SweepError::InvalidInput(format!("interval [{a}, {b}] is empty")));
    }
    let start = set.snapshot(a)?;
    set.snapshot(b)?;
    let viol = start.max_violation(x_init);
    if viol > 1e-9 {
        return Err(SweepError::InfeasibleStart(viol));
    }
    let tau = (b - a) / substeps as f64;
    let mut states = Vec::with_capacity(substeps + 1);
    let mut forcing = Vec::with_capacity(substeps);
    states.push(x_init.clone());
    for j in 0..substeps {
        let t = a + j as f64 * tau;
        let next = if j + 1 == substeps { b } else { a + (j + 1) as f64 * tau };
        let h = h_fn(t);
        let mut z = states[j].clone();
        z.axpy(-(next - t), &h, 1.0);
        states.push(set.project_at(next, &z)?.point);
        forcing.push(h);
    }
    Ok(UndelayedRun { states, forcing })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolveOptions {
    /// Catching-up substeps per outer interval.
    pub substeps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { substeps: 4 }
    }
}

/// Arguments frozen on one outer interval, passed to instrumentation hooks.
#[derive(Debug)]
pub struct FrozenArgs<'a> {
    pub interval: usize,
    pub t: f64,
    pub state: &'a Vector,
    pub lag: f64,
    pub delayed: &'a Vector,
    pub control: &'a Vector,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub k: usize,
    pub substeps: usize,
    pub l_bound: f64,
    /// The bound with the modulus rate inside the growth factor.
    pub l_bound_statement: f64,
    pub m_bound: f64,
    /// Whether `β (T - t0) <= 1/8`, the regime in which the bounds hold.
    pub bounds_applicable: bool,
    pub max_state_norm: f64,
    pub max_node_norm: f64,
    pub max_velocity_norm: f64,
    pub velocity_violation: f64,
    pub max_infeasibility: f64,
    #[serde(skip)]
    pub wall_time: Duration,
}

pub fn solve_delayed(
    p: &SweepingProblem,
    u: &ControlSignal,
    k: usize,
    opts: &SolveOptions,
) -> Result<(Trajectory, SolveReport)> {
    solve_delayed_with_hook(p, u, k, opts, &mut |_| {})
}

/// [`solve_delayed`] calling `hook` with the frozen arguments of every outer
/// interval before it is stepped.
pub fn solve_delayed_with_hook(
    p: &SweepingProblem,
    u: &ControlSignal,
    k: usize,
    opts: &SolveOptions,
    hook: &mut dyn FnMut(&FrozenArgs<'_>),
) -> Result<(Trajectory, SolveReport)> {
    let started = Instant::now();
    p.check_control(u)?;
    let s = opts.substeps;
    if s == 0 {
        return Err(SweepError::InvalidInput("substeps must be at least 1".into()));
    }
    let mesh = Mesh::new(p.horizon(), k)?;
    let fine = mesh.refined(s);
    let set = p.moving_set();

    let mut states: Vec<Vector> = Vec::with_capacity(k * s + 1);
    let mut forcing: Vec<Vector> = Vec::with_capacity(k * s);
    let mut controls: Vec<Vector> = Vec::with_capacity(k);
    states.push(p.x0());
    for i in 0..k {
        let ti = mesh.node(i);
        let base = i * s;
        let xi = states[base].clone();
        let lag = p.delay().lag_unchecked(ti);
        let yi = arc_lookup(&states, &fine, p.history(), lag, base);
        let ui = u.eval_unchecked(ti).clone();
        hook(&FrozenArgs { interval: i, t: ti, state: &xi, lag, delayed: &yi, control: &ui });
        let run = solve_undelayed(set, |t| p.g(t, &xi, &yi, &ui), &xi, (ti, mesh.node(i + 1)), s)?;
        states.extend(run.states.into_iter().skip(1));
        forcing.extend(run.forcing);
        controls.push(ui);
    }

    let traj = Trajectory::from_parts(mesh, s, states, controls, Some(forcing), p.history().clone())?;
    let mut report = report_for(p, &traj)?;
    report.wall_time = started.elapsed();
    Ok((traj, report))
}

fn report_for(p: &SweepingProblem, traj: &Trajectory) -> Result<SolveReport> {
    let fine = traj.fine_mesh();
    let max_infeasibility = traj
        .fine_states()
        .iter()
        .enumerate()
        .map(|(j, x)| p.moving_set().snapshot_unchecked(fine.node(j)).max_violation(x).max(0.0))
        .fold(0.0, f64::max);
    Ok(SolveReport {
        k: traj.mesh().k(),
        substeps: traj.substeps(),
        l_bound: bound_l(p),
        l_bound_statement: bound_l_statement(p),
        m_bound: bound_m(p),
        bounds_applicable: bounds_applicable(p),
        max_state_norm: traj.max_state_norm(),
        max_node_norm: traj.node_states().iter().map(|x| x.norm()).fold(0.0, f64::max),
        max_velocity_norm: traj.lipschitz(),
        velocity_violation: check_velocity_estimate(traj, p.moving_set().modulus_rate())?,
        max_infeasibility,
        wall_time: Duration::ZERO,
    })
}

struct BoundData {
    beta: f64,
    len: f64,
    x0: f64,
    phi: f64,
    rate: f64,
}

fn bound_data(p: &SweepingProblem) -> BoundData {
    let (t0, t1) = p.horizon();
    BoundData {
        beta: p.perturbation().growth_beta(),
        len: t1 - t0,
        x0: p.x0().norm(),
        phi: p.history().sup_norm(),
        rate: p.moving_set().modulus_rate(),
    }
}

/// A priori bound on `sup |x(t)|`:
/// `|x0| + e^{4β(T-t0)} ((T-t0) (2β (1 + |φ|∞ + 2|x0|) + v'))`.
pub fn bound_l(p: &SweepingProblem) -> f64 {
    let d = bound_data(p);
    let base = d.len * (2.0 * d.beta * (1.0 + d.phi + 2.0 * d.x0) + d.rate);
    d.x0 + gronwall_envelope(d.beta, base, p.horizon())
}

/// Variant of [`bound_l`] with the modulus rate inside the growth factor:
/// `|x0| + e^{4β(T-t0)} (T-t0) 2β (1 + |φ|∞ + 2|x0| + v')`. It coincides with
/// [`bound_l`] for static sets and is not a valid bound for moving ones.
pub fn bound_l_statement(p: &SweepingProblem) -> f64 {
    let d = bound_data(p);
    let base = d.len * 2.0 * d.beta * (1.0 + d.phi + 2.0 * d.x0 + d.rate);
    d.x0 + gronwall_envelope(d.beta, base, p.horizon())
}

/// Node bound `2 (|x0| + (1 + |φ|∞)/4 + v' (T - t0))`.
pub fn bound_m(p: &SweepingProblem) -> f64 {
    let d = bound_data(p);
    2.0 * (d.x0 + 0.25 * (1.0 + d.phi) + d.rate * d.len)
}

/// Whether `β (T - t0) <= 1/8`.
pub fn bounds_applicable(p: &SweepingProblem) -> bool {
    let d = bound_data(p);
    d.beta * d.len <= 0.125
}

/// `max_j (|ω_j + h_j| - |h_j| - v_rate)^+` over the substeps of `traj`.
pub fn check_velocity_estimate(traj: &Trajectory, v_rate: f64) -> Result<f64> {
    let forcing = traj.forcing().ok_or(SweepError::MissingForcingRecord)?;
    let fine = traj.fine_mesh();
    let states = traj.fine_states();
    let mut worst: f64 = 0.0;
    for (j, h) in forcing.iter().enumerate() {
        let tau = fine.node(j + 1) - fine.node(j);
        let mut w = (&states[j + 1] - &states[j]) / tau;
        w += h;
        worst = worst.max(w.norm() - h.norm() - v_rate);
    }
    Ok(worst.max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CauchyLevel {
    /// Coarser node count of the compared pair.
    pub k: usize,
    /// `sup |x_{2k} - x_k|` over the horizon.
    pub sup_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CauchyReport {
    pub tol: f64,
    pub levels: Vec<CauchyLevel>,
    pub converged: bool,
    pub k_final: usize,
}

/// Doubles `k` from `k_start` until consecutive solves are within `tol` in
/// the sup norm, or `k_max` is reached.
pub fn refine_until_cauchy(
    p: &SweepingProblem,
    u: &ControlSignal,
    tol: f64,
    k_start: usize,
    k_max: usize,
    opts: &SolveOptions,
) -> Result<(Trajectory, CauchyReport)> {
    if !k_start.is_power_of_two() || !k_max.is_power_of_two() || k_start >= k_max {
        return Err(SweepError::InvalidInput(format!("need powers of two k_start < k_max, got {k_start} and {k_max}")));
    }
    if !(tol >= 0.0) {
        return Err(SweepError::InvalidInput(format!("tolerance {tol} must be nonnegative")));
    }
    let mut report = CauchyReport { tol, levels: Vec::new(), converged: false, k_final: k_start };
    let (mut prev, _) = solve_delayed(p, u, k_start, opts)?;
    let mut k = k_start;
    let mut last = f64::INFINITY;
    while k < k_max {
        let (next, _) = solve_delayed(p, u, 2 * k, opts)?;
        last = sup_dist(&prev.signal(), &next.signal())?;
        report.levels.push(CauchyLevel { k, sup_distance: last });
        prev = next;
        k *= 2;
        report.k_final = k;
        if last <= tol {
            report.converged = true;
            return Ok((prev, report));
        }
    }
    Err(SweepError::NoConvergence { last, tol, k, result: Box::new((prev, report)) })
}
