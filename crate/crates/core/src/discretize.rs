//! Discrete pairs sampled from a feasible continuous pair on dyadic meshes,
//! with the minimal residuals making the discrete inclusion
//! `ω_i ∈ -N_C(x_i) - g(t_i, x_i, y_i, u_i) + r_i ρ_i` hold, and the
//! convergence table of the samples against the reference.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{dist_l2, dist_w12, sup_dist, Signal};
use crate::catchup::{arc_lookup, Mesh, Trajectory};
use crate::error::{Result, SweepError};
use crate::geometry::Vector;
use crate::problem::{ControlSignal, History, SweepingProblem};

/// Largest supported level `m` (meshes of `2^m` intervals).
pub const LEVEL_LIMIT: u32 = 24;

/// Residual schedule with its normal-cone certificates.
#[derive(Clone, Debug, PartialEq)]
pub struct Residuals {
    /// `r_i >= 0`.
    pub radii: Vec<f64>,
    /// `ρ_i` with `|ρ_i| <= 1`, zero where `r_i = 0`.
    pub directions: Vec<Vector>,
    /// `ζ_i ∈ N_C(x_i)` closest to `drift_i - ω_i`.
    pub zetas: Vec<Vector>,
    /// `drift_i = -g(t_i, x_i, y_i, u_i)`.
    pub drifts: Vec<Vector>,
}

/// Sampled pair on the mesh of level `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePair {
    pub level: u32,
    pub mesh: Mesh,
    /// `x_i` at the `2^m + 1` nodes.
    pub states: Vec<Vector>,
    /// `y_i = x_m(t_i - δ(t_i))` at the `2^m + 1` nodes.
    pub delayed: Vec<Vector>,
    pub lags: Vec<f64>,
    /// `u_i` on the `2^m` intervals.
    pub controls: Vec<Vector>,
    pub history: History,
    pub residuals: Option<Residuals>,
}

impl DiscretePair {
    pub fn step(&self) -> f64 {
        self.mesh.step()
    }

    /// Difference quotients `ω_i = (x_{i+1} - x_i) / h`.
    pub fn velocities(&self) -> Vec<Vector> {
        let h = self.mesh.step();
        self.states.windows(2).map(|w| (&w[1] - &w[0]) / h).collect()
    }

    /// Difference quotients of the delayed states.
    pub fn delayed_velocities(&self) -> Vec<Vector> {
        let h = self.mesh.step();
        self.delayed.windows(2).map(|w| (&w[1] - &w[0]) / h).collect()
    }

    /// The piecewise-affine interpolant `x_m` joined with the history.
    pub fn interpolant(&self) -> Result<Trajectory> {
        Trajectory::from_nodes(self.mesh, self.states.clone(), self.history.clone())
    }

    pub fn control_signal(&self) -> Result<Signal> {
        let nodes = self.mesh.nodes();
        Signal::step(nodes[..self.mesh.k()].to_vec(), self.controls.clone(), self.mesh.horizon().1)
    }

    /// `|r_m|_{L²} = (Σ h r_i²)^{1/2}`.
    pub fn residual_l2(&self) -> Option<f64> {
        let h = self.mesh.step();
        self.residuals.as_ref().map(|r| r.radii.iter().map(|x| h * x * x).sum::<f64>().sqrt())
    }

    /// Largest `|ω_i - (-ζ_i + drift_i + r_i ρ_i)|`.
    pub fn identity_residual(&self) -> Option<f64> {
        let res = self.residuals.as_ref()?;
        Some(
            self.velocities()
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    let rebuilt = &res.drifts[i] - &res.zetas[i] + &res.directions[i] * res.radii[i];
                    (w - rebuilt).norm()
                })
                .fold(0.0, f64::max),
        )
    }
}

/// Delayed states `x_m(t_i - δ(t_i))` of node states on `mesh`.
pub(crate) fn delayed_states(
    p: &SweepingProblem,
    mesh: &Mesh,
    states: &[Vector],
    history: &History,
) -> (Vec<f64>, Vec<Vector>) {
    (0..=mesh.k())
        .map(|i| {
            let lag = p.delay().lag_unchecked(mesh.node(i));
            (lag, arc_lookup(states, mesh, history, lag, i))
        })
        .unzip()
}

/// Samples `xbar` at the nodes of level `m` and `ubar` at right endpoints.
pub fn sample_pair(p: &SweepingProblem, xbar: &Trajectory, ubar: &ControlSignal, m: u32) -> Result<DiscretePair> {
    if m > LEVEL_LIMIT {
        return Err(SweepError::LevelTooLarge { level: m, limit: LEVEL_LIMIT });
    }
    if xbar.horizon() != p.horizon() || ubar.horizon() != p.horizon() {
        return Err(SweepError::DomainMismatch {
            a0: xbar.horizon().0,
            a1: xbar.horizon().1,
            b0: p.horizon().0,
            b1: p.horizon().1,
        });
    }
    let mesh = Mesh::dyadic(p.horizon(), m)?;
    let k = mesh.k();
    let fine = xbar.fine_mesh().k();
    let states: Vec<Vector> = if fine.is_multiple_of(k) {
        let stride = fine / k;
        (0..=k).map(|i| xbar.fine_states()[i * stride].clone()).collect()
    } else {
        (0..=k).map(|i| xbar.eval(mesh.node(i))).collect::<Result<_>>()?
    };
    let controls = (0..k).map(|i| ubar.eval_unchecked(mesh.node(i + 1)).clone()).collect();
    let history = xbar.history().clone();
    let (lags, delayed) = delayed_states(p, &mesh, &states, &history);
    Ok(DiscretePair { level: m, mesh, states, delayed, lags, controls, history, residuals: None })
}

/// Fills in the minimal residual radii and their directions.
pub fn compute_residuals(dp: &DiscretePair, p: &SweepingProblem) -> Result<DiscretePair> {
    let k = dp.mesh.k();
    let omegas = dp.velocities();
    let mut res = Residuals {
        radii: Vec::with_capacity(k),
        directions: Vec::with_capacity(k),
        zetas: Vec::with_capacity(k),
        drifts: Vec::with_capacity(k),
    };
    for i in 0..k {
        let t = dp.mesh.node(i);
        let x = &dp.states[i];
        let drift = p.drift(t, x, &dp.delayed[i], &dp.controls[i]);
        let dec = p.set_at(t).normal_cone_decompose(x, &(&drift - &omegas[i]))?;
        let r = dec.distance();
        let rho = if r > 0.0 { -&dec.residual / r } else { Vector::zeros(x.len()) };
        res.radii.push(r);
        res.directions.push(rho);
        res.zetas.push(dec.zeta);
        res.drifts.push(drift);
    }
    Ok(DiscretePair { residuals: Some(res), ..dp.clone() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub level: u32,
    pub h: f64,
    /// `|u_m - ū|_{L²}`.
    pub u_l2: f64,
    /// `|x_m - x̄|_{W^{1,2}}`.
    pub x_w12: f64,
    /// `|r_m|_{L²}`.
    pub r_l2: f64,
    /// `sup |x_m - x̄|` over the horizon.
    pub sup_error: f64,
    /// Largest difference quotient of the samples.
    pub lipschitz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub reference_lipschitz: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub const HEADER: [&'static str; 7] = ["level", "h", "u_l2", "x_w12", "r_l2", "sup_error", "lipschitz"];
}

/// Builds the discrete pairs for each level and measures them against the
/// reference. Levels run concurrently.
pub fn convergence_study(
    p: &SweepingProblem,
    xbar: &Trajectory,
    ubar: &ControlSignal,
    levels: &[u32],
) -> Result<ConvergenceTable> {
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SweepError::InvalidInput("levels must be strictly ascending".into()));
    }
    let xs = xbar.signal();
    let us = Signal::from_control(ubar);
    let rows = levels
        .par_iter()
        .map(|&m| {
            let dp = compute_residuals(&sample_pair(p, xbar, ubar, m)?, p)?;
            let xm = dp.interpolant()?.signal();
            Ok(ConvergenceRow {
                level: m,
                h: dp.step(),
                u_l2: dist_l2(&dp.control_signal()?, &us)?,
                x_w12: dist_w12(&xm, &xs)?,
                r_l2: dp.residual_l2().unwrap_or(0.0),
                sup_error: sup_dist(&xm, &xs)?,
                lipschitz: dp.velocities().iter().map(|w| w.norm()).fold(0.0, f64::max),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable { reference_lipschitz: xbar.lipschitz(), rows })
}
