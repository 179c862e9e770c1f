//! Exact distances between piecewise-affine and piecewise-constant signals on
//! possibly different meshes, and the Gronwall envelope.

use serde::Serialize;

use crate::error::{Result, SweepError};
use crate::geometry::Vector;
use crate::problem::ControlSignal;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignalKind {
    /// Continuous, affine between consecutive breakpoints.
    Linear,
    /// `values[j]` on `[times[j], times[j+1])`, the last value up to the end.
    Step,
}

/// Vector signal on a compact interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    kind: SignalKind,
    times: Vec<f64>,
    values: Vec<Vector>,
    end: f64,
}

impl Signal {
    pub fn linear(times: Vec<f64>, values: Vec<Vector>) -> Result<Self> {
        Self::check(&times, &values)?;
        if times.len() < 2 {
            return Err(SweepError::InvalidInput("linear signal needs two breakpoints".into()));
        }
        let end = *times.last().unwrap();
        Ok(Self { kind: SignalKind::Linear, times, values, end })
    }

    pub fn step(times: Vec<f64>, values: Vec<Vector>, end: f64) -> Result<Self> {
        Self::check(&times, &values)?;
        if !(end > *times.last().unwrap()) {
            return Err(SweepError::InvalidInput("step signal must end after its last breakpoint".into()));
        }
        Ok(Self { kind: SignalKind::Step, times, values, end })
    }

    pub fn from_control(u: &ControlSignal) -> Self {
        Self { kind: SignalKind::Step, times: u.times().to_vec(), values: u.values().to_vec(), end: u.horizon().1 }
    }

    fn check(times: &[f64], values: &[Vector]) -> Result<()> {
        if times.is_empty() || times.len() != values.len() {
            return Err(SweepError::InvalidInput("signal needs matching nonempty times/values".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SweepError::InvalidInput("signal breakpoints must be strictly increasing".into()));
        }
        if values.iter().any(|v| v.len() != values[0].len()) {
            return Err(SweepError::DimensionMismatch("signal values differ in length".into()));
        }
        Ok(())
    }

    pub fn kind(&self) -> SignalKind {
        self.kind
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vector] {
        &self.values
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.times[0], self.end)
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// Piecewise-constant slope signal of a linear signal.
    pub fn derivative(&self) -> Result<Signal> {
        if self.kind != SignalKind::Linear {
            return Err(SweepError::InvalidInput("only linear signals have a derivative signal".into()));
        }
        let n = self.times.len();
        let slopes =
            (0..n - 1).map(|i| (&self.values[i + 1] - &self.values[i]) / (self.times[i + 1] - self.times[i])).collect();
        Ok(Signal { kind: SignalKind::Step, times: self.times[..n - 1].to_vec(), values: slopes, end: self.end })
    }

    /// Right-continuous evaluation for step signals, interpolation for linear.
    pub fn eval(&self, t: f64) -> Vector {
        let i = self.times.partition_point(|&b| b <= t).max(1) - 1;
        match self.kind {
            SignalKind::Step => self.values[i].clone(),
            SignalKind::Linear => {
                let i = i.min(self.times.len() - 2);
                self.segment_value(i, t)
            }
        }
    }

    fn segment_value(&self, i: usize, t: f64) -> Vector {
        let (a, b) = (self.times[i], self.times[i + 1]);
        let w = (t - a) / (b - a);
        let mut out = self.values[i].clone() * (1.0 - w);
        out.axpy(w, &self.values[i + 1], 1.0);
        out
    }

    /// Values at both ends of a piece `[p, q]` lying inside one segment,
    /// extended from that segment.
    fn piece_values(&self, p: f64, q: f64) -> (Vector, Vector) {
        let mid = 0.5 * (p + q);
        let i = self.times.partition_point(|&b| b <= mid).max(1) - 1;
        match self.kind {
            SignalKind::Step => (self.values[i].clone(), self.values[i].clone()),
            SignalKind::Linear => {
                let i = i.min(self.times.len() - 2);
                (self.segment_value(i, p), self.segment_value(i, q))
            }
        }
    }
}

fn domains_match(a: &Signal, b: &Signal) -> Result<(f64, f64)> {
    let (a0, a1) = a.domain();
    let (b0, b1) = b.domain();
    let tol = 1e-12 * (1.0 + a0.abs().max(a1.abs()));
    if (a0 - b0).abs() > tol || (a1 - b1).abs() > tol {
        return Err(SweepError::DomainMismatch { a0, a1, b0, b1 });
    }
    if a.dim() != b.dim() {
        return Err(SweepError::DimensionMismatch(format!("signal dimensions {} and {}", a.dim(), b.dim())));
    }
    Ok((a0, a1))
}

/// Pieces of the merged partition with the difference `a - b` at both ends.
fn difference_pieces(a: &Signal, b: &Signal) -> Result<Vec<(f64, Vector, Vector)>> {
    let (lo, hi) = domains_match(a, b)?;
    let mut cuts: Vec<f64> = a.times.iter().chain(&b.times).copied().filter(|&t| t > lo && t < hi).collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    Ok(cuts
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (a0, a1) = a.piece_values(w[0], w[1]);
            let (b0, b1) = b.piece_values(w[0], w[1]);
            (w[1] - w[0], a0 - b0, a1 - b1)
        })
        .collect())
}

/// `(∫ |a - b|^2)^{1/2}`, exact on the merged partition.
pub fn dist_l2(a: &Signal, b: &Signal) -> Result<f64> {
    let total: f64 = difference_pieces(a, b)?
        .iter()
        .map(|(len, d0, d1)| len * (d0.norm_squared() + d0.dot(d1) + d1.norm_squared()) / 3.0)
        .sum();
    Ok(total.max(0.0).sqrt())
}

/// Supremum of `|a - b|` over the common domain.
pub fn sup_dist(a: &Signal, b: &Signal) -> Result<f64> {
    Ok(difference_pieces(a, b)?.iter().map(|(_, d0, d1)| d0.norm().max(d1.norm())).fold(0.0, f64::max))
}

/// `W^{1,2}` distance between two linear signals.
pub fn dist_w12(a: &Signal, b: &Signal) -> Result<f64> {
    Ok(norm_report(a, b)?.w12.unwrap_or(f64::NAN))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormReport {
    pub l2: f64,
    pub sup: f64,
    /// Present when both operands are linear signals.
    pub w12: Option<f64>,
}

pub fn norm_report(a: &Signal, b: &Signal) -> Result<NormReport> {
    let l2 = dist_l2(a, b)?;
    let sup = sup_dist(a, b)?;
    let w12 = if a.kind == SignalKind::Linear && b.kind == SignalKind::Linear {
        let dl2 = dist_l2(&a.derivative()?, &b.derivative()?)?;
        Some((l2 * l2 + dl2 * dl2).sqrt())
    } else {
        None
    };
    Ok(NormReport { l2, sup, w12 })
}

/// `base * exp(4 beta (T - t0))`.
pub fn gronwall_envelope(beta: f64, base: f64, horizon: (f64, f64)) -> f64 {
    base * (4.0 * beta * (horizon.1 - horizon.0)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn s(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    #[test]
    fn constants_and_steps() {
        let a = Signal::step(vec![0.0], vec![s(1.0)], 1.0).unwrap();
        let b = Signal::step(vec![0.0], vec![s(3.5)], 1.0).unwrap();
        assert_abs_diff_eq!(dist_l2(&a, &b).unwrap(), 2.5, epsilon = 1e-15);
        assert_eq!(dist_l2(&a, &a).unwrap(), 0.0);
        let c = Signal::step(vec![0.0, 0.5], vec![s(1.0), s(3.0)], 1.0).unwrap();
        assert_abs_diff_eq!(dist_l2(&a, &c).unwrap(), (0.5f64 * 4.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(sup_dist(&a, &c).unwrap(), 2.0);
    }

    #[test]
    fn w12_affine_vs_constant() {
        let a = Signal::linear(vec![0.0, 1.0], vec![s(0.0), s(1.0)]).unwrap();
        let b = Signal::linear(vec![0.0, 1.0], vec![s(0.0), s(0.0)]).unwrap();
        assert_abs_diff_eq!(dist_w12(&a, &b).unwrap(), (4.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        let fine = Signal::linear(vec![0.0, 0.25, 0.5, 1.0], vec![s(0.0), s(0.25), s(0.5), s(1.0)]).unwrap();
        assert_abs_diff_eq!(dist_w12(&a, &fine).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn sawtooth_peak() {
        let saw =
            Signal::linear(vec![0.0, 0.25, 0.5, 0.75, 1.0], vec![s(0.0), s(0.3), s(0.0), s(0.7), s(0.0)]).unwrap();
        let zero = Signal::linear(vec![0.0, 1.0], vec![s(0.0), s(0.0)]).unwrap();
        assert_abs_diff_eq!(sup_dist(&saw, &zero).unwrap(), 0.7);
    }

    #[test]
    fn domain_mismatch() {
        let a = Signal::step(vec![0.0], vec![s(1.0)], 1.0).unwrap();
        let b = Signal::step(vec![0.0], vec![s(1.0)], 2.0).unwrap();
        assert!(matches!(dist_l2(&a, &b), Err(SweepError::DomainMismatch { .. })));
    }

    #[test]
    fn envelope() {
        assert_eq!(gronwall_envelope(0.0, 3.0, (0.0, 1.0)), 3.0);
        assert_abs_diff_eq!(gronwall_envelope(0.25, 1.0, (0.0, 1.0)), std::f64::consts::E, epsilon = 1e-15);
    }
}
