//! Problem data: delay, history, perturbation catalog, control sets and
//! signals, and the sampled validators for the standing assumptions.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Result, SweepError};
use crate::geometry::{MovingPolyhedron, Polyhedron, Track, Vector};

fn time_slack(lo: f64, hi: f64) -> f64 {
    1e-12 * (1.0 + lo.abs().max(hi.abs()))
}

/// Continuous piecewise-affine vector path, constant outside its breakpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    times: Vec<f64>,
    values: Vec<Vector>,
}

impl Path {
    pub fn new(times: Vec<f64>, values: Vec<Vector>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(SweepError::InvalidInput(format!(
                "path needs matching nonempty times/values ({} vs {})",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SweepError::InvalidInput("path times must be strictly increasing".into()));
        }
        let dim = values[0].len();
        if values.iter().any(|v| v.len() != dim) {
            return Err(SweepError::DimensionMismatch("path values differ in length".into()));
        }
        if times.iter().any(|t| !t.is_finite()) || values.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(SweepError::InvalidInput("path contains non-finite entries".into()));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vector] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// Index `i` of the segment `[times[i], times[i+1]]` holding `t`, for
    /// paths with at least two breakpoints.
    fn segment(&self, t: f64) -> usize {
        let n = self.times.len();
        self.times.partition_point(|&b| b <= t).clamp(1, n - 1) - 1
    }

    pub fn eval(&self, t: f64) -> Vector {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return self.values[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1].clone();
        }
        let i = self.segment(t);
        let w = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        let mut out = self.values[i].clone() * (1.0 - w);
        out.axpy(w, &self.values[i + 1], 1.0);
        out
    }

    /// Slope of the segment holding `t`, right-continuous; the last segment at
    /// the right end.
    pub fn slope(&self, t: f64) -> Vector {
        if self.times.len() == 1 {
            return Vector::zeros(self.dim());
        }
        let i = self.segment(t);
        (&self.values[i + 1] - &self.values[i]) / (self.times[i + 1] - self.times[i])
    }

    pub fn lipschitz(&self) -> f64 {
        self.times
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| (&v[1] - &v[0]).norm() / (t[1] - t[0]))
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Prescribed state on `[lo, t0]`.
#[derive(Clone, Debug, PartialEq)]
pub struct History {
    path: Path,
    domain: (f64, f64),
}

impl History {
    pub fn new(times: Vec<f64>, values: Vec<Vector>) -> Result<Self> {
        let path = Path::new(times, values)?;
        let domain = (path.times[0], *path.times.last().unwrap());
        Ok(Self { path, domain })
    }

    /// Constant history `x0` on `[lo, hi]`.
    pub fn constant(x0: Vector, lo: f64, hi: f64) -> Result<Self> {
        if hi > lo {
            Self::new(vec![lo, hi], vec![x0.clone(), x0])
        } else {
            Self::new(vec![hi], vec![x0])
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.path.dim()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn times(&self) -> &[f64] {
        &self.path.times
    }

    pub fn values(&self) -> &[Vector] {
        &self.path.values
    }

    pub fn lipschitz(&self) -> f64 {
        self.path.lipschitz()
    }

    pub fn sup_norm(&self) -> f64 {
        self.path.sup_norm()
    }

    /// Value at the right end, the initial state.
    pub fn initial(&self) -> Vector {
        self.path.values.last().unwrap().clone()
    }

    pub fn eval(&self, s: f64) -> Result<Vector> {
        let (lo, hi) = self.domain;
        let slack = time_slack(lo, hi);
        if !(s >= lo - slack && s <= hi + slack) {
            return Err(SweepError::TimeOutOfRange { t: s, lo, hi });
        }
        Ok(self.path.eval(s))
    }

    pub(crate) fn eval_clamped(&self, s: f64) -> Vector {
        self.path.eval(s)
    }

    /// Derivative of the history, right-continuous.
    pub fn slope(&self, s: f64) -> Vector {
        self.path.slope(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DelayKind {
    Constant(f64),
    Track(Track),
}

/// Delay function `δ(t)` on the horizon; the lag time is `t - δ(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DelaySpec {
    kind: DelayKind,
    horizon: (f64, f64),
    lip: f64,
    max_delay: f64,
    min_delay: f64,
}

impl DelaySpec {
    pub fn constant(delay: f64, horizon: (f64, f64)) -> Result<Self> {
        if !delay.is_finite() || delay < 0.0 {
            return Err(SweepError::InvalidInput(format!("delay {delay} must be finite and nonnegative")));
        }
        Ok(Self { kind: DelayKind::Constant(delay), horizon, lip: 0.0, max_delay: delay, min_delay: delay })
    }

    pub fn track(track: Track, horizon: (f64, f64)) -> Result<Self> {
        let (t0, t1) = horizon;
        let mut samples = vec![t0, t1];
        samples.extend(track.times().iter().copied().filter(|&b| b > t0 && b < t1));
        let values: Vec<f64> = samples.iter().map(|&t| track.eval(t)).collect();
        let max_delay = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min_delay = values.iter().copied().fold(f64::INFINITY, f64::min);
        if min_delay < 0.0 {
            return Err(SweepError::InvalidInput(format!("delay track goes negative ({min_delay})")));
        }
        let lip = track.max_slope_on(t0, t1);
        Ok(Self { kind: DelayKind::Track(track), horizon, lip, max_delay, min_delay })
    }

    pub fn kind(&self) -> &DelayKind {
        &self.kind
    }

    pub fn horizon(&self) -> (f64, f64) {
        self.horizon
    }

    pub fn lipschitz(&self) -> f64 {
        self.lip
    }

    /// `Δ = max δ(t)` over the horizon.
    pub fn max_delay(&self) -> f64 {
        self.max_delay
    }

    pub fn min_delay(&self) -> f64 {
        self.min_delay
    }

    pub fn delay(&self, t: f64) -> f64 {
        match &self.kind {
            DelayKind::Constant(d) => *d,
            DelayKind::Track(tr) => tr.eval(t),
        }
    }

    pub fn lag(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.horizon;
        let slack = time_slack(lo, hi);
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(SweepError::TimeOutOfRange { t, lo, hi });
        }
        Ok(self.lag_unchecked(t))
    }

    pub(crate) fn lag_unchecked(&self, t: f64) -> f64 {
        t - self.delay(t)
    }

    /// Breakpoints of `δ` strictly inside the horizon.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            DelayKind::Constant(_) => Vec::new(),
            DelayKind::Track(tr) => {
                let (lo, hi) = self.horizon;
                tr.times().iter().copied().filter(|&b| b > lo && b < hi).collect()
            }
        }
    }

    pub fn is_nonincreasing(&self) -> bool {
        match &self.kind {
            DelayKind::Constant(_) => true,
            DelayKind::Track(tr) => {
                let (lo, hi) = self.horizon;
                let mut pts = vec![lo];
                pts.extend(self.breakpoints());
                pts.push(hi);
                pts.windows(2).all(|w| tr.eval(w[1]) <= tr.eval(w[0]) + 1e-15)
            }
        }
    }

    /// Times strictly inside the horizon where the lag crosses one of the
    /// sorted `points`.
    pub(crate) fn lag_preimages(&self, points: &[f64]) -> Vec<f64> {
        let (lo, hi) = self.horizon;
        let mut pts = vec![lo];
        pts.extend(self.breakpoints());
        pts.push(hi);
        let mut out = Vec::new();
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (la, lb) = (self.lag_unchecked(a), self.lag_unchecked(b));
            if !(lb > la) {
                continue;
            }
            let first = points.partition_point(|&s| s <= la);
            let last = points.partition_point(|&s| s < lb);
            for &s in &points[first..last] {
                let t = a + (s - la) * (b - a) / (lb - la);
                if t > lo && t < hi {
                    out.push(t);
                }
            }
        }
        out
    }
}

/// Named scalar perturbations, applied componentwise with `d = n`.
#[derive(Clone, Debug, PartialEq)]
pub enum CatalogEntry {
    /// `g_i = kx tanh(x_i) + ky tanh(y_i) + ku u_i`
    TanhFeedback { kx: f64, ky: f64, ku: f64 },
    /// `g_i = amplitude sin(frequency t) + kx x_i + ky y_i + ku u_i`
    SineForcing { amplitude: f64, frequency: f64, kx: f64, ky: f64, ku: f64 },
}

impl CatalogEntry {
    pub const NAMES: [&'static str; 2] = ["tanh_feedback", "sine_forcing"];

    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let allowed: &[&str] = match name {
            "tanh_feedback" => &["kx", "ky", "ku"],
            "sine_forcing" => &["amplitude", "frequency", "kx", "ky", "ku"],
            other => return Err(SweepError::UnknownCatalogEntry(other.to_string())),
        };
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(SweepError::InvalidInput(format!("`{name}` has no parameter `{k}`")));
        }
        let get = |k: &str| params.get(k).copied().unwrap_or(0.0);
        Ok(match name {
            "tanh_feedback" => Self::TanhFeedback { kx: get("kx"), ky: get("ky"), ku: get("ku") },
            _ => Self::SineForcing {
                amplitude: get("amplitude"),
                frequency: get("frequency"),
                kx: get("kx"),
                ky: get("ky"),
                ku: get("ku"),
            },
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::TanhFeedback { .. } => "tanh_feedback",
            Self::SineForcing { .. } => "sine_forcing",
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let pairs: Vec<(&str, f64)> = match *self {
            Self::TanhFeedback { kx, ky, ku } => vec![("kx", kx), ("ky", ky), ("ku", ku)],
            Self::SineForcing { amplitude, frequency, kx, ky, ku } => {
                vec![("amplitude", amplitude), ("frequency", frequency), ("kx", kx), ("ky", ky), ("ku", ku)]
            }
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    fn eval(&self, t: f64, x: &Vector, y: &Vector, u: &Vector) -> Vector {
        match *self {
            Self::TanhFeedback { kx, ky, ku } => {
                Vector::from_fn(x.len(), |i, _| kx * x[i].tanh() + ky * y[i].tanh() + ku * u[i])
            }
            Self::SineForcing { amplitude, frequency, kx, ky, ku } => {
                let f = amplitude * (frequency * t).sin();
                Vector::from_fn(x.len(), |i, _| f + kx * x[i] + ky * y[i] + ku * u[i])
            }
        }
    }
}

pub type PerturbationFn = dyn Fn(f64, &Vector, &Vector, &Vector) -> Vector + Send + Sync;

/// User-registered pure evaluator.
#[derive(Clone)]
pub struct CustomPerturbation {
    pub label: String,
    pub func: Arc<PerturbationFn>,
}

impl fmt::Debug for CustomPerturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPerturbation").field("label", &self.label).finish()
    }
}

impl PartialEq for CustomPerturbation {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label && Arc::ptr_eq(&self.func, &other.func)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PerturbationForm {
    /// `g = A x + B y + D u + e(t)`
    Affine {
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        d: DMatrix<f64>,
        e: Option<Path>,
    },
    Catalog(CatalogEntry),
    Custom(CustomPerturbation),
}

/// The perturbation `g(t, x, y, u)` with its declared growth constant `β`
/// (`|g| <= β (1 + |x| + |y|)` on `U`) and optional Lipschitz estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    form: PerturbationForm,
    state_dim: usize,
    control_dim: usize,
    growth_beta: f64,
    lip_est: Option<f64>,
}

impl Perturbation {
    pub fn affine(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        d: DMatrix<f64>,
        e: Option<Path>,
        growth_beta: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || b.ncols() != n || d.nrows() != n {
            return Err(SweepError::DimensionMismatch(format!(
                "affine perturbation: A {}x{}, B {}x{}, D {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        if let Some(e) = &e {
            if e.dim() != n {
                return Err(SweepError::DimensionMismatch("forcing e(t) has wrong length".into()));
            }
        }
        let control_dim = d.ncols();
        Self::with_form(PerturbationForm::Affine { a, b, d, e }, n, control_dim, growth_beta)
    }

    /// `g ≡ 0`.
    pub fn zero(state_dim: usize, control_dim: usize) -> Self {
        Self::affine(
            DMatrix::zeros(state_dim, state_dim),
            DMatrix::zeros(state_dim, state_dim),
            DMatrix::zeros(state_dim, control_dim),
            None,
            0.0,
        )
        .expect("consistent zero blocks")
    }

    pub fn catalog(name: &str, params: &BTreeMap<String, f64>, dim: usize, growth_beta: f64) -> Result<Self> {
        let entry = CatalogEntry::from_name(name, params)?;
        Self::with_form(PerturbationForm::Catalog(entry), dim, dim, growth_beta)
    }

    pub fn custom(
        label: impl Into<String>,
        func: Arc<PerturbationFn>,
        state_dim: usize,
        control_dim: usize,
        growth_beta: f64,
    ) -> Result<Self> {
        let custom = CustomPerturbation { label: label.into(), func };
        Self::with_form(PerturbationForm::Custom(custom), state_dim, control_dim, growth_beta)
    }

    fn with_form(form: PerturbationForm, state_dim: usize, control_dim: usize, growth_beta: f64) -> Result<Self> {
        if !growth_beta.is_finite() || growth_beta < 0.0 {
            return Err(SweepError::InvalidInput(format!("growth constant {growth_beta} must be finite and >= 0")));
        }
        Ok(Self { form, state_dim, control_dim, growth_beta, lip_est: None })
    }

    pub fn with_lipschitz(mut self, lip: f64) -> Self {
        self.lip_est = Some(lip);
        self
    }

    pub fn form(&self) -> &PerturbationForm {
        &self.form
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn growth_beta(&self) -> f64 {
        self.growth_beta
    }

    pub fn lipschitz_estimate(&self) -> Option<f64> {
        self.lip_est
    }

    /// `g(t, x, y, u)`.
    pub fn eval(&self, t: f64, x: &Vector, y: &Vector, u: &Vector) -> Vector {
        match &self.form {
            PerturbationForm::Affine { a, b, d, e } => {
                let mut out = a * x + b * y + d * u;
                if let Some(e) = e {
                    out += e.eval(t);
                }
                out
            }
            PerturbationForm::Catalog(entry) => entry.eval(t, x, y, u),
            PerturbationForm::Custom(c) => (c.func)(t, x, y, u),
        }
    }

    /// `|A| + |B| + |D|` in the spectral norm, for the affine form.
    pub fn affine_lipschitz_bound(&self) -> Option<f64> {
        match &self.form {
            PerturbationForm::Affine { a, b, d, .. } => {
                let spec = |m: &DMatrix<f64>| {
                    if m.is_empty() {
                        0.0
                    } else {
                        m.clone().svd(false, false).singular_values.max()
                    }
                };
                Some(spec(a) + spec(b) + spec(d))
            }
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ControlSet {
    Box { lower: Vector, upper: Vector },
    Finite(Vec<Vector>),
}

impl ControlSet {
    pub fn boxed(lower: Vector, upper: Vector) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(SweepError::DimensionMismatch("box bounds differ in length".into()));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(SweepError::InvalidInput("control box needs finite lower <= upper".into()));
        }
        Ok(Self::Box { lower, upper })
    }

    pub fn finite(points: Vec<Vector>) -> Result<Self> {
        if points.is_empty() {
            return Err(SweepError::InvalidInput("finite control set is empty".into()));
        }
        let d = points[0].len();
        if d == 0 || points.iter().any(|p| p.len() != d) {
            return Err(SweepError::DimensionMismatch("control points differ in length".into()));
        }
        Ok(Self::Finite(points))
    }

    pub fn singleton(u: Vector) -> Self {
        Self::Box { lower: u.clone(), upper: u }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Box { lower, .. } => lower.len(),
            Self::Finite(pts) => pts[0].len(),
        }
    }

    pub fn is_singleton(&self) -> bool {
        match self {
            Self::Box { lower, upper } => lower == upper,
            Self::Finite(pts) => pts.iter().all(|p| p == &pts[0]),
        }
    }

    /// Nearest point of the set; lowest index on ties for finite sets.
    pub fn project(&self, u: &Vector) -> Vector {
        match self {
            Self::Box { lower, upper } => Vector::from_fn(u.len(), |i, _| u[i].clamp(lower[i], upper[i])),
            Self::Finite(pts) => {
                let mut best = &pts[0];
                let mut best_d = f64::INFINITY;
                for p in pts {
                    let d = (p - u).norm();
                    if d < best_d {
                        best_d = d;
                        best = p;
                    }
                }
                best.clone()
            }
        }
    }

    pub fn distance(&self, u: &Vector) -> f64 {
        (u - self.project(u)).norm()
    }

    pub fn bounding_box(&self) -> (Vector, Vector) {
        match self {
            Self::Box { lower, upper } => (lower.clone(), upper.clone()),
            Self::Finite(pts) => {
                let d = pts[0].len();
                let lo = Vector::from_fn(d, |i, _| pts.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min));
                let hi = Vector::from_fn(d, |i, _| pts.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max));
                (lo, hi)
            }
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vector {
        match self {
            Self::Box { lower, upper } => Vector::from_fn(lower.len(), |i, _| {
                if upper[i] > lower[i] {
                    rng.gen_range(lower[i]..=upper[i])
                } else {
                    lower[i]
                }
            }),
            Self::Finite(pts) => pts[rng.gen_range(0..pts.len())].clone(),
        }
    }

    /// A default member: the projection of the origin.
    pub fn default_point(&self) -> Vector {
        self.project(&Vector::zeros(self.dim()))
    }
}

/// Right-continuous step control: `values[j]` on `[times[j], times[j+1])`, the
/// last value through the end of the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSignal {
    times: Vec<f64>,
    values: Vec<Vector>,
    horizon: (f64, f64),
}

impl ControlSignal {
    pub fn new(times: Vec<f64>, values: Vec<Vector>, horizon: (f64, f64)) -> Result<Self> {
        let (t0, t1) = horizon;
        if times.is_empty() || times.len() != values.len() {
            return Err(SweepError::InvalidInput("control signal needs matching nonempty times/values".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SweepError::InvalidInput("control breakpoints must be strictly increasing".into()));
        }
        if times[0] > t0 || *times.last().unwrap() >= t1 {
            return Err(SweepError::InvalidInput(format!(
                "control breakpoints must start at or before {t0} and stay below {t1}"
            )));
        }
        let d = values[0].len();
        if values.iter().any(|v| v.len() != d) {
            return Err(SweepError::DimensionMismatch("control values differ in length".into()));
        }
        // drop breakpoints before t0 except the one covering it
        let first = times.partition_point(|&b| b <= t0) - 1;
        let mut times = times[first..].to_vec();
        times[0] = t0;
        Ok(Self { times, values: values[first..].to_vec(), horizon })
    }

    pub fn constant(u: Vector, horizon: (f64, f64)) -> Self {
        Self { times: vec![horizon.0], values: vec![u], horizon }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vector] {
        &self.values
    }

    pub fn horizon(&self) -> (f64, f64) {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn eval(&self, t: f64) -> Result<Vector> {
        let (lo, hi) = self.horizon;
        let slack = time_slack(lo, hi);
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(SweepError::TimeOutOfRange { t, lo, hi });
        }
        Ok(self.eval_unchecked(t).clone())
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> &Vector {
        let i = self.times.partition_point(|&b| b <= t).max(1) - 1;
        &self.values[i]
    }

    pub fn total_variation(&self) -> f64 {
        self.values.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
    }
}

/// Full data of the controlled delayed sweeping process.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepingProblem {
    moving_set: MovingPolyhedron,
    perturbation: Perturbation,
    delay: DelaySpec,
    history: History,
    controls: ControlSet,
    horizon: (f64, f64),
}

impl SweepingProblem {
    pub fn new(
        moving_set: MovingPolyhedron,
        perturbation: Perturbation,
        delay: DelaySpec,
        history: History,
        controls: ControlSet,
    ) -> Result<Self> {
        let horizon = moving_set.horizon();
        let (t0, t1) = horizon;
        if !(t1 > t0 && t0 >= 0.0) {
            return Err(SweepError::InvalidInput(format!("horizon needs T > t0 >= 0, got [{t0}, {t1}]")));
        }
        if delay.horizon() != horizon {
            return Err(SweepError::InvalidInput("delay horizon differs from the set horizon".into()));
        }
        let n = moving_set.dim();
        if perturbation.state_dim() != n || history.dim() != n {
            return Err(SweepError::DimensionMismatch(format!(
                "state dimension: set {n}, perturbation {}, history {}",
                perturbation.state_dim(),
                history.dim()
            )));
        }
        if perturbation.control_dim() != controls.dim() {
            return Err(SweepError::DimensionMismatch(format!(
                "control dimension: perturbation {}, control set {}",
                perturbation.control_dim(),
                controls.dim()
            )));
        }
        let (h_lo, h_hi) = history.domain();
        let slack = time_slack(h_lo, t1);
        if (h_hi - t0).abs() > slack || h_lo > t0 - delay.max_delay() + slack {
            return Err(SweepError::InvalidInput(format!(
                "history domain [{h_lo}, {h_hi}] must cover [{}, {t0}] and end at t0",
                t0 - delay.max_delay()
            )));
        }
        let x0 = history.initial();
        let c0 = moving_set.snapshot(t0)?;
        let viol = c0.max_violation(&x0);
        if viol > 1e-9 {
            return Err(SweepError::InfeasibleStart(viol));
        }
        Ok(Self { moving_set, perturbation, delay, history, controls, horizon })
    }

    pub fn moving_set(&self) -> &MovingPolyhedron {
        &self.moving_set
    }

    pub fn perturbation(&self) -> &Perturbation {
        &self.perturbation
    }

    pub fn delay(&self) -> &DelaySpec {
        &self.delay
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn controls(&self) -> &ControlSet {
        &self.controls
    }

    pub fn horizon(&self) -> (f64, f64) {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.moving_set.dim()
    }

    pub fn control_dim(&self) -> usize {
        self.controls.dim()
    }

    pub fn x0(&self) -> Vector {
        self.history.initial()
    }

    /// `g(t, x, y, u)`.
    pub fn g(&self, t: f64, x: &Vector, y: &Vector, u: &Vector) -> Vector {
        self.perturbation.eval(t, x, y, u)
    }

    /// The velocity contribution `-g`, so that `x' ∈ -N_C(x) + drift`.
    pub fn drift(&self, t: f64, x: &Vector, y: &Vector, u: &Vector) -> Vector {
        -self.perturbation.eval(t, x, y, u)
    }

    pub fn lag(&self, t: f64) -> Result<f64> {
        self.delay.lag(t)
    }

    /// The set at `t` (static sets return the same polyhedron).
    pub fn set_at(&self, t: f64) -> Polyhedron {
        self.moving_set.snapshot_unchecked(t)
    }

    /// Checks every value of `u` lies in `U`.
    pub fn check_control(&self, u: &ControlSignal) -> Result<()> {
        if u.dim() != self.control_dim() {
            return Err(SweepError::DimensionMismatch(format!(
                "control signal has dimension {}, expected {}",
                u.dim(),
                self.control_dim()
            )));
        }
        if u.horizon() != self.horizon {
            return Err(SweepError::InvalidInput("control signal horizon differs from the problem".into()));
        }
        for (t, v) in u.times().iter().zip(u.values()) {
            let d = self.controls.distance(v);
            if d > 1e-12 {
                return Err(SweepError::InvalidInput(format!("control value at t = {t} is {d:.3e} away from U")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CheckStatus {
    Pass,
    Fail,
}

/// One assumption with its sampled verdict.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub id: &'static str,
    pub status: CheckStatus,
    pub estimate: Option<f64>,
    pub declared: Option<f64>,
    pub note: String,
}

/// Sampled validation results. Sampling can only falsify assumptions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status == CheckStatus::Pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }

    pub fn get(&self, id: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = match c.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Fail => "FAIL",
            };
            write!(f, "{:<8} {status}", c.id)?;
            if let Some(e) = c.estimate {
                write!(f, "  estimate={e:.6e}")?;
            }
            if let Some(d) = c.declared {
                write!(f, "  declared={d:.6e}")?;
            }
            writeln!(f, "  {}", c.note)?;
        }
        if self.passed() {
            writeln!(f, "no violation found on {} samples", self.samples)
        } else {
            writeln!(f, "{} assumption(s) violated", self.failures().count())
        }
    }
}

fn check(
    id: &'static str,
    ok: bool,
    estimate: Option<f64>,
    declared: Option<f64>,
    note: impl Into<String>,
) -> AssumptionCheck {
    AssumptionCheck {
        id,
        status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
        estimate,
        declared,
        note: note.into(),
    }
}

/// Samples the standing assumptions on a probe box of radius
/// `2 (1 + |φ|_∞)`. Deterministic for a fixed seed.
pub fn validate_assumptions(p: &SweepingProblem, samples: usize, seed: u64) -> ValidationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = p.dim();
    let (t0, t1) = p.horizon();
    let radius = 2.0 * (1.0 + p.history().sup_norm());
    let mut checks = Vec::new();

    // C1: nonempty snapshots at breakpoints and midpoints
    let set = p.moving_set();
    let mut times = vec![t0, t1];
    for tr in set.tracks() {
        times.extend(tr.times().iter().copied().filter(|&b| b > t0 && b < t1));
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mids: Vec<f64> = times.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    times.extend(mids);
    let empty_at = times.iter().copied().find(|&t| {
        let offsets = set.tracks().iter().map(|tr| tr.eval(t)).collect();
        Polyhedron::new(set.normals().to_vec(), offsets).is_err()
    });
    checks.push(check(
        "C1",
        empty_at.is_none(),
        None,
        None,
        match empty_at {
            None => format!("{} snapshots nonempty", times.len()),
            Some(t) => format!("empty snapshot at t = {t}"),
        },
    ));
    checks.push(check(
        "C2",
        true,
        Some(set.modulus_rate()),
        Some(set.lip_offsets()),
        format!("modulus rate = {:.6} x offset Lipschitz constant", set.hausdorff_factor()),
    ));
    checks.push(check("C3", true, None, None, "convex polyhedra are prox-regular for every r"));

    let sample_point = |rng: &mut ChaCha8Rng| Vector::from_fn(n, |_, _| rng.gen_range(-radius..=radius));

    // SH2/H3 growth
    let beta = p.perturbation().growth_beta();
    let mut worst_ratio: f64 = 0.0;
    let mut growth_ok = true;
    for _ in 0..samples {
        let t = rng.gen_range(t0..=t1);
        let x = sample_point(&mut rng);
        let y = sample_point(&mut rng);
        let u = p.controls().sample(&mut rng);
        let g = p.g(t, &x, &y, &u).norm();
        let scale = 1.0 + x.norm() + y.norm();
        worst_ratio = worst_ratio.max(g / scale);
        if g > beta * scale + 1e-9 {
            growth_ok = false;
        }
    }
    checks.push(check(
        "SH2/H3",
        growth_ok,
        Some(worst_ratio),
        Some(beta),
        if growth_ok { "linear growth holds on samples" } else { "linear growth violated" },
    ));

    // SH1/H2 Lipschitz in (t, x, y), uniformly in u
    let mut lip_est: f64 = 0.0;
    let h = 1e-3 * radius;
    for _ in 0..samples {
        let t = rng.gen_range(t0..=t1);
        let x = sample_point(&mut rng);
        let y = sample_point(&mut rng);
        let u = p.controls().sample(&mut rng);
        let dt = rng.gen_range(-h..=h);
        let dx = Vector::from_fn(n, |_, _| rng.gen_range(-h..=h));
        let dy = Vector::from_fn(n, |_, _| rng.gen_range(-h..=h));
        let t2 = (t + dt).clamp(t0, t1);
        let denom = (t2 - t).abs() + dx.norm() + dy.norm();
        if denom > 0.0 {
            let diff = (p.g(t2, &(&x + &dx), &(&y + &dy), &u) - p.g(t, &x, &y, &u)).norm();
            lip_est = lip_est.max(diff / denom);
        }
    }
    let declared = p.perturbation().lipschitz_estimate();
    let lip_ok = declared.is_none_or(|d| lip_est <= 1.05 * d + 1e-9);
    checks.push(check(
        "SH1/H2",
        lip_ok,
        Some(lip_est),
        declared,
        if lip_ok { "finite-difference Lipschitz estimate" } else { "sampled Lipschitz constant exceeds declared" },
    ));

    // SH3/H4 delay
    let delay = p.delay();
    let mut lag_ok = true;
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=samples.max(2) {
        let t = t0 + (t1 - t0) * i as f64 / samples.max(2) as f64;
        let l = delay.lag_unchecked(t);
        if l < prev - 1e-12 {
            lag_ok = false;
        }
        prev = l;
    }
    let monotone = delay.is_nonincreasing();
    let positive = delay.max_delay() > 0.0 && delay.min_delay() >= 0.0;
    let delay_ok = monotone && positive && lag_ok;
    let mut note = Vec::new();
    if !monotone {
        note.push("delay is increasing somewhere");
    }
    if !positive {
        note.push("max delay must be positive");
    }
    if !lag_ok {
        note.push("lag time decreases");
    }
    checks.push(check(
        "SH3/H4",
        delay_ok,
        Some(delay.lipschitz()),
        Some(delay.max_delay()),
        if delay_ok { "nonincreasing, 0 < max delay < inf".to_string() } else { note.join("; ") },
    ));

    checks.push(check(
        "SH4/H5",
        p.history().lipschitz().is_finite(),
        Some(p.history().lipschitz()),
        None,
        "piecewise-affine history",
    ));
    checks.push(check("H1", true, None, None, "control set nonempty and compact"));
    let viol = p.set_at(t0).max_violation(&p.x0());
    checks.push(check("init", viol <= 1e-9, Some(viol), None, "initial state lies in C(t0)"));

    ValidationReport { samples, checks }
}
