//! Exact computations on convex polyhedra `{x : <a_j, x> <= c_j}` with unit
//! normals: Euclidean projection with KKT certificate, distance, normal cones
//! and the moving-set variant with piecewise-affine offsets.
//!
//! Projection enumerates active sets by increasing cardinality and solves the
//! equality-constrained least-squares problem on each, which is exact and
//! deterministic for the small constraint counts used here. Larger systems
//! fall back to Dykstra's alternating projections followed by a KKT polish.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SweepError};

pub type Vector = DVector<f64>;

/// Relative tolerance deciding whether a constraint is active at a point.
pub const ACTIVE_TOL: f64 = 1e-9;

/// Largest constraint count handled by exhaustive active-set enumeration.
pub const ENUMERATION_LIMIT: usize = 12;

const MAX_DIM: usize = 32;
const PIVOT_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct Polyhedron {
    normals: Vec<Vector>,
    offsets: Vec<f64>,
    dim: usize,
}

/// Projection together with its KKT certificate:
/// `y - point = sum_j multipliers[j] * a_{active[j]}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveSetResult {
    pub point: Vector,
    pub active: Vec<usize>,
    pub multipliers: Vec<f64>,
}

impl ActiveSetResult {
    /// Norm of `y - point - sum_j lambda_j a_j`.
    pub fn kkt_residual(&self, poly: &Polyhedron, y: &Vector) -> f64 {
        let mut r = y - &self.point;
        for (&j, &l) in self.active.iter().zip(&self.multipliers) {
            r.axpy(-l, &poly.normals[j], 1.0);
        }
        r.norm()
    }
}

/// Split of `w` into its projection onto the normal cone and the remainder.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeDecomposition {
    /// Closest element of the normal cone to `w`.
    pub zeta: Vector,
    /// `w - zeta`, whose norm is the distance from `w` to the cone.
    pub residual: Vector,
    pub generators: Vec<usize>,
    pub weights: Vec<f64>,
}

impl ConeDecomposition {
    pub fn distance(&self) -> f64 {
        self.residual.norm()
    }
}

impl Polyhedron {
    /// Builds the polyhedron, rescaling each `(a_j, c_j)` to a unit normal.
    /// Zero rows and empty sets are rejected.
    pub fn new(normals: Vec<Vector>, offsets: Vec<f64>) -> Result<Self> {
        let poly = Self::normalized(normals, offsets)?;
        poly.check_nonempty()?;
        Ok(poly)
    }

    /// Half-space `{x : <a, x> <= c}`.
    pub fn half_space(normal: Vector, offset: f64) -> Result<Self> {
        Self::new(vec![normal], vec![offset])
    }

    /// Axis-aligned box written with `2n` unit normals.
    pub fn boxed(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(SweepError::DimensionMismatch(format!("box bounds {} vs {}", lower.len(), upper.len())));
        }
        let n = lower.len();
        let mut normals = Vec::with_capacity(2 * n);
        let mut offsets = Vec::with_capacity(2 * n);
        for i in 0..n {
            normals.push(Vector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 }));
            offsets.push(upper[i]);
            normals.push(Vector::from_fn(n, |k, _| if k == i { -1.0 } else { 0.0 }));
            offsets.push(-lower[i]);
        }
        Self::new(normals, offsets)
    }

    fn normalized(normals: Vec<Vector>, offsets: Vec<f64>) -> Result<Self> {
        if normals.is_empty() {
            return Err(SweepError::InvalidInput("polyhedron needs at least one constraint".into()));
        }
        if normals.len() != offsets.len() {
            return Err(SweepError::DimensionMismatch(format!(
                "{} normals vs {} offsets",
                normals.len(),
                offsets.len()
            )));
        }
        let dim = normals[0].len();
        if dim == 0 || dim > MAX_DIM {
            return Err(SweepError::InvalidInput(format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        let mut out_n = Vec::with_capacity(normals.len());
        let mut out_c = Vec::with_capacity(offsets.len());
        for (j, (a, c)) in normals.into_iter().zip(offsets).enumerate() {
            if a.len() != dim {
                return Err(SweepError::DimensionMismatch(format!(
                    "normal {j} has length {}, expected {dim}",
                    a.len()
                )));
            }
            if !c.is_finite() || a.iter().any(|v| !v.is_finite()) {
                return Err(SweepError::InvalidInput(format!("constraint {j} is not finite")));
            }
            let norm = a.norm();
            if norm < 1e-14 {
                return Err(SweepError::InvalidInput(format!("constraint {j} has a zero normal")));
            }
            out_n.push(a / norm);
            out_c.push(c / norm);
        }
        Ok(Self { normals: out_n, offsets: out_c, dim })
    }

    /// Same normals, new offsets; nonemptiness is not re-checked.
    pub(crate) fn with_offsets_unchecked(&self, offsets: Vec<f64>) -> Self {
        debug_assert_eq!(offsets.len(), self.normals.len());
        Self { normals: self.normals.clone(), offsets, dim: self.dim }
    }

    fn check_nonempty(&self) -> Result<()> {
        let origin = Vector::zeros(self.dim);
        match self.project_impl(&origin) {
            Ok(_) => Ok(()),
            Err(SweepError::NumericalFailure(msg)) | Err(SweepError::InfeasiblePolyhedron(msg)) => {
                Err(SweepError::InfeasiblePolyhedron(msg))
            }
            Err(e) => Err(e),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn normals(&self) -> &[Vector] {
        &self.normals
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// `c_j - <a_j, x>`; negative when the constraint is violated.
    pub fn slack(&self, j: usize, x: &Vector) -> f64 {
        self.offsets[j] - self.normals[j].dot(x)
    }

    pub fn is_active(&self, j: usize, x: &Vector) -> bool {
        self.slack(j, x) <= ACTIVE_TOL * (1.0 + self.offsets[j].abs())
    }

    pub fn active_set(&self, x: &Vector) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.is_active(j, x)).collect()
    }

    /// Largest constraint violation `max_j (<a_j,x> - c_j)_+`.
    pub fn max_violation(&self, x: &Vector) -> f64 {
        (0..self.len()).map(|j| (-self.slack(j, x)).max(0.0)).fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        self.max_violation(x) <= tol
    }

    fn check_dim(&self, v: &Vector, what: &str) -> Result<()> {
        if v.len() != self.dim {
            return Err(SweepError::DimensionMismatch(format!(
                "{what} has length {}, polyhedron lives in R^{}",
                v.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Euclidean projection of `y` with active set and multipliers.
    pub fn project(&self, y: &Vector) -> Result<ActiveSetResult> {
        self.check_dim(y, "point")?;
        // nonemptiness was established at construction, so a failed search
        // here is numerical
        self.project_impl(y).map_err(|e| match e {
            SweepError::InfeasiblePolyhedron(msg) => SweepError::NumericalFailure(msg),
            other => other,
        })
    }

    fn project_impl(&self, y: &Vector) -> Result<ActiveSetResult> {
        if self.max_violation(y) == 0.0 {
            let active = self.active_set(y);
            let multipliers = vec![0.0; active.len()];
            return Ok(ActiveSetResult { point: y.clone(), active, multipliers });
        }
        let support = if self.len() <= ENUMERATION_LIMIT {
            let all: Vec<usize> = (0..self.len()).collect();
            enumerate_kkt(&self.normals, &self.offsets, &all, y, 1e-13)
                .or_else(|| enumerate_kkt(&self.normals, &self.offsets, &all, y, 1e-9))
                .ok_or_else(|| SweepError::InfeasiblePolyhedron("no KKT point among the active sets".into()))?
        } else {
            self.dykstra_polish(y)?
        };
        Ok(self.certificate(support))
    }

    fn certificate(&self, support: Kkt) -> ActiveSetResult {
        let active = self.active_set(&support.point);
        let multipliers = active
            .iter()
            .map(|j| support.rows.iter().position(|r| r == j).map_or(0.0, |p| support.lambda[p].max(0.0)))
            .collect();
        let mut res = ActiveSetResult { point: support.point, active, multipliers };
        // rows of the support that fell outside the tolerance band still carry weight
        for (r, l) in support.rows.iter().zip(&support.lambda) {
            if !res.active.contains(r) && *l > 0.0 {
                res.active.push(*r);
                res.multipliers.push(*l);
            }
        }
        res
    }

    fn dykstra_polish(&self, y: &Vector) -> Result<Kkt> {
        let s = self.len();
        let mut x = y.clone();
        let mut incr = vec![Vector::zeros(self.dim); s];
        let scale = 1.0 + y.norm() + self.offsets.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let mut converged = false;
        for _ in 0..200_000 {
            let prev = x.clone();
            for j in 0..s {
                let z = &x + &incr[j];
                let viol = self.normals[j].dot(&z) - self.offsets[j];
                x = if viol > 0.0 { &z - &self.normals[j] * viol } else { z.clone() };
                incr[j] = z - &x;
            }
            if (&x - prev).norm() <= 1e-15 * scale && self.max_violation(&x) <= 1e-12 * scale {
                converged = true;
                break;
            }
        }
        if !converged && self.max_violation(&x) > 1e-6 * scale {
            return Err(SweepError::InfeasiblePolyhedron(
                "alternating projections did not reach a feasible point".into(),
            ));
        }
        // polish on the near-active constraints
        let band: Vec<usize> = (0..s).filter(|&j| self.slack(j, &x) <= 1e-6 * (1.0 + self.offsets[j].abs())).collect();
        if band.len() <= 20 {
            for tol in [1e-13, 1e-9] {
                if let Some(k) = enumerate_kkt(&self.normals, &self.offsets, &band, y, tol) {
                    if self.max_violation(&k.point) <= tol * scale {
                        return Ok(k);
                    }
                }
            }
        }
        Err(SweepError::NumericalFailure(format!("KKT polish failed on {} near-active constraints", band.len())))
    }

    pub fn distance(&self, y: &Vector) -> Result<f64> {
        let p = self.project(y)?;
        Ok((y - p.point).norm())
    }

    /// Decomposes `w` against the normal cone at `x`, the cone generated by the
    /// active normals. The remainder is the projection of `w` onto the polar
    /// (tangent) cone.
    pub fn normal_cone_decompose(&self, x: &Vector, w: &Vector) -> Result<ConeDecomposition> {
        self.check_dim(x, "point")?;
        self.check_dim(w, "direction")?;
        let tol = 1e-9 * (1.0 + x.norm());
        let viol = self.max_violation(x);
        if viol > tol {
            return Err(SweepError::PointNotInSet { distance: viol, tol });
        }
        Ok(self.cone_split(&self.active_set(x), w))
    }

    fn cone_split(&self, active: &[usize], w: &Vector) -> ConeDecomposition {
        let zero_offsets = vec![0.0; self.len()];
        let tangent_viol = active.iter().map(|&j| self.normals[j].dot(w)).fold(0.0f64, f64::max);
        if active.is_empty() || tangent_viol <= 0.0 {
            return ConeDecomposition {
                zeta: Vector::zeros(self.dim),
                residual: w.clone(),
                generators: Vec::new(),
                weights: Vec::new(),
            };
        }
        let kkt = enumerate_kkt(&self.normals, &zero_offsets, active, w, 1e-13)
            .or_else(|| enumerate_kkt(&self.normals, &zero_offsets, active, w, 1e-9))
            .expect("a polyhedral cone containing the origin always has a projection");
        let residual = kkt.point;
        let zeta = w - &residual;
        let (generators, weights) = kkt.rows.iter().zip(&kkt.lambda).map(|(&r, &l)| (r, l.max(0.0))).unzip();
        ConeDecomposition { zeta, residual, generators, weights }
    }

    /// Distance from `w` to the normal cone at `x`.
    pub fn dist_to_normal_cone(&self, x: &Vector, w: &Vector) -> Result<f64> {
        Ok(self.normal_cone_decompose(x, w)?.distance())
    }

    /// Whether `v` lies within `tol` of the normal cone at `x`; `x` must be
    /// within `tol` of the set.
    pub fn normal_cone_contains(&self, x: &Vector, v: &Vector, tol: f64) -> Result<bool> {
        self.check_dim(x, "point")?;
        self.check_dim(v, "direction")?;
        let d = self.distance(x)?;
        let allowed = tol.max(1e-9);
        if d > allowed {
            return Err(SweepError::PointNotInSet { distance: d, tol: allowed });
        }
        Ok(self.cone_split(&self.active_set(x), v).distance() <= tol)
    }
}

struct Kkt {
    point: Vector,
    rows: Vec<usize>,
    lambda: Vec<f64>,
}

/// Subset masks of `0..s` sorted by cardinality, then by value.
fn ordered_masks(s: usize) -> &'static [u32] {
    static CACHE: OnceLock<Vec<Vec<u32>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| {
        (0..=20usize)
            .map(|k| {
                let mut masks: Vec<u32> = (0..(1u32 << k)).collect();
                masks.sort_by_key(|m| (m.count_ones(), *m));
                masks
            })
            .collect()
    });
    &cache[s]
}

/// Exhaustive active-set search over subsets of `rows` for the projection of
/// `y` onto `{x : <a_j,x> <= c_j, j in rows}`. Returns the first KKT point in
/// order of increasing cardinality.
fn enumerate_kkt(normals: &[Vector], offsets: &[f64], rows: &[usize], y: &Vector, tol: f64) -> Option<Kkt> {
    let dim = y.len();
    let ynorm = y.norm();
    let lambda_tol = tol * (1.0 + ynorm);
    let feasible =
        |x: &Vector| rows.iter().all(|&j| normals[j].dot(x) - offsets[j] <= tol * (1.0 + offsets[j].abs() + ynorm));
    if feasible(y) {
        return Some(Kkt { point: y.clone(), rows: Vec::new(), lambda: Vec::new() });
    }
    let s = rows.len();
    assert!(s <= 20, "enumeration over {s} constraints");
    let mut subset = Vec::with_capacity(dim);
    for &mask in ordered_masks(s).iter().skip(1) {
        let k = mask.count_ones() as usize;
        if k > dim {
            break;
        }
        subset.clear();
        subset.extend((0..s).filter(|b| mask & (1 << b) != 0).map(|b| rows[b]));
        let gram = DMatrix::from_fn(k, k, |a, b| normals[subset[a]].dot(&normals[subset[b]]));
        let Some(chol) = gram.cholesky() else { continue };
        let l = chol.l_dirty();
        if (0..k).any(|i| l[(i, i)] < PIVOT_TOL) {
            continue;
        }
        let rhs = DVector::from_fn(k, |a, _| normals[subset[a]].dot(y) - offsets[subset[a]]);
        let lambda = chol.solve(&rhs);
        if lambda.iter().any(|&v| v < -lambda_tol) {
            continue;
        }
        let mut x = y.clone();
        for (a, &j) in subset.iter().enumerate() {
            x.axpy(-lambda[a], &normals[j], 1.0);
        }
        if feasible(&x) {
            return Some(Kkt { point: x, rows: subset.clone(), lambda: lambda.iter().copied().collect() });
        }
    }
    None
}

/// Continuous piecewise-affine scalar function given by breakpoints; constant
/// beyond its first and last breakpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Track {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(SweepError::InvalidInput(format!(
                "track needs matching nonempty times/values ({} vs {})",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SweepError::InvalidInput("track times must be strictly increasing".into()));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(SweepError::InvalidInput("track contains non-finite entries".into()));
        }
        Ok(Self { times, values })
    }

    pub fn constant(value: f64) -> Self {
        Self { times: vec![0.0], values: vec![value] }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|v| *v == self.values[0])
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let i = self.times.partition_point(|&b| b <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let w = (t - t0) / (t1 - t0);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    /// Largest absolute slope over segments meeting `[lo, hi]`.
    pub fn max_slope_on(&self, lo: f64, hi: f64) -> f64 {
        self.times
            .windows(2)
            .zip(self.values.windows(2))
            .filter(|(t, _)| t[1] > lo && t[0] < hi)
            .map(|(t, v)| ((v[1] - v[0]) / (t[1] - t[0])).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn scaled(&self, factor: f64) -> Self {
        Self { times: self.times.clone(), values: self.values.iter().map(|v| v * factor).collect() }
    }
}

/// Polyhedron with fixed unit normals and piecewise-affine offsets `c_j(t)` on
/// a horizon `[t0, t_end]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MovingPolyhedron {
    base: Polyhedron,
    tracks: Vec<Track>,
    horizon: (f64, f64),
    lip_offsets: f64,
    hausdorff_factor: f64,
    is_static: bool,
}

impl MovingPolyhedron {
    pub fn new(normals: Vec<Vector>, tracks: Vec<Track>, horizon: (f64, f64)) -> Result<Self> {
        let (t0, t1) = horizon;
        if !(t1 > t0) {
            return Err(SweepError::InvalidInput(format!("horizon [{t0}, {t1}] is empty")));
        }
        if normals.len() != tracks.len() {
            return Err(SweepError::DimensionMismatch(format!(
                "{} normals vs {} offset tracks",
                normals.len(),
                tracks.len()
            )));
        }
        let norms: Vec<f64> = normals.iter().map(|a| a.norm()).collect();
        let initial: Vec<f64> = tracks.iter().map(|tr| tr.eval(t0)).collect();
        // normalizes the rows and checks the set at t0
        let base = Polyhedron::new(normals, initial)?;
        let tracks: Vec<Track> = tracks.iter().zip(&norms).map(|(tr, &n)| tr.scaled(1.0 / n)).collect();

        let mut times: Vec<f64> = vec![t0, t1];
        for tr in &tracks {
            times.extend(tr.times().iter().copied().filter(|&b| b > t0 && b < t1));
        }
        times.sort_by(f64::total_cmp);
        times.dedup();
        let mut samples = times.clone();
        samples.extend(times.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        for &t in &samples {
            let offsets = tracks.iter().map(|tr| tr.eval(t)).collect();
            Polyhedron::new(base.normals.clone(), offsets).map_err(|e| match e {
                SweepError::InfeasiblePolyhedron(_) => {
                    SweepError::InfeasiblePolyhedron(format!("snapshot at t = {t} is empty"))
                }
                other => other,
            })?;
        }

        let lip_offsets = tracks.iter().map(|tr| tr.max_slope_on(t0, t1)).fold(0.0, f64::max);
        let is_static = tracks.iter().all(|tr| tr.max_slope_on(t0, t1) == 0.0);
        let hausdorff_factor = if is_static { 1.0 } else { hausdorff_factor(&base.normals)? };
        Ok(Self { base, tracks, horizon, lip_offsets, hausdorff_factor, is_static })
    }

    /// Time-independent set on a horizon.
    pub fn fixed(poly: Polyhedron, horizon: (f64, f64)) -> Result<Self> {
        let tracks = poly.offsets.iter().map(|&c| Track::constant(c)).collect();
        Self::new(poly.normals.clone(), tracks, horizon)
    }

    pub fn horizon(&self) -> (f64, f64) {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.base.dim
    }

    pub fn normals(&self) -> &[Vector] {
        &self.base.normals
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Snapshot at the start of the horizon; the set itself when static.
    pub fn initial(&self) -> &Polyhedron {
        &self.base
    }

    /// Projection onto `C(t)` without the range check.
    pub(crate) fn project_at(&self, t: f64, y: &Vector) -> Result<ActiveSetResult> {
        if self.is_static {
            self.base.project(y)
        } else {
            self.snapshot_unchecked(t).project(y)
        }
    }

    pub fn is_static(&self) -> bool {
        self.is_static
    }

    /// Lipschitz constant of `t -> (c_1(t), ..., c_s(t))` in the sup norm.
    pub fn lip_offsets(&self) -> f64 {
        self.lip_offsets
    }

    /// Factor bounding the Hausdorff distance between snapshots by the sup-norm
    /// offset change.
    pub fn hausdorff_factor(&self) -> f64 {
        self.hausdorff_factor
    }

    /// Slope of the modulus `v(t)` bounding `|d_{C(t)}(y) - d_{C(s)}(y)|`.
    pub fn modulus_rate(&self) -> f64 {
        if self.is_static {
            0.0
        } else {
            self.hausdorff_factor * self.lip_offsets
        }
    }

    pub fn snapshot(&self, t: f64) -> Result<Polyhedron> {
        let (lo, hi) = self.horizon;
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(SweepError::TimeOutOfRange { t, lo, hi });
        }
        Ok(self.snapshot_unchecked(t))
    }

    /// Snapshot without the range check. Affine offsets between validated
    /// breakpoints keep every snapshot nonempty (convex combination of points).
    pub(crate) fn snapshot_unchecked(&self, t: f64) -> Polyhedron {
        if self.is_static {
            return self.base.clone();
        }
        self.base.with_offsets_unchecked(self.tracks.iter().map(|tr| tr.eval(t)).collect())
    }
}

/// Bound on `H(C(t), C(s)) / max_j |c_j(t) - c_j(s)|` for fixed unit normals:
/// the maximum over linearly independent row subsets `S` of
/// `1 / dist(0, conv{a_j : j in S})`.
///
/// At a projection the displacement is `A_S^T lambda` with `lambda >= 0` and
/// `|x - x'|^2 = lambda . e <= eps |lambda|_1`, while
/// `|A_S^T lambda| >= dist(0, conv A_S) |lambda|_1`.
pub fn hausdorff_factor(normals: &[Vector]) -> Result<f64> {
    let s = normals.len();
    if s > 20 {
        return Err(SweepError::InvalidInput(format!("moving sets are limited to 20 constraints, got {s}")));
    }
    let dim = normals.first().map_or(0, |a| a.len());
    let count = 1usize << s;
    // best[mask] = squared min-norm over faces of the simplex on `mask`
    let mut best = vec![f64::INFINITY; count];
    let mut independent = vec![false; count];
    independent[0] = true;
    let mut kappa: f64 = 1.0;
    for &mask in ordered_masks(s).iter().skip(1) {
        let k = mask.count_ones() as usize;
        let low = mask.trailing_zeros() as usize;
        if k > dim || !independent[(mask & !(1 << low)) as usize] {
            continue;
        }
        let rows: Vec<usize> = (0..s).filter(|b| mask & (1 << b) != 0).collect();
        let gram = DMatrix::from_fn(k, k, |a, b| normals[rows[a]].dot(&normals[rows[b]]));
        let Some(chol) = gram.cholesky() else { continue };
        if (0..k).any(|i| chol.l_dirty()[(i, i)] < PIVOT_TOL) {
            continue;
        }
        independent[mask as usize] = true;
        let w = chol.solve(&DVector::from_element(k, 1.0));
        let total: f64 = w.sum();
        let own = if total > 0.0 && w.iter().all(|&v| v >= -1e-12 * total) { 1.0 / total } else { f64::INFINITY };
        let sub = rows.iter().map(|&b| best[(mask & !(1 << b)) as usize]).fold(f64::INFINITY, f64::min);
        best[mask as usize] = own.min(sub);
        let mu = best[mask as usize].sqrt();
        if mu > 0.0 {
            kappa = kappa.max(1.0 / mu);
        }
    }
    Ok(kappa)
}
