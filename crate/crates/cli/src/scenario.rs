//! Scenario files: TOML documents describing a problem and its study
//! parameters.

use std::collections::BTreeMap;
use std::path::Path as FsPath;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sweep_core::catchup::{solve_delayed, SolveOptions, Trajectory};
use sweep_core::geometry::{MovingPolyhedron, Track, Vector};
use sweep_core::optimize::MayerCost;
use sweep_core::problem::{ControlSet, ControlSignal, DelaySpec, History, Path, Perturbation, SweepingProblem};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub horizon: HorizonSpec,
    pub geometry: GeometrySpec,
    pub perturbation: PerturbationSpec,
    pub delay: DelaySpecToml,
    pub history: HistorySpec,
    pub controls: ControlsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostSpec>,
    #[serde(default)]
    pub study: StudySpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSpec {
    pub t0: f64,
    pub t1: f64,
}

/// A constant offset or a piecewise-affine track.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OffsetSpec {
    Constant(f64),
    Track(TrackSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackSpec {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub normals: Vec<Vec<f64>>,
    pub offsets: Vec<OffsetSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationSpec {
    /// `g = A x + B y + D u + e(t)`.
    Affine {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        d: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        e: Option<PathSpec>,
        beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz: Option<f64>,
    },
    Catalog {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
        beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelaySpecToml {
    Constant { value: f64 },
    Track { times: Vec<f64>, values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistorySpec {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    /// The nominal control `ū`; defaults to a constant point of `U`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<PathSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    /// `|x(T) - target|²`.
    Quadratic { target: Vec<f64> },
    /// `<q, x(T)>`.
    Linear { q: Vec<f64> },
    /// `|x(T) - x̄(T)|²` around the simulated nominal pair.
    Reference,
}

fn default_level() -> u32 {
    10
}
fn default_substeps() -> usize {
    SolveOptions::default().substeps
}
fn default_tol() -> f64 {
    1e-6
}
fn default_k_start() -> usize {
    16
}
fn default_k_max() -> usize {
    1 << 16
}
fn default_levels() -> Vec<u32> {
    (5..=11).collect()
}
fn default_reference_level() -> u32 {
    14
}
fn default_epsilon() -> f64 {
    1.0
}
fn default_starts() -> usize {
    8
}
fn default_samples() -> usize {
    1000
}
fn default_opt_level() -> u32 {
    2
}

/// Study parameters; command-line flags override them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    /// `k = 2^level` outer intervals for `simulate`.
    #[serde(default = "default_level")]
    pub level: u32,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_k_start")]
    pub k_start: usize,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Levels of the feasible-pair study.
    #[serde(default = "default_levels")]
    pub levels: Vec<u32>,
    /// Level of the nominal reference solve.
    #[serde(default = "default_reference_level")]
    pub reference_level: u32,
    /// Level of the discrete optimal control problem.
    #[serde(default = "default_opt_level")]
    pub opt_level: u32,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz_cap: Option<f64>,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_grid: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for StudySpec {
    fn default() -> Self {
        Self {
            level: default_level(),
            substeps: default_substeps(),
            tol: default_tol(),
            k_start: default_k_start(),
            k_max: default_k_max(),
            levels: default_levels(),
            reference_level: default_reference_level(),
            opt_level: default_opt_level(),
            epsilon: default_epsilon(),
            lipschitz_cap: None,
            starts: default_starts(),
            oracle_grid: None,
            seed: 0,
            samples: default_samples(),
        }
    }
}

fn vector(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::Validation(format!("matrix `{what}` must be a nonempty rectangular list of rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn path(spec: &PathSpec) -> Result<Path, CliError> {
    Ok(Path::new(spec.times.clone(), spec.values.iter().map(|x| vector(x)).collect())?)
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(file: &FsPath) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(file).map_err(|e| CliError::Io(format!("cannot read {}: {e}", file.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Parse(msg) => CliError::Parse(format!("{}: {msg}", file.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn horizon(&self) -> (f64, f64) {
        (self.horizon.t0, self.horizon.t1)
    }

    pub fn problem(&self) -> Result<SweepingProblem, CliError> {
        let horizon = self.horizon();
        let g = &self.geometry;
        let normals: Vec<Vector> = g.normals.iter().map(|a| vector(a)).collect();
        let tracks = g
            .offsets
            .iter()
            .map(|o| match o {
                OffsetSpec::Constant(c) => Ok(Track::constant(*c)),
                OffsetSpec::Track(t) => Track::new(t.times.clone(), t.values.clone()),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let set = MovingPolyhedron::new(normals, tracks, horizon)?;
        let n = set.dim();
        let control_dim = self.control_dim()?;

        let perturbation = match &self.perturbation {
            PerturbationSpec::Affine { a, b, d, e, beta, lipschitz } => {
                let e = e.as_ref().map(path).transpose()?;
                let g = Perturbation::affine(matrix(a, "a")?, matrix(b, "b")?, matrix(d, "d")?, e, *beta)?;
                match lipschitz {
                    Some(l) => g.with_lipschitz(*l),
                    None => g,
                }
            }
            PerturbationSpec::Catalog { name, params, beta, lipschitz } => {
                let g = Perturbation::catalog(name, params, n, *beta)?;
                match lipschitz {
                    Some(l) => g.with_lipschitz(*l),
                    None => g,
                }
            }
        };
        if perturbation.control_dim() != control_dim {
            return Err(CliError::Validation(format!(
                "perturbation takes {}-dimensional controls but the control set has dimension {control_dim}",
                perturbation.control_dim()
            )));
        }
        let delay = match &self.delay {
            DelaySpecToml::Constant { value } => DelaySpec::constant(*value, horizon)?,
            DelaySpecToml::Track { times, values } => {
                DelaySpec::track(Track::new(times.clone(), values.clone())?, horizon)?
            }
        };
        let history =
            History::new(self.history.times.clone(), self.history.values.iter().map(|x| vector(x)).collect())?;
        Ok(SweepingProblem::new(set, perturbation, delay, history, self.control_set()?)?)
    }

    fn control_dim(&self) -> Result<usize, CliError> {
        Ok(self.control_set()?.dim())
    }

    pub fn control_set(&self) -> Result<ControlSet, CliError> {
        let c = &self.controls;
        match (&c.lower, &c.upper, &c.points) {
            (Some(lo), Some(hi), None) => Ok(ControlSet::boxed(vector(lo), vector(hi))?),
            (None, None, Some(pts)) => Ok(ControlSet::finite(pts.iter().map(|x| vector(x)).collect())?),
            _ => Err(CliError::Validation("controls need either `lower` and `upper` or `points`, not both".into())),
        }
    }

    /// The nominal control `ū` on the horizon.
    pub fn nominal_control(&self, p: &SweepingProblem) -> Result<ControlSignal, CliError> {
        let u = match &self.controls.signal {
            Some(s) => {
                ControlSignal::new(s.times.clone(), s.values.iter().map(|x| vector(x)).collect(), self.horizon())?
            }
            None => ControlSignal::constant(p.controls().default_point(), self.horizon()),
        };
        p.check_control(&u)?;
        Ok(u)
    }

    /// Nominal trajectory at `2^reference_level` intervals.
    pub fn reference(&self, p: &SweepingProblem, ubar: &ControlSignal) -> Result<Trajectory, CliError> {
        let k = 1usize
            .checked_shl(self.study.reference_level)
            .filter(|_| self.study.reference_level <= 24)
            .ok_or_else(|| CliError::Validation(format!("reference level {} too large", self.study.reference_level)))?;
        let opts = SolveOptions { substeps: self.study.substeps };
        Ok(solve_delayed(p, ubar, k, &opts).map_err(CliError::Numerical)?.0)
    }

    pub fn cost(&self, xbar: &Trajectory) -> Result<MayerCost, CliError> {
        let n = xbar.dim();
        let cost = match &self.cost {
            None => return Err(CliError::Validation("scenario has no [cost] section".into())),
            Some(CostSpec::Quadratic { target }) => MayerCost::Quadratic { target: vector(target) },
            Some(CostSpec::Linear { q }) => MayerCost::Linear { q: vector(q) },
            Some(CostSpec::Reference) => MayerCost::Quadratic { target: xbar.final_state().clone() },
        };
        if cost.dim() != n {
            return Err(CliError::Validation(format!("cost has dimension {}, state has {n}", cost.dim())));
        }
        Ok(cost)
    }
}
