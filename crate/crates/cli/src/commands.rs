//! The five subcommands. Each writes its files into the output directory and
//! returns the computed result.

use std::path::Path;

use serde::Serialize;
use sweep_core::catchup::{refine_until_cauchy, solve_delayed, CauchyReport, SolveOptions, SolveReport, Trajectory};
use sweep_core::discretize::{convergence_study, ConvergenceTable};
use sweep_core::geometry::Vector;
use sweep_core::optimize::{
    convergence_study_optimal, oracle_rollout_count, solve_local, solve_oracle, Candidate, DiscreteOcp,
    FeasibilityReport, LocalOptions, SolveResult, SolverTrace, StudyRow, ENUMERATION_GUARD,
};
use sweep_core::problem::{validate_assumptions, ControlSignal, SweepingProblem, ValidationReport};
use sweep_core::SweepError;

use crate::error::CliError;
use crate::output::{indexed, num, push_blank, push_vector, OutDir, Table};
use crate::scenario::Scenario;

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REFINE_CSV: &str = "refine.csv";
pub const FEASIBLE_CSV: &str = "feasible.csv";
pub const OPTIMIZE_JSON: &str = "optimize.json";
pub const OPTIMIZE_CSV: &str = "optimize.csv";
pub const STUDY_CSV: &str = "study.csv";

fn intervals(level: u32) -> Result<usize, CliError> {
    if level > 24 {
        return Err(SweepError::LevelTooLarge { level, limit: 24 }.into());
    }
    Ok(1usize << level)
}

fn load(path: &Path) -> Result<(Scenario, SweepingProblem), CliError> {
    let scn = Scenario::load(path)?;
    let p = scn.problem()?;
    Ok((scn, p))
}

pub fn validate(path: &Path, samples: Option<usize>, seed: Option<u64>) -> Result<ValidationReport, CliError> {
    let (scn, p) = load(path)?;
    Ok(validate_assumptions(&p, samples.unwrap_or(scn.study.samples), seed.unwrap_or(scn.study.seed)))
}

/// Node table: `t, x_1..x_n, u_1..u_d, dist_to_C, active_constraints`.
pub fn trajectory_table(p: &SweepingProblem, traj: &Trajectory, u: &ControlSignal) -> Result<Table, CliError> {
    let (n, d) = (p.dim(), p.control_dim());
    let mut header = vec!["t".to_string()];
    header.extend(indexed("x", n));
    header.extend(indexed("u", d));
    header.push("dist_to_C".into());
    header.push("active_constraints".into());
    let mut table = Table::new(header);
    let mesh = traj.mesh();
    for i in 0..=mesh.k() {
        let t = mesh.node(i);
        let x = traj.node_state(i);
        let ui = match traj.controls().get(i) {
            Some(u) => u.clone(),
            None => u.eval(t)?,
        };
        let c = p.moving_set().snapshot(t)?;
        let active: Vec<String> = c.active_set(x).iter().map(|j| j.to_string()).collect();
        let mut row = vec![num(t)];
        push_vector(&mut row, x);
        push_vector(&mut row, &ui);
        row.push(num(c.distance(x)?));
        row.push(active.join(";"));
        table.push(row);
    }
    Ok(table)
}

pub struct Simulation {
    pub trajectory: Trajectory,
    pub report: SolveReport,
}

pub fn simulate(path: &Path, level: Option<u32>, substeps: Option<usize>, out: &Path) -> Result<Simulation, CliError> {
    let (scn, p) = load(path)?;
    let out = OutDir::new(out)?;
    let u = scn.nominal_control(&p)?;
    let k = intervals(level.unwrap_or(scn.study.level))?;
    let opts = SolveOptions { substeps: substeps.unwrap_or(scn.study.substeps) };
    let (traj, report) = solve_delayed(&p, &u, k, &opts)?;
    out.write_table(TRAJECTORY_CSV, &trajectory_table(&p, &traj, &u)?)?;
    out.write_json(REPORT_JSON, &report)?;
    Ok(Simulation { trajectory: traj, report })
}

fn cauchy_table(rep: &CauchyReport) -> Table {
    let mut t = Table::new(["k", "sup_distance"]);
    for l in &rep.levels {
        t.push(vec![l.k.to_string(), num(l.sup_distance)]);
    }
    t
}

pub fn refine(path: &Path, tol: Option<f64>, k_max: Option<usize>, out: &Path) -> Result<CauchyReport, CliError> {
    let (scn, p) = load(path)?;
    let out = OutDir::new(out)?;
    let u = scn.nominal_control(&p)?;
    let opts = SolveOptions { substeps: scn.study.substeps };
    let tol = tol.unwrap_or(scn.study.tol);
    let k_max = k_max.unwrap_or(scn.study.k_max);
    match refine_until_cauchy(&p, &u, tol, scn.study.k_start, k_max, &opts) {
        Ok((traj, rep)) => {
            out.write_table(REFINE_CSV, &cauchy_table(&rep))?;
            out.write_table(TRAJECTORY_CSV, &trajectory_table(&p, &traj, &u)?)?;
            Ok(rep)
        }
        Err(SweepError::NoConvergence { last, tol, k, result }) => {
            // the table is still useful; write it, then fail
            out.write_table(REFINE_CSV, &cauchy_table(&result.1))?;
            out.write_table(TRAJECTORY_CSV, &trajectory_table(&p, &result.0, &u)?)?;
            Err(SweepError::NoConvergence { last, tol, k, result }.into())
        }
        Err(e) => Err(e.into()),
    }
}

/// Parses `m1..m2` (inclusive) or a single level.
pub fn parse_levels(s: &str) -> Result<Vec<u32>, String> {
    let parse = |x: &str| x.trim().parse::<u32>().map_err(|e| format!("bad level `{x}`: {e}"));
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (parse(a)?, parse(b.trim_start_matches('='))?);
            if a > b {
                return Err(format!("empty level range {s}"));
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![parse(s)?]),
    }
}

pub fn feasible(path: &Path, levels: Option<Vec<u32>>, out: &Path) -> Result<ConvergenceTable, CliError> {
    let (scn, p) = load(path)?;
    let out = OutDir::new(out)?;
    let ubar = scn.nominal_control(&p)?;
    let xbar = scn.reference(&p, &ubar)?;
    let levels = levels.unwrap_or_else(|| scn.study.levels.clone());
    let table = convergence_study(&p, &xbar, &ubar, &levels)?;
    let mut csv = Table::new(ConvergenceTable::HEADER);
    for r in &table.rows {
        csv.push(vec![
            r.level.to_string(),
            num(r.h),
            num(r.u_l2),
            num(r.x_w12),
            num(r.r_l2),
            num(r.sup_error),
            num(r.lipschitz),
        ]);
    }
    out.write_table(FEASIBLE_CSV, &csv)?;
    Ok(table)
}

#[derive(Clone, Debug, Default)]
pub struct OptimizeArgs {
    pub level: Option<u32>,
    pub starts: Option<usize>,
    pub oracle_grid: Option<usize>,
    pub seed: Option<u64>,
    pub study: Option<Vec<u32>>,
}

#[derive(Serialize)]
struct CandidateJson {
    objective: f64,
    feasible: bool,
    feasibility: FeasibilityReport,
    states: Vec<Vec<f64>>,
    controls: Vec<Vec<f64>>,
    trace: SolverTrace,
}

impl CandidateJson {
    fn new(r: &SolveResult) -> Self {
        let rows = |xs: &[Vector]| xs.iter().map(|x| x.iter().copied().collect()).collect();
        Self {
            objective: r.objective,
            feasible: r.feasible,
            feasibility: r.feasibility,
            states: rows(&r.candidate.states),
            controls: rows(&r.candidate.controls),
            trace: r.trace.clone(),
        }
    }
}

#[derive(Serialize)]
struct OptimizeJson {
    level: u32,
    epsilon: f64,
    lipschitz_cap: f64,
    seed: u64,
    starts: usize,
    oracle_grid: Option<usize>,
    reference_objective: f64,
    #[serde(rename = "J_local")]
    j_local: f64,
    #[serde(rename = "J_oracle")]
    j_oracle: Option<f64>,
    local: CandidateJson,
    oracle: Option<CandidateJson>,
}

pub struct Optimization {
    pub local: SolveResult,
    pub oracle: Option<SolveResult>,
    pub reference_objective: f64,
    pub study: Option<Vec<StudyRow>>,
}

fn solution_table(ocp: &DiscreteOcp, local: &Candidate, oracle: Option<&Candidate>) -> Table {
    let p = ocp.problem();
    let (n, d) = (p.dim(), p.control_dim());
    let mut header = vec!["t".to_string()];
    header.extend(indexed("x", n));
    header.extend(indexed("u", d));
    header.extend(indexed("xbar", n));
    header.extend(indexed("ubar", d));
    if oracle.is_some() {
        header.extend(indexed("oracle_x", n));
        header.extend(indexed("oracle_u", d));
    }
    let mut table = Table::new(header);
    let sampled = ocp.sampled();
    let k = ocp.mesh().k();
    let push_control = |row: &mut Vec<String>, c: &[Vector], i: usize| match c.get(i) {
        Some(u) => push_vector(row, u),
        None => push_blank(row, d),
    };
    for i in 0..=k {
        let mut row = vec![num(ocp.mesh().node(i))];
        push_vector(&mut row, &local.states[i]);
        push_control(&mut row, &local.controls, i);
        push_vector(&mut row, &sampled.states[i]);
        push_control(&mut row, &sampled.controls, i);
        if let Some(o) = oracle {
            push_vector(&mut row, &o.states[i]);
            push_control(&mut row, &o.controls, i);
        }
        table.push(row);
    }
    table
}

pub fn optimize(path: &Path, args: &OptimizeArgs, out: &Path) -> Result<Optimization, CliError> {
    let (scn, p) = load(path)?;
    let out = OutDir::new(out)?;
    let study = &scn.study;
    let level = args.level.unwrap_or(study.opt_level);
    let k = intervals(level)?;
    let oracle_grid = args.oracle_grid.or(study.oracle_grid);
    if let Some(grid) = oracle_grid {
        // refuse before any work is done
        let count = oracle_rollout_count(p.controls(), grid, k);
        if count > ENUMERATION_GUARD {
            return Err(SweepError::EnumerationTooLarge { count, limit: ENUMERATION_GUARD }.into());
        }
    }
    let ubar = scn.nominal_control(&p)?;
    let xbar = scn.reference(&p, &ubar)?;
    let cost = scn.cost(&xbar)?;
    let ocp = DiscreteOcp::new(&p, cost.clone(), &xbar, &ubar, level, study.epsilon, study.lipschitz_cap)?;
    let opts = LocalOptions {
        starts: args.starts.unwrap_or(study.starts),
        seed: args.seed.unwrap_or(study.seed),
        ..LocalOptions::default()
    };
    let local = solve_local(&ocp, &opts)?;
    let oracle = oracle_grid.map(|g| solve_oracle(&ocp, g, opts.feasibility_tol)).transpose()?;

    let json = OptimizeJson {
        level,
        epsilon: ocp.epsilon(),
        lipschitz_cap: ocp.lipschitz_cap(),
        seed: opts.seed,
        starts: opts.starts,
        oracle_grid,
        reference_objective: ocp.reference_objective(),
        j_local: local.objective,
        j_oracle: oracle.as_ref().map(|o| o.objective),
        local: CandidateJson::new(&local),
        oracle: oracle.as_ref().map(CandidateJson::new),
    };
    out.write_json(OPTIMIZE_JSON, &json)?;
    out.write_table(OPTIMIZE_CSV, &solution_table(&ocp, &local.candidate, oracle.as_ref().map(|o| &o.candidate)))?;

    let rows = match &args.study {
        Some(levels) => {
            let rows =
                convergence_study_optimal(&p, &cost, &xbar, &ubar, levels, study.epsilon, study.lipschitz_cap, &opts)?;
            let mut csv = Table::new(StudyRow::HEADER);
            for r in &rows {
                csv.push(vec![
                    r.level.to_string(),
                    num(r.objective),
                    num(r.reference_objective),
                    num(r.x_w12),
                    num(r.u_l2),
                    r.feasible.to_string(),
                ]);
            }
            out.write_table(STUDY_CSV, &csv)?;
            Some(rows)
        }
        None => None,
    };
    Ok(Optimization { local, oracle, reference_objective: ocp.reference_objective(), study: rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_ranges() {
        assert_eq!(parse_levels("5..11").unwrap(), (5..=11).collect::<Vec<_>>());
        assert_eq!(parse_levels("3..=4").unwrap(), vec![3, 4]);
        assert_eq!(parse_levels("7").unwrap(), vec![7]);
        assert!(parse_levels("4..2").is_err());
        assert!(parse_levels("a..2").is_err());
    }

    #[test]
    fn level_limit() {
        assert!(matches!(intervals(25), Err(CliError::Validation(_))));
        assert_eq!(intervals(3).unwrap(), 8);
    }
}
