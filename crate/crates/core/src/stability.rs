use ftcp_milp::{SolveStatus, SolverParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Instance, TransferSolution};
use crate::ftcp::{build_ftcp, solve_ftcp, FtcpError, CHECK_TOL};
use crate::value::{sample_scenarios, ValueError, ValueModel};

#[derive(Debug, thiserror::Error)]
pub enum StabilityError {
    #[error("stability needs at least 2 repetitions, got {0}")]
    TooFewRepetitions(usize),
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error(transparent)]
    Ftcp(#[from] FtcpError),
}

/// Seed of repetition `rep`; repetitions never share a random stream.
pub fn repetition_seed(seed: u64, rep: usize) -> u64 {
    let mut z = seed.wrapping_add((rep as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Repetition {
    pub seed: u64,
    pub status: Option<SolveStatus>,
    /// Present when the repetition produced an incumbent.
    pub objective: Option<f64>,
    pub solve_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub repetitions: Vec<Repetition>,
    pub mean: f64,
    /// Sample standard deviation over the solved repetitions.
    pub stdev: f64,
    /// Repetitions without a solution, left out of `mean` and `stdev`.
    pub failures: usize,
}

impl StabilityReport {
    pub fn coefficient_of_variation(&self) -> f64 {
        if self.mean == 0.0 {
            if self.stdev == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            self.stdev / self.mean.abs()
        }
    }
}

/// Solves the sampled program once per independent scenario sample.
pub fn in_sample_stability(
    instance: &Instance,
    model: &ValueModel,
    sample_size: usize,
    repetitions: usize,
    params: &SolverParams,
    seed: u64,
) -> Result<StabilityReport, StabilityError> {
    let seeds: Vec<u64> = (0..repetitions).map(|rep| repetition_seed(seed, rep)).collect();
    stability_over_seeds(instance, model, sample_size, &seeds, params)
}

/// As [`in_sample_stability`] with one explicit sampling seed per repetition.
pub fn stability_over_seeds(
    instance: &Instance,
    model: &ValueModel,
    sample_size: usize,
    seeds: &[u64],
    params: &SolverParams,
) -> Result<StabilityReport, StabilityError> {
    Ok(stability_with_oos(instance, model, sample_size, seeds, 0, params)?.0)
}

/// Stability run that also scores each repetition's solution on `oos_count`
/// fresh scenarios drawn from `repetition_seed(seed, 0)`; no scoring when the count is 0.
pub fn stability_with_oos(
    instance: &Instance,
    model: &ValueModel,
    sample_size: usize,
    seeds: &[u64],
    oos_count: usize,
    params: &SolverParams,
) -> Result<(StabilityReport, Vec<Option<f64>>), StabilityError> {
    if seeds.len() < 2 {
        return Err(StabilityError::TooFewRepetitions(seeds.len()));
    }
    let runs: Vec<(Repetition, Option<f64>)> = seeds
        .par_iter()
        .map(|&seed| {
            let scenarios = sample_scenarios(model, &instance.players, sample_size, seed)?;
            let problem = build_ftcp(instance, &scenarios).map_err(FtcpError::from)?;
            let out = solve_ftcp(&problem, params)?;
            let oos = match &out.solution {
                Some(sol) if oos_count > 0 => {
                    Some(out_of_sample_probability(sol, model, instance, oos_count, repetition_seed(seed, 0))?)
                }
                _ => None,
            };
            let rep = Repetition {
                seed,
                status: Some(out.result.status),
                objective: out.solution.map(|s| s.objective_rating),
                solve_secs: out.result.wall_time_secs,
            };
            Ok((rep, oos))
        })
        .collect::<Result<_, StabilityError>>()?;
    let (reps, oos): (Vec<Repetition>, Vec<Option<f64>>) = runs.into_iter().unzip();
    let solved: Vec<f64> = reps.iter().filter_map(|r| r.objective).collect();
    let (mean, stdev) = mean_stdev(&solved);
    let report = StabilityReport {
        failures: reps.len() - solved.len(),
        repetitions: reps,
        mean,
        stdev,
    };
    Ok((report, oos))
}

/// Mean and sample standard deviation; `(NaN, NaN)` when empty, stdev 0 for one value.
pub fn mean_stdev(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Share of `count` fresh scenarios in which the kept players reach `V·R`.
pub fn out_of_sample_probability(
    solution: &TransferSolution,
    model: &ValueModel,
    instance: &Instance,
    count: usize,
    seed: u64,
) -> Result<f64, ValueError> {
    let fresh = sample_scenarios(model, &instance.players, count, seed)?;
    let kept: Vec<bool> = instance
        .players
        .iter()
        .map(|p| solution.decision(&p.id).is_some_and(|d| d.keep))
        .collect();
    let target = instance.target_value();
    let hits = (0..count).filter(|&s| fresh.team_value(s, &kept) >= target - CHECK_TOL).count();
    Ok(hits as f64 / count as f64)
}
