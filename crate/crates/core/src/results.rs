//! Plot-ready CSV of solved cells, one row per club and setting.

use std::path::Path;

use ftcp_milp::{SolveResult, SolveStatus};
use serde::{Deserialize, Serialize};

use crate::bundle::write_atomic;
use crate::domain::{Decision, Instance, TransferSolution};
use crate::money::Money;
use crate::value::ScenarioSet;

#[derive(Debug, thiserror::Error)]
pub enum ResultsError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub club: String,
    pub alpha: f64,
    pub growth: f64,
    pub formation: String,
    pub budget: Money,
    pub seed: u64,
    pub scenarios: usize,
    pub status: String,
    pub objective: Option<f64>,
    /// Mean over the scenarios of the kept squad's value in a year.
    pub expected_value: Option<f64>,
    pub net_spend: Option<Money>,
    pub buys: String,
    pub sells: String,
    pub loans_in: String,
    pub loans_out: String,
    pub n_buys: usize,
    pub n_sells: usize,
    pub n_loans_in: usize,
    pub n_loans_out: usize,
    pub avg_buy_age: Option<f64>,
    pub avg_sell_age: Option<f64>,
    pub empirical_probability: Option<f64>,
    pub oos_probability: Option<f64>,
    pub solve_secs: f64,
    pub nodes: u64,
    pub gap: Option<f64>,
    pub error: String,
}

/// Setting of one cell; the rest of a row comes from the solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMeta {
    pub seed: u64,
    pub scenarios: usize,
}

pub fn status_label(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::OptimalWithinGap => "optimal",
        SolveStatus::FeasibleTimeLimit => "time_limit",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::Unbounded => "unbounded",
    }
}

fn mean_age<'a>(instance: &Instance, ids: impl Iterator<Item = &'a str>) -> Option<f64> {
    let ages: Vec<f64> = ids.filter_map(|id| instance.player(id)).map(|p| p.age).collect();
    (!ages.is_empty()).then(|| ages.iter().sum::<f64>() / ages.len() as f64)
}

impl ResultRow {
    fn empty(instance: &Instance, meta: &CellMeta) -> Self {
        Self {
            club: instance.club.clone(),
            alpha: instance.alpha,
            growth: instance.growth_factor,
            formation: instance.formation.name.clone(),
            budget: instance.budget,
            seed: meta.seed,
            scenarios: meta.scenarios,
            status: String::new(),
            objective: None,
            expected_value: None,
            net_spend: None,
            buys: String::new(),
            sells: String::new(),
            loans_in: String::new(),
            loans_out: String::new(),
            n_buys: 0,
            n_sells: 0,
            n_loans_in: 0,
            n_loans_out: 0,
            avg_buy_age: None,
            avg_sell_age: None,
            empirical_probability: None,
            oos_probability: None,
            solve_secs: 0.0,
            nodes: 0,
            gap: None,
            error: String::new(),
        }
    }

    /// Row of a finished solve, recomputing every figure from the decisions.
    pub fn solved(
        instance: &Instance,
        meta: &CellMeta,
        scenarios: &ScenarioSet,
        result: &SolveResult,
        solution: Option<&TransferSolution>,
        oos_probability: Option<f64>,
    ) -> Self {
        let mut row = Self::empty(instance, meta);
        row.status = status_label(result.status).into();
        row.solve_secs = result.wall_time_secs;
        row.nodes = result.nodes;
        row.gap = result.gap();
        row.oos_probability = oos_probability;
        if let Some(sol) = solution {
            let kept: Vec<bool> = instance.players.iter().map(|p| sol.decision(&p.id).is_some_and(|d| d.keep)).collect();
            let total: f64 = (0..scenarios.num_scenarios()).map(|s| scenarios.team_value(s, &kept)).sum();
            row.objective = Some(sol.objective_rating);
            row.expected_value = Some(total / scenarios.num_scenarios().max(1) as f64);
            row.net_spend = Some(sol.net_spend);
            let list = |d| sol.with(d).join(";");
            row.buys = list(Decision::Buy);
            row.sells = list(Decision::Sell);
            row.loans_in = list(Decision::LoanIn);
            row.loans_out = list(Decision::LoanOut);
            row.n_buys = sol.with(Decision::Buy).len();
            row.n_sells = sol.with(Decision::Sell).len();
            row.n_loans_in = sol.with(Decision::LoanIn).len();
            row.n_loans_out = sol.with(Decision::LoanOut).len();
            row.avg_buy_age = mean_age(instance, sol.with(Decision::Buy).into_iter());
            row.avg_sell_age = mean_age(instance, sol.with(Decision::Sell).into_iter());
            row.empirical_probability = Some(sol.empirical_probability);
        }
        row
    }

    /// Row of a cell that failed before or during the solve.
    pub fn failed(instance: &Instance, meta: &CellMeta, error: impl Into<String>) -> Self {
        let mut row = Self::empty(instance, meta);
        row.status = "error".into();
        row.error = error.into();
        row
    }
}

/// CSV text: `# ` comment lines carrying the run configuration, then a header and the rows.
pub fn results_to_string(comments: &[String], rows: &[ResultRow]) -> Result<String, ResultsError> {
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(RESULT_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

pub const RESULT_COLUMNS: [&str; 27] = [
    "club",
    "alpha",
    "growth",
    "formation",
    "budget",
    "seed",
    "scenarios",
    "status",
    "objective",
    "expected_value",
    "net_spend",
    "buys",
    "sells",
    "loans_in",
    "loans_out",
    "n_buys",
    "n_sells",
    "n_loans_in",
    "n_loans_out",
    "avg_buy_age",
    "avg_sell_age",
    "empirical_probability",
    "oos_probability",
    "solve_secs",
    "nodes",
    "gap",
    "error",
];

pub fn parse_results(text: &str) -> Result<Vec<ResultRow>, ResultsError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn export_results(path: &Path, comments: &[String], rows: &[ResultRow]) -> Result<(), ResultsError> {
    let text = results_to_string(comments, rows)?;
    write_atomic(path, text.as_bytes()).map_err(|source| ResultsError::Io {
        path: path.display().to_string(),
        source,
    })
}
