use std::collections::BTreeSet;

use ftcp_milp::{solve_milp, MilpError, MilpProblem, ObjectiveSense, RowSense, SolveResult, SolverParams, VarKind};
use serde::{Deserialize, Serialize};

use crate::domain::{validate_instance, Decision, Instance, PlayerDecision, Role, TransferSolution};
use crate::money::Money;
use crate::value::ScenarioSet;

/// Absolute row tolerance when re-checking a returned assignment.
pub const CHECK_TOL: f64 = 1e-6;
/// Largest distance from 0 or 1 accepted for a binary before rounding.
pub const INTEGRALITY_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BuildError {
    #[error("invalid instance: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("scenario matrix has {rows} player rows for {players} players")]
    Misaligned { players: usize, rows: usize },
    #[error("scenario set is empty")]
    NoScenarios,
    #[error("scenario rows have unequal lengths")]
    Ragged,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtractError {
    #[error("assignment has {found} entries for {expected} variables")]
    Length { expected: usize, found: usize },
    #[error("variable {name} = {value} is not within {INTEGRALITY_TOL} of a binary value")]
    NotIntegral { name: String, value: f64 },
    #[error("row {row} violated after rounding: activity {activity}, rhs {rhs}")]
    Inconsistent { row: String, activity: f64, rhs: f64 },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WhatIfError {
    #[error("unknown player `{0}`")]
    UnknownPlayer(String),
    #[error("fixing {decision}={value} for `{player}` conflicts with {constraint}")]
    Conflict {
        player: String,
        decision: Decision,
        value: bool,
        constraint: String,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum FtcpError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Solver(#[from] MilpError),
}

/// A decision pinned to 0 or 1 during negotiation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixing {
    pub player: String,
    pub decision: Decision,
    pub value: bool,
}

/// The built program plus what is needed to read solutions back.
#[derive(Debug, Clone, PartialEq)]
pub struct FtcpProblem {
    pub milp: MilpProblem,
    pub players: Vec<String>,
    pub owned: Vec<bool>,
    pub ratings: Vec<f64>,
    /// `(purchase, loan in, sale, loan out)` prices per player.
    pub prices: Vec<[Money; 4]>,
    /// Variable index per player and decision, in `Decision::ALL` order.
    pub vars: Vec<[usize; 5]>,
    pub scenario_vars: Vec<usize>,
    pub scenario_values: Vec<Vec<f64>>,
    /// `V·R·(1 + d)`, also the big-M of every scenario row.
    pub target_value: f64,
    pub min_hits: usize,
    pub fixings: Vec<Fixing>,
}

/// Scenario rows that must hold: `⌈α·|S|⌉`, with slack for α·|S| landing a hair above an integer.
pub fn required_hits(alpha: f64, scenarios: usize) -> usize {
    (alpha * scenarios as f64 - 1e-9).ceil().max(0.0) as usize
}

fn var_name(d: Decision, id: &str) -> String {
    format!("{}_{id}", d.prefix())
}

pub fn build_ftcp(instance: &Instance, scenarios: &ScenarioSet) -> Result<FtcpProblem, BuildError> {
    let violations = validate_instance(instance);
    if !violations.is_empty() {
        return Err(BuildError::Invalid(violations));
    }
    let n = instance.players.len();
    if scenarios.values.len() != n {
        return Err(BuildError::Misaligned {
            players: n,
            rows: scenarios.values.len(),
        });
    }
    let s_count = scenarios.num_scenarios();
    if s_count == 0 {
        return Err(BuildError::NoScenarios);
    }
    if scenarios.values.iter().any(|v| v.len() != s_count) {
        return Err(BuildError::Ragged);
    }

    let mut milp = MilpProblem::new(instance.club.clone(), ObjectiveSense::Maximize);
    let mut vars = Vec::with_capacity(n);
    for p in &instance.players {
        let mut slots = [0; 5];
        for d in Decision::ALL {
            let j = milp.add_binary(var_name(d, &p.id));
            if p.locked(d) {
                milp.variables[j].upper = 0.0;
            }
            slots[d.slot()] = j;
        }
        vars.push(slots);
    }
    let scenario_vars: Vec<usize> = (0..s_count).map(|s| milp.add_binary(format!("w_{s}"))).collect();
    let [keep, buy, sell, loan_in, loan_out] = Decision::ALL.map(Decision::slot);

    // Rating of the registered squad.
    for (p, v) in instance.players.iter().zip(&vars) {
        if p.rating != 0.0 {
            milp.objective.push((v[keep], p.rating));
            milp.objective.push((v[loan_in], p.rating));
            milp.objective.push((v[loan_out], -p.rating));
        }
    }
    for (p, v) in instance.players.iter().zip(&vars) {
        milp.add_constraint(
            format!("balance_{}", p.id),
            vec![(v[keep], 1.0), (v[buy], -1.0), (v[sell], 1.0)],
            RowSense::Eq,
            if p.owned { 1.0 } else { 0.0 },
        );
    }
    let registered = |filter: &dyn Fn(usize) -> bool| -> Vec<(usize, f64)> {
        vars.iter()
            .enumerate()
            .filter(|(k, _)| filter(*k))
            .flat_map(|(_, v)| [(v[keep], 1.0), (v[loan_in], 1.0), (v[loan_out], -1.0)])
            .collect()
    };
    milp.add_constraint("squad_size", registered(&|_| true), RowSense::Eq, instance.squad_size as f64);
    let f = &instance.formation;
    for r in Role::ALL {
        let members = |k: usize| instance.players[k].has_role(r);
        if f.min(r) > 0 {
            milp.add_constraint(format!("role_min_{r}"), registered(&members), RowSense::Ge, f.min(r) as f64);
        }
        if let Some(max) = f.max(r) {
            milp.add_constraint(format!("role_max_{r}"), registered(&members), RowSense::Le, max as f64);
        }
    }
    for (p, v) in instance.players.iter().zip(&vars) {
        let owned = if p.owned { 1.0 } else { 0.0 };
        milp.add_constraint(format!("inbound_{}", p.id), vec![(v[loan_in], 1.0), (v[buy], 1.0)], RowSense::Le, 1.0 - owned);
        milp.add_constraint(format!("outbound_{}", p.id), vec![(v[loan_out], 1.0), (v[sell], 1.0)], RowSense::Le, owned);
    }
    let mut budget = Vec::new();
    let mut prices = Vec::with_capacity(n);
    for (p, v) in instance.players.iter().zip(&vars) {
        let ledger = [p.purchase_price, p.loan_in_fee, p.sale_price, p.loan_out_fee];
        for (slot, sign, price) in [(buy, 1.0, ledger[0]), (loan_in, 1.0, ledger[1]), (sell, -1.0, ledger[2]), (loan_out, -1.0, ledger[3])] {
            if price != Money::ZERO {
                budget.push((v[slot], sign * price.as_f64()));
            }
        }
        prices.push(ledger);
    }
    milp.add_constraint("budget", budget, RowSense::Le, instance.budget.as_f64());

    // Σ_p V_ps y_p + M(1 - w_s) >= V·R with M = V·R, i.e. Σ_p V_ps y_p - M w_s >= 0.
    let target = instance.target_value();
    for (s, &w) in scenario_vars.iter().enumerate() {
        let mut terms: Vec<(usize, f64)> = vars
            .iter()
            .zip(&scenarios.values)
            .filter(|(_, vals)| vals[s] != 0.0)
            .map(|(v, vals)| (v[keep], vals[s]))
            .collect();
        if target != 0.0 {
            terms.push((w, -target));
        }
        milp.add_constraint(format!("value_s{s}"), terms, RowSense::Ge, 0.0);
    }
    let min_hits = required_hits(instance.alpha, s_count);
    milp.add_constraint(
        "probability",
        scenario_vars.iter().map(|&w| (w, 1.0)).collect(),
        RowSense::Ge,
        min_hits as f64,
    );

    Ok(FtcpProblem {
        milp,
        players: instance.players.iter().map(|p| p.id.clone()).collect(),
        owned: instance.players.iter().map(|p| p.owned).collect(),
        ratings: instance.players.iter().map(|p| p.rating).collect(),
        prices,
        vars,
        scenario_vars,
        scenario_values: scenarios.values.clone(),
        target_value: target,
        min_hits,
        fixings: Vec::new(),
    })
}

impl FtcpProblem {
    pub fn num_scenarios(&self) -> usize {
        self.scenario_vars.len()
    }

    pub fn player_index(&self, id: &str) -> Option<usize> {
        self.players.iter().position(|p| p == id)
    }

    pub fn var(&self, player: usize, d: Decision) -> usize {
        self.vars[player][d.slot()]
    }
}

/// Rounds, re-checks every row and recomputes all reported quantities from the decisions.
pub fn extract_solution(problem: &FtcpProblem, raw: &[f64]) -> Result<TransferSolution, ExtractError> {
    let milp = &problem.milp;
    if raw.len() != milp.num_variables() {
        return Err(ExtractError::Length {
            expected: milp.num_variables(),
            found: raw.len(),
        });
    }
    let mut x = raw.to_vec();
    for (j, v) in milp.variables.iter().enumerate() {
        if v.kind == VarKind::Binary {
            let r = x[j].round();
            if (x[j] - r).abs() > INTEGRALITY_TOL || !(r == 0.0 || r == 1.0) {
                return Err(ExtractError::NotIntegral {
                    name: v.name.clone(),
                    value: x[j],
                });
            }
            x[j] = r;
        }
    }
    milp.verify(&x, CHECK_TOL).map_err(|v| ExtractError::Inconsistent {
        row: v.name,
        activity: v.activity,
        rhs: v.rhs,
    })?;

    let on = |p: usize, d: Decision| x[problem.var(p, d)] == 1.0;
    let decisions: Vec<PlayerDecision> = (0..problem.players.len())
        .map(|p| PlayerDecision {
            player: problem.players[p].clone(),
            keep: on(p, Decision::Keep),
            buy: on(p, Decision::Buy),
            sell: on(p, Decision::Sell),
            loan_in: on(p, Decision::LoanIn),
            loan_out: on(p, Decision::LoanOut),
        })
        .collect();
    Ok(summarize(problem, decisions))
}

/// Objective, ledger and scenario coverage of a set of decisions.
pub fn summarize(problem: &FtcpProblem, decisions: Vec<PlayerDecision>) -> TransferSolution {
    let mut objective = 0.0;
    let mut net_spend = Money::ZERO;
    for (d, (rating, price)) in decisions.iter().zip(problem.ratings.iter().zip(&problem.prices)) {
        let count = i32::from(d.keep) + i32::from(d.loan_in) - i32::from(d.loan_out);
        objective += rating * f64::from(count);
        let [purchase, fee_in, sale, fee_out] = *price;
        for (flag, amount) in [(d.buy, purchase), (d.loan_in, fee_in), (d.sell, -sale), (d.loan_out, -fee_out)] {
            if flag {
                net_spend += amount;
            }
        }
    }
    let kept: Vec<bool> = decisions.iter().map(|d| d.keep).collect();
    let scenarios = problem.num_scenarios();
    let scenario_hits: Vec<bool> = (0..scenarios)
        .map(|s| {
            let value: f64 = problem.scenario_values.iter().zip(&kept).filter(|(_, &k)| k).map(|(v, _)| v[s]).sum();
            value >= problem.target_value - CHECK_TOL
        })
        .collect();
    let hits = scenario_hits.iter().filter(|&&h| h).count();
    TransferSolution {
        decisions,
        objective_rating: objective,
        net_spend,
        scenario_hits,
        empirical_probability: hits as f64 / scenarios.max(1) as f64,
    }
}

/// Copy of `problem` with the given decisions pinned. Conflicts with locks,
/// earlier fixings or any single row are rejected with the row named.
pub fn apply_whatif(problem: &FtcpProblem, fixings: &[Fixing]) -> Result<FtcpProblem, WhatIfError> {
    let mut out = problem.clone();
    for f in fixings {
        let p = out.player_index(&f.player).ok_or_else(|| WhatIfError::UnknownPlayer(f.player.clone()))?;
        let j = out.var(p, f.decision);
        let value = if f.value { 1.0 } else { 0.0 };
        let var = &mut out.milp.variables[j];
        if value < var.lower || value > var.upper {
            let earlier = out.fixings.iter().any(|g| g.player == f.player && g.decision == f.decision);
            return Err(WhatIfError::Conflict {
                player: f.player.clone(),
                decision: f.decision,
                value: f.value,
                constraint: if earlier {
                    format!("an earlier fixing of {}", var.name)
                } else {
                    format!("the lock on {}", var.name)
                },
            });
        }
        var.lower = value;
        var.upper = value;
        out.fixings.push(f.clone());

        for c in &out.milp.constraints {
            if !c.terms.iter().any(|t| t.0 == j) {
                continue;
            }
            let (mut lo, mut hi) = (0.0, 0.0);
            for &(k, a) in &c.terms {
                let v = &out.milp.variables[k];
                lo += (a * v.lower).min(a * v.upper);
                hi += (a * v.lower).max(a * v.upper);
            }
            let broken = match c.sense {
                RowSense::Le => lo > c.rhs + CHECK_TOL,
                RowSense::Ge => hi < c.rhs - CHECK_TOL,
                RowSense::Eq => lo > c.rhs + CHECK_TOL || hi < c.rhs - CHECK_TOL,
            };
            if broken {
                return Err(WhatIfError::Conflict {
                    player: f.player.clone(),
                    decision: f.decision,
                    value: f.value,
                    constraint: c.name.clone(),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct FtcpOutcome {
    pub result: SolveResult,
    pub solution: Option<TransferSolution>,
}

pub fn solve_ftcp(problem: &FtcpProblem, params: &SolverParams) -> Result<FtcpOutcome, FtcpError> {
    let result = solve_milp(&problem.milp, params)?;
    let solution = match &result.incumbent {
        Some(x) => Some(extract_solution(problem, x)?),
        None => None,
    };
    Ok(FtcpOutcome { result, solution })
}

/// Constraint family a row belongs to, for infeasibility reports. `None` marks
/// rows that define the decisions themselves and are never relaxed.
pub fn row_group(name: &str) -> Option<String> {
    if name == "budget" || name == "squad_size" {
        return Some(name.to_string());
    }
    if name == "probability" || name.starts_with("value_s") {
        return Some("value_target".into());
    }
    name.strip_prefix("role_min_")
        .or_else(|| name.strip_prefix("role_max_"))
        .map(|r| format!("role_{r}"))
}

fn feasible(problem: &MilpProblem, params: &SolverParams) -> Result<bool, MilpError> {
    let mut probe = problem.clone();
    probe.objective.clear();
    let r = solve_milp(&probe, params)?;
    Ok(r.incumbent.is_some())
}

/// Smallest set of constraint families whose joint presence makes the program
/// infeasible, found by a deletion filter. Locks, fixings and the per-player
/// bookkeeping rows stay in force throughout. Empty when the program is feasible
/// or when those alone already conflict.
pub fn diagnose_infeasibility(problem: &FtcpProblem, params: &SolverParams) -> Result<Vec<String>, MilpError> {
    let groups: BTreeSet<String> = problem.milp.constraints.iter().filter_map(|c| row_group(&c.name)).collect();
    let restricted = |keep: &BTreeSet<String>| {
        let mut p = problem.milp.clone();
        p.constraints.retain(|c| row_group(&c.name).is_none_or(|g| keep.contains(&g)));
        p
    };
    let probe_params = SolverParams {
        emphasis: ftcp_milp::Emphasis::FindFeasible,
        ..params.clone()
    };
    if feasible(&problem.milp, &probe_params)? || !feasible(&restricted(&BTreeSet::new()), &probe_params)? {
        return Ok(Vec::new());
    }
    let mut kept = groups.clone();
    for g in &groups {
        kept.remove(g);
        if feasible(&restricted(&kept), &probe_params)? {
            kept.insert(g.clone());
        }
    }
    Ok(kept.into_iter().collect())
}
