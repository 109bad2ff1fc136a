//! Exhaustive reference for small instances, written against the instance
//! alone so it shares no code with the program builder.

#![allow(dead_code)]

use ftcp_core::domain::{Decision, Instance, Player, Role};
use ftcp_core::money::Money;
use ftcp_core::value::ScenarioSet;

/// Every assignment of `(keep, buy, sell, loan_in, loan_out)` that satisfies
/// the per-player rows for an owned or a target player.
pub fn player_states(owned: bool) -> Vec<[bool; 5]> {
    if owned {
        vec![
            [true, false, false, false, false],
            [true, false, false, false, true],
            [false, false, true, false, false],
        ]
    } else {
        vec![
            [false, false, false, false, false],
            [true, true, false, false, false],
            [false, false, false, true, false],
        ]
    }
}

fn allowed(p: &Player, state: &[bool; 5]) -> bool {
    Decision::ALL.iter().all(|&d| !(state[d.slot()] && p.locked(d)))
}

#[derive(Debug, Clone)]
pub struct OracleOptimum {
    pub objective: f64,
    pub states: Vec<[bool; 5]>,
    pub net_spend: Money,
}

/// Best squad by full enumeration, `None` when no assignment is feasible.
pub fn enumerate(instance: &Instance, scenarios: &ScenarioSet) -> Option<OracleOptimum> {
    let n = instance.players.len();
    let options: Vec<Vec<[bool; 5]>> = instance
        .players
        .iter()
        .map(|p| player_states(p.owned).into_iter().filter(|s| allowed(p, s)).collect())
        .collect();
    let s_count = scenarios.num_scenarios();
    let need = (instance.alpha * s_count as f64 - 1e-9).ceil() as usize;
    let target = instance.target_value();
    let mut choice = vec![0usize; n];
    let mut best: Option<OracleOptimum> = None;
    loop {
        let states: Vec<[bool; 5]> = (0..n).map(|k| options[k][choice[k]]).collect();
        if let Some((objective, spend)) = evaluate(instance, scenarios, &states, need, target) {
            if best.as_ref().is_none_or(|b| objective > b.objective) {
                best = Some(OracleOptimum {
                    objective,
                    states: states.clone(),
                    net_spend: spend,
                });
            }
        }
        // Odometer over the per-player options.
        let mut k = 0;
        loop {
            if k == n {
                return best;
            }
            choice[k] += 1;
            if choice[k] < options[k].len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

fn evaluate(instance: &Instance, scenarios: &ScenarioSet, states: &[[bool; 5]], need: usize, target: f64) -> Option<(f64, Money)> {
    let registered = |s: &[bool; 5]| (s[0] && !s[4]) || s[3];
    let squad = states.iter().filter(|s| registered(s)).count();
    if squad != instance.squad_size as usize {
        return None;
    }
    for r in Role::ALL {
        let count = instance
            .players
            .iter()
            .zip(states)
            .filter(|(p, s)| p.has_role(r) && registered(s))
            .count() as u32;
        if count < instance.formation.min(r) || instance.formation.max(r).is_some_and(|m| count > m) {
            return None;
        }
    }
    let mut spend = Money::ZERO;
    for (p, s) in instance.players.iter().zip(states) {
        if s[1] {
            spend += p.purchase_price;
        }
        if s[2] {
            spend -= p.sale_price;
        }
        if s[3] {
            spend += p.loan_in_fee;
        }
        if s[4] {
            spend -= p.loan_out_fee;
        }
    }
    if spend > instance.budget {
        return None;
    }
    let hits = (0..scenarios.num_scenarios())
        .filter(|&sc| {
            let v: f64 = states.iter().zip(&scenarios.values).filter(|(s, _)| s[0]).map(|(_, v)| v[sc]).sum();
            v >= target - 1e-6
        })
        .count();
    if hits < need {
        return None;
    }
    let objective = instance.players.iter().zip(states).filter(|(_, s)| registered(s)).map(|(p, _)| p.rating).sum();
    Some((objective, spend))
}
