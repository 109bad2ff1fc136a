mod common;

use std::collections::{BTreeMap, BTreeSet};

use ftcp_core::domain::{Decision, Formation, Instance, Lock, Player, Role};
use ftcp_core::ftcp::{
    apply_whatif, build_ftcp, diagnose_infeasibility, extract_solution, required_hits, solve_ftcp, BuildError, ExtractError, Fixing,
    WhatIfError,
};
use ftcp_core::money::Money;
use ftcp_core::synthetic::{synthetic_club, synthetic_value_model, toy_instance};
use ftcp_core::value::{sample_scenarios, ScenarioSet};
use ftcp_milp::lp_format::{read_lp, write_lp};
use ftcp_milp::{solve_milp, RowSense, SolveStatus, SolverParams, VarKind};
use proptest::prelude::*;

fn person(id: &str, owned: bool, rating: f64, value: i64) -> Player {
    Player {
        id: id.into(),
        name: id.into(),
        age: 25.0,
        roles: BTreeSet::from([Role::CM]),
        owned,
        current_value: Money(value),
        purchase_price: Money::ZERO,
        sale_price: Money::ZERO,
        loan_in_fee: Money::ZERO,
        loan_out_fee: Money::ZERO,
        rating,
        locks: BTreeSet::new(),
    }
}

fn free_formation() -> Formation {
    Formation {
        name: "free".into(),
        min_per_role: BTreeMap::new(),
        max_per_role: BTreeMap::new(),
    }
}

/// Three owned and three targets; the unique optimum sells o2, loans o3 out,
/// buys t1 and loans t2 in.
fn ledger_toy() -> (Instance, ScenarioSet) {
    let mut o1 = person("o1", true, 0.10, 1500);
    o1.sale_price = Money(1400);
    let mut o2 = person("o2", true, 0.05, 1000);
    o2.sale_price = Money(800);
    o2.locks.insert(Lock::NoLoanOut);
    let mut o3 = person("o3", true, 0.02, 500);
    o3.loan_out_fee = Money(20);
    o3.locks.insert(Lock::NoSell);
    let mut t1 = person("t1", false, 0.12, 1000);
    t1.purchase_price = Money(900);
    t1.locks.insert(Lock::NoLoanIn);
    let mut t2 = person("t2", false, 0.08, 2000);
    t2.purchase_price = Money(2500);
    t2.loan_in_fee = Money(100);
    let mut t3 = person("t3", false, 0.20, 5000);
    t3.purchase_price = Money(5000);
    t3.locks.insert(Lock::NoLoanIn);
    let instance = Instance {
        club: "toy".into(),
        players: vec![o1, o2, o3, t1, t2, t3],
        budget: Money(1000),
        squad_size: 3,
        formation: free_formation(),
        value_threshold: Money(2900),
        alpha: 0.5,
        growth_factor: 1.0,
        threshold_discount: 0.0,
    };
    let values = [[1500.0, 1400.0], [1000.0, 1000.0], [500.0, 450.0], [1000.0, 900.0], [2000.0, 2000.0], [5000.0, 5000.0]];
    let scenarios = ScenarioSet {
        values: values.iter().map(|v| v.to_vec()).collect(),
        seed: 0,
    };
    (instance, scenarios)
}

#[test]
fn every_consistent_player_assignment_is_one_of_three_states() {
    for owned in [true, false] {
        let mut found = Vec::new();
        for bits in 0u32..32 {
            let s: [bool; 5] = std::array::from_fn(|k| bits >> k & 1 == 1);
            let f = |b: bool| f64::from(u8::from(b));
            let y0 = f(owned);
            let balance = f(s[0]) - f(s[1]) + f(s[2]) == y0;
            let inbound = f(s[3]) + f(s[1]) <= 1.0 - y0;
            let outbound = f(s[4]) + f(s[2]) <= y0;
            if balance && inbound && outbound {
                found.push(s);
            }
        }
        let mut expected = common::player_states(owned);
        expected.sort();
        found.sort();
        assert_eq!(found, expected, "owned = {owned}");
    }
}

#[test]
fn ledger_toy_matches_enumeration_and_hand_ledger() {
    let (instance, scenarios) = ledger_toy();
    let problem = build_ftcp(&instance, &scenarios).unwrap();
    let out = solve_ftcp(&problem, &SolverParams::default()).unwrap();
    assert_eq!(out.result.status, SolveStatus::OptimalWithinGap);
    let sol = out.solution.unwrap();
    let oracle = common::enumerate(&instance, &scenarios).unwrap();
    assert!((sol.objective_rating - oracle.objective).abs() <= 1e-9);
    assert!((sol.objective_rating - 0.30).abs() <= 1e-12);
    assert_eq!(sol.with(Decision::Sell), ["o2"]);
    assert_eq!(sol.with(Decision::LoanOut), ["o3"]);
    assert_eq!(sol.with(Decision::Buy), ["t1"]);
    assert_eq!(sol.with(Decision::LoanIn), ["t2"]);
    // 900 for t1 + 100 for t2 - 800 for o2 - 20 for o3.
    assert_eq!(sol.net_spend, Money(180));
    assert_eq!(sol.net_spend, oracle.net_spend);
    assert_eq!(sol.squad(), ["o1", "t1", "t2"]);
    // Kept o1, o3, t1: 3000 and 2750 against 2900.
    assert_eq!(sol.scenario_hits, [true, false]);
    assert_eq!(sol.empirical_probability, 0.5);
}

#[test]
fn fully_locked_owned_squad_keeps_everyone() {
    let players: Vec<Player> = (0..4)
        .map(|k| {
            let mut p = person(&format!("p{k}"), true, 0.1 * f64::from(k + 1), 1000);
            p.locks = BTreeSet::from([Lock::NoSell, Lock::NoLoanOut]);
            p
        })
        .collect();
    let instance = Instance {
        club: "locked".into(),
        players,
        budget: Money::ZERO,
        squad_size: 4,
        formation: free_formation(),
        value_threshold: Money(4000),
        alpha: 0.5,
        growth_factor: 1.0,
        threshold_discount: 0.0,
    };
    let scenarios = ScenarioSet {
        values: vec![vec![1200.0, 900.0]; 4],
        seed: 0,
    };
    let out = solve_ftcp(&build_ftcp(&instance, &scenarios).unwrap(), &SolverParams::default()).unwrap();
    let sol = out.solution.unwrap();
    assert!(sol.decisions.iter().all(|d| d.keep && !d.buy && !d.sell && !d.loan_in && !d.loan_out));
    assert!((sol.objective_rating - 1.0).abs() < 1e-12);
}

#[test]
fn full_size_club_has_five_binaries_per_player_plus_scenarios() {
    let instance = synthetic_club(0, 11);
    assert_eq!(instance.players.len(), 41);
    let scenarios = sample_scenarios(&synthetic_value_model(7), &instance.players, 70, 1).unwrap();
    let problem = build_ftcp(&instance, &scenarios).unwrap();
    assert_eq!(problem.milp.num_variables(), 275);
    assert!(problem.milp.variables.iter().all(|v| v.kind == VarKind::Binary));
    // Big-M of every scenario row is exactly V·R.
    let target = instance.target_value();
    for (s, &w) in problem.scenario_vars.iter().enumerate() {
        let row = &problem.milp.constraints[problem.milp.constraint_index(&format!("value_s{s}")).unwrap()];
        assert_eq!(row.terms.iter().find(|t| t.0 == w).unwrap().1, -target);
        assert_eq!((row.sense, row.rhs), (RowSense::Ge, 0.0));
    }
    let prob = &problem.milp.constraints[problem.milp.constraint_index("probability").unwrap()];
    assert_eq!(prob.rhs, 56.0);
}

#[test]
fn probability_row_uses_the_ceiling() {
    assert_eq!(required_hits(0.8, 70), 56);
    assert_eq!(required_hits(0.2, 70), 14);
    assert_eq!(required_hits(0.3, 10), 3);
    assert_eq!(required_hits(0.31, 10), 4);
    assert_eq!(required_hits(0.5, 3), 2);
}

#[test]
fn unbounded_role_maximum_emits_no_row() {
    let (mut instance, scenarios) = ledger_toy();
    instance.formation.min_per_role.insert(Role::CM, 1);
    instance.formation.max_per_role.insert(Role::CM, 3);
    let p = build_ftcp(&instance, &scenarios).unwrap();
    assert!(p.milp.constraint_index("role_min_CM").is_some());
    assert!(p.milp.constraint_index("role_max_CM").is_some());
    assert!(p.milp.constraint_index("role_min_GK").is_none());
    assert!(p.milp.constraint_index("role_max_GK").is_none());
}

#[test]
fn misaligned_or_invalid_inputs_are_build_errors() {
    let (instance, mut scenarios) = ledger_toy();
    scenarios.values.pop();
    assert_eq!(
        build_ftcp(&instance, &scenarios).unwrap_err(),
        BuildError::Misaligned { players: 6, rows: 5 }
    );
    let (mut instance, scenarios) = ledger_toy();
    instance.players[0].roles.clear();
    assert!(matches!(build_ftcp(&instance, &scenarios), Err(BuildError::Invalid(v)) if v.len() == 1 && v[0].contains("o1")));
}

#[test]
fn extraction_rounds_within_tolerance_and_names_broken_rows() {
    let (instance, scenarios) = ledger_toy();
    let problem = build_ftcp(&instance, &scenarios).unwrap();
    let x = solve_milp(&problem.milp, &SolverParams::default()).unwrap().incumbent.unwrap();
    let mut nudged = x.clone();
    for v in nudged.iter_mut() {
        *v = if *v > 0.5 { 0.9999999 } else { 1e-7 };
    }
    assert_eq!(extract_solution(&problem, &nudged).unwrap(), extract_solution(&problem, &x).unwrap());

    let mut half = x.clone();
    half[0] = 0.5;
    assert!(matches!(extract_solution(&problem, &half), Err(ExtractError::NotIntegral { name, .. }) if name == "y_o1"));

    // Selling o1 as well breaks its balance row.
    let mut broken = x.clone();
    broken[problem.var(0, Decision::Sell)] = 1.0;
    match extract_solution(&problem, &broken) {
        Err(ExtractError::Inconsistent { row, .. }) => assert_eq!(row, "balance_o1"),
        other => panic!("expected a consistency error, got {other:?}"),
    }
    assert!(matches!(extract_solution(&problem, &x[1..]), Err(ExtractError::Length { .. })));
}

#[test]
fn whatif_fixings_bind_and_conflicts_name_the_row() {
    let (instance, scenarios) = ledger_toy();
    let problem = build_ftcp(&instance, &scenarios).unwrap();
    let fix = |player: &str, decision, value| Fixing {
        player: player.into(),
        decision,
        value,
    };
    let fixed = apply_whatif(&problem, &[fix("t1", Decision::Buy, true), fix("t2", Decision::LoanIn, false)]).unwrap();
    assert_ne!(fixed, problem);
    assert!(problem.fixings.is_empty(), "original untouched");
    let sol = solve_ftcp(&fixed, &SolverParams::default()).unwrap().solution.unwrap();
    assert!(sol.decision("t1").unwrap().buy);
    assert!(!sol.decision("t2").unwrap().loan_in);
    // Next best third player is o2, kept instead of sold.
    assert_eq!(sol.squad(), ["o1", "o2", "t1"]);

    let conflict = apply_whatif(
        &problem,
        &[
            Fixing {
                player: "o1".into(),
                decision: Decision::Sell,
                value: true,
            },
            Fixing {
                player: "o1".into(),
                decision: Decision::LoanOut,
                value: true,
            },
        ],
    );
    assert!(matches!(conflict, Err(WhatIfError::Conflict { constraint, .. }) if constraint == "outbound_o1"));

    let buy_owned = apply_whatif(
        &problem,
        &[Fixing {
            player: "o1".into(),
            decision: Decision::Buy,
            value: true,
        }],
    );
    assert!(matches!(buy_owned, Err(WhatIfError::Conflict { constraint, .. }) if constraint == "inbound_o1"));

    let locked = apply_whatif(
        &problem,
        &[Fixing {
            player: "t1".into(),
            decision: Decision::LoanIn,
            value: true,
        }],
    );
    assert!(matches!(locked, Err(WhatIfError::Conflict { constraint, .. }) if constraint.contains("lock") && constraint.contains("xb_t1")));

    let unknown = apply_whatif(
        &problem,
        &[Fixing {
            player: "zz".into(),
            decision: Decision::Buy,
            value: true,
        }],
    );
    assert_eq!(unknown.unwrap_err(), WhatIfError::UnknownPlayer("zz".into()));
}

#[test]
fn fixing_every_variable_reproduces_that_point() {
    let (instance, scenarios) = ledger_toy();
    let problem = build_ftcp(&instance, &scenarios).unwrap();
    // Keep o1 and o2, sell nobody, loan out o3, loan in t2.
    let plan = [("o1", [true, false, false, false, false]), ("o2", [true, false, false, false, false]), ("o3", [true, false, false, false, true]), ("t1", [false; 5]), ("t2", [false, false, false, true, false]), ("t3", [false; 5])];
    let fixings: Vec<Fixing> = plan
        .iter()
        .flat_map(|(id, bits)| {
            Decision::ALL.into_iter().map(move |d| Fixing {
                player: id.to_string(),
                decision: d,
                value: bits[d.slot()],
            })
        })
        .collect();
    let fixed = apply_whatif(&problem, &fixings).unwrap();
    let sol = solve_ftcp(&fixed, &SolverParams::default()).unwrap().solution.unwrap();
    assert!((sol.objective_rating - (0.10 + 0.05 + 0.08)).abs() < 1e-12);
    assert_eq!(sol.net_spend, Money(100 - 20));
}

#[test]
fn price_above_budget_with_everything_locked_is_traced_to_the_budget() {
    let mut players: Vec<Player> = (0..3)
        .map(|k| {
            let mut p = person(&format!("o{k}"), true, 0.1, 1000);
            p.locks = BTreeSet::from([Lock::NoSell, Lock::NoLoanOut]);
            p
        })
        .collect();
    let mut target = person("t0", false, 0.2, 1000);
    target.purchase_price = Money(1200);
    target.locks.insert(Lock::NoLoanIn);
    players.push(target);
    let instance = Instance {
        club: "tight".into(),
        players,
        budget: Money(1000),
        squad_size: 4,
        formation: free_formation(),
        value_threshold: Money(3000),
        alpha: 0.5,
        growth_factor: 1.0,
        threshold_discount: 0.0,
    };
    let scenarios = ScenarioSet {
        values: vec![vec![1100.0, 1000.0]; 4],
        seed: 0,
    };
    let problem = build_ftcp(&instance, &scenarios).unwrap();
    let params = SolverParams::default();
    assert_eq!(solve_ftcp(&problem, &params).unwrap().result.status, SolveStatus::Infeasible);
    let culprits = diagnose_infeasibility(&problem, &params).unwrap();
    assert!(culprits.contains(&"budget".to_string()), "{culprits:?}");
    assert!(!culprits.contains(&"value_target".to_string()));

    let mut affordable = instance.clone();
    affordable.players[3].purchase_price = Money(1000);
    let problem = build_ftcp(&affordable, &scenarios).unwrap();
    assert!(diagnose_infeasibility(&problem, &params).unwrap().is_empty());
}

#[test]
fn lp_export_is_stable_and_reloads() {
    let (instance, scenarios) = ledger_toy();
    let problem = build_ftcp(&instance, &scenarios).unwrap();
    let text = write_lp(&problem.milp);
    assert_eq!(text, write_lp(&build_ftcp(&instance, &scenarios).unwrap().milp));
    let back = read_lp(&text).unwrap();
    let a = solve_milp(&problem.milp, &SolverParams::default()).unwrap();
    let b = solve_milp(&back, &SolverParams::default()).unwrap();
    assert!((a.incumbent_value.unwrap() - b.incumbent_value.unwrap()).abs() < 1e-12);
}

fn toy_case(seed: u64) -> (Instance, ScenarioSet) {
    let instance = toy_instance(seed, 9);
    let count = 1 + (seed % 6) as usize;
    let scenarios = sample_scenarios(&synthetic_value_model(3), &instance.players, count, seed).unwrap();
    (instance, scenarios)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn solver_matches_enumeration(seed in 0u64..10_000) {
        let (instance, scenarios) = toy_case(seed);
        let problem = build_ftcp(&instance, &scenarios).unwrap();
        let out = solve_ftcp(&problem, &SolverParams::default()).unwrap();
        match common::enumerate(&instance, &scenarios) {
            Some(best) => {
                let sol = out.solution.expect("oracle found a feasible squad");
                prop_assert!((sol.objective_rating - best.objective).abs() <= 1e-9);
            }
            None => prop_assert_eq!(out.result.status, SolveStatus::Infeasible),
        }
    }

    #[test]
    fn returned_solutions_meet_the_sampled_chance_constraint(seed in 0u64..10_000) {
        let (instance, scenarios) = toy_case(seed);
        let problem = build_ftcp(&instance, &scenarios).unwrap();
        if let Some(sol) = solve_ftcp(&problem, &SolverParams::default()).unwrap().solution {
            let kept: Vec<bool> = sol.decisions.iter().map(|d| d.keep).collect();
            let hits = (0..scenarios.num_scenarios())
                .filter(|&s| scenarios.team_value(s, &kept) >= instance.target_value() - 1e-6)
                .count();
            prop_assert!(hits >= required_hits(instance.alpha, scenarios.num_scenarios()));
            prop_assert!(sol.empirical_probability + 1e-12 >= instance.alpha);
            prop_assert!(sol.net_spend <= instance.budget);
            prop_assert_eq!(sol.squad().len(), instance.squad_size as usize);
        }
    }

    #[test]
    fn objective_never_rises_with_alpha_or_growth(seed in 0u64..10_000) {
        let (base, scenarios) = toy_case(seed);
        let solve = |alpha: f64, growth: f64| {
            let mut i = base.clone();
            i.alpha = alpha;
            i.growth_factor = growth;
            solve_ftcp(&build_ftcp(&i, &scenarios).unwrap(), &SolverParams::default())
                .unwrap()
                .solution
                .map_or(f64::NEG_INFINITY, |s| s.objective_rating)
        };
        let mut last = f64::INFINITY;
        for a in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let v = solve(a, 1.0);
            prop_assert!(v <= last + 1e-9);
            last = v;
        }
        let mut last = f64::INFINITY;
        for r in [1.0, 1.1, 1.2, 1.3] {
            let v = solve(0.5, r);
            prop_assert!(v <= last + 1e-9);
            last = v;
        }
    }

    #[test]
    fn loaned_and_owned_rosters_score_alike(seed in 0u64..10_000) {
        // Registering the same players scores the same whether they are
        // owned or loaned in.
        let (instance, scenarios) = toy_case(seed);
        let problem = build_ftcp(&instance, &scenarios).unwrap();
        if let Some(sol) = solve_ftcp(&problem, &SolverParams::default()).unwrap().solution {
            let from_squad: f64 = sol.squad().iter().map(|id| instance.player(id).unwrap().rating).sum();
            prop_assert!((from_squad - sol.objective_rating).abs() < 1e-9);
        }
    }
}
