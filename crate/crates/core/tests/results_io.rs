use std::collections::{BTreeMap, BTreeSet};

use ftcp_core::domain::Formation;
use ftcp_core::results::{export_results, parse_results, results_to_string, CellMeta, ResultRow, RESULT_COLUMNS};
use ftcp_core::synthetic::{synthetic_value_model, toy_instance};
use ftcp_core::value::ScenarioSet;
use ftcp_core::{build_ftcp, sample_scenarios, solve_ftcp, Decision, Instance, Money, Player, PlayerDecision, Role, TransferSolution};
use ftcp_milp::{SolveResult, SolveStatus, SolverParams};

fn header() -> String {
    RESULT_COLUMNS.join(",")
}

#[test]
fn empty_run_is_header_only() {
    let text = results_to_string(&["seed 7".into(), "alpha 0.8\ngrowth 1.0".into()], &[]).unwrap();
    assert_eq!(text, format!("# seed 7\n# alpha 0.8\n# growth 1.0\n{}\n", header()));
    assert!(parse_results(&text).unwrap().is_empty());
}

#[test]
fn solved_row_matches_recomputation() {
    let model = synthetic_value_model(2);
    let instance = (0..)
        .map(|s| toy_instance(s, 8))
        .find(|i| i.players.iter().filter(|p| !p.owned).count() >= 2)
        .unwrap();
    let scenarios = sample_scenarios(&model, &instance.players, 12, 4).unwrap();
    let problem = build_ftcp(&instance, &scenarios).unwrap();
    let out = solve_ftcp(&problem, &SolverParams::default()).unwrap();
    let meta = CellMeta { seed: 4, scenarios: 12 };
    let row = ResultRow::solved(&instance, &meta, &scenarios, &out.result, out.solution.as_ref(), Some(0.9));
    assert_eq!((row.seed, row.scenarios), (4, 12));
    assert_eq!(row.club, instance.club);
    let Some(sol) = out.solution else {
        assert_eq!(row.status, "infeasible");
        assert!(row.objective.is_none() && row.net_spend.is_none());
        return;
    };
    assert_eq!(row.status, "optimal");
    let mut spend = Money::ZERO;
    let mut kept = Vec::new();
    for p in &instance.players {
        let d = sol.decision(&p.id).unwrap();
        spend += if d.buy { p.purchase_price } else { Money::ZERO };
        spend += if d.loan_in { p.loan_in_fee } else { Money::ZERO };
        spend -= if d.sell { p.sale_price } else { Money::ZERO };
        spend -= if d.loan_out { p.loan_out_fee } else { Money::ZERO };
        kept.push(d.keep);
    }
    assert_eq!(row.net_spend, Some(spend));
    let rated: f64 = instance.players.iter().filter(|p| sol.decision(&p.id).unwrap().in_squad()).map(|p| p.rating).sum();
    assert!((row.objective.unwrap() - rated).abs() < 1e-9);
    let mean = (0..12)
        .map(|s| instance.players.iter().zip(&kept).filter(|(_, &k)| k).map(|(p, _)| scenarios.values[instance.player_index(&p.id).unwrap()][s]).sum::<f64>())
        .sum::<f64>()
        / 12.0;
    assert!((row.expected_value.unwrap() - mean).abs() < 1e-6);
    assert_eq!(row.n_buys, sol.with(Decision::Buy).len());
    assert_eq!(row.buys, sol.with(Decision::Buy).join(";"));
    assert_eq!(row.oos_probability, Some(0.9));
    assert_eq!(row.gap, out.result.gap());
}

fn person(id: &str, age: f64, owned: bool) -> Player {
    Player {
        id: id.into(),
        name: id.into(),
        age,
        roles: BTreeSet::from([Role::CM]),
        owned,
        current_value: Money(10_000),
        purchase_price: Money(20_000),
        sale_price: Money(9_000),
        loan_in_fee: Money(2_000),
        loan_out_fee: Money(1_000),
        rating: 0.05,
        locks: BTreeSet::new(),
    }
}

/// A window with three signings and two departures, figures worked by hand.
fn ledger_window() -> (Instance, TransferSolution, ScenarioSet, SolveResult) {
    let players = vec![
        person("veteran", 33.0, true),
        person("winger", 29.5, true),
        person("stays", 26.0, true),
        person("loaned", 24.0, true),
        person("starlet", 19.0, false),
        person("forward", 23.0, false),
        person("keeper", 27.5, false),
        person("borrowed", 30.0, false),
    ];
    let state = |id: &str, keep, buy, sell, loan_in, loan_out| PlayerDecision {
        player: id.into(),
        keep,
        buy,
        sell,
        loan_in,
        loan_out,
    };
    let decisions = vec![
        state("veteran", false, false, true, false, false),
        state("winger", false, false, true, false, false),
        state("stays", true, false, false, false, false),
        state("loaned", true, false, false, false, true),
        state("starlet", true, true, false, false, false),
        state("forward", true, true, false, false, false),
        state("keeper", true, true, false, false, false),
        state("borrowed", false, false, false, true, false),
    ];
    let instance = Instance {
        club: "Ledger".into(),
        players,
        budget: Money(60_000),
        squad_size: 5,
        formation: Formation {
            name: "free".into(),
            min_per_role: BTreeMap::new(),
            max_per_role: BTreeMap::new(),
        },
        value_threshold: Money(40_000),
        alpha: 0.5,
        growth_factor: 1.0,
        threshold_discount: 0.0,
    };
    // 3 buys at 20000 + 1 loan-in at 2000 - 2 sales at 9000 - 1 loan-out at 1000.
    let solution = TransferSolution {
        decisions,
        objective_rating: 0.25,
        net_spend: Money(43_000),
        scenario_hits: vec![true, false],
        empirical_probability: 0.5,
    };
    let values = vec![vec![1.0, 2.0]; 8];
    let scenarios = ScenarioSet { values, seed: 0 };
    let result = SolveResult {
        status: SolveStatus::OptimalWithinGap,
        incumbent: None,
        incumbent_value: Some(0.25),
        best_bound: 0.25,
        nodes: 3,
        branchings: 1,
        lp_iterations: 10,
        wall_time_secs: 0.01,
        log: Vec::new(),
    };
    (instance, solution, scenarios, result)
}

#[test]
fn hand_ledger_ages_and_counts() {
    let (instance, solution, scenarios, result) = ledger_window();
    let row = ResultRow::solved(&instance, &CellMeta { seed: 1, scenarios: 2 }, &scenarios, &result, Some(&solution), None);
    assert_eq!((row.n_buys, row.n_sells, row.n_loans_in, row.n_loans_out), (3, 2, 1, 1));
    assert_eq!(row.buys, "starlet;forward;keeper");
    assert_eq!(row.sells, "veteran;winger");
    // (19 + 23 + 27.5) / 3 and (33 + 29.5) / 2.
    assert!((row.avg_buy_age.unwrap() - 23.166_666_666_666_668).abs() < 1e-12);
    assert_eq!(row.avg_sell_age, Some(31.25));
    assert_eq!(row.net_spend, Some(Money(43_000)));
    // Five owned at the end, including the loaned-out player: 5 and 10.
    assert_eq!(row.expected_value, Some(7.5));
    assert_eq!(row.gap, Some(0.0));
}

#[test]
fn empty_lists_leave_ages_blank() {
    let (instance, mut solution, scenarios, result) = ledger_window();
    for d in &mut solution.decisions {
        d.buy = false;
        d.sell = false;
    }
    let row = ResultRow::solved(&instance, &CellMeta { seed: 1, scenarios: 2 }, &scenarios, &result, Some(&solution), None);
    assert_eq!((row.avg_buy_age, row.avg_sell_age), (None, None));
    let text = results_to_string(&[], &[row]).unwrap();
    let line = text.lines().nth(1).unwrap();
    let fields: Vec<&str> = line.split(',').collect();
    assert_eq!(fields.len(), RESULT_COLUMNS.len());
    assert_eq!(fields[19], "");
}

#[test]
fn rows_survive_a_round_trip() {
    let (instance, solution, scenarios, result) = ledger_window();
    let meta = CellMeta { seed: 11, scenarios: 2 };
    let rows = vec![
        ResultRow::solved(&instance, &meta, &scenarios, &result, Some(&solution), Some(0.812)),
        ResultRow::failed(&instance, &meta, "value model, \"missing\" group"),
        ResultRow::solved(
            &instance,
            &meta,
            &scenarios,
            &SolveResult {
                status: SolveStatus::Infeasible,
                incumbent_value: None,
                ..result.clone()
            },
            None,
            None,
        ),
    ];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    export_results(&path, &["club Ledger".into()], &rows).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# club Ledger\n"));
    assert_eq!(parse_results(&text).unwrap(), rows);
    assert_eq!(rows[1].status, "error");
    assert_eq!(rows[2].status, "infeasible");
}
