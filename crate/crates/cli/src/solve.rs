//! Solve, sweep, stability and LP export commands.

use std::fmt::Write as _;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context};
use ftcp_core::bundle::{load_instance, InstanceBundle};
use ftcp_core::domain::validate_instance;
use ftcp_core::results::{results_to_string, status_label, CellMeta, ResultRow};
use ftcp_core::stability::{mean_stdev, repetition_seed, stability_with_oos};
use ftcp_core::value::ScenarioSet;
use ftcp_core::{build_ftcp, sample_scenarios, solve_ftcp, Decision, Formation, Instance, TransferSolution, ValueModel};
use ftcp_milp::lp_format::write_lp;
use ftcp_milp::SolveResult;
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{csv_with_header, ensure_dir, header, read_document, write_json, write_text};
use crate::{status_code, ExportLpArgs, InstanceArgs, Overrides, SolveArgs, StabilityArgs, SweepArgs};

/// Seed of the out-of-sample draw for a solve sampled with `seed`.
pub fn oos_seed(seed: u64) -> u64 {
    repetition_seed(seed, 0)
}

pub fn formation_by_name(name: &str) -> anyhow::Result<Formation> {
    Formation::by_name(name).with_context(|| {
        let known: Vec<&str> = Formation::preset_names().collect();
        format!("unknown formation `{name}` (known: {}, free)", known.join(", "))
    })
}

pub fn load_setup(input: &InstanceArgs) -> anyhow::Result<(InstanceBundle, ValueModel)> {
    let bundle = load_instance(&input.instance)?;
    let model = match &input.value_model {
        Some(path) => {
            let model: ValueModel = read_document(path)?;
            model.check()?;
            model
        }
        None => bundle
            .value_model
            .clone()
            .context("the bundle has no value model; pass --value-model or attach one with fit-values")?,
    };
    Ok((bundle, model))
}

fn with_settings(base: &Instance, alpha: Option<f64>, growth: Option<f64>, formation: Option<&str>) -> anyhow::Result<Instance> {
    let mut instance = base.clone();
    if let Some(a) = alpha {
        instance.alpha = a;
    }
    if let Some(r) = growth {
        instance.growth_factor = r;
    }
    if let Some(f) = formation {
        instance.formation = formation_by_name(f)?;
    }
    let violations = validate_instance(&instance);
    if !violations.is_empty() {
        bail!("invalid instance: {}", violations.join("; "));
    }
    Ok(instance)
}

fn apply(base: &Instance, o: &Overrides) -> anyhow::Result<Instance> {
    with_settings(base, o.alpha, o.growth, o.formation.as_deref())
}

fn sample(model: &ValueModel, instance: &Instance, input: &InstanceArgs) -> anyhow::Result<ScenarioSet> {
    Ok(sample_scenarios(model, &instance.players, input.scenarios, input.seed)?)
}

#[derive(Serialize)]
struct SolveBody<'a> {
    club: &'a str,
    status: &'static str,
    objective: Option<f64>,
    best_bound: f64,
    gap: Option<f64>,
    nodes: u64,
    solve_secs: f64,
    required_hits: usize,
    oos_seed: u64,
    oos_probability: Option<f64>,
    solution: Option<&'a TransferSolution>,
}

fn summary(instance: &Instance, result: &SolveResult, sol: Option<&TransferSolution>, oos: Option<f64>) -> String {
    let mut s = String::new();
    let _ = write!(s, "{}: {}", instance.club, status_label(result.status));
    if let Some(v) = result.incumbent_value {
        let _ = write!(s, ", objective {v:.6}, bound {:.6}", result.best_bound);
    }
    let _ = writeln!(s, ", {} nodes, {:.2}s", result.nodes, result.wall_time_secs);
    if let Some(sol) = sol {
        let squad = sol.squad();
        let _ = writeln!(s, "squad ({}): {}", squad.len(), squad.join(" "));
        for d in [Decision::Buy, Decision::Sell, Decision::LoanIn, Decision::LoanOut] {
            let ids = sol.with(d);
            if !ids.is_empty() {
                let _ = writeln!(s, "{}: {}", d.as_str(), ids.join(" "));
            }
        }
        let _ = writeln!(s, "net spend {} of budget {}", sol.net_spend, instance.budget);
        let _ = write!(s, "empirical probability {:.4}", sol.empirical_probability);
        if let Some(p) = oos {
            let _ = write!(s, ", out of sample {p:.4}");
        }
        s.push('\n');
    }
    s
}

pub fn solve(args: &SolveArgs) -> anyhow::Result<ExitCode> {
    let (bundle, model) = load_setup(&args.input)?;
    let instance = apply(&bundle.instance, &args.overrides)?;
    let scenarios = sample(&model, &instance, &args.input)?;
    let problem = build_ftcp(&instance, &scenarios)?;
    let out = solve_ftcp(&problem, &args.solver.params())?;
    let oos = match &out.solution {
        Some(sol) if args.oos > 0 => Some(ftcp_core::stability::out_of_sample_probability(
            sol,
            &model,
            &instance,
            args.oos,
            oos_seed(args.input.seed),
        )?),
        _ => None,
    };

    ensure_dir(&args.out)?;
    let body = SolveBody {
        club: &instance.club,
        status: status_label(out.result.status),
        objective: out.result.incumbent_value,
        best_bound: out.result.best_bound,
        gap: out.result.gap(),
        nodes: out.result.nodes,
        solve_secs: out.result.wall_time_secs,
        required_hits: problem.min_hits,
        oos_seed: oos_seed(args.input.seed),
        oos_probability: oos,
        solution: out.solution.as_ref(),
    };
    write_json(&args.out.join("solution.json"), "solve", args, body)?;
    let meta = CellMeta {
        seed: args.input.seed,
        scenarios: args.input.scenarios,
    };
    let row = ResultRow::solved(&instance, &meta, &scenarios, &out.result, out.solution.as_ref(), oos);
    write_text(&args.out.join("results.csv"), &results_to_string(&header("solve", args), &[row])?)?;
    let log: String = out.result.log.iter().map(|e| e.to_line() + "\n").collect();
    write_text(&args.out.join("solve.log"), &log)?;
    print!("{}", summary(&instance, &out.result, out.solution.as_ref(), oos));
    Ok(status_code(out.result.status))
}

struct Cell {
    alpha: Option<f64>,
    growth: Option<f64>,
    formation: Option<String>,
}

fn solve_cell(
    base: &Instance,
    model: &ValueModel,
    scenarios: &ScenarioSet,
    cell: &Cell,
    args: &SweepArgs,
) -> ResultRow {
    let meta = CellMeta {
        seed: args.input.seed,
        scenarios: args.input.scenarios,
    };
    let instance = match with_settings(base, cell.alpha, cell.growth, cell.formation.as_deref()) {
        Ok(i) => i,
        Err(e) => {
            let mut shown = base.clone();
            shown.alpha = cell.alpha.unwrap_or(base.alpha);
            shown.growth_factor = cell.growth.unwrap_or(base.growth_factor);
            if let Some(f) = &cell.formation {
                shown.formation.name = f.clone();
            }
            return ResultRow::failed(&shown, &meta, format!("{e:#}"));
        }
    };
    let run = || -> anyhow::Result<ResultRow> {
        let problem = build_ftcp(&instance, scenarios)?;
        let out = solve_ftcp(&problem, &args.solver.params())?;
        let oos = match &out.solution {
            Some(sol) if args.oos > 0 => Some(ftcp_core::stability::out_of_sample_probability(
                sol,
                model,
                &instance,
                args.oos,
                oos_seed(args.input.seed),
            )?),
            _ => None,
        };
        Ok(ResultRow::solved(&instance, &meta, scenarios, &out.result, out.solution.as_ref(), oos))
    };
    run().unwrap_or_else(|e| ResultRow::failed(&instance, &meta, format!("{e:#}")))
}

fn or_default<T: Clone>(list: &[T]) -> Vec<Option<T>> {
    if list.is_empty() {
        vec![None]
    } else {
        list.iter().cloned().map(Some).collect()
    }
}

pub fn sweep(args: &SweepArgs) -> anyhow::Result<ExitCode> {
    let (bundle, model) = load_setup(&args.input)?;
    let base = bundle.instance;
    // One sample for every cell, so cells differ only by their setting.
    let scenarios = sample(&model, &base, &args.input)?;
    let mut cells = Vec::new();
    for alpha in or_default(&args.alpha) {
        for growth in or_default(&args.growth) {
            for formation in or_default(&args.formation) {
                cells.push(Cell {
                    alpha,
                    growth,
                    formation: formation.clone(),
                });
            }
        }
    }
    let cell_dir = args.out.join("cells");
    ensure_dir(&cell_dir)?;
    let comments = header("sweep", args);
    let rows: Vec<ResultRow> = cells
        .par_iter()
        .enumerate()
        .map(|(k, cell)| -> anyhow::Result<ResultRow> {
            let row = solve_cell(&base, &model, &scenarios, cell, args);
            write_text(&cell_dir.join(format!("cell_{k:04}.csv")), &results_to_string(&comments, std::slice::from_ref(&row))?)?;
            Ok(row)
        })
        .collect::<anyhow::Result<_>>()?;
    write_text(&args.out.join("sweep.csv"), &results_to_string(&comments, &rows)?)?;
    println!("alpha   growth  formation  status      objective");
    for r in &rows {
        let obj = r.objective.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
        println!("{:<7} {:<7} {:<10} {:<11} {obj}", r.alpha, r.growth, r.formation, r.status);
    }
    let failed = rows.iter().filter(|r| r.status == "error").count();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed; see the error column", rows.len());
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct RepetitionRow {
    repetition: usize,
    seed: u64,
    status: String,
    objective: Option<f64>,
    solve_secs: f64,
    oos_probability: Option<f64>,
}

#[derive(Serialize)]
struct StabilitySummary {
    club: String,
    players: usize,
    alpha: f64,
    scenarios: usize,
    repetitions: usize,
    failures: usize,
    mean: f64,
    stdev: f64,
    cv: f64,
    oos_draws: usize,
    oos_min: Option<f64>,
    oos_mean: Option<f64>,
    oos_max: Option<f64>,
}

pub fn stability(args: &StabilityArgs) -> anyhow::Result<ExitCode> {
    let (bundle, model) = load_setup(&args.input)?;
    let instance = apply(&bundle.instance, &args.overrides)?;
    let seeds: Vec<u64> = (0..args.repetitions).map(|r| repetition_seed(args.input.seed, r)).collect();
    let (report, oos) = stability_with_oos(&instance, &model, args.input.scenarios, &seeds, args.oos, &args.solver.params())?;
    let rows: Vec<RepetitionRow> = report
        .repetitions
        .iter()
        .zip(&oos)
        .enumerate()
        .map(|(k, (r, p))| RepetitionRow {
            repetition: k,
            seed: r.seed,
            status: r.status.map_or("error", status_label).to_string(),
            objective: r.objective,
            solve_secs: r.solve_secs,
            oos_probability: *p,
        })
        .collect();
    let scored: Vec<f64> = oos.iter().flatten().copied().collect();
    let (oos_mean, _) = mean_stdev(&scored);
    let summary = StabilitySummary {
        club: instance.club.clone(),
        players: instance.players.len(),
        alpha: instance.alpha,
        scenarios: args.input.scenarios,
        repetitions: args.repetitions,
        failures: report.failures,
        mean: report.mean,
        stdev: report.stdev,
        cv: report.coefficient_of_variation(),
        oos_draws: args.oos,
        oos_min: scored.iter().copied().reduce(f64::min),
        oos_mean: (!scored.is_empty()).then_some(oos_mean),
        oos_max: scored.iter().copied().reduce(f64::max),
    };
    ensure_dir(&args.out)?;
    let comments = header("stability", args);
    write_text(&args.out.join("stability.csv"), &csv_with_header(&comments, &rows)?)?;
    write_text(&args.out.join("stability_summary.csv"), &csv_with_header(&comments, &[&summary])?)?;
    println!("rep  seed                  status      objective");
    for r in &rows {
        let obj = r.objective.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
        println!("{:<4} {:<21} {:<11} {obj}", r.repetition, r.seed, r.status);
    }
    println!(
        "mean {:.6}, stdev {:.6}, stdev/mean {:.4}%, failures {}",
        summary.mean,
        summary.stdev,
        100.0 * summary.cv,
        summary.failures
    );
    if let (Some(lo), Some(mean), Some(hi)) = (summary.oos_min, summary.oos_mean, summary.oos_max) {
        println!("out-of-sample probability over {} draws: min {lo:.4}, mean {mean:.4}, max {hi:.4}", args.oos);
    }
    Ok(ExitCode::SUCCESS)
}

pub fn export_lp(args: &ExportLpArgs) -> anyhow::Result<ExitCode> {
    let (bundle, model) = load_setup(&args.input)?;
    let instance = apply(&bundle.instance, &args.overrides)?;
    let scenarios = sample(&model, &instance, &args.input)?;
    let problem = build_ftcp(&instance, &scenarios)?;
    let mut text: String = header("export-lp", args).iter().map(|c| format!("\\ {c}\n")).collect();
    text.push_str(&write_lp(&problem.milp));
    write_lp_file(&args.out, &text)?;
    println!(
        "{}: {} variables, {} rows",
        args.out.display(),
        problem.milp.num_variables(),
        problem.milp.num_constraints()
    );
    Ok(ExitCode::SUCCESS)
}

fn write_lp_file(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_text(path, text)
}
