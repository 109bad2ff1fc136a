//! Rating builds and held-out evaluation.

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use chrono::NaiveDate;
use clap::Args;
use ftcp_rating::evaluate::{pearson, summarize_matches};
use ftcp_rating::io::read_corpus;
use ftcp_rating::{evaluate_ratings, fit, Mode, RatingModel, RatingParams};
use serde::{Deserialize, Serialize};

use crate::output::{csv_with_header, ensure_dir, header, read_document, write_json, write_text};
use crate::rating_mode;

#[derive(Debug, Clone, Args, Serialize)]
pub struct RateArgs {
    /// Segment log CSV.
    #[arg(long)]
    pub matches: PathBuf,
    /// Player table CSV.
    #[arg(long)]
    pub players: PathBuf,
    /// `plain` or `novel`.
    #[arg(long, value_parser = rating_mode, default_value = "novel")]
    pub mode: Mode,
    /// Regularization weight; defaults to the model default.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Date the ratings refer to; defaults to the latest match.
    #[arg(long)]
    pub reference: Option<NaiveDate>,
    /// Generating coefficients (`id,beta`) to report recovery against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    /// Model written by `rate`.
    #[arg(long)]
    pub model: PathBuf,
    /// Held-out segment log CSV.
    #[arg(long)]
    pub matches: PathBuf,
    #[arg(long)]
    pub players: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct RatingRow<'a> {
    id: &'a str,
    rating: f64,
    individual: f64,
}

#[derive(Serialize)]
struct CoefficientRow {
    kind: &'static str,
    key: String,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TruthRow {
    pub id: String,
    pub beta: f64,
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Plain => "plain",
        Mode::Novel => "novel",
    }
}

fn coefficient_rows(model: &RatingModel) -> Vec<CoefficientRow> {
    let mut rows = Vec::new();
    for (c, v) in model.home_advantage() {
        rows.push(CoefficientRow {
            kind: "home",
            key: c,
            value: v,
        });
    }
    if let Some((home, away)) = model.red_cards() {
        for n in 0..home.len() {
            rows.push(CoefficientRow {
                kind: "home_red",
                key: (n + 1).to_string(),
                value: home[n],
            });
            rows.push(CoefficientRow {
                kind: "away_red",
                key: (n + 1).to_string(),
                value: away[n],
            });
        }
    }
    for (y, v) in model.age_curve() {
        rows.push(CoefficientRow {
            kind: "age",
            key: y.to_string(),
            value: v,
        });
    }
    for (b, v) in model.league_factors() {
        rows.push(CoefficientRow {
            kind: "league",
            key: b,
            value: v,
        });
    }
    rows
}

pub fn read_truth(path: &std::path::Path) -> anyhow::Result<HashMap<String, f64>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let rows: Vec<TruthRow> = r.deserialize().collect::<Result<_, _>>()?;
    Ok(rows.into_iter().map(|t| (t.id, t.beta)).collect())
}

pub fn rate(args: &RateArgs) -> anyhow::Result<ExitCode> {
    let corpus = read_corpus(&args.matches, &args.players)?;
    let mut params = RatingParams {
        reference: args.reference,
        ..RatingParams::default()
    };
    if let Some(l) = args.lambda {
        params.lambda = l;
    }
    let model = fit(&corpus, &params, args.mode)?;
    let mode = mode_name(args.mode);
    ensure_dir(&args.out)?;
    let comments = header("rate", args);
    let ratings = model.ratings();
    let rows: Vec<RatingRow> = ratings
        .iter()
        .map(|(id, r)| RatingRow {
            id,
            rating: *r,
            individual: model.individual(id).unwrap_or(0.0),
        })
        .collect();
    write_text(&args.out.join(format!("ratings_{mode}.csv")), &csv_with_header(&comments, &rows)?)?;
    let coefficients = coefficient_rows(&model);
    let mut text = csv_with_header(&comments, &coefficients)?;
    if coefficients.is_empty() {
        // Plain fits carry no covariates; keep the table shape anyway.
        text.push_str("kind,key,value\n");
    }
    write_text(&args.out.join(format!("coefficients_{mode}.csv")), &text)?;
    write_json(&args.out.join(format!("model_{mode}.json")), "rate", args, &model)?;

    let r = &model.report;
    println!(
        "{mode} model: {} players, {} rows, {} columns, {} CG iterations (residual {:.2e}{})",
        ratings.len(),
        r.rows,
        r.columns,
        r.cg.iterations,
        r.cg.relative_residual,
        if r.cg.converged { "" } else { ", not converged" }
    );
    if r.dropped_segments > 0 {
        println!("segments dropped: {}", r.dropped_segments);
    }
    if !r.ridged.is_empty() {
        println!("fallback ridge on: {}", r.ridged.join(" "));
    }
    for (c, v) in model.home_advantage() {
        println!("home advantage {c}: {v:.4} goals/90");
    }
    if let Some((home, away)) = model.red_cards() {
        println!("red cards, home short: {:.3} {:.3}; away short: {:.3} {:.3}", home[0], home[1], away[0], away[1]);
    }
    if let Some(peak) = model.peak_age() {
        println!("age curve peak: {peak}");
    }
    if let Some(path) = &args.truth {
        let truth = read_truth(path)?;
        let (t, f): (Vec<f64>, Vec<f64>) =
            truth.iter().filter_map(|(id, b)| model.individual(id).map(|x| (*b, x))).unzip();
        match pearson(&t, &f) {
            Some(r) => println!("recovery: pearson r {r:.4} over {} players", t.len()),
            None => println!("recovery: too few shared players for a correlation"),
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct EvaluationBody {
    evaluation: ftcp_rating::Evaluation,
}

pub fn evaluate(args: &EvaluateArgs) -> anyhow::Result<ExitCode> {
    let mut model: RatingModel = read_document(&args.model)?;
    model.after_load();
    let corpus = read_corpus(&args.matches, &args.players)?;
    let matches = summarize_matches(&corpus);
    let evaluation = evaluate_ratings(&model, &matches)?;
    ensure_dir(&args.out)?;
    println!(
        "{} held-out matches: quadratic loss {:.4} (baseline {:.4}), logit slope {:.4}, unrated slots {}",
        evaluation.matches, evaluation.loss, evaluation.baseline_loss, evaluation.logit.slope, evaluation.unrated_slots
    );
    write_json(&args.out.join("evaluation.json"), "evaluate", args, EvaluationBody { evaluation })?;
    Ok(ExitCode::SUCCESS)
}
