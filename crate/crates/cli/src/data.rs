//! Synthetic data, the flat-table importer and value-model fitting.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Subcommand};
use ftcp_core::bundle::{default_formation, load_instance, save_instance, InstanceBundle, Provenance, DEFAULT_ALPHA};
use ftcp_core::domain::{validate_instance, Lock, DEFAULT_SQUAD_SIZE};
use ftcp_core::synthetic::{loan_family, synthetic_club, synthetic_value_model, toy_instance};
use ftcp_core::value::{AgeGroup, HistoryRow};
use ftcp_core::{fit_value_model, Instance, Money, Player, Role};
use ftcp_rating::io::write_corpus;
use ftcp_rating::synthetic::{generate as generate_corpus, SyntheticConfig};
use serde::{Deserialize, Serialize};

use crate::output::{csv_with_header, ensure_dir, header, write_json, write_text};
use crate::rate::TruthRow;
use crate::solve::formation_by_name;

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    #[command(subcommand)]
    pub kind: GenerateKind,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerateKind {
    /// A full-size club bundle with its value model.
    Club {
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// A small bundle for exhaustive checks.
    Toy {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 9)]
        max_players: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// A member of the loan family: buy-only stars against cheap loan-only fillers.
    Loans {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Budget as a share of the owned squad value.
        #[arg(long, default_value_t = 0.2)]
        budget_share: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulated match segments with the coefficients they were drawn from.
    Corpus {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 40)]
        teams: usize,
        #[arg(long, default_value_t = 6)]
        seasons: usize,
        /// Output directory for matches.csv, players.csv and truth.csv.
        #[arg(long)]
        out: PathBuf,
    },
}

fn synthetic_bundle(instance: Instance, seed: u64, note: String) -> InstanceBundle {
    InstanceBundle {
        instance,
        value_model: Some(synthetic_value_model(seed)),
        ratings: None,
        provenance: Provenance {
            source_url: None,
            retrieved: None,
            notes: vec![note],
        },
    }
}

fn save(bundle: &InstanceBundle, path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    save_instance(bundle, path)?;
    println!("{}: {} players, squad of {}", path.display(), bundle.instance.players.len(), bundle.instance.squad_size);
    Ok(())
}

pub fn generate(args: &GenerateArgs) -> anyhow::Result<ExitCode> {
    match &args.kind {
        GenerateKind::Club { index, seed, out } => {
            let note = format!("synthetic club {index}, seed {seed}");
            save(&synthetic_bundle(synthetic_club(*index, *seed), *seed, note), out)?;
        }
        GenerateKind::Toy { seed, max_players, out } => {
            let note = format!("synthetic toy, seed {seed}, at most {max_players} players");
            save(&synthetic_bundle(toy_instance(*seed, *max_players), *seed, note), out)?;
        }
        GenerateKind::Loans { seed, budget_share, out } => {
            let note = format!("loan family, seed {seed}, budget share {budget_share}");
            save(&synthetic_bundle(loan_family(*seed, *budget_share), *seed, note), out)?;
        }
        GenerateKind::Corpus { seed, teams, seasons, out } => {
            if *teams < 2 || *seasons == 0 {
                bail!("a corpus needs at least 2 teams and 1 season");
            }
            let cfg = SyntheticConfig {
                seed: *seed,
                teams: *teams,
                seasons: *seasons,
                ..SyntheticConfig::default()
            };
            let (corpus, truth) = generate_corpus(&cfg);
            ensure_dir(out)?;
            write_corpus(&corpus, &out.join("matches.csv"), &out.join("players.csv"))?;
            let mut rows: Vec<TruthRow> = truth.player.iter().map(|(id, b)| TruthRow { id: id.clone(), beta: *b }).collect();
            rows.sort_by(|a, b| a.id.cmp(&b.id));
            let mut comments = header("generate", args);
            comments.push(format!("generator {}", serde_json::to_string(&cfg)?));
            write_text(&out.join("truth.csv"), &csv_with_header(&comments, &rows)?)?;
            println!(
                "{}: {} matches, {} segments, {} players",
                out.display(),
                corpus.match_ids().len(),
                corpus.segments.len(),
                corpus.players.len()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ImportArgs {
    /// Flat player table, one row per player; see the README for the columns.
    #[arg(long)]
    pub players: PathBuf,
    #[arg(long)]
    pub club: String,
    /// Transfer budget, thousands.
    #[arg(long)]
    pub budget: i64,
    #[arg(long, default_value_t = DEFAULT_SQUAD_SIZE)]
    pub squad_size: u32,
    /// Formation preset or `free`; defaults to 433 when it fits the squad.
    #[arg(long)]
    pub formation: Option<String>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Where the table came from, kept in the bundle.
    #[arg(long)]
    pub source_url: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Columns of the flat table. Money in thousands; lists separated by `;`.
#[derive(Debug, Deserialize)]
struct ImportRow {
    id: String,
    name: String,
    age: f64,
    roles: String,
    owned: bool,
    current_value: i64,
    #[serde(default)]
    purchase_price: Option<i64>,
    #[serde(default)]
    sale_price: Option<i64>,
    #[serde(default)]
    loan_in_fee: Option<i64>,
    #[serde(default)]
    loan_out_fee: Option<i64>,
    rating: f64,
    #[serde(default)]
    locks: String,
}

fn parse_list<T>(text: &str, parse: impl Fn(&str) -> anyhow::Result<T>) -> anyhow::Result<BTreeSet<T>>
where
    T: Ord,
{
    text.split(';').map(str::trim).filter(|s| !s.is_empty()).map(parse).collect()
}

fn parse_lock(s: &str) -> anyhow::Result<Lock> {
    Ok(serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| anyhow::anyhow!("unknown lock `{s}` (expected no_buy, no_sell, no_loan_in or no_loan_out)"))?)
}

fn import_row(row: ImportRow) -> anyhow::Result<Player> {
    let roles = parse_list(&row.roles, |s| s.parse::<Role>().map_err(|e| anyhow::anyhow!("{e}")))
        .with_context(|| format!("player `{}` roles", row.id))?;
    let locks = parse_list(&row.locks, parse_lock).with_context(|| format!("player `{}` locks", row.id))?;
    let m = |v: Option<i64>| Money(v.unwrap_or(0));
    Ok(Player {
        id: row.id,
        name: row.name,
        age: row.age,
        roles,
        owned: row.owned,
        current_value: Money(row.current_value),
        purchase_price: m(row.purchase_price),
        sale_price: m(row.sale_price),
        loan_in_fee: m(row.loan_in_fee),
        loan_out_fee: m(row.loan_out_fee),
        rating: row.rating,
        locks,
    })
}

pub fn import(args: &ImportArgs) -> anyhow::Result<ExitCode> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(&args.players)
        .with_context(|| format!("reading {}", args.players.display()))?;
    let mut players = Vec::new();
    for (k, row) in reader.deserialize::<ImportRow>().enumerate() {
        let row = row.with_context(|| format!("{}: data row {}", args.players.display(), k + 1))?;
        players.push(import_row(row)?);
    }
    let formation = match &args.formation {
        Some(f) => formation_by_name(f)?,
        None => default_formation(args.squad_size),
    };
    let instance = Instance {
        club: args.club.clone(),
        value_threshold: Instance::owned_value(&players),
        players,
        budget: Money(args.budget),
        squad_size: args.squad_size,
        formation,
        alpha: args.alpha,
        growth_factor: 1.0,
        threshold_discount: 0.0,
    };
    let violations = validate_instance(&instance);
    if !violations.is_empty() {
        bail!("invalid instance: {}", violations.join("; "));
    }
    let bundle = InstanceBundle {
        instance,
        value_model: None,
        ratings: None,
        provenance: Provenance {
            source_url: args.source_url.clone(),
            retrieved: None,
            notes: vec![format!("imported from {}", args.players.display())],
        },
    };
    save(&bundle, &args.out)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitValuesArgs {
    /// History table with columns age, roles, value_now, value_next.
    #[arg(long)]
    pub history: PathBuf,
    /// Value model JSON to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Bundle to store the fitted model in, rewritten in place.
    #[arg(long)]
    pub attach: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct HistoryCsvRow {
    age: f64,
    roles: String,
    value_now: f64,
    value_next: f64,
}

pub fn read_history(path: &Path) -> anyhow::Result<Vec<HistoryRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for (k, row) in reader.deserialize::<HistoryCsvRow>().enumerate() {
        let row = row.with_context(|| format!("{}: data row {}", path.display(), k + 1))?;
        let roles = parse_list(&row.roles, |s| s.parse::<Role>().map_err(|e| anyhow::anyhow!("{e}")))
            .with_context(|| format!("{}: data row {}", path.display(), k + 1))?;
        rows.push(HistoryRow {
            age: row.age,
            roles,
            value_now: row.value_now,
            value_next: row.value_next,
        });
    }
    Ok(rows)
}

pub fn fit_values(args: &FitValuesArgs) -> anyhow::Result<ExitCode> {
    let history = read_history(&args.history)?;
    let model = fit_value_model(&history)?;
    println!("age group  rows  R^2       dropped roles");
    for (g, m) in AgeGroup::all().zip(&model.groups) {
        let rows = history.iter().filter(|h| AgeGroup::of(h.age) == g).count();
        let dropped: Vec<String> = m.dropped_roles.iter().map(ToString::to_string).collect();
        println!("{:<9}  {rows:<4}  {:<8.6}  {}", g.to_string(), m.r_squared, dropped.join(" "));
    }
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_json(&args.out, "fit-values", args, &model)?;
    if let Some(path) = &args.attach {
        let mut bundle = load_instance(path)?;
        bundle.value_model = Some(model);
        save_instance(&bundle, path)?;
        println!("value model stored in {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}
