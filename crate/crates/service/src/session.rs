//! Negotiation sessions: a working instance, pinned scenarios, fixings, an
//! append-only solve history and an audit log. Nothing here knows about HTTP.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use ftcp_core::bundle::InstanceBundle;
use ftcp_core::domain::validate_instance;
use ftcp_core::ftcp::{diagnose_infeasibility, FtcpProblem};
use ftcp_core::stability::{out_of_sample_probability, repetition_seed};
use ftcp_core::{apply_whatif, build_ftcp, sample_scenarios, solve_ftcp, Fixing, Formation, Instance, Lock, Money, PlayerDecision, ScenarioSet, TransferSolution, ValueModel};
use ftcp_milp::{Emphasis, SolveStatus, SolverParams};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

pub const DEFAULT_SCENARIOS: usize = 70;
pub const DEFAULT_SEED: u64 = 1;

/// Negotiated changes to one player; absent fields stay as they are.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerUpdate {
    pub purchase_price: Option<Money>,
    pub sale_price: Option<Money>,
    pub loan_in_fee: Option<Money>,
    pub loan_out_fee: Option<Money>,
    /// Replaces the whole lock set.
    pub locks: Option<BTreeSet<Lock>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmphasisChoice {
    #[default]
    Prove,
    Feasible,
}

/// Settings of one solve; absent fields fall back to the session's instance
/// or to the defaults below.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRequest {
    pub alpha: Option<f64>,
    pub growth: Option<f64>,
    pub formation: Option<String>,
    pub gap: Option<f64>,
    pub time_limit_secs: Option<f64>,
    pub emphasis: Option<EmphasisChoice>,
    /// Fresh draws for the out-of-sample probability; 0 skips it.
    pub oos: Option<usize>,
}

/// A request with every default filled in, as recorded in the history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub alpha: f64,
    pub growth: f64,
    pub formation: String,
    pub gap: f64,
    pub time_limit_secs: f64,
    pub emphasis: EmphasisChoice,
    pub oos: usize,
}

pub const DEFAULT_TIME_LIMIT_SECS: f64 = 60.0;
pub const DEFAULT_OOS: usize = 1000;

impl SolveConfig {
    pub fn params(&self) -> SolverParams {
        SolverParams {
            relative_gap: self.gap,
            time_limit_secs: self.time_limit_secs,
            emphasis: match self.emphasis {
                EmphasisChoice::Prove => Emphasis::ProveOptimality,
                EmphasisChoice::Feasible => Emphasis::FindFeasible,
            },
            ..SolverParams::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditEntry {
    pub seq: u64,
    pub unix_ms: u128,
    pub revision: u64,
    pub action: String,
    pub detail: serde_json::Value,
}

/// One finished solve. Entries are never changed once appended.
#[derive(Debug, Clone, Serialize)]
pub struct HistoryEntry {
    pub solve: u64,
    pub revision: u64,
    pub seed: u64,
    pub scenarios: usize,
    pub fixings: Vec<Fixing>,
    pub config: SolveConfig,
    /// `optimal`, `time_limit`, `infeasible`, `unbounded` or `error`.
    pub state: &'static str,
    pub objective: Option<f64>,
    pub best_bound: Option<f64>,
    pub gap: Option<f64>,
    pub nodes: u64,
    pub solve_secs: f64,
    pub required_hits: usize,
    pub empirical_probability: Option<f64>,
    pub oos_seed: u64,
    pub oos_probability: Option<f64>,
    pub solution: Option<TransferSolution>,
    /// Constraint families that jointly rule out every squad.
    pub conflict_groups: Vec<String>,
    pub log: Vec<String>,
    pub error: Option<String>,
}

fn state_label(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::OptimalWithinGap => "optimal",
        SolveStatus::FeasibleTimeLimit => "time_limit",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::Unbounded => "unbounded",
    }
}

/// Everything a solve needs, copied out of the session so the solver never
/// touches shared state.
pub struct SolveJob {
    pub solve: u64,
    pub revision: u64,
    pub seed: u64,
    pub instance: Instance,
    pub model: Arc<ValueModel>,
    pub scenarios: Arc<ScenarioSet>,
    pub problem: FtcpProblem,
    pub fixings: Vec<Fixing>,
    pub config: SolveConfig,
}

impl SolveJob {
    fn base_entry(&self) -> HistoryEntry {
        HistoryEntry {
            solve: self.solve,
            revision: self.revision,
            seed: self.seed,
            scenarios: self.scenarios.num_scenarios(),
            fixings: self.fixings.clone(),
            config: self.config.clone(),
            state: "error",
            objective: None,
            best_bound: None,
            gap: None,
            nodes: 0,
            solve_secs: 0.0,
            required_hits: self.problem.min_hits,
            empirical_probability: None,
            oos_seed: repetition_seed(self.seed, 0),
            oos_probability: None,
            solution: None,
            conflict_groups: Vec::new(),
            log: Vec::new(),
            error: None,
        }
    }

    /// The entry recorded when the solver aborts.
    pub fn failure_entry(&self) -> HistoryEntry {
        HistoryEntry {
            error: Some("the solver aborted".into()),
            ..self.base_entry()
        }
    }

    pub fn run(self) -> HistoryEntry {
        let mut entry = self.base_entry();
        let oos_seed = entry.oos_seed;
        let params = self.config.params();
        let out = match solve_ftcp(&self.problem, &params) {
            Ok(out) => out,
            Err(e) => {
                entry.error = Some(e.to_string());
                return entry;
            }
        };
        let r = &out.result;
        entry.state = state_label(r.status);
        entry.objective = r.incumbent_value;
        entry.best_bound = r.best_bound.is_finite().then_some(r.best_bound);
        entry.gap = r.gap();
        entry.nodes = r.nodes;
        entry.solve_secs = r.wall_time_secs;
        entry.log = r.log.iter().map(|l| l.to_line()).collect();
        if r.status == SolveStatus::Infeasible {
            match diagnose_infeasibility(&self.problem, &params) {
                Ok(groups) => entry.conflict_groups = groups,
                Err(e) => entry.error = Some(format!("diagnosis failed: {e}")),
            }
        }
        if let Some(sol) = &out.solution {
            entry.empirical_probability = Some(sol.empirical_probability);
            if self.config.oos > 0 {
                match out_of_sample_probability(sol, &self.model, &self.instance, self.config.oos, oos_seed) {
                    Ok(p) => entry.oos_probability = Some(p),
                    Err(e) => entry.error = Some(format!("out-of-sample scoring failed: {e}")),
                }
            }
        }
        entry.solution = out.solution;
        entry
    }
}

/// Decisions of one player in two history entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionChange {
    pub player: String,
    pub a: Option<PlayerDecision>,
    pub b: Option<PlayerDecision>,
}

/// Players whose decisions differ between two solutions.
pub fn diff_solutions(a: &TransferSolution, b: &TransferSolution) -> Vec<DecisionChange> {
    let ids: BTreeSet<&str> = a.decisions.iter().chain(&b.decisions).map(|d| d.player.as_str()).collect();
    ids.into_iter()
        .filter_map(|id| {
            let (x, y) = (a.decision(id), b.decision(id));
            (x != y).then(|| DecisionChange {
                player: id.to_string(),
                a: x.cloned(),
                b: y.cloned(),
            })
        })
        .collect()
}

pub struct Session {
    pub id: String,
    pub bundle: InstanceBundle,
    pub model: Arc<ValueModel>,
    pub revision: u64,
    pub seed: u64,
    pub scenarios: Arc<ScenarioSet>,
    pub fixings: Vec<Fixing>,
    pub history: Vec<HistoryEntry>,
    pub audit: Vec<AuditEntry>,
    pub active: Option<(u64, SolveConfig)>,
    next_solve: u64,
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

impl Session {
    pub fn new(id: String, bundle: InstanceBundle, seed: u64, count: usize) -> Result<Session, ApiError> {
        let model = bundle
            .value_model
            .clone()
            .ok_or_else(|| ApiError::Invalid("the bundle has no value model".into()))?;
        if count == 0 {
            return Err(ApiError::Invalid("at least one scenario is needed".into()));
        }
        let scenarios = sample_scenarios(&model, &bundle.instance.players, count, seed).map_err(|e| ApiError::Invalid(e.to_string()))?;
        let mut s = Session {
            id,
            bundle,
            model: Arc::new(model),
            revision: 0,
            seed,
            scenarios: Arc::new(scenarios),
            fixings: Vec::new(),
            history: Vec::new(),
            audit: Vec::new(),
            active: None,
            next_solve: 1,
        };
        s.log("create", serde_json::json!({ "club": s.bundle.instance.club, "seed": seed, "scenarios": count }));
        Ok(s)
    }

    pub fn instance(&self) -> &Instance {
        &self.bundle.instance
    }

    fn log(&mut self, action: &str, detail: serde_json::Value) {
        let seq = self.audit.len() as u64 + 1;
        self.audit.push(AuditEntry {
            seq,
            unix_ms: now_ms(),
            revision: self.revision,
            action: action.to_string(),
            detail,
        });
    }

    fn program(&self, instance: &Instance, fixings: &[Fixing]) -> Result<FtcpProblem, ApiError> {
        let problem = build_ftcp(instance, &self.scenarios).map_err(|e| ApiError::Invalid(e.to_string()))?;
        Ok(apply_whatif(&problem, fixings)?)
    }

    /// Applies a negotiated change; rejected whole if the instance turns invalid
    /// or a standing fixing stops fitting.
    pub fn update_player(&mut self, player: &str, update: &PlayerUpdate) -> Result<(), ApiError> {
        let mut instance = self.bundle.instance.clone();
        let p = instance
            .players
            .iter_mut()
            .find(|p| p.id == player)
            .ok_or_else(|| ApiError::UnknownPlayer(player.to_string()))?;
        if let Some(v) = update.purchase_price {
            p.purchase_price = v;
        }
        if let Some(v) = update.sale_price {
            p.sale_price = v;
        }
        if let Some(v) = update.loan_in_fee {
            p.loan_in_fee = v;
        }
        if let Some(v) = update.loan_out_fee {
            p.loan_out_fee = v;
        }
        if let Some(l) = &update.locks {
            p.locks = l.clone();
        }
        let violations = validate_instance(&instance);
        if !violations.is_empty() {
            return Err(ApiError::Invalid(format!("invalid instance: {}", violations.join("; "))));
        }
        self.program(&instance, &self.fixings)?;
        self.bundle.instance = instance;
        self.revision += 1;
        self.log("update_player", serde_json::json!({ "player": player, "update": update }));
        Ok(())
    }

    pub fn add_fixing(&mut self, fixing: Fixing) -> Result<(), ApiError> {
        let mut all = self.fixings.clone();
        all.push(fixing.clone());
        self.program(&self.bundle.instance, &all)?;
        self.fixings = all;
        self.revision += 1;
        self.log("fix", serde_json::json!(fixing));
        Ok(())
    }

    pub fn clear_fixings(&mut self) {
        let dropped = std::mem::take(&mut self.fixings);
        self.revision += 1;
        self.log("clear_fixings", serde_json::json!({ "dropped": dropped }));
    }

    pub fn resample(&mut self, seed: Option<u64>, count: Option<usize>) -> Result<(), ApiError> {
        let seed = seed.unwrap_or(self.seed + 1);
        let count = count.unwrap_or(self.scenarios.num_scenarios());
        if count == 0 {
            return Err(ApiError::Invalid("at least one scenario is needed".into()));
        }
        let scenarios = sample_scenarios(&self.model, &self.bundle.instance.players, count, seed).map_err(|e| ApiError::Invalid(e.to_string()))?;
        let previous = self.seed;
        self.seed = seed;
        self.scenarios = Arc::new(scenarios);
        self.revision += 1;
        self.log("resample", serde_json::json!({ "previous_seed": previous, "seed": seed, "scenarios": count }));
        Ok(())
    }

    /// Validates a solve request and reserves the session's single solve slot.
    pub fn start_solve(&mut self, request: &SolveRequest) -> Result<SolveJob, ApiError> {
        if let Some((id, _)) = &self.active {
            return Err(ApiError::Busy(*id));
        }
        let mut instance = self.bundle.instance.clone();
        if let Some(a) = request.alpha {
            instance.alpha = a;
        }
        if let Some(r) = request.growth {
            instance.growth_factor = r;
        }
        if let Some(f) = &request.formation {
            instance.formation = Formation::by_name(f).ok_or_else(|| ApiError::Invalid(format!("unknown formation `{f}`")))?;
        }
        let violations = validate_instance(&instance);
        if !violations.is_empty() {
            return Err(ApiError::Invalid(format!("invalid instance: {}", violations.join("; "))));
        }
        let config = SolveConfig {
            alpha: instance.alpha,
            growth: instance.growth_factor,
            formation: instance.formation.name.clone(),
            gap: request.gap.unwrap_or(SolverParams::default().relative_gap),
            time_limit_secs: request.time_limit_secs.unwrap_or(DEFAULT_TIME_LIMIT_SECS),
            emphasis: request.emphasis.unwrap_or_default(),
            oos: request.oos.unwrap_or(DEFAULT_OOS),
        };
        config.params().validate().map_err(|e| ApiError::Invalid(e.to_string()))?;
        let problem = self.program(&instance, &self.fixings)?;
        let solve = self.next_solve;
        self.next_solve += 1;
        self.active = Some((solve, config.clone()));
        self.log("solve_started", serde_json::json!({ "solve": solve, "config": config }));
        Ok(SolveJob {
            solve,
            revision: self.revision,
            seed: self.seed,
            instance,
            model: self.model.clone(),
            scenarios: self.scenarios.clone(),
            problem,
            fixings: self.fixings.clone(),
            config,
        })
    }

    pub fn finish_solve(&mut self, entry: HistoryEntry) {
        self.active = None;
        self.log(
            "solve_finished",
            serde_json::json!({ "solve": entry.solve, "state": entry.state, "objective": entry.objective }),
        );
        self.history.push(entry);
    }

    pub fn entry(&self, solve: u64) -> Option<&HistoryEntry> {
        self.history.iter().find(|e| e.solve == solve)
    }
}
