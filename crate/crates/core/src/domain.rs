use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::money::Money;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    GK,
    RB,
    CB,
    LB,
    RW,
    CM,
    LW,
    AM,
    FW,
}

impl Role {
    pub const ALL: [Role; 9] = [
        Role::GK,
        Role::RB,
        Role::CB,
        Role::LB,
        Role::RW,
        Role::CM,
        Role::LW,
        Role::AM,
        Role::FW,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Role::GK => "GK",
            Role::RB => "RB",
            Role::CB => "CB",
            Role::LB => "LB",
            Role::RW => "RW",
            Role::CM => "CM",
            Role::LW => "LW",
            Role::AM => "AM",
            Role::FW => "FW",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown role code `{0}`")]
pub struct UnknownRole(pub String);

impl FromStr for Role {
    type Err = UnknownRole;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.code() == s)
            .ok_or_else(|| UnknownRole(s.to_string()))
    }
}

/// Negotiation locks; each pins one decision to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lock {
    NoBuy,
    NoSell,
    NoLoanIn,
    NoLoanOut,
}

impl Lock {
    pub fn decision(self) -> Decision {
        match self {
            Lock::NoBuy => Decision::Buy,
            Lock::NoSell => Decision::Sell,
            Lock::NoLoanIn => Decision::LoanIn,
            Lock::NoLoanOut => Decision::LoanOut,
        }
    }
}

/// The five per-player decision variables, in model order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    /// Belongs to the club at the end of the window.
    Keep,
    Buy,
    Sell,
    LoanIn,
    LoanOut,
}

impl Decision {
    pub const ALL: [Decision; 5] = [Decision::Keep, Decision::Buy, Decision::Sell, Decision::LoanIn, Decision::LoanOut];

    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Keep => "keep",
            Decision::Buy => "buy",
            Decision::Sell => "sell",
            Decision::LoanIn => "loan_in",
            Decision::LoanOut => "loan_out",
        }
    }

    /// Variable-name prefix in the built program.
    pub fn prefix(self) -> &'static str {
        match self {
            Decision::Keep => "y",
            Decision::Buy => "yb",
            Decision::Sell => "ys",
            Decision::LoanIn => "xb",
            Decision::LoanOut => "xl",
        }
    }

    pub fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Decision {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Decision::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown decision `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Player {
    pub id: String,
    pub name: String,
    /// Years at the window.
    pub age: f64,
    pub roles: BTreeSet<Role>,
    pub owned: bool,
    pub current_value: Money,
    #[serde(default)]
    pub purchase_price: Money,
    #[serde(default)]
    pub sale_price: Money,
    #[serde(default)]
    pub loan_in_fee: Money,
    #[serde(default)]
    pub loan_out_fee: Money,
    pub rating: f64,
    #[serde(default)]
    pub locks: BTreeSet<Lock>,
}

impl Player {
    pub fn has_role(&self, r: Role) -> bool {
        self.roles.contains(&r)
    }

    pub fn locked(&self, d: Decision) -> bool {
        self.locks.iter().any(|l| l.decision() == d)
    }

    /// Can end up in the registered squad at all.
    pub fn attainable(&self) -> bool {
        self.owned || !self.locked(Decision::Buy) || !self.locked(Decision::LoanIn)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Formation {
    pub name: String,
    pub min_per_role: BTreeMap<Role, u32>,
    /// Roles absent here are unbounded above.
    #[serde(default)]
    pub max_per_role: BTreeMap<Role, u32>,
}

/// Minimum players per role for the named formations, in `Role::ALL` order.
const PRESETS: [(&str, [u32; 9]); 5] = [
    ("442", [3, 2, 4, 2, 2, 4, 2, 0, 4]),
    ("433", [3, 2, 4, 2, 0, 6, 0, 0, 6]),
    ("4312", [3, 2, 4, 2, 0, 6, 0, 2, 4]),
    ("352", [3, 0, 6, 0, 2, 6, 2, 0, 4]),
    ("343", [3, 0, 6, 0, 2, 4, 2, 0, 6]),
];

pub const DEFAULT_FORMATION: &str = "433";
pub const DEFAULT_SQUAD_SIZE: u32 = 25;

impl Formation {
    pub fn preset_names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|p| p.0)
    }

    pub fn preset(name: &str) -> Option<Formation> {
        PRESETS.iter().find(|p| p.0 == name).map(|(n, mins)| Formation {
            name: n.to_string(),
            min_per_role: Role::ALL.into_iter().zip(mins.iter().copied()).collect(),
            max_per_role: BTreeMap::new(),
        })
    }

    /// No role bounds at all.
    pub fn free() -> Formation {
        Formation {
            name: "free".into(),
            min_per_role: BTreeMap::new(),
            max_per_role: BTreeMap::new(),
        }
    }

    /// A preset, or `free`.
    pub fn by_name(name: &str) -> Option<Formation> {
        if name == "free" {
            Some(Formation::free())
        } else {
            Formation::preset(name)
        }
    }

    pub fn min(&self, r: Role) -> u32 {
        self.min_per_role.get(&r).copied().unwrap_or(0)
    }

    pub fn max(&self, r: Role) -> Option<u32> {
        self.max_per_role.get(&r).copied()
    }

    pub fn total_min(&self) -> u32 {
        Role::ALL.into_iter().map(|r| self.min(r)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub club: String,
    pub players: Vec<Player>,
    pub budget: Money,
    pub squad_size: u32,
    pub formation: Formation,
    pub value_threshold: Money,
    pub alpha: f64,
    pub growth_factor: f64,
    /// Optional discount on future values, applied as `V·R·(1 + d)`.
    pub threshold_discount: f64,
}

impl Instance {
    /// Initial market value of the owned squad.
    pub fn owned_value(players: &[Player]) -> Money {
        players.iter().filter(|p| p.owned).map(|p| p.current_value).sum()
    }

    /// Right-hand side of the team-value target, `V·R·(1 + d)`.
    pub fn target_value(&self) -> f64 {
        self.value_threshold.as_f64() * self.growth_factor * (1.0 + self.threshold_discount)
    }

    pub fn player(&self, id: &str) -> Option<&Player> {
        self.players.iter().find(|p| p.id == id)
    }

    pub fn player_index(&self, id: &str) -> Option<usize> {
        self.players.iter().position(|p| p.id == id)
    }
}

/// Ids end up in variable names of the exported program.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

/// Every violated invariant, in a stable order. Never mutates or aborts.
pub fn validate_instance(instance: &Instance) -> Vec<String> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for p in &instance.players {
        if !seen.insert(p.id.as_str()) {
            out.push(format!("duplicate player id `{}`", p.id));
        }
        if !valid_id(&p.id) {
            out.push(format!("player id `{}` must be ASCII letters, digits, `_` or `.`", p.id));
        }
        if p.roles.is_empty() {
            out.push(format!("player `{}` has no roles", p.id));
        }
        if !(p.age >= 15.0) {
            out.push(format!("player `{}` age {} is below 15", p.id, p.age));
        }
        if !p.rating.is_finite() {
            out.push(format!("player `{}` rating is not finite", p.id));
        }
        let prices = [
            ("current_value", p.current_value),
            ("purchase_price", p.purchase_price),
            ("sale_price", p.sale_price),
            ("loan_in_fee", p.loan_in_fee),
            ("loan_out_fee", p.loan_out_fee),
        ];
        for (field, m) in prices {
            if m < Money::ZERO {
                out.push(format!("player `{}` {field} is negative", p.id));
            }
        }
    }
    if instance.budget < Money::ZERO {
        out.push("budget is negative".into());
    }
    if instance.value_threshold < Money::ZERO {
        out.push("value threshold is negative".into());
    }
    if !(instance.alpha > 0.0 && instance.alpha < 1.0) {
        out.push(format!("alpha {} outside (0, 1)", instance.alpha));
    }
    if !(instance.growth_factor >= 1.0) || !instance.growth_factor.is_finite() {
        out.push(format!("growth factor {} below 1", instance.growth_factor));
    }
    if !(instance.threshold_discount >= 0.0) || !instance.threshold_discount.is_finite() {
        out.push(format!("threshold discount {} is negative", instance.threshold_discount));
    }
    if instance.squad_size == 0 {
        out.push("squad size is zero".into());
    }
    let f = &instance.formation;
    for r in Role::ALL {
        if let Some(max) = f.max(r) {
            if f.min(r) > max {
                out.push(format!("formation {}: role {r} minimum {} exceeds maximum {max}", f.name, f.min(r)));
            }
        }
    }
    if f.total_min() > instance.squad_size {
        out.push(format!(
            "formation {} needs {} players but the squad holds {}",
            f.name,
            f.total_min(),
            instance.squad_size
        ));
    }
    let attainable = instance.players.iter().filter(|p| p.attainable()).count();
    if attainable < instance.squad_size as usize {
        out.push(format!(
            "only {attainable} attainable players for a squad of {}",
            instance.squad_size
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerDecision {
    pub player: String,
    pub keep: bool,
    pub buy: bool,
    pub sell: bool,
    pub loan_in: bool,
    pub loan_out: bool,
}

impl PlayerDecision {
    pub fn get(&self, d: Decision) -> bool {
        match d {
            Decision::Keep => self.keep,
            Decision::Buy => self.buy,
            Decision::Sell => self.sell,
            Decision::LoanIn => self.loan_in,
            Decision::LoanOut => self.loan_out,
        }
    }

    /// Registered for competitions: owned at the end and not loaned out, or loaned in.
    pub fn in_squad(&self) -> bool {
        (self.keep && !self.loan_out) || self.loan_in
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSolution {
    pub decisions: Vec<PlayerDecision>,
    pub objective_rating: f64,
    /// Purchases and loan fees paid minus sales and loan fees received.
    pub net_spend: Money,
    pub scenario_hits: Vec<bool>,
    pub empirical_probability: f64,
}

impl TransferSolution {
    pub fn decision(&self, player: &str) -> Option<&PlayerDecision> {
        self.decisions.iter().find(|d| d.player == player)
    }

    pub fn with(&self, d: Decision) -> Vec<&str> {
        self.decisions.iter().filter(|x| x.get(d)).map(|x| x.player.as_str()).collect()
    }

    pub fn squad(&self) -> Vec<&str> {
        self.decisions.iter().filter(|x| x.in_squad()).map(|x| x.player.as_str()).collect()
    }
}
