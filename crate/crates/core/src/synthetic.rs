//! Seeded instance generators standing in for the unpublished club data.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::domain::{Formation, Instance, Lock, Player, Role, DEFAULT_FORMATION, DEFAULT_SQUAD_SIZE};
use crate::money::Money;
use crate::value::{fit_value_model, AgeGroup, HistoryRow, ValueModel};

/// Player pool per club, owned squad plus scouted targets.
pub const CLUB_POOL_SIZES: [usize; 20] = [41, 55, 61, 53, 60, 45, 51, 55, 46, 37, 42, 50, 50, 50, 50, 51, 55, 48, 51, 51];

/// Median one-year value ratio per age group, youngest first.
const GROUP_GROWTH: [f64; AgeGroup::COUNT] = [1.22, 1.14, 1.08, 1.03, 0.98, 0.93, 0.87, 0.80];

/// Primary roles of a generated owned squad; covers every preset formation minimum
/// once secondary roles are counted.
const OWNED_ROLES: [(Role, usize); 9] = [
    (Role::GK, 3),
    (Role::RB, 2),
    (Role::CB, 5),
    (Role::LB, 2),
    (Role::RW, 2),
    (Role::CM, 6),
    (Role::LW, 2),
    (Role::AM, 1),
    (Role::FW, 5),
];

fn neighbours(r: Role) -> &'static [Role] {
    match r {
        Role::GK => &[],
        Role::RB => &[Role::CB, Role::RW],
        Role::CB => &[Role::RB, Role::LB],
        Role::LB => &[Role::CB, Role::LW],
        Role::RW => &[Role::FW, Role::LW, Role::AM],
        Role::CM => &[Role::AM],
        Role::LW => &[Role::FW, Role::RW, Role::AM],
        Role::AM => &[Role::CM, Role::FW],
        Role::FW => &[Role::AM, Role::RW, Role::LW],
    }
}

fn roles_for(primary: Role, rng: &mut ChaCha8Rng) -> BTreeSet<Role> {
    let mut roles = BTreeSet::from([primary]);
    let options = neighbours(primary);
    if !options.is_empty() && rng.random_bool(0.45) {
        roles.insert(options[rng.random_range(0..options.len())]);
    }
    roles
}

fn random_primary(rng: &mut ChaCha8Rng) -> Role {
    let total: usize = OWNED_ROLES.iter().map(|r| r.1).sum();
    let mut k = rng.random_range(0..total);
    for (role, n) in OWNED_ROLES {
        if k < n {
            return role;
        }
        k -= n;
    }
    unreachable!("weights sum to total")
}

fn money(x: f64) -> Money {
    Money(x.round().max(0.0) as i64)
}

/// Value model fitted to a generated valuation history with known growth per age group.
pub fn synthetic_value_model(seed: u64) -> ValueModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = LogNormal::new(6000f64.ln(), 1.0).expect("valid lognormal");
    let noise = Normal::new(0.0, 0.045).expect("valid normal");
    let role_shift: BTreeMap<Role, f64> = Role::ALL.into_iter().zip([-0.05, 0.0, 0.02, 0.0, 0.03, 0.01, 0.03, 0.04, 0.06]).collect();
    let mut history = Vec::new();
    for group in AgeGroup::all() {
        let slope = GROUP_GROWTH[group.index()].powf(0.25);
        let (lo, hi) = group.bounds();
        let (lo, hi) = (lo.unwrap_or(17) as f64, hi.map_or(36.0, |h| h as f64 + 1.0));
        for _ in 0..300 {
            let roles = roles_for(random_primary(&mut rng), &mut rng);
            let now: f64 = values.sample(&mut rng).clamp(100.0, 150_000.0).round();
            let shift: f64 = roles.iter().map(|r| role_shift[r]).sum();
            let root = (slope * now.powf(0.25) + shift) * (1.0 + noise.sample(&mut rng));
            history.push(HistoryRow {
                age: rng.random_range(lo..hi),
                roles,
                value_now: now,
                value_next: root.max(0.0).powi(4),
            });
        }
    }
    fit_value_model(&history).expect("every group has 300 rows")
}

fn player(id: String, age: f64, roles: BTreeSet<Role>, owned: bool, value: f64, rng: &mut ChaCha8Rng) -> Player {
    let skill = Normal::new(0.0, 0.025).expect("valid normal");
    let rating = (0.04 + 0.025 * (value / 1000.0).ln() + skill.sample(rng)).max(0.005);
    Player {
        name: format!("Player {id}"),
        id,
        age,
        roles,
        owned,
        current_value: money(value),
        purchase_price: Money::ZERO,
        sale_price: Money::ZERO,
        loan_in_fee: Money::ZERO,
        loan_out_fee: Money::ZERO,
        rating,
        locks: BTreeSet::new(),
    }
}

/// Full-size club `index` of the twenty, with `α = 0.8`, `R = 1`, `N = 25` and formation 433.
pub fn synthetic_club(index: usize, seed: u64) -> Instance {
    let pool = CLUB_POOL_SIZES[index % CLUB_POOL_SIZES.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let values = LogNormal::new(6000f64.ln(), 1.0).expect("valid lognormal");
    let owned_primaries: Vec<Role> = OWNED_ROLES.iter().flat_map(|&(r, n)| std::iter::repeat_n(r, n)).collect();
    let mut players = Vec::with_capacity(pool);
    for k in 0..pool {
        let owned = k < owned_primaries.len();
        let primary = if owned { owned_primaries[k] } else { random_primary(&mut rng) };
        let roles = roles_for(primary, &mut rng);
        let value: f64 = values.sample(&mut rng).clamp(200.0, 120_000.0);
        let age = (rng.random_range(18.0..34.0f64) * 10.0).round() / 10.0;
        let id = if owned { format!("c{index}_o{k}") } else { format!("c{index}_t{k}") };
        let mut p = player(id, age, roles, owned, value, &mut rng);
        if owned {
            p.sale_price = money(value * rng.random_range(0.75..1.05));
            if rng.random_bool(0.3) {
                p.locks.insert(Lock::NoLoanOut);
            } else {
                p.loan_out_fee = money(value * rng.random_range(0.03..0.10));
            }
        } else {
            p.purchase_price = money(value * rng.random_range(1.1..1.6));
            if rng.random_bool(0.4) {
                p.loan_in_fee = money(value * rng.random_range(0.05..0.15));
            } else {
                p.locks.insert(Lock::NoLoanIn);
            }
        }
        players.push(p);
    }
    let owned_value = Instance::owned_value(&players);
    Instance {
        club: format!("club{index:02}"),
        budget: money(owned_value.as_f64() * 0.25),
        players,
        squad_size: DEFAULT_SQUAD_SIZE,
        formation: Formation::preset(DEFAULT_FORMATION).expect("preset exists"),
        value_threshold: owned_value,
        alpha: 0.8,
        growth_factor: 1.0,
        threshold_discount: 0.0,
    }
}

/// Formation used by the small generators: one keeper, one defender, one forward.
pub fn toy_formation() -> Formation {
    Formation {
        name: "toy".into(),
        min_per_role: BTreeMap::from([(Role::GK, 1), (Role::CB, 1), (Role::FW, 1)]),
        max_per_role: BTreeMap::from([(Role::GK, 2)]),
    }
}

const TOY_ROLES: [Role; 4] = [Role::GK, Role::CB, Role::CM, Role::FW];

/// Small instance with at most `max_players` players, for exhaustive checks.
/// Ownership, prices, locks and the squad size are all drawn from `seed`.
pub fn toy_instance(seed: u64, max_players: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=max_players.max(4));
    let owned_count = rng.random_range(2..=n - 1);
    let values = LogNormal::new(5000f64.ln(), 0.8).expect("valid lognormal");
    let mut players = Vec::with_capacity(n);
    for k in 0..n {
        let owned = k < owned_count;
        // The first three cover the formation minimum on both sides of the market.
        let primary = if k < 3 { [Role::GK, Role::CB, Role::FW][k] } else { TOY_ROLES[rng.random_range(0..TOY_ROLES.len())] };
        let mut roles = BTreeSet::from([primary]);
        if primary != Role::GK && rng.random_bool(0.3) {
            roles.insert(TOY_ROLES[rng.random_range(1..TOY_ROLES.len())]);
        }
        let value: f64 = values.sample(&mut rng).clamp(300.0, 60_000.0);
        let age = (rng.random_range(18.0..34.0f64) * 10.0).round() / 10.0;
        let mut p = player(format!("p{k}"), age, roles, owned, value, &mut rng);
        if owned {
            p.sale_price = money(value * rng.random_range(0.7..1.1));
            p.loan_out_fee = money(value * rng.random_range(0.02..0.1));
            if rng.random_bool(0.15) {
                p.locks.insert(Lock::NoSell);
            }
            if rng.random_bool(0.3) {
                p.locks.insert(Lock::NoLoanOut);
            }
        } else {
            p.purchase_price = money(value * rng.random_range(1.0..1.5));
            p.loan_in_fee = money(value * rng.random_range(0.05..0.2));
            if rng.random_bool(0.15) {
                p.locks.insert(Lock::NoBuy);
            }
            if rng.random_bool(0.4) {
                p.locks.insert(Lock::NoLoanIn);
            }
        }
        players.push(p);
    }
    let attainable = players.iter().filter(|p| p.attainable()).count();
    let squad_size = rng.random_range(3..=attainable.clamp(3, 6)) as u32;
    let owned_value = Instance::owned_value(&players);
    Instance {
        club: format!("toy{seed}"),
        budget: money(owned_value.as_f64() * rng.random_range(0.0..0.4)),
        players,
        squad_size,
        formation: toy_formation(),
        value_threshold: owned_value,
        alpha: [0.2, 0.5, 0.8][rng.random_range(0..3)],
        growth_factor: [1.0, 1.05, 1.1][rng.random_range(0..3)],
        threshold_discount: 0.0,
    }
}

/// Budgets, as fractions of the owned squad value, over which the loan family is solved.
pub const LOAN_FAMILY_BUDGETS: [f64; 6] = [0.0, 0.1, 0.2, 0.4, 0.8, 1.6];

/// A modest squad with three open places. Buy-only targets outrate the squad; loan-only
/// targets are cheap but weaker than anyone already owned, so money decides which fill the
/// open places. Members of the family differ only in `budget`.
pub fn loan_family(seed: u64, budget_share: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = LogNormal::new(4000f64.ln(), 0.4).expect("valid lognormal");
    let mut players = Vec::new();
    let owned_roles = [Role::GK, Role::GK, Role::CB, Role::CB, Role::CB, Role::CM, Role::CM, Role::CM, Role::FW, Role::FW, Role::FW, Role::CM];
    for (k, &r) in owned_roles.iter().enumerate() {
        let value = values.sample(&mut rng) * 0.6;
        let age = (rng.random_range(18.0..34.0f64) * 10.0).round() / 10.0;
        let mut p = player(format!("o{k}"), age, BTreeSet::from([r]), true, value, &mut rng);
        p.rating = rng.random_range(0.05..0.07);
        p.sale_price = money(value * 0.9);
        p.locks.insert(Lock::NoLoanOut);
        players.push(p);
    }
    for k in 0..6 {
        let r = [Role::CB, Role::CM, Role::FW][k % 3];
        let value = values.sample(&mut rng) * 1.4;
        let age = (rng.random_range(20.0..30.0f64) * 10.0).round() / 10.0;
        let mut p = player(format!("s{k}"), age, BTreeSet::from([r]), false, value, &mut rng);
        p.rating = rng.random_range(0.08..0.10);
        p.purchase_price = money(value * rng.random_range(1.1..1.3));
        p.locks.insert(Lock::NoLoanIn);
        players.push(p);
    }
    for k in 0..8 {
        let r = [Role::CB, Role::CM, Role::FW][k % 3];
        let value = values.sample(&mut rng);
        let age = (rng.random_range(18.0..34.0f64) * 10.0).round() / 10.0;
        let mut p = player(format!("l{k}"), age, BTreeSet::from([r]), false, value, &mut rng);
        p.rating = rng.random_range(0.03..0.045);
        p.loan_in_fee = money(value * rng.random_range(0.05..0.10));
        p.locks.insert(Lock::NoBuy);
        players.push(p);
    }
    let owned_value = Instance::owned_value(&players);
    Instance {
        club: format!("loan{seed}"),
        budget: money(owned_value.as_f64() * budget_share),
        players,
        squad_size: 15,
        formation: Formation {
            name: "loan".into(),
            min_per_role: BTreeMap::from([(Role::GK, 1), (Role::CB, 4), (Role::CM, 4), (Role::FW, 3)]),
            max_per_role: BTreeMap::new(),
        },
        value_threshold: money(owned_value.as_f64() * 0.85),
        alpha: 0.5,
        growth_factor: 1.0,
        threshold_discount: 0.0,
    }
}
