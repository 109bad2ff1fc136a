//! Match logs simulated from a known rating model, for recovery tests and demos.

use std::collections::HashMap;

use chrono::{Datelike, Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::assemble::MAX_REDS;
use crate::segment::{Corpus, PlayerInfo, SegmentRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub teams: usize,
    pub seasons: usize,
    pub squad_size: usize,
    pub first_season: i32,
    /// Home advantage in goals per 90 minutes.
    pub home_advantage: f64,
    /// Goal-difference effect per 90 of the home side being 1..=4 men down.
    pub home_red: [f64; MAX_REDS],
    /// Same for the away side, as a coefficient on the away-short indicator
    /// (so the home gain is the negated value).
    pub away_red: [f64; MAX_REDS],
    pub age_peak: f64,
    /// Loss per player per 90 for each squared year away from the peak.
    pub age_curvature: f64,
    /// Spread of club quality per player.
    pub club_sd: f64,
    /// Spread of individual ability around the club level.
    pub individual_sd: f64,
    /// Goals per 90 per side at level strength.
    pub base_rate: f64,
    pub red_card_rate: f64,
    /// Share of each squad moved to another club between seasons.
    pub transfer_share: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            teams: 40,
            seasons: 6,
            squad_size: 24,
            first_season: 2008,
            home_advantage: 0.25,
            home_red: [-0.83, -0.6, -0.45, -0.35],
            away_red: [-1.07, -0.8, -0.6, -0.45],
            age_peak: 26.0,
            age_curvature: 0.002,
            club_sd: 0.1,
            individual_sd: 0.03,
            base_rate: 1.35,
            red_card_rate: 0.15,
            transfer_share: 0.15,
        }
    }
}

/// The coefficients the corpus was drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub player: HashMap<String, f64>,
    pub age_peak: f64,
    pub age_curvature: f64,
    pub home_advantage: f64,
    pub home_red: [f64; MAX_REDS],
    pub away_red: [f64; MAX_REDS],
}

impl Truth {
    pub fn age_effect(&self, age: f64) -> f64 {
        -self.age_curvature * (age - self.age_peak).powi(2)
    }
}

pub const LEAGUE: &str = "SYN1";
pub const COMPETITION: &str = "SYN";

struct Sim {
    rng: ChaCha8Rng,
    cfg: SyntheticConfig,
    players: Vec<PlayerInfo>,
    truth: HashMap<String, f64>,
    squads: Vec<Vec<usize>>,
    club_level: Vec<f64>,
    next_id: usize,
}

impl Sim {
    fn new_player(&mut self, club: usize, age: f64, on: NaiveDate) -> usize {
        let id = format!("p{:05}", self.next_id);
        self.next_id += 1;
        let birth = on - Duration::days((age * 365.25) as i64);
        let ability = self.club_level[club] + Normal::new(0.0, self.cfg.individual_sd).expect("sd").sample(&mut self.rng);
        self.truth.insert(id.clone(), ability);
        self.players.push(PlayerInfo {
            name: format!("Player {}", self.next_id),
            id,
            birth,
            leagues: vec![LEAGUE.into()],
        });
        self.players.len() - 1
    }

    fn strength(&self, idx: usize, date: NaiveDate, truth: &Truth) -> f64 {
        let p = &self.players[idx];
        self.truth[&p.id] + truth.age_effect(p.age_at(date))
    }

    /// Retires veterans, moves a share of players between clubs, tops squads up.
    fn off_season(&mut self, start: NaiveDate) {
        let teams = self.squads.len();
        for club in 0..teams {
            let squad = std::mem::take(&mut self.squads[club]);
            self.squads[club] = squad.into_iter().filter(|&p| self.players[p].age_at(start) < 35.0).collect();
        }
        let mut moving = Vec::new();
        for club in 0..teams {
            self.squads[club].retain(|&p| {
                if self.rng.random_bool(self.cfg.transfer_share) {
                    moving.push(p);
                    false
                } else {
                    true
                }
            });
        }
        moving.shuffle(&mut self.rng);
        for p in moving {
            let club = self.rng.random_range(0..teams);
            if self.squads[club].len() < self.cfg.squad_size {
                self.squads[club].push(p);
            }
        }
        for club in 0..teams {
            while self.squads[club].len() < self.cfg.squad_size {
                let age = self.rng.random_range(17.0..21.0);
                let p = self.new_player(club, age, start);
                self.squads[club].push(p);
            }
        }
    }
}

/// Double round robin pairings by the circle method.
fn round_robin(teams: usize) -> Vec<Vec<(usize, usize)>> {
    let n = teams + teams % 2;
    let mut ring: Vec<usize> = (0..n).collect();
    let mut rounds = Vec::new();
    for r in 0..n - 1 {
        let mut games = Vec::new();
        for k in 0..n / 2 {
            let (a, b) = (ring[k], ring[n - 1 - k]);
            if a < teams && b < teams {
                games.push(if (r + k) % 2 == 0 { (a, b) } else { (b, a) });
            }
        }
        rounds.push(games);
        ring[1..].rotate_right(1);
    }
    let second: Vec<Vec<(usize, usize)>> = rounds.iter().map(|g| g.iter().map(|&(h, a)| (a, h)).collect()).collect();
    rounds.extend(second);
    rounds
}

/// Simulates `cfg.seasons` double round robins and returns the segment log
/// with the generating coefficients.
pub fn generate(cfg: &SyntheticConfig) -> (Corpus, Truth) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let club_dist = Normal::new(0.0, cfg.club_sd).expect("sd");
    let club_level: Vec<f64> = (0..cfg.teams).map(|_| club_dist.sample(&mut rng)).collect();
    let mut sim = Sim {
        rng,
        cfg: cfg.clone(),
        players: Vec::new(),
        truth: HashMap::new(),
        squads: vec![Vec::new(); cfg.teams],
        club_level,
        next_id: 0,
    };
    let truth_shape = Truth {
        player: HashMap::new(),
        age_peak: cfg.age_peak,
        age_curvature: cfg.age_curvature,
        home_advantage: cfg.home_advantage,
        home_red: cfg.home_red,
        away_red: cfg.away_red,
    };
    let start = NaiveDate::from_ymd_opt(cfg.first_season, 8, 1).expect("valid date");
    for club in 0..cfg.teams {
        for _ in 0..cfg.squad_size {
            let age = sim.rng.random_range(17.0..33.0);
            let p = sim.new_player(club, age, start);
            sim.squads[club].push(p);
        }
    }

    let schedule = round_robin(cfg.teams);
    let mut segments = Vec::new();
    for season in 0..cfg.seasons {
        let opening = NaiveDate::from_ymd_opt(cfg.first_season + season as i32, 8, 1).expect("valid date");
        if season > 0 {
            sim.off_season(opening);
        }
        for (round, games) in schedule.iter().enumerate() {
            let date = opening + Duration::days(7 * round as i64);
            for &(h, a) in games {
                let match_id = format!("{}-{:02}-{:02}v{:02}", date.year(), round, h, a);
                simulate_match(&mut sim, &truth_shape, &match_id, date, h, a, &mut segments);
            }
        }
    }
    let truth = Truth {
        player: sim.truth,
        ..truth_shape
    };
    (
        Corpus {
            players: sim.players,
            segments,
        },
        truth,
    )
}

#[derive(Clone, Copy)]
enum Event {
    Sub { home: bool },
    Red { home: bool },
}

fn simulate_match(
    sim: &mut Sim,
    truth: &Truth,
    match_id: &str,
    date: NaiveDate,
    h: usize,
    a: usize,
    out: &mut Vec<SegmentRecord>,
) {
    let cfg = sim.cfg.clone();
    let lineup = |club: usize, rng: &mut ChaCha8Rng| -> (Vec<usize>, Vec<usize>) {
        let mut squad = sim.squads[club].clone();
        squad.shuffle(rng);
        let (xi, bench) = squad.split_at(11.min(squad.len()));
        (xi.to_vec(), bench.to_vec())
    };
    let (mut home_xi, mut home_bench) = lineup(h, &mut sim.rng);
    let (mut away_xi, mut away_bench) = lineup(a, &mut sim.rng);

    let mut events: Vec<(u32, Event)> = Vec::new();
    for home in [true, false] {
        for _ in 0..3 {
            events.push((sim.rng.random_range(55..=88), Event::Sub { home }));
        }
    }
    if sim.rng.random_bool(cfg.red_card_rate) {
        let home = sim.rng.random_bool(0.5);
        events.push((sim.rng.random_range(10..=85), Event::Red { home }));
        if sim.rng.random_bool(0.1) {
            let home = sim.rng.random_bool(0.5);
            events.push((sim.rng.random_range(10..=85), Event::Red { home }));
        }
    }
    events.sort_by_key(|e| e.0);

    let mut minute = 0u32;
    let mut diff = 0i32;
    let mut reds = [0u32; 2];
    let mut seg_no = 0u32;
    let mut k = 0;
    while minute < 90 {
        let end = events.get(k).map_or(90, |e| e.0.min(90));
        if end > minute {
            let d = (end - minute) as f64;
            let avg = |xi: &[usize]| xi.iter().map(|&p| sim.strength(p, date, truth)).sum::<f64>() * 11.0 / xi.len() as f64;
            let net = reds[0] as i64 - reds[1] as i64;
            let n = (net.unsigned_abs() as usize).min(MAX_REDS);
            let red = if net > 0 {
                truth.home_red[n - 1]
            } else if net < 0 {
                -truth.away_red[n - 1]
            } else {
                0.0
            };
            let mu = avg(&home_xi) - avg(&away_xi) + red + truth.home_advantage;
            let scale = d / 90.0;
            let lam_h = (scale * (cfg.base_rate + mu / 2.0)).max(0.01 * scale);
            let lam_a = (scale * (cfg.base_rate - mu / 2.0)).max(0.01 * scale);
            let hg = Poisson::new(lam_h).expect("positive rate").sample(&mut sim.rng) as u32;
            let ag = Poisson::new(lam_a).expect("positive rate").sample(&mut sim.rng) as u32;
            let id = |xi: &[usize]| xi.iter().map(|&p| sim.players[p].id.clone()).collect::<Vec<_>>();
            out.push(SegmentRecord {
                match_id: match_id.to_string(),
                date,
                competition: COMPETITION.into(),
                home_team: format!("club{h:02}"),
                away_team: format!("club{a:02}"),
                segment: seg_no,
                duration: d,
                home_players: id(&home_xi),
                away_players: id(&away_xi),
                home_goals: hg,
                away_goals: ag,
                start_diff: diff,
                home_reds: reds[0],
                away_reds: reds[1],
                home_advantage: true,
            });
            seg_no += 1;
            diff += hg as i32 - ag as i32;
            minute = end;
        }
        // Apply every event at this minute before the next segment.
        while k < events.len() && events[k].0.min(90) == minute {
            match events[k].1 {
                Event::Sub { home } => {
                    let (xi, bench) = if home { (&mut home_xi, &mut home_bench) } else { (&mut away_xi, &mut away_bench) };
                    if !bench.is_empty() && !xi.is_empty() {
                        let out_pos = sim.rng.random_range(0..xi.len());
                        let in_pos = sim.rng.random_range(0..bench.len());
                        xi[out_pos] = bench.swap_remove(in_pos);
                    }
                }
                Event::Red { home } => {
                    let xi = if home { &mut home_xi } else { &mut away_xi };
                    if xi.len() > 7 {
                        let pos = sim.rng.random_range(0..xi.len());
                        xi.swap_remove(pos);
                        reds[usize::from(!home)] += 1;
                    }
                }
            }
            k += 1;
        }
    }
}
