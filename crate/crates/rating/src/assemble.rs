//! Turns a corpus into the weighted least-squares system of the rating model.

use std::collections::HashMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::age::age_interpolation;
use crate::segment::{segment_weight, Corpus, PlayerInfo, SegmentRecord};
use crate::sparse::LeastSquares;
use crate::{Mode, RatingError, RatingParams};

/// Number of red-card states modelled per side.
pub const MAX_REDS: usize = 4;

/// Column layout of the coefficient vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableIndex {
    pub mode: Mode,
    pub players: Vec<String>,
    pub age_min: u32,
    pub age_max: u32,
    pub competitions: Vec<String>,
    pub leagues: Vec<String>,
    #[serde(skip)]
    player_pos: HashMap<String, usize>,
}

impl VariableIndex {
    fn new(mode: Mode, players: Vec<String>, params: &RatingParams, competitions: Vec<String>, leagues: Vec<String>) -> Self {
        let player_pos = players.iter().enumerate().map(|(k, p)| (p.clone(), k)).collect();
        Self {
            mode,
            players,
            age_min: params.age_min,
            age_max: params.age_max,
            competitions,
            leagues,
            player_pos,
        }
    }

    pub(crate) fn rebuild_lookup(&mut self) {
        self.player_pos = self.players.iter().enumerate().map(|(k, p)| (p.clone(), k)).collect();
    }

    fn novel(&self) -> bool {
        self.mode == Mode::Novel
    }

    pub fn num_ages(&self) -> usize {
        if self.novel() {
            (self.age_max - self.age_min + 1) as usize
        } else {
            0
        }
    }

    pub fn player(&self, id: &str) -> Option<usize> {
        self.player_pos.get(id).copied()
    }

    pub fn age(&self, y: u32) -> usize {
        debug_assert!(self.novel() && (self.age_min..=self.age_max).contains(&y));
        self.players.len() + (y - self.age_min) as usize
    }

    fn home_base(&self) -> usize {
        self.players.len() + self.num_ages()
    }

    pub fn home(&self, competition: &str) -> Option<usize> {
        self.competitions.iter().position(|c| c == competition).map(|k| self.home_base() + k)
    }

    fn red_base(&self) -> usize {
        self.home_base() + self.competitions.len()
    }

    /// Column of the home-side red-card effect with `n` (1-based) more sendings-off.
    pub fn home_red(&self, n: usize) -> usize {
        self.red_base() + n - 1
    }

    pub fn away_red(&self, n: usize) -> usize {
        self.red_base() + MAX_REDS + n - 1
    }

    fn league_base(&self) -> usize {
        self.red_base() + if self.novel() { 2 * MAX_REDS } else { 0 }
    }

    pub fn league(&self, b: &str) -> Option<usize> {
        self.leagues.iter().position(|l| l == b).map(|k| self.league_base() + k)
    }

    pub fn ncols(&self) -> usize {
        self.league_base() + self.leagues.len()
    }

    /// Human-readable name of a column.
    pub fn label(&self, col: usize) -> String {
        let np = self.players.len();
        if col < np {
            return format!("player:{}", self.players[col]);
        }
        let mut c = col - np;
        if c < self.num_ages() {
            return format!("age:{}", self.age_min as usize + c);
        }
        c -= self.num_ages();
        if c < self.competitions.len() {
            return format!("home:{}", self.competitions[c]);
        }
        c -= self.competitions.len();
        if self.novel() && c < 2 * MAX_REDS {
            return if c < MAX_REDS {
                format!("home_red:{}", c + 1)
            } else {
                format!("away_red:{}", c - MAX_REDS + 1)
            };
        }
        if self.novel() {
            c -= 2 * MAX_REDS;
        }
        format!("league:{}", self.leagues[c])
    }
}

/// A teammate used as shrinkage target, with the date they last shared the pitch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Similar {
    pub player: String,
    pub minutes: f64,
    pub last_shared: NaiveDate,
}

/// For each player, the teammates with most shared minutes (ties by id),
/// capped at `cap`.
pub fn similar_players(segments: &[SegmentRecord], cap: usize) -> HashMap<String, Vec<Similar>> {
    let mut shared: HashMap<(&str, &str), (f64, NaiveDate)> = HashMap::new();
    for seg in segments {
        for side in [&seg.home_players, &seg.away_players] {
            for a in side {
                for b in side {
                    if a == b {
                        continue;
                    }
                    let e = shared.entry((a.as_str(), b.as_str())).or_insert((0.0, seg.date));
                    e.0 += seg.duration;
                    e.1 = e.1.max(seg.date);
                }
            }
        }
    }
    let mut out: HashMap<String, Vec<Similar>> = HashMap::new();
    for ((a, b), (minutes, last_shared)) in shared {
        out.entry(a.to_string()).or_default().push(Similar {
            player: b.to_string(),
            minutes,
            last_shared,
        });
    }
    for list in out.values_mut() {
        list.sort_by(|x, y| y.minutes.total_cmp(&x.minutes).then_with(|| x.player.cmp(&y.player)));
        list.truncate(cap);
    }
    out
}

/// Result of assembling a corpus.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub system: LeastSquares,
    pub index: VariableIndex,
    /// The first `data_rows` rows are segment observations, the rest regularization.
    pub data_rows: usize,
    /// `(match id, segment)` of each data row.
    pub row_segments: Vec<(String, u32)>,
    pub dropped_segments: usize,
    pub reference: NaiveDate,
    pub similar: HashMap<String, Vec<Similar>>,
    /// Player-minutes observed at each grid age (novel mode only).
    pub age_minutes: Vec<f64>,
}

/// Player data the novel model needs, looked up by id.
pub(crate) struct PlayerTable<'a> {
    by_id: HashMap<&'a str, &'a PlayerInfo>,
}

impl<'a> PlayerTable<'a> {
    pub(crate) fn new(players: &'a [PlayerInfo]) -> Self {
        Self {
            by_id: players.iter().map(|p| (p.id.as_str(), p)).collect(),
        }
    }

    pub(crate) fn get(&self, id: &str) -> Result<&'a PlayerInfo, RatingError> {
        self.by_id.get(id).copied().ok_or_else(|| RatingError::UnknownPlayer(id.to_string()))
    }
}

/// Terms of `f_aux(p, t, w_age)`: individual, weighted age curve at time `t`, league average.
pub(crate) fn aux_terms(
    index: &VariableIndex,
    col: usize,
    info: Option<&PlayerInfo>,
    at: NaiveDate,
    w_age: f64,
    scale: f64,
    out: &mut Vec<(usize, f64)>,
) {
    out.push((col, scale));
    if let Some(info) = info {
        for (y, u) in age_interpolation(info.age_at(at), index.age_min, index.age_max).terms() {
            out.push((index.age(y), scale * w_age * u));
        }
        let leagues: Vec<usize> = info.leagues.iter().filter_map(|b| index.league(b)).collect();
        if !leagues.is_empty() {
            let share = scale / leagues.len() as f64;
            out.extend(leagues.into_iter().map(|c| (c, share)));
        }
    }
}

/// Unweighted `f_lhs` of one segment as sparse coefficients.
pub(crate) fn lhs_terms(
    seg: &SegmentRecord,
    index: &VariableIndex,
    table: Option<&PlayerTable<'_>>,
) -> Result<Vec<(usize, f64)>, RatingError> {
    let d = seg.duration / 90.0;
    let mut terms = Vec::with_capacity(4 * (seg.home_players.len() + seg.away_players.len()) + 2);
    for (players, sign) in [(&seg.home_players, 1.0), (&seg.away_players, -1.0)] {
        let scale = match index.mode {
            Mode::Plain => sign * d,
            Mode::Novel => sign * d * 11.0 / players.len() as f64,
        };
        for id in players {
            let col = index.player(id).ok_or_else(|| RatingError::UnknownPlayer(id.clone()))?;
            let info = match table {
                Some(t) => Some(t.get(id)?),
                None => None,
            };
            aux_terms(index, col, info, seg.date, 1.0, scale, &mut terms);
        }
    }
    if index.mode == Mode::Novel {
        let net = seg.home_reds as i64 - seg.away_reds as i64;
        let n = (net.unsigned_abs() as usize).min(MAX_REDS);
        if net > 0 {
            terms.push((index.home_red(n), d));
        } else if net < 0 {
            terms.push((index.away_red(n), -d));
        }
        if seg.home_advantage {
            if let Some(c) = index.home(&seg.competition) {
                terms.push((c, d));
            }
        }
    }
    Ok(terms)
}

fn sorted_unique<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut v: Vec<String> = items.map(str::to_string).collect();
    v.sort();
    v.dedup();
    v
}

/// Builds data rows (one per kept segment) followed by regularization rows.
pub fn assemble_system(corpus: &Corpus, params: &RatingParams, mode: Mode) -> Result<Assembled, RatingError> {
    params.validate()?;
    for seg in &corpus.segments {
        seg.check()?;
    }
    let kept: Vec<&SegmentRecord> = corpus
        .segments
        .iter()
        .filter(|s| mode == Mode::Novel || !s.has_red_card())
        .collect();
    if kept.is_empty() {
        return Err(RatingError::EmptyCorpus);
    }
    let dropped_segments = corpus.segments.len() - kept.len();
    let reference = params
        .reference
        .or_else(|| kept.iter().map(|s| s.date).max())
        .expect("kept is non-empty");

    let players = sorted_unique(kept.iter().flat_map(|s| s.home_players.iter().chain(&s.away_players)).map(String::as_str));
    let table = match mode {
        Mode::Novel => Some(PlayerTable::new(&corpus.players)),
        Mode::Plain => None,
    };
    let (competitions, leagues) = match &table {
        Some(t) => {
            let comps = sorted_unique(kept.iter().filter(|s| s.home_advantage).map(|s| s.competition.as_str()));
            let mut leagues = Vec::new();
            for p in &players {
                leagues.extend(t.get(p)?.leagues.iter().map(String::as_str));
            }
            (comps, sorted_unique(leagues.into_iter()))
        }
        None => (Vec::new(), Vec::new()),
    };
    let index = VariableIndex::new(mode, players, params, competitions, leagues);
    let mut system = LeastSquares::new(index.ncols());
    let mut row_segments = Vec::with_capacity(kept.len());
    let mut age_minutes = vec![0.0; if mode == Mode::Novel { index.num_ages() } else { 0 }];

    for seg in &kept {
        if let Some(t) = &table {
            for p in seg.home_players.iter().chain(&seg.away_players) {
                let weights = age_interpolation(t.get(p)?.age_at(seg.date), index.age_min, index.age_max);
                for (y, u) in weights.terms() {
                    age_minutes[(y - index.age_min) as usize] += u * seg.duration;
                }
            }
        }
        let w = match mode {
            Mode::Plain => 1.0,
            Mode::Novel => segment_weight(seg, params, reference)?,
        };
        let mut terms = lhs_terms(seg, &index, table.as_ref())?;
        terms.iter_mut().for_each(|t| t.1 *= w);
        system.push_row(&terms, w * seg.goal_diff() as f64);
        row_segments.push((seg.match_id.clone(), seg.segment));
    }
    let data_rows = system.nrows();
    let lambda = params.lambda;

    let similar = match mode {
        Mode::Novel => similar_players(&kept.iter().map(|s| (*s).clone()).collect::<Vec<_>>(), params.max_similar),
        Mode::Plain => HashMap::new(),
    };

    match &table {
        None => {
            for j in 0..index.players.len() {
                system.push_row(&[(j, lambda)], 0.0);
            }
        }
        Some(t) => {
            let mut terms = Vec::new();
            for (j, id) in index.players.iter().enumerate() {
                terms.clear();
                aux_terms(&index, j, Some(t.get(id)?), reference, 1.0, lambda, &mut terms);
                if let Some(list) = similar.get(id).filter(|l| !l.is_empty()) {
                    let share = -lambda * params.w_similar / list.len() as f64;
                    for s in list {
                        let col = index.player(&s.player).expect("teammates come from kept segments");
                        aux_terms(&index, col, Some(t.get(&s.player)?), s.last_shared, params.w_age, share, &mut terms);
                    }
                }
                system.push_row(&terms, 0.0);
            }
            for y in index.age_min + 1..index.age_max {
                system.push_row(
                    &[(index.age(y), lambda), (index.age(y - 1), -lambda / 2.0), (index.age(y + 1), -lambda / 2.0)],
                    0.0,
                );
            }
            let first_other = index.players.len() + index.num_ages();
            for col in first_other..index.ncols() {
                system.push_row(&[(col, lambda)], 0.0);
            }
        }
    }

    Ok(Assembled {
        system,
        index,
        data_rows,
        row_segments,
        dropped_segments,
        reference,
        similar,
        age_minutes,
    })
}
