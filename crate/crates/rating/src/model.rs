use std::collections::HashMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::assemble::{aux_terms, assemble_system, lhs_terms, PlayerTable, Similar, VariableIndex, MAX_REDS};
use crate::segment::{Corpus, PlayerInfo, SegmentRecord};
use crate::sparse::{cgls, CglsReport};
use crate::{Mode, RatingError, RatingParams};

/// Regularization added to coefficients no row pins down.
pub const FALLBACK_RIDGE: f64 = 1e-10;

/// Ages with less than this share of the busiest age's minutes are too thin
/// to locate the peak.
pub const AGE_SUPPORT_SHARE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub rows: usize,
    pub data_rows: usize,
    pub columns: usize,
    pub nonzeros: usize,
    pub dropped_segments: usize,
    pub cg: CglsReport,
    /// Columns that received the fallback ridge, by label.
    pub ridged: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatingModel {
    pub params: RatingParams,
    pub reference: NaiveDate,
    pub index: VariableIndex,
    pub coefficients: Vec<f64>,
    /// Player data for the novel model (empty in plain mode).
    pub players: Vec<PlayerInfo>,
    pub similar: HashMap<String, Vec<Similar>>,
    /// Player-minutes observed at each grid age, from `age_min` upwards.
    #[serde(default)]
    pub age_minutes: Vec<f64>,
    pub report: FitReport,
}

/// Assembles and solves the rating system.
pub fn fit(corpus: &Corpus, params: &RatingParams, mode: Mode) -> Result<RatingModel, RatingError> {
    let mut assembled = assemble_system(corpus, params, mode)?;
    let index = &assembled.index;
    let ridge_row = FALLBACK_RIDGE.sqrt();

    let mut ridged: Vec<usize> = assembled.system.empty_columns();
    for &j in &ridged {
        assembled.system.push_row(&[(j, ridge_row)], 0.0);
    }
    let (mut x, mut cg) = cgls(&assembled.system, params.cg_tolerance, params.cg_max_iterations);
    if !cg.converged && mode == Mode::Novel {
        // Endpoint ages carry no regularization of their own and may be
        // poorly anchored; pin them lightly and retry.
        for y in [index.age_min, index.age_max] {
            let j = index.age(y);
            if !ridged.contains(&j) {
                assembled.system.push_row(&[(j, ridge_row)], 0.0);
                ridged.push(j);
            }
        }
        (x, cg) = cgls(&assembled.system, params.cg_tolerance, params.cg_max_iterations);
    }

    let players = match mode {
        Mode::Novel => {
            let wanted: std::collections::HashSet<&str> = index.players.iter().map(String::as_str).collect();
            corpus.players.iter().filter(|p| wanted.contains(p.id.as_str())).cloned().collect()
        }
        Mode::Plain => Vec::new(),
    };
    let report = FitReport {
        rows: assembled.system.nrows(),
        data_rows: assembled.data_rows,
        columns: index.ncols(),
        nonzeros: assembled.system.nnz(),
        dropped_segments: assembled.dropped_segments,
        cg,
        ridged: ridged.iter().map(|&j| index.label(j)).collect(),
    };
    Ok(RatingModel {
        params: params.clone(),
        reference: assembled.reference,
        index: assembled.index,
        coefficients: x,
        players,
        similar: assembled.similar,
        age_minutes: assembled.age_minutes,
        report,
    })
}

impl RatingModel {
    /// Restores lookups skipped by serialization.
    pub fn after_load(&mut self) {
        self.index.rebuild_lookup();
    }

    fn table(&self) -> Option<PlayerTable<'_>> {
        match self.index.mode {
            Mode::Novel => Some(PlayerTable::new(&self.players)),
            Mode::Plain => None,
        }
    }

    /// `f_aux(p, at, 1)`: individual term, age curve at `at`, league average.
    pub fn player_rating(&self, id: &str, at: NaiveDate) -> Result<f64, RatingError> {
        let col = self.index.player(id).ok_or_else(|| RatingError::UnknownPlayer(id.to_string()))?;
        let table = self.table();
        let info = match &table {
            Some(t) => Some(t.get(id)?),
            None => None,
        };
        let mut terms = Vec::new();
        aux_terms(&self.index, col, info, at, 1.0, 1.0, &mut terms);
        Ok(terms.iter().map(|&(j, c)| c * self.coefficients[j]).sum())
    }

    /// Ratings of every player at the reference time, best first.
    pub fn ratings(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .index
            .players
            .iter()
            .map(|p| (p.clone(), self.player_rating(p, self.reference).expect("indexed player")))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    /// Individual component only.
    pub fn individual(&self, id: &str) -> Option<f64> {
        self.index.player(id).map(|j| self.coefficients[j])
    }

    /// `(age, coefficient)` over the grid; empty in plain mode.
    pub fn age_curve(&self) -> Vec<(u32, f64)> {
        if self.index.mode == Mode::Plain {
            return Vec::new();
        }
        (self.index.age_min..=self.index.age_max)
            .map(|y| (y, self.coefficients[self.index.age(y)]))
            .collect()
    }

    /// Grid age with the highest coefficient among ages the data covers.
    /// Unobserved ages are set by regularization alone and are ignored.
    pub fn peak_age(&self) -> Option<u32> {
        let busiest = self.age_minutes.iter().copied().fold(0.0, f64::max);
        self.age_curve()
            .into_iter()
            .filter(|&(y, _)| {
                let k = (y - self.index.age_min) as usize;
                busiest > 0.0 && self.age_minutes.get(k).is_some_and(|&m| m >= AGE_SUPPORT_SHARE * busiest)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(y, _)| y)
    }

    pub fn home_advantage(&self) -> Vec<(String, f64)> {
        self.index
            .competitions
            .iter()
            .map(|c| (c.clone(), self.coefficients[self.index.home(c).expect("listed")]))
            .collect()
    }

    /// Red-card coefficients `(home side short, away side short)` for 1..=4 cards.
    pub fn red_cards(&self) -> Option<([f64; MAX_REDS], [f64; MAX_REDS])> {
        if self.index.mode == Mode::Plain {
            return None;
        }
        let mut home = [0.0; MAX_REDS];
        let mut away = [0.0; MAX_REDS];
        for n in 1..=MAX_REDS {
            home[n - 1] = self.coefficients[self.index.home_red(n)];
            away[n - 1] = self.coefficients[self.index.away_red(n)];
        }
        Some((home, away))
    }

    pub fn league_factors(&self) -> Vec<(String, f64)> {
        self.index
            .leagues
            .iter()
            .map(|b| (b.clone(), self.coefficients[self.index.league(b).expect("listed")]))
            .collect()
    }

    /// Model prediction of the segment's home goal difference (unweighted `f_lhs`).
    pub fn predict_segment(&self, seg: &SegmentRecord) -> Result<f64, RatingError> {
        self.predict_with(seg, &self.coefficients)
    }

    /// As [`Self::predict_segment`] but against an arbitrary coefficient vector.
    pub fn predict_with(&self, seg: &SegmentRecord, coefficients: &[f64]) -> Result<f64, RatingError> {
        let table = self.table();
        let terms = lhs_terms(seg, &self.index, table.as_ref())?;
        Ok(terms.iter().map(|&(j, c)| c * coefficients[j]).sum())
    }
}
