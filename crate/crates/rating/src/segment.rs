use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::{RatingError, RatingParams};

pub const DAYS_PER_YEAR: f64 = 365.25;

pub fn years_between(from: NaiveDate, to: NaiveDate) -> f64 {
    (to - from).num_days() as f64 / DAYS_PER_YEAR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerInfo {
    pub id: String,
    pub name: String,
    pub birth: NaiveDate,
    /// Leagues the player has appeared in.
    pub leagues: Vec<String>,
}

impl PlayerInfo {
    pub fn age_at(&self, date: NaiveDate) -> f64 {
        years_between(self.birth, date)
    }
}

/// A stretch of a match with unchanged lineups on both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub match_id: String,
    pub date: NaiveDate,
    /// Country or competition type; home advantage is estimated per value.
    pub competition: String,
    pub home_team: String,
    pub away_team: String,
    pub segment: u32,
    /// Minutes.
    pub duration: f64,
    pub home_players: Vec<String>,
    pub away_players: Vec<String>,
    pub home_goals: u32,
    pub away_goals: u32,
    /// Home minus away goals when the segment starts.
    pub start_diff: i32,
    /// Players sent off so far.
    pub home_reds: u32,
    pub away_reds: u32,
    /// False for neutral venues.
    pub home_advantage: bool,
}

impl SegmentRecord {
    pub fn goal_diff(&self) -> i32 {
        self.home_goals as i32 - self.away_goals as i32
    }

    pub fn end_diff(&self) -> i32 {
        self.start_diff + self.goal_diff()
    }

    pub fn has_red_card(&self) -> bool {
        self.home_reds > 0 || self.away_reds > 0
    }

    pub(crate) fn bad(&self, message: impl Into<String>) -> RatingError {
        RatingError::BadSegment {
            match_id: self.match_id.clone(),
            segment: self.segment,
            message: message.into(),
        }
    }

    pub fn check(&self) -> Result<(), RatingError> {
        if !(self.duration >= 0.0) {
            return Err(self.bad(format!("negative duration {}", self.duration)));
        }
        for (side, players) in [("home", &self.home_players), ("away", &self.away_players)] {
            if players.is_empty() || players.len() > 11 {
                return Err(self.bad(format!("{side} side has {} players on the pitch", players.len())));
            }
        }
        Ok(())
    }
}

/// Match segments plus the player table they reference.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub players: Vec<PlayerInfo>,
    pub segments: Vec<SegmentRecord>,
}

impl Corpus {
    pub fn latest_date(&self) -> Option<NaiveDate> {
        self.segments.iter().map(|s| s.date).max()
    }

    /// Distinct match ids in order of first appearance.
    pub fn match_ids(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        self.segments
            .iter()
            .filter(|s| seen.insert(s.match_id.as_str()))
            .map(|s| s.match_id.clone())
            .collect()
    }

    /// Sub-corpus holding only the listed matches; the player table is kept whole.
    pub fn restrict(&self, matches: &std::collections::HashSet<String>) -> Corpus {
        Corpus {
            players: self.players.clone(),
            segments: self.segments.iter().filter(|s| matches.contains(&s.match_id)).cloned().collect(),
        }
    }
}

/// `w = w_time * w_duration * w_goals` for one segment, with time measured in
/// years before `reference`.
pub fn segment_weight(seg: &SegmentRecord, params: &RatingParams, reference: NaiveDate) -> Result<f64, RatingError> {
    if seg.date > reference {
        return Err(RatingError::FutureMatch {
            match_id: seg.match_id.clone(),
        });
    }
    if !(seg.duration >= 0.0) {
        return Err(seg.bad("negative duration"));
    }
    // Older matches weigh less, hence the negative exponent.
    let w_time = (-params.rho1 * years_between(seg.date, reference)).exp();
    let w_duration = (seg.duration + params.rho2) / params.rho3;
    let w_goals = if seg.start_diff.abs() >= 2 && seg.end_diff().abs() >= 2 {
        params.rho4
    } else {
        1.0
    };
    Ok(w_time * w_duration * w_goals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(start: i32, home: u32, away: u32) -> SegmentRecord {
        SegmentRecord {
            match_id: "m".into(),
            date: NaiveDate::from_ymd_opt(2014, 7, 1).unwrap(),
            competition: "ENG".into(),
            home_team: "A".into(),
            away_team: "B".into(),
            segment: 0,
            duration: 0.0,
            home_players: vec!["h".into()],
            away_players: vec!["a".into()],
            home_goals: home,
            away_goals: away,
            start_diff: start,
            home_reds: 0,
            away_reds: 0,
            home_advantage: true,
        }
    }

    #[test]
    fn weight_components() {
        let p = RatingParams::default();
        let t = NaiveDate::from_ymd_opt(2014, 7, 1).unwrap();
        assert_eq!(segment_weight(&seg(0, 0, 0), &p, t).unwrap(), 1.0);
        assert_eq!(segment_weight(&seg(2, 1, 0), &p, t).unwrap(), 2.5);
        assert_eq!(segment_weight(&seg(2, 0, 1), &p, t).unwrap(), 1.0);
        let mut s = seg(0, 0, 0);
        s.duration = 90.0;
        assert!((segment_weight(&s, &p, t).unwrap() - 1.3).abs() < 1e-15);
    }

    #[test]
    fn older_matches_weigh_less() {
        let p = RatingParams::default();
        let mut s = seg(0, 0, 0);
        s.date = NaiveDate::from_ymd_opt(2013, 7, 1).unwrap();
        let t = NaiveDate::from_ymd_opt(2014, 7, 1).unwrap();
        let w = segment_weight(&s, &p, t).unwrap();
        assert!((w - (-0.1f64 * 365.0 / DAYS_PER_YEAR).exp()).abs() < 1e-12);
        assert!(w < 1.0);
        assert!(matches!(segment_weight(&s, &p, s.date.pred_opt().unwrap()), Err(RatingError::FutureMatch { .. })));
    }
}
