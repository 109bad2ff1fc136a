use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::RatingError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Player terms only, unit weights, ridge towards zero, segments with a
    /// player sent off discarded.
    Plain,
    /// Age curve, league factors, home advantage per competition, red-card
    /// terms, segment weights and shrinkage towards similar players.
    Novel,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" => Ok(Mode::Plain),
            "novel" => Ok(Mode::Novel),
            other => Err(format!("unknown rating mode `{other}` (expected plain or novel)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RatingParams {
    /// Yearly decay rate of the time weight.
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    /// Weight multiplier for segments played at a lopsided score.
    pub rho4: f64,
    pub lambda: f64,
    pub w_similar: f64,
    pub w_age: f64,
    pub max_similar: usize,
    pub age_min: u32,
    pub age_max: u32,
    /// Time the ratings refer to; defaults to the latest match in the corpus.
    pub reference: Option<NaiveDate>,
    pub cg_tolerance: f64,
    pub cg_max_iterations: usize,
}

impl Default for RatingParams {
    fn default() -> Self {
        Self {
            rho1: 0.1,
            rho2: 300.0,
            rho3: 300.0,
            rho4: 2.5,
            lambda: 16.0,
            w_similar: 0.85,
            w_age: 0.35,
            max_similar: 35,
            age_min: 16,
            age_max: 42,
            reference: None,
            cg_tolerance: 1e-8,
            cg_max_iterations: 20_000,
        }
    }
}

impl RatingParams {
    pub fn validate(&self) -> Result<(), RatingError> {
        let bad = |m: String| Err(RatingError::InvalidParams(m));
        if !(self.lambda > 0.0) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.w_similar <= 1.0) || self.w_similar < 0.0 {
            return bad(format!("w_similar must lie in [0, 1], got {}", self.w_similar));
        }
        if self.age_min >= self.age_max {
            return bad(format!("age grid {}..{} is empty", self.age_min, self.age_max));
        }
        if !(self.rho3 > 0.0) || self.rho1 < 0.0 || self.rho4 <= 0.0 {
            return bad("rho1 must be non-negative and rho3, rho4 positive".into());
        }
        if !(self.cg_tolerance > 0.0) {
            return bad("cg tolerance must be positive".into());
        }
        Ok(())
    }

    pub fn grid_len(&self) -> usize {
        (self.age_max - self.age_min + 1) as usize
    }
}
