use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::MilpError;

/// What the search does once the incumbent is within the relative gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Emphasis {
    /// Keep exploring until the tree is exhausted, so the reported bound
    /// meets the incumbent. Only the time and node limits stop it early.
    ProveOptimality,
    /// Stop as soon as the gap target is met.
    FindFeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    pub relative_gap: f64,
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    pub time_limit_secs: f64,
    pub node_limit: Option<u64>,
    pub emphasis: Emphasis,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            relative_gap: 0.005,
            feasibility_tol: 1e-6,
            integrality_tol: 1e-5,
            time_limit_secs: 3600.0,
            node_limit: None,
            emphasis: Emphasis::ProveOptimality,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), MilpError> {
        if !(0.0..1.0).contains(&self.relative_gap) {
            return Err(MilpError::InvalidParams(format!(
                "relative gap must lie in [0, 1), got {}",
                self.relative_gap
            )));
        }
        for (name, v) in [
            ("feasibility tolerance", self.feasibility_tol),
            ("integrality tolerance", self.integrality_tol),
            ("time limit", self.time_limit_secs),
        ] {
            if !(v > 0.0) {
                return Err(MilpError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if self.integrality_tol >= 0.5 {
            return Err(MilpError::InvalidParams("integrality tolerance must be below 0.5".into()));
        }
        Ok(())
    }

    pub fn time_limit(&self) -> Duration {
        Duration::from_secs_f64(self.time_limit_secs.min(1e9))
    }
}
