use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Player, Role};

/// Smallest relative error used when sampling, so values stay non-negative.
pub const EPSILON_FLOOR: f64 = -1.0 + 1e-9;

/// Upper age bounds of the eight buckets; the last bucket is open.
const GROUP_UPPER: [u32; 7] = [20, 22, 24, 26, 28, 30, 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgeGroup(pub u8);

impl AgeGroup {
    pub const COUNT: usize = 8;

    /// Bucket of an age in years; fractional ages fall with their whole year.
    pub fn of(age: f64) -> AgeGroup {
        let whole = age.floor().max(0.0) as u32;
        AgeGroup(GROUP_UPPER.iter().take_while(|&&u| whole > u).count() as u8)
    }

    pub fn all() -> impl Iterator<Item = AgeGroup> {
        (0..Self::COUNT as u8).map(AgeGroup)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// `(lower, upper)` whole-year bounds; `None` is open.
    pub fn bounds(self) -> (Option<u32>, Option<u32>) {
        let k = self.index();
        let lower = (k > 0).then(|| GROUP_UPPER[k - 1] + 1);
        let upper = GROUP_UPPER.get(k).copied();
        (lower, upper)
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.bounds() {
            (None, Some(u)) => write!(f, "<={u}"),
            (Some(l), Some(u)) => write!(f, "{l}-{u}"),
            (Some(l), None) => write!(f, ">={l}"),
            (None, None) => f.write_str("all"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupModel {
    /// Coefficient on the fourth root of the current value.
    pub slope: f64,
    pub role_constants: BTreeMap<Role, f64>,
    /// Roles left out of this group's fit because no row had them.
    #[serde(default)]
    pub dropped_roles: Vec<Role>,
    /// Relative errors `actual / predicted - 1` on the original scale.
    pub errors: Vec<f64>,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueModel {
    /// One entry per age group, youngest first.
    pub groups: Vec<GroupModel>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValueError {
    #[error("player `{player}`: negative base {base} before the fourth power")]
    NegativeBase { player: String, base: f64 },
    #[error("relative error {0} must exceed -1")]
    Epsilon(f64),
    #[error("value model needs {expected} age groups, found {found}")]
    GroupCount { expected: usize, found: usize },
    #[error("age group {group} has no stored errors")]
    NoErrors { group: AgeGroup },
    #[error("age group {group}: {rows} rows cannot fit {params} coefficients")]
    TooFewRows { group: AgeGroup, rows: usize, params: usize },
    #[error("history row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("scenario count must be at least 1")]
    NoScenarios,
}

impl ValueModel {
    pub fn check(&self) -> Result<(), ValueError> {
        if self.groups.len() != AgeGroup::COUNT {
            return Err(ValueError::GroupCount {
                expected: AgeGroup::COUNT,
                found: self.groups.len(),
            });
        }
        for group in AgeGroup::all() {
            if self.groups[group.index()].errors.is_empty() {
                return Err(ValueError::NoErrors { group });
            }
        }
        Ok(())
    }

    pub fn group(&self, age: f64) -> &GroupModel {
        &self.groups[AgeGroup::of(age).index()]
    }
}

/// `(α·V^¼ + Σ_r β_r)^4 · (1 + ε)`, summing constants over all of the player's roles.
pub fn predict_value(model: &ValueModel, player: &Player, epsilon: f64) -> Result<f64, ValueError> {
    if !(epsilon >= -1.0) {
        return Err(ValueError::Epsilon(epsilon));
    }
    let g = model.group(player.age);
    let constants: f64 = player.roles.iter().filter_map(|r| g.role_constants.get(r)).sum();
    let base = g.slope * player.current_value.as_f64().max(0.0).powf(0.25) + constants;
    if base < 0.0 {
        return Err(ValueError::NegativeBase {
            player: player.id.clone(),
            base,
        });
    }
    Ok(base.powi(4) * (1.0 + epsilon))
}

/// One observed year-on-year value change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub age: f64,
    pub roles: BTreeSet<Role>,
    pub value_now: f64,
    pub value_next: f64,
}

/// Per-group least squares of `next^¼` on `now^¼` and role indicators, without an intercept.
pub fn fit_value_model(history: &[HistoryRow]) -> Result<ValueModel, ValueError> {
    for (row, h) in history.iter().enumerate() {
        if !(h.value_now >= 0.0 && h.value_next >= 0.0) {
            return Err(ValueError::BadRow {
                row,
                message: "values must be non-negative".into(),
            });
        }
        if h.roles.is_empty() {
            return Err(ValueError::BadRow {
                row,
                message: "no roles".into(),
            });
        }
    }
    let mut groups = Vec::with_capacity(AgeGroup::COUNT);
    for group in AgeGroup::all() {
        let rows: Vec<&HistoryRow> = history.iter().filter(|h| AgeGroup::of(h.age) == group).collect();
        groups.push(fit_group(group, &rows)?);
    }
    Ok(ValueModel { groups })
}

fn fit_group(group: AgeGroup, rows: &[&HistoryRow]) -> Result<GroupModel, ValueError> {
    let present: BTreeSet<Role> = rows.iter().flat_map(|h| h.roles.iter().copied()).collect();
    let roles: Vec<Role> = present.iter().copied().collect();
    let dropped_roles: Vec<Role> = Role::ALL.into_iter().filter(|r| !present.contains(r)).collect();
    let params = roles.len() + 1;
    if rows.len() < params {
        return Err(ValueError::TooFewRows {
            group,
            rows: rows.len(),
            params,
        });
    }
    let x = DMatrix::from_fn(rows.len(), params, |i, j| match j {
        0 => rows[i].value_now.powf(0.25),
        _ => f64::from(u8::from(rows[i].roles.contains(&roles[j - 1]))),
    });
    let y = DVector::from_fn(rows.len(), |i, _| rows[i].value_next.powf(0.25));
    // Minimum-norm least squares; duplicated rows leave the fit perfect but not unique.
    let svd = x.clone().svd(true, true);
    let tol = 1e-12 * svd.singular_values.max().max(1.0) * rows.len() as f64;
    let beta = svd.solve(&y, tol).expect("both factors computed");
    let fitted = &x * &beta;

    let ss_res: f64 = (&y - &fitted).iter().map(|r| r * r).sum();
    let mean = y.mean();
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let scale: f64 = y.iter().map(|v| v * v).sum::<f64>().max(1.0);
    let r_squared = if ss_res <= 1e-20 * scale {
        1.0
    } else if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        0.0
    };
    let errors: Vec<f64> = rows
        .iter()
        .zip(fitted.iter())
        .filter_map(|(h, f)| {
            let predicted = f.max(0.0).powi(4);
            (predicted > 0.0).then(|| h.value_next / predicted - 1.0)
        })
        .collect();
    Ok(GroupModel {
        slope: beta[0],
        role_constants: roles.iter().enumerate().map(|(k, r)| (*r, beta[k + 1])).collect(),
        dropped_roles,
        errors,
        r_squared,
    })
}

/// Sampled future values, `values[player][scenario]`, in thousands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub values: Vec<Vec<f64>>,
    pub seed: u64,
}

impl ScenarioSet {
    pub fn num_scenarios(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn num_players(&self) -> usize {
        self.values.len()
    }

    /// `Σ_p V_ps` over the selected players.
    pub fn team_value(&self, scenario: usize, selected: &[bool]) -> f64 {
        self.values
            .iter()
            .zip(selected)
            .filter(|(_, &s)| s)
            .map(|(v, _)| v[scenario])
            .sum()
    }
}

/// Draws every `V_ps` with ε resampled uniformly from the player's age-group errors.
/// Scenarios are drawn in order, so a longer set extends a shorter one with the same seed.
pub fn sample_scenarios(model: &ValueModel, players: &[Player], count: usize, seed: u64) -> Result<ScenarioSet, ValueError> {
    if count == 0 {
        return Err(ValueError::NoScenarios);
    }
    model.check()?;
    let base: Vec<f64> = players.iter().map(|p| predict_value(model, p, 0.0)).collect::<Result<_, _>>()?;
    let errors: Vec<&[f64]> = players.iter().map(|p| model.group(p.age).errors.as_slice()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![Vec::with_capacity(count); players.len()];
    for _ in 0..count {
        for (p, column) in values.iter_mut().enumerate() {
            let e = errors[p][rng.random_range(0..errors[p].len())];
            column.push(base[p] * (1.0 + e.max(EPSILON_FLOOR)));
        }
    }
    Ok(ScenarioSet { values, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buckets_partition_ages() {
        let cases = [(17.0, 0), (20.9, 0), (21.0, 1), (22.5, 1), (23.0, 2), (26.99, 3), (27.0, 4), (32.0, 6), (33.0, 7), (40.0, 7)];
        for (age, group) in cases {
            assert_eq!(AgeGroup::of(age), AgeGroup(group), "age {age}");
        }
        let labels: Vec<String> = AgeGroup::all().map(|g| g.to_string()).collect();
        assert_eq!(labels, ["<=20", "21-22", "23-24", "25-26", "27-28", "29-30", "31-32", ">=33"]);
    }
}
