use serde::{Deserialize, Serialize};

use crate::MilpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectiveSense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

impl RowSense {
    pub fn symbol(self) -> &'static str {
        match self {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    /// Sparse `(variable index, coefficient)` pairs.
    pub terms: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `activity` misses the right-hand side (zero when satisfied).
    pub fn violation(&self, activity: f64) -> f64 {
        match self.sense {
            RowSense::Le => (activity - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - activity).max(0.0),
            RowSense::Eq => (activity - self.rhs).abs(),
        }
    }
}

/// A violated row found by [`MilpProblem::verify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowViolation {
    pub row: usize,
    pub name: String,
    pub activity: f64,
    pub rhs: f64,
    pub violation: f64,
}

/// A linear program over bounded variables, some of them binary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpProblem {
    pub name: String,
    pub sense: ObjectiveSense,
    pub variables: Vec<Variable>,
    /// Sparse objective coefficients.
    pub objective: Vec<(usize, f64)>,
    pub constraints: Vec<Constraint>,
}

impl MilpProblem {
    pub fn new(name: impl Into<String>, sense: ObjectiveSense) -> Self {
        Self {
            name: name.into(),
            sense,
            variables: Vec::new(),
            objective: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> usize {
        self.add_variable(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_variable(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            kind,
            lower,
            upper,
        });
        self.variables.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        sense: RowSense,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn constraint_index(&self, name: &str) -> Option<usize> {
        self.constraints.iter().position(|c| c.name == name)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Structural sanity: indices in range, non-empty domains, finite data.
    pub fn check(&self) -> Result<(), MilpError> {
        let count = self.variables.len();
        let in_range = |index: usize| {
            if index < count {
                Ok(())
            } else {
                Err(MilpError::UnknownVariable { index, count })
            }
        };
        for v in &self.variables {
            if v.lower > v.upper || v.lower.is_nan() || v.upper.is_nan() {
                return Err(MilpError::EmptyDomain(v.name.clone()));
            }
        }
        for &(j, c) in &self.objective {
            in_range(j)?;
            if !c.is_finite() {
                return Err(MilpError::InvalidParams(format!("objective coefficient of variable {j} is not finite")));
            }
        }
        for c in &self.constraints {
            for &(j, a) in &c.terms {
                in_range(j)?;
                if !a.is_finite() {
                    return Err(MilpError::InvalidParams(format!("row `{}` has a non-finite coefficient", c.name)));
                }
            }
            if !c.rhs.is_finite() {
                return Err(MilpError::InvalidParams(format!("row `{}` has a non-finite right-hand side", c.name)));
            }
        }
        Ok(())
    }

    /// Recomputes every row from scratch and reports the worst violation
    /// above `tol`, if any. Variable bounds are checked too and reported with
    /// the variable's name.
    pub fn verify(&self, x: &[f64], tol: f64) -> Result<(), RowViolation> {
        let mut worst: Option<RowViolation> = None;
        for (row, c) in self.constraints.iter().enumerate() {
            let activity = c.activity(x);
            let violation = c.violation(activity);
            if violation > tol && worst.as_ref().is_none_or(|w| violation > w.violation) {
                worst = Some(RowViolation {
                    row,
                    name: c.name.clone(),
                    activity,
                    rhs: c.rhs,
                    violation,
                });
            }
        }
        if let Some(w) = worst {
            return Err(w);
        }
        for (j, v) in self.variables.iter().enumerate() {
            let violation = (v.lower - x[j]).max(x[j] - v.upper).max(0.0);
            if violation > tol {
                return Err(RowViolation {
                    row: usize::MAX,
                    name: format!("bound({})", v.name),
                    activity: x[j],
                    rhs: if x[j] < v.lower { v.lower } else { v.upper },
                    violation,
                });
            }
        }
        Ok(())
    }

    pub fn binary_indices(&self) -> Vec<usize> {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(j, _)| j)
            .collect()
    }
}
