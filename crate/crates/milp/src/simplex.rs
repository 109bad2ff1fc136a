//! Bounded-variable revised simplex over an explicit basis inverse.
//!
//! Every row `i` of the problem gets a logical variable `s_i` so that the
//! system reads `A x - s = 0` with the row's bounds carried by `s_i`. The
//! slack basis (`B = -I`) is therefore always available as a starting point.
//! Rows are equilibrated so that their largest coefficient is one.

use serde::{Deserialize, Serialize};

use crate::{MilpError, MilpProblem, ObjectiveSense, RowSense};

const PIVOT_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const STALL_BEFORE_BLAND: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Status {
    Basic,
    AtLower,
    AtUpper,
    Free,
}

/// Snapshot of a simplex basis, used to warm-start later solves.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Basis {
    status: Vec<Status>,
    basic: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

pub(crate) struct StandardForm {
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    /// Minimization costs for structurals followed by zeros for logicals.
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl StandardForm {
    pub(crate) fn new(problem: &MilpProblem) -> Self {
        let n = problem.num_variables();
        let m = problem.num_constraints();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        for v in &problem.variables {
            lower.push(v.lower);
            upper.push(v.upper);
        }
        for (i, c) in problem.constraints.iter().enumerate() {
            let biggest = c.terms.iter().fold(0.0f64, |acc, &(_, a)| acc.max(a.abs()));
            let scale = if biggest > 0.0 { 1.0 / biggest } else { 1.0 };
            // Merge duplicate indices so each column holds one entry per row.
            let mut merged: Vec<(usize, f64)> = c.terms.clone();
            merged.sort_by_key(|&(j, _)| j);
            merged.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            for (j, a) in merged {
                if a != 0.0 {
                    cols[j].push((i, a * scale));
                }
            }
            let rhs = c.rhs * scale;
            let (lo, up) = match c.sense {
                RowSense::Le => (f64::NEG_INFINITY, rhs),
                RowSense::Ge => (rhs, f64::INFINITY),
                RowSense::Eq => (rhs, rhs),
            };
            lower.push(lo);
            upper.push(up);
        }
        let sign = match problem.sense {
            ObjectiveSense::Maximize => -1.0,
            ObjectiveSense::Minimize => 1.0,
        };
        let mut cost = vec![0.0; n + m];
        for &(j, c) in &problem.objective {
            cost[j] += sign * c;
        }
        Self {
            n,
            m,
            cols,
            cost,
            lower,
            upper,
        }
    }

    pub(crate) fn num_structural(&self) -> usize {
        self.n
    }

    pub(crate) fn root_lower(&self, j: usize) -> f64 {
        self.lower[j]
    }

    pub(crate) fn root_upper(&self, j: usize) -> f64 {
        self.upper[j]
    }
}

/// The working state of one simplex run.
pub(crate) struct Simplex<'a> {
    sf: &'a StandardForm,
    lower: Vec<f64>,
    upper: Vec<f64>,
    status: Vec<Status>,
    basic: Vec<usize>,
    /// Row-major `m x m` inverse of the basis matrix.
    binv: Vec<f64>,
    x: Vec<f64>,
    since_refactor: usize,
    pub(crate) iterations: usize,
    max_iterations: usize,
}

impl<'a> Simplex<'a> {
    pub(crate) fn new(sf: &'a StandardForm) -> Self {
        let total = sf.n + sf.m;
        let mut s = Self {
            sf,
            lower: sf.lower.clone(),
            upper: sf.upper.clone(),
            status: vec![Status::AtLower; total],
            basic: Vec::new(),
            binv: Vec::new(),
            x: vec![0.0; total],
            since_refactor: 0,
            iterations: 0,
            max_iterations: 50 * total + 10_000,
        };
        s.slack_basis();
        s
    }

    /// All logicals basic; structurals sit at the bound that makes their
    /// reduced cost dual feasible, when such a bound exists.
    fn slack_basis(&mut self) {
        let (n, m) = (self.sf.n, self.sf.m);
        for j in 0..n {
            let c = self.sf.cost[j];
            self.status[j] = if c >= 0.0 && self.lower[j].is_finite() {
                Status::AtLower
            } else if c < 0.0 && self.upper[j].is_finite() {
                Status::AtUpper
            } else if self.lower[j].is_finite() {
                Status::AtLower
            } else if self.upper[j].is_finite() {
                Status::AtUpper
            } else {
                Status::Free
            };
        }
        self.basic = (n..n + m).collect();
        for i in 0..m {
            self.status[n + i] = Status::Basic;
        }
        self.binv = vec![0.0; m * m];
        for i in 0..m {
            self.binv[i * m + i] = -1.0;
        }
        self.since_refactor = 0;
    }

    pub(crate) fn set_bounds(&mut self, lower: &[f64], upper: &[f64]) {
        let n = self.sf.n;
        self.lower[..n].copy_from_slice(lower);
        self.upper[..n].copy_from_slice(upper);
    }

    pub(crate) fn basis(&self) -> Basis {
        Basis {
            status: self.status.clone(),
            basic: self.basic.clone(),
        }
    }

    pub(crate) fn load_basis(&mut self, basis: &Basis) {
        self.status.clone_from(&basis.status);
        self.basic.clone_from(&basis.basic);
        if !self.refactor() {
            self.slack_basis();
        }
    }

    pub(crate) fn structural_values(&self) -> &[f64] {
        &self.x[..self.sf.n]
    }

    /// Reduced costs of the structurals in the minimization form.
    pub(crate) fn reduced_costs(&self) -> Vec<f64> {
        let cb: Vec<f64> = self.basic.iter().map(|&j| self.sf.cost[j]).collect();
        let y = self.btran(&cb);
        (0..self.sf.n).map(|j| self.sf.cost[j] - self.dot_column(&y, j)).collect()
    }

    /// Current objective in the minimization form used internally.
    pub(crate) fn min_objective(&self) -> f64 {
        (0..self.sf.n).map(|j| self.sf.cost[j] * self.x[j]).sum()
    }

    fn column(&self, j: usize) -> ColumnIter<'_> {
        if j < self.sf.n {
            ColumnIter::Structural(self.sf.cols[j].iter())
        } else {
            ColumnIter::Logical(Some(j - self.sf.n))
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            Status::AtLower => self.lower[j],
            Status::AtUpper => self.upper[j],
            Status::Free => 0.0,
            Status::Basic => self.x[j],
        }
    }

    /// Makes every nonbasic status consistent with the current bounds.
    fn normalize_statuses(&mut self) {
        for j in 0..self.status.len() {
            let (lo, up) = (self.lower[j], self.upper[j]);
            self.status[j] = match self.status[j] {
                Status::Basic => Status::Basic,
                Status::AtLower if lo.is_finite() => Status::AtLower,
                Status::AtUpper if up.is_finite() => Status::AtUpper,
                _ if lo.is_finite() => Status::AtLower,
                _ if up.is_finite() => Status::AtUpper,
                _ => Status::Free,
            };
        }
    }

    /// Rebuilds the basis inverse by Gauss-Jordan elimination with partial
    /// pivoting. Returns false when the basis is numerically singular.
    fn refactor(&mut self) -> bool {
        let m = self.sf.m;
        let w = 2 * m;
        let mut aug = vec![0.0; m * w];
        for (k, &j) in self.basic.iter().enumerate() {
            for (i, a) in self.column(j) {
                aug[i * w + k] = a;
            }
        }
        for i in 0..m {
            aug[i * w + m + i] = 1.0;
        }
        for k in 0..m {
            let mut piv = k;
            let mut best = aug[k * w + k].abs();
            for i in k + 1..m {
                let v = aug[i * w + k].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best < 1e-11 {
                return false;
            }
            if piv != k {
                for c in 0..w {
                    aug.swap(k * w + c, piv * w + c);
                }
            }
            let p = aug[k * w + k];
            for c in 0..w {
                aug[k * w + c] /= p;
            }
            let pivot_row: Vec<(usize, f64)> = (0..w)
                .filter_map(|c| {
                    let v = aug[k * w + c];
                    (v != 0.0).then_some((c, v))
                })
                .collect();
            for i in 0..m {
                if i == k {
                    continue;
                }
                let f = aug[i * w + k];
                if f == 0.0 {
                    continue;
                }
                for &(c, v) in &pivot_row {
                    aug[i * w + c] -= f * v;
                }
            }
        }
        self.binv.resize(m * m, 0.0);
        for i in 0..m {
            self.binv[i * m..(i + 1) * m].copy_from_slice(&aug[i * w + m..(i + 1) * w]);
        }
        self.since_refactor = 0;
        true
    }

    fn compute_primal(&mut self) {
        let m = self.sf.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.status.len() {
            if self.status[j] == Status::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v != 0.0 {
                for (i, a) in self.column(j) {
                    rhs[i] -= a * v;
                }
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&rhs).map(|(b, r)| b * r).sum();
            self.x[self.basic[i]] = v;
        }
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.sf.m;
        let mut alpha = vec![0.0; m];
        for (k, a) in self.column(j) {
            for (i, out) in alpha.iter_mut().enumerate() {
                *out += self.binv[i * m + k] * a;
            }
        }
        alpha
    }

    fn btran(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.sf.m;
        let mut y = vec![0.0; m];
        for (i, &c) in cb.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = &self.binv[i * m..(i + 1) * m];
            for (yk, b) in y.iter_mut().zip(row) {
                *yk += c * b;
            }
        }
        y
    }

    fn dot_column(&self, y: &[f64], j: usize) -> f64 {
        self.column(j).map(|(i, a)| y[i] * a).sum()
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.sf.m;
        let p = alpha[r];
        for c in 0..m {
            self.binv[r * m + c] /= p;
        }
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        for (i, row) in before.chunks_mut(m).enumerate() {
            let f = alpha[i];
            if f != 0.0 {
                for (b, pr) in row.iter_mut().zip(prow.iter()) {
                    *b -= f * pr;
                }
            }
        }
        for (off, row) in after.chunks_mut(m).enumerate() {
            let f = alpha[r + 1 + off];
            if f != 0.0 {
                for (b, pr) in row.iter_mut().zip(prow.iter()) {
                    *b -= f * pr;
                }
            }
        }
        self.since_refactor += 1;
    }

    fn maybe_refactor(&mut self) {
        if self.since_refactor >= REFACTOR_EVERY {
            if !self.refactor() {
                self.slack_basis();
            }
            self.compute_primal();
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        (self.lower[j] - self.x[j]).max(self.x[j] - self.upper[j]).max(0.0)
    }

    fn primal_feasible(&self) -> bool {
        self.basic.iter().all(|&j| self.infeasibility(j) <= PRIMAL_TOL)
    }

    fn reduced_costs_dual_feasible(&self) -> bool {
        let cb: Vec<f64> = self.basic.iter().map(|&j| self.sf.cost[j]).collect();
        let y = self.btran(&cb);
        (0..self.status.len()).all(|j| {
            if self.lower[j] == self.upper[j] {
                return true;
            }
            let d = self.sf.cost[j] - self.dot_column(&y, j);
            match self.status[j] {
                Status::Basic => true,
                Status::AtLower => d >= -DUAL_TOL,
                Status::AtUpper => d <= DUAL_TOL,
                Status::Free => d.abs() <= DUAL_TOL,
            }
        })
    }

    fn check_iterations(&mut self) -> Result<(), MilpError> {
        self.iterations += 1;
        if self.iterations > self.max_iterations {
            Err(MilpError::IterationLimit(self.iterations))
        } else {
            Ok(())
        }
    }

    pub(crate) fn solve(&mut self) -> Result<LpStatus, MilpError> {
        self.iterations = 0;
        self.normalize_statuses();
        self.compute_primal();
        if !self.primal_feasible() && self.reduced_costs_dual_feasible() && !self.dual()? {
            return Ok(LpStatus::Infeasible);
        }
        self.primal()
    }

    /// Composite primal simplex: minimizes the sum of infeasibilities while
    /// any basic variable is out of bounds, the true cost afterwards.
    fn primal(&mut self) -> Result<LpStatus, MilpError> {
        let total = self.status.len();
        let m = self.sf.m;
        let mut degenerate = 0usize;
        let mut verified = false;
        loop {
            self.check_iterations()?;
            self.maybe_refactor();

            let mut cb = vec![0.0; m];
            let mut phase1 = false;
            for (i, &j) in self.basic.iter().enumerate() {
                if self.x[j] < self.lower[j] - PRIMAL_TOL {
                    cb[i] = -1.0;
                    phase1 = true;
                } else if self.x[j] > self.upper[j] + PRIMAL_TOL {
                    cb[i] = 1.0;
                    phase1 = true;
                }
            }
            if !phase1 {
                for (i, &j) in self.basic.iter().enumerate() {
                    cb[i] = self.sf.cost[j];
                }
            }
            let y = self.btran(&cb);
            let bland = degenerate > STALL_BEFORE_BLAND;

            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..total {
                let st = self.status[j];
                if st == Status::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let c = if phase1 { 0.0 } else { self.sf.cost[j] };
                let d = c - self.dot_column(&y, j);
                let dir = match st {
                    Status::AtLower if d < -DUAL_TOL => 1.0,
                    Status::AtUpper if d > DUAL_TOL => -1.0,
                    Status::Free if d.abs() > DUAL_TOL => -d.signum(),
                    _ => continue,
                };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = Some((j, dir));
                }
            }

            let Some((q, dir)) = entering else {
                if !verified && self.since_refactor > 0 {
                    verified = true;
                    if !self.refactor() {
                        self.slack_basis();
                    }
                    self.compute_primal();
                    continue;
                }
                return Ok(if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal });
            };
            verified = false;

            let alpha = self.ftran(q);
            // Harris two-pass ratio test. `limit(i, slack)` is the step at
            // which basic `i` reaches its blocking bound, widened by `slack`.
            let blocking = |s: &Self, i: usize, slack: f64| -> Option<(f64, bool)> {
                let a = alpha[i];
                if a.abs() < PIVOT_TOL {
                    return None;
                }
                let rate = -dir * a;
                let j = s.basic[i];
                let (xv, lo, up) = (s.x[j], s.lower[j], s.upper[j]);
                if rate < 0.0 {
                    if xv > up + PRIMAL_TOL {
                        Some((((xv - up) + slack) / -rate, true))
                    } else if xv >= lo - PRIMAL_TOL && lo.is_finite() {
                        Some((((xv - lo).max(0.0) + slack) / -rate, false))
                    } else {
                        None
                    }
                } else if xv < lo - PRIMAL_TOL {
                    Some((((lo - xv) + slack) / rate, false))
                } else if xv <= up + PRIMAL_TOL && up.is_finite() {
                    Some((((up - xv).max(0.0) + slack) / rate, true))
                } else {
                    None
                }
            };
            let mut theta_max = f64::INFINITY;
            for i in 0..m {
                if let Some((t, _)) = blocking(self, i, if bland { 0.0 } else { PRIMAL_TOL }) {
                    theta_max = theta_max.min(t);
                }
            }
            let mut leave: Option<(usize, f64, bool)> = None;
            for i in 0..m {
                if let Some((t, to_upper)) = blocking(self, i, 0.0) {
                    if t > theta_max {
                        continue;
                    }
                    let better = match leave {
                        None => true,
                        Some((r, tr, _)) => {
                            if bland {
                                t < tr || (t == tr && self.basic[i] < self.basic[r])
                            } else {
                                alpha[i].abs() > alpha[r].abs()
                            }
                        }
                    };
                    if better {
                        leave = Some((i, t, to_upper));
                    }
                }
            }
            let flip = self.upper[q] - self.lower[q];
            let step_leave = leave.map(|(_, t, _)| t).unwrap_or(f64::INFINITY);
            if flip.is_finite() && flip <= step_leave {
                // Bound flip: the entering variable crosses to its other bound.
                for i in 0..m {
                    let j = self.basic[i];
                    self.x[j] -= dir * flip * alpha[i];
                }
                self.status[q] = if dir > 0.0 { Status::AtUpper } else { Status::AtLower };
                self.x[q] = self.nonbasic_value(q);
                degenerate = 0;
                continue;
            }
            let Some((r, t, to_upper)) = leave else {
                if phase1 {
                    // Cannot happen for a consistent phase-one direction;
                    // restart from a clean factorization.
                    if !self.refactor() {
                        self.slack_basis();
                    }
                    self.compute_primal();
                    degenerate += 1;
                    continue;
                }
                return Ok(LpStatus::Unbounded);
            };
            if t <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for i in 0..m {
                let j = self.basic[i];
                self.x[j] -= dir * t * alpha[i];
            }
            self.x[q] += dir * t;
            let leaving = self.basic[r];
            if to_upper {
                self.status[leaving] = Status::AtUpper;
                self.x[leaving] = self.upper[leaving];
            } else {
                self.status[leaving] = Status::AtLower;
                self.x[leaving] = self.lower[leaving];
            }
            self.basic[r] = q;
            self.status[q] = Status::Basic;
            self.pivot(r, &alpha);
        }
    }

    /// Dual simplex from a dual feasible basis. Returns false when the
    /// problem is primal infeasible.
    fn dual(&mut self) -> Result<bool, MilpError> {
        let total = self.status.len();
        let m = self.sf.m;
        let mut degenerate = 0usize;
        loop {
            self.check_iterations()?;
            self.maybe_refactor();
            let bland = degenerate > STALL_BEFORE_BLAND;

            let mut leave: Option<(usize, f64)> = None;
            for (i, &j) in self.basic.iter().enumerate() {
                let inf = self.infeasibility(j);
                if inf <= PRIMAL_TOL {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((r, best)) => {
                        if bland {
                            j < self.basic[r]
                        } else {
                            inf > best
                        }
                    }
                };
                if better {
                    leave = Some((i, inf));
                }
            }
            let Some((r, _)) = leave else {
                return Ok(true);
            };
            let leaving = self.basic[r];
            let to_lower = self.x[leaving] < self.lower[leaving];

            let cb: Vec<f64> = self.basic.iter().map(|&j| self.sf.cost[j]).collect();
            let y = self.btran(&cb);
            let rho = self.binv[r * m..(r + 1) * m].to_vec();

            let mut candidates: Vec<(usize, f64, f64)> = Vec::new();
            for j in 0..total {
                let st = self.status[j];
                if st == Status::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let arj = self.dot_column(&rho, j);
                if arj.abs() < PIVOT_TOL {
                    continue;
                }
                let eligible = match st {
                    Status::AtLower => (arj < 0.0) == to_lower,
                    Status::AtUpper => (arj > 0.0) == to_lower,
                    Status::Free => true,
                    Status::Basic => false,
                };
                if !eligible {
                    continue;
                }
                let d = self.sf.cost[j] - self.dot_column(&y, j);
                let dhat = match st {
                    Status::AtLower => d.max(0.0),
                    Status::AtUpper => (-d).max(0.0),
                    _ => d.abs(),
                };
                candidates.push((j, dhat, arj));
            }
            if candidates.is_empty() {
                return Ok(false);
            }
            let theta_max = candidates
                .iter()
                .map(|&(_, dh, a)| (dh + if bland { 0.0 } else { DUAL_TOL }) / a.abs())
                .fold(f64::INFINITY, f64::min);
            let mut enter: Option<(usize, f64, f64)> = None;
            for &(j, dh, a) in &candidates {
                let ratio = dh / a.abs();
                if ratio > theta_max {
                    continue;
                }
                let better = match enter {
                    None => true,
                    Some((q, rq, aq)) => {
                        if bland {
                            ratio < rq || (ratio == rq && j < q)
                        } else {
                            a.abs() > aq.abs()
                        }
                    }
                };
                if better {
                    enter = Some((j, ratio, a));
                }
            }
            let (q, ratio, _) = enter.expect("non-empty candidate list");
            if ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }

            let alpha = self.ftran(q);
            if alpha[r].abs() < PIVOT_TOL {
                // Row and column disagree: the inverse has drifted.
                if !self.refactor() {
                    self.slack_basis();
                }
                self.compute_primal();
                degenerate += 1;
                continue;
            }
            let bound = if to_lower { self.lower[leaving] } else { self.upper[leaving] };
            let delta = (self.x[leaving] - bound) / alpha[r];
            for i in 0..m {
                let j = self.basic[i];
                self.x[j] -= delta * alpha[i];
            }
            self.x[q] += delta;
            self.x[leaving] = bound;
            self.status[leaving] = if to_lower { Status::AtLower } else { Status::AtUpper };
            self.basic[r] = q;
            self.status[q] = Status::Basic;
            self.pivot(r, &alpha);
        }
    }
}

enum ColumnIter<'a> {
    Structural(std::slice::Iter<'a, (usize, f64)>),
    Logical(Option<usize>),
}

impl Iterator for ColumnIter<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            ColumnIter::Structural(it) => it.next().copied(),
            ColumnIter::Logical(row) => row.take().map(|i| (i, -1.0)),
        }
    }
}

/// Optimal vertex of the continuous relaxation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Objective in the problem's own sense.
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

/// Solves the continuous relaxation of `problem`: every variable is treated
/// as continuous within its bounds.
pub fn solve_lp(problem: &MilpProblem) -> Result<LpOutcome, MilpError> {
    problem.check()?;
    let sf = StandardForm::new(problem);
    let mut simplex = Simplex::new(&sf);
    let status = simplex.solve()?;
    Ok(match status {
        LpStatus::Infeasible => LpOutcome::Infeasible,
        LpStatus::Unbounded => LpOutcome::Unbounded,
        LpStatus::Optimal => {
            let x = simplex.structural_values().to_vec();
            LpOutcome::Optimal(LpSolution {
                objective: problem.objective_value(&x),
                x,
                iterations: simplex.iterations,
            })
        }
    })
}
