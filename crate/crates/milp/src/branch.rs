//! Best-bound branch-and-bound with plunging over the simplex engine.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::simplex::{Basis, LpStatus, Simplex, StandardForm};
use crate::{Emphasis, MilpError, MilpProblem, ObjectiveSense, SolverParams, VarKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    OptimalWithinGap,
    /// A time or node limit stopped the search before the gap was closed.
    /// The incumbent may be absent.
    FeasibleTimeLimit,
    Infeasible,
    Unbounded,
}

/// One line of the solve log, written whenever the incumbent improves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub time_secs: f64,
    pub value: f64,
    pub bound: f64,
    pub nodes: u64,
}

impl LogEntry {
    /// Machine-readable JSON line.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub incumbent: Option<Vec<f64>>,
    /// Objective of the incumbent, in the problem's own sense.
    pub incumbent_value: Option<f64>,
    /// Best proven bound on the optimum, in the problem's own sense.
    pub best_bound: f64,
    pub nodes: u64,
    pub branchings: u64,
    pub lp_iterations: u64,
    pub wall_time_secs: f64,
    pub log: Vec<LogEntry>,
}

impl SolveResult {
    /// Relative gap `|bound - incumbent| / max(|incumbent|, 1e-9)`, if an
    /// incumbent exists.
    pub fn gap(&self) -> Option<f64> {
        self.incumbent_value
            .map(|v| (self.best_bound - v).abs() / v.abs().max(1e-9))
    }
}

struct Node {
    id: u64,
    depth: u32,
    /// Parent relaxation value (maximization form).
    bound: f64,
    fixes: Rc<Vec<(usize, f64)>>,
    basis: Option<Rc<Basis>>,
    /// Variable fixed last, its distance moved and whether it went up.
    branched: Option<(usize, f64, bool)>,
}

/// Average objective loss per unit change, per variable and direction.
#[derive(Default, Clone, Copy)]
struct Pseudocost {
    sum: [f64; 2],
    count: [u32; 2],
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Max-heap: highest bound first, then deepest, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

/// Solves a mixed-binary program by best-bound branch-and-bound.
pub fn solve_milp(problem: &MilpProblem, params: &SolverParams) -> Result<SolveResult, MilpError> {
    problem.check()?;
    params.validate()?;
    if problem.variables.iter().any(|v| v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0)) {
        return Err(MilpError::Unsupported("binary variable with bounds outside [0, 1]".into()));
    }
    Search::new(problem, params).run()
}

struct Search<'a> {
    problem: &'a MilpProblem,
    params: &'a SolverParams,
    sign: f64,
    binaries: Vec<usize>,
    start: Instant,
    incumbent: Option<(Vec<f64>, f64)>,
    /// Largest bound among nodes discarded because they could not beat the
    /// incumbent by more than the gap.
    gap_pruned_bound: f64,
    log: Vec<LogEntry>,
    pseudocosts: Vec<Pseudocost>,
    nodes: u64,
    branchings: u64,
    lp_iterations: u64,
}

impl<'a> Search<'a> {
    fn new(problem: &'a MilpProblem, params: &'a SolverParams) -> Self {
        let sign = match problem.sense {
            ObjectiveSense::Maximize => 1.0,
            ObjectiveSense::Minimize => -1.0,
        };
        Self {
            problem,
            params,
            sign,
            binaries: problem.binary_indices(),
            start: Instant::now(),
            incumbent: None,
            gap_pruned_bound: f64::NEG_INFINITY,
            log: Vec::new(),
            pseudocosts: vec![Pseudocost::default(); problem.variables.len()],
            nodes: 0,
            branchings: 0,
            lp_iterations: 0,
        }
    }

    fn incumbent_value(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::NEG_INFINITY, |(_, v)| *v)
    }

    /// Nodes whose bound does not exceed this value are discarded.
    fn prune_level(&self) -> f64 {
        let inc = self.incumbent_value();
        if !inc.is_finite() {
            return f64::NEG_INFINITY;
        }
        match self.params.emphasis {
            Emphasis::ProveOptimality => inc + 1e-9 * inc.abs().max(1.0),
            Emphasis::FindFeasible => inc + self.params.relative_gap * inc.abs().max(1e-9),
        }
    }

    fn within_gap(&self, bound: f64) -> bool {
        let inc = self.incumbent_value();
        inc.is_finite() && (bound - inc) / inc.abs().max(1e-9) <= self.params.relative_gap
    }

    fn global_bound(&self, open: &BinaryHeap<Node>) -> f64 {
        let top = open.peek().map_or(f64::NEG_INFINITY, |n| n.bound);
        top.max(self.incumbent_value()).max(self.gap_pruned_bound)
    }

    fn limits_hit(&self) -> bool {
        self.start.elapsed() >= self.params.time_limit()
            || self.params.node_limit.is_some_and(|limit| self.nodes >= limit)
    }

    fn run(mut self) -> Result<SolveResult, MilpError> {
        let sf = StandardForm::new(self.problem);
        let n = sf.num_structural();
        let root_lower: Vec<f64> = (0..n).map(|j| sf.root_lower(j)).collect();
        let root_upper: Vec<f64> = (0..n).map(|j| sf.root_upper(j)).collect();
        let mut lp = Simplex::new(&sf);
        let mut loaded: Option<Rc<Basis>> = None;

        let mut open = BinaryHeap::new();
        let mut next_id = 0u64;
        open.push(Node {
            id: next_id,
            depth: 0,
            bound: f64::INFINITY,
            fixes: Rc::new(Vec::new()),
            basis: None,
            branched: None,
        });
        next_id += 1;

        let mut lower = root_lower.clone();
        let mut upper = root_upper.clone();
        let mut stopped_by_limit = false;

        // After each branching the child on the rounding side is processed
        // next (a plunge) so incumbents turn up early; the other child waits
        // in the best-bound queue.
        let mut plunge: Option<Node> = None;
        while let Some(node) = plunge.take().or_else(|| open.pop()) {
            if node.bound <= self.prune_level() {
                if self.params.emphasis == Emphasis::FindFeasible {
                    self.gap_pruned_bound = self.gap_pruned_bound.max(node.bound);
                }
                continue;
            }
            let best_open = open.peek().map_or(node.bound, |n| n.bound.max(node.bound));
            if self.params.emphasis == Emphasis::FindFeasible
                && self.within_gap(best_open.max(self.gap_pruned_bound))
            {
                // Everything left is within the gap of the incumbent.
                open.push(node);
                break;
            }
            if self.limits_hit() {
                open.push(node);
                stopped_by_limit = true;
                break;
            }

            lower.copy_from_slice(&root_lower);
            upper.copy_from_slice(&root_upper);
            for &(j, v) in node.fixes.iter() {
                lower[j] = v;
                upper[j] = v;
            }
            lp.set_bounds(&lower, &upper);
            if let Some(basis) = &node.basis {
                if !loaded.as_ref().is_some_and(|b| Rc::ptr_eq(b, basis)) {
                    lp.load_basis(basis);
                }
            }
            self.nodes += 1;
            let status = lp.solve();
            self.lp_iterations += lp.iterations as u64;
            let status = status?;
            // The engine now holds this node's final basis, not the one it was
            // loaded from.
            loaded = None;
            match status {
                LpStatus::Infeasible => continue,
                LpStatus::Unbounded => {
                    return Ok(self.finish(SolveStatus::Unbounded, f64::INFINITY));
                }
                LpStatus::Optimal => {}
            }
            let value = -lp.min_objective();
            if let Some((j, dist, up)) = node.branched {
                if node.bound.is_finite() {
                    let pc = &mut self.pseudocosts[j];
                    pc.sum[usize::from(up)] += (node.bound - value).max(0.0) / dist;
                    pc.count[usize::from(up)] += 1;
                }
            }
            if value <= self.prune_level() {
                if self.params.emphasis == Emphasis::FindFeasible {
                    self.gap_pruned_bound = self.gap_pruned_bound.max(value);
                }
                continue;
            }
            let x = lp.structural_values().to_vec();

            let mut branch_on = self.pick_branch(&x, self.params.integrality_tol);
            if branch_on.is_none() {
                let mut rounded = x.clone();
                for &j in &self.binaries {
                    rounded[j] = rounded[j].round();
                }
                if self.problem.verify(&rounded, self.params.feasibility_tol).is_ok() {
                    let v = self.sign * self.problem.objective_value(&rounded);
                    if v > self.incumbent_value() {
                        self.incumbent = Some((rounded, v));
                        let bound = self.global_bound(&open).max(value.min(v));
                        self.log.push(LogEntry {
                            time_secs: self.start.elapsed().as_secs_f64(),
                            value: self.sign * v,
                            bound: self.sign * bound,
                            nodes: self.nodes,
                        });
                    }
                    continue;
                }
                // Rounding within tolerance broke a row: keep branching on
                // whatever fractionality is left.
                branch_on = self.most_fractional(&x, 0.0);
                if branch_on.is_none() {
                    continue;
                }
            }
            let j = branch_on.expect("checked above");
            self.branchings += 1;
            let fixed = self.reduced_cost_fixings(&lp, &x, value, &lower, &upper);
            let mut inherited = (*node.fixes).clone();
            inherited.extend(fixed);
            let basis = Rc::new(lp.basis());
            loaded = Some(basis.clone());
            let first = x[j].round();
            for v in [first, 1.0 - first] {
                let mut fixes = inherited.clone();
                fixes.push((j, v));
                let child = Node {
                    id: next_id,
                    depth: node.depth + 1,
                    bound: value,
                    fixes: Rc::new(fixes),
                    basis: Some(basis.clone()),
                    branched: Some((j, (v - x[j]).abs().max(1e-9), v == 1.0)),
                };
                next_id += 1;
                if plunge.is_none() {
                    plunge = Some(child);
                } else {
                    open.push(child);
                }
            }
        }

        let bound = self.global_bound(&open);
        let status = match (&self.incumbent, stopped_by_limit) {
            (None, false) => SolveStatus::Infeasible,
            (None, true) => SolveStatus::FeasibleTimeLimit,
            (Some(_), _) if !stopped_by_limit || self.within_gap(bound) => SolveStatus::OptimalWithinGap,
            (Some(_), _) => SolveStatus::FeasibleTimeLimit,
        };
        let bound = if status == SolveStatus::Infeasible { f64::NEG_INFINITY } else { bound };
        Ok(self.finish(status, bound))
    }

    /// Binaries at a bound whose reduced cost shows that moving them cannot
    /// lift the relaxation above the pruning level; they keep their value in
    /// the whole subtree.
    fn reduced_cost_fixings(&self, lp: &Simplex, x: &[f64], value: f64, lower: &[f64], upper: &[f64]) -> Vec<(usize, f64)> {
        let level = self.prune_level();
        if !level.is_finite() {
            return Vec::new();
        }
        let margin = 1e-9 * level.abs().max(1.0);
        let d = lp.reduced_costs();
        let mut out = Vec::new();
        for &j in &self.binaries {
            if lower[j] == upper[j] || value - d[j].abs() > level - margin {
                continue;
            }
            if x[j] == lower[j] && d[j] > 0.0 {
                out.push((j, lower[j]));
            } else if x[j] == upper[j] && d[j] < 0.0 {
                out.push((j, upper[j]));
            }
        }
        out
    }

    /// Fractional binary with the best pseudocost product score. Variables
    /// without history in a direction borrow the average over all variables.
    /// Ties go to the more fractional, then the lowest index.
    fn pick_branch(&self, x: &[f64], tol: f64) -> Option<usize> {
        let mut avg = [1.0; 2];
        for d in 0..2 {
            let (sum, count) = self
                .pseudocosts
                .iter()
                .filter(|pc| pc.count[d] > 0)
                .fold((0.0, 0u32), |(s, c), pc| (s + pc.sum[d] / f64::from(pc.count[d]), c + 1));
            if count > 0 {
                avg[d] = sum / f64::from(count);
            }
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for &j in &self.binaries {
            let down = x[j] - x[j].floor();
            let up = x[j].ceil() - x[j];
            let f = down.min(up);
            if f <= tol {
                continue;
            }
            let pc = &self.pseudocosts[j];
            let rate = |d: usize| if pc.count[d] > 0 { pc.sum[d] / f64::from(pc.count[d]) } else { avg[d] };
            let score = (rate(0) * down).max(1e-6) * (rate(1) * up).max(1e-6);
            let better = match best {
                None => true,
                Some((_, bs, bf)) => score > bs * (1.0 + 1e-9) || (score >= bs * (1.0 - 1e-9) && f > bf),
            };
            if better {
                best = Some((j, score, f));
            }
        }
        best.map(|(j, _, _)| j)
    }

    /// Binary with the largest distance to the nearest integer above `tol`;
    /// ties go to the lowest index.
    fn most_fractional(&self, x: &[f64], tol: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.binaries {
            let f = (x[j] - x[j].floor()).min(x[j].ceil() - x[j]);
            if f > tol && best.is_none_or(|(_, bf)| f > bf) {
                best = Some((j, f));
            }
        }
        best.map(|(j, _)| j)
    }

    fn finish(self, status: SolveStatus, bound: f64) -> SolveResult {
        let (incumbent, incumbent_value) = match self.incumbent {
            Some((x, v)) => (Some(x), Some(self.sign * v)),
            None => (None, None),
        };
        SolveResult {
            status,
            incumbent,
            incumbent_value,
            best_bound: self.sign * bound,
            nodes: self.nodes,
            branchings: self.branchings,
            lp_iterations: self.lp_iterations,
            wall_time_secs: self.start.elapsed().as_secs_f64(),
            log: self.log,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RowSense;

    fn knapsack(values: &[f64], weights: &[f64], cap: f64) -> MilpProblem {
        let mut p = MilpProblem::new("knapsack", ObjectiveSense::Maximize);
        let vars: Vec<usize> = (0..values.len()).map(|k| p.add_binary(format!("x{k}"))).collect();
        p.objective = vars.iter().zip(values).map(|(&j, &v)| (j, v)).collect();
        p.add_constraint("cap", vars.iter().zip(weights).map(|(&j, &w)| (j, w)).collect(), RowSense::Le, cap);
        p
    }

    #[test]
    fn integral_relaxation_needs_no_branching() {
        let mut p = MilpProblem::new("t", ObjectiveSense::Maximize);
        let a = p.add_binary("a");
        let b = p.add_binary("b");
        p.objective = vec![(a, 1.0), (b, 2.0)];
        p.add_constraint("one", vec![(a, 1.0), (b, 1.0)], RowSense::Le, 1.0);
        let r = solve_milp(&p, &SolverParams::default()).unwrap();
        assert_eq!(r.status, SolveStatus::OptimalWithinGap);
        assert_eq!(r.branchings, 0);
        assert_eq!(r.incumbent_value, Some(2.0));
        assert_eq!(r.log.len(), 1);
    }

    #[test]
    fn small_knapsack() {
        // {a, b} weighs 10 and is worth 13; all three items weigh 13.
        let p = knapsack(&[8.0, 5.0, 4.0], &[6.0, 4.0, 3.0], 12.0);
        let r = solve_milp(&p, &SolverParams::default()).unwrap();
        assert_eq!(r.status, SolveStatus::OptimalWithinGap);
        assert!((r.incumbent_value.unwrap() - 13.0).abs() < 1e-9);
        assert!(r.best_bound >= 13.0 - 1e-9);
    }

    #[test]
    fn infeasible_binary_program() {
        let mut p = MilpProblem::new("t", ObjectiveSense::Maximize);
        let a = p.add_binary("a");
        let b = p.add_binary("b");
        p.objective = vec![(a, 1.0)];
        p.add_constraint("half", vec![(a, 2.0), (b, 2.0)], RowSense::Eq, 1.0);
        let r = solve_milp(&p, &SolverParams::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.incumbent.is_none());
    }

    #[test]
    fn node_limit_without_incumbent_is_flagged() {
        let mut p = MilpProblem::new("t", ObjectiveSense::Maximize);
        let a = p.add_binary("a");
        let b = p.add_binary("b");
        p.objective = vec![(a, 1.0), (b, 1.0)];
        p.add_constraint("half", vec![(a, 2.0), (b, 2.0)], RowSense::Le, 3.0);
        let params = SolverParams {
            node_limit: Some(1),
            ..Default::default()
        };
        let r = solve_milp(&p, &params).unwrap();
        assert_eq!(r.status, SolveStatus::FeasibleTimeLimit);
        assert!(r.incumbent.is_none());
    }

    #[test]
    fn minimization_reports_in_own_sense() {
        let mut p = MilpProblem::new("t", ObjectiveSense::Minimize);
        let a = p.add_binary("a");
        let b = p.add_binary("b");
        let c = p.add_binary("c");
        p.objective = vec![(a, 3.0), (b, 2.0), (c, 2.5)];
        p.add_constraint("cover", vec![(a, 1.0), (b, 1.0), (c, 1.0)], RowSense::Ge, 2.0);
        let r = solve_milp(&p, &SolverParams::default()).unwrap();
        assert!((r.incumbent_value.unwrap() - 4.5).abs() < 1e-9);
        assert!(r.best_bound <= 4.5 + 1e-9);
    }

    #[test]
    fn solve_is_deterministic() {
        let p = knapsack(
            &[12.0, 7.0, 11.0, 8.0, 9.0, 6.0, 5.0, 14.0],
            &[4.0, 3.0, 5.0, 4.0, 3.5, 2.5, 2.0, 6.0],
            13.0,
        );
        let a = solve_milp(&p, &SolverParams::default()).unwrap();
        let b = solve_milp(&p, &SolverParams::default()).unwrap();
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.incumbent, b.incumbent);
    }
}
