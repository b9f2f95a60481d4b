use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use microlp::{ComparisonOp, OptimizationDirection, Problem as Lp, SolveOutcome, Solution, Variable};

use super::{objective_tol, relative_gap, SolveReport, SolverError, Status};
use crate::problems::{row_tolerance, Bilp, Sense, BIT_TOL};

/// Open nodes beyond this count keep only their fixings and re-solve from the root.
const STORED_SOLUTIONS: usize = 4096;

fn build(p: &Bilp, fixed: Option<&[Option<f64>]>) -> Option<(Lp, Vec<Variable>)> {
    let mut lp = Lp::new(OptimizationDirection::Minimize);
    let vars = (0..p.num_vars())
        .map(|j| {
            let bounds = match fixed.and_then(|f| f[j]) {
                Some(v) => (v, v),
                None => (p.lower[j], p.upper[j]),
            };
            lp.add_var(p.cost[j], bounds)
        })
        .collect::<Vec<_>>();
    for (r, row) in p.rows.iter().enumerate() {
        if row.coefs.is_empty() {
            if row.violation(&[]) > row_tolerance(&p.rows[r]) {
                return None;
            }
            continue;
        }
        let expr: Vec<(Variable, f64)> = row.coefs.iter().map(|&(j, a)| (vars[j], a)).collect();
        let op = match row.sense {
            Sense::Le => ComparisonOp::Le,
            Sense::Ge => ComparisonOp::Ge,
            Sense::Eq => ComparisonOp::Eq,
        };
        lp.add_constraint(&expr[..], op, row.rhs);
    }
    Some((lp, vars))
}

fn values(sol: &Solution, vars: &[Variable]) -> Vec<f64> {
    vars.iter().map(|&v| sol.var_value(v)).collect()
}

/// Simplex outcome: a solution, infeasibility (`None`), or a numerical failure.
enum LpOutcome {
    Solved(Solution),
    Infeasible,
    Failed(String),
}

fn classify(res: Result<SolveOutcome, microlp::Error>) -> LpOutcome {
    match res {
        Ok(SolveOutcome::Solution(s)) => LpOutcome::Solved(s),
        Ok(SolveOutcome::Interrupted(_)) => LpOutcome::Failed("simplex interrupted".into()),
        Err(microlp::Error::Infeasible) => LpOutcome::Infeasible,
        Err(e) => LpOutcome::Failed(e.to_string()),
    }
}

fn lp_result(res: Result<SolveOutcome, microlp::Error>) -> Result<Option<Solution>, SolverError> {
    match classify(res) {
        LpOutcome::Solved(s) => Ok(Some(s)),
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Failed(m) => Err(SolverError::Relaxation(m)),
    }
}

/// Continuous relaxation with some variables pinned. `None` when infeasible.
pub(crate) fn solve_with_fixed(p: &Bilp, fixed: &[Option<f64>]) -> Option<(f64, Vec<f64>)> {
    let (lp, vars) = build(p, Some(fixed))?;
    match classify(lp.solve()) {
        LpOutcome::Solved(sol) => Some((sol.objective() + p.constant, values(&sol, &vars))),
        _ => None,
    }
}

/// Root relaxation of `p`: `(bound, x)`, or `None` when even the relaxation is infeasible.
pub fn solve_relaxation(p: &Bilp) -> Result<Option<(f64, Vec<f64>)>, SolverError> {
    let Some((lp, vars)) = build(p, None) else { return Ok(None) };
    Ok(lp_result(lp.solve())?.map(|s| (s.objective() + p.constant, values(&s, &vars))))
}

struct Node {
    bound: f64,
    id: u64,
    fixings: Vec<(usize, f64)>,
    solution: Option<Solution>,
    x: Vec<f64>,
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
    // Max-heap order: the smallest bound (then the oldest node) comes out first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

/// Most fractional binary, ties to the lowest index.
fn branching_var(p: &Bilp, x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in (0..p.num_vars()).filter(|&j| p.binary[j] && p.lower[j] < p.upper[j]) {
        let frac = (x[j] - x[j].floor()).min(x[j].ceil() - x[j]);
        if frac > BIT_TOL && best.is_none_or(|(_, f)| frac > f) {
            best = Some((j, frac));
        }
    }
    best.map(|(j, _)| j)
}

struct Tree<'a> {
    p: &'a Bilp,
    root: Solution,
    vars: Vec<Variable>,
    incumbent: Option<(f64, Vec<f64>)>,
    next_id: u64,
}

impl Tree<'_> {
    /// Rounds an integral relaxation point and keeps it when it improves the incumbent.
    fn offer(&mut self, x: &[f64]) {
        let mut cand: Vec<f64> =
            x.iter().enumerate().map(|(j, &v)| if self.p.binary[j] { v.round() } else { v }).collect();
        if !self.p.is_feasible(&cand) {
            let fixed: Vec<Option<f64>> =
                (0..self.p.num_vars()).map(|j| self.p.binary[j].then_some(cand[j])).collect();
            match solve_with_fixed(self.p, &fixed) {
                Some((_, y)) if self.p.is_feasible(&y) => cand = y,
                _ => return,
            }
        }
        let value = self.p.objective(&cand);
        if self.incumbent.as_ref().is_none_or(|(best, _)| value < best - objective_tol(*best)) {
            self.incumbent = Some((value, cand));
        }
    }

    fn pruned(&self, bound: f64) -> bool {
        self.incumbent.as_ref().is_some_and(|(best, _)| bound >= best - objective_tol(*best))
    }

    fn solution_of(&self, node: &mut Node) -> Result<Option<Solution>, SolverError> {
        if let Some(s) = node.solution.take() {
            return Ok(Some(s));
        }
        let mut sol = self.root.clone();
        for &(j, v) in &node.fixings {
            match classify(sol.fix_var(self.vars[j], v)) {
                LpOutcome::Solved(s) => sol = s,
                LpOutcome::Infeasible => return Ok(None),
                LpOutcome::Failed(_) => return self.cold_solve(&node.fixings),
            }
        }
        Ok(Some(sol))
    }

    /// Solves the relaxation under `fixings` from scratch, used when a warm start breaks down.
    fn cold_solve(&self, fixings: &[(usize, f64)]) -> Result<Option<Solution>, SolverError> {
        let mut fixed = vec![None; self.p.num_vars()];
        for &(j, v) in fixings {
            fixed[j] = Some(v);
        }
        let Some((lp, _)) = build(self.p, Some(&fixed)) else { return Ok(None) };
        lp_result(lp.solve())
    }

    /// Child relaxation: warm start from the parent, cold start on numerical failure.
    fn child(&self, parent: Solution, fixings: &[(usize, f64)]) -> Result<Option<Solution>, SolverError> {
        let &(j, v) = fixings.last().expect("child has a fixing");
        match classify(parent.fix_var(self.vars[j], v)) {
            LpOutcome::Solved(s) => Ok(Some(s)),
            LpOutcome::Infeasible => Ok(None),
            LpOutcome::Failed(_) => self.cold_solve(fixings),
        }
    }

    fn make_node(&mut self, sol: Solution, fixings: Vec<(usize, f64)>, store: bool) -> Option<Node> {
        let bound = sol.objective() + self.p.constant;
        let x = values(&sol, &self.vars);
        if branching_var(self.p, &x).is_none() {
            self.offer(&x);
            return None;
        }
        if self.pruned(bound) {
            return None;
        }
        self.next_id += 1;
        Some(Node { bound, id: self.next_id, fixings, solution: store.then_some(sol), x })
    }
}

/// Search settings for [`branch_and_bound_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct BnbOptions {
    pub time_limit: Duration,
    /// Feasible point used as the first incumbent; ignored when infeasible.
    pub incumbent: Option<Vec<f64>>,
    /// Lower bound proven elsewhere, e.g. the optimum of a relaxation of `p`.
    /// The search stops as soon as the incumbent reaches it.
    pub lower_bound: f64,
    /// Relaxations solved before the search stops; unlike the time limit this
    /// keeps truncated searches reproducible.
    pub max_nodes: u64,
}

impl Default for BnbOptions {
    fn default() -> Self {
        BnbOptions { time_limit: super::DEFAULT_TIME_LIMIT, incumbent: None, lower_bound: f64::NEG_INFINITY, max_nodes: u64::MAX }
    }
}

/// Best-first branch and bound with simplex relaxations.
///
/// Branches on the most fractional binary (lowest index on ties) and prunes
/// nodes whose bound is within tolerance of the incumbent.
pub fn branch_and_bound(p: &Bilp, time_limit: Duration) -> Result<SolveReport, SolverError> {
    branch_and_bound_with(p, &BnbOptions { time_limit, ..BnbOptions::default() })
}

/// [`branch_and_bound`] with a warm start and an external bound.
pub fn branch_and_bound_with(p: &Bilp, opts: &BnbOptions) -> Result<SolveReport, SolverError> {
    let time_limit = opts.time_limit;
    let start = Instant::now();
    p.validate()?;
    let Some((lp, vars)) = build(p, None) else {
        return Ok(SolveReport::without_solution(Status::Infeasible, 0, start.elapsed(), f64::INFINITY));
    };
    let Some(root) = lp_result(lp.solve())? else {
        return Ok(SolveReport::without_solution(Status::Infeasible, 1, start.elapsed(), f64::INFINITY));
    };
    let root_bound = root.objective() + p.constant;
    let mut tree = Tree { p, root: root.clone(), vars, incumbent: None, next_id: 0 };
    if let Some(x0) = opts.incumbent.as_ref().filter(|x0| x0.len() == p.num_vars() && p.is_feasible(x0)) {
        tree.incumbent = Some((p.objective(x0), x0.clone()));
    }
    let known = root_bound.max(opts.lower_bound);
    let proven = |tree: &Tree<'_>| tree.incumbent.as_ref().is_some_and(|(v, _)| *v <= known + objective_tol(*v));
    let mut heap = BinaryHeap::new();
    if !proven(&tree) {
        if let Some(node) = tree.make_node(root, Vec::new(), true) {
            heap.push(node);
        }
    }
    let mut nodes = 1u64;
    let mut timed_out = false;
    while let Some(mut node) = heap.pop() {
        if proven(&tree) {
            heap.clear();
            break;
        }
        if tree.pruned(node.bound) {
            continue;
        }
        if start.elapsed() >= time_limit || nodes >= opts.max_nodes {
            heap.push(node);
            timed_out = true;
            break;
        }
        let Some(parent) = tree.solution_of(&mut node)? else { continue };
        let j = branching_var(p, &node.x).expect("open nodes are fractional");
        let mut parent = Some(parent);
        for v in [0.0, 1.0] {
            nodes += 1;
            let mut fixings = node.fixings.clone();
            fixings.push((j, v));
            let base = if v == 0.0 { parent.clone().expect("parent kept for the second child") } else { parent.take().expect("parent") };
            let Some(sol) = tree.child(base, &fixings)? else { continue };
            let store = heap.len() < STORED_SOLUTIONS;
            if let Some(child) = tree.make_node(sol, fixings, store) {
                heap.push(child);
            }
        }
    }
    let wall = start.elapsed();
    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    Ok(match (tree.incumbent, timed_out) {
        (Some((value, x)), false) => {
            SolveReport { status: Status::Optimal, objective: value, x: Some(x), nodes, wall_time: wall, dual_bound: value }
        }
        (Some((value, x)), true) => {
            let bound = open_bound.min(value).max(root_bound);
            let status = Status::Feasible { gap: relative_gap(value, bound) };
            SolveReport { status, objective: value, x: Some(x), nodes, wall_time: wall, dual_bound: bound }
        }
        (None, false) => SolveReport::without_solution(Status::Infeasible, nodes, wall, f64::INFINITY),
        (None, true) => SolveReport::without_solution(Status::CapExceeded, nodes, wall, open_bound.max(root_bound)),
    })
}
