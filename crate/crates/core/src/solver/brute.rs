use std::time::Instant;

use super::bnb::solve_with_fixed;
use super::{objective_tol, SolveReport, SolverError, Status};
use crate::problems::{row_tolerance, Bilp, Sense};

pub const MAX_BRUTE_BINARIES: usize = 25;

struct Search<'a> {
    p: &'a Bilp,
    bins: Vec<usize>,
    /// `(row, coef)` entries of every variable.
    cols: Vec<Vec<(usize, f64)>>,
    fixed: Vec<f64>,
    rest_min: Vec<f64>,
    rest_max: Vec<f64>,
    tol: Vec<f64>,
    x: Vec<f64>,
    cost_so_far: f64,
    /// Cheapest possible contribution of each suffix of `bins`, continuous part included.
    suffix_min: Vec<f64>,
    has_continuous: bool,
    best: Option<(f64, Vec<f64>)>,
    nodes: u64,
}

fn span(a: f64, lo: f64, hi: f64) -> (f64, f64) {
    let (u, v) = (a * lo, a * hi);
    (u.min(v), u.max(v))
}

impl Search<'_> {
    fn rows_possible(&self, j: usize) -> bool {
        self.cols[j].iter().all(|&(r, _)| {
            let row = &self.p.rows[r];
            let (lo, hi) = (self.fixed[r] + self.rest_min[r], self.fixed[r] + self.rest_max[r]);
            match row.sense {
                Sense::Le => lo <= row.rhs + self.tol[r],
                Sense::Ge => hi >= row.rhs - self.tol[r],
                Sense::Eq => lo <= row.rhs + self.tol[r] && hi >= row.rhs - self.tol[r],
            }
        })
    }

    fn assign(&mut self, j: usize, v: f64, sign: f64) {
        let (lo, hi) = (self.p.lower[j], self.p.upper[j]);
        for &(r, a) in &self.cols[j] {
            let (mn, mx) = span(a, lo, hi);
            self.rest_min[r] -= sign * mn;
            self.rest_max[r] -= sign * mx;
            self.fixed[r] += sign * a * v;
        }
        self.cost_so_far += sign * self.p.cost[j] * v;
    }

    fn dfs(&mut self, depth: usize) {
        self.nodes += 1;
        if let Some((best, _)) = &self.best {
            let bound = self.p.constant + self.cost_so_far + self.suffix_min[depth];
            if bound > best + objective_tol(*best) {
                return;
            }
        }
        if depth == self.bins.len() {
            self.leaf();
            return;
        }
        let j = self.bins[depth];
        let (lo, hi) = (self.p.lower[j].round() as i64, self.p.upper[j].round() as i64);
        for v in lo..=hi {
            let v = v as f64;
            self.assign(j, v, 1.0);
            self.x[j] = v;
            if self.rows_possible(j) {
                self.dfs(depth + 1);
            }
            self.assign(j, v, -1.0);
            self.x[j] = 0.0;
        }
    }

    fn leaf(&mut self) {
        let candidate = if self.has_continuous {
            let fixed: Vec<Option<f64>> =
                (0..self.p.num_vars()).map(|j| self.p.binary[j].then_some(self.x[j])).collect();
            match solve_with_fixed(self.p, &fixed) {
                Some((_, x)) if self.p.is_feasible(&x) => x,
                _ => return,
            }
        } else {
            // Every row has only binaries, so the range check at the last assignment is exact.
            if !self.p.rows.iter().enumerate().all(|(r, row)| row.violation(&self.x) <= self.tol[r]) {
                return;
            }
            self.x.clone()
        };
        let value = self.p.objective(&candidate);
        let better = match &self.best {
            None => true,
            Some((best, _)) => value < best - objective_tol(*best),
        };
        if better {
            self.best = Some((value, candidate));
        }
    }
}

/// Exhaustive search; ties keep the lexicographically smallest bit vector.
pub fn brute_force(p: &Bilp) -> Result<SolveReport, SolverError> {
    let start = Instant::now();
    p.validate()?;
    let bins: Vec<usize> = (0..p.num_vars()).filter(|&j| p.binary[j]).collect();
    if bins.len() > MAX_BRUTE_BINARIES {
        return Err(SolverError::TooLarge { binaries: bins.len(), max: MAX_BRUTE_BINARIES });
    }
    let mut cols = vec![Vec::new(); p.num_vars()];
    let (mut rest_min, mut rest_max) = (vec![0.0; p.rows.len()], vec![0.0; p.rows.len()]);
    for (r, row) in p.rows.iter().enumerate() {
        for &(j, a) in &row.coefs {
            cols[j].push((r, a));
            let (mn, mx) = span(a, p.lower[j], p.upper[j]);
            rest_min[r] += mn;
            rest_max[r] += mx;
        }
    }
    let continuous_min: f64 =
        (0..p.num_vars()).filter(|&j| !p.binary[j]).map(|j| span(p.cost[j], p.lower[j], p.upper[j]).0).sum();
    let mut suffix_min = vec![continuous_min; bins.len() + 1];
    for d in (0..bins.len()).rev() {
        let j = bins[d];
        suffix_min[d] = suffix_min[d + 1] + span(p.cost[j], p.lower[j], p.upper[j]).0;
    }
    let mut search = Search {
        p,
        cols,
        fixed: vec![0.0; p.rows.len()],
        rest_min,
        rest_max,
        tol: p.rows.iter().map(row_tolerance).collect(),
        x: vec![0.0; p.num_vars()],
        cost_so_far: 0.0,
        suffix_min,
        has_continuous: bins.len() < p.num_vars(),
        bins,
        best: None,
        nodes: 0,
    };
    // Rows without any variable never get checked during the descent.
    let empty_ok = p.rows.iter().enumerate().filter(|(_, r)| r.coefs.is_empty()).all(|(r, row)| row.violation(&[]) <= search.tol[r]);
    if empty_ok {
        search.dfs(0);
    }
    let wall = start.elapsed();
    Ok(match search.best {
        Some((value, x)) => SolveReport { status: Status::Optimal, objective: value, x: Some(x), nodes: search.nodes, wall_time: wall, dual_bound: value },
        None => SolveReport::without_solution(Status::Infeasible, search.nodes, wall, f64::INFINITY),
    })
}
