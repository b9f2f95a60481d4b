//! Binary linear programs for the three knowledge cases and decoding of
//! solver output back into schedules.
//!
//! Variables are laid out as `π | ε | ζ | c`: MBS on/off flags, one-hot drone
//! sites, transition products, and (horizon cases only) continuous intake
//! curtailment. Every block is contiguous; the partial case replicates
//! `ε`, `ζ` and `c` per scenario while `π` is shared.

mod build;
mod lp_format;

pub use build::{build_partial, build_perfect, build_zero, ZeroInput};
pub use lp_format::{read_lp_objective, read_solution, write_lp, write_solution, LpNames};

use thiserror::Error;

use crate::energy::{EnergyError, EnergyModel, NetworkSlotEnergy, BATTERY_TOL_J};
use crate::re_model::ReError;
use crate::scenario::{ActiveSet, Scenario, ScenarioError};

/// Absolute tolerance on row residuals.
pub const FEAS_TOL: f64 = 1e-9;
/// Tolerance used to read a relaxed value as a bit.
pub const BIT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("inconsistent solution: {0}")]
    InconsistentSolution(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Re(#[from] ReError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// Sparse linear row `Σ coef·x  (sense)  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn new(coefs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Row { coefs, sense, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// A named, contiguous run of rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowFamily {
    pub name: &'static str,
    pub start: usize,
    pub len: usize,
}

/// A linear program over binary and bounded continuous variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Bilp {
    pub cost: Vec<f64>,
    /// Objective offset carried by terms that do not depend on any decision.
    pub constant: f64,
    pub rows: Vec<Row>,
    pub binary: Vec<bool>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub families: Vec<RowFamily>,
}

impl Bilp {
    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.binary.iter().filter(|b| **b).count()
    }

    pub fn add_binary(&mut self, cost: f64) -> usize {
        self.cost.push(cost);
        self.binary.push(true);
        self.lower.push(0.0);
        self.upper.push(1.0);
        self.cost.len() - 1
    }

    pub fn add_continuous(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.cost.push(cost);
        self.binary.push(false);
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.len() - 1
    }

    /// Appends a row to `family`, extending the last family when the name matches.
    pub fn push_row(&mut self, family: &'static str, row: Row) {
        match self.families.last_mut() {
            Some(f) if f.name == family && f.start + f.len == self.rows.len() => f.len += 1,
            _ => self.families.push(RowFamily { name: family, start: self.rows.len(), len: 1 }),
        }
        self.rows.push(row);
    }

    /// Number of rows over every family called `name`.
    pub fn family_rows(&self, name: &str) -> usize {
        self.families.iter().filter(|f| f.name == name).map(|f| f.len).sum()
    }

    /// Pins variable `j` to `value` through its bounds.
    pub fn fix(&mut self, j: usize, value: f64) {
        self.lower[j] = value;
        self.upper[j] = value;
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.constant + self.cost.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(x)).fold(0.0, f64::max);
        let bounds = x
            .iter()
            .enumerate()
            .map(|(j, &v)| (self.lower[j] - v).max(v - self.upper[j]).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Feasibility with a row tolerance scaled to the row's magnitude.
    pub fn is_feasible(&self, x: &[f64]) -> bool {
        if x.len() != self.num_vars() {
            return false;
        }
        let binary_ok = self
            .binary
            .iter()
            .zip(x)
            .all(|(&b, &v)| !b || v.abs() <= BIT_TOL || (v - 1.0).abs() <= BIT_TOL);
        binary_ok
            && self.rows.iter().all(|r| r.violation(x) <= row_tolerance(r))
            && x.iter().enumerate().all(|(j, &v)| v >= self.lower[j] - BIT_TOL && v <= self.upper[j] + BIT_TOL)
    }

    /// Structural checks: indices in range, finite data, consistent bounds.
    pub fn validate(&self) -> Result<(), ProblemError> {
        let n = self.num_vars();
        if self.binary.len() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(ProblemError::Input("variable vectors disagree in length".into()));
        }
        if !self.constant.is_finite() || self.cost.iter().any(|c| !c.is_finite()) {
            return Err(ProblemError::Input("non-finite cost".into()));
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() || row.coefs.iter().any(|&(j, a)| j >= n || !a.is_finite()) {
                return Err(ProblemError::Input(format!("row {r} references an undeclared variable or is not finite")));
            }
        }
        if (0..n).any(|j| self.lower[j] > self.upper[j]) {
            return Err(ProblemError::Input("empty variable bound".into()));
        }
        Ok(())
    }
}

/// Row tolerance: absolute 1e-9 on unit-scale rows, relative on Joule-scale rows.
pub fn row_tolerance(row: &Row) -> f64 {
    let scale = row.coefs.iter().map(|&(_, a)| a.abs()).fold(row.rhs.abs(), f64::max);
    FEAS_TOL * scale.max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Knowledge {
    Zero,
    Perfect,
    Partial,
}

impl Knowledge {
    pub fn name(self) -> &'static str {
        match self {
            Knowledge::Zero => "zero",
            Knowledge::Perfect => "perfect",
            Knowledge::Partial => "partial",
        }
    }
}

/// Index layout of the decision variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarMap {
    pub case: Knowledge,
    pub mbs: usize,
    pub drones: usize,
    /// Sites including the charging station (`Z + 1`).
    pub sites: usize,
    /// Slots covered by the program.
    pub slots: usize,
    /// Absolute index of the first covered slot.
    pub first_slot: usize,
    /// Scenario copies of the second-stage variables.
    pub scenarios: usize,
    pub pi_start: usize,
    pub eps_start: usize,
    pub zeta_start: usize,
    pub curtail_start: usize,
    pub end: usize,
}

impl VarMap {
    pub fn new(case: Knowledge, mbs: usize, drones: usize, sites: usize, slots: usize, first_slot: usize, scenarios: usize) -> Self {
        let horizon = case != Knowledge::Zero;
        let pi_start = 0;
        let eps_start = pi_start + mbs * slots;
        let zeta_start = eps_start + scenarios * slots * drones * sites;
        let zeta_len = if horizon { scenarios * slots * drones * sites * sites } else { 0 };
        let curtail_start = zeta_start + zeta_len;
        let curtail_len = if horizon { scenarios * slots * drones } else { 0 };
        VarMap {
            case,
            mbs,
            drones,
            sites,
            slots,
            first_slot,
            scenarios,
            pi_start,
            eps_start,
            zeta_start,
            curtail_start,
            end: curtail_start + curtail_len,
        }
    }

    pub fn pi(&self, b: usize, k: usize) -> usize {
        self.pi_start + b * self.mbs + k
    }

    pub fn eps(&self, w: usize, b: usize, l: usize, i: usize) -> usize {
        self.eps_start + ((w * self.slots + b) * self.drones + l) * self.sites + i
    }

    pub fn zeta(&self, w: usize, b: usize, l: usize, j: usize, i: usize) -> usize {
        debug_assert!(self.has_zeta());
        self.zeta_start + (((w * self.slots + b) * self.drones + l) * self.sites + j) * self.sites + i
    }

    pub fn curtail(&self, w: usize, b: usize, l: usize) -> usize {
        debug_assert!(self.has_zeta());
        self.curtail_start + (w * self.slots + b) * self.drones + l
    }

    pub fn has_zeta(&self) -> bool {
        self.case != Knowledge::Zero
    }

    pub fn num_pi(&self) -> usize {
        self.eps_start - self.pi_start
    }

    pub fn num_eps(&self) -> usize {
        self.zeta_start - self.eps_start
    }

    pub fn num_zeta(&self) -> usize {
        self.curtail_start - self.zeta_start
    }

    pub fn num_curtail(&self) -> usize {
        self.end - self.curtail_start
    }

    /// Decision variable class of index `j`.
    pub fn describe(&self, j: usize) -> VarKind {
        if j < self.eps_start {
            let r = j - self.pi_start;
            VarKind::Pi { b: r / self.mbs, k: r % self.mbs }
        } else if j < self.zeta_start {
            let r = j - self.eps_start;
            let i = r % self.sites;
            let r = r / self.sites;
            let l = r % self.drones;
            let r = r / self.drones;
            VarKind::Eps { w: r / self.slots, b: r % self.slots, l, i }
        } else if j < self.curtail_start {
            let r = j - self.zeta_start;
            let i = r % self.sites;
            let r = r / self.sites;
            let jj = r % self.sites;
            let r = r / self.sites;
            let l = r % self.drones;
            let r = r / self.drones;
            VarKind::Zeta { w: r / self.slots, b: r % self.slots, l, j: jj, i }
        } else {
            let r = j - self.curtail_start;
            let l = r % self.drones;
            let r = r / self.drones;
            VarKind::Curtail { w: r / self.slots, b: r % self.slots, l }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Pi { b: usize, k: usize },
    Eps { w: usize, b: usize, l: usize, i: usize },
    Zeta { w: usize, b: usize, l: usize, j: usize, i: usize },
    Curtail { w: usize, b: usize, l: usize },
}

/// State and data a program was built from; needed to decode and repair.
#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    /// Drone sites before the first covered slot.
    pub initial_sites: Vec<usize>,
    /// Battery levels before the first covered slot.
    pub initial_battery: Vec<f64>,
    /// Renewable arrival rates `[w][l][b]` relative to the first covered slot.
    pub phi: Vec<Vec<Vec<f64>>>,
    pub prob: Vec<f64>,
}

/// A built program together with its layout and origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub bilp: Bilp,
    pub map: VarMap,
    pub context: Context,
}

/// Decoded operating plan for one scenario copy.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Schedule {
    pub first_slot: usize,
    /// `[b][k]` MBS status.
    pub mbs_on: Vec<Vec<bool>>,
    /// `[b][l]` drone site.
    pub sites: Vec<Vec<usize>>,
    pub initial_sites: Vec<usize>,
    /// `[b][l]` intake withheld because the battery was full.
    pub curtail: Vec<Vec<f64>>,
    /// `[b]` recomputed slot energies.
    pub ledger: Vec<NetworkSlotEnergy>,
    /// `[b][l]` battery level at the end of each slot; `batteries[0]` precedes slot 0.
    pub batteries: Vec<Vec<f64>>,
    /// Slots where offloaded users exceeded demand and the macro load was clamped at zero.
    pub clamped_slots: Vec<usize>,
}

impl Schedule {
    pub fn slots(&self) -> usize {
        self.sites.len()
    }

    /// Site of drone `l` before slot `b`.
    pub fn previous_site(&self, b: usize, l: usize) -> usize {
        if b == 0 {
            self.initial_sites[l]
        } else {
            self.sites[b - 1][l]
        }
    }

    /// `(from, to)` trip of every drone in slot `b`.
    pub fn transitions(&self, b: usize) -> Vec<(usize, usize)> {
        (0..self.sites[b].len()).map(|l| (self.previous_site(b, l), self.sites[b][l])).collect()
    }

    pub fn total_energy(&self) -> f64 {
        self.ledger.iter().map(NetworkSlotEnergy::total).sum()
    }

    /// Number of drone trips (slots where a drone changes site).
    pub fn trips(&self) -> usize {
        (0..self.slots()).map(|b| self.transitions(b).iter().filter(|(j, i)| j != i).count()).sum()
    }
}

fn read_bit(x: f64, what: &dyn Fn() -> String) -> Result<bool, ProblemError> {
    if x.abs() <= BIT_TOL {
        Ok(false)
    } else if (x - 1.0).abs() <= BIT_TOL {
        Ok(true)
    } else {
        Err(ProblemError::InconsistentSolution(format!("{} = {x} is not binary", what())))
    }
}

/// Decodes the solution `x` into one schedule per scenario copy.
///
/// The schedule invariants are re-checked from the raw values without
/// trusting the rows, slot energies are recomputed with the energy model and
/// the probability-weighted ledger total is compared to the program objective.
pub fn decode(problem: &Problem, scenario: &Scenario, x: &[f64]) -> Result<Vec<Schedule>, ProblemError> {
    let map = &problem.map;
    let ctx = &problem.context;
    if x.len() != map.end {
        return Err(ProblemError::InconsistentSolution(format!("expected {} values, got {}", map.end, x.len())));
    }
    let model = EnergyModel::new(scenario)?;
    let s_bar = scenario.params.battery_capacity_j;
    let cap = scenario.topology.macro_cell.capacity;

    let mut mbs_on = Vec::with_capacity(map.slots);
    for b in 0..map.slots {
        let row = (0..map.mbs)
            .map(|k| read_bit(x[map.pi(b, k)], &|| format!("pi[{b}][{k}]")))
            .collect::<Result<Vec<_>, _>>()?;
        mbs_on.push(row);
    }

    let mut schedules = Vec::with_capacity(map.scenarios);
    let mut weighted = 0.0;
    let mut any_clamped = false;
    for w in 0..map.scenarios {
        let mut sites = Vec::with_capacity(map.slots);
        for b in 0..map.slots {
            let mut row = Vec::with_capacity(map.drones);
            for l in 0..map.drones {
                let mut chosen = None;
                for i in 0..map.sites {
                    if read_bit(x[map.eps(w, b, l, i)], &|| format!("eps[{w}][{b}][{l}][{i}]"))? {
                        if chosen.is_some() {
                            return Err(ProblemError::InconsistentSolution(format!("drone {l} holds two sites in slot {b}")));
                        }
                        chosen = Some(i);
                    }
                }
                row.push(chosen.ok_or_else(|| {
                    ProblemError::InconsistentSolution(format!("drone {l} has no site in slot {b}"))
                })?);
            }
            let mut used = vec![false; map.sites];
            for &i in &row {
                if i != 0 && std::mem::replace(&mut used[i], true) {
                    return Err(ProblemError::InconsistentSolution(format!("site {i} hosts two drones in slot {b}")));
                }
            }
            sites.push(row);
        }

        let mut schedule = Schedule {
            first_slot: map.first_slot,
            mbs_on: mbs_on.clone(),
            sites,
            initial_sites: ctx.initial_sites.clone(),
            curtail: Vec::with_capacity(map.slots),
            ledger: Vec::with_capacity(map.slots),
            batteries: vec![ctx.initial_battery.clone()],
            clamped_slots: Vec::new(),
        };

        if map.has_zeta() {
            for b in 0..map.slots {
                for l in 0..map.drones {
                    let (pj, pi) = (schedule.previous_site(b, l), schedule.sites[b][l]);
                    for j in 0..map.sites {
                        for i in 0..map.sites {
                            let z = read_bit(x[map.zeta(w, b, l, j, i)], &|| format!("zeta[{w}][{b}][{l}][{j}][{i}]"))?;
                            if z != (j == pj && i == pi) {
                                return Err(ProblemError::InconsistentSolution(format!(
                                    "zeta[{b}][{l}][{j}][{i}] is not the product of consecutive placements"
                                )));
                            }
                        }
                    }
                }
            }
        }

        for b in 0..map.slots {
            let slot = map.first_slot + b;
            let active = ActiveSet { mbs_on: &schedule.mbs_on[b], drone_sites: &schedule.sites[b] };
            let residual = scenario.macro_residual(slot, active);
            if residual > cap + 1e-9 * cap.max(1.0) {
                return Err(ProblemError::InconsistentSolution(format!(
                    "macro load {residual:.3} exceeds capacity {cap} in slot {slot}"
                )));
            }
            if residual < 0.0 {
                schedule.clamped_slots.push(slot);
            }
            let prev_levels = schedule.batteries[b].clone();
            let mut next = Vec::with_capacity(map.drones);
            let mut curtail_row = Vec::with_capacity(map.drones);
            let mut drone_energy = Vec::with_capacity(map.drones);
            for l in 0..map.drones {
                let (j, i) = (schedule.previous_site(b, l), schedule.sites[b][l]);
                let raw = model.drone_slot(slot, j, i, ctx.phi[w][l][b])?;
                let level = prev_levels[l];
                let withheld = if map.has_zeta() {
                    x[map.curtail(w, b, l)].max(0.0)
                } else {
                    (level + raw.intake() - s_bar).max(0.0)
                };
                if withheld > raw.intake() + BATTERY_TOL_J {
                    return Err(ProblemError::InconsistentSolution(format!(
                        "drone {l} withholds {withheld} J of {} J intake in slot {slot}",
                        raw.intake()
                    )));
                }
                let e = raw.curtail(withheld);
                if e.drawn > level + BATTERY_TOL_J {
                    return Err(ProblemError::InconsistentSolution(format!(
                        "drone {l} needs {:.3} J with {level:.3} J stored in slot {slot}",
                        e.drawn
                    )));
                }
                if level + e.intake() > s_bar + BATTERY_TOL_J {
                    return Err(ProblemError::InconsistentSolution(format!(
                        "drone {l} battery overflows in slot {slot}"
                    )));
                }
                next.push((level + e.intake() - e.consumed).clamp(0.0, s_bar));
                curtail_row.push(withheld);
                drone_energy.push(e);
            }
            schedule.ledger.push(model.network_slot(slot, active, drone_energy)?);
            schedule.batteries.push(next);
            schedule.curtail.push(curtail_row);
        }
        any_clamped |= !schedule.clamped_slots.is_empty();
        weighted += ctx.prob[w] * schedule.total_energy();
        schedules.push(schedule);
    }

    let objective = problem.bilp.objective(x);
    if !any_clamped && (weighted - objective).abs() > 1e-6 * objective.abs().max(1.0) {
        return Err(ProblemError::InconsistentSolution(format!(
            "ledger total {weighted} differs from objective {objective}"
        )));
    }
    Ok(schedules)
}

/// Decodes a single-copy program (zero or perfect knowledge).
pub fn decode_one(problem: &Problem, scenario: &Scenario, x: &[f64]) -> Result<Schedule, ProblemError> {
    let mut all = decode(problem, scenario, x)?;
    Ok(all.swap_remove(0))
}

/// Expected counts of binary variables and rows per family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Complexity {
    pub pi: usize,
    pub eps: usize,
    pub zeta: usize,
    pub battery: usize,
    pub storage: usize,
    pub one_hot: usize,
    pub exclusivity: usize,
    pub capacity: usize,
    pub linearization: usize,
}

impl Complexity {
    /// Closed-form counts for a case with `m` MBSs, `d` drones, `z` serving
    /// sites, `b` slots and `w` scenario copies.
    pub fn formula(case: Knowledge, m: usize, d: usize, z: usize, b: usize, w: usize) -> Self {
        let s = z + 1;
        let (b_eff, w_eff) = match case {
            Knowledge::Zero => (1, 1),
            Knowledge::Perfect => (b, 1),
            Knowledge::Partial => (b, w),
        };
        let horizon = case != Knowledge::Zero;
        let per = b_eff * w_eff;
        Complexity {
            pi: m * b_eff,
            eps: d * s * per,
            zeta: if horizon { d * s * s * per } else { 0 },
            battery: d * per,
            storage: d * per,
            one_hot: d * per,
            exclusivity: z * per,
            capacity: per,
            linearization: if horizon { 3 * d * s * s * per } else { 0 },
        }
    }

    /// Counts measured on a built program.
    pub fn measure(p: &Problem) -> Self {
        let f = |name| p.bilp.family_rows(name);
        Complexity {
            pi: p.map.num_pi(),
            eps: p.map.num_eps(),
            zeta: p.map.num_zeta(),
            battery: f("battery"),
            storage: f("storage"),
            one_hot: f("one_hot"),
            exclusivity: f("exclusivity"),
            capacity: f("capacity"),
            linearization: f("linearization"),
        }
    }
}
