//! Slot-by-slot rollouts of the three knowledge cases, overload accounting
//! and case comparison.

mod report;

use std::time::Duration;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

pub use report::{compare, write_placements_csv, write_summary_csv, write_traces_csv, CaseSummary, ComparisonReport};

use crate::energy::{EnergyError, EnergyModel, SlotEnergy, BATTERY_TOL_J};
use crate::problems::{build_partial, build_perfect, build_zero, decode, decode_one, Knowledge, Problem, ProblemError, Schedule, ZeroInput};
use crate::re_model::{ReError, ScenarioTree};
use crate::scenario::{ActiveSet, Scenario};
use crate::solver::{branch_and_bound, branch_and_bound_with, relaxed_heuristic, BnbOptions, SolveReport, SolverError, Status, DEFAULT_TIME_LIMIT};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Re(#[from] ReError),
}

/// Rollout settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    /// Budget of every exact solve.
    pub time_limit: Duration,
    /// Relaxations the first-stage search of the partial case may solve
    /// (it is also bounded by `time_limit`).
    pub first_stage_nodes: u64,
    /// Largest full product tree; bigger trees are replaced by `tree_samples` draws.
    pub tree_cap: usize,
    pub tree_samples: usize,
    /// Seed of the sampled tree.
    pub tree_seed: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            time_limit: DEFAULT_TIME_LIMIT,
            first_stage_nodes: 2000,
            tree_cap: 8,
            tree_samples: 4,
            tree_seed: 0,
        }
    }
}

/// Derives the seed of run `index` on the named sub-stream of `master`.
pub fn substream(master: u64, name: &str, index: u64) -> u64 {
    let tag = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(tag);
    rng.set_word_pos(2 * index as u128);
    rng.next_u64()
}

/// One realization of the renewable arrivals, `phi[l][b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub seed: u64,
    pub phi: Vec<Vec<f64>>,
}

impl Draw {
    pub fn new(scenario: &Scenario, seed: u64) -> Self {
        Draw { seed, phi: scenario.re.realization(seed) }
    }
}

/// What happened in one slot of a rollout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotRecord {
    pub slot: usize,
    pub macro_j: f64,
    pub mbs_j: f64,
    pub drones_j: f64,
    pub mbs_on: Vec<bool>,
    pub sites: Vec<usize>,
    /// Per-drone energy, withheld intake already removed.
    pub drones: Vec<SlotEnergy<f64>>,
    /// Battery level of each drone at the end of the slot.
    pub batteries: Vec<f64>,
    pub overload: bool,
    /// Users beyond the macro capacity.
    pub unserved: f64,
}

impl SlotRecord {
    pub fn total(&self) -> f64 {
        self.macro_j + self.mbs_j + self.drones_j
    }

    pub fn active_mbs(&self) -> usize {
        self.mbs_on.iter().filter(|&&on| on).count()
    }

    pub fn active_drones(&self) -> usize {
        self.sites.iter().filter(|&&i| i != 0).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub case: Knowledge,
    pub seed: u64,
    /// Relative spread of a two-point renewable process, if that is the model.
    pub uncertainty_x: Option<f64>,
    /// Solver status of the plan that produced the trace.
    pub status: String,
    pub initial_batteries: Vec<f64>,
    pub slots: Vec<SlotRecord>,
}

impl Trace {
    pub fn total_energy(&self) -> f64 {
        self.slots.iter().map(SlotRecord::total).sum()
    }

    pub fn overloads(&self) -> usize {
        self.slots.iter().filter(|s| s.overload).count()
    }

    /// Largest relative mismatch of `S_end - S_0 = Σ (intake - consumed)` over the drones.
    pub fn conservation_error(&self) -> f64 {
        (0..self.initial_batteries.len())
            .map(|l| {
                let start = self.initial_batteries[l];
                let end = self.slots.last().map_or(start, |s| s.batteries[l]);
                let flow: f64 = self.slots.iter().map(|s| s.drones[l].intake() - s.drones[l].consumed).sum();
                let scale = start.abs().max(end.abs()).max(1.0);
                ((end - start) - flow).abs() / scale
            })
            .fold(0.0, f64::max)
    }
}

fn uncertainty_x(scenario: &Scenario) -> Option<f64> {
    match scenario.re.uncertainty {
        crate::re_model::Uncertainty::TwoPoint { x } => Some(x),
        _ => None,
    }
}

fn overload_of(scenario: &Scenario, slot: usize, mbs_on: &[bool], sites: &[usize]) -> (bool, f64) {
    let residual = scenario.macro_residual(slot, ActiveSet { mbs_on, drone_sites: sites });
    let over = residual - scenario.topology.macro_cell.capacity;
    (over > 1e-9, over.max(0.0))
}

fn records_of(scenario: &Scenario, schedule: &Schedule) -> Vec<SlotRecord> {
    (0..schedule.slots())
        .map(|b| {
            let slot = schedule.first_slot + b;
            let e = &schedule.ledger[b];
            let (overload, unserved) = overload_of(scenario, slot, &schedule.mbs_on[b], &schedule.sites[b]);
            SlotRecord {
                slot,
                macro_j: e.macro_j,
                mbs_j: e.mbs_j,
                drones_j: e.drones_j,
                mbs_on: schedule.mbs_on[b].clone(),
                sites: schedule.sites[b].clone(),
                drones: e.per_drone.clone(),
                batteries: schedule.batteries[b + 1].clone(),
                overload,
                unserved,
            }
        })
        .collect()
}

/// Best effort for a slot no plan can serve: every allowed MBS on, drones with
/// charge to spare (including the way back) at the busiest free sites, the
/// rest at the station.
fn fallback_slot(
    model: &EnergyModel<'_>,
    slot: usize,
    mbs_on: Vec<bool>,
    prev: &[usize],
    levels: &[f64],
    phi: &[f64],
) -> Result<SlotRecord, SimError> {
    let s = model.scenario;
    let s_bar = s.params.battery_capacity_j;
    let d = prev.len();
    let afford = |l: usize, i: usize| -> Option<SlotEnergy<f64>> {
        let e = model.drone_slot(slot, prev[l], i, phi[l]).ok()?;
        let back = if i == 0 { 0.0 } else { model.drone_slot(slot, i, 0, 0.0).ok()?.drawn };
        let intake = e.intake().min((s_bar - levels[l]).max(0.0));
        (e.drawn.max(e.drawn + back - intake) <= levels[l] + BATTERY_TOL_J).then_some(e)
    };
    let mut by_charge: Vec<usize> = (0..d).collect();
    by_charge.sort_by(|&a, &b| levels[b].total_cmp(&levels[a]).then(a.cmp(&b)));
    let mut free: Vec<usize> = (1..s.num_sites()).collect();
    free.sort_by(|&a, &b| s.site_load(slot, b).total_cmp(&s.site_load(slot, a)).then(a.cmp(&b)));
    let mut sites = vec![0usize; d];
    let mut energy: Vec<Option<SlotEnergy<f64>>> = vec![None; d];
    for &l in &by_charge {
        if let Some(pos) = free.iter().position(|&i| afford(l, i).is_some()) {
            let i = free.remove(pos);
            sites[l] = i;
            energy[l] = afford(l, i);
        }
    }
    let mut drones = Vec::with_capacity(d);
    let mut batteries = Vec::with_capacity(d);
    for l in 0..d {
        let e = match energy[l] {
            Some(e) => e,
            None => model.drone_slot(slot, prev[l], 0, phi[l])?,
        };
        let withheld = (levels[l] + e.intake() - s_bar).max(0.0);
        let e = e.curtail(withheld);
        batteries.push((levels[l] + e.intake() - e.consumed).clamp(0.0, s_bar));
        drones.push(e);
    }
    let active = ActiveSet { mbs_on: &mbs_on, drone_sites: &sites };
    let net = model.network_slot(slot, active, drones)?;
    let (overload, unserved) = overload_of(s, slot, &mbs_on, &sites);
    Ok(SlotRecord {
        slot,
        macro_j: net.macro_j,
        mbs_j: net.mbs_j,
        drones_j: net.drones_j,
        mbs_on,
        sites,
        drones: net.per_drone,
        batteries,
        overload,
        unserved,
    })
}

/// Myopic rollout; `fixed_mbs[b]` pins the MBS statuses when given.
fn myopic(scenario: &Scenario, draw: &Draw, fixed_mbs: Option<&[Vec<bool>]>, opts: &SimOptions) -> Result<(Vec<SlotRecord>, bool), SimError> {
    let model = EnergyModel::new(scenario)?;
    let d = scenario.num_drones();
    let mut prev = vec![0usize; d];
    let mut levels = scenario.params.initial_battery_j.clone();
    let mut records = Vec::with_capacity(scenario.horizon);
    let mut all_solved = true;
    for b in 0..scenario.horizon {
        let phi: Vec<f64> = (0..d).map(|l| draw.phi[l][b]).collect();
        let mut problem = build_zero(scenario, ZeroInput { slot: b, prev_sites: &prev, batteries: &levels, phi: &phi })?;
        if let Some(fixed) = fixed_mbs {
            problem.fix_mbs(std::slice::from_ref(&fixed[b]))?;
        }
        let report = branch_and_bound(&problem.bilp, opts.time_limit)?;
        let record = match &report.x {
            Some(x) => {
                let schedule = decode_one(&problem, scenario, x)?;
                records_of(scenario, &schedule).remove(0)
            }
            None => {
                all_solved = false;
                let mbs_on = match fixed_mbs {
                    Some(fixed) => fixed[b].clone(),
                    None => vec![true; scenario.num_mbs()],
                };
                fallback_slot(&model, b, mbs_on, &prev, &levels, &phi)?
            }
        };
        prev.clone_from(&record.sites);
        levels.clone_from(&record.batteries);
        records.push(record);
    }
    Ok((records, all_solved))
}

fn trace(scenario: &Scenario, case: Knowledge, draw: &Draw, status: &str, slots: Vec<SlotRecord>) -> Trace {
    Trace {
        case,
        seed: draw.seed,
        uncertainty_x: uncertainty_x(scenario),
        status: status.to_string(),
        initial_batteries: scenario.params.initial_battery_j.clone(),
        slots,
    }
}

/// Zero knowledge: one single-slot program per slot, solved at its start with
/// the current arrival rate. Slots without a feasible plan are flagged and
/// served best effort.
pub fn rollout_zero(scenario: &Scenario, draw: &Draw, opts: &SimOptions) -> Result<Trace, SimError> {
    let (slots, solved) = myopic(scenario, draw, None, opts)?;
    let status = if solved { "optimal" } else { "overload_fallback" };
    Ok(trace(scenario, Knowledge::Zero, draw, status, slots))
}

/// Exact solution of the whole-horizon program with `draw` known in advance.
#[derive(Debug, Clone)]
pub struct HorizonPlan {
    pub problem: Problem,
    pub report: SolveReport,
}

/// Solves the perfect-knowledge program for `draw`.
pub fn plan_perfect(scenario: &Scenario, draw: &Draw, opts: &SimOptions) -> Result<HorizonPlan, SimError> {
    let problem = build_perfect(scenario, &draw.phi)?;
    let report = branch_and_bound(&problem.bilp, opts.time_limit)?;
    Ok(HorizonPlan { problem, report })
}

fn horizon_trace(scenario: &Scenario, case: Knowledge, draw: &Draw, plan: &HorizonPlan, fixed_mbs: Option<&[Vec<bool>]>, opts: &SimOptions) -> Result<Trace, SimError> {
    match &plan.report.x {
        Some(x) => {
            let schedule = decode_one(&plan.problem, scenario, x)?;
            Ok(trace(scenario, case, draw, plan.report.status.name(), records_of(scenario, &schedule)))
        }
        None => {
            // No horizon plan exists: fall back to slot-by-slot planning.
            let (slots, _) = myopic(scenario, draw, fixed_mbs, opts)?;
            let status = format!("{}_fallback", plan.report.status.name());
            Ok(trace(scenario, case, draw, &status, slots))
        }
    }
}

/// Perfect knowledge: the whole horizon planned at once against `draw`.
pub fn rollout_perfect(scenario: &Scenario, draw: &Draw, opts: &SimOptions) -> Result<Trace, SimError> {
    let plan = plan_perfect(scenario, draw, opts)?;
    horizon_trace(scenario, Knowledge::Perfect, draw, &plan, None, opts)
}

/// First-stage decision of the partial case: MBS statuses for every slot.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstStage {
    pub mbs_on: Vec<Vec<bool>>,
    pub status: Status,
    pub scenarios: usize,
    pub sampled: bool,
}

/// The tree used by the partial case: the full product when it fits under
/// `opts.tree_cap`, a sample otherwise.
pub fn partial_tree(scenario: &Scenario, opts: &SimOptions) -> Result<ScenarioTree, SimError> {
    Ok(scenario.re.tree_or_sampled(2, opts.tree_cap, opts.tree_samples, opts.tree_seed)?)
}

/// Solves the two-stage program over `tree` and keeps its MBS statuses.
///
/// The search starts from the rounding heuristic and stops after
/// `opts.first_stage_nodes` relaxations; without any plan every MBS stays on.
pub fn first_stage(scenario: &Scenario, tree: &ScenarioTree, opts: &SimOptions) -> Result<FirstStage, SimError> {
    let problem = build_partial(scenario, tree)?;
    let start = relaxed_heuristic(&problem, scenario).ok().and_then(|r| r.x);
    let bnb = BnbOptions {
        time_limit: opts.time_limit,
        incumbent: start,
        max_nodes: opts.first_stage_nodes,
        ..BnbOptions::default()
    };
    let report = branch_and_bound_with(&problem.bilp, &bnb)?;
    let mbs_on = match &report.x {
        Some(x) => decode(&problem, scenario, x)?.swap_remove(0).mbs_on,
        None => vec![vec![true; scenario.num_mbs()]; scenario.horizon],
    };
    Ok(FirstStage { mbs_on, status: report.status, scenarios: tree.len(), sampled: tree.sampled })
}

/// Partial knowledge: MBS statuses come from the first stage; drone placements
/// are re-optimized against the realized `draw` (recourse).
///
/// `perfect`, the perfect-knowledge plan for the same draw, bounds the
/// recourse from below and seeds its search.
pub fn rollout_partial(
    scenario: &Scenario,
    first: &FirstStage,
    draw: &Draw,
    perfect: Option<&HorizonPlan>,
    opts: &SimOptions,
) -> Result<Trace, SimError> {
    let mut problem = build_perfect(scenario, &draw.phi)?;
    problem.fix_mbs(&first.mbs_on)?;
    let mut bnb = BnbOptions { time_limit: opts.time_limit, ..BnbOptions::default() };
    if let Some(plan) = perfect.filter(|p| p.report.status == Status::Optimal) {
        bnb.incumbent = plan.report.x.clone();
        bnb.lower_bound = plan.report.objective;
    }
    if bnb.incumbent.is_none() {
        bnb.incumbent = relaxed_heuristic(&problem, scenario).ok().and_then(|r| r.x);
    }
    let report = branch_and_bound_with(&problem.bilp, &bnb)?;
    let plan = HorizonPlan { problem, report };
    horizon_trace(scenario, Knowledge::Partial, draw, &plan, Some(&first.mbs_on), opts)
}
