use std::time::Instant;

use super::lagrange::{solve_lp, LagrangeOptions};
use super::{relative_gap, SolveReport, SolverError, Status};
use crate::energy::{EnergyModel, BATTERY_TOL_J};
use crate::problems::{Problem, ProblemError};
use crate::scenario::Scenario;

/// Relaxation-and-rounding heuristic.
///
/// Rounds each drone's site group to its largest relaxed value (lowest index
/// on ties, drones served in index order, taken sites skipped) and MBS flags
/// at 0.5. A drone that cannot afford its rounded trip is sent to the
/// charging station for that slot. Idle station drones with charge to spare
/// then move to the busiest free site when that relieves an overloaded macro
/// cell or lowers the slot energy. MBSs are then switched on, largest load first, until
/// every slot meets the macro capacity. When the rounded plan cannot cover
/// the macro cell, a fallback deploys the fewest drones per slot, best
/// charged first.
pub fn relaxed_heuristic(problem: &Problem, scenario: &Scenario) -> Result<SolveReport, SolverError> {
    let start = Instant::now();
    let p = &problem.bilp;
    let map = &problem.map;
    let state = solve_lp(p, &LagrangeOptions::default());
    let x = &state.x;
    let model = EnergyModel::new(scenario).map_err(ProblemError::from)?;
    let s_bar = scenario.params.battery_capacity_j;

    let mut mbs_on: Vec<Vec<bool>> = (0..map.slots)
        .map(|b| {
            (0..map.mbs)
                .map(|k| {
                    let j = map.pi(b, k);
                    if p.lower[j] == p.upper[j] {
                        p.lower[j] >= 0.5
                    } else {
                        x[j] >= 0.5
                    }
                })
                .collect()
        })
        .collect();

    // Single-slot programs may demand more than the trip itself (a return
    // reserve); read that requirement off the battery rows.
    let battery_rows = p.families.iter().find(|f| f.name == "battery").map(|f| f.start);
    let required = |l: usize, i: usize, drawn: f64| match (map.has_zeta(), battery_rows) {
        (false, Some(start)) => {
            let var = map.eps(0, 0, l, i);
            p.rows[start + l].coefs.iter().find(|&&(j, _)| j == var).map_or(drawn, |&(_, a)| a)
        }
        _ => drawn,
    };

    // `minimal` starts every drone at the station instead of the rounded site.
    let plan = |w: usize, minimal: bool| -> Result<Vec<Vec<usize>>, SolverError> {
        let mut copy = Vec::with_capacity(map.slots);
        for b in 0..map.slots {
            if minimal {
                copy.push(vec![0; map.drones]);
                continue;
            }
            let mut taken = vec![false; map.sites];
            let mut row = Vec::with_capacity(map.drones);
            for l in 0..map.drones {
                let mut order: Vec<usize> = (0..map.sites).filter(|&i| p.upper[map.eps(w, b, l, i)] > 0.0).collect();
                order.sort_by(|&a, &c| x[map.eps(w, b, l, c)].total_cmp(&x[map.eps(w, b, l, a)]).then(a.cmp(&c)));
                let i = order.into_iter().find(|&i| i == 0 || !taken[i]).unwrap_or(0);
                taken[i] = true;
                row.push(i);
            }
            copy.push(row);
        }

        // Battery repair along the slots, then station drones fill macro shortfalls.
        let mut level = problem.context.initial_battery.clone();
        for b in 0..map.slots {
            let slot = map.first_slot + b;
            let before = level.clone();
            let mut spent = Vec::with_capacity(map.drones);
            for l in 0..map.drones {
                let j = if b == 0 { problem.context.initial_sites[l] } else { copy[b - 1][l] };
                let phi = problem.context.phi[w][l][b];
                let affordable = |i: usize| match model.drone_slot(slot, j, i, phi) {
                    Ok(e) if required(l, i, e.drawn) <= level[l] + BATTERY_TOL_J => Some(e),
                    _ => None,
                };
                let e = match affordable(copy[b][l]) {
                    Some(e) => e,
                    None => {
                        copy[b][l] = 0;
                        affordable(0).ok_or_else(|| {
                            SolverError::RepairFailed(format!("drone {l} cannot reach the station in slot {slot}"))
                        })?
                    }
                };
                spent.push(e);
            }
            let all_on: Vec<bool> = (0..map.mbs).map(|k| p.upper[map.pi(b, k)] > 0.0).collect();
            let shortfall = |row: &[usize]| {
                let active = crate::scenario::ActiveSet { mbs_on: &all_on, drone_sites: row };
                scenario.macro_residual(slot, active) - scenario.topology.macro_cell.capacity
            };
            let mut by_charge: Vec<usize> = (0..map.drones).collect();
            by_charge.sort_by(|&a, &c| before[c].total_cmp(&before[a]).then(a.cmp(&c)));
            let ground = |row: &[usize]| {
                let active = crate::scenario::ActiveSet { mbs_on: &all_on, drone_sites: row };
                model.ground_slot(slot, active).map_or(f64::INFINITY, |(m, k)| m + k)
            };
            for l in by_charge {
                if copy[b][l] != 0 {
                    continue;
                }
                let j = if b == 0 { problem.context.initial_sites[l] } else { copy[b - 1][l] };
                let phi = problem.context.phi[w][l][b];
                let mut free: Vec<usize> =
                    (1..map.sites).filter(|&i| !copy[b].contains(&i) && p.upper[map.eps(w, b, l, i)] > 0.0).collect();
                free.sort_by(|&a, &c| scenario.site_load(slot, c).total_cmp(&scenario.site_load(slot, a)).then(a.cmp(&c)));
                // Keep enough charge to fly back afterwards (solar-free estimate).
                let pick = free.into_iter().find_map(|i| {
                    let e = model.drone_slot(slot, j, i, phi).ok()?;
                    let back = model.drone_slot(slot, i, 0, 0.0).ok()?;
                    let need = required(l, i, e.drawn).max(e.drawn + back.drawn - e.intake());
                    (need <= before[l] + BATTERY_TOL_J).then_some((i, e))
                });
                if let Some((i, e)) = pick {
                    let mut moved = copy[b].clone();
                    moved[l] = i;
                    let saving = ground(&copy[b]) - ground(&moved) - (e.consumed - spent[l].consumed);
                    if shortfall(&copy[b]) > 1e-9 || saving > 0.0 {
                        copy[b] = moved;
                        spent[l] = e;
                    }
                }
            }
            if shortfall(&copy[b]) > 1e-9 {
                return Err(SolverError::RepairFailed(format!("macro capacity exceeded in slot {slot}")));
            }
            for (l, e) in spent.iter().enumerate() {
                let withheld = (level[l] + e.intake() - s_bar).max(0.0).min(e.intake());
                level[l] = (level[l] + e.intake() - withheld - e.consumed).clamp(0.0, s_bar);
            }
        }
        Ok(copy)
    };
    let sites = (0..map.scenarios)
        .map(|w| plan(w, false).or_else(|_| plan(w, true)))
        .collect::<Result<Vec<_>, _>>()?;

    // Capacity repair: wake MBSs, shared across scenario copies.
    for b in 0..map.slots {
        let slot = map.first_slot + b;
        let mut order: Vec<usize> = (0..map.mbs).collect();
        order.sort_by(|&a, &c| scenario.mbs_load(slot, c).total_cmp(&scenario.mbs_load(slot, a)).then(a.cmp(&c)));
        for copy in &sites {
            let shortfall = |on: &[bool]| {
                let active = crate::scenario::ActiveSet { mbs_on: on, drone_sites: &copy[b] };
                scenario.macro_residual(slot, active) - scenario.topology.macro_cell.capacity
            };
            for &k in &order {
                if shortfall(&mbs_on[b]) <= 1e-9 {
                    break;
                }
                if !mbs_on[b][k] && p.upper[map.pi(b, k)] > 0.0 {
                    mbs_on[b][k] = true;
                }
            }
            if shortfall(&mbs_on[b]) > 1e-9 {
                return Err(SolverError::RepairFailed(format!("macro capacity exceeded in slot {slot}")));
            }
        }
    }

    let point = problem.encode(scenario, &mbs_on, &sites)?;
    if !p.is_feasible(&point) {
        return Err(SolverError::RepairFailed("rounded point violates the program".into()));
    }
    let value = p.objective(&point);
    let bound = state.dual_bound.min(value);
    Ok(SolveReport {
        status: Status::Feasible { gap: relative_gap(value, bound) },
        objective: value,
        x: Some(point),
        nodes: state.iterations as u64,
        wall_time: start.elapsed(),
        dual_bound: bound,
    })
}
