use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{first_stage, partial_tree, plan_perfect, rollout_partial, rollout_zero, horizon_trace, Draw, SimError, SimOptions, Trace};
use crate::problems::Knowledge;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseSummary {
    pub case: Knowledge,
    pub runs: usize,
    pub mean_energy_j: f64,
    /// Sample standard deviation; zero for a single run.
    pub std_energy_j: f64,
    pub mean_overloads: f64,
    pub total_overloads: usize,
    /// Mean number of deployed drones in each slot.
    pub mean_active_drones: Vec<f64>,
}

impl CaseSummary {
    fn of(case: Knowledge, traces: &[&Trace]) -> Self {
        let n = traces.len();
        let totals: Vec<f64> = traces.iter().map(|t| t.total_energy()).collect();
        let mean = totals.iter().sum::<f64>() / n.max(1) as f64;
        let std = if n > 1 { (totals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        let total_overloads: usize = traces.iter().map(|t| t.overloads()).sum();
        let slots = traces.first().map_or(0, |t| t.slots.len());
        let mean_active_drones = (0..slots)
            .map(|b| traces.iter().map(|t| t.slots[b].active_drones() as f64).sum::<f64>() / n as f64)
            .collect();
        CaseSummary {
            case,
            runs: n,
            mean_energy_j: mean,
            std_energy_j: std,
            mean_overloads: total_overloads as f64 / n.max(1) as f64,
            total_overloads,
            mean_active_drones,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// Ordered by case (as requested), then by seed.
    pub traces: Vec<Trace>,
    pub summary: Vec<CaseSummary>,
}

impl ComparisonReport {
    pub fn case(&self, case: Knowledge) -> Option<&CaseSummary> {
        self.summary.iter().find(|s| s.case == case)
    }
}

/// Rolls out every case on every seed. Seeds run in parallel; the result does
/// not depend on the thread count.
pub fn compare(scenario: &Scenario, cases: &[Knowledge], seeds: &[u64], opts: &SimOptions) -> Result<ComparisonReport, SimError> {
    let first = if cases.contains(&Knowledge::Partial) {
        Some(first_stage(scenario, &partial_tree(scenario, opts)?, opts)?)
    } else {
        None
    };
    let per_seed = seeds
        .par_iter()
        .map(|&seed| {
            let draw = Draw::new(scenario, seed);
            let perfect = if cases.contains(&Knowledge::Perfect) { Some(plan_perfect(scenario, &draw, opts)?) } else { None };
            cases
                .iter()
                .map(|&case| match case {
                    Knowledge::Zero => rollout_zero(scenario, &draw, opts),
                    Knowledge::Perfect => {
                        horizon_trace(scenario, case, &draw, perfect.as_ref().expect("planned above"), None, opts)
                    }
                    Knowledge::Partial => {
                        rollout_partial(scenario, first.as_ref().expect("solved above"), &draw, perfect.as_ref(), opts)
                    }
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let mut traces = Vec::with_capacity(cases.len() * seeds.len());
    for c in 0..cases.len() {
        traces.extend(per_seed.iter().map(|run| run[c].clone()));
    }
    let summary = cases
        .iter()
        .map(|&case| {
            let of_case: Vec<&Trace> = traces.iter().filter(|t| t.case == case).collect();
            CaseSummary::of(case, &of_case)
        })
        .collect();
    Ok(ComparisonReport { traces, summary })
}

/// Per-slot trace rows:
/// `case,seed,slot,E0_J,EM_J,ED_J,Etot_J,overload,active_mbs,active_drones,battery_<l>_J...`.
pub fn write_traces_csv<W: Write>(out: W, traces: &[Trace]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let drones = traces.first().map_or(0, |t| t.initial_batteries.len());
    let mut header: Vec<String> =
        ["case", "seed", "slot", "E0_J", "EM_J", "ED_J", "Etot_J", "overload", "active_mbs", "active_drones"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    header.extend((0..drones).map(|l| format!("battery_{l}_J")));
    w.write_record(&header)?;
    for t in traces {
        for s in &t.slots {
            let mut row = vec![
                t.case.name().to_string(),
                t.seed.to_string(),
                s.slot.to_string(),
                s.macro_j.to_string(),
                s.mbs_j.to_string(),
                s.drones_j.to_string(),
                s.total().to_string(),
                u8::from(s.overload).to_string(),
                s.active_mbs().to_string(),
                s.active_drones().to_string(),
            ];
            row.extend(s.batteries.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Placement log: `case,seed,slot,site_<l>...,mbs_<k>...` (site 0 is the station).
pub fn write_placements_csv<W: Write>(out: W, traces: &[Trace]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let (drones, mbs) = traces
        .first()
        .and_then(|t| t.slots.first())
        .map_or((0, 0), |s| (s.sites.len(), s.mbs_on.len()));
    let mut header: Vec<String> = ["case", "seed", "slot"].iter().map(|s| s.to_string()).collect();
    header.extend((0..drones).map(|l| format!("site_{l}")));
    header.extend((0..mbs).map(|k| format!("mbs_{k}")));
    w.write_record(&header)?;
    for t in traces {
        for s in &t.slots {
            let mut row = vec![t.case.name().to_string(), t.seed.to_string(), s.slot.to_string()];
            row.extend(s.sites.iter().map(usize::to_string));
            row.extend(s.mbs_on.iter().map(|&on| u8::from(on).to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per case: `case,runs,mean_J,std_J,mean_overloads,total_overloads,mean_active_drones`
/// (the last column joins the per-slot means with `;`).
pub fn write_summary_csv<W: Write>(out: W, summary: &[CaseSummary]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["case", "runs", "mean_J", "std_J", "mean_overloads", "total_overloads", "mean_active_drones"])?;
    for s in summary {
        let active: Vec<String> = s.mean_active_drones.iter().map(f64::to_string).collect();
        w.write_record([
            s.case.name().to_string(),
            s.runs.to_string(),
            s.mean_energy_j.to_string(),
            s.std_energy_j.to_string(),
            s.mean_overloads.to_string(),
            s.total_overloads.to_string(),
            active.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}
