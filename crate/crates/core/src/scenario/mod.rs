//! Network topology, user demand and system constants.
//!
//! Slots are indexed from 0 internally (`b = 0..horizon`). Site 0 is the
//! charging station at the macrocell origin.

mod config;
pub mod coverage;

use serde::Serialize;
use thiserror::Error;

use crate::energy::{DroneKinetics, PowerProfile};
use crate::re_model::ReProcess;
use crate::scalar::Scalar;
use coverage::{integrate_tabulated, lens_area, Disk};

pub use config::{baseline_topology, load_scenario, parse_scenario};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("cannot read scenario file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unknown cell {0:?}")]
    UnknownCell(CellId),
    #[error("infeasible trip {from} -> {to}: flight time {seconds:.2} s is not below the slot length")]
    InfeasibleTrip { from: usize, to: usize, seconds: f64 },
}

/// 3D coordinates in meters; `h` is the altitude.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct GeoPoint<F = f64> {
    pub x: F,
    pub y: F,
    pub h: F,
}

impl<F: Scalar> GeoPoint<F> {
    pub fn new(x: F, y: F, h: F) -> Self {
        GeoPoint { x, y, h }
    }

    pub fn origin() -> Self {
        GeoPoint { x: F::zero(), y: F::zero(), h: F::zero() }
    }

    pub fn distance(&self, other: &Self) -> F {
        distance(self, other)
    }

    pub fn horizontal_norm(&self) -> F {
        self.x.hypot(self.y)
    }
}

/// Euclidean 3D distance.
pub fn distance<F: Scalar>(a: &GeoPoint<F>, b: &GeoPoint<F>) -> F {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dh = a.h - b.h;
    (dx * dx + dy * dy + dh * dh).sqrt()
}

/// Trip duration `d / v`.
pub fn flight_time<F: Scalar>(d: F, v: F) -> F {
    d / v
}

/// Ground cell (macro or micro BS).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub position: GeoPoint,
    pub radius_m: f64,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Topology {
    pub macro_cell: Cell,
    pub mbs: Vec<Cell>,
    /// Candidate drone sites; index 0 is the charging station.
    pub drone_sites: Vec<GeoPoint>,
    pub drone_coverage_radius_m: f64,
    pub drone_capacity: f64,
    pub drones: usize,
}

impl Topology {
    /// Number of candidate locations including the charging station (Z+1).
    pub fn num_sites(&self) -> usize {
        self.drone_sites.len()
    }

    pub fn num_mbs(&self) -> usize {
        self.mbs.len()
    }
}

/// Identity of a base station for load queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellId {
    Macro,
    Mbs(usize),
    /// Drone base station `l`; its cell depends on where it is placed.
    Drone(usize),
}

/// Piecewise-constant density on a regular grid, in users per m² (integrates to 1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TabulatedPdf {
    pub x0_m: f64,
    pub y0_m: f64,
    pub cell_m: f64,
    pub nx: usize,
    pub ny: usize,
    /// One grid (static) or one per slot, row-major with x fastest.
    pub grids: Vec<Vec<f64>>,
}

impl TabulatedPdf {
    pub fn density(&self, slot: usize, x: f64, y: f64) -> f64 {
        let grid = &self.grids[slot.min(self.grids.len() - 1)];
        let fx = (x - self.x0_m) / self.cell_m;
        let fy = (y - self.y0_m) / self.cell_m;
        if fx < 0.0 || fy < 0.0 {
            return 0.0;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        if ix >= self.nx || iy >= self.ny {
            return 0.0;
        }
        grid[iy * self.nx + ix]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpatialPdf {
    Uniform,
    /// Fraction of `U^b` inside each MBS cell and each drone site (index 0 unused).
    FixedPerSite { mbs: Vec<f64>, sites: Vec<f64> },
    Tabulated(TabulatedPdf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserModel {
    /// Average number of users `U^b` per slot.
    pub users: Vec<f64>,
    pub pdf: SpatialPdf,
}

/// Which power enters the serving term of a moving drone's slot energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ServingPower {
    /// Full linear BS power `alpha * radiated + beta`.
    #[default]
    FullBs,
    RadiatedOnly,
}

/// System constants, stored in SI units (m, s, J, W, kg).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemParams {
    pub wavelength_m: f64,
    pub xi_los_db: f64,
    pub xi_nlos_db: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub pmin_dbm: f64,
    pub macro_power: PowerProfile<f64>,
    pub mbs_power: PowerProfile<f64>,
    pub drone_power: PowerProfile<f64>,
    pub slot_s: f64,
    pub kinetics: DroneKinetics<f64>,
    pub charge_power_w: f64,
    pub harvest_efficiency: f64,
    pub battery_capacity_j: f64,
    /// Initial stored energy per drone.
    pub initial_battery_j: Vec<f64>,
    pub serving_power: ServingPower,
}

impl SystemParams {
    pub fn pmin_w(&self) -> f64 {
        crate::scalar::dbm_to_watt(self.pmin_dbm)
    }

    pub fn profile(&self, cell: CellId) -> &PowerProfile<f64> {
        match cell {
            CellId::Macro => &self.macro_power,
            CellId::Mbs(_) => &self.mbs_power,
            CellId::Drone(_) => &self.drone_power,
        }
    }
}

/// Decisions of one slot: MBS on/off and the site of every drone.
#[derive(Debug, Clone, Copy)]
pub struct ActiveSet<'a> {
    pub mbs_on: &'a [bool],
    pub drone_sites: &'a [usize],
}

/// Capped per-cell loads, resolved once per (cell, slot).
#[derive(Debug, Clone, PartialEq)]
struct CellLoads {
    mbs: Vec<Vec<f64>>,
    site: Vec<Vec<f64>>,
}

/// A fully validated scenario. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub topology: Topology,
    pub users: UserModel,
    pub params: SystemParams,
    pub horizon: usize,
    pub re: ReProcess,
    pub warnings: Vec<String>,
    loads: CellLoads,
}

impl Scenario {
    pub fn new(
        topology: Topology,
        users: UserModel,
        params: SystemParams,
        horizon: usize,
        re: ReProcess,
    ) -> Result<Self, ScenarioError> {
        let warnings = validate(&topology, &users, &params, horizon, &re)?;
        let loads = compute_loads(&topology, &users, horizon);
        Ok(Scenario { topology, users, params, horizon, re, warnings, loads })
    }

    pub fn num_drones(&self) -> usize {
        self.topology.drones
    }

    pub fn num_mbs(&self) -> usize {
        self.topology.mbs.len()
    }

    pub fn num_sites(&self) -> usize {
        self.topology.drone_sites.len()
    }

    /// Users an active MBS `k` serves in `slot` (density integral capped at its capacity).
    pub fn mbs_load(&self, slot: usize, k: usize) -> f64 {
        self.loads.mbs[slot][k]
    }

    /// Users a drone parked at site `i` serves in `slot`; zero at the station.
    pub fn site_load(&self, slot: usize, i: usize) -> f64 {
        self.loads.site[slot][i]
    }

    /// Users left to the macrocell, before the capacity cap and the zero clamp.
    pub fn macro_residual(&self, slot: usize, active: ActiveSet<'_>) -> f64 {
        let mbs: f64 = active
            .mbs_on
            .iter()
            .enumerate()
            .filter(|(_, on)| **on)
            .map(|(k, _)| self.mbs_load(slot, k))
            .sum();
        let drones: f64 = active.drone_sites.iter().map(|&i| self.site_load(slot, i)).sum();
        self.users.users[slot] - mbs - drones
    }

    /// Expected users served by `cell` during `slot` under the given decisions.
    pub fn users_served(
        &self,
        cell: CellId,
        slot: usize,
        active: ActiveSet<'_>,
    ) -> Result<f64, ScenarioError> {
        match cell {
            CellId::Macro => {
                let residual = self.macro_residual(slot, active);
                Ok(residual.min(self.topology.macro_cell.capacity).max(0.0))
            }
            CellId::Mbs(k) => {
                let on = *active.mbs_on.get(k).ok_or(ScenarioError::UnknownCell(cell))?;
                Ok(if on { self.mbs_load(slot, k) } else { 0.0 })
            }
            CellId::Drone(l) => {
                let site = *active.drone_sites.get(l).ok_or(ScenarioError::UnknownCell(cell))?;
                Ok(self.site_load(slot, site))
            }
        }
    }

    pub fn site_distance(&self, j: usize, i: usize) -> f64 {
        let s = &self.topology.drone_sites;
        distance(&s[j], &s[i])
    }

    /// Flight time between sites `j` and `i` at the cruise speed.
    pub fn flight_time(&self, j: usize, i: usize) -> Result<f64, ScenarioError> {
        let t = flight_time(self.site_distance(j, i), self.params.kinetics.v_d);
        if t >= self.params.slot_s {
            return Err(ScenarioError::InfeasibleTrip { from: j, to: i, seconds: t });
        }
        Ok(t)
    }

    /// Total capacity available in `slot` with every small cell active.
    pub fn max_servable(&self, slot: usize) -> f64 {
        let mbs: f64 = (0..self.num_mbs()).map(|k| self.mbs_load(slot, k)).sum();
        let mut sites: Vec<f64> = (1..self.num_sites()).map(|i| self.site_load(slot, i)).collect();
        sites.sort_by(|a, b| b.total_cmp(a));
        let drones: f64 = sites.iter().take(self.num_drones()).sum();
        self.topology.macro_cell.capacity + mbs + drones
    }
}

fn site_disks(t: &Topology) -> Vec<Disk> {
    t.drone_sites
        .iter()
        .skip(1)
        .map(|p| Disk::around(p, t.drone_coverage_radius_m))
        .collect()
}

fn compute_loads(t: &Topology, users: &UserModel, horizon: usize) -> CellLoads {
    let macro_disk = Disk::around(&t.macro_cell.position, t.macro_cell.radius_m);
    let sites = site_disks(t);
    let mut mbs_loads = Vec::with_capacity(horizon);
    let mut site_loads = Vec::with_capacity(horizon);
    for b in 0..horizon {
        let (mbs_frac, site_frac): (Vec<f64>, Vec<f64>) = match &users.pdf {
            SpatialPdf::Uniform => {
                let a0 = macro_disk.area();
                let mbs = t
                    .mbs
                    .iter()
                    .map(|c| {
                        let d = Disk::around(&c.position, c.radius_m);
                        let own = lens_area(&d, &macro_disk);
                        let shared: f64 = sites.iter().map(|s| lens_area(&d, s)).sum();
                        ((own - shared) / a0).max(0.0)
                    })
                    .collect();
                let site = std::iter::once(0.0)
                    .chain(sites.iter().map(|s| lens_area(s, &macro_disk) / a0))
                    .collect();
                (mbs, site)
            }
            SpatialPdf::FixedPerSite { mbs, sites: s } => {
                let mut site = s.clone();
                site[0] = 0.0;
                (mbs.clone(), site)
            }
            SpatialPdf::Tabulated(pdf) => {
                let mbs = t
                    .mbs
                    .iter()
                    .map(|c| {
                        let d = Disk::around(&c.position, c.radius_m);
                        integrate_tabulated(pdf, b, &d, &macro_disk, &sites)
                    })
                    .collect();
                let site = std::iter::once(0.0)
                    .chain(sites.iter().map(|s| integrate_tabulated(pdf, b, s, &macro_disk, &[])))
                    .collect();
                (mbs, site)
            }
        };
        let u = users.users[b];
        mbs_loads.push(
            mbs_frac
                .iter()
                .zip(&t.mbs)
                .map(|(f, c)| (u * f).min(c.capacity))
                .collect(),
        );
        site_loads.push(site_frac.iter().map(|f| (u * f).min(t.drone_capacity)).collect());
    }
    CellLoads { mbs: mbs_loads, site: site_loads }
}

fn validate(
    t: &Topology,
    users: &UserModel,
    p: &SystemParams,
    horizon: usize,
    re: &ReProcess,
) -> Result<Vec<String>, ScenarioError> {
    let fail = |msg: String| Err(ScenarioError::Validation(msg));
    let mut warnings = Vec::new();

    if horizon == 0 {
        return fail("horizon B must be at least 1".into());
    }
    if users.users.len() != horizon {
        return fail(format!("users_per_slot has {} entries, horizon is {horizon}", users.users.len()));
    }
    if let Some(u) = users.users.iter().find(|u| !(**u >= 0.0) || !u.is_finite()) {
        return fail(format!("U^b must be finite and >= 0, got {u}"));
    }
    if t.drone_sites.is_empty() {
        return fail("drone_sites must contain the charging station".into());
    }
    let s0 = &t.drone_sites[0];
    if s0.x != 0.0 || s0.y != 0.0 || s0.h != 0.0 {
        return fail("site 0 (charging station) must be at the origin".into());
    }
    if let Some((i, s)) = t.drone_sites.iter().enumerate().find(|(_, s)| s.h < 0.0) {
        return fail(format!("site {i} has negative altitude {}", s.h));
    }
    for (i, s) in t.drone_sites.iter().enumerate() {
        let d = (s.x - t.macro_cell.position.x).hypot(s.y - t.macro_cell.position.y);
        if d > t.macro_cell.radius_m {
            return fail(format!("site {i} lies outside the macrocell radius"));
        }
    }
    for (k, c) in t.mbs.iter().enumerate() {
        let d = (c.position.x - t.macro_cell.position.x).hypot(c.position.y - t.macro_cell.position.y);
        if d > t.macro_cell.radius_m {
            return fail(format!("MBS {k} lies outside the macrocell radius"));
        }
        if !(c.radius_m > 0.0) {
            return fail(format!("MBS {k} radius must be > 0"));
        }
        if !(t.drone_capacity <= c.capacity && c.capacity <= t.macro_cell.capacity) {
            return fail(format!(
                "capacities must satisfy U_d <= U_m <= U_0 (U_d={}, U_m{k}={}, U_0={})",
                t.drone_capacity, c.capacity, t.macro_cell.capacity
            ));
        }
    }
    if t.drone_capacity > t.macro_cell.capacity {
        return fail("drone capacity exceeds macro capacity".into());
    }
    for (name, v) in [
        ("macro radius", t.macro_cell.radius_m),
        ("macro capacity", t.macro_cell.capacity),
        ("drone coverage radius", t.drone_coverage_radius_m),
        ("drone capacity", t.drone_capacity),
    ] {
        if !(v > 0.0) {
            return fail(format!("{name} must be > 0"));
        }
    }

    for (name, v) in [
        ("wavelength", p.wavelength_m),
        ("nu1", p.nu1),
        ("nu2", p.nu2),
        ("slot duration", p.slot_s),
        ("charging power", p.charge_power_w),
        ("battery capacity", p.battery_capacity_j),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return fail(format!("{name} must be strictly positive, got {v}"));
        }
    }
    for (name, prof) in [("macro", &p.macro_power), ("mbs", &p.mbs_power), ("drone", &p.drone_power)] {
        prof.validate().map_err(|e| ScenarioError::Validation(format!("{name} power profile: {e}")))?;
    }
    p.kinetics.validate().map_err(|e| ScenarioError::Validation(format!("drone kinetics: {e}")))?;
    if !(0.0..=1.0).contains(&p.harvest_efficiency) {
        return fail(format!("harvest efficiency must lie in [0, 1], got {}", p.harvest_efficiency));
    }
    if p.initial_battery_j.len() != t.drones {
        return fail(format!(
            "initial battery list has {} entries for {} drones",
            p.initial_battery_j.len(),
            t.drones
        ));
    }
    if let Some(s) = p.initial_battery_j.iter().find(|s| !(**s >= 0.0 && **s <= p.battery_capacity_j)) {
        return fail(format!("initial battery {s} J must lie in [0, S_max={}]", p.battery_capacity_j));
    }

    match &users.pdf {
        SpatialPdf::Uniform => {}
        SpatialPdf::FixedPerSite { mbs, sites } => {
            if mbs.len() != t.mbs.len() || sites.len() != t.drone_sites.len() {
                return fail("fixed_per_site fractions must list every MBS and every site".into());
            }
            if mbs.iter().chain(sites).any(|f| !(*f >= 0.0)) {
                return fail("fixed_per_site fractions must be >= 0".into());
            }
        }
        SpatialPdf::Tabulated(pdf) => {
            if pdf.grids.is_empty() || (pdf.grids.len() != 1 && pdf.grids.len() != horizon) {
                return fail("tabulated pdf needs one grid or one per slot".into());
            }
            let macro_disk = Disk::around(&t.macro_cell.position, t.macro_cell.radius_m);
            for (g, grid) in pdf.grids.iter().enumerate() {
                if grid.len() != pdf.nx * pdf.ny || grid.iter().any(|v| !(*v >= 0.0)) {
                    return fail(format!("tabulated grid {g} has wrong size or negative density"));
                }
                let mut mass = 0.0;
                for iy in 0..pdf.ny {
                    for ix in 0..pdf.nx {
                        let x = pdf.x0_m + (ix as f64 + 0.5) * pdf.cell_m;
                        let y = pdf.y0_m + (iy as f64 + 0.5) * pdf.cell_m;
                        if macro_disk.contains(x, y) {
                            mass += grid[iy * pdf.nx + ix] * pdf.cell_m * pdf.cell_m;
                        }
                    }
                }
                if (mass - 1.0).abs() > 1e-6 {
                    return fail(format!("tabulated grid {g} integrates to {mass}, expected 1"));
                }
            }
        }
    }

    re.validate(t.drones, horizon).map_err(|e| ScenarioError::Validation(e.to_string()))?;

    // Non-fatal layout remarks.
    let sites = site_disks(t);
    for (a, da) in sites.iter().enumerate() {
        for (b, db) in sites.iter().enumerate().skip(a + 1) {
            if da.overlaps(db) {
                warnings.push(format!("drone sites {} and {} overlap; their loads are double counted", a + 1, b + 1));
            }
        }
    }
    for i in 1..t.drone_sites.len() {
        let d = distance(&t.drone_sites[i], &t.drone_sites[0]);
        let back = p.kinetics.flight_power() * d / p.kinetics.v_d;
        if back > p.battery_capacity_j {
            warnings.push(format!("return trip from site {i} needs {back:.0} J, more than the battery holds"));
        }
        if d / p.kinetics.v_d >= p.slot_s {
            warnings.push(format!("site {i} is unreachable from the station within one slot"));
        }
    }
    Ok(warnings)
}

#[cfg(test)]
mod tests;
