//! JSON scenario files. Keys carry their unit as a suffix; omitted fields
//! fall back to the baseline system parameters.

use std::path::Path;

use serde::Deserialize;

use super::{
    Cell, GeoPoint, Scenario, ScenarioError, ServingPower, SpatialPdf, SystemParams, TabulatedPdf,
    Topology, UserModel,
};
use crate::energy::{DroneKinetics, PowerProfile};
use crate::re_model::{ReProcess, Uncertainty};

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum NumOrList {
    Num(f64),
    List(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum NumOrMatrix {
    Num(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    horizon_slots: usize,
    users_per_slot: NumOrList,
    #[serde(default)]
    user_pdf: Option<RawPdf>,
    #[serde(default)]
    topology: RawTopology,
    #[serde(default)]
    params: RawParams,
    #[serde(default)]
    re: RawRe,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawPdf {
    Uniform,
    FixedPerSite { mbs: Vec<f64>, sites: Vec<f64> },
    Tabulated { x0_m: f64, y0_m: f64, cell_m: f64, nx: usize, ny: usize, grids: Vec<Vec<f64>> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoint {
    x_m: f64,
    y_m: f64,
    #[serde(default)]
    h_m: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCell {
    #[serde(default)]
    x_m: f64,
    #[serde(default)]
    y_m: f64,
    #[serde(default)]
    h_m: f64,
    radius_m: f64,
    capacity_users: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    #[serde(rename = "macro")]
    macro_cell: Option<RawCell>,
    mbs: Option<Vec<RawCell>>,
    /// Candidate sites excluding the charging station, which is always site 0.
    drone_sites: Option<Vec<RawPoint>>,
    drone_coverage_radius_m: Option<f64>,
    drone_capacity_users: Option<f64>,
    drones: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    wavelength_m: Option<f64>,
    xi_los_db: Option<f64>,
    xi_nlos_db: Option<f64>,
    nu1: Option<f64>,
    nu2: Option<f64>,
    pmin_dbm: Option<f64>,
    alpha_macro: Option<f64>,
    beta_macro_w: Option<f64>,
    gamma_macro_w: Option<f64>,
    alpha_mbs: Option<f64>,
    beta_mbs_w: Option<f64>,
    gamma_mbs_w: Option<f64>,
    alpha_drone: Option<f64>,
    beta_drone_w: Option<f64>,
    gamma_drone_w: Option<f64>,
    slot_duration_s: Option<f64>,
    slot_duration_min: Option<f64>,
    drone_speed_mps: Option<f64>,
    drone_max_speed_mps: Option<f64>,
    drone_mass_kg: Option<f64>,
    drone_mass_g: Option<f64>,
    gravity_mps2: Option<f64>,
    air_density_kgpm3: Option<f64>,
    propeller_radius_m: Option<f64>,
    propeller_radius_cm: Option<f64>,
    propellers: Option<f64>,
    hardware_idle_power_w: Option<f64>,
    hardware_full_power_w: Option<f64>,
    charge_power_w: Option<f64>,
    harvest_efficiency: Option<f64>,
    battery_capacity_j: Option<f64>,
    battery_capacity_kj: Option<f64>,
    initial_battery_j: Option<NumOrList>,
    initial_battery_kj: Option<NumOrList>,
    serving_power: Option<ServingPower>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRe {
    mean_w: Option<NumOrMatrix>,
    uncertainty: Option<Uncertainty>,
}

impl<'de> Deserialize<'de> for ServingPower {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match String::deserialize(d)?.as_str() {
            "full_bs" => Ok(ServingPower::FullBs),
            "radiated_only" => Ok(ServingPower::RadiatedOnly),
            other => Err(serde::de::Error::custom(format!(
                "serving_power must be \"full_bs\" or \"radiated_only\", got {other:?}"
            ))),
        }
    }
}

/// Baseline layout: 1 km macrocell, four 250 m MBSs on a 550 m ring and 16
/// drone sites at 60 m altitude placed so that no two coverage disks overlap.
pub fn baseline_topology(drones: usize) -> Topology {
    let deg = std::f64::consts::PI / 180.0;
    let at = |r: f64, a: f64, h: f64| GeoPoint::new(r * (a * deg).cos(), r * (a * deg).sin(), h);
    let mbs = (0..4)
        .map(|k| Cell { position: at(550.0, 45.0 + 90.0 * k as f64, 0.0), radius_m: 250.0, capacity: 20.0 })
        .collect();
    let mut sites = vec![GeoPoint::origin()];
    sites.extend((0..4).map(|k| at(250.0, 90.0 * k as f64, 60.0)));
    for q in 0..4 {
        let base = 90.0 * q as f64;
        sites.push(at(850.0, base + 12.0, 60.0));
        sites.push(at(950.0, base + 45.0, 60.0));
        sites.push(at(850.0, base + 78.0, 60.0));
    }
    Topology {
        macro_cell: Cell { position: GeoPoint::origin(), radius_m: 1000.0, capacity: 130.0 },
        mbs,
        drone_sites: sites,
        drone_coverage_radius_m: 150.0,
        drone_capacity: 10.0,
        drones,
    }
}

fn pick(
    name: &str,
    primary: Option<f64>,
    alt: Option<f64>,
    alt_scale: f64,
    default: f64,
) -> Result<f64, ScenarioError> {
    match (primary, alt) {
        (Some(_), Some(_)) => Err(ScenarioError::Validation(format!("{name} given in two units"))),
        (Some(v), None) => Ok(v),
        (None, Some(v)) => Ok(v * alt_scale),
        (None, None) => Ok(default),
    }
}

fn cell(raw: RawCell) -> Cell {
    Cell {
        position: GeoPoint::new(raw.x_m, raw.y_m, raw.h_m),
        radius_m: raw.radius_m,
        capacity: raw.capacity_users,
    }
}

/// Parse and validate a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let horizon = raw.horizon_slots;

    let users = match raw.users_per_slot {
        NumOrList::Num(u) => vec![u; horizon],
        NumOrList::List(v) => v,
    };

    let t = raw.topology;
    let drones = t.drones.unwrap_or(6);
    let base = baseline_topology(drones);
    let mut drone_sites = vec![GeoPoint::origin()];
    match t.drone_sites {
        Some(list) => drone_sites.extend(list.into_iter().map(|p| GeoPoint::new(p.x_m, p.y_m, p.h_m))),
        None => drone_sites = base.drone_sites.clone(),
    }
    let topology = Topology {
        macro_cell: t.macro_cell.map(cell).unwrap_or(base.macro_cell),
        mbs: t.mbs.map(|v| v.into_iter().map(cell).collect()).unwrap_or(base.mbs),
        drone_sites,
        drone_coverage_radius_m: t.drone_coverage_radius_m.unwrap_or(base.drone_coverage_radius_m),
        drone_capacity: t.drone_capacity_users.unwrap_or(base.drone_capacity),
        drones,
    };

    let p = raw.params;
    let macro_beta = p.beta_macro_w.unwrap_or(130.0);
    let battery_capacity_j = pick("battery capacity", p.battery_capacity_j, p.battery_capacity_kj, 1e3, 10e3)?;
    let initial = match (p.initial_battery_j, p.initial_battery_kj) {
        (Some(_), Some(_)) => {
            return Err(ScenarioError::Validation("initial battery given in two units".into()))
        }
        (Some(v), None) => (v, 1.0),
        (None, Some(v)) => (v, 1e3),
        (None, None) => (NumOrList::Num(6.0), 1e3),
    };
    let initial_battery_j = match initial {
        (NumOrList::Num(s), scale) => vec![s * scale; drones],
        (NumOrList::List(v), scale) => v.into_iter().map(|s| s * scale).collect(),
    };
    let params = SystemParams {
        wavelength_m: p.wavelength_m.unwrap_or(0.125),
        xi_los_db: p.xi_los_db.unwrap_or(1.0),
        xi_nlos_db: p.xi_nlos_db.unwrap_or(12.0),
        nu1: p.nu1.unwrap_or(9.6),
        nu2: p.nu2.unwrap_or(0.29),
        pmin_dbm: p.pmin_dbm.unwrap_or(-70.0),
        macro_power: PowerProfile {
            alpha: p.alpha_macro.unwrap_or(4.7),
            beta: macro_beta,
            gamma: p.gamma_macro_w.unwrap_or(macro_beta),
        },
        mbs_power: PowerProfile {
            alpha: p.alpha_mbs.unwrap_or(2.6),
            beta: p.beta_mbs_w.unwrap_or(56.0),
            gamma: p.gamma_mbs_w.unwrap_or(39.0),
        },
        drone_power: PowerProfile {
            alpha: p.alpha_drone.unwrap_or(4.0),
            beta: p.beta_drone_w.unwrap_or(6.8),
            gamma: p.gamma_drone_w.unwrap_or(2.9),
        },
        slot_s: pick("slot duration", p.slot_duration_s, p.slot_duration_min, 60.0, 600.0)?,
        kinetics: DroneKinetics {
            mass_kg: pick("drone mass", p.drone_mass_kg, p.drone_mass_g, 1e-3, 0.75)?,
            gravity: p.gravity_mps2.unwrap_or(9.81),
            air_density: p.air_density_kgpm3.unwrap_or(1.225),
            prop_radius_m: pick("propeller radius", p.propeller_radius_m, p.propeller_radius_cm, 1e-2, 0.2)?,
            propellers: p.propellers.unwrap_or(4.0),
            v_d: p.drone_speed_mps.unwrap_or(15.0),
            v_max: p.drone_max_speed_mps.unwrap_or(15.0),
            p_static: p.hardware_idle_power_w.unwrap_or(0.5),
            p_full: p.hardware_full_power_w.unwrap_or(5.0),
        },
        charge_power_w: p.charge_power_w.unwrap_or(10.0),
        harvest_efficiency: p.harvest_efficiency.unwrap_or(0.6),
        battery_capacity_j,
        initial_battery_j,
        serving_power: p.serving_power.unwrap_or_default(),
    };

    let pdf = match raw.user_pdf.unwrap_or(RawPdf::Uniform) {
        RawPdf::Uniform => SpatialPdf::Uniform,
        RawPdf::FixedPerSite { mbs, mut sites } => {
            // Station entry is implicit in the file.
            if sites.len() + 1 == topology.drone_sites.len() {
                sites.insert(0, 0.0);
            }
            SpatialPdf::FixedPerSite { mbs, sites }
        }
        RawPdf::Tabulated { x0_m, y0_m, cell_m, nx, ny, grids } => {
            SpatialPdf::Tabulated(TabulatedPdf { x0_m, y0_m, cell_m, nx, ny, grids })
        }
    };

    let mean = match raw.re.mean_w {
        None => vec![vec![2.0; horizon]; drones],
        Some(NumOrMatrix::Num(m)) => vec![vec![m; horizon]; drones],
        Some(NumOrMatrix::Matrix(m)) => m,
    };
    let uncertainty = raw.re.uncertainty.unwrap_or(Uncertainty::Gamma { shape: 1.0, scale: 2.0 });
    let re = ReProcess::new(mean, uncertainty);

    Scenario::new(topology, UserModel { users, pdf }, params, horizon, re)
}

/// Read, parse and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_scenario(&text)
}
