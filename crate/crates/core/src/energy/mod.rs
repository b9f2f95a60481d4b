//! Power models of the base stations and drones, per-slot drone energy
//! accounting and the battery recursion.

use serde::Serialize;
use thiserror::Error;

use crate::channel::PathLossTable;
use crate::scalar::Scalar;
use crate::scenario::{ActiveSet, CellId, Scenario, ScenarioError, ServingPower};

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("battery underflow: slot consumption {consumed:.3} J exceeds stored {level:.3} J")]
    BatteryUnderflow { level: f64, consumed: f64 },
    #[error("battery overflow: stored {level:.3} J + intake {intake:.3} J exceeds capacity {capacity:.3} J")]
    BatteryOverflow { level: f64, intake: f64, capacity: f64 },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Battery bounds are checked with this slack (J) to absorb solver round-off.
pub const BATTERY_TOL_J: f64 = 1e-6;

/// Linear BS power model: `alpha * radiated + beta` when active, `gamma` when idle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerProfile<F = f64> {
    pub alpha: F,
    pub beta: F,
    pub gamma: F,
}

impl<F: Scalar> PowerProfile<F> {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha >= F::one()) {
            return Err(format!("alpha must be >= 1, got {}", self.alpha));
        }
        if !(self.beta >= self.gamma && self.gamma >= F::zero()) {
            return Err(format!("need beta >= gamma >= 0, got beta={} gamma={}", self.beta, self.gamma));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DroneKinetics<F = f64> {
    pub mass_kg: F,
    pub gravity: F,
    pub air_density: F,
    pub prop_radius_m: F,
    pub propellers: F,
    /// Cruise speed.
    pub v_d: F,
    pub v_max: F,
    /// Hardware power when static.
    pub p_static: F,
    /// Hardware power at full speed.
    pub p_full: F,
}

impl<F: Scalar> DroneKinetics<F> {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("mass", self.mass_kg),
            ("gravity", self.gravity),
            ("air density", self.air_density),
            ("propeller radius", self.prop_radius_m),
            ("propeller count", self.propellers),
            ("cruise speed", self.v_d),
            ("max speed", self.v_max),
            ("static hardware power", self.p_static),
            ("full-speed hardware power", self.p_full),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !(*v > F::zero())) {
            return Err(format!("{name} must be > 0, got {v}"));
        }
        if self.v_d > self.v_max {
            return Err(format!("cruise speed {} exceeds max speed {}", self.v_d, self.v_max));
        }
        if self.p_full < self.p_static {
            return Err("full-speed hardware power is below the static level".into());
        }
        Ok(())
    }

    /// Rotor-momentum hover power `sqrt((m g)^3 / (2 pi r_p^2 n_p rho))`.
    pub fn hover_power(&self) -> F {
        let w = self.mass_kg * self.gravity;
        let disk = F::lit(2.0) * F::PI() * self.prop_radius_m * self.prop_radius_m * self.propellers * self.air_density;
        (w * w * w / disk).sqrt()
    }

    pub fn hardware_power(&self, moving: bool) -> F {
        if moving {
            (self.p_full - self.p_static) / self.v_max * self.v_d + self.p_static
        } else {
            self.p_static
        }
    }

    /// Power drawn while flying between sites.
    pub fn flight_power(&self) -> F {
        self.hover_power() + self.hardware_power(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SlotEnergy<F = f64> {
    pub consumed: F,
    pub harvested: F,
    pub charged: F,
    /// Part of `consumed` drawn from the battery; idle time on the charger is
    /// powered by the station.
    pub drawn: F,
}

impl<F: Scalar> SlotEnergy<F> {
    /// Energy entering the battery (harvest plus station charging).
    pub fn intake(&self) -> F {
        self.harvested + self.charged
    }

    /// Removes `amount` of intake, first from charging and then from harvest.
    pub fn curtail(mut self, amount: F) -> Self {
        let amount = amount.max(F::zero()).min(self.intake());
        let from_charge = amount.min(self.charged);
        self.charged = self.charged - from_charge;
        self.harvested = self.harvested - (amount - from_charge);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Battery<F = f64> {
    pub level: F,
    pub capacity: F,
    pub initial: F,
}

impl<F: Scalar> Battery<F> {
    pub fn new(initial: F, capacity: F) -> Self {
        Battery { level: initial, capacity, initial }
    }

    /// Headroom the station may fill during a slot.
    pub fn headroom(&self) -> F {
        (self.capacity - self.level).max(F::zero())
    }
}

/// One step of `S' = S + harvested + charged - consumed`.
///
/// The slot is rejected when the energy it draws from the battery exceeds the
/// stored energy or when the stored energy plus intake exceeds the capacity.
pub fn battery_step<F: Scalar>(bat: Battery<F>, e: &SlotEnergy<F>) -> Result<Battery<F>, EnergyError> {
    let tol = F::lit(BATTERY_TOL_J);
    if e.drawn > bat.level + tol {
        return Err(EnergyError::BatteryUnderflow {
            level: bat.level.to_f64_lossy(),
            consumed: e.drawn.to_f64_lossy(),
        });
    }
    if bat.level + e.intake() > bat.capacity + tol {
        return Err(EnergyError::BatteryOverflow {
            level: bat.level.to_f64_lossy(),
            intake: e.intake().to_f64_lossy(),
            capacity: bat.capacity.to_f64_lossy(),
        });
    }
    let level = (bat.level + e.intake() - e.consumed).max(F::zero()).min(bat.capacity);
    Ok(Battery { level, ..bat })
}

/// Radiated power `users * P_min * PL` with `P_min` in Watt and `PL` linear.
pub fn radiated_power<F: Scalar>(users: F, pmin_w: F, pl_linear: F) -> Result<F, EnergyError> {
    if users < F::zero() {
        return Err(EnergyError::Domain(format!("user count must be >= 0, got {users}")));
    }
    if !(pl_linear >= F::one()) {
        return Err(EnergyError::Domain(format!("linear path loss must be >= 1, got {pl_linear}")));
    }
    Ok(users * pmin_w * pl_linear)
}

pub fn bs_power<F: Scalar>(profile: &PowerProfile<F>, active: bool, radiated: F) -> F {
    if active {
        profile.alpha * radiated + profile.beta
    } else {
        profile.gamma
    }
}

/// Constants needed to evaluate a drone's slot energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroneEnergyModel<F = f64> {
    pub bs: PowerProfile<F>,
    pub kinetics: DroneKinetics<F>,
    pub slot_s: F,
    pub charge_power_w: F,
    pub harvest_efficiency: F,
    pub serving_power: ServingPower,
}

impl DroneEnergyModel<f64> {
    pub fn from_scenario(s: &Scenario) -> Self {
        let p = &s.params;
        DroneEnergyModel {
            bs: p.drone_power,
            kinetics: p.kinetics,
            slot_s: p.slot_s,
            charge_power_w: p.charge_power_w,
            harvest_efficiency: p.harvest_efficiency,
            serving_power: p.serving_power,
        }
    }
}

impl<F: Scalar> DroneEnergyModel<F> {
    /// Energy of one slot for a drone moving from site `from` to site `to`.
    ///
    /// `flight_s` is the trip duration (0 when `from == to`), `radiated` the
    /// radiated power while serving at `to`, `phi` the renewable arrival rate.
    pub fn slot_energy(&self, from: usize, to: usize, flight_s: F, radiated: F, phi: F) -> SlotEnergy<F> {
        let t_b = self.slot_s;
        let harvested = self.harvest_efficiency * phi * t_b;
        let gamma = self.bs.gamma;
        let p_f = self.kinetics.flight_power();
        let p_s = self.kinetics.p_static;
        let serving = bs_power(&self.bs, true, radiated);
        match (from == to, to == 0) {
            // Station to station.
            (true, true) => SlotEnergy {
                consumed: gamma * t_b,
                harvested,
                charged: self.charge_power_w * t_b,
                drawn: (gamma - self.charge_power_w).max(F::zero()) * t_b,
            },
            // Hold a serving site.
            (true, false) => {
                let consumed = (serving + p_s) * t_b;
                SlotEnergy { consumed, harvested, charged: F::zero(), drawn: consumed }
            }
            // Return to the station.
            (false, true) => {
                let t_r = t_b - flight_s;
                SlotEnergy {
                    consumed: (p_f + gamma) * flight_s + gamma * t_r,
                    harvested,
                    charged: self.charge_power_w * t_r,
                    drawn: (p_f + gamma) * flight_s + (gamma - self.charge_power_w).max(F::zero()) * t_r,
                }
            }
            // Move to a new serving site.
            (false, false) => {
                let t_r = t_b - flight_s;
                let power = match self.serving_power {
                    ServingPower::FullBs => serving,
                    ServingPower::RadiatedOnly => radiated,
                };
                let consumed = (p_f + gamma) * flight_s + (power + p_s) * t_r;
                SlotEnergy { consumed, harvested, charged: F::zero(), drawn: consumed }
            }
        }
    }
}

/// Network-level energy of one slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSlotEnergy {
    pub macro_j: f64,
    pub mbs_j: f64,
    pub drones_j: f64,
    pub per_drone: Vec<SlotEnergy<f64>>,
}

impl NetworkSlotEnergy {
    pub fn total(&self) -> f64 {
        self.macro_j + self.mbs_j + self.drones_j
    }
}

/// Precomputed per-scenario quantities for slot energy evaluation.
#[derive(Debug, Clone)]
pub struct EnergyModel<'a> {
    pub scenario: &'a Scenario,
    pub path_loss: PathLossTable,
    pub drone: DroneEnergyModel<f64>,
    pub pmin_w: f64,
}

impl<'a> EnergyModel<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self, EnergyError> {
        let path_loss = PathLossTable::new(scenario).map_err(|e| EnergyError::Domain(e.to_string()))?;
        Ok(EnergyModel {
            scenario,
            path_loss,
            drone: DroneEnergyModel::from_scenario(scenario),
            pmin_w: scenario.params.pmin_w(),
        })
    }

    /// Radiated power of a drone serving at site `i` in `slot`.
    pub fn site_radiated(&self, slot: usize, i: usize) -> f64 {
        if i == 0 {
            return 0.0;
        }
        self.scenario.site_load(slot, i) * self.pmin_w * self.path_loss.site_lin[i]
    }

    pub fn mbs_radiated(&self, slot: usize, k: usize) -> f64 {
        self.scenario.mbs_load(slot, k) * self.pmin_w * self.path_loss.mbs_lin[k]
    }

    /// Macro radiated power per user.
    pub fn macro_watt_per_user(&self) -> f64 {
        self.pmin_w * self.path_loss.macro_lin
    }

    /// Unthrottled slot energy of a drone moving `j -> i` during `slot`.
    pub fn drone_slot(&self, slot: usize, j: usize, i: usize, phi: f64) -> Result<SlotEnergy<f64>, EnergyError> {
        let t_f = if i == j { 0.0 } else { self.scenario.flight_time(j, i)? };
        Ok(self.drone.slot_energy(j, i, t_f, self.site_radiated(slot, i), phi))
    }

    /// Energy of the macro cell and every MBS in `slot` (drone terms excluded).
    pub fn ground_slot(&self, slot: usize, active: ActiveSet<'_>) -> Result<(f64, f64), EnergyError> {
        let s = self.scenario;
        let t_b = s.params.slot_s;
        let u0 = s.users_served(CellId::Macro, slot, active)?;
        let p0 = radiated_power(u0, self.pmin_w, self.path_loss.macro_lin)?;
        let macro_j = bs_power(&s.params.macro_power, true, p0) * t_b;
        let mut mbs_j = 0.0;
        for (k, &on) in active.mbs_on.iter().enumerate() {
            let users = s.users_served(CellId::Mbs(k), slot, active)?;
            let rad = radiated_power(users, self.pmin_w, self.path_loss.mbs_lin[k])?;
            mbs_j += bs_power(&s.params.mbs_power, on, rad) * t_b;
        }
        Ok((macro_j, mbs_j))
    }

    /// Total network energy of a slot given the decisions and previous drone sites.
    ///
    /// `drone_energy` carries the (possibly throttled) slot energy of each drone;
    /// only consumption enters the network total.
    pub fn network_slot(
        &self,
        slot: usize,
        active: ActiveSet<'_>,
        drone_energy: Vec<SlotEnergy<f64>>,
    ) -> Result<NetworkSlotEnergy, EnergyError> {
        let (macro_j, mbs_j) = self.ground_slot(slot, active)?;
        let drones_j = drone_energy.iter().map(|e| e.consumed).sum();
        Ok(NetworkSlotEnergy { macro_j, mbs_j, drones_j, per_drone: drone_energy })
    }
}

/// Network energy `E0 + EM + ED` of one slot with unthrottled drone energies.
pub fn network_slot_energy(
    scenario: &Scenario,
    slot: usize,
    mbs_on: &[bool],
    prev_sites: &[usize],
    sites: &[usize],
    phi: &[f64],
) -> Result<NetworkSlotEnergy, EnergyError> {
    let model = EnergyModel::new(scenario)?;
    let drones = prev_sites
        .iter()
        .zip(sites)
        .zip(phi)
        .map(|((&j, &i), &f)| model.drone_slot(slot, j, i, f))
        .collect::<Result<Vec<_>, _>>()?;
    model.network_slot(slot, ActiveSet { mbs_on, drone_sites: sites }, drones)
}
