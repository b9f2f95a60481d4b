use super::{Bilp, Context, Knowledge, Problem, ProblemError, Row, Sense, VarMap};
use crate::energy::{EnergyError, EnergyModel};
use crate::re_model::ScenarioTree;
use crate::scenario::{Scenario, ScenarioError};

/// Network state the zero-knowledge program starts from.
#[derive(Debug, Clone, Copy)]
pub struct ZeroInput<'a> {
    pub slot: usize,
    pub prev_sites: &'a [usize],
    pub batteries: &'a [f64],
    /// Current-slot renewable arrival rate per drone.
    pub phi: &'a [f64],
}

/// Transition energies of one slot, indexed `j * sites + i`.
struct SlotTable {
    consumed: Vec<f64>,
    drawn: Vec<f64>,
    charged: Vec<f64>,
    reachable: Vec<bool>,
}

struct Coefficients<'a> {
    scenario: &'a Scenario,
    model: EnergyModel<'a>,
    sites: usize,
}

impl<'a> Coefficients<'a> {
    fn new(scenario: &'a Scenario) -> Result<Self, ProblemError> {
        Ok(Coefficients { scenario, model: EnergyModel::new(scenario)?, sites: scenario.num_sites() })
    }

    fn slot_table(&self, slot: usize) -> Result<SlotTable, ProblemError> {
        let n = self.sites * self.sites;
        let mut t = SlotTable { consumed: vec![0.0; n], drawn: vec![0.0; n], charged: vec![0.0; n], reachable: vec![false; n] };
        for j in 0..self.sites {
            for i in 0..self.sites {
                match self.model.drone_slot(slot, j, i, 0.0) {
                    Ok(e) => {
                        let k = j * self.sites + i;
                        t.consumed[k] = e.consumed;
                        t.drawn[k] = e.drawn;
                        t.charged[k] = e.charged;
                        t.reachable[k] = true;
                    }
                    Err(EnergyError::Scenario(ScenarioError::InfeasibleTrip { .. })) => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
        Ok(t)
    }

    fn harvest(&self, phi: f64) -> f64 {
        let p = &self.scenario.params;
        p.harvest_efficiency * phi * p.slot_s
    }

    /// Joules saved on the macro cell per offloaded user.
    fn macro_per_user(&self) -> f64 {
        let p = &self.scenario.params;
        p.macro_power.alpha * self.model.macro_watt_per_user() * p.slot_s
    }

    /// Decision-free energy of `slot`: macro serving everyone, every MBS asleep.
    fn slot_constant(&self, slot: usize) -> f64 {
        let p = &self.scenario.params;
        let users = self.scenario.users.users[slot];
        (p.macro_power.beta + p.macro_power.alpha * self.model.macro_watt_per_user() * users) * p.slot_s
            + self.scenario.num_mbs() as f64 * p.mbs_power.gamma * p.slot_s
    }

    fn pi_cost(&self, slot: usize, k: usize) -> f64 {
        let p = &self.scenario.params;
        let m = &p.mbs_power;
        (m.alpha * self.model.mbs_radiated(slot, k) + m.beta - m.gamma) * p.slot_s
            - self.macro_per_user() * self.scenario.mbs_load(slot, k)
    }

    fn site_offload(&self, slot: usize, i: usize) -> f64 {
        -self.macro_per_user() * self.scenario.site_load(slot, i)
    }

    fn capacity_row(&self, slot: usize, pis: impl Iterator<Item = (usize, usize)>, eps: impl Iterator<Item = (usize, usize)>) -> Row {
        let s = self.scenario;
        let mut coefs: Vec<(usize, f64)> = pis.map(|(var, k)| (var, s.mbs_load(slot, k))).collect();
        coefs.extend(eps.filter(|&(_, i)| i != 0).map(|(var, i)| (var, s.site_load(slot, i))));
        Row::new(coefs, Sense::Ge, s.users.users[slot] - s.topology.macro_cell.capacity)
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<(), ProblemError> {
    if got != want {
        return Err(ProblemError::Input(format!("{what}: expected {want} entries, got {got}")));
    }
    Ok(())
}

/// Single-slot program for slot `input.slot` given the observed network state.
pub fn build_zero(scenario: &Scenario, input: ZeroInput<'_>) -> Result<Problem, ProblemError> {
    let (m, d, sites) = (scenario.num_mbs(), scenario.num_drones(), scenario.num_sites());
    let slot = input.slot;
    if slot >= scenario.horizon {
        return Err(ProblemError::Input(format!("slot {slot} beyond horizon {}", scenario.horizon)));
    }
    check_len("previous sites", input.prev_sites.len(), d)?;
    check_len("batteries", input.batteries.len(), d)?;
    check_len("phi", input.phi.len(), d)?;
    if input.prev_sites.iter().any(|&j| j >= sites) {
        return Err(ProblemError::Input("previous site out of range".into()));
    }
    let c = Coefficients::new(scenario)?;
    let table = c.slot_table(slot)?;
    let s_bar = scenario.params.battery_capacity_j;
    let map = VarMap::new(Knowledge::Zero, m, d, sites, 1, slot, 1);

    let mut p = Bilp { constant: c.slot_constant(slot), ..Bilp::default() };
    for k in 0..m {
        p.add_binary(c.pi_cost(slot, k));
    }
    for l in 0..d {
        let j = input.prev_sites[l];
        for i in 0..sites {
            let var = p.add_binary(table.consumed[j * sites + i] + c.site_offload(slot, i));
            if !table.reachable[j * sites + i] {
                p.upper[var] = 0.0;
            }
        }
    }

    // The previous level is known, so a full battery simply stops taking in energy.
    let intake = |l: usize, i: usize| {
        let j = input.prev_sites[l];
        let headroom = (s_bar - input.batteries[l]).max(0.0);
        (table.charged[j * sites + i] + c.harvest(input.phi[l])).min(headroom)
    };
    for l in 0..d {
        // A myopic plan must not strand a drone: the level left after the slot
        // has to cover going back to (or staying at) the station next slot.
        let j = input.prev_sites[l];
        let mut coefs = Vec::with_capacity(sites);
        for i in 0..sites {
            let var = map.eps(0, 0, l, i);
            let used = table.drawn[j * sites + i];
            if !table.reachable[i * sites] {
                p.upper[var] = 0.0;
            }
            let reserve = table.drawn[i * sites];
            coefs.push((var, used.max(used + reserve - intake(l, i))));
        }
        p.push_row("battery", Row::new(coefs, Sense::Le, input.batteries[l]));
    }
    for l in 0..d {
        let coefs = (0..sites).map(|i| (map.eps(0, 0, l, i), intake(l, i))).collect();
        p.push_row("storage", Row::new(coefs, Sense::Le, s_bar - input.batteries[l]));
    }
    for l in 0..d {
        let coefs = (0..sites).map(|i| (map.eps(0, 0, l, i), 1.0)).collect();
        p.push_row("one_hot", Row::new(coefs, Sense::Eq, 1.0));
    }
    for i in 1..sites {
        let coefs = (0..d).map(|l| (map.eps(0, 0, l, i), 1.0)).collect();
        p.push_row("exclusivity", Row::new(coefs, Sense::Le, 1.0));
    }
    let eps = (0..d).flat_map(|l| (0..sites).map(move |i| (map.eps(0, 0, l, i), i)));
    p.push_row("capacity", c.capacity_row(slot, (0..m).map(|k| (map.pi(0, k), k)), eps));

    let context = Context {
        initial_sites: input.prev_sites.to_vec(),
        initial_battery: input.batteries.to_vec(),
        phi: vec![input.phi.iter().map(|&f| vec![f]).collect()],
        prob: vec![1.0],
    };
    Ok(Problem { bilp: p, map, context })
}

/// Whole-horizon program with the renewable matrix `phi[l][b]` known in advance.
pub fn build_perfect(scenario: &Scenario, phi: &[Vec<f64>]) -> Result<Problem, ProblemError> {
    build_horizon(scenario, Knowledge::Perfect, &[(phi.to_vec(), 1.0)])
}

/// Two-stage program: shared MBS statuses, drone decisions per tree scenario.
pub fn build_partial(scenario: &Scenario, tree: &ScenarioTree) -> Result<Problem, ProblemError> {
    let set: Vec<_> = tree.realizations.iter().map(|r| (r.phi.clone(), r.prob)).collect();
    build_horizon(scenario, Knowledge::Partial, &set)
}

fn build_horizon(scenario: &Scenario, case: Knowledge, set: &[(Vec<Vec<f64>>, f64)]) -> Result<Problem, ProblemError> {
    let (m, d, sites, horizon) = (scenario.num_mbs(), scenario.num_drones(), scenario.num_sites(), scenario.horizon);
    if set.is_empty() {
        return Err(ProblemError::Input("empty scenario set".into()));
    }
    for (phi, prob) in set {
        check_len("phi drones", phi.len(), d)?;
        for row in phi {
            check_len("phi slots", row.len(), horizon)?;
        }
        if !(0.0..=1.0).contains(prob) {
            return Err(ProblemError::Input(format!("probability {prob} outside [0, 1]")));
        }
    }
    let c = Coefficients::new(scenario)?;
    let tables = (0..horizon).map(|b| c.slot_table(b)).collect::<Result<Vec<_>, _>>()?;
    let params = &scenario.params;
    let s_bar = params.battery_capacity_j;
    let s0 = &params.initial_battery_j;
    let init = vec![0usize; d];
    let w_count = set.len();
    let map = VarMap::new(case, m, d, sites, horizon, 0, w_count);
    let ss = sites * sites;
    // Intake of every transition: charging plus harvest, `[w][b][l][j*S+i]`.
    let intake: Vec<Vec<Vec<Vec<f64>>>> = set
        .iter()
        .map(|(phi, _)| {
            (0..horizon)
                .map(|b| (0..d).map(|l| tables[b].charged.iter().map(|ch| ch + c.harvest(phi[l][b])).collect()).collect())
                .collect()
        })
        .collect();

    let mut p = Bilp { constant: (0..horizon).map(|b| c.slot_constant(b)).sum(), ..Bilp::default() };
    for b in 0..horizon {
        for k in 0..m {
            p.add_binary(c.pi_cost(b, k));
        }
    }
    for (_, prob) in set {
        for b in 0..horizon {
            for _ in 0..d {
                for i in 0..sites {
                    p.add_binary(prob * c.site_offload(b, i));
                }
            }
        }
    }
    for (_, prob) in set {
        for table in &tables {
            for _ in 0..d {
                for k in 0..ss {
                    let var = p.add_binary(prob * table.consumed[k]);
                    if !table.reachable[k] {
                        p.upper[var] = 0.0;
                    }
                }
            }
        }
    }
    for w in 0..w_count {
        for b in 0..horizon {
            for l in 0..d {
                let max_in = intake[w][b][l].iter().cloned().fold(0.0, f64::max);
                p.add_continuous(0.0, 0.0, max_in);
            }
        }
    }
    debug_assert_eq!(p.num_vars(), map.end);

    for w in 0..w_count {
        let zeta = |b: usize, l: usize, k: usize| map.zeta(w, b, l, k / sites, k % sites);
        for l in 0..d {
            for b in 0..horizon {
                // The battery draw of slot b must be covered by the stock left after b-1.
                let mut coefs = Vec::new();
                for t in 0..=b {
                    for k in 0..ss {
                        let a = if t < b { tables[t].consumed[k] - intake[w][t][l][k] } else { tables[t].drawn[k] };
                        if a != 0.0 {
                            coefs.push((zeta(t, l, k), a));
                        }
                    }
                    if t < b {
                        coefs.push((map.curtail(w, t, l), 1.0));
                    }
                }
                p.push_row("battery", Row::new(coefs, Sense::Le, s0[l]));
            }
        }
        for l in 0..d {
            for b in 0..horizon {
                // Stock plus intake up to b, net of consumption up to b-1, fits the battery.
                let mut coefs = Vec::new();
                for t in 0..=b {
                    for k in 0..ss {
                        let a = intake[w][t][l][k] - if t < b { tables[t].consumed[k] } else { 0.0 };
                        if a != 0.0 {
                            coefs.push((zeta(t, l, k), a));
                        }
                    }
                    coefs.push((map.curtail(w, t, l), -1.0));
                }
                p.push_row("storage", Row::new(coefs, Sense::Le, s_bar - s0[l]));
            }
        }
        for b in 0..horizon {
            for l in 0..d {
                let coefs = (0..sites).map(|i| (map.eps(w, b, l, i), 1.0)).collect();
                p.push_row("one_hot", Row::new(coefs, Sense::Eq, 1.0));
            }
        }
        for b in 0..horizon {
            for i in 1..sites {
                let coefs = (0..d).map(|l| (map.eps(w, b, l, i), 1.0)).collect();
                p.push_row("exclusivity", Row::new(coefs, Sense::Le, 1.0));
            }
        }
        for b in 0..horizon {
            let eps = (0..d).flat_map(|l| (0..sites).map(move |i| (map.eps(w, b, l, i), i)));
            p.push_row("capacity", c.capacity_row(b, (0..m).map(|k| (map.pi(b, k), k)), eps));
        }
        for b in 0..horizon {
            for l in 0..d {
                for j in 0..sites {
                    for i in 0..sites {
                        let z = map.zeta(w, b, l, j, i);
                        let now = map.eps(w, b, l, i);
                        p.push_row("linearization", Row::new(vec![(z, 1.0), (now, -1.0)], Sense::Le, 0.0));
                        if b == 0 {
                            // The placement before the horizon is fixed.
                            let was = if init[l] == j { 1.0 } else { 0.0 };
                            p.push_row("linearization", Row::new(vec![(z, 1.0)], Sense::Le, was));
                            p.push_row("linearization", Row::new(vec![(z, 1.0), (now, -1.0)], Sense::Ge, was - 1.0));
                        } else {
                            let before = map.eps(w, b - 1, l, j);
                            p.push_row("linearization", Row::new(vec![(z, 1.0), (before, -1.0)], Sense::Le, 0.0));
                            p.push_row(
                                "linearization",
                                Row::new(vec![(z, 1.0), (before, -1.0), (now, -1.0)], Sense::Ge, -1.0),
                            );
                        }
                    }
                }
            }
        }
        // Transition flow: the chosen move leaves the previous site and enters the
        // current one. Implied by the products, but it tightens the relaxation.
        for b in 0..horizon {
            for l in 0..d {
                for i in 0..sites {
                    let mut coefs: Vec<(usize, f64)> = (0..sites).map(|j| (map.zeta(w, b, l, j, i), 1.0)).collect();
                    coefs.push((map.eps(w, b, l, i), -1.0));
                    p.push_row("flow", Row::new(coefs, Sense::Eq, 0.0));
                }
                for j in 0..sites {
                    let mut coefs: Vec<(usize, f64)> = (0..sites).map(|i| (map.zeta(w, b, l, j, i), 1.0)).collect();
                    let rhs = if b == 0 {
                        if init[l] == j { 1.0 } else { 0.0 }
                    } else {
                        coefs.push((map.eps(w, b - 1, l, j), -1.0));
                        0.0
                    };
                    p.push_row("flow", Row::new(coefs, Sense::Eq, rhs));
                }
            }
        }
        for b in 0..horizon {
            for l in 0..d {
                // Withheld intake cannot exceed the intake of the chosen transition.
                let mut coefs = vec![(map.curtail(w, b, l), 1.0)];
                coefs.extend((0..ss).filter(|&k| intake[w][b][l][k] != 0.0).map(|k| (zeta(b, l, k), -intake[w][b][l][k])));
                p.push_row("curtail_link", Row::new(coefs, Sense::Le, 0.0));
            }
        }
    }

    let context = Context {
        initial_sites: init,
        initial_battery: s0.clone(),
        phi: set.iter().map(|(phi, _)| phi.clone()).collect(),
        prob: set.iter().map(|(_, prob)| *prob).collect(),
    };
    Ok(Problem { bilp: p, map, context })
}

impl Problem {
    /// Pins the MBS statuses to `mbs_on[b][k]`, e.g. to evaluate a first-stage decision.
    pub fn fix_mbs(&mut self, mbs_on: &[Vec<bool>]) -> Result<(), ProblemError> {
        check_len("mbs slots", mbs_on.len(), self.map.slots)?;
        for (b, row) in mbs_on.iter().enumerate() {
            check_len("mbs", row.len(), self.map.mbs)?;
            for (k, &on) in row.iter().enumerate() {
                self.bilp.fix(self.map.pi(b, k), if on { 1.0 } else { 0.0 });
            }
        }
        Ok(())
    }

    /// Full variable vector for explicit decisions.
    ///
    /// `sites[w][b][l]` gives the placements of copy `w`; a single entry is
    /// replicated into every copy. Products are set from consecutive
    /// placements and withheld intake is the least amount that keeps each
    /// battery within capacity.
    pub fn encode(&self, scenario: &Scenario, mbs_on: &[Vec<bool>], sites: &[Vec<Vec<usize>>]) -> Result<Vec<f64>, ProblemError> {
        let map = &self.map;
        check_len("mbs slots", mbs_on.len(), map.slots)?;
        if sites.len() != 1 && sites.len() != map.scenarios {
            return Err(ProblemError::Input(format!("expected 1 or {} placement copies", map.scenarios)));
        }
        let model = EnergyModel::new(scenario)?;
        let s_bar = scenario.params.battery_capacity_j;
        let mut x = vec![0.0; map.end];
        for (b, row) in mbs_on.iter().enumerate() {
            check_len("mbs", row.len(), map.mbs)?;
            for (k, &on) in row.iter().enumerate() {
                x[map.pi(b, k)] = if on { 1.0 } else { 0.0 };
            }
        }
        for w in 0..map.scenarios {
            let copy = &sites[if sites.len() == 1 { 0 } else { w }];
            check_len("site slots", copy.len(), map.slots)?;
            let mut level = self.context.initial_battery.clone();
            for (b, row) in copy.iter().enumerate() {
                check_len("sites", row.len(), map.drones)?;
                for (l, &i) in row.iter().enumerate() {
                    x[map.eps(w, b, l, i)] = 1.0;
                    let j = if b == 0 { self.context.initial_sites[l] } else { copy[b - 1][l] };
                    let e = model.drone_slot(map.first_slot + b, j, i, self.context.phi[w][l][b])?;
                    let withheld = (level[l] + e.intake() - s_bar).max(0.0).min(e.intake());
                    level[l] += e.intake() - withheld - e.consumed;
                    if map.has_zeta() {
                        x[map.zeta(w, b, l, j, i)] = 1.0;
                        x[map.curtail(w, b, l)] = withheld;
                    }
                }
            }
        }
        Ok(x)
    }
}
