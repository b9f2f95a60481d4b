//! Small scenario builders shared by the unit tests.

use std::f64::consts::PI;

use crate::scenario::{parse_scenario, Scenario};

/// `m` MBSs on a 550 m ring, `z` serving sites on a 250 m ring, `d` drones
/// and one user count per slot. `params` is spliced into the `params` object.
pub fn micro(m: usize, d: usize, z: usize, users: &[f64], params: &str) -> Scenario {
    let mbs: Vec<String> = (0..m)
        .map(|k| {
            let a = PI / 4.0 + 2.0 * PI * k as f64 / m as f64;
            format!(
                r#"{{"x_m": {}, "y_m": {}, "radius_m": 250, "capacity_users": 20}}"#,
                550.0 * a.cos(),
                550.0 * a.sin()
            )
        })
        .collect();
    let sites: Vec<String> = (0..z)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / z as f64;
            format!(r#"{{"x_m": {}, "y_m": {}, "h_m": 60}}"#, 250.0 * a.cos(), 250.0 * a.sin())
        })
        .collect();
    let users: Vec<String> = users.iter().map(f64::to_string).collect();
    let text = format!(
        r#"{{
            "horizon_slots": {horizon},
            "users_per_slot": [{users}],
            "topology": {{
                "macro": {{"radius_m": 1000, "capacity_users": 130}},
                "mbs": [{mbs}],
                "drone_sites": [{sites}],
                "drone_coverage_radius_m": 150,
                "drone_capacity_users": 10,
                "drones": {d}
            }},
            "params": {{{params}}},
            "re": {{"mean_w": 2.0, "uncertainty": {{"kind": "two_point", "x": 0.5}}}}
        }}"#,
        horizon = users.len(),
        users = users.join(", "),
        mbs = mbs.join(", "),
        sites = sites.join(", "),
    );
    parse_scenario(&text).expect("micro scenario is valid")
}

/// Every placement of `d` drones over `sites` sites (station included),
/// in lexicographic order.
pub fn placements(d: usize, sites: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..sites).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    out
}

/// Placements with no serving site used twice.
pub fn exclusive_placements(d: usize, sites: usize) -> Vec<Vec<usize>> {
    placements(d, sites)
        .into_iter()
        .filter(|p| (1..sites).all(|i| p.iter().filter(|&&s| s == i).count() <= 1))
        .collect()
}
