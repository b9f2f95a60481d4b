#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use dronenet::scenario::{load_scenario, parse_scenario, Scenario};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn scenario(name: &str) -> Scenario {
    load_scenario(scenario_path(name)).expect("bundled scenario loads")
}

/// A bundled scenario with top-level keys patched, e.g. `users_per_slot`.
pub fn patched(name: &str, patch: serde_json::Value) -> Scenario {
    let text = std::fs::read_to_string(scenario_path(name)).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    merge(&mut doc, patch);
    parse_scenario(&doc.to_string()).expect("patched scenario is valid")
}

fn merge(doc: &mut serde_json::Value, patch: serde_json::Value) {
    match (doc, patch) {
        (serde_json::Value::Object(d), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                merge(d.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (d, p) => *d = p,
    }
}

/// `m` MBSs on a 550 m ring, `z` sites on a 250 m ring and `d` drones.
pub fn micro(m: usize, d: usize, z: usize, users: &[f64], initial_kj: f64) -> Scenario {
    let mbs: Vec<serde_json::Value> = (0..m)
        .map(|k| {
            let a = PI / 4.0 + 2.0 * PI * k as f64 / m as f64;
            serde_json::json!({"x_m": 550.0 * a.cos(), "y_m": 550.0 * a.sin(), "radius_m": 250, "capacity_users": 20})
        })
        .collect();
    let sites: Vec<serde_json::Value> = (0..z)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / z as f64;
            serde_json::json!({"x_m": 250.0 * a.cos(), "y_m": 250.0 * a.sin(), "h_m": 60})
        })
        .collect();
    let doc = serde_json::json!({
        "horizon_slots": users.len(),
        "users_per_slot": users,
        "topology": {
            "macro": {"radius_m": 1000, "capacity_users": 130},
            "mbs": mbs,
            "drone_sites": sites,
            "drone_coverage_radius_m": 150,
            "drone_capacity_users": 10,
            "drones": d
        },
        "params": {"initial_battery_kj": initial_kj},
        "re": {"mean_w": 2.0, "uncertainty": {"kind": "two_point", "x": 0.3}}
    });
    parse_scenario(&doc.to_string()).expect("micro scenario is valid")
}
