use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;

fn minimal(users: &str) -> Scenario {
    parse_scenario(&format!(r#"{{"horizon_slots": 3, "users_per_slot": {users}}}"#)).unwrap()
}

#[test]
fn distance_spot_values() {
    let o = GeoPoint::<f64>::origin();
    assert_eq!(distance(&o, &o), 0.0);
    assert_eq!(distance(&o, &GeoPoint::new(3.0, 4.0, 0.0)), 5.0);
    assert_abs_diff_eq!(distance(&o, &GeoPoint::new(300.0, 400.0, 60.0)), 503.59, epsilon = 0.01);
    let p32 = GeoPoint::<f32>::new(3.0, 4.0, 0.0);
    assert_eq!(p32.distance(&GeoPoint::origin()), 5.0f32);
}

#[test]
fn flight_time_values() {
    assert_eq!(flight_time(900.0f64, 15.0), 60.0);
    assert_abs_diff_eq!(flight_time(1273.0f64, 15.0), 84.87, epsilon = 0.01);
    let s = minimal("140");
    assert_eq!(s.flight_time(3, 3).unwrap(), 0.0);
    let d = s.site_distance(0, 1);
    assert_abs_diff_eq!(s.flight_time(0, 1).unwrap(), d / 15.0, epsilon = 1e-12);
}

#[test]
fn trip_longer_than_a_slot_is_rejected() {
    let s = parse_scenario(
        r#"{"horizon_slots": 1, "users_per_slot": 10, "params": {"slot_duration_s": 10}}"#,
    )
    .unwrap();
    assert!(matches!(s.flight_time(0, 1), Err(ScenarioError::InfeasibleTrip { .. })));
}

#[test]
fn uniform_drone_load_is_the_area_ratio() {
    let s = minimal("140");
    // Inner-ring sites are fully inside the macro disk: (150/1000)^2 of the users.
    for i in 1..=4 {
        assert_abs_diff_eq!(s.site_load(0, i), 140.0 * 0.0225, epsilon = 1e-9);
    }
    assert_eq!(s.site_load(0, 0), 0.0);
    // MBS disk of 250 m without drone-site overlap in the baseline layout.
    assert_abs_diff_eq!(s.mbs_load(0, 0), 140.0 * 0.0625, epsilon = 1e-9);
}

#[test]
fn macro_serves_everyone_without_offload() {
    let s = minimal("100");
    let off = [false; 4];
    let station = [0usize; 6];
    let active = ActiveSet { mbs_on: &off, drone_sites: &station };
    assert_eq!(s.users_served(CellId::Macro, 0, active).unwrap(), 100.0);
    assert!(matches!(
        s.users_served(CellId::Mbs(9), 0, active),
        Err(ScenarioError::UnknownCell(CellId::Mbs(9)))
    ));
}

#[test]
fn zero_demand_serves_nobody() {
    let s = minimal("0");
    let on = [true; 4];
    let sites = [1usize, 2, 3, 4, 5, 6];
    let active = ActiveSet { mbs_on: &on, drone_sites: &sites };
    assert_eq!(s.users_served(CellId::Macro, 1, active).unwrap(), 0.0);
    for k in 0..4 {
        assert_eq!(s.users_served(CellId::Mbs(k), 1, active).unwrap(), 0.0);
    }
    for l in 0..6 {
        assert_eq!(s.users_served(CellId::Drone(l), 1, active).unwrap(), 0.0);
    }
}

#[test]
fn minimal_file_gets_table_defaults() {
    let s = minimal("[140, 120, 100]");
    let p = &s.params;
    assert_eq!(s.horizon, 3);
    assert_eq!(p.wavelength_m, 0.125);
    assert_eq!(p.slot_s, 600.0);
    assert_eq!(p.battery_capacity_j, 10_000.0);
    assert_eq!(p.initial_battery_j, vec![6000.0; 6]);
    assert_eq!(p.pmin_dbm, -70.0);
    assert_eq!((p.nu1, p.nu2, p.xi_los_db, p.xi_nlos_db), (9.6, 0.29, 1.0, 12.0));
    assert_eq!((p.macro_power.alpha, p.macro_power.beta), (4.7, 130.0));
    assert_eq!((p.mbs_power.alpha, p.mbs_power.beta, p.mbs_power.gamma), (2.6, 56.0, 39.0));
    assert_eq!((p.drone_power.alpha, p.drone_power.beta, p.drone_power.gamma), (4.0, 6.8, 2.9));
    assert_eq!((p.kinetics.v_d, p.kinetics.v_max, p.kinetics.mass_kg), (15.0, 15.0, 0.75));
    assert_eq!((p.kinetics.prop_radius_m, p.kinetics.propellers, p.kinetics.p_static), (0.2, 4.0, 0.5));
    assert_eq!((p.charge_power_w, p.harvest_efficiency), (10.0, 0.6));
    assert_eq!(s.topology.macro_cell.capacity, 130.0);
    assert_eq!(s.users.users, vec![140.0, 120.0, 100.0]);
}

#[test]
fn unit_suffixes_convert() {
    let s = parse_scenario(
        r#"{"horizon_slots": 1, "users_per_slot": 1,
            "params": {"slot_duration_min": 5, "battery_capacity_kj": 12, "drone_mass_g": 800,
                       "propeller_radius_cm": 10, "initial_battery_j": [1000, 2000, 3000, 4000, 5000, 6000]}}"#,
    )
    .unwrap();
    assert_eq!(s.params.slot_s, 300.0);
    assert_eq!(s.params.battery_capacity_j, 12_000.0);
    assert_abs_diff_eq!(s.params.kinetics.mass_kg, 0.8, epsilon = 1e-12);
    assert_abs_diff_eq!(s.params.kinetics.prop_radius_m, 0.1, epsilon = 1e-12);
    assert_eq!(s.params.initial_battery_j[5], 6000.0);
}

#[test]
fn speed_above_max_is_invalid() {
    let err = parse_scenario(
        r#"{"horizon_slots": 1, "users_per_slot": 1, "params": {"drone_speed_mps": 20}}"#,
    )
    .unwrap_err();
    assert!(matches!(err, ScenarioError::Validation(ref m) if m.contains("cruise speed")), "{err}");
}

#[test]
fn other_validation_failures() {
    let cases = [
        r#"{"horizon_slots": 2, "users_per_slot": [1]}"#,
        r#"{"horizon_slots": 1, "users_per_slot": -1}"#,
        r#"{"horizon_slots": 1, "users_per_slot": 1, "params": {"initial_battery_kj": 11}}"#,
        r#"{"horizon_slots": 1, "users_per_slot": 1, "params": {"harvest_efficiency": 1.5}}"#,
        r#"{"horizon_slots": 1, "users_per_slot": 1, "topology": {"drone_capacity_users": 25}}"#,
        r#"{"horizon_slots": 1, "users_per_slot": 1, "topology": {"drone_sites": [{"x_m": 2000, "y_m": 0}]}}"#,
        r#"{"horizon_slots": 1, "users_per_slot": 1, "params": {"battery_capacity_j": 1, "battery_capacity_kj": 1}}"#,
    ];
    for c in cases {
        assert!(matches!(parse_scenario(c), Err(ScenarioError::Validation(_))), "{c}");
    }
}

#[test]
fn parse_errors_carry_position() {
    let err = parse_scenario("{\n \"horizon_slots\": 1,\n \"bogus\": 3, \"users_per_slot\": 1}").unwrap_err();
    match err {
        ScenarioError::Parse { line, message, .. } => {
            assert_eq!(line, 3);
            assert!(message.contains("bogus"));
        }
        other => panic!("unexpected {other}"),
    }
    assert!(matches!(load_scenario("/nonexistent/file.json"), Err(ScenarioError::Io { .. })));
}

#[test]
fn baseline_layout_is_accepted() {
    let s = minimal("140");
    let t = &s.topology;
    assert_eq!((t.mbs.len(), t.drones, t.num_sites()), (4, 6, 17));
    assert!(t.drone_sites[1..].iter().all(|p| p.h == 60.0));
    assert_eq!(t.drone_coverage_radius_m, 150.0);
    assert!(s.warnings.is_empty(), "{:?}", s.warnings);
}

#[test]
fn tabulated_uniform_matches_analytic() {
    // Uniform density over a 2 km square, renormalized to the macro disk.
    let n = 200;
    let cell = 10.0;
    let mut mass = 0.0;
    let mut grid = vec![0.0; n * n];
    let inside = |ix: usize, iy: usize| {
        let x = -1000.0 + (ix as f64 + 0.5) * cell;
        let y = -1000.0 + (iy as f64 + 0.5) * cell;
        x * x + y * y <= 1e6
    };
    for iy in 0..n {
        for ix in 0..n {
            if inside(ix, iy) {
                grid[iy * n + ix] = 1.0;
                mass += cell * cell;
            }
        }
    }
    grid.iter_mut().for_each(|v| *v /= mass);
    let pdf = SpatialPdf::Tabulated(TabulatedPdf { x0_m: -1000.0, y0_m: -1000.0, cell_m: cell, nx: n, ny: n, grids: vec![grid] });
    let base = minimal("140");
    let s = Scenario::new(base.topology.clone(), UserModel { users: vec![140.0; 3], pdf }, base.params.clone(), 3, base.re.clone()).unwrap();
    assert_abs_diff_eq!(s.site_load(0, 1), base.site_load(0, 1), epsilon = 0.02);
    assert_abs_diff_eq!(s.mbs_load(0, 2), base.mbs_load(0, 2), epsilon = 0.05);
}

#[test]
fn fixed_fractions_are_used_verbatim() {
    let s = parse_scenario(
        r#"{"horizon_slots": 1, "users_per_slot": 100,
            "topology": {"drones": 1, "mbs": [{"x_m": 500, "y_m": 0, "radius_m": 250, "capacity_users": 20}],
                         "drone_sites": [{"x_m": 200, "y_m": 0, "h_m": 60}, {"x_m": -200, "y_m": 0, "h_m": 60}]},
            "user_pdf": {"kind": "fixed_per_site", "mbs": [0.3], "sites": [0.05, 0.5]}}"#,
    )
    .unwrap();
    assert_eq!(s.mbs_load(0, 0), 20.0);
    assert_eq!(s.site_load(0, 1), 5.0);
    assert_eq!(s.site_load(0, 2), 10.0);
}

#[test]
fn overlap_goes_to_the_drone_site() {
    // MBS disk intersects a candidate drone disk; the shared area is removed from the MBS.
    let s = parse_scenario(
        r#"{"horizon_slots": 1, "users_per_slot": 100,
            "topology": {"drones": 1, "mbs": [{"x_m": 400, "y_m": 0, "radius_m": 250, "capacity_users": 100}],
                         "drone_capacity_users": 100, "macro": {"radius_m": 1000, "capacity_users": 130},
                         "drone_sites": [{"x_m": 200, "y_m": 0, "h_m": 60}]}}"#,
    )
    .unwrap();
    let own = std::f64::consts::PI * 250.0 * 250.0;
    let lens = coverage::lens_area(
        &coverage::Disk { cx: 400.0, cy: 0.0, r: 250.0 },
        &coverage::Disk { cx: 200.0, cy: 0.0, r: 150.0 },
    );
    let a0 = std::f64::consts::PI * 1e6;
    assert_abs_diff_eq!(s.mbs_load(0, 0), 100.0 * (own - lens) / a0, epsilon = 1e-9);
}

proptest! {
    #[test]
    fn triangle_inequality(pts in proptest::collection::vec((-1000.0f64..1000.0, -1000.0f64..1000.0, 0.0f64..200.0), 3)) {
        let p: Vec<GeoPoint> = pts.iter().map(|&(x, y, h)| GeoPoint::new(x, y, h)).collect();
        let (a, b, c) = (&p[0], &p[1], &p[2]);
        prop_assert!(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9);
        prop_assert!((distance(a, b) - distance(b, a)).abs() < 1e-12);
    }

    #[test]
    fn served_users_bounded_and_monotone(u in 0.0f64..300.0, mask in 0u32..16, sites in proptest::collection::vec(0usize..17, 6)) {
        let s = minimal(&format!("{u}"));
        let mut sites = sites;
        // One drone per non-station site.
        let mut seen = std::collections::HashSet::new();
        for v in sites.iter_mut() {
            if *v != 0 && !seen.insert(*v) { *v = 0; }
        }
        let on: Vec<bool> = (0..4).map(|k| mask & (1 << k) != 0).collect();
        let active = ActiveSet { mbs_on: &on, drone_sites: &sites };
        let macro_u = s.users_served(CellId::Macro, 0, active).unwrap();
        let mut total = macro_u;
        for k in 0..4 { total += s.users_served(CellId::Mbs(k), 0, active).unwrap(); }
        for l in 0..6 { total += s.users_served(CellId::Drone(l), 0, active).unwrap(); }
        prop_assert!(macro_u >= 0.0);
        prop_assert!(total <= u + 1e-9);
        // Switching one more MBS on never increases the macro load.
        if let Some(k) = on.iter().position(|o| !o) {
            let mut more = on.clone();
            more[k] = true;
            let a2 = ActiveSet { mbs_on: &more, drone_sites: &sites };
            prop_assert!(s.users_served(CellId::Macro, 0, a2).unwrap() <= macro_u + 1e-12);
        }
    }
}
