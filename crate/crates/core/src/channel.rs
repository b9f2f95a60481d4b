//! Average path loss for ground-to-ground and air-to-ground links.

use thiserror::Error;

use crate::scalar::{db_to_linear, Scalar};
use crate::scenario::{CellId, Scenario, ScenarioError, SystemParams, Topology};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("domain error: {0}")]
    Domain(String),
}

/// Constants of the two-state LoS/NLoS model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams<F> {
    pub wavelength_m: F,
    pub xi_los_db: F,
    pub xi_nlos_db: F,
    pub nu1: F,
    pub nu2: F,
}

impl ChannelParams<f64> {
    pub fn from_system(p: &SystemParams) -> Self {
        ChannelParams {
            wavelength_m: p.wavelength_m,
            xi_los_db: p.xi_los_db,
            xi_nlos_db: p.xi_nlos_db,
            nu1: p.nu1,
            nu2: p.nu2,
        }
    }
}

impl<F: Scalar> ChannelParams<F> {
    pub fn cast(p: &ChannelParams<f64>) -> Self {
        ChannelParams {
            wavelength_m: F::lit(p.wavelength_m),
            xi_los_db: F::lit(p.xi_los_db),
            xi_nlos_db: F::lit(p.xi_nlos_db),
            nu1: F::lit(p.nu1),
            nu2: F::lit(p.nu2),
        }
    }
}

/// Average transmitter-user distance and, for air links, the elevation angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry<F = f64> {
    pub delta_m: F,
    /// Degrees; `None` for ground links.
    pub theta_deg: Option<F>,
}

fn free_space<F: Scalar>(p: &ChannelParams<F>, delta: F, xi: F) -> Result<F, ChannelError> {
    if !(delta > F::zero()) {
        return Err(ChannelError::Domain(format!("link distance must be > 0, got {delta}")));
    }
    let four_pi = F::lit(4.0) * F::PI();
    Ok(F::lit(20.0) * (four_pi * delta / p.wavelength_m).log10() + xi)
}

/// NLoS path loss in dB.
pub fn pl_nlos<F: Scalar>(p: &ChannelParams<F>, delta: F) -> Result<F, ChannelError> {
    free_space(p, delta, p.xi_nlos_db)
}

/// LoS path loss in dB.
pub fn pl_los<F: Scalar>(p: &ChannelParams<F>, delta: F) -> Result<F, ChannelError> {
    free_space(p, delta, p.xi_los_db)
}

/// Probability of a line-of-sight link at elevation `theta` degrees.
pub fn p_los<F: Scalar>(p: &ChannelParams<F>, theta: F) -> Result<F, ChannelError> {
    if !(theta >= F::zero() && theta <= F::lit(90.0)) {
        return Err(ChannelError::Domain(format!("elevation angle must lie in [0, 90], got {theta}")));
    }
    Ok(F::one() / (F::one() + p.nu1 * (-p.nu2 * (theta - p.nu1)).exp()))
}

/// LoS-probability weighted average of the LoS and NLoS losses, in dB.
pub fn pl_air_avg<F: Scalar>(p: &ChannelParams<F>, geom: &LinkGeometry<F>) -> Result<F, ChannelError> {
    let theta = geom
        .theta_deg
        .ok_or_else(|| ChannelError::Domain("air link needs an elevation angle".into()))?;
    let prob = p_los(p, theta)?;
    let los = pl_los(p, geom.delta_m)?;
    let nlos = pl_nlos(p, geom.delta_m)?;
    Ok(prob * los + (F::one() - prob) * nlos)
}

/// Path loss of a link in dB: NLoS for ground cells, the weighted average for air cells.
pub fn pl_db<F: Scalar>(p: &ChannelParams<F>, geom: &LinkGeometry<F>) -> Result<F, ChannelError> {
    match geom.theta_deg {
        Some(_) => pl_air_avg(p, geom),
        None => pl_nlos(p, geom.delta_m),
    }
}

/// Path loss as a linear power ratio.
pub fn pl_linear<F: Scalar>(p: &ChannelParams<F>, geom: &LinkGeometry<F>) -> Result<F, ChannelError> {
    pl_db(p, geom).map(db_to_linear)
}

/// Mean distance from the center to a uniformly distributed point of a disk of radius `r`.
pub fn mean_disk_distance<F: Scalar>(r: F) -> F {
    F::lit(2.0) * r / F::lit(3.0)
}

/// Geometry of a ground cell of radius `r`.
pub fn ground_geometry<F: Scalar>(r: F) -> LinkGeometry<F> {
    LinkGeometry { delta_m: mean_disk_distance(r), theta_deg: None }
}

/// Geometry of a drone cell at altitude `h` covering radius `r`.
pub fn air_geometry<F: Scalar>(h: F, r: F) -> LinkGeometry<F> {
    let rbar = mean_disk_distance(r);
    LinkGeometry {
        delta_m: h.hypot(rbar),
        theta_deg: Some(h.atan2(rbar).to_degrees()),
    }
}

/// Geometry of a ground cell of the topology. Drone cells depend on the site; see [`site_geometry`].
pub fn link_geometry(cell: CellId, topology: &Topology) -> Result<LinkGeometry, ScenarioError> {
    match cell {
        CellId::Macro => Ok(ground_geometry(topology.macro_cell.radius_m)),
        CellId::Mbs(k) => topology
            .mbs
            .get(k)
            .map(|c| ground_geometry(c.radius_m))
            .ok_or(ScenarioError::UnknownCell(cell)),
        CellId::Drone(l) if l < topology.drones => {
            // Altitude of the first candidate site; all sites share one altitude in the baseline.
            let h = topology.drone_sites.get(1).map(|s| s.h).unwrap_or(0.0);
            Ok(air_geometry(h, topology.drone_coverage_radius_m))
        }
        CellId::Drone(_) => Err(ScenarioError::UnknownCell(cell)),
    }
}

/// Geometry of a drone parked at site `i`.
pub fn site_geometry(topology: &Topology, site: usize) -> LinkGeometry {
    air_geometry(topology.drone_sites[site].h, topology.drone_coverage_radius_m)
}

/// Linear path-loss factors for the macro cell, every MBS and every drone site.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLossTable {
    pub macro_lin: f64,
    pub mbs_lin: Vec<f64>,
    /// Entry 0 (the station) is unused and set to 1.
    pub site_lin: Vec<f64>,
}

impl PathLossTable {
    pub fn new(s: &Scenario) -> Result<Self, ChannelError> {
        let p = ChannelParams::from_system(&s.params);
        let t = &s.topology;
        let macro_lin = pl_linear(&p, &ground_geometry(t.macro_cell.radius_m))?;
        let mbs_lin = t
            .mbs
            .iter()
            .map(|c| pl_linear(&p, &ground_geometry(c.radius_m)))
            .collect::<Result<_, _>>()?;
        let mut site_lin = vec![1.0];
        for i in 1..t.drone_sites.len() {
            let g = site_geometry(t, i);
            // A site at ground level degenerates to an overhead-less link; fall back to NLoS.
            let lin = if g.delta_m > 0.0 { pl_linear(&p, &g)? } else { 1.0 };
            site_lin.push(lin);
        }
        Ok(PathLossTable { macro_lin, mbs_lin, site_lin })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params() -> ChannelParams<f64> {
        ChannelParams { wavelength_m: 0.125, xi_los_db: 1.0, xi_nlos_db: 12.0, nu1: 9.6, nu2: 0.29 }
    }

    #[test]
    fn nlos_spot_values() {
        let p = params();
        let d0 = 0.125 / (4.0 * std::f64::consts::PI);
        assert_abs_diff_eq!(pl_nlos(&p, d0).unwrap(), 12.0, epsilon = 1e-9);
        assert_abs_diff_eq!(pl_nlos(&p, 100.0).unwrap(), 92.05, epsilon = 0.01);
        assert_abs_diff_eq!(pl_nlos(&p, 1000.0).unwrap(), 112.05, epsilon = 0.01);
        assert!(pl_nlos(&p, 0.0).is_err());
        assert!(pl_nlos(&p, -3.0).is_err());
    }

    #[test]
    fn los_spot_values() {
        let p = params();
        let d0 = 0.125 / (4.0 * std::f64::consts::PI);
        assert_abs_diff_eq!(pl_los(&p, d0).unwrap(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(pl_los(&p, 100.0).unwrap(), 81.05, epsilon = 0.01);
    }

    #[test]
    fn los_probability() {
        let p = params();
        assert_abs_diff_eq!(p_los(&p, 9.6).unwrap(), 1.0 / 10.6, epsilon = 1e-12);
        assert_abs_diff_eq!(p_los(&p, 9.6).unwrap(), 0.09434, epsilon = 1e-5);
        assert_abs_diff_eq!(p_los(&p, 45.0).unwrap(), 0.99966, epsilon = 1e-5);
        assert!(p_los(&p, 90.0).unwrap() > 0.99999);
        assert_abs_diff_eq!(p_los(&p, 0.0).unwrap(), 0.006395, epsilon = 1e-5);
        assert!(p_los(&p, -0.1).is_err());
        assert!(p_los(&p, 90.5).is_err());
    }

    #[test]
    fn air_average() {
        let p = params();
        let over = LinkGeometry { delta_m: 100.0, theta_deg: Some(90.0) };
        assert_abs_diff_eq!(pl_air_avg(&p, &over).unwrap(), 81.05, epsilon = 0.05);
        let low = LinkGeometry { delta_m: 100.0, theta_deg: Some(0.0) };
        let v = pl_air_avg(&p, &low).unwrap();
        let pr = p_los(&p, 0.0).unwrap();
        assert_abs_diff_eq!(v, pr * 81.0460 + (1.0 - pr) * 92.0460, epsilon = 1e-3);
    }

    #[test]
    fn geometry() {
        let g = ground_geometry(1000.0f64);
        assert_abs_diff_eq!(g.delta_m, 666.666_666, epsilon = 1e-3);
        let a = air_geometry(60.0f64, 150.0);
        assert_abs_diff_eq!(a.delta_m, 116.619, epsilon = 1e-3);
        assert_abs_diff_eq!(a.theta_deg.unwrap(), 30.964, epsilon = 1e-3);
        let top = air_geometry(60.0f64, 1e-9);
        assert_abs_diff_eq!(top.theta_deg.unwrap(), 90.0, epsilon = 1e-6);
        assert_abs_diff_eq!(top.delta_m, 60.0, epsilon = 1e-6);
    }

    #[test]
    fn single_precision_agrees() {
        let p32 = ChannelParams::<f32>::cast(&params());
        let v = pl_nlos(&p32, 100.0f32).unwrap();
        assert!((v - 92.0460).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn losses_increase_with_distance(a in 0.01f64..1e5, b in 0.01f64..1e5) {
            prop_assume!((a - b).abs() > 1e-6);
            let p = params();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(pl_nlos(&p, lo).unwrap() < pl_nlos(&p, hi).unwrap());
            prop_assert!(pl_los(&p, lo).unwrap() < pl_los(&p, hi).unwrap());
            prop_assert!(pl_nlos(&p, hi).unwrap().is_finite());
            prop_assert!((pl_nlos(&p, a).unwrap() - pl_los(&p, a).unwrap() - 11.0).abs() < 1e-9);
        }

        #[test]
        fn air_loss_between_states(d in 1.0f64..1e4, t1 in 0.0f64..90.0, t2 in 0.0f64..90.0) {
            let p = params();
            prop_assume!((t1 - t2).abs() > 1e-3);
            let g1 = LinkGeometry { delta_m: d, theta_deg: Some(t1) };
            let v = pl_air_avg(&p, &g1).unwrap();
            prop_assert!(v >= pl_los(&p, d).unwrap() - 1e-9 && v <= pl_nlos(&p, d).unwrap() + 1e-9);
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(p_los(&p, lo).unwrap() < p_los(&p, hi).unwrap());
            let glo = LinkGeometry { delta_m: d, theta_deg: Some(lo) };
            let ghi = LinkGeometry { delta_m: d, theta_deg: Some(hi) };
            prop_assert!(pl_air_avg(&p, &glo).unwrap() > pl_air_avg(&p, &ghi).unwrap());
        }
    }
}
