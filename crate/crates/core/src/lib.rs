//! Planning and simulation of solar-powered drone base stations and micro
//! base station sleep modes in a macrocell HetNet.
//!
//! The physics layers ([`channel`], [`energy`], [`scenario`] geometry) are
//! generic over the [`Scalar`] type; the optimization layers work in `f64`.

pub mod channel;
pub mod cli;
pub mod energy;
pub mod problems;
pub mod re_model;
pub mod scalar;
pub mod scenario;
pub mod sim;
pub mod solver;
#[cfg(test)]
mod testutil;

pub use scalar::Scalar;

pub type Point = scenario::GeoPoint<f64>;
pub type PointF32 = scenario::GeoPoint<f32>;
pub type Profile = energy::PowerProfile<f64>;
pub type Kinetics = energy::DroneKinetics<f64>;
pub type Kinetics32 = energy::DroneKinetics<f32>;
pub type BatteryState = energy::Battery<f64>;
pub type DroneSlotEnergy = energy::SlotEnergy<f64>;
