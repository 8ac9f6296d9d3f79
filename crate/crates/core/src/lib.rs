//! Discrete-time simulator of distributed sidelink scheduling with
//! sensing-based semi-persistent reservations.
//!
//! The crate models the resource grid ([`grid`]), the radio channel
//! ([`channel`]), the per-vehicle scheduler with linear or exponentially
//! weighted sensing averages ([`sps`]), vehicle placement and traces
//! ([`mobility`]), the simulation loop ([`engine`]) and packet reception
//! statistics ([`metrics`]).

pub mod channel;
pub mod engine;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod mobility;
pub mod rng;
pub mod sps;

pub use channel::{ChannelConfig, PathlossModel, SensedPowerGrid, SinrBreakdown, SATURATED};
pub use engine::{run, run_with_observer, Observer, Scenario, SimConfig, Simulation};
pub use error::{Error, Result};
pub use grid::{GridConfig, SubchannelId};
pub use metrics::{ErrorClass, Format, PrrRow, PrrTable, ReceptionEvent, SimulationReport, Variant, Verdict};
pub use mobility::{FreewayConfig, Position, Vehicle};
pub use sps::{Policy, Reservation, SensingHistory, SpsPolicyConfig};
